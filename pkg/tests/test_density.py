import numpy as np
import pytest

from transport_maps import sphere
from transport_maps.base import ParamDomain, great_circle, identity_map
from transport_maps.density import (
    TensorDensity,
    density_components,
    density_derivative,
    density_derivative_via_tensor,
    lift_gamma,
    lift_matrix,
    lift_rep,
    representation_defect,
    tensor_derivation_expansion,
    to_tensor,
    traces,
    transform_tensor,
)
from transport_maps.errors import SmoothnessError
from transport_maps.generators import random_factor_transport
from transport_maps.linear import Frame, LinearTransportRep, coordinate_frame, derive_section, gamma_from_H

BOX = ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0)))
E0 = Frame(lambda x: np.array([[1 + 0.1 * x[0], 0.2], [0.3 * np.sin(x[1]), 1.0]]), "E0")
E1 = Frame(lambda x: np.array([[2.0, np.cos(x[0])], [0.1, 1 + x[0] ** 2]]), "E1")


def _flat_rep():
    return LinearTransportRep(identity_map(BOX), lambda m, l: np.eye(2))


def _sphere_rep():
    kappa = great_circle(0.7)
    return LinearTransportRep(kappa, None, gamma=sphere.levi_civita().along(kappa))


def _mixed(w=0.7, frame=E1):
    return TensorDensity((1, 1), w, lambda x: np.array([[x[0], x[1] ** 2], [np.sin(x[1]), 1.0]]), E0, frame)


def test_transform_tensor_vector_and_covector(rng):
    A = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    v = rng.standard_normal(2)
    assert np.allclose(transform_tensor(v, A, 1, 0), np.linalg.solve(A, v))
    assert np.allclose(transform_tensor(v, A, 0, 1), A.T @ v)
    M = rng.standard_normal((2, 2))
    assert np.allclose(transform_tensor(M, A, 1, 1), np.linalg.solve(A, M @ A))


def test_weight_one_scalar_scales_with_det():
    ref = coordinate_frame(2)
    d = TensorDensity((0, 0), 1.0, lambda x: 3.0, ref)
    doubled = Frame(lambda x: np.diag([2.0, 1.0]), "doubled")
    assert abs(density_components(d, doubled, np.zeros(2)) - 6.0) <= 1e-14
    assert abs(to_tensor(d, doubled, np.zeros(2)) - 3.0) <= 1e-14


def test_reference_frame_gives_raw_components():
    d = _mixed(frame=E0)
    x = np.array([0.4, 0.1])
    assert np.allclose(density_components(d, E0, x), d(x), atol=1e-15)


def test_weight_zero_is_a_tensor(rng):
    d = _mixed(0.0)
    x = np.array([0.3, -0.2])
    A = np.linalg.solve(E0(x), E1(x))
    assert np.allclose(density_components(d, E1, x), transform_tensor(d(x), A, 1, 1))


def test_representation_is_frame_independent():
    d = _mixed()
    for x in BOX.sample(5):
        assert representation_defect(d, [E0, E1, coordinate_frame(2)], x) <= 1e-12


def test_lift_gamma_matches_lift_matrix(rng):
    G = rng.standard_normal((2, 2))
    T = rng.standard_normal((2, 2, 2))
    eps = 1e-7
    # derivative of the lifted group action at the identity
    M = lift_matrix(np.eye(2) + eps * G, 2, 1)
    fd = (M @ T.ravel() - T.ravel()) / eps
    assert np.allclose(lift_gamma(G, T, 2, 1).ravel(), fd, atol=1e-5)


def test_traces_signs():
    G = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert traces(G) == (5.0, -5.0)


def test_flat_scalar_density_is_pure_partial():
    d = TensorDensity((0, 0), 1.0, lambda x: x[0] ** 2 + x[1], coordinate_frame(2))
    l = np.array([0.3, 0.4])
    for sign in ("plus", "minus"):
        assert abs(density_derivative(d, _flat_rep(), l, 0, sign) - 0.6) <= 1e-8
        assert abs(density_derivative(d, _flat_rep(), l, 1, sign) - 1.0) <= 1e-8


def test_weight_zero_reduces_to_tensor_derivation(rng):
    t, _ = random_factor_transport(rng, 2, False, BOX)
    rep = LinearTransportRep.from_transport(t)
    ref = coordinate_frame(2)
    comps = lambda x: np.array([np.sin(x[0]), x[0] * x[1]])
    d = TensorDensity((1, 0), 0.0, comps, ref)
    for l in BOX.sample(5, margin=0.05):
        for sign in ("plus", "minus"):
            assert np.allclose(density_derivative(d, rep, l, 0, sign), derive_section(rep, comps, l, 0), atol=1e-7)
    # (1, 1) tensors through the induced transport on flattened tensors
    M = lambda x: np.array([[x[0], x[1] ** 2], [np.sin(x[1]), 1.0]])
    d2 = TensorDensity((1, 1), 0.0, M, ref)
    rep2 = lift_rep(rep, 1, 1)
    for l in BOX.sample(3, margin=0.05):
        direct = density_derivative(d2, rep, l, 1).ravel()
        assert np.allclose(direct, derive_section(rep2, lambda x: M(x).ravel(), l, 1), atol=1e-6)


def test_scalar_density_on_sphere_matches_classical(rng):
    rep = _sphere_rep()
    kappa = rep.map
    dens = lambda x: 2.0 + np.sin(x[0]) * np.cos(x[1])
    grad = lambda x: np.array([np.cos(x[0]) * np.cos(x[1]), -np.sin(x[0]) * np.sin(x[1])])
    d = TensorDensity((0, 0), 1.0, dens, coordinate_frame(2))
    for l in kappa.domain.sample(8, margin=0.02):
        x, xd = kappa.eval(l), kappa.jacobian(l)[:, 0]
        expected = grad(x) @ xd - dens(x) * (sphere.log_sqrt_det_gradient(x) @ xd)
        for sign in ("plus", "minus"):
            assert abs(density_derivative(d, rep, l, 0, sign) - expected) <= 1e-5


@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_two_routes_agree(sign):
    rep = _sphere_rep()
    d = _mixed()
    for l in rep.domain.sample(8, margin=0.02):
        r = density_derivative(d, rep, l, 0, sign)
        assert np.max(np.abs(r - density_derivative_via_tensor(d, rep, l, 0, sign))) <= 1e-4


def test_expansion_of_tensor_derivation():
    rep = _sphere_rep()
    d = _mixed(1.3)
    for l in rep.domain.sample(8, margin=0.02):
        direct, expanded = tensor_derivation_expansion(d, rep, l, 0)
        assert np.max(np.abs(direct - expanded)) <= 1e-4


def test_derivative_needs_c1():
    d = TensorDensity((0, 0), 1.0, lambda x: abs(x[0]), coordinate_frame(2), smoothness="C0")
    with pytest.raises(SmoothnessError):
        density_derivative(d, _flat_rep(), np.zeros(2), 0)


def test_bad_sign_rejected():
    d = TensorDensity((0, 0), 1.0, lambda x: 1.0, coordinate_frame(2))
    with pytest.raises(ValueError):
        density_derivative(d, _flat_rep(), np.zeros(2), 0, sign="both")
