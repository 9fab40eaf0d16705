import numpy as np
import pytest

from transport_maps import sphere
from transport_maps.base import SPHERE_CHART, ChartDomain, ParamDomain, SmoothMap, great_circle, identity_map, latitude_circle
from transport_maps.composite import CompositeDomain, FiniteDomain, identity_product_map
from transport_maps.core import FactorFamily, FibreModel, Section, TransportedSection, from_factor_maps
from transport_maps.errors import AxiomError, DomainError, SmoothnessError
from transport_maps.generators import SmoothMatrixField, random_factor_transport
from transport_maps.linear import (
    Connection,
    GammaField,
    LinearTransportRep,
    H_table,
    check_frame_covariance,
    check_gamma_difference,
    check_gamma_sign,
    check_linearity_of_derivation,
    curvature,
    derive_section,
    derive_section_limit,
    frame_change,
    gamma_from_H,
    gamma_table,
    rep_from_gamma,
    slice_rep,
    torsion,
    transport_from_gamma,
    transform_gamma,
    typed_partial_derivative,
)

BOX = ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0)))
LINE = ParamDomain(1, ((-1.0, 1.0),))
PATCH = ParamDomain(2, ((0.6, 2.5), (-1.0, 1.0)))


def _patch_map():
    return SmoothMap(PATCH, SPHERE_CHART, lambda p: np.array(p, dtype=float), lambda p: np.eye(2))


def _rep(rng, rank=2, cplx=False):
    t, _ = random_factor_transport(rng, rank, cplx, BOX)
    return t, LinearTransportRep.from_transport(t)


def _field(n=2):
    return Section(FibreModel(n), lambda x: np.array([np.sin(x[0]) + x[1] ** 2, x[0] * np.cos(x[1])])[:n])


# -- components -------------------------------------------------------------------


def test_trivial_transport_has_zero_gamma():
    rep = LinearTransportRep(identity_map(BOX), lambda m, l: np.eye(2))
    assert np.array_equal(gamma_from_H(rep)(np.array([0.2, 0.3])), np.zeros((2, 2, 2)))


def test_exponential_gamma_is_plus_one():
    rep = LinearTransportRep(identity_map(LINE), lambda m, l: np.array([[np.exp(l[0] - m[0])]]))
    g = gamma_from_H(rep)
    for l in LINE.sample(10):
        assert abs(g(l)[0, 0, 0] - 1.0) < 1e-8


def test_gamma_sign_mismatch_detected():
    rep = LinearTransportRep(identity_map(LINE), lambda m, l: np.array([[np.exp(m[0] ** 2 - l[0])]]))
    with pytest.raises(AxiomError):
        gamma_from_H(rep, verify=True)


def test_gamma_sign_identity(rng):
    _, rep = _rep(rng, 3)
    assert check_gamma_sign(rep, samples=50).passed


def test_sphere_gamma_from_reconstructed_transport():
    kappa = great_circle(0.5)
    exact = sphere.levi_civita().along(kappa)
    recovered = gamma_from_H(rep_from_gamma(kappa, exact), h=1e-5)
    for l in kappa.domain.sample(8, margin=0.01):
        x, v = kappa.eval(l), kappa.jacobian(l)[:, 0]
        christoffel = np.einsum("ijk,k->ij", sphere.christoffel(x), v)
        assert np.max(np.abs(recovered(l)[0] - christoffel)) <= 1e-5


def test_connection_along_map_contracts_christoffel():
    kappa = latitude_circle(1.1)
    g = sphere.levi_civita().along(kappa)(np.array([0.4]))[0]
    # velocity is d/dphi, so Gamma = Christoffel[:, :, 1]
    assert np.allclose(g, sphere.christoffel([1.1, 0.4])[:, :, 1])


# -- derivations -------------------------------------------------------------------


def test_flat_constant_section_has_zero_derivative():
    rep = LinearTransportRep(identity_map(BOX), lambda m, l: np.eye(2))
    s = Section(FibreModel(2), lambda x: np.array([3.0, -1.0]))
    assert np.allclose(derive_section(rep, s, [0.1, 0.2], 0), 0.0)


def test_flat_coordinate_section():
    rep = LinearTransportRep(identity_map(BOX), lambda m, l: np.eye(2))
    s = Section(FibreModel(2), lambda x: np.array([x[0], x[0]]))
    assert np.allclose(derive_section(rep, s, [0.1, 0.2], 0), [1.0, 1.0], atol=1e-9)
    assert np.allclose(derive_section(rep, s, [0.1, 0.2], 1), [0.0, 0.0], atol=1e-9)


def test_transported_section_has_zero_derivative(rng):
    t, rep = _rep(rng, 3)
    gamma = gamma_from_H(rep)
    sec = TransportedSection(t, rng.standard_normal(3), np.array([0.3, -0.4]))
    for l in BOX.sample(50, margin=0.01):
        for a in range(2):
            assert np.linalg.norm(derive_section(rep, sec, l, a, gamma=gamma)) <= 1e-5


def test_limit_and_component_forms_agree(rng):
    _, rep = _rep(rng, 2)
    s = _field()
    for l in BOX.sample(10, margin=0.05):
        for a in range(2):
            assert np.max(np.abs(derive_section(rep, s, l, a) - derive_section_limit(rep, s, l, a, 1e-4))) <= 1e-4


def test_derivation_needs_c1():
    rep = LinearTransportRep(identity_map(BOX), lambda m, l: np.eye(2))
    s = Section(FibreModel(2), lambda x: np.abs(x), smoothness="C0")
    with pytest.raises(SmoothnessError):
        derive_section(rep, s, [0.1, 0.1], 0)


def test_derivation_checks_domain():
    rep = LinearTransportRep(identity_map(BOX), lambda m, l: np.eye(2))
    with pytest.raises(DomainError):
        derive_section(rep, _field(), [2.0, 0.1], 0)


def test_derivation_is_linear(rng):
    _, rep = _rep(rng, 2, cplx=True)
    s1 = Section(FibreModel(2, "complex"), lambda x: np.array([x[0] + 1j * x[1], np.exp(x[0])]))
    s2 = Section(FibreModel(2, "complex"), lambda x: np.array([np.sin(x[1]), 1j * x[0] ** 2]))
    assert check_linearity_of_derivation(rep, s1, s2, 1.0, 0.0, samples=5, tol=1e-8).passed
    lam, mu = complex(rng.standard_normal(), rng.standard_normal()), complex(rng.standard_normal(), 1.0)
    assert check_linearity_of_derivation(rep, s1, s2, lam, mu, samples=5, tol=1e-8).passed


# -- frame changes -----------------------------------------------------------------


def test_identity_frame_change_keeps_gamma(rng):
    _, rep = _rep(rng)
    moved = frame_change(rep, lambda l: np.eye(2))
    l = np.array([0.2, -0.1])
    assert np.allclose(gamma_from_H(moved)(l), gamma_from_H(rep)(l), atol=1e-12)


def test_constant_frame_change_is_similarity(rng):
    _, rep = _rep(rng)
    A = np.array([[2.0, 1.0], [0.5, 1.5]])
    moved = gamma_from_H(frame_change(rep, lambda l: A))
    g = gamma_from_H(rep)
    for l in BOX.sample(5, margin=0.01):
        expect = np.stack([np.linalg.solve(A, ga @ A) for ga in g(l)])
        assert np.max(np.abs(moved(l) - expect)) <= 1e-8


def test_frame_covariance_inhomogeneous_law(rng):
    _, rep = _rep(rng)
    A = SmoothMatrixField(rng, 2, 2)
    assert check_frame_covariance(rep, A, samples=10, dA=A.derivative).passed
    # finite-difference dA as well
    assert check_frame_covariance(rep, A, samples=5).passed


def test_gamma_difference_is_homogeneous(rng):
    _, r1 = _rep(rng)
    _, r2 = _rep(rng)
    assert check_gamma_difference(r1, r2, SmoothMatrixField(rng, 2, 2), samples=10).passed


def test_transform_gamma_matches_formula():
    gamma = GammaField(lambda l: np.zeros((1, 2, 2)), 1)
    A = lambda l: np.array([[1.0, l[0]], [0.0, 1.0]])
    out = transform_gamma(gamma, A, np.array([0.3]))
    assert np.allclose(out[0], [[0.0, 1.0], [0.0, 0.0]], atol=1e-9)


# -- reconstruction ---------------------------------------------------------------


def test_reconstruction_of_zero_gamma():
    g = GammaField(lambda l: np.zeros((1, 3, 3)), 1)
    assert np.allclose(transport_from_gamma(g, [0.0], [0.7]), np.eye(3), atol=1e-15)


def test_reconstruction_of_constant_scalar_gamma():
    c = 0.8
    g = GammaField(lambda l: np.full((1, 1, 1), c), 1)
    assert abs(transport_from_gamma(g, [-0.3], [0.9])[0, 0] - np.exp(-c * 1.2)) <= 1e-9


def test_reconstructed_transport_is_lawful():
    kappa = great_circle(0.3)
    rep = rep_from_gamma(kappa, sphere.levi_civita().along(kappa))
    assert rep.check_groupoid(samples=10, tol=1e-9).passed


def test_reconstruction_needs_a_path():
    g = GammaField(lambda l: np.zeros((2, 1, 1)), 2)
    with pytest.raises(ValueError):
        transport_from_gamma(g, [0.0, 0.0], [1.0, 1.0])


@pytest.mark.parametrize("theta0", [np.pi / 3, np.pi / 4, 1.0])
def test_latitude_holonomy(theta0):
    g = sphere.levi_civita().along(latitude_circle(theta0))
    H = transport_from_gamma(g, [0.0], [2 * np.pi])
    assert abs(sphere.holonomy_angle(H, theta0) - sphere.expected_holonomy(theta0)) <= 1e-6


# -- torsion and curvature ---------------------------------------------------------


def _twisted_map():
    from transport_maps.cli import torsion_test_map

    return torsion_test_map()


def test_flat_torsion_is_clairaut():
    eta = _twisted_map()
    zero = GammaField(lambda p: np.zeros((2, 2, 2)), 2)
    for p in eta.domain.sample(5, margin=0.05):
        assert np.max(np.abs(torsion(zero, eta, p[:1], p[1:], 0, 0))) <= 1e-4


def test_levi_civita_is_torsion_free():
    eta = _twisted_map()
    g = sphere.levi_civita().along(eta)
    for p in eta.domain.sample(10, margin=0.05):
        assert np.max(np.abs(torsion(g, eta, p[:1], p[1:], 0, 0))) <= 1e-4


def test_torsion_of_asymmetric_connection():
    eta = _twisted_map()
    S = np.zeros((2, 2, 2))
    S[0, 0, 1], S[0, 1, 0] = 0.3, -0.3
    S[1, 0, 1], S[1, 1, 0] = -0.2, 0.2

    def coeffs(x):
        return np.transpose(sphere.christoffel(x) + S, (2, 0, 1))

    g = Connection(coeffs, 2, 2).along(eta)
    for p in eta.domain.sample(5, margin=0.05):
        J = eta.jacobian(p)
        d1, d2 = J[:, 0], J[:, 1]
        expected = np.einsum("ijk,j,k->i", S - np.transpose(S, (0, 2, 1)), d2, d1)
        assert np.max(np.abs(torsion(g, eta, p[:1], p[1:], 0, 0) - expected)) <= 1e-3


def test_flat_curvature_of_trivial_transport():
    eta = _patch_map()
    zero = GammaField(lambda p: np.zeros((2, 2, 2)), 2)
    for p in PATCH.sample(5, margin=0.05):
        assert np.max(np.abs(curvature(zero, eta, _field(), p[:1], p[1:], 0, 0))) <= 1e-3


def test_sphere_curvature_matches_riemann():
    eta = _patch_map()
    g = sphere.levi_civita().along(eta)
    s = _field()
    for p in PATCH.sample(6, margin=0.05):
        R = curvature(g, eta, s, p[:1], p[1:], 0, 0)
        expected = np.einsum("ijkl,j,k,l->i", sphere.riemann(p), s(p), [1.0, 0.0], [0.0, 1.0])
        assert np.max(np.abs(R - expected)) <= 1e-3


def test_flat_factor_transport_has_no_curvature(rng):
    t, rep = _rep(rng, 2)
    g = gamma_from_H(rep)
    for p in BOX.sample(5, margin=0.05):
        assert np.max(np.abs(curvature(g, t.map, _field(), p[:1], p[1:], 0, 0))) <= 1e-3


def test_curvature_needs_c2():
    eta = _patch_map()
    zero = GammaField(lambda p: np.zeros((2, 2, 2)), 2)
    s = Section(FibreModel(2), lambda x: x, smoothness="C1")
    with pytest.raises(SmoothnessError):
        curvature(zero, eta, s, [1.0], [0.0], 0, 0)


def test_torsion_needs_tangent_bundle():
    eta = _patch_map()
    g = GammaField(lambda p: np.zeros((2, 3, 3)), 2)
    with pytest.raises(ValueError):
        torsion(g, eta, [1.0], [0.0], 0, 0)


# -- typed derivatives -------------------------------------------------------------


def _composite_transport(rng, labels):
    dom = CompositeDomain(FiniteDomain(labels), BOX)
    fields = {a: SmoothMatrixField(rng, 2, 2) for a in labels}
    fam = FactorFamily(identity_product_map(dom), lambda p: fields[p[0]](p[1]), FibreModel(2))
    return from_factor_maps(fam)


def test_typed_derivative_on_singleton_reduces(rng):
    t = _composite_transport(rng, ("only",))
    sigma = lambda p: np.array([np.sin(p[1][0]), p[1][1] ** 2])
    rep = slice_rep(t, "only")
    along = lambda l: sigma(("only", l))
    x = np.array([0.2, -0.3])
    for a in range(2):
        typed = typed_partial_derivative(t, sigma, "only", x, a, "only")
        assert np.max(np.abs(typed - derive_section(rep, along, x, a))) <= 1e-6


def test_typed_derivative_same_type_constant_flat():
    dom = CompositeDomain(FiniteDomain(("a", "b")), BOX)
    t = from_factor_maps(FactorFamily(identity_product_map(dom), lambda p: np.eye(2), FibreModel(2)))
    sigma = lambda p: np.array([1.0, 2.0])
    assert np.allclose(typed_partial_derivative(t, sigma, "a", np.zeros(2), 0, "a"), 0.0)


def test_typed_derivative_step_halving(rng):
    t = _composite_transport(rng, ("a", "b"))
    sigma = lambda p: np.array([np.cos(p[1][0] + p[1][1]), p[1][0] * p[1][1]])
    x = np.array([0.1, 0.4])
    full = typed_partial_derivative(t, sigma, "a", x, 1, "b", eps=1e-3)
    half = typed_partial_derivative(t, sigma, "a", x, 1, "b", eps=5e-4)
    assert np.max(np.abs(full - half)) <= 1e-4


def test_tables(rng):
    _, rep = _rep(rng)
    rows = gamma_table(gamma_from_H(rep, verify=False), BOX, n=2)
    assert len(rows) == 4 and len(rows[0]["gamma"]) == 2
    assert len(H_table(rep, n=2)) == 16
