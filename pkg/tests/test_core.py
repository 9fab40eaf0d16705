import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transport_maps.base import ChartDomain, ParamDomain, SmoothMap, affine_map, identity_map
from transport_maps.core import (
    AffineMap,
    FactorFamily,
    FibreModel,
    Section,
    TransportFamily,
    check_binary_consistency,
    check_gauge_invariance,
    check_groupoid,
    check_inverse,
    check_linearity,
    check_locality,
    check_reparam,
    compare_anchors,
    factor_rule,
    from_factor_maps,
    gauge_transform,
    pointwise_rule,
    transport_section,
)
from transport_maps.errors import SingularFactorError
from transport_maps.generators import SmoothMatrixField, random_factor_transport, well_conditioned

LINE = ParamDomain(1, ((0.0, 2.0),))
R1 = FibreModel(1)


def _rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def test_identity_factors_give_identity(box2, rng):
    t = from_factor_maps(FactorFamily(identity_map(box2), lambda l: np.eye(3), FibreModel(3)))
    v = rng.standard_normal(3)
    assert np.array_equal(t.apply(np.array([0.1, 0.2]), np.array([-0.5, 0.9]), v), v)


def test_scalar_exponential_factors():
    t = from_factor_maps(FactorFamily(identity_map(LINE), lambda l: np.array([[np.exp(l[0])]]), R1))
    for l, m in [(0.2, 1.7), (1.9, 0.1)]:
        assert np.allclose(t.apply(np.array([l]), np.array([m]), np.array([2.0])), 2.0 * np.exp(l - m), rtol=1e-14)


def test_singular_factor_rejected():
    with pytest.raises(SingularFactorError):
        FactorFamily(identity_map(LINE), lambda l: np.array([[1.0, 2.0], [2.0, 4.0]]), FibreModel(2))


def test_factor_shape_checked():
    with pytest.raises(ValueError):
        FactorFamily(identity_map(LINE), lambda l: np.eye(3), FibreModel(2))


@pytest.mark.parametrize("d, tol", [("identity", 0.0), ("double", 1e-14), ("random", 1e-12)])
def test_gauge_transform_keeps_transport(box2, rng, d, tol):
    fam = FactorFamily(identity_map(box2), SmoothMatrixField(rng, 2, 2), FibreModel(2))
    mat = {"identity": np.eye(2), "double": 2 * np.eye(2), "random": well_conditioned(rng, 2)}[d]
    assert check_gauge_invariance(fam, mat).max_residual <= tol


def test_gauge_transform_composes_on_the_left(box2, rng):
    field = SmoothMatrixField(rng, 2, 2)
    fam = FactorFamily(identity_map(box2), field, FibreModel(2))
    d = well_conditioned(rng, 2)
    l = np.array([0.3, -0.4])
    assert np.allclose(gauge_transform(fam, d).at(l).matrix, d @ field(l))


def test_groupoid_of_factor_transport(box2, rng):
    t, _ = random_factor_transport(rng, 4, True, box2)
    rep = check_groupoid(t, 200)
    assert rep.passed and rep.max_residual <= 1e-12
    assert rep.details["eq2.3"] <= 1e-14


def test_groupoid_of_additive_flow():
    c = 0.75
    t = TransportFamily(identity_map(LINE), R1, lambda l, m, v: v + (m - l) * c)
    rep = check_groupoid(t, 100)
    assert rep.passed and rep.max_residual <= 1e-14


def test_groupoid_violation_detected():
    t = TransportFamily(identity_map(LINE), R1, lambda l, m, v: v * (1 + np.abs(m - l)))
    direct = t.apply(np.array([1.0]), np.array([2.0]), t.apply(np.array([0.0]), np.array([1.0]), np.ones(1)))
    assert direct[0] == 4.0  # vs K_{0->2} 1 = 3
    rep = check_groupoid(t, 50)
    assert not rep.passed and rep.max_residual > 1e-3
    assert set(rep.worst_witness) == {"l", "m", "n", "vector"}


def test_inverse_round_trip(box2, rng):
    t, _ = random_factor_transport(rng, 3, False, box2)
    assert check_inverse(t).max_residual <= 1e-12


def test_report_json_schema(box2, rng):
    t, _ = random_factor_transport(rng, 2, False, box2)
    doc = json.loads(check_groupoid(t, 10).to_json())
    assert {"check", "tolerance", "max_residual", "worst_witness", "pass"} <= set(doc)
    assert doc["check"] == "eq2.2+eq2.3"


# -- sections -----------------------------------------------------------------


def test_constant_section_under_trivial_transport(box2):
    t = from_factor_maps(FactorFamily(identity_map(box2), lambda l: np.eye(2), FibreModel(2)))
    s = Section(FibreModel(2), lambda x: np.array([1.0, -2.0]))
    field = transport_section(t, s, np.array([0.0, 0.0]))
    for m in box2.sample(5):
        assert np.array_equal(field(m), [1.0, -2.0])


def test_transported_section_is_anchor_independent(box2, rng):
    t, factor = random_factor_transport(rng, 2, False, box2)
    v0 = rng.standard_normal(2)
    # sigma(x) = F(x)^-1 F(x0) v0 is K-transported
    x0 = np.array([0.2, 0.1])
    s = Section(FibreModel(2), lambda x: np.linalg.solve(factor(x), factor(x0) @ v0))
    assert compare_anchors(t, s, np.array([-0.7, 0.4]), np.array([0.6, -0.3]), tol=1e-12).passed
    assert transport_section(t, s, x0).defect(s).max_residual <= 1e-12


def test_non_transported_section_depends_on_anchor(box2):
    t = from_factor_maps(FactorFamily(identity_map(box2), lambda l: np.eye(2), FibreModel(2)))
    s = Section(FibreModel(2), lambda x: np.array([x[0], x[1] ** 2]))
    rep = compare_anchors(t, s, np.array([-0.5, 0.0]), np.array([0.5, 0.5]))
    assert not rep.passed and rep.max_residual > 1e-6


# -- restriction conditions -------------------------------------------------------

PLANE = ChartDomain(2, ((-5.0, 5.0), (-5.0, 5.0)))


def _pointwise_rule():
    return pointwise_rule(lambda x: _rot(x[0] + 0.3 * x[1]) * (1.5 + np.sin(x[1])), FibreModel(2))


def _parameter_reading_rule():
    # the factor looks at the parameter box and the raw parameter, not at kappa(l)
    def factor(kappa, l):
        width = kappa.domain.upper[0] - kappa.domain.lower[0]
        return _rot(width * l[0])

    return factor_rule(factor, FibreModel(2))


def test_locality_pointwise_factors(box2):
    kappa = affine_map([[1.0, 0.5], [0.0, 2.0]], [0.1, 0.0], box2, PLANE)
    t = _pointwise_rule()(kappa)
    assert check_locality(t, ParamDomain(2, ((-0.5, 0.5), (0.0, 0.8))), tol=1e-12).passed


def test_locality_violated(box2):
    kappa = affine_map(np.eye(2), None, box2, PLANE)
    t = _parameter_reading_rule()(kappa)
    rep = check_locality(t, ParamDomain(2, ((-0.5, 0.5), (0.0, 0.8))))
    assert not rep.passed


def test_reparametrization_identity_and_affine(box2):
    kappa = affine_map([[1.0, 0.5], [0.0, 2.0]], [0.1, 0.0], box2, PLANE)
    t = _pointwise_rule()(kappa)
    ident = affine_map(np.eye(2), None, box2, box2.as_chart())
    assert check_reparam(t, ident).max_residual == 0.0
    tau = affine_map([[0.5, 0.0], [0.2, 0.4]], [0.1, -0.2], box2, box2.as_chart())
    assert check_reparam(t, tau, tol=1e-12).passed


def test_reparametrization_violated(box2):
    kappa = affine_map(np.eye(2), None, box2, PLANE)
    t = _parameter_reading_rule()(kappa)
    tau = affine_map([[0.5, 0.0], [0.0, 0.5]], None, box2, box2.as_chart())
    assert not check_reparam(t, tau).passed


def test_binary_consistency_orthogonal(box2):
    t = from_factor_maps(FactorFamily(identity_map(box2), lambda l: _rot(l[0] - 2 * l[1]), FibreModel(2)))
    assert check_binary_consistency(t, lambda x, u, v: u @ v, tol=1e-12).passed


def test_binary_consistency_scaling_closed_form():
    t = from_factor_maps(FactorFamily(identity_map(LINE), lambda l: np.exp(l[0]) * np.eye(2), FibreModel(2)))
    rep = check_binary_consistency(t, lambda x, u, v: u @ v, samples=30, seed=4)
    from transport_maps.core import binary_samples

    expected = max(abs(u @ v) * abs(1 - np.exp(2 * (l[0] - m[0]))) for l, m, u, v in binary_samples(t, 30, 4))
    assert not rep.passed
    assert np.isclose(rep.max_residual, expected, rtol=1e-10)


def test_linearity_of_matrix_factors(box2, rng):
    t, _ = random_factor_transport(rng, 3, True, box2)
    assert check_linearity(t, tol=1e-12).passed


def test_linearity_broken_by_offset(box2):
    fam = FactorFamily(identity_map(box2), lambda l: AffineMap(np.eye(2), np.array([l[0], 1.0])), FibreModel(2))
    t = from_factor_maps(fam)
    assert not t.linear
    rep = check_linearity(t)
    assert not rep.passed


def test_linearity_broken_by_squaring(box2):
    t = TransportFamily(identity_map(box2), FibreModel(2), lambda l, m, v: v**2)
    assert not check_linearity(t).passed


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.booleans(), st.integers(0, 10_000))
def test_gauge_invariance_property(rank, cplx, seed):
    rng = np.random.default_rng(seed)
    box = ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0)))
    fam = FactorFamily(identity_map(box), SmoothMatrixField(rng, rank, 2, cplx), FibreModel(rank, "complex" if cplx else "real"))
    assert check_gauge_invariance(fam, well_conditioned(rng, rank, cplx), samples=20, tol=1e-12).passed


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.booleans(), st.integers(0, 10_000))
def test_groupoid_property(rank, cplx, seed):
    t, _ = random_factor_transport(np.random.default_rng(seed), rank, cplx)
    assert check_groupoid(t, 40, seed=seed % 97, tol=1e-12).passed
