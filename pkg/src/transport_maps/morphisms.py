"""Bundle morphisms and their consistency with pairs of transports.

A morphism ``(F, f)`` is stored through its fibre maps ``F_x`` as dense
``r2 x r1`` matrices. A morphism built along a map is indexed by the map's
parameter instead of the base point (``along`` is set).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .core import (
    DEFAULT_TOL,
    AxiomReport,
    FibreModel,
    TransportFamily,
    _norm,
    _Worst,
    binary_samples,
)
from .errors import DomainError


@dataclass(frozen=True)
class BundleMorphism:
    """``(F, f)`` from xi_1 to xi_2; ``F(x)`` maps the fibre over x to the
    fibre over ``f(x)``."""

    f: Callable[[Any], Any]
    F: Callable[[Any], np.ndarray]
    f_tag: str = "f"
    along: Optional[Any] = None

    def fibre_map(self, kappa, l):
        """``F_{kappa(l)}``."""
        if self.along is not None:
            if kappa is not self.along:
                raise DomainError("morphism was built along a different map")
            return np.asarray(self.F(l))
        return np.asarray(self.F(kappa(l)))


@dataclass(frozen=True)
class MorphismBundlePoint:
    """A point ``(F_b, f)`` of the morphism bundle; projects to ``b``."""

    base_point: Any
    fibre_map: np.ndarray
    f_tag: str = "f"

    def project(self):
        return self.base_point


def _pairs(t: TransportFamily, samples, seed):
    d = t.domain
    return list(zip(d.sample(samples, seed), d.sample(samples, seed + 1)))


def check_consistency(m: BundleMorphism, t1: TransportFamily, t2: TransportFamily, samples=50, seed=0, tol=DEFAULT_TOL):
    """``F_{kappa(m)} K1_{l->m} v = K2_{l->m} F_{kappa(l)} v`` on samples.

    ``t1`` runs along kappa in xi_1 and ``t2`` along ``f o kappa`` in xi_2.
    """
    kappa = t1.map
    rng = np.random.default_rng(seed)
    rep = _Worst()
    for l, mm in _pairs(t1, samples, seed):
        v = t1.fibre.random_vector(rng)
        lhs = m.fibre_map(kappa, mm) @ t1.apply(l, mm, v)
        rhs = t2.apply(l, mm, m.fibre_map(kappa, l) @ v)
        rep.update(_norm(lhs - rhs), l=l, m=mm, vector=v)
    return rep.report("eq5.1", tol)


def build_consistent_morphism(t1: TransportFamily, t2: TransportFamily, l0, C, f=None, f_tag="f") -> BundleMorphism:
    """``F_{kappa(l)} = K2_{l0->l} C K1_{l->l0}`` for any linear ``C``."""
    if not t1.domain.contains(l0):
        raise DomainError("anchor outside the parameter domain")
    C = np.asarray(C)
    F = lambda l: t2.matrix(l0, l) @ C @ t1.matrix(l, l0)
    return BundleMorphism(f or (lambda x: x), F, f_tag, along=t1.map)


def conjugate_anchor(t1: TransportFamily, t2: TransportFamily, l0, C, l1):
    """The ``C`` for anchor ``l1`` that describes the same morphism as
    ``(l0, C)``: ``K2_{l0->l1} C K1_{l1->l0}``."""
    return t2.matrix(l0, l1) @ np.asarray(C) @ t1.matrix(l1, l0)


def natural_transport(t1: TransportFamily, t2: TransportFamily) -> TransportFamily:
    """Transport on the morphism bundle: ``F -> K2_{l->m} F K1_{m->l}``.

    Fibres are ``r2 x r1`` matrices flattened row-major.
    """
    r1, r2 = t1.fibre.rank, t2.fibre.rank
    cplx = "complex" in (t1.fibre.field, t2.fibre.field)
    fibre = FibreModel(r1 * r2, "complex" if cplx else "real")

    def apply(l, m, v):
        X = np.asarray(v).reshape(r2, r1)
        return (t2.matrix(l, m) @ X @ t1.matrix(m, l)).ravel()

    def matrix(l, m):
        # vec_row(A X B) = kron(A, B^T) vec_row(X)
        return np.kron(t2.matrix(l, m), t1.matrix(m, l).T)

    source = "from_factors" if t1.source == t2.source == "from_factors" else "raw"
    return TransportFamily(t1.map, fibre, apply, source, matrix)


def check_prop_5_2(m: BundleMorphism, t1, t2, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """Consistency and being transported by the natural transport hold together.

    ``pass`` means the two residuals are on the same side of ``tol`` at every
    sample (the equivalence holds), whether or not the morphism is consistent.
    """
    kappa = t1.map
    t0 = natural_transport(t1, t2)
    c51, c511 = _Worst(), _Worst()
    disagreements = 0
    for l, mm in _pairs(t1, samples, seed):
        Fl, Fm = m.fibre_map(kappa, l), m.fibre_map(kappa, mm)
        r51 = _norm(Fm @ t1.matrix(l, mm) - t2.matrix(l, mm) @ Fl)
        r511 = _norm(Fm.ravel() - t0.apply(l, mm, Fl.ravel()))
        c51.update(r51, l=l, m=mm)
        c511.update(r511, l=l, m=mm)
        if (r51 <= tol) != (r511 <= tol):
            disagreements += 1
    return AxiomReport(
        "eq5.11",
        tol,
        c511.value,
        c511.witness,
        disagreements == 0,
        {
            "eq5.1": c51.value,
            "eq5.11": c511.value,
            "eq5.1_witness": c51.witness,
            "consistent": c51.value <= tol,
            "disagreements": disagreements,
            "samples": samples,
        },
    )


def binary_op_as_morphism(beta, t: TransportFamily, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """The binary-operation check rewritten as morphism consistency.

    xi_1 is the fibre product with transport ``K x K``, xi_2 the one-point
    bundle with the identity transport and ``F_x = beta_x``. Uses the same
    sample stream as :func:`~transport_maps.core.check_binary_consistency`.
    """
    kappa = t.map
    K1 = lambda l, mm, pair: (t.apply(l, mm, pair[0]), t.apply(l, mm, pair[1]))
    K2 = lambda l, mm, value: value
    F = lambda x, pair: beta(x, pair[0], pair[1])
    rep = _Worst()
    for l, mm, u, v in binary_samples(t, samples, seed):
        lhs = F(kappa(mm), K1(l, mm, (u, v)))
        rhs = K2(l, mm, F(kappa(l), (u, v)))
        rep.update(float(abs(lhs - rhs)), l=l, m=mm, vector=[u, v])
    return rep.report("eq2.9-via-5.1", tol)
