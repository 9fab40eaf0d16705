"""Transports along maps whose parameter set is a product ``A x M``.

Points of a product domain are pairs ``(a, x)``. ``A`` is either a finite
tuple of labels or a :class:`~transport_maps.base.ParamDomain`; ``M`` is a
parameter box. All model spaces Q_G, Q_H, Q_C are identified with the
coordinate fibre, so every factor is a square matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .base import ParamDomain, halton_points
from .core import (
    DEFAULT_TOL,
    AxiomReport,
    FactorFamily,
    FibreModel,
    TransportFamily,
    _check_condition,
    _jsonable,
    _norm,
    _Worst,
    check_groupoid,
    from_factor_maps,
)
from .errors import AxiomError, DomainError
from .io import grid_points, matrix_to_json


@dataclass(frozen=True)
class FiniteDomain:
    """A finite parameter set."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise ValueError("finite index set must be nonempty")

    @property
    def is_finite(self):
        return True

    def contains(self, a):
        return any(_same_label(a, b) for b in self.labels)

    def sample(self, n, seed=0, margin=0.0):
        rng = np.random.default_rng(seed)
        return [self.labels[i] for i in rng.integers(0, len(self.labels), size=n)]


def _same_label(a, b):
    try:
        return bool(np.all(np.asarray(a) == np.asarray(b))) and np.shape(a) == np.shape(b)
    except Exception:
        return a == b


def as_index_domain(A):
    if isinstance(A, (FiniteDomain, ParamDomain)):
        return A
    return FiniteDomain(tuple(A))


@dataclass(frozen=True)
class CompositeDomain:
    """``A x M`` with ``A`` finite or a box, ``M`` a box."""

    A: Any
    M: ParamDomain

    def __post_init__(self):
        object.__setattr__(self, "A", as_index_domain(self.A))

    @property
    def finite(self):
        return isinstance(self.A, FiniteDomain)

    def contains(self, p):
        a, x = p
        return self.A.contains(a) and self.M.contains(x)

    def sample(self, n, seed=0, margin=0.0):
        xs = self.M.sample(n, seed, margin)
        if self.finite:
            return list(zip(self.A.sample(n, seed + 7919), xs))
        pts = halton_points(np.array(self.A.bounds + self.M.bounds), n, seed)
        k = self.A.k
        return [(p[:k], p[k:]) for p in pts]


@dataclass(frozen=True)
class CompositeMap:
    """``eta: A x M -> B``; ``eval((a, x))`` returns a base point."""

    domain: CompositeDomain
    eval: Callable[[Any], Any]
    name: str = "eta"

    def __call__(self, p):
        if not self.domain.contains(p):
            raise DomainError(f"{_jsonable(p)} outside {self.name}'s domain")
        return self.eval(p)


def identity_product_map(domain: CompositeDomain) -> CompositeMap:
    return CompositeMap(domain, lambda p: p, name="id_AxM")


@dataclass(frozen=True)
class _SliceMap:
    domain: Any
    eval: Callable[[Any], Any]

    def __call__(self, p):
        return self.eval(p)


@dataclass(frozen=True)
class CompositeFactorization:
    """The five factor families of a transport along ``eta: A x M -> B``.

    ``G(a, x)``, ``H(a, x)``, ``F(a, x)`` act on the fibre over eta(a, x);
    ``C(a)`` and ``D(x)`` act on the model space. The defining relation is
    ``F = C(a) G(a, x) = D(x) H(a, x)``.
    """

    map: CompositeMap
    fibre: FibreModel
    G: Callable[[Any, Any], np.ndarray]
    H: Callable[[Any, Any], np.ndarray]
    C: Callable[[Any], np.ndarray]
    D: Callable[[Any], np.ndarray]
    F: Callable[[Any, Any], np.ndarray]
    anchor: Any = None

    @property
    def domain(self) -> CompositeDomain:
        return self.map.domain

    def C_transport(self, a, b):
        """``C_{a->b} = C_b^-1 C_a``."""
        return np.linalg.solve(self.C(b), self.C(a))

    def D_transport(self, x, y):
        return np.linalg.solve(self.D(y), self.D(x))

    def check_relations(self, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
        """``F = C G = D H`` and its consequence ``G = C^-1 D H`` on samples."""
        rep = _Worst()
        for a, x in self.domain.sample(samples, seed):
            F, G, H, C, D = self.F(a, x), self.G(a, x), self.H(a, x), self.C(a), self.D(x)
            r = max(
                _norm(F - C @ G),
                _norm(F - D @ H),
                _norm(G - np.linalg.solve(C, D @ H)),
            )
            rep.update(r, l=(a, x))
        return rep.report("eq3.8", tol)

    def check_cocycle(self, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
        """``C_{a->b} = C_{c->b} C_{a->c}`` and ``C_{a->a} = id``."""
        A = self.domain.A
        rep = _Worst()
        for a, b, c in zip(A.sample(samples, seed), A.sample(samples, seed + 1), A.sample(samples, seed + 2)):
            r = _norm(self.C_transport(a, b) - self.C_transport(c, b) @ self.C_transport(a, c))
            r = max(r, _norm(self.C_transport(a, a) - np.eye(self.fibre.rank)))
            rep.update(r, l=a, m=b, n=c)
        return rep.report("C-cocycle", tol)

    def to_table(self, x_grid=5):
        """Sampled matrices keyed by ``(a, x-grid-index)``; needs finite ``A``."""
        if not self.domain.finite:
            raise ValueError("tables need a finite index set A")
        xs = grid_points(self.domain.M, x_grid)
        rows = []
        for a in self.domain.A.labels:
            for i, x in enumerate(xs):
                rows.append(
                    {
                        "a": _jsonable(a),
                        "x_index": i,
                        "x": _jsonable(x),
                        "G": matrix_to_json(self.G(a, x)),
                        "H": matrix_to_json(self.H(a, x)),
                        "F": matrix_to_json(self.F(a, x)),
                    }
                )
        return {
            "anchor": _jsonable(self.anchor),
            "C": [{"a": _jsonable(a), "matrix": matrix_to_json(self.C(a))} for a in self.domain.A.labels],
            "D": [{"x_index": i, "matrix": matrix_to_json(self.D(x))} for i, x in enumerate(xs)],
            "entries": rows,
        }


def factorize(t: TransportFamily, anchor, check_samples=50, seed=0, tol=DEFAULT_TOL) -> CompositeFactorization:
    """Canonical factorization with every factor pointing at ``anchor = (a0, x0)``.

    ``F(a,x) = K_{(a,x)->(a0,x0)}``, ``G(a,x) = K_{(a,x)->(a,x0)}``,
    ``H(a,x) = K_{(a,x)->(a0,x)}``, ``C(a) = K_{(a,x0)->(a0,x0)}``,
    ``D(x) = K_{(a0,x)->(a0,x0)}``.
    """
    if not isinstance(t.domain, CompositeDomain):
        raise TypeError("factorize needs a transport over a product domain")
    if not t.domain.contains(anchor):
        raise DomainError(f"anchor {_jsonable(anchor)} outside the domain")
    report = check_groupoid(t, samples=check_samples, seed=seed, tol=tol)
    if not report.passed:
        raise AxiomError("transport fails the groupoid laws", report)
    a0, x0 = anchor
    K = t.matrix
    return CompositeFactorization(
        map=t.map,
        fibre=t.fibre,
        G=lambda a, x: K((a, x), (a, x0)),
        H=lambda a, x: K((a, x), (a0, x)),
        C=lambda a: K((a, x0), (a0, x0)),
        D=lambda x: K((a0, x), (a0, x0)),
        F=lambda a, x: K((a, x), (a0, x0)),
        anchor=anchor,
    )


def reconstruct(f: CompositeFactorization) -> TransportFamily:
    """``K_{(a,x)->(b,y)} = F(b,y)^-1 F(a,x)``."""
    fam = FactorFamily(f.map, lambda p: f.F(*p), f.fibre)
    return from_factor_maps(fam)


def gauge_composite(f: CompositeFactorization, PG=None, PH=None, PC=None) -> CompositeFactorization:
    """Apply the residual gauge freedom.

    ``G -> PG(a) G``, ``H -> PH(x) H``, ``C -> PC C PG(a)^-1``,
    ``D -> PC D PH(x)^-1``, ``F -> PC F``. Missing arguments mean identity.
    """
    n = f.fibre.rank
    eye = np.eye(n)
    PG = PG or (lambda a: eye)
    PH = PH or (lambda x: eye)
    PC = eye if PC is None else np.asarray(PC)
    _check_condition(PC, " (PC)")

    def C(a):
        P = PG(a)
        return PC @ np.linalg.solve(P.T, f.C(a).T).T

    def D(x):
        P = PH(x)
        return PC @ np.linalg.solve(P.T, f.D(x).T).T

    return CompositeFactorization(
        f.map,
        f.fibre,
        G=lambda a, x: PG(a) @ f.G(a, x),
        H=lambda a, x: PH(x) @ f.H(a, x),
        C=C,
        D=D,
        F=lambda a, x: PC @ f.F(a, x),
        anchor=f.anchor,
    )


class RestrictedTransports:
    """``xK_{a->b} = H(b,x)^-1 H(a,x)`` and ``aK_{x->y} = G(a,y)^-1 G(a,x)``."""

    def __init__(self, f: CompositeFactorization):
        self.f = f

    def across(self, x, a, b):
        """Matrix of ``K_{(a,x)->(b,x)}``."""
        return np.linalg.solve(self.f.H(b, x), self.f.H(a, x))

    def along(self, a, x, y):
        """Matrix of ``K_{(a,x)->(a,y)}``."""
        return np.linalg.solve(self.f.G(a, y), self.f.G(a, x))

    def slice_A(self, x) -> TransportFamily:
        """``a -> b`` transport at fixed ``x`` as a transport on the set A."""
        m = _SliceMap(self.f.domain.A, lambda a: self.f.map((a, x)))
        return TransportFamily(
            m, self.f.fibre, lambda a, b, v: self.across(x, a, b) @ v, "from_factors",
            lambda a, b: self.across(x, a, b),
        )

    def slice_M(self, a) -> TransportFamily:
        m = _SliceMap(self.f.domain.M, lambda x: self.f.map((a, x)))
        return TransportFamily(
            m, self.f.fibre, lambda x, y, v: self.along(a, x, y) @ v, "from_factors",
            lambda x, y: self.along(a, x, y),
        )

    def check_commutation(self, samples=100, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
        """Both orderings of the two restricted transports give the full one."""
        full = reconstruct(self.f)
        dom = self.f.domain
        rep = _Worst()
        for (a, x), (b, y) in zip(dom.sample(samples, seed), dom.sample(samples, seed + 1)):
            K = full.matrix((a, x), (b, y))
            first_x = self.across(y, a, b) @ self.along(a, x, y)
            first_a = self.along(b, x, y) @ self.across(x, a, b)
            rep.update(max(_norm(K - first_x), _norm(K - first_a)), l=(a, x), m=(b, y))
        return rep.report("eq3.1", tol)


def restricted_transports(f: CompositeFactorization) -> RestrictedTransports:
    return RestrictedTransports(f)


def family_to_product(
    bundles, transports, M: ParamDomain, samples=50, seed=0, tol=DEFAULT_TOL
) -> TransportFamily:
    """Transport along ``id_{A x M}`` from a family of bundles over M.

    ``bundles`` maps each label a to a :class:`FibreModel`; ``transports(a, b,
    x, y)`` returns the matrix of ``I^{a,b}_{x->y}``. The composition and
    identity laws are checked on samples; violations raise :class:`AxiomError`.
    """
    labels = tuple(bundles)
    fibres = {bundles[a] for a in labels}
    if len(fibres) != 1:
        raise ValueError("all bundles of the family need the same fibre model")
    fibre = fibres.pop()
    domain = CompositeDomain(FiniteDomain(labels), M)
    rng = np.random.default_rng(seed)
    comp, ident = _Worst(), _Worst()
    ps, qs, rs = domain.sample(samples, seed), domain.sample(samples, seed + 1), domain.sample(samples, seed + 2)
    for (a, x), (b, y), (c, z) in zip(ps, qs, rs):
        v = fibre.random_vector(rng)
        lhs = transports(b, c, y, z) @ (transports(a, b, x, y) @ v)
        comp.update(_norm(lhs - transports(a, c, x, z) @ v), l=(a, x), m=(b, y), n=(c, z), vector=v)
        ident.update(_norm(transports(a, a, x, x) @ v - v), l=(a, x), vector=v)
    worst = comp if comp.value >= ident.value else ident
    report = AxiomReport(
        "family-laws", tol, worst.value, worst.witness,
        bool(comp.value <= tol and ident.value <= tol),
        {"composition": comp.value, "identity": ident.value, "samples": samples},
    )
    if not report.passed:
        raise AxiomError("family transports violate the composition/identity laws", report)
    I = lambda p, q: transports(p[0], q[0], p[1], q[1])
    return TransportFamily(
        identity_product_map(domain), fibre, lambda p, q, v: I(p, q) @ v, "checked", I,
    )


def product_map(kappa1, kappa2) -> CompositeMap:
    """``kappa1 x kappa2: (a, x) -> (kappa1(a), kappa2(x))``."""
    dom = CompositeDomain(kappa1.domain, kappa2.domain)
    return CompositeMap(dom, lambda p: (kappa1(p[0]), kappa2(p[1])), name="product")


def induced_product_transport(t0: TransportFamily, h, kappa1) -> TransportFamily:
    """``K_{(a,x)->(b,y)} = h(kappa1(b), kappa2(y))^-1 K0_{x->y} h(kappa1(a), kappa2(x))``.

    ``t0`` is a transport along ``kappa2`` in the reference bundle and
    ``h(a', x')`` is the fibre isomorphism onto the reference fibre.
    """
    kappa2 = t0.map
    eta = product_map(kappa1, kappa2)

    def hmat(a, x):
        Mh = np.asarray(h(kappa1(a), kappa2(x)))
        _check_condition(Mh, " (h)")
        return Mh

    def matrix(p, q):
        (a, x), (b, y) = p, q
        return np.linalg.solve(hmat(b, y), t0.matrix(x, y) @ hmat(a, x))

    def apply(p, q, v):
        (a, x), (b, y) = p, q
        return np.linalg.solve(hmat(b, y), t0.apply(x, y, hmat(a, x) @ v))

    return TransportFamily(eta, t0.fibre, apply, t0.source, matrix if t0.linear else None)


def check_gauge_law(f: CompositeFactorization, g: CompositeFactorization, PG, PH, PC, samples=50, seed=0, tol=DEFAULT_TOL):
    """Factors of ``g`` equal those of ``f`` moved by the residual gauge law:
    ``G' = PG G``, ``H' = PH H``, ``C' = PC C PG^-1``, ``D' = PC D PH^-1``,
    ``F' = PC F``."""
    rep = _Worst()
    for a, x in f.domain.sample(samples, seed):
        Pg, Ph = PG(a), PH(x)
        r = max(
            _norm(g.G(a, x) - Pg @ f.G(a, x)),
            _norm(g.H(a, x) - Ph @ f.H(a, x)),
            _norm(g.C(a) @ Pg - PC @ f.C(a)),
            _norm(g.D(x) @ Ph - PC @ f.D(x)),
            _norm(g.F(a, x) - PC @ f.F(a, x)),
        )
        rep.update(r, l=(a, x))
    return rep.report("eq3.9-3.11", tol)


def reanchor_gauge(t: TransportFamily, old, new):
    """Gauge data ``(PG, PH, PC)`` relating canonical factorizations at two anchors."""
    (a0, x0), (a1, x1) = old, new
    K = t.matrix
    PG = lambda a: K((a, x0), (a, x1))
    PH = lambda x: K((a0, x), (a1, x))
    PC = K((a0, x0), (a1, x1))
    return PG, PH, PC
