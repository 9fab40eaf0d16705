"""Transports along maps: factor-map construction, gauge freedom, transported
sections and the axiom checks.

A transport along ``kappa`` is stored as a :class:`TransportFamily` whose
``apply(l, m, v)`` carries a fibre vector over ``kappa(l)`` to the fibre over
``kappa(m)``. Lawful transports are always built from invertible factor maps
``F(l)`` as ``F(m)^-1 o F(l)``; anything else is tagged ``raw`` and is only
ever checked.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .base import SmoothMap
from .errors import DomainError, SingularFactorError

DEFAULT_TOL = 1e-9
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FibreModel:
    """Coordinate model R^r or C^r of every fibre."""

    rank: int
    field: str = "real"

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.field not in ("real", "complex"):
            raise ValueError(f"unknown scalar field {self.field!r}")

    @property
    def dtype(self):
        return complex if self.field == "complex" else float

    def random_vector(self, rng):
        v = rng.standard_normal(self.rank)
        if self.field == "complex":
            v = v + 1j * rng.standard_normal(self.rank)
        return v

    def random_scalar(self, rng):
        s = rng.standard_normal()
        return s + 1j * rng.standard_normal() if self.field == "complex" else s


@dataclass(frozen=True)
class AffineMap:
    """Invertible fibre bijection ``v -> matrix @ v + shift``."""

    matrix: np.ndarray
    shift: Optional[np.ndarray] = None

    @property
    def is_linear(self):
        return self.shift is None or not np.any(self.shift)

    def __call__(self, v):
        out = self.matrix @ v
        return out if self.shift is None else out + self.shift

    def solve(self, w):
        """Preimage of ``w``."""
        if self.shift is not None:
            w = w - self.shift
        return np.linalg.solve(self.matrix, w)

    def after(self, d: "AffineMap") -> "AffineMap":
        """The composite ``d o self``."""
        shift = None if self.shift is None else d.matrix @ self.shift
        if d.shift is not None:
            shift = d.shift if shift is None else shift + d.shift
        return AffineMap(d.matrix @ self.matrix, shift)


def as_affine(x) -> AffineMap:
    if isinstance(x, AffineMap):
        return x
    return AffineMap(np.asarray(x))


def _check_condition(mat, where=""):
    c = np.linalg.cond(mat)
    if not np.isfinite(c) or c > MAX_CONDITION:
        raise SingularFactorError(f"factor map singular{where} (cond={c:.3g})", condition=c)
    return c


def _domain_of(kappa):
    return kappa.domain


@dataclass(frozen=True)
class FactorFamily:
    """``l -> F(l)``: invertible maps from the fibre over kappa(l) to Q.

    ``factor(l)`` returns a square matrix or an :class:`AffineMap`.
    """

    map: Any
    factor: Callable[[Any], Any]
    fibre: FibreModel
    check_points: int = field(default=8, compare=False)

    def __post_init__(self):
        worst = 0.0
        for l in _domain_of(self.map).sample(self.check_points, seed=2024):
            F = as_affine(self.factor(l))
            if F.matrix.shape != (self.fibre.rank, self.fibre.rank):
                raise ValueError(f"factor has shape {F.matrix.shape}, fibre rank {self.fibre.rank}")
            worst = max(worst, _check_condition(F.matrix, f" at {_jsonable(l)}"))
        object.__setattr__(self, "max_condition", worst)

    def at(self, l) -> AffineMap:
        return as_affine(self.factor(l))

    @property
    def is_linear(self):
        l = _domain_of(self.map).sample(1, seed=7)[0]
        return self.at(l).is_linear


@dataclass(frozen=True)
class TransportFamily:
    """Two-point family ``K_{l->m}`` along ``map``.

    ``rule`` (optional) is the transport along maps itself, ``kappa -> K^kappa``;
    it is what the locality and reparametrization checks exercise.
    """

    map: Any
    fibre: FibreModel
    apply_fn: Callable[[Any, Any, np.ndarray], np.ndarray]
    source: str = "raw"
    matrix_fn: Optional[Callable[[Any, Any], np.ndarray]] = None
    rule: Optional[Callable[[Any], "TransportFamily"]] = None
    linear: bool = True

    @property
    def domain(self):
        return self.map.domain

    def apply(self, l, m, v):
        return self.apply_fn(l, m, np.asarray(v))

    def matrix(self, l, m):
        """Matrix of ``K_{l->m}`` in the fibre coordinates (linear transports)."""
        if self.matrix_fn is not None:
            return self.matrix_fn(l, m)
        eye = np.eye(self.fibre.rank, dtype=self.fibre.dtype)
        return np.stack([self.apply(l, m, e) for e in eye], axis=1)

    def along(self, kappa) -> "TransportFamily":
        if kappa is self.map:
            return self
        if self.rule is None:
            raise TypeError("transport was not built from a rule; cannot re-target it")
        return self.rule(kappa)


def from_factor_maps(f: FactorFamily, rule=None) -> TransportFamily:
    """``K_{l->m} = F(m)^-1 o F(l)``; the groupoid laws hold by construction."""

    def apply(l, m, v):
        Fm = f.at(m)
        _check_condition(Fm.matrix, f" at {_jsonable(m)}")
        return Fm.solve(f.at(l)(v))

    linear = f.is_linear
    matrix_fn = None
    if linear:

        def matrix_fn(l, m):
            Fm = f.at(m).matrix
            _check_condition(Fm, f" at {_jsonable(m)}")
            return np.linalg.solve(Fm, f.at(l).matrix)

    return TransportFamily(f.map, f.fibre, apply, "from_factors", matrix_fn, rule, linear)


def gauge_transform(f: FactorFamily, d) -> FactorFamily:
    """Left-compose every factor with the fixed bijection ``d`` of Q."""
    d = as_affine(d)
    _check_condition(d.matrix, " (gauge)")
    return FactorFamily(f.map, lambda l: f.at(l).after(d), f.fibre, f.check_points)


def factor_rule(factor_of: Callable[[SmoothMap, Any], Any], fibre: FibreModel):
    """A transport along maps: ``kappa -> from_factor_maps(l -> factor_of(kappa, l))``."""

    def rule(kappa):
        fam = FactorFamily(kappa, lambda l: factor_of(kappa, l), fibre)
        return from_factor_maps(fam, rule)

    return rule


def pointwise_rule(point_factor: Callable[[np.ndarray], Any], fibre: FibreModel):
    """Rule whose factor at ``l`` depends on ``kappa(l)`` only (flat-type)."""
    return factor_rule(lambda kappa, l: point_factor(kappa.eval(l)), fibre)


# -- sections ---------------------------------------------------------------


@dataclass(frozen=True)
class Section:
    """Field over the base: ``components(x)`` in the active frame.

    ``jacobian(x)`` (optional) returns d sigma^i / d x^j and is used instead of
    finite differences when present.
    """

    bundle: FibreModel
    components: Callable[[Any], np.ndarray]
    smoothness: str = "C2"
    jacobian: Optional[Callable[[Any], np.ndarray]] = None

    def __post_init__(self):
        if self.smoothness not in ("C0", "C1", "C2"):
            raise ValueError(f"unknown smoothness class {self.smoothness!r}")

    def __call__(self, x):
        return np.asarray(self.components(x))

    def scaled(self, lam) -> "Section":
        jac = None if self.jacobian is None else (lambda x: lam * self.jacobian(x))
        return Section(self.bundle, lambda x: lam * self(x), self.smoothness, jac)

    def __add__(self, other: "Section") -> "Section":
        jac = None
        if self.jacobian is not None and other.jacobian is not None:
            jac = lambda x: self.jacobian(x) + other.jacobian(x)
        order = min(self.smoothness, other.smoothness)
        return Section(self.bundle, lambda x: self(x) + other(x), order, jac)


@dataclass(frozen=True)
class SectionAlongMap:
    """Field defined on the parameter box of a map: ``components(l)``."""

    bundle: FibreModel
    components: Callable[[Any], np.ndarray]
    smoothness: str = "C2"

    def __call__(self, l):
        return np.asarray(self.components(l))


class TransportedSection:
    """``m -> K_{l->m} sigma(kappa(l))`` for a fixed anchor ``l``.

    Behaves like a :class:`SectionAlongMap` of the transport's map.
    """

    def __init__(self, transport: TransportFamily, value, anchor, smoothness="C2"):
        self.transport = transport
        self.anchor = anchor
        self.value = np.asarray(value)
        self.bundle = transport.fibre
        self.smoothness = smoothness

    def __call__(self, m):
        return self.transport.apply(self.anchor, m, self.value)

    components = __call__

    def defect(self, section: Section, samples=50, seed=0, tol=DEFAULT_TOL) -> "AxiomReport":
        """Residual of ``sigma(kappa(m)) = K_{l->m} sigma(kappa(l))`` over sampled m."""
        kappa = self.transport.map
        rep = _Worst()
        for m in self.transport.domain.sample(samples, seed=seed):
            r = _norm(section(kappa(m)) - self(m))
            rep.update(r, l=self.anchor, m=m, vector=self.value)
        return rep.report("eq2.6", tol)


def transport_section(t: TransportFamily, s: Section, l) -> TransportedSection:
    if not t.domain.contains(l):
        raise DomainError(f"anchor {_jsonable(l)} outside the parameter domain")
    return TransportedSection(t, s(t.map(l)), l, s.smoothness)


def compare_anchors(t: TransportFamily, s: Section, l1, l2, samples=50, seed=0, tol=DEFAULT_TOL):
    """Max difference of the transported fields anchored at ``l1`` and ``l2``.

    Vanishes when ``s`` is K-transported; that is the content of "holds for one
    anchor implies holds for all".
    """
    f1, f2 = transport_section(t, s, l1), transport_section(t, s, l2)
    rep = _Worst()
    for m in t.domain.sample(samples, seed=seed):
        rep.update(_norm(f1(m) - f2(m)), l=l1, m=m, n=l2)
    return rep.report("prop2.1", tol)


# -- reports ----------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return [[float(z.real), float(z.imag)] for z in x.ravel()]
        return [float(z) for z in x.ravel()]
    if isinstance(x, (tuple, list)):
        return [_jsonable(z) for z in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _norm(x):
    return float(np.linalg.norm(np.asarray(x).ravel())) if np.size(x) else 0.0


@dataclass
class AxiomReport:
    """Outcome of one numerical check."""

    check: str
    tolerance: float
    max_residual: float
    worst_witness: dict
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "check": self.check,
            "tolerance": float(self.tolerance),
            "max_residual": float(self.max_residual),
            "worst_witness": self.worst_witness,
            "pass": bool(self.passed),
        }
        if self.details:
            out["details"] = self.details
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def __bool__(self):
        return self.passed


class _Worst:
    """Tracks the largest residual and where it happened."""

    def __init__(self):
        self.value = 0.0
        self.witness = {"l": None, "m": None, "n": None, "vector": None}
        self.count = 0

    def update(self, r, **witness):
        self.count += 1
        if self.count == 1 or r > self.value:
            self.value = r
            w = {"l": None, "m": None, "n": None, "vector": None}
            w.update({k: _jsonable(v) for k, v in witness.items()})
            self.witness = w

    def report(self, name, tol, **details):
        details.setdefault("samples", self.count)
        return AxiomReport(name, tol, self.value, self.witness, bool(self.value <= tol), details)


def _rng(seed):
    return np.random.default_rng(seed)


def check_groupoid(t: TransportFamily, samples=200, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """Composition (K_{m->n} K_{l->m} = K_{l->n}) and identity (K_{l->l} = id)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = _rng(seed)
    dom = t.domain
    ls, ms, ns = dom.sample(samples, seed), dom.sample(samples, seed + 1), dom.sample(samples, seed + 2)
    comp, ident = _Worst(), _Worst()
    for l, m, n in zip(ls, ms, ns):
        v = t.fibre.random_vector(rng)
        r = _norm(t.apply(m, n, t.apply(l, m, v)) - t.apply(l, n, v))
        comp.update(r, l=l, m=m, n=n, vector=v)
        ident.update(_norm(t.apply(l, l, v) - v), l=l, vector=v)
    worst = comp if comp.value >= ident.value else ident
    return AxiomReport(
        "eq2.2+eq2.3",
        tol,
        worst.value,
        worst.witness,
        bool(comp.value <= tol and ident.value <= tol),
        {"eq2.2": comp.value, "eq2.3": ident.value, "samples": samples},
    )


def check_inverse(t: TransportFamily, samples=100, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """Round trip ``K_{m->l} K_{l->m} v = v``."""
    rng = _rng(seed)
    rep = _Worst()
    for l, m in zip(t.domain.sample(samples, seed), t.domain.sample(samples, seed + 1)):
        v = t.fibre.random_vector(rng)
        rep.update(_norm(t.apply(m, l, t.apply(l, m, v)) - v), l=l, m=m, vector=v)
    return rep.report("inverse", tol)


def check_locality(t: TransportFamily, sub, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """Transport along ``kappa|sub`` agrees with transport along ``kappa`` on sub."""
    restricted = t.along(t.map.restrict(sub))
    rng = _rng(seed)
    rep = _Worst()
    for l, m in zip(sub.sample(samples, seed), sub.sample(samples, seed + 1)):
        v = t.fibre.random_vector(rng)
        rep.update(_norm(restricted.apply(l, m, v) - t.apply(l, m, v)), l=l, m=m, vector=v)
    return rep.report("eq2.7", tol)


def check_reparam(t: TransportFamily, tau: SmoothMap, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """``K^{kappa o tau}_{l->m} = K^kappa_{tau(l)->tau(m)}``.

    ``tau`` maps its own parameter box into ``t.map``'s parameter box.
    """
    moved = t.along(t.map.compose(tau))
    rng = _rng(seed)
    rep = _Worst()
    ls = tau.domain.sample(samples, seed)
    images = np.array([tau.eval(l) for l in ls])
    if len(np.unique(np.round(images, 12), axis=0)) != len(ls):
        raise ValueError("tau is not injective on the samples")
    for l, m in zip(ls, tau.domain.sample(samples, seed + 1)):
        v = t.fibre.random_vector(rng)
        r = _norm(moved.apply(l, m, v) - t.apply(tau.eval(l), tau.eval(m), v))
        rep.update(r, l=l, m=m, vector=v)
    return rep.report("eq2.8", tol)


def binary_samples(t: TransportFamily, samples, seed):
    """Shared sample stream for the binary-operation checks."""
    rng = _rng(seed)
    out = []
    for l, m in zip(t.domain.sample(samples, seed), t.domain.sample(samples, seed + 1)):
        out.append((l, m, t.fibre.random_vector(rng), t.fibre.random_vector(rng)))
    return out


def check_binary_consistency(t: TransportFamily, beta, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """``beta_{kappa(l)}(u, v) = beta_{kappa(m)}(K u, K v)``; ``beta(x, u, v)``."""
    rep = _Worst()
    kappa = t.map
    for l, m, u, v in binary_samples(t, samples, seed):
        lhs = beta(kappa(l), u, v)
        rhs = beta(kappa(m), t.apply(l, m, u), t.apply(l, m, v))
        rep.update(float(abs(lhs - rhs)), l=l, m=m, vector=[u, v])
    return rep.report("eq2.9", tol)


def check_linearity(t: TransportFamily, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """``K(lam u + mu v) = lam K u + mu K v``; the first sample uses lam = mu = 0."""
    rng = _rng(seed)
    rep = _Worst()
    ls, ms = t.domain.sample(samples, seed), t.domain.sample(samples, seed + 1)
    for i, (l, m) in enumerate(zip(ls, ms)):
        u, v = t.fibre.random_vector(rng), t.fibre.random_vector(rng)
        lam, mu = (0.0, 0.0) if i == 0 else (t.fibre.random_scalar(rng), t.fibre.random_scalar(rng))
        r = _norm(t.apply(l, m, lam * u + mu * v) - lam * t.apply(l, m, u) - mu * t.apply(l, m, v))
        rep.update(r, l=l, m=m, vector=[u, v])
    return rep.report("eq2.10", tol)


def check_gauge_invariance(f: FactorFamily, d, samples=50, seed=0, tol=DEFAULT_TOL) -> AxiomReport:
    """Transports from ``F`` and from ``d o F`` coincide pointwise."""
    t, tg = from_factor_maps(f), from_factor_maps(gauge_transform(f, d))
    rng = _rng(seed)
    rep = _Worst()
    for l, m in zip(t.domain.sample(samples, seed), t.domain.sample(samples, seed + 1)):
        v = t.fibre.random_vector(rng)
        rep.update(_norm(t.apply(l, m, v) - tg.apply(l, m, v)), l=l, m=m, vector=v)
    return rep.report("eq2.5", tol)
