"""Charts, parameter boxes, smooth maps and the finite-difference engine.

Every base space is a single chart: a closed box in R^n. Parameter domains
of maps are boxes in R^k. All derivatives in the package go through
:func:`fd_partial` and :func:`fd_second` so that step-size and boundary
handling is uniform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DomainError

DEFAULT_REL_STEP = 1e-5
DEFAULT_SECOND_STEP = 1e-4
_SLACK = 1e-12


def default_step(x, rel=DEFAULT_REL_STEP):
    """Step ``rel * max(1, |x|_inf)`` used when the caller gives none."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return rel * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)


def _as_bounds(bounds):
    out = []
    for lo, hi in bounds:
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        out.append((lo, hi))
    return tuple(out)


def halton_points(bounds, n, seed=0):
    """``n`` scrambled Halton points in the box ``bounds`` (seeded)."""
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    sampler = qmc.Halton(d=len(bounds), scramble=True, seed=seed)
    unit = sampler.random(n)
    return qmc.scale(unit, bounds[:, 0], bounds[:, 1]) if len(bounds) else unit


class _Box:
    bounds: tuple

    @property
    def lower(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self):
        return np.array([b[1] for b in self.bounds])

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def contains(self, x, slack=_SLACK):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (len(self.bounds),):
            return False
        scale = slack * np.maximum(1.0, np.abs(self.upper - self.lower))
        return bool(np.all(x >= self.lower - scale) and np.all(x <= self.upper + scale))

    def sample(self, n, seed=0, margin=0.0):
        """Low-discrepancy sample, optionally shrunk by a relative ``margin``."""
        lo, hi = self.lower, self.upper
        pad = margin * (hi - lo)
        return list(halton_points(np.stack([lo + pad, hi - pad], axis=1), n, seed))

    def require(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.contains(x):
            raise DomainError(f"point {x.tolist()} outside {self!r}")
        return x


@dataclass(frozen=True)
class ChartDomain(_Box):
    """A box in R^dim standing for the single chart of a base space."""

    dim: int
    bounds: tuple
    name: str = "chart"

    def __post_init__(self):
        object.__setattr__(self, "bounds", _as_bounds(self.bounds))
        if self.dim < 1 or len(self.bounds) != self.dim:
            raise ValueError("ChartDomain needs dim >= 1 intervals")


@dataclass(frozen=True)
class ParamDomain(_Box):
    """A box in R^k holding the parameters of a map."""

    k: int
    bounds: tuple

    def __post_init__(self):
        object.__setattr__(self, "bounds", _as_bounds(self.bounds))
        if self.k < 1 or len(self.bounds) != self.k:
            raise ValueError("ParamDomain needs k >= 1 intervals")

    def product(self, other: "ParamDomain") -> "ParamDomain":
        return ParamDomain(self.k + other.k, self.bounds + other.bounds)

    def as_chart(self, name="chart") -> ChartDomain:
        return ChartDomain(self.k, self.bounds, name)


def box(*bounds, name=None):
    """Shorthand: ``box((0, 1), (0, 2))`` gives a ParamDomain (or chart if named)."""
    if name is not None:
        return ChartDomain(len(bounds), bounds, name)
    return ParamDomain(len(bounds), bounds)


# -- finite differences ------------------------------------------------------


def _stencil(x, axis, h, lower, upper):
    """Offsets along ``axis`` that fit into [lower, upper].

    Returns "central", "forward" or "backward".
    """
    if lower is None:
        return "central"
    xa, lo, hi = x[axis], lower[axis], upper[axis]
    slack = _SLACK * max(1.0, hi - lo)
    if xa - h >= lo - slack and xa + h <= hi + slack:
        return "central"
    if xa + 2 * h <= hi + slack and xa >= lo - slack:
        return "forward"
    if xa - 2 * h >= lo - slack and xa <= hi + slack:
        return "backward"
    raise DomainError(f"stencil of step {h} on axis {axis} does not fit at {x.tolist()}")


def fd_partial(f, x, axis, h=None, bounds=None):
    """First partial derivative of ``f`` along ``axis`` at ``x``.

    Central differences in the interior; second-order one-sided stencils when
    the central one leaves ``bounds``. ``f`` may return arrays of any shape.
    """
    x = np.array(x, dtype=float)
    h = default_step(x) if h is None else float(h)
    lower = upper = None
    if bounds is not None:
        lower = np.array([b[0] for b in bounds])
        upper = np.array([b[1] for b in bounds])
    kind = _stencil(x, axis, h, lower, upper)
    e = np.zeros_like(x)
    e[axis] = h
    if kind == "central":
        return (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    s = 1.0 if kind == "forward" else -1.0
    f0 = np.asarray(f(x))
    f1 = np.asarray(f(x + s * e))
    f2 = np.asarray(f(x + 2 * s * e))
    return s * (-3 * f0 + 4 * f1 - f2) / (2 * h)


def fd_second(f, x, a, b, h=None, bounds=None):
    """Second partial derivative d^2 f / dx_a dx_b by central differences.

    Near the box edge the stencil centre is pushed inward until it fits,
    which costs one order of accuracy.
    """
    x = np.array(x, dtype=float)
    h = default_step(x, DEFAULT_SECOND_STEP) if h is None else float(h)
    c = x.copy()
    if bounds is not None:
        for ax in {a, b}:
            lo, hi = bounds[ax]
            if hi - lo < 2 * h:
                raise DomainError(f"box too thin for second difference on axis {ax}")
            c[ax] = min(max(c[ax], lo + h), hi - h)
    ea = np.zeros_like(c)
    eb = np.zeros_like(c)
    ea[a] = h
    eb[b] = h
    if a == b:
        return (np.asarray(f(c + ea)) - 2 * np.asarray(f(c)) + np.asarray(f(c - ea))) / h**2
    return (
        np.asarray(f(c + ea + eb))
        - np.asarray(f(c + ea - eb))
        - np.asarray(f(c - ea + eb))
        + np.asarray(f(c - ea - eb))
    ) / (4 * h**2)


# -- smooth maps --------------------------------------------------------------


@dataclass(frozen=True)
class SmoothMap:
    """A map from a parameter box into a chart.

    ``eval`` takes a length-k array and returns a length-dim array;
    ``analytic_jacobian`` (optional) returns the dim x k Jacobian.
    """

    domain: ParamDomain
    codomain: ChartDomain
    eval: Callable[[np.ndarray], np.ndarray]
    analytic_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "map"
    smoothness: str = "C2"
    check_points: int = field(default=8, compare=False)

    def __post_init__(self):
        for l in self.domain.sample(self.check_points, seed=12345):
            y = np.asarray(self.eval(l), dtype=float)
            if not self.codomain.contains(y):
                raise DomainError(
                    f"{self.name}: image {y.tolist()} of {np.asarray(l).tolist()} "
                    f"leaves chart {self.codomain.name}"
                )

    def __call__(self, l):
        return eval_map(self, l)

    @property
    def k(self):
        return self.domain.k

    @property
    def dim(self):
        return self.codomain.dim

    def partial(self, l, a, h=None):
        return partial_deriv(self, l, a, h)

    def jacobian(self, l, h=None):
        """dim x k matrix of first partials."""
        if self.analytic_jacobian is not None:
            return np.asarray(self.analytic_jacobian(np.asarray(l, dtype=float)), dtype=float)
        return np.stack([self.partial(l, a, h) for a in range(self.k)], axis=1)

    def validate(self, n=100, rtol=1e-5, seed=0):
        """Check the image stays in the chart and the analytic Jacobian agrees
        with central differences on ``n`` interior samples."""
        worst = 0.0
        for l in self.domain.sample(n, seed=seed, margin=1e-3):
            y = np.asarray(self.eval(l), dtype=float)
            if not self.codomain.contains(y):
                raise DomainError(f"{self.name}: image of {l.tolist()} leaves chart")
            if self.analytic_jacobian is None:
                continue
            exact = np.asarray(self.analytic_jacobian(l), dtype=float)
            bounds = self.domain.bounds
            for a in range(self.k):
                fd = fd_partial(self.eval, l, a, bounds=bounds)
                err = np.max(np.abs(fd - exact[:, a]) / (1 + np.abs(exact[:, a])))
                worst = max(worst, float(err))
        if worst > rtol:
            raise ValueError(f"{self.name}: analytic Jacobian off by {worst:.3g}")
        return worst

    def compose(self, tau: "SmoothMap", name=None) -> "SmoothMap":
        """The map ``self o tau`` where ``tau`` lands in this map's parameter box."""
        jac = None
        if self.analytic_jacobian is not None and tau.analytic_jacobian is not None:
            jac = lambda l: self.analytic_jacobian(tau.eval(l)) @ tau.analytic_jacobian(l)
        return SmoothMap(
            tau.domain,
            self.codomain,
            lambda l: self.eval(tau.eval(l)),
            jac,
            name=name or f"{self.name}o{tau.name}",
        )

    def restrict(self, sub: ParamDomain) -> "SmoothMap":
        for lo, hi, (plo, phi) in zip(sub.lower, sub.upper, self.domain.bounds):
            if lo < plo - _SLACK or hi > phi + _SLACK:
                raise DomainError("restriction box is not inside the map's domain")
        return SmoothMap(sub, self.codomain, self.eval, self.analytic_jacobian, name=f"{self.name}|sub")


def eval_map(m: SmoothMap, l):
    l = m.domain.require(l)
    return np.asarray(m.eval(l), dtype=float)


def partial_deriv(m: SmoothMap, l, a, h=None):
    """d kappa / d l^a at ``l`` (0-based axis)."""
    l = m.domain.require(l)
    if not 0 <= a < m.k:
        raise DomainError(f"axis {a} out of range for k={m.k}")
    if m.analytic_jacobian is not None:
        return np.asarray(m.analytic_jacobian(l), dtype=float)[:, a]
    return fd_partial(m.eval, l, a, h, bounds=m.domain.bounds)


def second_partial(m: SmoothMap, l, a, b, h=None):
    """d^2 kappa / d l^a d l^b at ``l``."""
    l = m.domain.require(l)
    for ax in (a, b):
        if not 0 <= ax < m.k:
            raise DomainError(f"axis {ax} out of range for k={m.k}")
    if m.analytic_jacobian is not None:
        jac = lambda p: np.asarray(m.analytic_jacobian(p), dtype=float)[:, b]
        return fd_partial(jac, l, a, default_step(l), bounds=m.domain.bounds)
    return fd_second(m.eval, l, a, b, h, bounds=m.domain.bounds)


# -- builtin families -------------------------------------------------------

SPHERE_CHART = ChartDomain(2, ((0.2, np.pi - 0.2), (-2 * np.pi, 2 * np.pi)), "sphere")


def identity_map(domain) -> SmoothMap:
    """Identity of a box, used for flat transports along id_B."""
    if isinstance(domain, ChartDomain):
        chart, params = domain, ParamDomain(domain.dim, domain.bounds)
    else:
        chart, params = domain.as_chart(), domain
    n = params.k
    return SmoothMap(params, chart, lambda l: np.array(l, dtype=float), lambda l: np.eye(n), name="identity")


def constant_map(domain: ParamDomain, codomain: ChartDomain, point) -> SmoothMap:
    point = np.array(point, dtype=float)
    zeros = np.zeros((codomain.dim, domain.k))
    return SmoothMap(domain, codomain, lambda l: point.copy(), lambda l: zeros, name="constant")


def affine_map(matrix, offset, domain: ParamDomain, codomain: ChartDomain) -> SmoothMap:
    """kappa(l) = matrix @ l + offset."""
    A = np.array(matrix, dtype=float)
    b = np.zeros(A.shape[0]) if offset is None else np.array(offset, dtype=float)
    return SmoothMap(domain, codomain, lambda l: A @ l + b, lambda l: A, name="affine")


def polynomial_map(terms, domain: ParamDomain, codomain: ChartDomain) -> SmoothMap:
    """Polynomial map; ``terms[i]`` lists ``(coef, powers)`` pairs of output i.

    ``[[(1.0, (2,))], [(1.0, (3,))]]`` is t -> (t^2, t^3).
    """
    parsed = [[(float(c), np.array(p, dtype=int)) for c, p in comp] for comp in terms]
    k = domain.k

    def f(l):
        return np.array([sum(c * np.prod(l**p) for c, p in comp) for comp in parsed])

    def jac(l):
        J = np.zeros((len(parsed), k))
        for i, comp in enumerate(parsed):
            for c, p in comp:
                for a in range(k):
                    if p[a] == 0:
                        continue
                    q = p.copy()
                    q[a] -= 1
                    J[i, a] += c * p[a] * np.prod(l**q)
        return J

    return SmoothMap(domain, codomain, f, jac, name="polynomial")


def latitude_circle(colatitude, domain: ParamDomain = None) -> SmoothMap:
    """t -> (colatitude, t) in the (theta, phi) sphere chart."""
    domain = domain or ParamDomain(1, ((0.0, 2 * np.pi),))
    th = float(colatitude)
    return SmoothMap(
        domain,
        SPHERE_CHART,
        lambda l: np.array([th, l[0]]),
        lambda l: np.array([[0.0], [1.0]]),
        name="latitude_circle",
    )


def great_circle(inclination=0.0, domain: ParamDomain = None) -> SmoothMap:
    """Unit-speed great circle through (theta, phi) = (pi/2, 0), tilted by
    ``inclination`` about the x axis, in the sphere chart."""
    domain = domain or ParamDomain(1, ((-3.0, 3.0),))
    ca, sa = np.cos(inclination), np.sin(inclination)

    def f(l):
        t = l[0]
        x, y, z = np.cos(t), np.sin(t) * ca, np.sin(t) * sa
        return np.array([np.arccos(np.clip(z, -1, 1)), np.arctan2(y, x)])

    def jac(l):
        t = l[0]
        x, y, z = np.cos(t), np.sin(t) * ca, np.sin(t) * sa
        dx, dy, dz = -np.sin(t), np.cos(t) * ca, np.cos(t) * sa
        dth = -dz / np.sqrt(1 - z * z)
        dph = (x * dy - y * dx) / (x * x + y * y)
        return np.array([[dth], [dph]])

    return SmoothMap(domain, SPHERE_CHART, f, jac, name="great_circle")


def _bounds_of(cfg, key, default=None):
    raw = cfg.get(key, default)
    if raw is None:
        raise ValueError(f"config needs '{key}'")
    return tuple(tuple(b) for b in raw)


def map_from_config(cfg: dict) -> SmoothMap:
    """Build a builtin map from a JSON-style dict.

    ``{"family": "polynomial", "domain": [[0, 1]], "codomain": [[-5, 5], [-5, 5]],
    "terms": [[[1.0, [2]]], [[1.0, [3]]]]}``
    """
    family = cfg.get("family")
    if family == "identity":
        return identity_map(ParamDomain(len(cfg["domain"]), _bounds_of(cfg, "domain")))
    if family == "constant":
        dom = _bounds_of(cfg, "domain")
        cod = _bounds_of(cfg, "codomain")
        return constant_map(ParamDomain(len(dom), dom), ChartDomain(len(cod), cod), cfg["point"])
    if family == "great_circle":
        dom = cfg.get("domain")
        return great_circle(cfg.get("inclination", 0.0), ParamDomain(1, _bounds_of(cfg, "domain")) if dom else None)
    if family == "latitude_circle":
        dom = cfg.get("domain")
        return latitude_circle(cfg["colatitude"], ParamDomain(1, _bounds_of(cfg, "domain")) if dom else None)
    if family == "polynomial":
        dom = _bounds_of(cfg, "domain")
        cod = _bounds_of(cfg, "codomain")
        return polynomial_map(cfg["terms"], ParamDomain(len(dom), dom), ChartDomain(len(cod), cod))
    raise ValueError(f"unknown map family {family!r}")
