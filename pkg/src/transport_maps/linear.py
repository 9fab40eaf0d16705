"""Linear transports along maps ``kappa: N -> B`` with ``N`` a box in R^k.

In a frame ``{e_i}`` along the map a linear transport is the matrix function
``H(m, l)`` with ``L_{l->m} e_i(l) = H(m, l)^j_i e_j(m)``. Its components are
``Gamma_a(l) = d/dm^a H(l, m)|_{m=l}`` and the a-th derivation of a section is
``d sigma / d l^a + Gamma_a sigma``.

Axes are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .base import default_step, fd_partial, second_partial
from .core import DEFAULT_TOL, Section, TransportFamily, _norm, _Worst
from .errors import AxiomError, DomainError, IntegrationError, SingularFactorError, SmoothnessError
from .io import grid_points, matrix_to_json

GAMMA_TOL = 1e-5


@dataclass(frozen=True)
class Frame:
    """Field of bases: ``basis(p)`` has the basis vectors as columns."""

    basis: Callable[[Any], np.ndarray]
    name: str = "frame"

    def __call__(self, p):
        return np.asarray(self.basis(p))

    def check(self, points, max_condition=1e10):
        for p in points:
            c = np.linalg.cond(self(p))
            if not np.isfinite(c) or c > max_condition:
                raise SingularFactorError(f"frame {self.name} singular at {np.asarray(p).tolist()}", c)
        return True


def coordinate_frame(rank) -> Frame:
    eye = np.eye(rank)
    return Frame(lambda p: eye, "coordinate")


@dataclass(frozen=True)
class GammaField:
    """``l -> array (k, r, r)`` holding ``Gamma_a(l)`` for every axis a."""

    fn: Callable[[Any], np.ndarray]
    k: int

    def __call__(self, l):
        return np.asarray(self.fn(np.asarray(l, dtype=float)))

    def component(self, l, a):
        return self(l)[a]


@dataclass(frozen=True)
class LinearTransportRep:
    """Matrix representation ``Hmat(m, l)`` of an L-transport along ``map``."""

    map: Any
    Hmat: Callable[[Any, Any], np.ndarray]
    frame: Optional[Frame] = None
    gamma: Optional[GammaField] = None

    @property
    def domain(self):
        return self.map.domain

    @property
    def k(self):
        return self.map.domain.k

    def H(self, m, l):
        return np.asarray(self.Hmat(np.asarray(m, dtype=float), np.asarray(l, dtype=float)))

    def gamma_field(self, h=None) -> GammaField:
        return self.gamma if self.gamma is not None else gamma_from_H(self, h, verify=False)

    @classmethod
    def from_transport(cls, t: TransportFamily, frame=None) -> "LinearTransportRep":
        return cls(t.map, lambda m, l: t.matrix(l, m), frame)

    def check_groupoid(self, samples=50, seed=0, tol=1e-10):
        rep = _Worst()
        dom = self.domain
        for l, m, n in zip(dom.sample(samples, seed), dom.sample(samples, seed + 1), dom.sample(samples, seed + 2)):
            r = max(_norm(self.H(n, m) @ self.H(m, l) - self.H(n, l)), _norm(self.H(l, l) - np.eye(len(self.H(l, l)))))
            rep.update(r, l=l, m=m, n=n)
        return rep.report("eq2.2+eq2.3", tol)


def _bounds(rep):
    return getattr(rep.domain, "bounds", None)


def gamma_from_H(rep: LinearTransportRep, h=None, verify=True, tol=GAMMA_TOL, verify_points=3) -> GammaField:
    """Components by central differences of ``H(l, m)`` in ``m`` at ``m = l``.

    With ``verify`` the second expression, ``-d/dm H(m, l)|_{m=l}``, is
    evaluated at a few sample points and must agree within ``tol``.
    """
    bounds = _bounds(rep)

    def fn(l):
        step = default_step(l) if h is None else h
        return np.stack([fd_partial(lambda m: rep.H(l, m), l, a, step, bounds) for a in range(rep.k)])

    field = GammaField(fn, rep.k)
    if verify:
        report = check_gamma_sign(rep, field, samples=verify_points, h=h, tol=tol)
        if not report.passed:
            raise AxiomError("the two derivative expressions for Gamma disagree", report)
    return field


def check_gamma_sign(rep, field=None, samples=50, seed=0, h=None, tol=GAMMA_TOL):
    """``d/dm H(l,m)|_{m=l} = -d/dm H(m,l)|_{m=l}`` on sampled l."""
    field = field or gamma_from_H(rep, h, verify=False)
    bounds = _bounds(rep)
    out = _Worst()
    for l in rep.domain.sample(samples, seed, margin=1e-3):
        step = default_step(l) if h is None else h
        g = field(l)
        other = np.stack([-fd_partial(lambda m: rep.H(m, l), l, a, step, bounds) for a in range(rep.k)])
        out.update(float(np.max(np.abs(g - other))), l=l)
    return out.report("eq4.6", tol)


# -- sections along maps ---------------------------------------------------


def _check_c1(sigma, order="C1"):
    s = getattr(sigma, "smoothness", "C2")
    if s < order:
        raise SmoothnessError(f"section of class {s} but {order} is required")


def section_along(sigma, kappa) -> Callable[[np.ndarray], np.ndarray]:
    """Components of ``sigma`` as a function of the map's parameter."""
    if isinstance(sigma, Section):
        return lambda l: sigma(kappa.eval(l))
    return sigma


def section_partial(sigma, kappa, l, a, h=None, bounds=None):
    """``d sigma^i(kappa(l)) / d l^a``; chain rule when both Jacobians exist."""
    jac = getattr(kappa, "analytic_jacobian", None)
    if isinstance(sigma, Section) and sigma.jacobian is not None and jac is not None:
        return np.asarray(sigma.jacobian(kappa.eval(l))) @ np.asarray(jac(l))[:, a]
    return fd_partial(section_along(sigma, kappa), l, a, h, bounds)


def derive_section(rep: LinearTransportRep, sigma, l, a, h=None, gamma: GammaField = None):
    """Component form of the a-th derivation: ``d sigma/d l^a + Gamma_a sigma``."""
    _check_c1(sigma)
    l = np.asarray(l, dtype=float)
    if not rep.domain.contains(l):
        raise DomainError(f"{l.tolist()} outside the parameter box")
    if not 0 <= a < rep.k:
        raise DomainError(f"axis {a} out of range")
    g = (gamma or rep.gamma_field(h)).component(l, a)
    s = section_along(sigma, rep.map)(l)
    return section_partial(sigma, rep.map, l, a, h, _bounds(rep)) + g @ s


def derive_section_limit(rep: LinearTransportRep, sigma, l, a, eps=1e-4):
    """Limit form: ``(L_{l+eps->l} sigma(kappa(l+eps)) - sigma(kappa(l))) / eps``,
    taken symmetrically in ``eps``."""
    _check_c1(sigma)
    l = np.asarray(l, dtype=float)
    along = section_along(sigma, rep.map)
    return fd_partial(lambda m: rep.H(l, m) @ along(m), l, a, eps, _bounds(rep))


def check_linearity_of_derivation(rep, sigma1, sigma2, lam, mu, samples=20, seed=0, tol=1e-8):
    """``D(lam s1 + mu s2) = lam D s1 + mu D s2`` at sampled l and every axis."""
    if isinstance(sigma1, Section) and isinstance(sigma2, Section):
        combo = sigma1.scaled(lam) + sigma2.scaled(mu)
    else:
        combo = lambda l: lam * section_along(sigma1, rep.map)(l) + mu * section_along(sigma2, rep.map)(l)
    gamma = rep.gamma_field()
    out = _Worst()
    for l in rep.domain.sample(samples, seed, margin=1e-3):
        for a in range(rep.k):
            lhs = derive_section(rep, combo, l, a, gamma=gamma)
            rhs = lam * derive_section(rep, sigma1, l, a, gamma=gamma) + mu * derive_section(rep, sigma2, l, a, gamma=gamma)
            out.update(_norm(lhs - rhs), l=l)
    return out.report("prop4.1", tol)


# -- frames ----------------------------------------------------------------


def frame_change(rep: LinearTransportRep, A: Callable[[Any], np.ndarray]) -> LinearTransportRep:
    """Representation in the frame ``e'_j = A^i_j e_i``: ``H' = A(m)^-1 H A(l)``."""
    for l in rep.domain.sample(5, seed=99):
        c = np.linalg.cond(A(l))
        if not np.isfinite(c) or c > 1e12:
            raise SingularFactorError("frame transition is singular", c)
    old = rep.frame or coordinate_frame(len(A(rep.domain.sample(1)[0])))
    frame = Frame(lambda p: old(p) @ A(p), f"{old.name}*A")
    return LinearTransportRep(rep.map, lambda m, l: np.linalg.solve(A(m), rep.H(m, l) @ A(l)), frame)


def transform_gamma(gamma: GammaField, A, l, h=None, bounds=None, dA=None):
    """Frame-change law ``A^-1 Gamma_a A + A^-1 dA/dl^a`` for every axis."""
    l = np.asarray(l, dtype=float)
    Al = np.asarray(A(l))
    g = gamma(l)
    out = []
    for a in range(gamma.k):
        dAa = dA(l, a) if dA is not None else fd_partial(A, l, a, h, bounds)
        out.append(np.linalg.solve(Al, g[a] @ Al + dAa))
    return np.stack(out)


def check_frame_covariance(rep: LinearTransportRep, A, samples=20, seed=0, h=None, tol=GAMMA_TOL, dA=None):
    """Gamma of the frame-changed representation (from its H) against the
    inhomogeneous law applied to the original Gamma."""
    moved = frame_change(rep, A)
    g_old, g_new = gamma_from_H(rep, h, verify=False), gamma_from_H(moved, h, verify=False)
    bounds = _bounds(rep)
    out = _Worst()
    for l in rep.domain.sample(samples, seed, margin=1e-3):
        r = np.max(np.abs(g_new(l) - transform_gamma(g_old, A, l, h, bounds, dA)))
        out.update(float(r), l=l)
    return out.report("eq4.8", tol)


def check_gamma_difference(rep1: LinearTransportRep, rep2: LinearTransportRep, A, samples=20, seed=0, h=None, tol=GAMMA_TOL):
    """Differences of components transform homogeneously: ``A^-1 (G1 - G2) A``."""
    n1, n2 = frame_change(rep1, A), frame_change(rep2, A)
    f1, f2 = gamma_from_H(rep1, h, verify=False), gamma_from_H(rep2, h, verify=False)
    m1, m2 = gamma_from_H(n1, h, verify=False), gamma_from_H(n2, h, verify=False)
    out = _Worst()
    for l in rep1.domain.sample(samples, seed, margin=1e-3):
        Al = np.asarray(A(l))
        expect = np.stack([np.linalg.solve(Al, d @ Al) for d in f1(l) - f2(l)])
        out.update(float(np.max(np.abs(m1(l) - m2(l) - expect))), l=l)
    return out.report("eq4.8-difference", tol)


# -- reconstruction along paths --------------------------------------------


def transport_from_gamma(gamma: GammaField, l, m, rtol=1e-12, atol=1e-13):
    """Integrate ``dH(t,l)/dt = -Gamma(t) H(t,l)``, ``H(l,l) = I`` from l to m.

    Only paths (``k = 1``) are supported.
    """
    if gamma.k != 1:
        raise ValueError("reconstruction from components is implemented for paths only")
    l0, m0 = float(np.ravel(l)[0]), float(np.ravel(m)[0])
    G0 = gamma(np.array([l0]))[0]
    n = G0.shape[0]
    eye = np.eye(n, dtype=G0.dtype)
    if m0 == l0:
        return eye
    cplx = np.iscomplexobj(G0)

    def rhs(t, y):
        Hm = y.reshape(n, n)
        return (-gamma(np.array([t]))[0] @ Hm).ravel()

    y0 = eye.astype(complex if cplx else float).ravel()
    sol = solve_ivp(rhs, (l0, m0), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y[:, -1].reshape(n, n)


def rep_from_gamma(kappa, gamma: GammaField, frame=None, **kw) -> LinearTransportRep:
    """Path transport whose H comes from integrating ``gamma``."""
    return LinearTransportRep(kappa, lambda m, l: transport_from_gamma(gamma, l, m, **kw), frame, gamma)


# -- connections on the base -------------------------------------------------


@dataclass(frozen=True)
class Connection:
    """Coefficients on the base: ``coeffs(x)[k]`` is the matrix ``(Gamma_k)^i_j``.

    Along a map the components are ``Gamma_a(l) = sum_k coeffs(kappa(l))[k] d_a kappa^k``.
    """

    coeffs: Callable[[np.ndarray], np.ndarray]
    dim: int
    rank: int

    def along(self, kappa, h=None) -> GammaField:
        def fn(l):
            J = kappa.jacobian(l, h) if hasattr(kappa, "jacobian") else None
            w = np.asarray(self.coeffs(kappa.eval(l)))
            return np.einsum("kij,ka->aij", w, J)

        return GammaField(fn, kappa.domain.k)


# -- torsion and curvature -----------------------------------------------


def _split(eta, l, m):
    l = np.atleast_1d(np.asarray(l, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if len(l) + len(m) != eta.domain.k:
        raise DomainError("parameter split does not match the map's domain")
    return np.concatenate([l, m]), len(l)


def torsion(gamma: GammaField, eta, l, m, a, b, h=None):
    """Torsion operator on a two-parameter map ``eta(l, m)`` into the base.

    ``gamma`` holds the components of a tangent-bundle transport along
    ``eta`` with the l-axes first and the m-axes after them.
    """
    if getattr(eta, "smoothness", "C2") < "C2":
        raise SmoothnessError("torsion needs a C2 map")
    p, k = _split(eta, l, m)
    g = gamma(p)
    if g.shape[1] != eta.dim:
        raise ValueError("torsion is defined on the tangent bundle (rank = dim)")
    d1 = eta.jacobian(p)[:, a]
    d2 = eta.jacobian(p)[:, k + b]
    lhs = second_partial(eta, p, a, k + b, h) + g[a] @ d2
    rhs = second_partial(eta, p, k + b, a, h) + g[k + b] @ d1
    return lhs - rhs


def curvature(gamma: GammaField, eta, sigma, l, m, a, b, h1=1e-4, h2=None):
    """Curvature operator: commutator of the a-th l-derivation and the b-th
    m-derivation on ``sigma``, by nested finite differences."""
    if getattr(eta, "smoothness", "C2") < "C2":
        raise SmoothnessError("curvature needs a C2 map")
    _check_c1(sigma, "C2")
    p, k = _split(eta, l, m)
    along = section_along(sigma, eta)
    bounds = eta.domain.bounds

    def inner(q, axis):
        return section_partial(sigma, eta, q, axis, h2, bounds) + gamma(q)[axis] @ along(q)

    def outer(q, first, second):
        return fd_partial(lambda r: inner(r, second), q, first, h1, bounds) + gamma(q)[first] @ inner(q, second)

    return outer(p, a, k + b) - outer(p, k + b, a)


# -- composite (typed) derivatives ---------------------------------------


def typed_partial_derivative(t: TransportFamily, sigma, alpha, x, a, beta, eps=1e-5):
    """Derivative of type ``beta``: derivative in ``x^a`` of
    ``L_{(alpha, y)->(beta, x)} sigma(kappa(alpha, y))`` at ``y = x``."""
    _check_c1(sigma)
    x = np.asarray(x, dtype=float)
    M = t.domain.M
    if not M.contains(x):
        raise DomainError(f"{x.tolist()} outside M")
    kappa = t.map

    def g(y):
        s = sigma(kappa((alpha, y))) if isinstance(sigma, Section) else sigma((alpha, y))
        return t.matrix((alpha, y), (beta, x)) @ s

    return fd_partial(g, x, a, eps, M.bounds)


@dataclass(frozen=True)
class _AlongSlice:
    domain: Any
    eval: Callable

    def __call__(self, x):
        return self.eval(x)


def slice_rep(t: TransportFamily, alpha) -> LinearTransportRep:
    """The transport restricted to ``{alpha} x M`` as a path/box representation."""
    kappa = _AlongSlice(t.domain.M, lambda x: t.map((alpha, x)))
    return LinearTransportRep(kappa, lambda m, l: t.matrix((alpha, l), (alpha, m)))


# -- export ----------------------------------------------------------------


def gamma_table(gamma: GammaField, domain, n=5):
    return [{"l": p.tolist(), "gamma": [matrix_to_json(g) for g in gamma(p)]} for p in grid_points(domain, n)]


def H_table(rep: LinearTransportRep, n=3):
    pts = grid_points(rep.domain, n)
    return [
        {"m": m.tolist(), "l": l.tolist(), "H": matrix_to_json(rep.H(m, l))}
        for m in pts
        for l in pts
    ]
