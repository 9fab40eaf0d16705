"""Fibre metrics as flat transports between a bundle and its conjugate dual,
plus cross-fibre sums, extended binary operations and integration.

A metric ``G(x)`` with signature ``(p, q)`` is written as a congruence
``G = D^dag G_pq D``. The transport pair is built from factors
``F_x = C G_x`` and ``*F_x = *C *G_x`` with ``[G_x] = A^dag D(x)`` and the
compatibility gauge

    (*C)^-1 = C^dag G_pq,     (*G_x)^-1 = G_x^dag,

so that ``G(x) = (*F_x)^-1 F_x``. For ``q = 0`` this is the plain Hermitian
gauge ``(*F)^-1 = F^dag``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .composite import CompositeDomain, FiniteDomain, identity_product_map
from .core import FibreModel, TransportFamily, _check_condition
from .errors import DomainError, GaugeError, HermiticityError, SignatureError

HERMITIAN_TOL = 1e-12
RELATION_TOL = 1e-10
DET_FLOOR = 1e-12


def signature_matrix(signature):
    p, q = signature
    return np.diag([1.0] * p + [-1.0] * q)


def inertia(G, tol=1e-12):
    w = np.linalg.eigvalsh(G)
    scale = max(1.0, float(np.max(np.abs(w))))
    return int(np.sum(w > tol * scale)), int(np.sum(w < -tol * scale))


@dataclass(frozen=True)
class HermitianMetric:
    """``G(x)``: a Hermitian (or real symmetric) nondegenerate matrix field."""

    G: Callable[[Any], np.ndarray]
    signature: tuple
    domain: Any = None
    field: str = "complex"

    @property
    def rank(self):
        return sum(self.signature)

    def __call__(self, x):
        return np.asarray(self.G(x))

    def validate(self, points=None, n=20, seed=0):
        """Hermiticity, nondegeneracy and constant inertia on sample points."""
        if points is None:
            if self.domain is None:
                raise ValueError("need sample points or a domain")
            points = self.domain.sample(n, seed)
        for x in points:
            Gx = self(x)
            defect = float(np.linalg.norm(Gx - Gx.conj().T))
            if defect > HERMITIAN_TOL * max(1.0, np.linalg.norm(Gx)):
                raise HermiticityError(f"G is not Hermitian at {np.asarray(x).tolist()}", defect)
            if abs(np.linalg.det(Gx)) <= DET_FLOOR:
                raise SignatureError(f"G is degenerate at {np.asarray(x).tolist()}")
            if inertia(Gx) != tuple(self.signature):
                raise SignatureError(
                    f"inertia {inertia(Gx)} at {np.asarray(x).tolist()} differs from {tuple(self.signature)}"
                )
        return True


def _normalize_phase(U):
    """Make the first nonzero entry of every column real and positive."""
    U = U.copy()
    for j in range(U.shape[1]):
        col = U[:, j]
        i = int(np.argmax(np.abs(col) > 1e-12 * np.max(np.abs(col))))
        c = col[i]
        U[:, j] = col * (np.conj(c) / abs(c))
    return U


def congruence_diagonalize(G):
    """``G = D^dag G_pq D`` with ``D = |Lambda|^(1/2) U^dag``.

    Eigenvalues are sorted descending (positive block first) and each
    eigenvector is phase-normalized, so ``D`` is deterministic.
    Returns ``(D, (p, q))``.
    """
    G = np.asarray(G)
    w, U = np.linalg.eigh(0.5 * (G + G.conj().T))
    order = np.argsort(-w, kind="stable")
    w, U = w[order], _normalize_phase(U[:, order])
    if np.any(w == 0):
        raise SignatureError("degenerate metric")
    p = int(np.sum(w > 0))
    D = np.sqrt(np.abs(w))[:, None] * U.conj().T
    return D, (p, len(w) - p)


@dataclass(frozen=True)
class Rank1FlatTransport:
    """Factor data of the transport pair belonging to a metric.

    ``Gx(x)`` and ``Gstar(x)`` are matrix fields over ``domain``; ``J`` is the
    signature matrix entering the gauge.
    """

    C: np.ndarray
    Cstar: np.ndarray
    Gx: Callable[[Any], np.ndarray]
    Gstar: Callable[[Any], np.ndarray]
    domain: Any
    J: Optional[np.ndarray] = None

    @property
    def rank(self):
        return self.C.shape[0]

    def F(self, x):
        return self.C @ self.Gx(x)

    def Fstar(self, x):
        return self.Cstar @ self.Gstar(x)

    def L(self, x, y):
        """Transport in the bundle itself."""
        return np.linalg.solve(self.F(y), self.F(x))

    def L_star(self, x, y):
        """Transport in the conjugate dual bundle."""
        return np.linalg.solve(self.Fstar(y), self.Fstar(x))

    def L10(self, x, y):
        """From the bundle at x into the conjugate dual at y."""
        return np.linalg.solve(self.Fstar(y), self.F(x))

    def L01(self, x, y):
        """From the conjugate dual at x into the bundle at y."""
        return np.linalg.solve(self.F(y), self.Fstar(x))

    def metric_at(self, x):
        return self.L10(x, x)

    def as_transport(self) -> TransportFamily:
        """All four transports as one transport over ``{"1", "*"} x B``."""
        dom = CompositeDomain(FiniteDomain(("1", "*")), self.domain)
        factor = {"1": self.F, "*": self.Fstar}

        def matrix(p, q):
            (a, x), (b, y) = p, q
            Fy = factor[b](y)
            _check_condition(Fy)
            return np.linalg.solve(Fy, factor[a](x))

        fibre = FibreModel(self.rank, "complex")
        return TransportFamily(
            identity_product_map(dom), fibre, lambda p, q, v: matrix(p, q) @ v, "from_factors", matrix
        )


def transport_from_metric(g: HermitianMetric, A=None, C_choice=None, points=None, n=20, seed=0):
    """Build the flat transport pair whose mixed transport recovers ``g``.

    ``A`` is a constant unitary; ``C_choice`` must satisfy
    ``C^dag G_pq C = A^dag G_pq A`` (``C = A`` by default).
    """
    r = g.rank
    Gpq = signature_matrix(g.signature)
    A = np.eye(r, dtype=complex) if A is None else np.asarray(A, dtype=complex)
    if np.linalg.norm(A.conj().T @ A - np.eye(r)) > RELATION_TOL:
        raise GaugeError("A is not unitary", float(np.linalg.norm(A.conj().T @ A - np.eye(r))))
    C = A.copy() if C_choice is None else np.asarray(C_choice, dtype=complex)
    defect = float(np.linalg.norm(C.conj().T @ Gpq @ C - A.conj().T @ Gpq @ A))
    if defect > RELATION_TOL:
        raise GaugeError("C violates its defining relation", defect)
    if points is None and g.domain is not None:
        points = g.domain.sample(n, seed)
    if points is not None:
        for x in points:
            _, sig = congruence_diagonalize(g(x))
            if sig != tuple(g.signature):
                raise SignatureError(f"inertia {sig} at {np.asarray(x).tolist()} differs from {tuple(g.signature)}")

    Cstar = np.linalg.inv(C.conj().T @ Gpq)

    def Gx(x):
        D, sig = congruence_diagonalize(g(x))
        if sig != tuple(g.signature):
            raise SignatureError(f"inertia {sig} at {np.asarray(x).tolist()} differs from {tuple(g.signature)}")
        return A.conj().T @ D

    def Gstar(x):
        return np.linalg.inv(Gx(x).conj().T)

    return Rank1FlatTransport(C, Cstar, Gx, Gstar, g.domain, Gpq)


def metric_from_transport(t: Rank1FlatTransport, points=None, n=20, seed=0, tol=RELATION_TOL) -> HermitianMetric:
    """``G(x) = (*F_x)^-1 F_x``; raises :class:`HermiticityError` when the
    factors are not in the compatibility gauge."""
    if points is None:
        points = t.domain.sample(n, seed)
    defect, sig = 0.0, None
    for x in points:
        Gx = t.metric_at(x)
        defect = max(defect, float(np.linalg.norm(Gx - Gx.conj().T)))
        if sig is None:
            sig = inertia(Gx)
    if defect > tol:
        raise HermiticityError(f"recovered metric is not Hermitian (defect {defect:.3g})", defect)
    return HermitianMetric(t.metric_at, sig, t.domain)


def roundtrip_error(g: HermitianMetric, points, A=None, C_choice=None):
    """Max ``|G_out - G_in|`` and max Hermiticity defect over ``points``."""
    t = transport_from_metric(g, A, C_choice, points)
    out = metric_from_transport(t, points)
    err = max(float(np.max(np.abs(out(x) - g(x)))) for x in points)
    herm = max(float(np.linalg.norm(out(x) - out(x).conj().T)) for x in points)
    return err, herm


# -- cross-fibre operations with a flat transport --------------------------


def _require(t0: TransportFamily, x):
    if not t0.domain.contains(x):
        raise DomainError(f"{np.asarray(x).tolist()} outside the base")


def cross_fiber_combine(t0: TransportFamily, terms: Sequence, x):
    """``sum_i lam_i K0_{y_i -> x} u_i`` for ``terms = [(lam, u, y), ...]``."""
    _require(t0, x)
    out = np.zeros(t0.fibre.rank, dtype=complex if t0.fibre.field == "complex" else float)
    for lam, u, y in terms:
        _require(t0, y)
        out = out + lam * t0.apply(y, x, np.asarray(u))
    return out


def extend_binary_op(beta, t0: TransportFamily, x, u, y, v, z):
    """``beta_x(K0_{y->x} u, K0_{z->x} v)``."""
    for p in (x, y, z):
        _require(t0, p)
    return beta(x, t0.apply(y, x, np.asarray(u)), t0.apply(z, x, np.asarray(v)))


def trapezoid_grid(bounds, n):
    """Nodes and weights of the tensor-product trapezoid rule, ``n`` per axis."""
    axes, wts = [], []
    for lo, hi in bounds:
        nodes = np.linspace(lo, hi, n)
        w = np.full(n, (hi - lo) / (n - 1))
        w[[0, -1]] *= 0.5
        axes.append(nodes)
        wts.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=1), axis=1)
    return points, weights


def integrate_section(sigma, t0: TransportFamily, x, points, weights):
    """``sum_j w_j K0_{y_j -> x} sigma(y_j)``: a vector in the fibre over x."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("quadrature weights must be positive")
    terms = [(w, sigma(y), y) for w, y in zip(weights, points)]
    return cross_fiber_combine(t0, terms, x)
