"""Seeded random smooth matrix fields used by scenarios and tests."""

from __future__ import annotations

import numpy as np


def random_matrix(rng, n, complex_=False):
    A = rng.standard_normal((n, n))
    if complex_:
        A = A + 1j * rng.standard_normal((n, n))
    return A


def well_conditioned(rng, n, complex_=False, spread=0.4):
    """Random matrix ``U (I + spread*B) V`` with orthogonal/unitary U, V.

    Its condition number is at most (1+spread)/(1-spread).
    """
    U, _ = np.linalg.qr(random_matrix(rng, n, complex_))
    V, _ = np.linalg.qr(random_matrix(rng, n, complex_))
    B = random_matrix(rng, n, complex_)
    B = B / np.linalg.norm(B, 2)
    return U @ (np.eye(n) + spread * B) @ V


class SmoothMatrixField:
    """``x -> base @ (I + sum_j s_j(x) B_j)`` with bounded smooth weights.

    The perturbation has spectral norm below ``amplitude`` < 1, so every value
    is invertible. Analytic first derivatives are available via
    :meth:`derivative`.
    """

    def __init__(self, rng, n, dim, complex_=False, amplitude=0.5, modes=2, base=None):
        self.n, self.dim = n, dim
        self.base = well_conditioned(rng, n, complex_) if base is None else np.asarray(base)
        count = modes * dim
        self.freq = rng.uniform(0.5, 1.5, size=(count, dim))
        self.phase = rng.uniform(0, 2 * np.pi, size=count)
        Bs = []
        for _ in range(count):
            B = random_matrix(rng, n, complex_)
            Bs.append(B / np.linalg.norm(B, 2) * amplitude / count)
        self.Bs = np.array(Bs)

    def perturbation(self, x):
        s = np.sin(self.freq @ np.atleast_1d(x) + self.phase)
        return np.tensordot(s, self.Bs, axes=1)

    def __call__(self, x):
        return self.base @ (np.eye(self.n) + self.perturbation(x))

    def derivative(self, x, a):
        c = np.cos(self.freq @ np.atleast_1d(x) + self.phase) * self.freq[:, a]
        return self.base @ np.tensordot(c, self.Bs, axes=1)


def random_hermitian_metric_field(rng, n, signature, dim, complex_=True, amplitude=0.5):
    """``x -> D(x)^dag G_pq D(x)`` with a smooth invertible ``D``."""
    p, q = signature
    if p + q != n:
        raise ValueError("signature must add up to the rank")
    Gpq = np.diag([1.0] * p + [-1.0] * q)
    D = SmoothMatrixField(rng, n, dim, complex_, amplitude)

    def G(x):
        Dx = D(x)
        M = Dx.conj().T @ Gpq @ Dx
        return 0.5 * (M + M.conj().T)

    return G


def pseudo_unitary(rng, signature, complex_=False):
    """Random ``L`` with ``L^dag G_pq L = G_pq`` (a boost times block rotations)."""
    p, q = signature
    n = p + q
    Up, _ = np.linalg.qr(random_matrix(rng, p, complex_)) if p else (np.zeros((0, 0)), None)
    Uq, _ = np.linalg.qr(random_matrix(rng, q, complex_)) if q else (np.zeros((0, 0)), None)
    R = np.zeros((n, n), dtype=complex if complex_ else float)
    R[:p, :p] = Up
    R[p:, p:] = Uq
    if p and q:
        t = rng.uniform(-1, 1)
        boost = np.eye(n)
        boost[0, 0] = boost[p, p] = np.cosh(t)
        boost[0, p] = boost[p, 0] = np.sinh(t)
        R = boost @ R
    return R


def random_factor_transport(rng, rank, complex_=False, domain=None, kappa=None):
    """Lawful transport ``F(m)^-1 F(l)`` with a random smooth factor field.

    With ``kappa`` the transport runs along that map; otherwise along the
    identity of ``domain`` (a flat transport).
    """
    from .base import ParamDomain, identity_map
    from .core import FactorFamily, FibreModel, from_factor_maps

    if kappa is None:
        kappa = identity_map(domain or ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0))))
    field = SmoothMatrixField(rng, rank, kappa.domain.k, complex_)
    fibre = FibreModel(rank, "complex" if complex_ else "real")
    return from_factor_maps(FactorFamily(kappa, field, fibre)), field


def random_composite_transport(rng, rank, labels=("a", "b", "c"), M=None, complex_=False):
    """Lawful transport along ``id_{A x M}`` with a finite label set A."""
    from .base import ParamDomain
    from .composite import CompositeDomain, FiniteDomain, identity_product_map
    from .core import FactorFamily, FibreModel, from_factor_maps

    M = M or ParamDomain(2, ((-1.0, 1.0), (-1.0, 1.0)))
    dom = CompositeDomain(FiniteDomain(tuple(labels)), M)
    fields = {a: SmoothMatrixField(rng, rank, M.k, complex_) for a in dom.A.labels}
    fibre = FibreModel(rank, "complex" if complex_ else "real")
    fam = FactorFamily(identity_product_map(dom), lambda p: fields[p[0]](p[1]), fibre)
    return from_factor_maps(fam)
