"""Closed-form geometry of the round unit sphere in the chart (theta, phi).

These are the classical oracles: metric, Christoffel symbols, Riemann tensor
and the holonomy of latitude circles.
"""

import numpy as np

from .base import SPHERE_CHART
from .linear import Connection


def metric(x):
    th = x[0]
    return np.diag([1.0, np.sin(th) ** 2])


def christoffel(x):
    """``out[i, j, k] = Gamma^i_{jk}`` of the Levi-Civita connection."""
    th = x[0]
    out = np.zeros((2, 2, 2))
    out[0, 1, 1] = -np.sin(th) * np.cos(th)
    out[1, 0, 1] = out[1, 1, 0] = np.cos(th) / np.sin(th)
    return out


def levi_civita() -> Connection:
    """Connection whose k-th coefficient matrix is ``(Gamma_k)^i_j = Gamma^i_{jk}``."""
    return Connection(lambda x: np.transpose(christoffel(x), (2, 0, 1)), 2, 2)


def riemann(x):
    """``out[i, j, k, l] = R^i_{jkl} = delta^i_k g_{jl} - delta^i_l g_{jk}`` (K = 1)."""
    g = metric(x)
    d = np.eye(2)
    return np.einsum("ik,jl->ijkl", d, g) - np.einsum("il,jk->ijkl", d, g)


def holonomy_angle(H, colatitude):
    """Rotation angle in [0, 2 pi) of a coordinate-frame holonomy matrix,
    read in the orthonormal frame (e_theta, e_phi / sin theta)."""
    S = np.diag([1.0, np.sin(colatitude)])
    R = S @ H @ np.linalg.inv(S)
    return float(np.mod(np.arctan2(R[1, 0], R[0, 0]), 2 * np.pi))


def expected_holonomy(colatitude):
    """Enclosed area of the polar cap: ``2 pi (1 - cos theta0)``."""
    return 2 * np.pi * (1 - np.cos(colatitude))


def log_sqrt_det_gradient(x):
    """``d_k ln sqrt(det g)``."""
    return np.array([np.cos(x[0]) / np.sin(x[0]), 0.0])


CHART = SPHERE_CHART
