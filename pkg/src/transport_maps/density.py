"""Tensor densities and their partial (plus/minus) derivations along maps.

A density of type (p, q) and weight w is stored through its components in a
fixed reference frame ``E0``. In another frame ``E1 = E0 A`` the components
are ``|det A|^w`` times the ordinary tensor components, i.e. the tensor equals
``components * |det J|^w`` in the basis ``E1`` with ``J = A^-1``.

Frames are matrix fields whose columns are the basis vectors in chart
coordinates. Tensor components are arrays with the p upper axes first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .base import default_step, fd_partial
from .core import _check_condition
from .errors import SmoothnessError
from .linear import Frame, GammaField, LinearTransportRep, coordinate_frame, transform_gamma


@dataclass(frozen=True)
class TensorDensity:
    type: tuple
    weight: float
    components: Callable[[Any], np.ndarray]
    reference_frame: Frame
    active_frame: Optional[Frame] = None
    smoothness: str = "C2"

    @property
    def order(self):
        return sum(self.type)

    def __call__(self, x):
        return np.asarray(self.components(x))


def transform_tensor(T, A, p, q):
    """Components in the frame ``E A`` of a (p, q) tensor given in ``E``.

    Upper slots transform with ``A^-1``, lower slots with ``A``.
    """
    T = np.asarray(T)
    Ainv = np.linalg.inv(A)
    for s in range(p):
        T = np.moveaxis(np.tensordot(Ainv, T, axes=([1], [s])), 0, s)
    for s in range(p, p + q):
        T = np.moveaxis(np.tensordot(A, T, axes=([0], [s])), 0, s)
    return T


def transition(d: TensorDensity, frame: Frame, x):
    """``A = E0(x)^-1 E(x)``."""
    E0 = np.asarray(d.reference_frame(x))
    _check_condition(E0, " (reference frame)")
    E = np.asarray(frame(x))
    _check_condition(E, " (frame)")
    return np.linalg.solve(E0, E)


def density_components(d: TensorDensity, frame: Frame, x):
    """Density components in ``frame``: ``|det A|^w`` times the tensor law."""
    A = transition(d, frame, x)
    p, q = d.type
    return abs(np.linalg.det(A)) ** d.weight * transform_tensor(d(x), A, p, q)


def to_tensor(d: TensorDensity, frame: Frame, x):
    """Ordinary tensor components in ``frame``: ``components * |det J|^w``."""
    A = transition(d, frame, x)
    return density_components(d, frame, x) * abs(np.linalg.det(A)) ** (-d.weight)


def representation_defect(d: TensorDensity, frames, x):
    """Spread of the coordinate tensor rebuilt from each frame's density
    components; vanishes when the representation is frame independent."""
    p, q = d.type
    n = np.asarray(d.reference_frame(x)).shape[0]
    coord = coordinate_frame(n)
    outs = []
    for fr in frames:
        T = to_tensor(d, fr, x)
        # components in fr -> coordinate frame (= fr * fr^-1)
        outs.append(transform_tensor(T, np.linalg.inv(fr(x)) @ coord(x), p, q))
    return max(float(np.max(np.abs(o - outs[0]))) for o in outs)


def lift_gamma(G, T, p, q):
    """Leibniz lift of ``G`` to (p, q) tensors applied to ``T``: ``G`` on the
    upper slots and ``-G^T`` on the lower ones."""
    T = np.asarray(T)
    out = np.zeros(T.shape, dtype=np.result_type(G, T))
    for s in range(p):
        out = out + np.moveaxis(np.tensordot(G, T, axes=([1], [s])), 0, s)
    for s in range(p, p + q):
        out = out - np.moveaxis(np.tensordot(G, T, axes=([0], [s])), 0, s)
    return out


def lift_matrix(M, p, q, dual=None):
    """Matrix of ``M^{x p} (x) dual^{x q}`` on row-major flattened tensors;
    ``dual`` defaults to ``M^-T``."""
    n = M.shape[0]
    dual = np.linalg.inv(M).T if dual is None else dual
    out = np.ones((1, 1), dtype=np.result_type(M, dual))
    for _ in range(p):
        out = np.kron(out, M)
    for _ in range(q):
        out = np.kron(out, dual)
    return out if p + q else np.eye(1)


def lift_rep(rep: LinearTransportRep, p, q) -> LinearTransportRep:
    """The induced transport on (p, q) tensors, flattened row-major."""
    return LinearTransportRep(rep.map, lambda m, l: lift_matrix(rep.H(m, l), p, q))


def traces(G):
    """``(P_minus, P_plus)``: trace of ``G`` on the tangent slot and of its
    dual lift ``-G^T``."""
    t = np.trace(G)
    return t, -t


def _frame_gamma(rep: LinearTransportRep, frame: Frame, l, a, gamma: GammaField, h):
    kappa = rep.map
    bounds = getattr(rep.domain, "bounds", None)
    E = lambda s: np.asarray(frame(kappa.eval(s)))
    return transform_gamma(gamma, E, l, h, bounds)[a]


def _correction(G, w, sign):
    pm, pp = traces(G)
    if sign == "plus":
        return w * pp
    if sign == "minus":
        return -w * pm
    raise ValueError("sign must be 'plus' or 'minus'")


def _require_c1(d):
    if d.smoothness not in ("C1", "C2"):
        raise SmoothnessError("density derivative needs a C1 density")


def density_derivative(d: TensorDensity, rep: LinearTransportRep, l, a, sign="plus", h=None, gamma=None):
    """Components in the active frame of the a-th plus/minus derivation:
    ``d T / d l^a + Gamma * T +- w P^{+-} T`` with Gamma in the active frame."""
    _require_c1(d)
    l = np.asarray(l, dtype=float)
    kappa = rep.map
    active = d.active_frame or d.reference_frame
    gamma = gamma or rep.gamma_field()
    G1 = _frame_gamma(rep, active, l, a, gamma, h)
    p, q = d.type
    comps = lambda s: density_components(d, active, kappa.eval(s))
    step = default_step(l) if h is None else h
    dT = fd_partial(comps, l, a, step, getattr(rep.domain, "bounds", None))
    T = comps(l)
    return dT + lift_gamma(G1, T, p, q) + _correction(G1, d.weight, sign) * T


def _tensor_derivation(d, rep, l, a, gamma, h):
    """``D_a`` of the density viewed as a tensor, in active-frame components."""
    kappa = rep.map
    active = d.active_frame or d.reference_frame
    G1 = _frame_gamma(rep, active, l, a, gamma, h)
    p, q = d.type
    T1 = lambda s: to_tensor(d, active, kappa.eval(s))
    step = default_step(l) if h is None else h
    dT1 = fd_partial(T1, l, a, step, getattr(rep.domain, "bounds", None))
    return dT1 + lift_gamma(G1, T1(l), p, q), T1(l), G1


def density_derivative_via_tensor(d: TensorDensity, rep: LinearTransportRep, l, a, sign="plus", h=None, gamma=None):
    """The same derivation computed the other way round: derive the tensor
    ``T * |det J|^w``, add ``+- w P0^{+-}`` built from Gamma in the reference
    frame, and divide by ``|det J|^w``."""
    _require_c1(d)
    l = np.asarray(l, dtype=float)
    gamma = gamma or rep.gamma_field()
    DT, T1, _ = _tensor_derivation(d, rep, l, a, gamma, h)
    G0 = _frame_gamma(rep, d.reference_frame, l, a, gamma, h)
    active = d.active_frame or d.reference_frame
    A = transition(d, active, rep.map.eval(l))
    return (DT + _correction(G0, d.weight, sign) * T1) * abs(np.linalg.det(A)) ** d.weight


def tensor_derivation_expansion(d: TensorDensity, rep: LinearTransportRep, l, a, h=None, gamma=None):
    """``(direct, expanded)`` tensor derivations of a density.

    ``direct`` differentiates the tensor components; ``expanded`` derives the
    density components, rescales by ``|det J|^w`` and adds the
    ``w d ln|det J|`` term written through the Gamma traces of both frames.
    """
    _require_c1(d)
    l = np.asarray(l, dtype=float)
    gamma = gamma or rep.gamma_field()
    direct, T1, G1 = _tensor_derivation(d, rep, l, a, gamma, h)
    G0 = _frame_gamma(rep, d.reference_frame, l, a, gamma, h)
    active = d.active_frame or d.reference_frame
    kappa = rep.map
    p, q = d.type
    comps = lambda s: density_components(d, active, kappa.eval(s))
    step = default_step(l) if h is None else h
    dT = fd_partial(comps, l, a, step, getattr(rep.domain, "bounds", None))
    detJw = abs(np.linalg.det(transition(d, active, kappa.eval(l)))) ** (-d.weight)
    dlog = -(np.trace(G1) - np.trace(G0))
    expanded = (dT + lift_gamma(G1, comps(l), p, q)) * detJw + T1 * d.weight * dlog
    return direct, expanded
