"""Hardy weights from positive supersolutions and truncated Green functions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadExponent, BadParams, ConfigError, GeneralPotentialWarning,
                     NonPositiveSupersolution, SolverFailure)
from .graph_core import (WeightedGraph, as_function, combinatorial_distance, complement,
                         dirichlet_restriction, vertex_set)
from .operator import apply_H
from .report import VerificationReport, scale_of
from . import spectral

V_FLOOR = 1e-300


@dataclass
class HardyWeight:
    w: np.ndarray
    v: np.ndarray
    alpha: float
    K: np.ndarray
    oscillation: float
    clamped: int = 0
    positivity: VerificationReport | None = None
    notes: list = field(default_factory=list)


def _positive(g, v):
    v = as_function(g, v, "v")
    if np.any(~(v >= V_FLOOR)):
        raise NonPositiveSupersolution("v must be strictly positive (>= 1e-300) everywhere")
    return v


def oscillation(g: WeightedGraph, v) -> float:
    """sup over edges x ~ y of v(x)/v(y)."""
    v = _positive(g, v)
    if g.num_edges == 0:
        return 1.0
    r = v[g.eu] / v[g.ev]
    return float(np.max(np.maximum(r, 1.0 / r)))


def supersolution_hardy(g: WeightedGraph, v, alpha: float = 0.5, K=None, *,
                        general_q: bool = False, check_positivity: bool = True) -> HardyWeight:
    """w_alpha = H(v^alpha) / v^alpha for a positive supersolution v.

    The potential must vanish apart from the part absorbed by a Dirichlet
    truncation; pass ``general_q=True`` to accept any q (with a warning).
    """
    if not 0.0 < alpha <= 1.0:
        raise BadExponent(f"alpha must lie in (0, 1], got {alpha}")
    v = _positive(g, v)
    notes = []
    if np.any(g.q_intrinsic != 0.0):
        if not general_q:
            raise ConfigError("the supersolution construction needs q = 0; pass general_q=True to override")
        warnings.warn("Hardy weight built for a nonzero potential", GeneralPotentialWarning, stacklevel=2)
        notes.append("general potential: weight not covered by the q = 0 construction")
    va = v ** alpha
    w = apply_H(g, va) / va
    tol = 1e-12 * scale_of(np.max(np.abs(w)) if w.size else 0.0)
    if np.any(w < -tol):
        worst = int(np.argmin(w))
        raise NonPositiveSupersolution(
            f"w is negative at vertex {g.labels[worst]} ({w[worst]:.3e}); v is not a supersolution")
    clamped = int(np.sum(w < 0))
    w = np.maximum(w, 0.0)
    K = np.zeros(0, np.int64) if K is None else vertex_set(g, K)
    rep = spectral.form_positivity(g, w, K if K.size else None) if check_positivity else None
    if rep is not None and not rep.passed:
        notes.append("h >= w not confirmed on the truncation (see positivity report)")
    return HardyWeight(w, v, float(alpha), K, oscillation(g, v), clamped, rep, notes)


def box_boundary(g: WeightedGraph, root=None) -> np.ndarray:
    """Outer layer of a box (sup-norm) or the farthest BFS layer from ``root``."""
    if g.coords is not None:
        c = np.abs(np.asarray(g.coords, dtype=float))
        sup = c.max(axis=1) if c.ndim == 2 else c
        return np.flatnonzero(sup == sup.max()).astype(np.int64)
    if root is None:
        root = g.origin
    if root is None:
        raise BadParams("no coordinates and no root: cannot pick a boundary layer")
    dist = combinatorial_distance(g, [root])
    return np.flatnonzero(dist == dist.max()).astype(np.int64)


def lattice_green_asymptotic(coords) -> np.ndarray:
    """kappa |x|^{2-d} with kappa = Gamma(d/2 - 1) / (4 pi^{d/2}), for unit-weight Z^d, d >= 3."""
    x = np.asarray(coords, dtype=float)
    d = x.shape[1]
    if d < 3:
        raise BadParams("the lattice Green function decays only for d >= 3")
    kappa = math.gamma(d / 2 - 1) / (4 * math.pi ** (d / 2))
    r = np.linalg.norm(x, axis=1)
    with np.errstate(divide="ignore"):
        return kappa * r ** (2.0 - d)


def green_function(g: WeightedGraph, root=None, boundary=None, boundary_data=None) -> np.ndarray:
    """Truncated Green function: H v = 1_root / m inside, v prescribed on the boundary layer.

    ``boundary_data`` is None (v = 0 on the boundary), "asymptotic" (the
    lattice asymptotics kappa |x|^{2-d}, which removes most of the truncation
    bias) or an array on the vertices of ``g``. Nonnegative boundary data act
    as a source, so v stays a positive supersolution of the truncated operator.
    """
    if root is None:
        if g.origin is None:
            raise BadParams("graph has no origin; pass a root")
        root = g.origin
    root = int(root)
    if np.any(g.q_intrinsic != 0.0):
        raise ConfigError("the Green function fixture needs q = 0")
    bnd = box_boundary(g, root) if boundary is None else vertex_set(g, boundary)
    if root in set(bnd.tolist()):
        raise BadParams("root lies on the boundary; it must be interior")
    vb = np.zeros(g.n)
    if isinstance(boundary_data, str):
        if boundary_data != "asymptotic":
            raise BadParams(f"unknown boundary data {boundary_data!r}")
        if g.coords is None:
            raise BadParams("asymptotic boundary data need lattice coordinates")
        vb[bnd] = lattice_green_asymptotic(np.asarray(g.coords)[bnd])
    elif boundary_data is not None:
        vb[bnd] = as_function(g, boundary_data, "boundary_data")[bnd]
    if np.any(vb < 0) or not np.all(np.isfinite(vb)):
        raise BadParams("boundary data must be finite and nonnegative")
    interior = complement(g, bnd)
    sub = dirichlet_restriction(g, interior)
    k = int(np.searchsorted(interior, root))
    rhs = (g.adjacency() @ vb)[interior] / sub.m
    rhs[k] += 1.0 / sub.m[k]
    vs = spectral.solve_H_eq(sub, rhs, 0.0)
    reach = combinatorial_distance(sub, [k]) >= 0
    if np.any(vs[reach] <= 0.0) or np.any(vs < -1e-14 * vs.max()):
        raise SolverFailure("truncated Green function is not positive on the root component")
    v = vb.copy()
    v[interior] = np.maximum(vs, 0.0)
    return v


def power_gamma(eps0: float, alpha: float) -> float:
    """gamma = ((1 - eps0^alpha) / (1 - eps0))^2, with limit alpha^2 at eps0 = 1."""
    if eps0 >= 1.0:
        return alpha * alpha
    return ((1.0 - eps0 ** alpha) / (1.0 - eps0)) ** 2


def oscillation_and_gamma(g: WeightedGraph, v, alpha: float, grid: int = 100, seed: int = 0):
    """eps0 = (inf v(x)/v(y))^{1/2}, gamma(eps0, alpha) and a check of
    (1 - a^alpha)^2 <= gamma (1 - a)^2 on every edge ratio a and on an (a, t) grid."""
    if not 0.0 < alpha <= 1.0:
        raise BadExponent(f"alpha must lie in (0, 1], got {alpha}")
    v = _positive(g, v)
    eps0 = 1.0 / np.sqrt(oscillation(g, v))
    gamma = power_gamma(eps0, alpha)

    # edge ratios in both directions: a = (v(y)/v(x))^{1/2}
    ratio = np.sqrt(v[g.ev] / v[g.eu]) if g.num_edges else np.ones(0)
    a_edge = np.concatenate([ratio, 1.0 / ratio])
    a_grid = np.geomspace(eps0, max(eps0, 1.0) * 10.0, grid) if eps0 < 1 else np.linspace(1.0, 10.0, grid)
    t_grid = np.geomspace(1e-3, 1e3, grid)
    A, T = np.meshgrid(a_grid, t_grid)
    lhs_grid = (T ** alpha - (A * T) ** alpha) ** 2 / T ** (2 * alpha)
    rhs_grid = gamma * (1.0 - A) ** 2
    lhs_edge = (1.0 - a_edge ** alpha) ** 2
    rhs_edge = gamma * (1.0 - a_edge) ** 2
    lhs = np.concatenate([lhs_grid.ravel(), lhs_edge])
    rhs = np.concatenate([rhs_grid.ravel(), rhs_edge])
    excess = lhs - rhs - 1e-12 * np.maximum(1.0, np.maximum(lhs, rhs))
    k = int(np.argmax(excess)) if excess.size else 0
    rep = VerificationReport.inequality(
        "power_inequality", float(lhs[k]) if lhs.size else 0.0, float(rhs[k]) if rhs.size else 0.0, 1e-12,
        notes=[f"eps0 = {eps0:.12g}", f"gamma = {gamma:.12g}", f"{lhs.size} points checked"],
        violations=int(np.sum(excess > 0)))
    rep.passed = bool(np.all(excess <= 0))
    return float(eps0), float(gamma), rep


@dataclass
class GrowthTrend:
    radii: list
    sums: list
    classification: str
    log_slope: float
    linear_slope: float
    notes: list = field(default_factory=list)


def null_criticality_trend(g: WeightedGraph, hw: HardyWeight, exhaustion) -> GrowthTrend:
    """Partial sums S_j = sum_{B_j} v w m; a diagnostic, never a verdict."""
    sums, radii = [], []
    for j, B in enumerate(exhaustion):
        B = vertex_set(g, B)
        sums.append(float(np.sum(hw.v[B] * hw.w[B] * g.m[B])))
        radii.append(j + 1)
    s = np.asarray(sums)
    if s.size >= 2 and s[-1] > 0:
        last_inc = (s[-1] - s[-2]) / s[-1]
        classification = "bounded" if last_inc < 1e-3 else "increasing without visible saturation"
    else:
        classification = "bounded"
    r = np.asarray(radii, dtype=float)
    log_slope = float(np.polyfit(np.log(r), s, 1)[0]) if s.size >= 2 else 0.0
    lin_slope = float(np.polyfit(r, s, 1)[0]) if s.size >= 2 else 0.0
    return GrowthTrend(radii, sums, classification, log_slope, lin_slope,
                       notes=["diagnostic on a truncation; not a proof of null-criticality"])
