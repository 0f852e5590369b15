"""The formal Schrodinger operator, its quadratic form and exact identity checks.

Everything is evaluated edge by edge from the canonical edge list, so these
functions serve as an independent reference for the sparse matrices used by
the spectral layer.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptySet, NonPositiveWeight, PositivityHypothesisFailed, SolverFailure
from .graph_core import WeightedGraph, as_function, complement, dirichlet_restriction, indicator, vertex_set
from .report import VerificationReport, scale_of
from . import spectral


@dataclass(frozen=True)
class FormValue:
    value: float
    kinetic: float
    potential: float

    def __float__(self):
        return self.value


def _edge_diff(g, f):
    return f[g.eu] - f[g.ev]


def apply_H(g: WeightedGraph, f) -> np.ndarray:
    """(Hf)(x) = (1/m(x)) sum_y b(x,y)(f(x) - f(y)) + q(x) f(x)."""
    f = as_function(g, f)
    flux = g.eb * _edge_diff(g, f)
    out = np.zeros(g.n)
    np.add.at(out, g.eu, flux)
    np.add.at(out, g.ev, -flux)
    return out / g.m + g.q * f


def form_h(g: WeightedGraph, phi, psi=None) -> FormValue:
    """h(phi, psi) = sum_edges b dphi dpsi + sum q phi psi m."""
    phi = as_function(g, phi, "phi")
    psi = phi if psi is None else as_function(g, psi, "psi")
    kin = float(np.sum(g.eb * _edge_diff(g, phi) * _edge_diff(g, psi)))
    pot = float(np.sum(g.q * phi * psi * g.m))
    return FormValue(kin + pot, kin, pot)


def _check_weight(g, v, name="v"):
    v = as_function(g, v, name)
    if np.any(v <= 0):
        raise NonPositiveWeight(f"{name} must be strictly positive")
    return v


def grad_sq(g: WeightedGraph, f, v=None) -> np.ndarray:
    """|grad f|^2 pointwise, or the weighted |grad_v f|^2 when v is given."""
    f = as_function(g, f)
    d2 = g.eb * _edge_diff(g, f) ** 2
    if v is not None:
        v = _check_weight(g, v)
        d2 = d2 * v[g.eu] * v[g.ev]
    return _half_vertex_sum(g, d2)


def _half_vertex_sum(g, edge_vals):
    out = np.zeros(g.n)
    np.add.at(out, g.eu, edge_vals)
    np.add.at(out, g.ev, edge_vals)
    return out / (2.0 * g.m)


def weighted_grad_sq(g, f, weight):
    """|grad_weight f|^2 allowing zero weights (weight >= 0)."""
    f = as_function(g, f)
    weight = as_function(g, weight, "weight")
    d2 = g.eb * weight[g.eu] * weight[g.ev] * _edge_diff(g, f) ** 2
    return _half_vertex_sum(g, d2)


def greens_check(g: WeightedGraph, u, phi, rel_tol: float = 1e-12) -> VerificationReport:
    """h(u, phi) against sum u * H(phi) * m."""
    u = as_function(g, u, "u")
    phi = as_function(g, phi, "phi")
    lhs = form_h(g, u, phi).value
    rhs = float(np.sum(u * apply_H(g, phi) * g.m))
    return VerificationReport.identity("greens", lhs, rhs, rel_tol)


def gst_check(g: WeightedGraph, v, phi, lam=None, rel_tol: float = 1e-10) -> VerificationReport:
    """Ground state transform identity for v > 0.

    With ``lam`` given and v a supersolution to lam, the details also carry the
    inequality sum |grad_v phi|^2 m <= (h - lam)(v phi).
    """
    v = _check_weight(g, v)
    phi = as_function(g, phi, "phi")
    kin = float(np.sum(g.eb * v[g.eu] * v[g.ev] * _edge_diff(g, phi) ** 2))
    pot = float(np.sum(v * phi ** 2 * apply_H(g, v) * g.m))
    lhs = kin + pot
    rhs = form_h(g, v * phi).value
    details = {"gradient_term": kin, "potential_term": pot}
    notes = []
    if lam is not None:
        lam = float(lam)
        sup = apply_H(g, v) - lam * v
        shifted = rhs - lam * float(np.sum((v * phi) ** 2 * g.m))
        ok = bool(kin <= shifted + 1e-10 * scale_of(kin, shifted))
        is_super = bool(np.all(sup >= -1e-12 * scale_of(np.max(np.abs(sup)))))
        details.update(supersolution=is_super, ineq_lhs=kin, ineq_rhs=shifted, ineq_pass=ok)
        notes.append(f"sum |grad_v phi|^2 m = {kin:.12g} <= (h - lam)(v phi) = {shifted:.12g}: {ok}")
    return VerificationReport.identity("ground_state_transform", lhs, rhs, rel_tol, notes=notes, **details)


def caccioppoli_check(g: WeightedGraph, u, psi, rel_tol: float = 1e-10) -> VerificationReport:
    """h(psi u) <= sum |grad_{|u|} psi|^2 m + sum (Hu) psi^2 u m."""
    u = as_function(g, u, "u")
    psi = as_function(g, psi, "psi")
    lhs = form_h(g, psi * u).value
    grad = float(np.sum(weighted_grad_sq(g, psi, np.abs(u)) * g.m))
    pot = float(np.sum(apply_H(g, u) * psi ** 2 * u * g.m))
    return VerificationReport.inequality("caccioppoli", lhs, grad + pot, rel_tol,
                                         gradient_term=grad, potential_term=pot)


def q_in_V_check(g: WeightedGraph, eps: float, C: float, rel_tol: float = 1e-9) -> VerificationReport:
    """q_- <= (1 - eps) h_+ + C in form sense, via the smallest eigenvalue."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if C < 0:
        raise ValueError("C must be nonnegative")
    plus = g.with_q(g.q_plus)
    L = (1.0 - eps) * plus.form_matrix()
    shift = C - g.q_minus
    L = (L + sp.diags(shift * g.m)).tocsr()
    val = float(spectral.form_eigs(L, g.m, 1)[0][0])
    return VerificationReport.inequality("q_in_V", 0.0, val, rel_tol,
                                         notes=[f"min eigenvalue of (1-eps)h_+ + C - q_-: {val:.12g}"],
                                         min_eigenvalue=val, eps=eps, C=C)


@dataclass
class BoundaryCorrection:
    """chi = 2 b_K - lambda_K 1_K together with diagnostics.

    Unpacks as (chi, lambda_K, b_K).
    """

    chi: np.ndarray
    lambda_K: float
    b_K: np.ndarray
    min_eigenvalue: float
    hypothesis_ok: bool

    def __iter__(self):
        return iter((self.chi, self.lambda_K, self.b_K))


def boundary_b(g: WeightedGraph, K) -> np.ndarray:
    """b_K: edge weight crossing the boundary of K, divided by m, on both sides."""
    inK = indicator(g, K).astype(bool)
    cross = inK[g.eu] ^ inK[g.ev]
    out = np.zeros(g.n)
    np.add.at(out, g.eu[cross], g.eb[cross])
    np.add.at(out, g.ev[cross], g.eb[cross])
    return out / g.m


def boundary_correction(g: WeightedGraph, K, method: str = "auto") -> BoundaryCorrection:
    """Correction chi supported on N(K) making h + chi nonnegative.

    Requires h >= 0 on functions supported off K; a failed hypothesis is
    reported through a PositivityHypothesisFailed warning and the computation
    is still returned.
    """
    K = vertex_set(g, K)
    if K.size == 0:
        raise EmptySet("K must be nonempty")
    bK = boundary_b(g, K)
    inner = dirichlet_restriction(g, K)
    lamK = float(spectral.form_eigs(inner.form_matrix(), inner.m, 1, method)[0][0])
    chi = 2.0 * bK - lamK * indicator(g, K)

    rest = complement(g, K)
    hyp = True
    if rest.size:
        hyp = bool(spectral.form_positivity(g, np.zeros(g.n), K, method).passed)
        if not hyp:
            warnings.warn("h is not nonnegative off K; boundary correction may not restore positivity",
                          PositivityHypothesisFailed, stacklevel=2)
    corrected = g.with_q(g.q + chi)
    val = float(spectral.form_eigs(corrected.form_matrix(), g.m, 1, method)[0][0])
    if hyp and val < -1e-9 * scale_of(val, lamK):
        raise SolverFailure(f"h + chi has eigenvalue {val} < 0 although h >= 0 off K")
    return BoundaryCorrection(chi, lamK, bK, val, hyp)
