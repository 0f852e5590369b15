"""Eigenproblems and linear solves for the Schrodinger operator on l^2(X, m).

The operator H = M^{-1} L is symmetric for the m-inner product; everything here
works with the similar matrix S = M^{-1/2} L M^{-1/2} and maps vectors back.
Graphs up to DENSE_LIMIT vertices use LAPACK, larger ones LOBPCG with an
algebraic multigrid preconditioner (and CG/MINRES for solves).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import EmptyComplement, NearSingular, SolverFailure
from .graph_core import WeightedGraph, as_function, complement, dirichlet_restriction, vertex_set
from .report import VerificationReport, scale_of

DENSE_LIMIT = 2000
EIG_RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-8


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are m-orthonormal eigenfunctions
    residuals: np.ndarray
    method: str

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]


@dataclass
class EssentialEstimate:
    """Bottom of the spectrum of Dirichlet restrictions to X \\ K_j."""

    sequence: list
    estimate: float
    lambda0: float
    gap: float
    levels_used: int
    notes: list = field(default_factory=list)


def _symmetrized(L, m):
    d = sp.diags(1.0 / np.sqrt(m))
    return (d @ L @ d).tocsr()


def gershgorin_lower(S) -> float:
    S = sp.csr_matrix(S)
    diag = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - off)) if S.shape[0] else 0.0


def _fix_signs(vecs):
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0:
            vecs[:, j] = -col
    return vecs


def _residuals(S, vals, ys):
    return np.linalg.norm(S @ ys - ys * vals, axis=0)


def _dense_lowest(S, k):
    vals, ys = la.eigh(S.toarray(), subset_by_index=[0, k - 1])
    return vals, ys


def _iterative_lowest(S, k, seed=0):
    import pyamg

    n = S.shape[0]
    shift = gershgorin_lower(S) - 1.0
    A = (S - shift * sp.identity(n, format="csr")).tocsr()
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
    block = min(n, k + 4)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, ys = sla.lobpcg(S, X, M=ml.aspreconditioner(), largest=False,
                              tol=1e-11, maxiter=2000)
    order = np.argsort(vals)
    vals, ys = vals[order][:k], ys[:, order][:, :k]
    # one Rayleigh-Ritz pass on the returned block tightens orthonormality
    Q, _ = np.linalg.qr(ys)
    T = Q.T @ (S @ Q)
    tv, tw = la.eigh((T + T.T) / 2)
    return tv, Q @ tw


def form_eigs(L, m, k=1, method="auto", seed=0):
    """Lowest ``k`` eigenpairs of the form matrix ``L`` w.r.t. the measure ``m``.

    Returns (eigenvalues, eigenfunctions as columns, residuals, method).
    """
    m = np.asarray(m, dtype=float)
    n = L.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    S = _symmetrized(sp.csr_matrix(L), m)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        vals, ys = _dense_lowest(S, k)
    elif method == "iterative":
        if n <= k + 4:
            vals, ys = _dense_lowest(S, k)
        else:
            vals, ys = _iterative_lowest(S, k, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = _residuals(S, vals, ys)
    bad = res > EIG_RESIDUAL_TOL * (1 + np.abs(vals))
    if np.any(bad) and method == "iterative":
        vals2, ys2 = sla.eigsh(S, k=k, sigma=gershgorin_lower(S) - 1.0, which="LM", tol=1e-12)
        order = np.argsort(vals2)
        vals, ys = vals2[order], ys2[:, order]
        res = _residuals(S, vals, ys)
        bad = res > EIG_RESIDUAL_TOL * (1 + np.abs(vals))
        method = "iterative+shift-invert"
    if np.any(bad):
        raise SolverFailure(f"eigenpair residuals {res[bad]} exceed tolerance")
    vecs = _fix_signs(ys / np.sqrt(m)[:, None])
    return vals, vecs, res, method


def eigensolve_lowest(g: WeightedGraph, k: int = 1, method: str = "auto") -> SpectralResult:
    """The ``k`` smallest eigenpairs of the Schrodinger operator of ``g``."""
    vals, vecs, res, used = form_eigs(g.form_matrix(), g.m, k, method)
    return SpectralResult(vals, vecs, res, used)


def lambda0(g: WeightedGraph, method: str = "auto") -> float:
    return float(form_eigs(g.form_matrix(), g.m, 1, method)[0][0])


def lambda0_ess_estimate(g: WeightedGraph, exhaustion, method: str = "auto") -> EssentialEstimate:
    """Bottom of the spectrum of the Dirichlet restriction to X \\ K_j along K_j.

    The sequence is nondecreasing for nested K_j; its last value is reported
    as the estimate of the bottom of the essential spectrum. Levels whose
    complement is empty end the sequence.
    """
    seq = []
    notes = ["estimate: Dirichlet exhaustion heuristic, not a certified value"]
    prev = None
    for j, K in enumerate(exhaustion):
        K = vertex_set(g, K)
        if prev is not None and not np.all(np.isin(prev, K)):
            raise ValueError(f"exhaustion level {j} does not contain level {j - 1}")
        prev = K
        rest = complement(g, K)
        if rest.size == 0:
            notes.append(f"level {j} exhausts the graph; sequence stops")
            break
        val = lambda0(dirichlet_restriction(g, rest), method)
        if seq and val < seq[-1] - 1e-9 * scale_of(val, seq[-1]):
            raise SolverFailure(f"Dirichlet monotonicity violated at level {j}: {val} < {seq[-1]}")
        seq.append(val)
    if not seq:
        raise EmptyComplement("every exhaustion level leaves an empty complement")
    lam0 = lambda0(g, method)
    return EssentialEstimate(seq, seq[-1], lam0, seq[-1] - lam0, len(seq), notes)


def solve_H_eq(g: WeightedGraph, f, lam: float = 0.0, method: str = "auto") -> np.ndarray:
    """Solve (H - lam) u = f.

    Dense solves check that lam stays 1e-10 away from the spectrum. Iterative
    solves use CG with a diagonal preconditioner, then MINRES when the shifted
    operator is indefinite.
    """
    f = as_function(g, f)
    L = g.form_matrix()
    A = (L - lam * sp.diags(g.m)).tocsr()
    rhs = g.m * f
    fnorm = np.sqrt(np.sum(f * f * g.m))
    if fnorm == 0.0:
        return np.zeros(g.n)
    if method == "auto":
        method = "dense" if g.n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        S = _symmetrized(L, g.m).toarray()
        eig = la.eigvalsh(S)
        gap = float(np.min(np.abs(eig - lam)))
        if gap < 1e-10 * scale_of(lam):
            raise NearSingular(f"lambda={lam} is within {gap:.2e} of an eigenvalue")
        u = la.solve(A.toarray(), rhs, assume_a="sym")
    else:
        d = A.diagonal()
        precond = sp.diags(1.0 / np.where(np.abs(d) > 0, np.abs(d), 1.0))
        u, info = sla.cg(A, rhs, rtol=1e-13, atol=0.0, M=precond, maxiter=20 * g.n)
        if info != 0 or not _solved(g, u, f, lam, fnorm):
            u, info = sla.minres(A, rhs, rtol=1e-14, M=precond, maxiter=20 * g.n)
    if not _solved(g, u, f, lam, fnorm):
        raise SolverFailure("linear solve did not reach ||(H - lam)u - f||_m <= 1e-9 ||f||_m")
    return u


def apply_shifted(g, u, lam):
    return (g.form_matrix() @ u) / g.m - lam * u


def _solved(g, u, f, lam, fnorm):
    r = apply_shifted(g, u, lam) - f
    return bool(np.sqrt(np.sum(r * r * g.m)) <= 1e-9 * fnorm)


def form_positivity(g: WeightedGraph, w, K=None, method: str = "auto", rel_tol: float = 1e-9) -> VerificationReport:
    """Check h >= w on functions supported in X \\ K (K empty: all functions)."""
    w = as_function(g, w, "w")
    rest = complement(g, K) if K is not None else np.arange(g.n)
    if rest.size == 0:
        return VerificationReport.inequality("form_positivity", 0.0, 0.0, rel_tol,
                                             notes=["K covers the graph; nothing to check"], min_eigenvalue=np.inf)
    sub = dirichlet_restriction(g.with_q(g.q - w), rest)
    val = float(form_eigs(sub.form_matrix(), sub.m, 1, method)[0][0])
    notes = [f"min eigenvalue of h - w off K: {val:.12g}", f"|K| = {g.n - rest.size}"]
    return VerificationReport.inequality("form_positivity", 0.0, val, rel_tol, notes=notes, min_eigenvalue=val)


def m_inner(g: WeightedGraph, u, v) -> float:
    return float(np.sum(u * v * g.m))
