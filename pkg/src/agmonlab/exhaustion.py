"""Cut-off sequences, approximability and Folner diagnostics, Cheeger constants
and the sparseness form inequality."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NotNested, SizeGuard
from .graph_core import WeightedGraph, as_function, complement, mask, vertex_set
from .metrics import MetricField, _lengths, dist_to_set
from .operator import grad_sq, weighted_grad_sq
from .report import VerificationReport
from . import spectral

MAX_EXACT_SIZE = 14


def cutoff_sequence(g: WeightedGraph, metric: MetricField, eps: float, radii) -> list:
    """phi_n = (1 - d(B_n, .)/eps)_+ with B_n the metric ball of radius n about the root."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lengths = _lengths(g, metric)
    out = []
    for n in radii:
        B = np.flatnonzero(metric.dist <= n)
        if B.size == 0:
            out.append(np.zeros(g.n))
            continue
        d = dist_to_set(g, lengths, B).dist
        phi = np.clip(1.0 - d / eps, 0.0, 1.0)
        phi[~np.isfinite(d)] = 0.0
        if out and np.any(phi < out[-1] - 1e-15):
            raise NotNested("cut-off functions are not monotone in n")
        out.append(phi)
    return out


@dataclass
class ApproxReport:
    values: list
    verdict: str
    notes: list = field(default_factory=list)


def approximability_report(g: WeightedGraph, u, cutoffs, weak: bool = False,
                           frac: float = 0.1, noise: float = 1e-12) -> ApproxReport:
    """E_n = sum u^2 |grad phi_n|^2 m (weak: sum |grad_{|u|} phi_n|^2 m).

    The verdict is "decreasing-toward-zero" when the last value is at most
    ``frac`` of the maximum and the sequence is nonincreasing after its peak.
    """
    u = as_function(g, u, "u")
    vals = []
    prev = None
    for phi in cutoffs:
        phi = as_function(g, phi, "phi")
        if np.any(phi < -1e-15) or np.any(phi > 1 + 1e-15):
            raise ValueError("cut-off values must lie in [0, 1]")
        if prev is not None and np.any(phi < prev - 1e-15):
            raise NotNested("cut-off functions are not monotone")
        prev = phi
        if weak:
            vals.append(float(np.sum(weighted_grad_sq(g, phi, np.abs(u)) * g.m)))
        else:
            vals.append(float(np.sum(u * u * grad_sq(g, phi) * g.m)))
    v = np.asarray(vals)
    peak = float(v.max()) if v.size else 0.0
    if peak == 0.0:
        verdict = "decreasing-toward-zero"
    else:
        tail = v[int(np.argmax(v)):]
        mono = bool(np.all(np.diff(tail) <= noise * peak))
        verdict = "decreasing-toward-zero" if (v[-1] <= frac * peak and mono) else "not-decreasing"
    return ApproxReport(vals, verdict, ["diagnostic on a truncation: only finitely many annuli are seen"])


def boundary_mass(g: WeightedGraph, F) -> float:
    """b(dF): total weight of edges leaving F."""
    inF = mask(g, F)
    return float(np.sum(g.eb[inF[g.eu] ^ inF[g.ev]]))


def vertex_boundary(g: WeightedGraph, F) -> np.ndarray:
    """Both endpoints of every edge leaving F."""
    inF = mask(g, F)
    cross = inF[g.eu] ^ inF[g.ev]
    return np.union1d(g.eu[cross], g.ev[cross]).astype(np.int64)


@dataclass
class FolnerReport:
    boundary: list
    measure: list
    ratios: list
    u_scaled: list | None = None
    fitted_C: float | None = None


def folner_report(g: WeightedGraph, sets, u=None) -> FolnerReport:
    """Ratios b(dF_n)/m(F_n); with u, also sup_{d_V F_n}|u| * m(F_n)^{1/2} and its max C."""
    sets = [vertex_set(g, F) for F in sets]
    for j in range(1, len(sets)):
        if not np.all(np.isin(sets[j - 1], sets[j])):
            raise NotNested(f"set {j - 1} is not contained in set {j}")
    bd, ms, rs, us = [], [], [], []
    for F in sets:
        if F.size == 0:
            raise NotNested("Folner sets must be nonempty")
        b = boundary_mass(g, F)
        mF = float(np.sum(g.m[F]))
        bd.append(b)
        ms.append(mF)
        rs.append(b / mF)
        if u is not None:
            uu = as_function(g, u, "u")
            dv = vertex_boundary(g, F)
            us.append(float(np.max(np.abs(uu[dv]))) * math.sqrt(mF) if dv.size else 0.0)
    if u is None:
        return FolnerReport(bd, ms, rs)
    return FolnerReport(bd, ms, rs, us, max(us) if us else 0.0)


@dataclass
class IsoperimetricProfile:
    sets: list
    boundary: list
    volume: list
    measure: list
    ratios: list
    method: list
    alpha_exact: float
    alpha_family: float
    alpha: float
    exact: bool
    notes: list = field(default_factory=list)


def _boundary_vol(g, W):
    inW = mask(g, W)
    b = float(np.sum(g.eb[inW[g.eu] ^ inW[g.ev]])) + float(np.sum(g.q_plus[W] * g.m[W]))
    return b, float(np.sum(g.deg[W]))


def connected_subsets(g: WeightedGraph, max_size: int, allowed=None):
    """Yield (W, |dW|, vol W) for every connected W of size <= max_size.

    Each set is produced exactly once, from its smallest vertex, by the
    exclusive-neighbourhood extension rule.
    """
    ok = np.ones(g.n, dtype=bool) if allowed is None else mask(g, allowed)
    nbrs = [g.neighbors(x) for x in range(g.n)]
    qm = g.q_plus * g.m

    def rec(S, inS, ext, start, bnd, vol, closed):
        yield list(S), bnd, vol
        if len(S) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            ys, bs = nbrs[w]
            into = float(np.sum(bs[inS[ys]]))
            nb = bnd + g.deg_b[w] - 2.0 * into + qm[w]
            nv = vol + g.deg[w]
            new = [int(y) for y in ys if y > start and ok[y] and not closed[y]]
            for y in new:
                closed[y] = True
            S.append(w)
            inS[w] = True
            yield from rec(S, inS, ext + new, start, nb, nv, closed)
            S.pop()
            inS[w] = False
            for y in new:
                closed[y] = False

    for v in range(g.n):
        if not ok[v]:
            continue
        inS = np.zeros(g.n, dtype=bool)
        inS[v] = True
        closed = np.zeros(g.n, dtype=bool)
        closed[v] = True
        ys, _ = nbrs[v]
        ext = [int(y) for y in ys if y > v and ok[y]]
        for y in ext:
            closed[y] = True
        yield from rec([v], inS, ext, v, float(g.deg_b[v] + qm[v]), float(g.deg[v]), closed)


def cheeger_report(g: WeightedGraph, max_exact_size: int = 8, family=None, K=None,
                   include_cosingletons: bool = True) -> IsoperimetricProfile:
    """Cheeger ratios |dW|/vol(W) over proper subsets W of X \\ K.

    Connected sets up to ``max_exact_size`` are enumerated exactly; ``family``
    (and, by default, the complements X \\ (K + {x})) add upper bounds.
    ``exact`` is set when the enumeration covered every proper connected set.
    """
    if max_exact_size > MAX_EXACT_SIZE:
        raise SizeGuard(f"max_exact_size {max_exact_size} exceeds {MAX_EXACT_SIZE}")
    allowed = complement(g, K) if K is not None else np.arange(g.n)
    n_allowed = allowed.size
    best, best_set = math.inf, None
    for W, b, vol in connected_subsets(g, max_exact_size, allowed):
        if len(W) == g.n or vol <= 0:
            continue
        ratio = b / vol
        if ratio < best:
            best, best_set = ratio, sorted(W)
    exact = max_exact_size >= min(n_allowed, g.n - 1)

    sets, bds, vols, ms, rs, meth = [], [], [], [], [], []
    if best_set is not None:
        b, vol = _boundary_vol(g, np.asarray(best_set))
        sets.append(np.asarray(best_set, np.int64))
        bds.append(b)
        vols.append(vol)
        ms.append(float(np.sum(g.m[best_set])))
        rs.append(b / vol)
        meth.append("exact_bruteforce")
    fam = [vertex_set(g, F) for F in (family or [])]
    if include_cosingletons:
        fam += [np.setdiff1d(allowed, [x]) for x in allowed]
    fam_best = math.inf
    for F in fam:
        F = np.intersect1d(F, allowed)
        if F.size == 0 or F.size == g.n:
            continue
        b, vol = _boundary_vol(g, F)
        if vol <= 0:
            continue
        sets.append(F)
        bds.append(b)
        vols.append(vol)
        ms.append(float(np.sum(g.m[F])))
        rs.append(b / vol)
        meth.append("family_bound")
        fam_best = min(fam_best, b / vol)
    alpha = min(best, fam_best)
    notes = ["exact: all connected proper subsets enumerated" if exact else
             f"exact search limited to connected sets of size <= {max_exact_size}; "
             "alpha is an upper bound (the true infimum can only be smaller)"]
    return IsoperimetricProfile(sets, bds, vols, ms, rs, meth, best, fam_best, alpha,
                                bool(exact or fam_best >= best), notes)


def _min_eig_vanishing(A, m, tol):
    """Smallest eigenvalue of the form A over functions vanishing at some vertex."""
    n = A.shape[0]
    whole = float(spectral.form_eigs(A, m, 1)[0][0])
    if whole >= -tol or n == 1:
        return whole if n > 1 else max(whole, 0.0), "whole space"
    A = sp.csr_matrix(A)
    best = math.inf
    idx = np.arange(n)
    for x in range(n):
        keep = idx != x
        sub = A[keep][:, keep]
        best = min(best, float(spectral.form_eigs(sub, m[keep], 1)[0][0]))
    return best, "minimum over restrictions to X \\ {x}"


def sparse_form_check(g: WeightedGraph, a_t: float, k_t: float = 0.0, alpha=None,
                      rel_tol: float = 1e-9) -> VerificationReport:
    """(1 - a) deg_m - k <= h <= (1 + a) deg_m + k in form sense.

    Both bounds are tested on functions vanishing at some vertex. The
    co-area argument behind them needs level sets that are proper subsets;
    on a finite graph constants (lower bound) and, on bipartite graphs,
    alternating functions (upper bound) would otherwise violate them.
    """
    if not 0.0 < a_t < 1.0:
        raise ValueError("a must lie in (0, 1)")
    L = g.form_matrix()
    M = g.m
    lower = (L - sp.diags(((1.0 - a_t) * g.deg_m - k_t) * M)).tocsr()
    upper = (sp.diags(((1.0 + a_t) * g.deg_m + k_t) * M) - L).tocsr()
    tol = rel_tol * max(1.0, float(g.deg_m.max()) if g.n else 1.0)
    lo, how = _min_eig_vanishing(lower, M, tol)
    up, how_up = _min_eig_vanishing(upper, M, tol)
    worst = min(lo, up)
    rep = VerificationReport.inequality(
        "sparse_form", 0.0, worst, rel_tol,
        notes=[f"lower bound min eigenvalue ({how}): {lo:.12g}",
               f"upper bound min eigenvalue ({how_up}): {up:.12g}", f"a = {a_t:.12g}, k = {k_t:.12g}"],
        lower=lo, upper=up)
    rep.passed = bool(lo >= -tol and up >= -tol)
    if alpha is not None:
        a_c = math.sqrt(max(0.0, 1.0 - float(alpha) ** 2))
        if 0.0 < a_c < 1.0:
            c = sparse_form_check(g, a_c, 0.0, None, rel_tol)
            rep.details.update(cheeger_a=a_c, cheeger_pass=c.passed)
            rep.notes.append(f"Cheeger candidate (a, k) = ({a_c:.12g}, 0): {'pass' if c.passed else 'fail'}")
    return rep


def write_ratio_csv(profile, path) -> None:
    """CSV rows level,set_size,boundary,volume,ratio for an IsoperimetricProfile
    (volume = vol W) or a FolnerReport (volume = m(F_n), set sizes unknown: empty)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["level", "set_size", "boundary", "volume", "ratio"])
        if isinstance(profile, IsoperimetricProfile):
            rows = zip(profile.sets, profile.boundary, profile.volume, profile.ratios)
            for j, (W, b, vol, r) in enumerate(rows):
                wr.writerow([j, len(W), repr(float(b)), repr(float(vol)), repr(float(r))])
        else:
            for j, (b, mF, r) in enumerate(zip(profile.boundary, profile.measure, profile.ratios)):
                wr.writerow([j, "", repr(float(b)), repr(float(mF)), repr(float(r))])
