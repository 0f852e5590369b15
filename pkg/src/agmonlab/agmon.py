"""Executable decay certificates: eikonal checks, rates, Rellich inequality and
the Agmon estimates built on them.

A certificate runs the locally finite argument on the truncation itself:
the exceptional set K is enlarged by supp f, the weight is regularized on K,
the boundary correction chi restores positivity, and the Rellich inequality
is evaluated for the corrected operator. Weighted norms along an exhaustion
record how close the truncation is to the infinite-graph statement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadParams, ConfigError, EikonalFailed, HypothesisFailed,
                     InsufficientExhaustion, NonPositiveGap, SupportViolation)
from .graph_core import (WeightedGraph, as_function, ball, combinatorial_distance, indicator,
                         neighborhood, vertex_set)
from .hardy import oscillation_and_gamma
from .metrics import _lengths, agmon_metric, dist_to_set, intrinsic_audit, scaled_combinatorial_metric
from .operator import apply_H, boundary_correction, form_h, grad_sq
from .report import VerificationReport, scale_of
from . import spectral

MODES = ("metric", "below_ess", "sparse", "cheeger", "supersolution", "two_sided")


def rate_constant(r: float) -> float:
    """r^2 (1 + e^r) / 16."""
    return r * r * (1.0 + math.exp(r)) / 16.0


def exp_lemma_check(theta, g: WeightedGraph, n_pairs: int = 10_000, seed: int = 0,
                    rel_tol: float = 1e-12) -> VerificationReport:
    """|grad e^{theta/2}|^2 <= e^theta (1 + e^r)/8 |grad theta|^2, r the largest edge jump of theta.

    Also checks |e^a - e^b|^2 <= (e^{2a} + e^{2b})/2 (a - b)^2 on random pairs in [-5, 5]^2.
    """
    theta = as_function(g, theta, "theta")
    r = float(np.max(np.abs(theta[g.eu] - theta[g.ev]))) if g.num_edges else 0.0
    lhs_v = grad_sq(g, np.exp(theta / 2.0))
    rhs_v = np.exp(theta) * (1.0 + math.exp(r)) / 8.0 * grad_sq(g, theta)
    ex_v = lhs_v - rhs_v - rel_tol * np.maximum(1.0, np.maximum(lhs_v, rhs_v))

    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-5.0, 5.0, size=(2, n_pairs))
    lhs_s = (np.exp(a) - np.exp(b)) ** 2
    rhs_s = (np.exp(2 * a) + np.exp(2 * b)) / 2.0 * (a - b) ** 2
    ex_s = lhs_s - rhs_s - rel_tol * np.maximum(1.0, np.maximum(lhs_s, rhs_s))

    k = int(np.argmax(ex_v)) if g.n else 0
    lhs = float(lhs_v[k]) if g.n else 0.0
    rhs = float(rhs_v[k]) if g.n else 0.0
    rep = VerificationReport.inequality(
        "exp_lemma", lhs, rhs, rel_tol,
        notes=[f"r = {r:.12g}", f"vertex violations: {int(np.sum(ex_v > 0))}",
               f"scalar violations: {int(np.sum(ex_s > 0))} of {n_pairs}"],
        r=r, vertex_violations=int(np.sum(ex_v > 0)), scalar_violations=int(np.sum(ex_s > 0)))
    rep.passed = bool(np.all(ex_v <= 0) and np.all(ex_s <= 0))
    return rep


def rate_from_gap(a: float, mode: str = "bisect") -> float:
    """A rate r with r^2 (1 + e^r)/16 < a.

    closed_form: r = 2 a e^{-a} (for a <= 1; larger a falls back to bisect).
    bisect: the largest r with r^2 (1 + e^r)/16 <= 0.99 a, to 1e-10.
    """
    a = float(a)
    if not a > 0:
        raise NonPositiveGap(f"gap a must be positive, got {a}")
    if mode == "closed_form" and a <= 1.0:
        r = 2.0 * a * math.exp(-a)
    elif mode in ("bisect", "closed_form"):
        target = 0.99 * a
        lo, hi = 0.0, 1.0
        while rate_constant(hi) <= target:
            lo, hi = hi, 2.0 * hi
        while hi - lo > 1e-10 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if rate_constant(mid) <= target:
                lo = mid
            else:
                hi = mid
        r = lo
        if r == 0.0:
            r = math.sqrt(8.0 * target) * 0.5
    else:
        raise BadParams(f"unknown rate mode {mode!r}")
    if not rate_constant(r) < a:
        raise AssertionError(f"rate {r} does not satisfy r^2(1+e^r)/16 < {a}")
    return r


def eikonal_check(g: WeightedGraph, gfun, w, gamma: float, rel_tol: float = 1e-10) -> VerificationReport:
    """max over vertices of |grad gfun^{1/2}|^2 / (gfun w) against gamma.

    Where gfun * w vanishes the numerator must vanish too (to 1e-14).
    """
    gfun = as_function(g, gfun, "g")
    w = as_function(g, w, "w")
    if np.any(gfun < 0) or np.any(w < 0):
        raise BadParams("g and w must be nonnegative")
    num = grad_sq(g, np.sqrt(gfun))
    den = gfun * w
    pos = den > 0
    ratio = np.zeros(g.n)
    ratio[pos] = num[pos] / den[pos]
    worst = float(ratio.max()) if g.n else 0.0
    zero_bad = int(np.sum(num[~pos] > 1e-14 * scale_of(num.max() if g.n else 0.0)))
    rep = VerificationReport.inequality(
        "eikonal", worst, gamma, rel_tol,
        notes=[f"max |grad g^1/2|^2/(g w) = {worst:.12g}", f"gamma = {gamma:.12g}",
               f"vertices with g w = 0 and nonzero gradient: {zero_bad}"],
        ratio=worst, zero_violations=zero_bad)
    rep.passed = bool(worst <= gamma * (1.0 + rel_tol) and zero_bad == 0)
    return rep


def rellich_check(g: WeightedGraph, w, gfun, gamma: float, u, f, *, check_hardy: bool = True,
                  check_equation: bool = True, rel_tol: float = 1e-10) -> VerificationReport:
    """(1 - gamma)^2 sum u^2 g w m <= sum f^2 g w^{-1} m for H u = f."""
    w = as_function(g, w, "w")
    gfun = as_function(g, gfun, "g")
    u = as_function(g, u, "u")
    f = as_function(g, f, "f")
    if not 0.0 < gamma < 1.0:
        raise BadParams("gamma must lie in (0, 1)")
    if np.any((f != 0) & (w <= 0)):
        raise SupportViolation("f is nonzero where w vanishes")
    eik = eikonal_check(g, gfun, w, gamma)
    if not eik.passed:
        raise EikonalFailed(eik)
    if check_hardy:
        hardy = spectral.form_positivity(g, w)
        if not hardy.passed:
            raise HypothesisFailed("hardy", hardy)
    if check_equation:
        res = apply_H(g, u) - f
        size = np.sqrt(np.sum(f * f * g.m)) + np.sqrt(np.sum(apply_H(g, u) ** 2 * g.m))
        if np.sqrt(np.sum(res * res * g.m)) > 1e-8 * max(size, 1e-300):
            raise HypothesisFailed("equation", message="H u = f does not hold to solver tolerance")
    lhs = (1.0 - gamma) ** 2 * float(np.sum(u * u * gfun * w * g.m))
    nz = f != 0
    rhs = float(np.sum(f[nz] ** 2 * gfun[nz] / w[nz] * g.m[nz]))
    return VerificationReport.inequality(
        "rellich", lhs, rhs, rel_tol,
        notes=[f"gamma = {gamma:.12g}", f"eikonal ratio = {eik.details['ratio']:.12g}"],
        gamma=gamma, eikonal_ratio=eik.details["ratio"])


def wn_prime_regularization(g: WeightedGraph, w_N, g_N, gamma: float, K) -> np.ndarray:
    """w' = w_N off K and |grad g_N^{1/2}|^2 / (gamma g_N) on K (0 where g_N = 0)."""
    w_N = as_function(g, w_N, "w_N")
    g_N = as_function(g, g_N, "g_N")
    K = vertex_set(g, K) if K is not None else np.zeros(0, np.int64)
    out = w_N.copy()
    if K.size == 0:
        return out
    num = grad_sq(g, np.sqrt(g_N))[K]
    gk = g_N[K]
    out[K] = np.where(gk > 0, num / (gamma * np.where(gk > 0, gk, 1.0)), 0.0)
    return out


@dataclass
class DecayCertificate:
    mode: str
    inputs: dict
    radii: list
    weighted_norms: list
    stability: float
    passed: bool
    reports: list = field(default_factory=list)
    certified_bound: float = math.nan
    saturation_N: int = 0
    weight: np.ndarray | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "inputs": {k: _jsonable(v) for k, v in self.inputs.items()},
            "radii": [_jsonable(r) for r in self.radii],
            "weighted_norms": [_jsonable(x) for x in self.weighted_norms],
            "stability": _jsonable(self.stability),
            "certified_bound": _jsonable(self.certified_bound),
            "saturation_N": self.saturation_N,
            "pass": self.passed,
            "checks": [r.to_dict() for r in self.reports],
            "notes": list(self.notes),
        }


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(y) for y in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    return x


def _chop(f, scale):
    out = f.copy()
    out[np.abs(out) <= 1e-12 * scale] = 0.0
    return out


def default_exhaustion(g: WeightedGraph, root=None, levels: int = 4):
    """Combinatorial balls at radii R/4, R/2, 3R/4, R (R the eccentricity of the root)."""
    root = g.origin if root is None else root
    if root is None:
        raise BadParams("graph has no origin; pass a root or an exhaustion")
    dist = combinatorial_distance(g, [root])
    R = int(dist.max())
    radii = sorted({max(1, round(R * (j + 1) / levels)) for j in range(levels)})
    return radii, [ball(g, r, dist) for r in radii]


def smallest_exceptional_ball(gs: WeightedGraph, w, root=None):
    """Smallest combinatorial ball K (possibly empty) with h_s >= w on C_c(X \\ K).

    Positivity off K is monotone in K, so the radius is found by bisection.
    Returns (K, report) or (None, report of the largest ball) when none works.
    """
    root = gs.origin if root is None else root
    dist = combinatorial_distance(gs, [root])
    rep0 = spectral.form_positivity(gs, w)
    if rep0.passed:
        return np.zeros(0, np.int64), rep0
    R = int(dist.max())
    hi_rep = spectral.form_positivity(gs, w, ball(gs, R - 1, dist)) if R >= 1 else rep0
    if R < 1 or not hi_rep.passed:
        return None, hi_rep
    lo, hi = -1, R - 1
    best = hi_rep
    while hi - lo > 1:
        mid = (lo + hi) // 2
        rep = spectral.form_positivity(gs, w, ball(gs, mid, dist))
        if rep.passed:
            hi, best = mid, rep
        else:
            lo = mid
    return ball(gs, hi, dist), best


def agmon_chain(gs: WeightedGraph, u, f, w, gfun, gamma: float, K, notes=None):
    """Run the locally finite Agmon argument on a finite graph.

    ``gs`` carries the shifted potential q - lambda and ``f = (H - lambda) u``.
    Returns (rellich report, corrected weight w~, bound on sum u^2 g w~ m).
    """
    notes = [] if notes is None else notes
    K = vertex_set(gs, K) if K is not None else np.zeros(0, np.int64)
    suppf = np.flatnonzero(f != 0)
    Kp = np.union1d(K, suppf).astype(np.int64)
    if Kp.size == 0:
        rep = rellich_check(gs, w, gfun, gamma, u, f)
        return rep, w, rep.rhs / (1 - gamma) ** 2
    wp = wn_prime_regularization(gs, w, gfun, gamma, Kp)
    corr = boundary_correction(gs.with_q(gs.q - wp), Kp)
    if not corr.hypothesis_ok:
        raise HypothesisFailed("positivity_off_K", message="h - lambda - w' is not nonnegative off K")
    NK = indicator(gs, neighborhood(gs, Kp))
    chi_t = corr.chi + NK
    w_t = wp + NK
    f_t = f + chi_t * u
    corrected = gs.with_q(gs.q + chi_t)
    rep = rellich_check(corrected, w_t, gfun, gamma, u, f_t)
    notes.append(f"|K| = {K.size}, |K u supp f| = {Kp.size}, lambda_K = {corr.lambda_K:.12g}")
    return rep, w_t, rep.rhs / (1 - gamma) ** 2


def _norm_levels(g, u, weight, exhaustion):
    return [float(np.sum(u[B] ** 2 * weight[B] * g.m[B])) for B in exhaustion]


def decay_certificate(g: WeightedGraph, u, mode: str, *, lam=None, f=None, K=None, w=None,
                      d=None, r=None, a=None, alpha=0.5, hw=None, alpha_inf=None, eps=0.5,
                      exhaustion=None, radii=None, root=None, stability_threshold: float = 0.01,
                      rate_mode=None) -> DecayCertificate:
    """Decay certificate for a solution u of (H - lam) u = f on a finite graph.

    Modes and their weights:
      metric        e^{r rho} w        rho the Agmon metric of (d, w)
      below_ess     e^{r d}            w = a constant, r = 2 a e^{-a} by default
      sparse        e^{r |x|} deg_m    w = a deg_m
      cheeger       e^{r |x|} deg_m    a = 1 - sqrt(1 - alpha_inf^2), w = (1 - eps) a deg_m
      supersolution v^alpha w          w the Hardy weight of v (q = 0)
      two_sided     e^{alpha rho} w    constant C = (1 - alpha^2 e^alpha / 8)^{-2}, no K
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    u = as_function(g, u, "u")
    root = g.origin if root is None else root
    notes = []
    if exhaustion is None:
        radii, exhaustion = default_exhaustion(g, root)
    exhaustion = [vertex_set(g, B) for B in exhaustion]
    radii = list(range(1, len(exhaustion) + 1)) if radii is None else list(radii)
    if len(exhaustion) < 3:
        raise InsufficientExhaustion(f"need at least 3 exhaustion levels, got {len(exhaustion)}")

    if lam is None:
        mass = float(np.sum(u * u * g.m))
        lam = form_h(g, u).value / mass if mass > 0 else 0.0
        notes.append(f"lambda taken as the Rayleigh quotient of u: {lam:.12g}")
    lam = float(lam)
    gs = g.shifted(lam)
    if f is None:
        scale = float(np.max(np.abs(apply_H(g, u))) + abs(lam) * np.max(np.abs(u))) if g.n else 1.0
        f = _chop(apply_H(gs, u), scale)
    f = as_function(g, f, "f")
    inputs = {"lambda": lam, "mode": mode}
    reports = []
    hop = None

    def hops():
        nonlocal hop
        if hop is None:
            hop = combinatorial_distance(g, [root]).astype(float)
        return hop

    if mode in ("metric", "two_sided"):
        if w is None:
            raise ConfigError(f"mode {mode} needs a Hardy weight w")
        w = as_function(g, w, "w")
        if d is None:
            d = scaled_combinatorial_metric(g, root).edge_lengths
        d = _lengths(g, d)
        audit = intrinsic_audit(g, d)
        reports.append(audit)
        if not audit.passed:
            raise HypothesisFailed("intrinsic_metric", audit)
        rho = agmon_metric(g, d, w, root).dist
        if mode == "metric":
            if r is None:
                r = rate_from_gap(1.0, rate_mode or "bisect")
            gamma = rate_constant(r)
            gfun = np.exp(r * rho)
            weight = gfun * w
            inputs.update(r=r, gamma=gamma)
        else:
            alpha = float(alpha)
            gamma = alpha * alpha * math.exp(alpha) / 8.0
            if not gamma < 1:
                raise BadParams("alpha must satisfy alpha^2 e^alpha / 8 < 1")
            C = (1.0 - gamma) ** -2
            gfun = np.exp(alpha * rho)
            weight = gfun * w
            inputs.update(alpha=alpha, gamma=gamma, C=C)
    elif mode == "below_ess":
        if a is None:
            raise ConfigError("mode below_ess needs the gap a")
        a = float(a)
        if d is None:
            d = scaled_combinatorial_metric(g, root).edge_lengths
        d = _lengths(g, d)
        audit = intrinsic_audit(g, d)
        reports.append(audit)
        if not audit.passed or audit.details["jump_size"] > 1.0 + 1e-12:
            raise HypothesisFailed("intrinsic_metric", audit)
        if r is None:
            r = rate_from_gap(a, rate_mode or "closed_form")
        gamma = rate_constant(r) / a
        w = np.full(g.n, a)
        dist = dist_to_set(g, d, [root]).dist
        gfun = np.exp(r * dist)
        weight = gfun
        inputs.update(a=a, r=r, gamma=gamma)
    elif mode in ("sparse", "cheeger"):
        if mode == "cheeger":
            if np.any(g.q_intrinsic != 0):
                raise ConfigError("mode cheeger needs q = 0")
            if alpha_inf is None:
                raise ConfigError("mode cheeger needs an estimate alpha_inf")
            a = 1.0 - math.sqrt(1.0 - float(alpha_inf) ** 2)
            a_w = (1.0 - eps) * a
            inputs.update(alpha_inf=float(alpha_inf), eps=eps)
        else:
            if a is None:
                raise ConfigError("mode sparse needs a in (0, 1]")
            a = float(a)
            a_w = a
        if not 0 < a <= 1:
            raise HypothesisFailed("gap", message=f"a = {a} is not in (0, 1]")
        if r is None:
            r = rate_from_gap(a, rate_mode or "closed_form")
        gamma = rate_constant(r) / a_w
        w = a_w * g.deg_m
        gfun = np.exp(r * hops())
        weight = gfun * g.deg_m
        inputs.update(a=a, a_w=a_w, r=r, gamma=gamma)
    else:  # supersolution
        if hw is None:
            raise ConfigError("mode supersolution needs a HardyWeight")
        if hw.alpha != 0.5:
            raise BadParams("the certificate uses the weight w_{1/2}")
        if lam != 0.0:
            raise BadParams("mode supersolution is for H u = f (lambda = 0)")
        eps0, gamma, power = oscillation_and_gamma(g, hw.v, alpha)
        reports.append(power)
        w = hw.w
        gfun = hw.v ** alpha
        weight = gfun * w
        inputs.update(alpha=alpha, gamma=gamma, eps0=eps0)

    if not gamma < 1:
        raise HypothesisFailed("gamma", message=f"gamma = {gamma} is not below 1")
    eik = eikonal_check(g, gfun, w, gamma)
    reports.append(eik)
    if not eik.passed:
        raise EikonalFailed(eik)
    saturation = int(math.ceil(math.log(float(gfun.max())))) if gfun.max() > 1 else 0

    if mode == "two_sided":
        hardy = spectral.form_positivity(gs, w)
        reports.append(hardy)
        if not hardy.passed:
            raise HypothesisFailed("hardy", hardy)
        if np.any((f != 0) & (w <= 0)):
            raise SupportViolation("f is nonzero where w vanishes")
        lhs = float(np.sum(u * u * gfun * w * g.m))
        nz = f != 0
        rhs = inputs["C"] * float(np.sum(f[nz] ** 2 * gfun[nz] / w[nz] * g.m[nz]))
        main = VerificationReport.inequality("two_sided", lhs, rhs, 1e-10,
                                             notes=[f"C = {inputs['C']:.12g}", "weight e^{alpha rho}"])
        g2 = np.exp(2 * alpha * rho)
        lhs2 = float(np.sum(u * u * g2 * w * g.m))
        rhs2 = inputs["C"] * float(np.sum(f[nz] ** 2 * g2[nz] / w[nz] * g.m[nz]))
        main.details.update(displayed_lhs=lhs2, displayed_rhs=rhs2)
        main.notes.append(f"with weight e^(2 alpha rho): lhs = {lhs2:.12g}, rhs = {rhs2:.12g}, "
                          f"holds: {lhs2 <= rhs2 * (1 + 1e-10)}")
        bound = rhs
    else:
        hyp_K = K
        if mode != "supersolution":
            if K is None:
                hyp_K, hyp = smallest_exceptional_ball(gs, w, root)
                if hyp_K is None:
                    raise HypothesisFailed("hardy_off_K", hyp)
            else:
                hyp = spectral.form_positivity(gs, w, K)
                if not hyp.passed:
                    raise HypothesisFailed("hardy_off_K", hyp)
            hyp.check = "hardy_off_K"
            reports.append(hyp)
            inputs["K_size"] = int(np.asarray(hyp_K).size)
        main, _, bound = agmon_chain(gs, u, f, w, gfun, gamma, hyp_K, notes)
    reports.append(main)

    norms = _norm_levels(g, u, weight, exhaustion)
    last, prev = norms[-1], norms[-2]
    stability = abs(last - prev) / abs(last) if last != 0 else (0.0 if prev == 0 else math.inf)
    passed = bool(main.passed and stability <= stability_threshold)
    if stability > stability_threshold:
        notes.append(f"weighted norms not stable: {stability:.3e} > {stability_threshold:.3e}")
    notes.append("membership in the weighted l2 space is read off a finite truncation")
    return DecayCertificate(mode, inputs, radii, norms, stability, passed, reports,
                            bound, saturation, weight, notes)

