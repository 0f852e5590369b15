import math

import numpy as np
import pytest

from agmonlab import agmon, hardy, spectral
from agmonlab.errors import (ConfigError, EikonalFailed, HypothesisFailed, InsufficientExhaustion,
                             NonPositiveGap, SupportViolation)
from agmonlab.graph_core import ball, combinatorial_distance, dirichlet_restriction, gen_family, gen_lattice_box
from agmonlab.metrics import agmon_metric, scaled_combinatorial_metric


def test_exp_lemma():
    g = gen_lattice_box(1, 20)
    assert agmon.exp_lemma_check(np.zeros(g.n), g).lhs == 0.0
    theta = 0.5 * np.abs(g.coords[:, 0])
    rep = agmon.exp_lemma_check(theta, g)
    assert rep.passed and rep.details["scalar_violations"] == 0 and rep.details["r"] == 0.5


def test_rate_examples():
    r = agmon.rate_from_gap(1.0, "closed_form")
    assert r == pytest.approx(2 / math.e, rel=1e-15)
    assert agmon.rate_constant(r) == pytest.approx(0.1044, abs=1e-4)
    assert agmon.rate_constant(math.pi / 2) == pytest.approx(0.896, abs=1e-3)
    with pytest.raises(NonPositiveGap):
        agmon.rate_from_gap(0.0)


def test_rate_small_gap():
    # r^2 (1 + e^r)/16 = r^2/8 (1 + r/2 + ...), so r ~ sqrt(8 * 0.99 a) (1 - r/4)
    for a in (1e-4, 1e-6, 1e-8):
        r = agmon.rate_from_gap(a)
        r0 = math.sqrt(8 * 0.99 * a)
        assert r == pytest.approx(r0 * (1 - r0 / 4), rel=1e-3)


def test_rate_bisect_property():
    rng = np.random.default_rng(0)
    for a in rng.uniform(0, 10, 1000):
        a = max(a, 1e-12)
        r = agmon.rate_from_gap(a)
        assert agmon.rate_constant(r) <= 0.99 * a
        assert agmon.rate_constant(r * (1 + 1e-8) + 1e-9) > 0.99 * a * (1 - 1e-6)


def test_closed_form_chain():
    for a in np.linspace(0.05, 1.0, 20):
        r = agmon.rate_from_gap(a, "closed_form")
        assert agmon.rate_constant(r) <= a * a / 2 < a


def test_eikonal_constant_g():
    g = gen_lattice_box(1, 5)
    assert agmon.eikonal_check(g, np.full(g.n, 3.0), np.zeros(g.n), 0.1).passed


def test_eikonal_metric_chain(z_well):
    d = scaled_combinatorial_metric(z_well).edge_lengths
    w = np.full(z_well.n, 0.5)
    rho = agmon_metric(z_well, d, w).dist
    for r in (0.3, 1.0, 1.6):
        rep = agmon.eikonal_check(z_well, np.exp(r * rho), w, agmon.rate_constant(r))
        assert rep.passed and rep.details["ratio"] <= agmon.rate_constant(r)


def half_line(N=100):
    p = gen_family("path", n=N + 2)
    return dirichlet_restriction(p, np.arange(1, N + 1)).with_origin(0), np.arange(1, N + 1.0)


def test_eikonal_supersolution_chain():
    g, v = half_line()
    hw = hardy.supersolution_hardy(g, v, 0.5)
    _, gamma, _ = hardy.oscillation_and_gamma(g, v, 0.5)
    assert agmon.eikonal_check(g, v ** 0.5, hw.w, gamma).passed


def test_eikonal_zero_weight_violation():
    g = gen_family("path", n=3)
    rep = agmon.eikonal_check(g, [1.0, 2.0, 1.0], [0.0, 0.0, 0.0], 0.5)
    assert not rep.passed and rep.details["zero_violations"] == 3


def test_rellich_trivial():
    g, v = half_line(20)
    hw = hardy.supersolution_hardy(g, v, 0.5)
    rep = agmon.rellich_check(g, hw.w, v ** 0.5, 0.3, np.zeros(g.n), np.zeros(g.n))
    assert rep.passed and rep.lhs == 0 and rep.rhs == 0


def test_rellich_half_line_point_source():
    g, v = half_line()
    hw = hardy.supersolution_hardy(g, v, 0.5)
    _, gamma, _ = hardy.oscillation_and_gamma(g, v, 0.5)
    f = np.zeros(g.n)
    f[0] = 2.0
    u = spectral.solve_H_eq(g, f)
    rep = agmon.rellich_check(g, hw.w, v ** 0.5, gamma, u, f)
    assert rep.passed and rep.margin > 0


def test_rellich_errors():
    g, v = half_line(20)
    hw = hardy.supersolution_hardy(g, v, 0.5)
    w = hw.w.copy()
    w[3] = 0.0
    f = np.zeros(g.n)
    f[3] = 1.0
    with pytest.raises(SupportViolation):
        agmon.rellich_check(g, w, v ** 0.5, 0.3, np.zeros(g.n), f)
    with pytest.raises(EikonalFailed):
        agmon.rellich_check(g, hw.w, v ** 2, 0.3, np.zeros(g.n), np.zeros(g.n))
    f = np.zeros(g.n)
    f[0] = 1.0
    with pytest.raises(HypothesisFailed) as exc:
        agmon.rellich_check(g, hw.w, v ** 0.5, 0.3, np.ones(g.n), f)
    assert exc.value.check == "equation"


def test_wn_prime():
    g = gen_lattice_box(1, 20)
    w = np.full(g.n, 0.5)
    assert np.array_equal(agmon.wn_prime_regularization(g, w, np.exp(g.coords[:, 0] * 0.1), 0.2, []), w)
    wp = agmon.wn_prime_regularization(g, w, np.ones(g.n), 0.2, [3, 4])
    assert wp[3] == 0 and wp[4] == 0 and wp[5] == 0.5


def test_wn_prime_well(z_well):
    d = scaled_combinatorial_metric(z_well).edge_lengths
    w = np.full(z_well.n, 0.5)
    r = 1.0
    gfun = np.exp(r * agmon_metric(z_well, d, w).dist)
    gamma = agmon.rate_constant(r)
    K = ball(z_well, 2)
    wp = agmon.wn_prime_regularization(z_well, w, gfun, gamma, K)
    assert np.all(np.isfinite(wp[K])) and wp[K].max() <= w.max() + 1e-12
    assert agmon.eikonal_check(z_well, gfun, wp, gamma).passed


def test_certificate_below_ess(z_well):
    res = spectral.eigensolve_lowest(z_well, 1)
    u = res.ground_state
    cert = agmon.decay_certificate(z_well, u, "below_ess", lam=res.eigenvalues[0], a=0.5)
    assert cert.passed
    assert cert.inputs["r"] == pytest.approx(2 * 0.5 * math.exp(-0.5))
    norms = np.array(cert.weighted_norms)
    assert np.all(np.diff(norms) >= -1e-12 * norms.max())
    assert agmon.rate_constant(cert.inputs["r"]) < 0.5


def test_certificate_zero_u(z_well):
    cert = agmon.decay_certificate(z_well, np.zeros(z_well.n), "below_ess", lam=-0.5, a=0.5)
    assert cert.passed and all(x == 0 for x in cert.weighted_norms)


def test_certificate_two_sided_constant(z_well):
    res = spectral.eigensolve_lowest(z_well, 1)
    lam = res.eigenvalues[0] - 0.5
    v = spectral.solve_H_eq(z_well, np.ones(z_well.n), lam)
    cert = agmon.decay_certificate(z_well, res.ground_state, "two_sided", lam=lam, w=1 / v, alpha=0.5)
    assert cert.inputs["C"] == pytest.approx((1 - 0.25 * math.exp(0.5) / 8) ** -2)
    assert cert.inputs["C"] == pytest.approx(1.1116, abs=1e-4)
    assert cert.passed


def test_certificate_config_errors(z_well):
    u = np.zeros(z_well.n)
    with pytest.raises(ConfigError):
        agmon.decay_certificate(z_well, u, "bogus")
    with pytest.raises(ConfigError):
        agmon.decay_certificate(z_well, u, "metric", lam=0.0)
    dist = combinatorial_distance(z_well, [z_well.origin])
    with pytest.raises(InsufficientExhaustion):
        agmon.decay_certificate(z_well, u, "below_ess", lam=-0.5, a=0.5,
                                exhaustion=[ball(z_well, 5, dist), ball(z_well, 10, dist)])


def test_certificate_hypothesis_failure(z_well):
    res = spectral.eigensolve_lowest(z_well, 1)
    # a gap of 5 is far beyond the true gap 1/2: positivity off any ball fails
    with pytest.raises(HypothesisFailed):
        agmon.decay_certificate(z_well, res.ground_state, "metric", lam=res.eigenvalues[0],
                                w=np.full(z_well.n, 5.0), r=0.5)


def test_certificate_serializes(z_well):
    import json
    res = spectral.eigensolve_lowest(z_well, 1)
    cert = agmon.decay_certificate(z_well, res.ground_state, "below_ess", lam=res.eigenvalues[0], a=0.5)
    doc = json.loads(json.dumps(cert.to_dict(), allow_nan=False))
    assert doc["mode"] == "below_ess" and doc["pass"] is True
