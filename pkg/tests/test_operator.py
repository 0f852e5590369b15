import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from agmonlab.errors import EmptySet, GraphMismatch, NonPositiveWeight, PositivityHypothesisFailed
from agmonlab.graph_core import build_graph, gen_family, gen_lattice_box, neighborhood, well
from agmonlab.operator import (apply_H, boundary_b, boundary_correction, caccioppoli_check, form_h,
                               greens_check, grad_sq, gst_check, q_in_V_check)
from agmonlab import spectral

from conftest import graph_and_rng


def dense_H(g):
    """Reference operator matrix built vertex by vertex from the definition."""
    H = np.zeros((g.n, g.n))
    for x in range(g.n):
        ys, bs = g.neighbors(x)
        H[x, x] = bs.sum() / g.m[x] + g.q[x]
        H[x, ys] -= bs / g.m[x]
    return H


def test_constants_harmonic(C4):
    np.testing.assert_array_equal(apply_H(C4, np.full(4, 3.0)), 0.0)


def test_apply_H_P2(P2):
    np.testing.assert_array_equal(apply_H(P2, [1.0, 0.0]), [1.0, -1.0])


def test_apply_H_well_eigenfunction():
    g = gen_lattice_box(1, 30, q=well(-1.5))
    f = 2.0 ** -np.abs(g.coords[:, 0].astype(float))
    Hf = apply_H(g, f)
    inner = np.abs(g.coords[:, 0]) < 30
    np.testing.assert_allclose(Hf[inner], -0.5 * f[inner], rtol=1e-13, atol=0)


def test_apply_H_length_mismatch(P2):
    with pytest.raises(GraphMismatch):
        apply_H(P2, [1.0, 2.0, 3.0])


@given(graph_and_rng())
@settings(max_examples=40, deadline=None)
def test_apply_H_matches_dense(gr):
    g, rng = gr
    f = rng.normal(size=g.n)
    np.testing.assert_allclose(apply_H(g, f), dense_H(g) @ f, rtol=1e-12, atol=1e-12)


def test_form_values(P2, C4):
    fv = form_h(P2, [1.0, 0.0])
    assert fv.value == 1.0 and fv.kinetic == 1.0 and fv.potential == 0.0
    assert form_h(P2, [0.0, 0.0]).value == 0.0
    assert form_h(C4, np.full(4, 2.5)).value == 0.0


@given(graph_and_rng())
@settings(max_examples=40, deadline=None)
def test_form_symmetric_and_selfadjoint(gr):
    g, rng = gr
    u, phi = rng.normal(size=(2, g.n))
    a, b = form_h(g, u, phi).value, form_h(g, phi, u).value
    assert abs(a - b) <= 1e-12 * max(1, abs(a))
    lhs = np.sum(apply_H(g, u) * phi * g.m)
    rhs = np.sum(u * apply_H(g, phi) * g.m)
    assert abs(lhs - rhs) <= 1e-12 * max(1, abs(lhs), abs(rhs))
    fv = form_h(g, u)
    assert abs(fv.value - fv.kinetic - fv.potential) <= 1e-12 * max(1, abs(fv.value))


def test_grad_sq(P2):
    np.testing.assert_array_equal(grad_sq(P2, [1.0, 0.0]), [0.5, 0.5])
    np.testing.assert_array_equal(grad_sq(P2, [4.0, 4.0]), [0.0, 0.0])
    f = np.array([1.0, -2.0])
    np.testing.assert_array_equal(grad_sq(P2, f, np.ones(2)), grad_sq(P2, f))
    with pytest.raises(NonPositiveWeight):
        grad_sq(P2, f, [1.0, 0.0])


def test_greens_P2(P2):
    rep = greens_check(P2, [1.0, 0.0], [1.0, 0.0])
    assert rep.passed and rep.lhs == 1.0 and rep.rhs == 1.0
    rep = greens_check(P2, [0.0, 0.0], [1.0, 0.0])
    assert rep.passed and rep.lhs == 0.0


@given(graph_and_rng())
@settings(max_examples=100, deadline=None)
def test_greens_random(gr):
    g, rng = gr
    assert greens_check(g, rng.normal(size=g.n), rng.normal(size=g.n)).passed


@given(graph_and_rng())
@settings(max_examples=100, deadline=None)
def test_gst_random(gr):
    g, rng = gr
    v = rng.uniform(0.1, 3.0, g.n)
    rep = gst_check(g, v, rng.normal(size=g.n))
    assert rep.passed


def test_gst_constant_phi_and_trivial_v(C4):
    rng = np.random.default_rng(1)
    g = C4.with_q(rng.uniform(-1, 1, 4))
    v = rng.uniform(0.5, 2, 4)
    rep = gst_check(g, v, np.ones(4))
    assert rep.passed and rep.details["gradient_term"] == 0.0
    phi = rng.normal(size=4)
    rep = gst_check(C4, np.ones(4), phi)
    assert rep.passed and abs(rep.lhs - form_h(C4, phi).value) < 1e-14


def test_gst_supersolution_inequality():
    g = gen_lattice_box(1, 10, q=well(-1.5))
    lam = spectral.lambda0(g) - 0.3
    v = spectral.solve_H_eq(g, np.ones(g.n), lam)
    rep = gst_check(g, v, np.random.default_rng(0).normal(size=g.n), lam=lam)
    assert rep.passed and rep.details["supersolution"] and rep.details["ineq_pass"]


@given(graph_and_rng())
@settings(max_examples=100, deadline=None)
def test_caccioppoli_random(gr):
    g, rng = gr
    u = rng.normal(size=g.n) * (rng.random(g.n) < 0.8)
    assert caccioppoli_check(g, u, rng.normal(size=g.n)).passed


def test_caccioppoli_trivial_cases(C4):
    assert caccioppoli_check(C4, np.zeros(4), np.ones(4)).lhs == 0.0
    u = np.array([1.0, -2.0, 0.5, 3.0])
    rep = caccioppoli_check(C4, u, np.ones(4))
    assert abs(rep.margin) <= 1e-12 * max(1, abs(rep.lhs))


def test_q_in_V():
    assert q_in_V_check(gen_family("path", n=4, q=0.5), 0.5, 0.0).passed
    g = gen_lattice_box(1, 30, q=well(-1.5))
    assert q_in_V_check(g, 0.5, 2.0).passed
    h = gen_family("path", n=5, q=-1e6)
    assert not q_in_V_check(h, 0.5, 0.0).passed


def test_boundary_correction_P3(P3):
    bc = boundary_correction(P3, [1])
    chi, lamK, bK = bc
    assert bK.tolist() == [1.0, 2.0, 1.0]
    assert lamK == 2.0
    assert chi.tolist() == [2.0, 2.0, 2.0]
    assert bc.min_eigenvalue > 0 and bc.hypothesis_ok


def test_boundary_correction_whole_graph(C4):
    chi, lamK, bK = boundary_correction(C4, [0, 1, 2, 3])
    assert np.all(bK == 0)
    np.testing.assert_allclose(chi, -lamK)


def test_boundary_correction_support_z2():
    g = gen_lattice_box(2, 3)
    chi, _, _ = boundary_correction(g, [g.origin])
    assert np.flatnonzero(chi).tolist() == neighborhood(g, [g.origin]).tolist()


def test_boundary_correction_errors(P3):
    with pytest.raises(EmptySet):
        boundary_correction(P3, [])
    neg = P3.with_q([-5.0, 0.0, -5.0])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        bc = boundary_correction(neg, [1])
    assert not bc.hypothesis_ok
    assert any(issubclass(w.category, PositivityHypothesisFailed) for w in rec)


def test_boundary_b_formula():
    g = build_graph([(0, 1, 2.0), (1, 2, 3.0)], [1.0, 2.0, 0.5])
    np.testing.assert_allclose(boundary_b(g, [1]), [2.0, 2.5, 6.0])
