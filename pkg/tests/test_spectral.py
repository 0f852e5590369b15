import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings

from agmonlab import spectral
from agmonlab.errors import EmptyComplement, NearSingular
from agmonlab.graph_core import (ball, combinatorial_distance, dirichlet_restriction, gen_family,
                                 gen_lattice_box, well)
from agmonlab.operator import apply_H, form_h

from conftest import graph_and_rng, random_graph


def test_P3_and_C4(P3, C4):
    np.testing.assert_allclose(spectral.eigensolve_lowest(P3, 3).eigenvalues, [0, 1, 3], atol=1e-12)
    np.testing.assert_allclose(spectral.eigensolve_lowest(C4, 4).eigenvalues, [0, 2, 2, 4], atol=1e-12)


def test_connected_q0_constant_ground_state():
    g = gen_family("tree", branching=3, depth=3)
    res = spectral.eigensolve_lowest(g, 1)
    assert abs(res.eigenvalues[0]) < 1e-12
    u = res.ground_state
    np.testing.assert_allclose(u, u[0], rtol=1e-10)


@given(graph_and_rng(max_n=40))
@settings(max_examples=30, deadline=None)
def test_eigenpairs_against_generalized_eigh(gr):
    g, rng = gr
    k = min(3, g.n)
    res = spectral.eigensolve_lowest(g, k)
    ref = la.eigh(g.form_matrix().toarray(), np.diag(g.m), eigvals_only=True)[:k]
    np.testing.assert_allclose(res.eigenvalues, ref, atol=1e-9)
    V = res.eigenvectors
    np.testing.assert_allclose(V.T @ (g.m[:, None] * V), np.eye(k), atol=1e-8)
    assert np.all(res.residuals <= 1e-8 * (1 + np.abs(res.eigenvalues)))
    u0 = V[:, 0]
    assert abs(form_h(g, u0).value / np.sum(u0 * u0 * g.m) - res.eigenvalues[0]) < 1e-8
    # ground state of a connected graph is strictly positive after the sign fix
    assert np.all(u0 > 0)


def test_dense_and_iterative_agree():
    g = gen_lattice_box(2, 10, q=well(-1.5))
    d = spectral.eigensolve_lowest(g, 3, method="dense")
    i = spectral.eigensolve_lowest(g, 3, method="iterative")
    np.testing.assert_allclose(d.eigenvalues, i.eigenvalues, atol=1e-8)
    assert i.method == "iterative"


def test_z_well_closed_form(z_well):
    res = spectral.eigensolve_lowest(z_well, 1)
    assert abs(res.eigenvalues[0] + 0.5) < 1e-6
    u = res.ground_state
    n = np.abs(z_well.coords[:, 0])
    sel = n <= 20
    np.testing.assert_allclose(u[sel] / u[z_well.origin], 2.0 ** -n[sel], rtol=1e-6)


def test_dirichlet_monotonicity():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = random_graph(rng, 30)
        U = np.flatnonzero(rng.random(g.n) < 0.8)
        V = U[rng.random(U.size) < 0.7]
        if V.size == 0:
            continue
        a = spectral.lambda0(dirichlet_restriction(g, U))
        b = spectral.lambda0(dirichlet_restriction(g, V))
        assert b >= a - 1e-10


def test_ess_estimate_z_well():
    g = gen_lattice_box(1, 60, q=well(-1.5))
    dist = combinatorial_distance(g, [g.origin])
    est = spectral.lambda0_ess_estimate(g, [ball(g, j, dist) for j in range(5, 31, 5)])
    seq = np.array(est.sequence)
    assert np.all(np.diff(seq) >= -1e-12) and np.all(seq > 0) and seq[-1] < 0.05
    assert abs(est.gap - (est.estimate + 0.5)) < 1e-6


def test_ess_estimate_constant_potential():
    g = gen_family("cycle", n=20, q=0.7)
    est = spectral.lambda0_ess_estimate(g, [[0], [0, 1], [0, 1, 2]])
    assert min(est.sequence) >= 0.7 - 1e-12


def test_ess_estimate_exhausted(P3):
    est = spectral.lambda0_ess_estimate(P3, [[0], [0, 1], [0, 1, 2]])
    # X \ {0, 1} = {2}: isolated vertex with absorbed potential 1
    assert est.levels_used == 2 and est.estimate == pytest.approx(1.0)
    assert est.sequence[0] == pytest.approx((3 - 5 ** 0.5) / 2)
    with pytest.raises(EmptyComplement):
        spectral.lambda0_ess_estimate(P3, [[0, 1, 2]])


def test_solve_recovers():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 40, q_range=(0.0, 1.0))
    v = rng.normal(size=g.n)
    f = apply_H(g, v) + v
    np.testing.assert_allclose(spectral.solve_H_eq(g, f, -1.0), v, atol=1e-8)
    assert np.all(spectral.solve_H_eq(g, np.zeros(g.n), -1.0) == 0.0)


def test_solve_near_singular(P3):
    with pytest.raises(NearSingular):
        spectral.solve_H_eq(P3, [1.0, 0.0, 0.0], 1.0)


def test_green_z3_positive():
    g = gen_lattice_box(3, 8)
    inner = np.flatnonzero(np.abs(g.coords).max(axis=1) < 8)
    sub = dirichlet_restriction(g, inner)
    f = np.zeros(sub.n)
    f[sub.origin] = 1.0
    v = spectral.solve_H_eq(sub, f, 0.0, method="iterative")
    assert np.all(v > 0)
    r = np.linalg.norm(sub.coords, axis=1)
    assert v[sub.origin] == v.max() and v[np.argmax(r)] < v[sub.origin] / 10


def test_form_positivity(P3):
    assert spectral.form_positivity(P3, np.zeros(3)).passed
    lam0 = spectral.lambda0(P3)
    assert not spectral.form_positivity(P3, np.full(3, lam0 + 1)).passed
    N = 50
    p = gen_family("path", n=N + 2)
    sub = dirichlet_restriction(p, np.arange(1, N + 1))
    n = np.arange(1, N + 1.0)
    w = 2 - np.sqrt(1 - 1 / n) - np.sqrt(1 + 1 / n)
    rep = spectral.form_positivity(sub, w)
    assert rep.passed and rep.rhs < 1e-2
