"""Path pseudo-metrics on weighted graphs: intrinsic audit, scaled hop metric,
Agmon metrics and distances to sets.

Edge lengths are arrays aligned with the canonical edge list (g.eu, g.ev).
Shortest paths use a binary-heap label-setting search; ties are resolved
towards the smaller vertex index so that predecessors are reproducible.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySet, NegativeLength, NegativeWeight, NoOrigin, SolverFailure
from .graph_core import WeightedGraph, as_function, combinatorial_distance, vertex_set
from .report import VerificationReport


@dataclass
class MetricField:
    """Distances from a root set along per-edge lengths."""

    graph: WeightedGraph
    roots: np.ndarray
    dist: np.ndarray
    edge_lengths: np.ndarray
    pred: np.ndarray
    notes: list = field(default_factory=list)

    @property
    def jump_size(self) -> float:
        return float(self.edge_lengths.max()) if self.edge_lengths.size else 0.0

    @property
    def unreachable(self) -> int:
        return int(np.sum(~np.isfinite(self.dist)))


def _lengths(g, d):
    if isinstance(d, MetricField):
        d = d.edge_lengths
    d = np.broadcast_to(np.asarray(d, dtype=float), (g.num_edges,))
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise NegativeLength("edge lengths must be finite and nonnegative")
    return np.array(d)


def _edge_csr(g, lengths):
    """Per-edge lengths laid out like g.indices (both directions)."""
    rows = np.concatenate([g.eu, g.ev])
    cols = np.concatenate([g.ev, g.eu])
    vals = np.concatenate([lengths, lengths])
    order = np.lexsort((cols, rows))
    return vals[order]


def shortest_paths(g: WeightedGraph, lengths, sources) -> tuple[np.ndarray, np.ndarray]:
    """Multi-source shortest paths; returns (dist, pred) with inf / -1 if unreachable."""
    sources = vertex_set(g, sources)
    if sources.size == 0:
        raise EmptySet("source set is empty")
    elen = _edge_csr(g, lengths)
    indptr, indices = g.indptr, g.indices
    dist = np.full(g.n, np.inf)
    pred = np.full(g.n, -1, dtype=np.int64)
    done = np.zeros(g.n, dtype=bool)
    heap = [(0.0, int(s)) for s in sources]
    dist[sources] = 0.0
    heapq.heapify(heap)
    while heap:
        dx, x = heapq.heappop(heap)
        if done[x] or dx > dist[x]:
            continue
        done[x] = True
        for k in range(indptr[x], indptr[x + 1]):
            y = int(indices[k])
            if done[y]:
                continue
            nd = dx + elen[k]
            if nd < dist[y] or (nd == dist[y] and pred[y] > x):
                if nd < dist[y]:
                    dist[y] = nd
                    heapq.heappush(heap, (nd, y))
                pred[y] = x
    _assert_relaxed(g, dist, lengths)
    return dist, pred


def _assert_relaxed(g, dist, lengths):
    du, dv = dist[g.eu], dist[g.ev]
    fin = np.isfinite(du) & np.isfinite(dv)
    if np.any(np.isfinite(du) != np.isfinite(dv)):
        raise SolverFailure("an edge joins a reachable and an unreachable vertex")
    slack = np.abs(du[fin] - dv[fin]) - lengths[fin]
    tol = 1e-12 * np.maximum(1.0, np.maximum(np.abs(du[fin]), np.abs(dv[fin])))
    if np.any(slack > tol):
        raise SolverFailure("shortest-path relaxation optimality violated")


def intrinsic_audit(g: WeightedGraph, d) -> VerificationReport:
    """Check sum_y b(x,y) d(x,y)^2 <= m(x) at every vertex.

    For a path metric the stored edge length bounds d(x, y) from above, so
    the audit on edge lengths is conservative.
    """
    lengths = _lengths(g, d)
    acc = np.zeros(g.n)
    contrib = g.eb * lengths ** 2
    np.add.at(acc, g.eu, contrib)
    np.add.at(acc, g.ev, contrib)
    ratio = acc / g.m
    worst = float(ratio.max()) if g.n else 0.0
    jump = float(lengths.max()) if lengths.size else 0.0
    return VerificationReport.inequality(
        "intrinsic_metric", worst, 1.0, 1e-12,
        notes=[f"max_x sum_y b d^2 / m = {worst:.12g}", f"jump size = {jump:.12g}"],
        ratio=worst, jump_size=jump, worst_vertex=int(np.argmax(ratio)) if g.n else -1)


def scaled_combinatorial_metric(g: WeightedGraph, root=None) -> MetricField:
    """Hop distance divided by sqrt(D), D the maximal weighted degree."""
    if root is None:
        if g.origin is None:
            raise NoOrigin("graph has no origin; pass a root")
        root = g.origin
    roots = vertex_set(g, [root] if np.isscalar(root) else root)
    D = float(g.Deg.max()) if g.n else 1.0
    hops = combinatorial_distance(g, roots).astype(float)
    hops[hops < 0] = np.inf
    s = 1.0 / np.sqrt(D) if D > 0 else 1.0
    lengths = np.full(g.num_edges, s)
    dist = hops * s
    pred = _hop_pred(g, hops)
    return MetricField(g, roots, dist, lengths, pred, notes=[f"D = {D:.12g}"])


def _hop_pred(g, hops):
    pred = np.full(g.n, -1, dtype=np.int64)
    for x in range(g.n):
        if not np.isfinite(hops[x]) or hops[x] == 0:
            continue
        nbrs, _ = g.neighbors(x)
        cand = nbrs[hops[nbrs] == hops[x] - 1]
        pred[x] = int(cand.min())
    return pred


def agmon_edge_lengths(g: WeightedGraph, w, sigma=1.0, variant: str = "cutoff", D=None) -> np.ndarray:
    """Edge lengths of the Agmon metric.

    cutoff: min(1, sqrt(min(w(x), w(y))) * sigma(x, y))
    intro:  sqrt(min(D, w(x), w(y)))
    """
    w = as_function(g, w, "w")
    if np.any(w < 0):
        raise NegativeWeight("w must be nonnegative")
    wmin = np.minimum(w[g.eu], w[g.ev])
    if variant == "cutoff":
        sigma = _lengths(g, sigma)
        return np.minimum(1.0, np.sqrt(wmin) * sigma)
    if variant == "intro":
        if D is None:
            D = float(g.Deg.max())
        return np.sqrt(np.minimum(D, wmin))
    raise ValueError(f"unknown variant {variant!r}")


def agmon_metric(g: WeightedGraph, sigma, w, root=None, variant: str = "cutoff", D=None) -> MetricField:
    """Agmon distance rho_{sigma, w} from ``root`` (default: the origin)."""
    if root is None:
        if g.origin is None:
            raise NoOrigin("graph has no origin; pass a root")
        root = g.origin
    lengths = agmon_edge_lengths(g, w, sigma, variant, D)
    if variant == "cutoff" and lengths.size and lengths.max() > 1.0:
        raise SolverFailure("cutoff Agmon metric has jump size above 1")
    roots = vertex_set(g, [root] if np.isscalar(root) else root)
    dist, pred = shortest_paths(g, lengths, roots)
    return MetricField(g, roots, dist, lengths, pred, notes=[f"variant = {variant}"])


def dist_to_set(g: WeightedGraph, lengths, U) -> MetricField:
    """d(U, x) = min over y in U of the path distance."""
    lengths = _lengths(g, lengths)
    U = vertex_set(g, U)
    if U.size == 0:
        raise EmptySet("U must be nonempty")
    dist, pred = shortest_paths(g, lengths, U)
    return MetricField(g, U, dist, lengths, pred)
