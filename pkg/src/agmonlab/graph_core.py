"""Weighted graphs over discrete measure spaces.

A graph is stored with dense integer vertex indices, an undirected edge list
(u < v, sorted) and a CSR adjacency holding every edge in both directions.
Infinite graphs enter only through finite truncations; `dirichlet_restriction`
absorbs removed edges into the potential so the quadratic form is unchanged on
functions supported in the kept set.
"""
from __future__ import annotations

import itertools
import json
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import (
    AsymmetricInput,
    BadParams,
    DuplicateEdge,
    EmptySubset,
    GraphMismatch,
    NegativeWeight,
    NonPositiveMeasure,
    ParseError,
    SelfLoop,
    SizeOverflow,
)

DEFAULT_VERTEX_CAP = 500_000


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class WeightedGraph:
    """Immutable locally finite weighted graph b over (X, m) with potential q.

    Use `build_graph` or the generators rather than calling this directly; the
    constructor assumes the edge arrays are already canonical (u < v, sorted,
    unique, b > 0).

    ``q_boundary`` is the part of ``q`` that came from absorbing removed edges
    in a Dirichlet restriction, and ``source_index`` maps each vertex back to
    the graph it was cut from.
    """

    def __init__(self, n, eu, ev, eb, m, q, *, labels=None, coords=None,
                 origin=None, q_boundary=None, source_index=None):
        self.n = int(n)
        self.eu = _frozen(eu, np.int64)
        self.ev = _frozen(ev, np.int64)
        self.eb = _frozen(eb, np.float64)
        self.m = _frozen(m, np.float64)
        self.q = _frozen(q, np.float64)
        if labels is None:
            labels = [str(i) for i in range(self.n)]
        self.labels = tuple(str(s) for s in labels)
        self.coords = None if coords is None else _frozen(coords, np.int64 if np.asarray(coords).dtype.kind in "iu" else np.float64)
        self.origin = None if origin is None else int(origin)
        self.q_boundary = _frozen(np.zeros(self.n) if q_boundary is None else q_boundary, np.float64)
        self.source_index = _frozen(np.arange(self.n) if source_index is None else source_index, np.int64)

        rows = np.concatenate([self.eu, self.ev])
        cols = np.concatenate([self.ev, self.eu])
        vals = np.concatenate([self.eb, self.eb])
        adj = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        adj.sort_indices()
        self._adj = adj
        self.indptr = _frozen(adj.indptr, np.int64)
        self.indices = _frozen(adj.indices, np.int64)
        self.weights = _frozen(adj.data, np.float64)

        self.deg_b = _frozen(np.asarray(adj.sum(axis=1)).ravel(), np.float64)
        self.q_plus = _frozen(np.maximum(self.q, 0.0), np.float64)
        self.q_minus = _frozen(np.maximum(-self.q, 0.0), np.float64)
        self.deg = _frozen(self.deg_b + self.q_plus * self.m, np.float64)
        self.deg_m = _frozen(self.deg / self.m, np.float64)
        self._cache = {}

    # -- basic accessors -------------------------------------------------

    @property
    def num_edges(self):
        return len(self.eb)

    @property
    def Deg(self):
        """Weighted vertex degree (1/m) sum_y b(x, y), without the potential."""
        return self.deg_b / self.m

    def neighbors(self, x):
        lo, hi = self.indptr[x], self.indptr[x + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def b(self, x, y):
        nbrs, w = self.neighbors(x)
        k = np.searchsorted(nbrs, y)
        if k < len(nbrs) and nbrs[k] == y:
            return float(w[k])
        return 0.0

    def adjacency(self):
        """Symmetric sparse matrix of edge weights (read it, don't modify it)."""
        return self._adj

    def form_matrix(self):
        """Sparse symmetric matrix L with h(phi, psi) = phi^T L psi."""
        if "L" not in self._cache:
            diag = sp.diags(self.deg_b + self.q * self.m)
            self._cache["L"] = (diag - self._adj).tocsr()
        return self._cache["L"]

    def with_q(self, q):
        """Same graph with the potential replaced (e.g. shifted by -lambda)."""
        q = np.broadcast_to(np.asarray(q, dtype=float), (self.n,))
        if not np.all(np.isfinite(q)):
            raise ValueError("potential must be finite")
        return WeightedGraph(self.n, self.eu, self.ev, self.eb, self.m, q,
                             labels=self.labels, coords=self.coords, origin=self.origin,
                             q_boundary=self.q_boundary, source_index=self.source_index)

    def shifted(self, lam):
        """Graph whose form is h - lam (potential q - lam)."""
        return self.with_q(self.q - lam)

    def with_origin(self, origin):
        return WeightedGraph(self.n, self.eu, self.ev, self.eb, self.m, self.q,
                             labels=self.labels, coords=self.coords, origin=origin,
                             q_boundary=self.q_boundary, source_index=self.source_index)

    @property
    def q_intrinsic(self):
        """Potential without the part absorbed from Dirichlet truncation."""
        return self.q - self.q_boundary

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        if self.n != other.n or self.origin != other.origin or self.labels != other.labels:
            return False
        if (self.coords is None) != (other.coords is None):
            return False
        if self.coords is not None and not np.array_equal(self.coords, other.coords):
            return False
        return (np.array_equal(self.eu, other.eu) and np.array_equal(self.ev, other.ev)
                and np.array_equal(self.eb, other.eb) and np.array_equal(self.m, other.m)
                and np.array_equal(self.q, other.q))

    __hash__ = None

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, edges={self.num_edges}, origin={self.origin})"


# -- graph functions and vertex sets -------------------------------------


def as_function(g: WeightedGraph, f, name="f") -> np.ndarray:
    """Validate ``f`` as a real function on the vertices of ``g``."""
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        arr = np.full(g.n, float(arr))
    if arr.shape != (g.n,):
        raise GraphMismatch(f"{name} has shape {arr.shape}, graph has {g.n} vertices")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite values")
    return arr


def vertex_set(g: WeightedGraph, members) -> np.ndarray:
    """Sorted, duplicate-free index array for a set of vertices of ``g``.

    Accepts an iterable of indices or a boolean mask of length n.
    """
    if members is None:
        return np.zeros(0, dtype=np.int64)
    arr = np.asarray(members)
    if arr.dtype == bool:
        if arr.shape != (g.n,):
            raise GraphMismatch("boolean mask length differs from vertex count")
        return np.flatnonzero(arr).astype(np.int64)
    arr = np.unique(np.asarray(members, dtype=np.int64).ravel())
    if arr.size and (arr[0] < 0 or arr[-1] >= g.n):
        raise GraphMismatch("vertex index out of range")
    return arr


def indicator(g: WeightedGraph, members) -> np.ndarray:
    out = np.zeros(g.n)
    out[vertex_set(g, members)] = 1.0
    return out


def mask(g: WeightedGraph, members) -> np.ndarray:
    out = np.zeros(g.n, dtype=bool)
    out[vertex_set(g, members)] = True
    return out


# -- construction --------------------------------------------------------


def build_graph(edges, m, q=None, labels=None, *, n=None, coords=None, origin=None,
                each_pair_once=False) -> WeightedGraph:
    """Validate an undirected weighted edge list and build a graph.

    ``edges`` is a sequence of (u, v, b) triples or an (E, 3) array. An edge
    may be listed in both orientations with equal weight; differing weights
    raise AsymmetricInput and the same orientation twice raises DuplicateEdge.
    With ``each_pair_once`` any repeated pair is a DuplicateEdge (file input).
    Zero-weight edges are dropped.
    """
    m = np.asarray(m, dtype=float).ravel()
    if n is None:
        n = len(m)
    if len(m) != n:
        raise GraphMismatch(f"measure has {len(m)} entries, expected {n}")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        bad = int(np.flatnonzero(~(m > 0) | ~np.isfinite(m))[0])
        raise NonPositiveMeasure(f"m({bad}) = {m[bad]} is not strictly positive")
    q = np.zeros(n) if q is None else np.asarray(q, dtype=float).ravel()
    if len(q) != n:
        raise GraphMismatch(f"potential has {len(q)} entries, expected {n}")
    if not np.all(np.isfinite(q)):
        raise ValueError("potential must be finite")

    e = np.asarray(edges, dtype=float)
    if e.size == 0:
        e = e.reshape(0, 3)
    if e.ndim != 2 or e.shape[1] != 3:
        raise BadParams("edges must be (u, v, b) triples")
    u = e[:, 0]
    v = e[:, 1]
    b = e[:, 2]
    if np.any(u != np.round(u)) or np.any(v != np.round(v)):
        raise BadParams("edge endpoints must be integers")
    u = u.astype(np.int64)
    v = v.astype(np.int64)
    if np.any((u < 0) | (u >= n) | (v < 0) | (v >= n)):
        raise BadParams("edge endpoint out of range")
    if not np.all(np.isfinite(b)):
        raise BadParams("edge weights must be finite")
    if np.any(b < 0):
        raise NegativeWeight("edge weights must be nonnegative")
    loops = (u == v)
    if np.any(loops & (b > 0)):
        x = int(u[np.flatnonzero(loops & (b > 0))[0]])
        raise SelfLoop(f"self-loop at vertex {x} with positive weight")
    keep = ~loops
    u, v, b = u[keep], v[keep], b[keep]

    # same orientation twice
    order = np.lexsort((v, u))
    su, sv = u[order], v[order]
    dup = (su[1:] == su[:-1]) & (sv[1:] == sv[:-1])
    if np.any(dup):
        k = np.flatnonzero(dup)[0]
        raise DuplicateEdge(f"edge ({su[k]}, {sv[k]}) listed twice")

    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    order = np.lexsort((hi, lo))
    lo, hi, b = lo[order], hi[order], b[order]
    same = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
    if np.any(same):
        if each_pair_once:
            k = np.flatnonzero(same)[0]
            raise DuplicateEdge(f"edge ({lo[k]}, {hi[k]}) listed twice")
        k = np.flatnonzero(same & (b[1:] != b[:-1]))
        if k.size:
            k = k[0]
            raise AsymmetricInput(f"b({lo[k]},{hi[k]}) = {b[k]} but b({hi[k]},{lo[k]}) = {b[k + 1]}")
        first = np.concatenate([[True], ~same])
        lo, hi, b = lo[first], hi[first], b[first]
    pos = b > 0
    if labels is not None and len(labels) != n:
        raise GraphMismatch("labels length differs from vertex count")
    if origin is not None and not 0 <= int(origin) < n:
        raise BadParams("origin out of range")
    return WeightedGraph(n, lo[pos], hi[pos], b[pos], m, q, labels=labels, coords=coords, origin=origin)


def _potential(rule, coords, n):
    if rule is None:
        return np.zeros(n)
    if callable(rule):
        return np.asarray(rule(coords), dtype=float).reshape(n)
    return np.broadcast_to(np.asarray(rule, dtype=float), (n,)).copy()


def well(depth: float) -> Callable[[np.ndarray], np.ndarray]:
    """Potential rule: ``depth`` at the lattice origin, 0 elsewhere."""
    def rule(coords):
        return np.where(np.all(coords == 0, axis=1), float(depth), 0.0)
    return rule


def gen_lattice_box(d: int, radius: int, q=None, *, cap: int = DEFAULT_VERTEX_CAP) -> WeightedGraph:
    """The box {-radius..radius}^d in Z^d with unit weights, m = 1, origin 0.

    ``q`` is None, a constant, an array, or a callable taking the (N, d)
    coordinate array.
    """
    if d < 1 or radius < 0:
        raise BadParams("need d >= 1 and radius >= 0")
    side = 2 * radius + 1
    n = side ** d
    if n > cap:
        raise SizeOverflow(f"(2n+1)^d = {n} exceeds the vertex cap {cap}")
    grids = np.indices((side,) * d).reshape(d, -1).T - radius
    idx = np.arange(n).reshape((side,) * d)
    us, vs = [], []
    for k in range(d):
        lo = idx.take(range(side - 1), axis=k).ravel()
        hi = idx.take(range(1, side), axis=k).ravel()
        us.append(lo)
        vs.append(hi)
    eu = np.concatenate(us) if us else np.zeros(0, np.int64)
    ev = np.concatenate(vs) if vs else np.zeros(0, np.int64)
    order = np.lexsort((ev, eu))
    labels = [",".join(str(c) for c in row) for row in grids]
    qv = _potential(q, grids, n)
    origin = int(np.flatnonzero(np.all(grids == 0, axis=1))[0])
    return WeightedGraph(n, eu[order], ev[order], np.ones(len(eu)), np.ones(n), qv,
                         labels=labels, coords=grids, origin=origin)


def gen_family(kind: str, **params) -> WeightedGraph:
    """Unit-weight fixture graphs with m = 1 and q = 0 unless overridden.

    kinds: path(n), cycle(n), tree(branching, depth), star(k), complete(n).
    ``branching`` may be an int or a per-level sequence. Optional ``q`` and
    ``m`` override the defaults.
    """
    q = params.pop("q", None)
    m = params.pop("m", None)
    edges: list[tuple[int, int]] = []
    coords = None
    origin = 0
    if kind == "path":
        n = int(params.pop("n", 0))
        if n < 1:
            raise BadParams("path needs n >= 1")
        edges = [(i, i + 1) for i in range(n - 1)]
        coords = np.arange(n).reshape(-1, 1)
    elif kind == "cycle":
        n = int(params.pop("n", 0))
        if n < 3:
            raise BadParams("cycle needs n >= 3")
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "tree":
        depth = int(params.pop("depth", -1))
        branching = params.pop("branching", 2)
        if depth < 0:
            raise BadParams("tree needs depth >= 0")
        per_level = [int(branching)] * depth if np.isscalar(branching) else [int(k) for k in branching]
        if len(per_level) < depth or any(k < 1 for k in per_level):
            raise BadParams("branching must be positive for every level")
        frontier = [0]
        n = 1
        for level in range(depth):
            nxt = []
            for parent in frontier:
                for _ in range(per_level[level]):
                    edges.append((parent, n))
                    nxt.append(n)
                    n += 1
            frontier = nxt
    elif kind == "star":
        k = int(params.pop("k", 0))
        if k < 1:
            raise BadParams("star needs k >= 1 leaves")
        n = k + 1
        edges = [(0, i) for i in range(1, n)]
    elif kind == "complete":
        n = int(params.pop("n", 0))
        if n < 1:
            raise BadParams("complete graph needs n >= 1")
        edges = list(itertools.combinations(range(n), 2))
    else:
        raise BadParams(f"unknown family {kind!r}")
    if params:
        raise BadParams(f"unexpected parameters for {kind}: {sorted(params)}")
    e = np.array([(a, c, 1.0) for a, c in edges], dtype=float).reshape(-1, 3)
    mv = np.ones(n) if m is None else np.broadcast_to(np.asarray(m, float), (n,))
    if callable(q):
        qv = np.asarray(q(coords if coords is not None else np.arange(n).reshape(-1, 1)), float).reshape(n)
    else:
        qv = _potential(q, None, n)
    return build_graph(e, mv, qv, coords=coords, origin=origin)


# -- restriction and neighborhoods ---------------------------------------


def dirichlet_restriction(g: WeightedGraph, U) -> WeightedGraph:
    """Restrict ``g`` to ``U``, converting cut edges into potential.

    q~(x) = q(x) + (1/m(x)) sum_{y not in U} b(x, y), so the restricted form
    equals h on functions supported in U.
    """
    U = vertex_set(g, U)
    if U.size == 0:
        raise EmptySubset("restriction set is empty")
    keep = np.zeros(g.n, dtype=bool)
    keep[U] = True
    new_index = np.full(g.n, -1, dtype=np.int64)
    new_index[U] = np.arange(U.size)

    inside = keep[g.eu] & keep[g.ev]
    crossing = keep[g.eu] ^ keep[g.ev]
    lost = np.zeros(g.n)
    cu, cv, cb = g.eu[crossing], g.ev[crossing], g.eb[crossing]
    np.add.at(lost, np.where(keep[cu], cu, cv), cb)
    absorbed = lost[U] / g.m[U]

    origin = None
    if g.origin is not None and keep[g.origin]:
        origin = int(new_index[g.origin])
    return WeightedGraph(
        U.size, new_index[g.eu[inside]], new_index[g.ev[inside]], g.eb[inside],
        g.m[U], g.q[U] + absorbed,
        labels=[g.labels[i] for i in U],
        coords=None if g.coords is None else g.coords[U],
        origin=origin,
        q_boundary=g.q_boundary[U] + absorbed,
        source_index=g.source_index[U],
    )


def neighborhood(g: WeightedGraph, U) -> np.ndarray:
    """N(U): U together with every vertex adjacent to U."""
    U = vertex_set(g, U)
    if U.size == 0:
        return U
    inside = np.zeros(g.n, dtype=bool)
    inside[U] = True
    out = inside.copy()
    out[g.ev[inside[g.eu]]] = True
    out[g.eu[inside[g.ev]]] = True
    return np.flatnonzero(out).astype(np.int64)


def complement(g: WeightedGraph, U) -> np.ndarray:
    inside = mask(g, U)
    return np.flatnonzero(~inside).astype(np.int64)


def combinatorial_distance(g: WeightedGraph, sources=None) -> np.ndarray:
    """Hop distance from ``sources`` (default: origin); -1 when unreachable."""
    if sources is None:
        if g.origin is None:
            raise BadParams("graph has no origin")
        sources = [g.origin]
    src = vertex_set(g, sources)
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[src] = 0
    frontier = src
    level = 0
    while frontier.size:
        level += 1
        nbrs = np.unique(g.adjacency()[frontier].indices)
        nbrs = nbrs[dist[nbrs] < 0]
        dist[nbrs] = level
        frontier = nbrs
    return dist


def ball(g: WeightedGraph, radius, dist=None) -> np.ndarray:
    """Combinatorial ball {x : |x| <= radius} about the origin."""
    if dist is None:
        dist = combinatorial_distance(g)
    return np.flatnonzero((dist >= 0) & (dist <= radius)).astype(np.int64)


# -- file I/O ------------------------------------------------------------


def graph_to_dict(g: WeightedGraph) -> dict:
    vertices = []
    for i in range(g.n):
        rec = {"id": i, "label": g.labels[i], "m": float(g.m[i]), "q": float(g.q[i])}
        if g.coords is not None:
            rec["coords"] = [c.item() for c in g.coords[i]]
        vertices.append(rec)
    edges = [{"u": int(a), "v": int(c), "b": float(w)} for a, c, w in zip(g.eu, g.ev, g.eb)]
    doc = {"vertices": vertices, "edges": edges}
    if g.origin is not None:
        doc["origin"] = g.origin
    return doc


def save_graph(g: WeightedGraph, path) -> None:
    text = json.dumps(graph_to_dict(g), indent=1, allow_nan=False)
    Path(path).write_text(text + "\n")


def _field(rec, key, kind, where, required=True):
    if key not in rec:
        if required:
            raise ParseError("missing field", field=f"{where}.{key}")
        return None
    val = rec[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ParseError("expected a number", field=f"{where}.{key}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ParseError("expected an integer", field=f"{where}.{key}")
        return val
    return val


def graph_from_dict(doc) -> WeightedGraph:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    verts = doc.get("vertices")
    if not isinstance(verts, list) or not verts:
        raise ParseError("missing or empty vertex list", field="vertices")
    n = len(verts)
    m = np.empty(n)
    q = np.empty(n)
    labels = [None] * n
    coords = [None] * n
    seen = np.zeros(n, dtype=bool)
    for k, rec in enumerate(verts):
        where = f"vertices[{k}]"
        if not isinstance(rec, dict):
            raise ParseError("vertex must be an object", field=where)
        i = _field(rec, "id", int, where)
        if not 0 <= i < n or seen[i]:
            raise ParseError(f"vertex id {i} is out of range or repeated", field=f"{where}.id")
        seen[i] = True
        m[i] = _field(rec, "m", float, where)
        q[i] = _field(rec, "q", float, where)
        label = rec.get("label", str(i))
        labels[i] = str(label)
        c = rec.get("coords")
        if c is not None:
            if not isinstance(c, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in c):
                raise ParseError("coords must be a list of numbers", field=f"{where}.coords")
        coords[i] = c
    has_coords = [c is not None for c in coords]
    if any(has_coords) and not all(has_coords):
        raise ParseError("coords must be given for all vertices or none", field="vertices")
    if all(has_coords) and len({len(c) for c in coords}) != 1:
        raise ParseError("coords have inconsistent dimension", field="vertices")
    carr = np.array(coords) if all(has_coords) else None

    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ParseError("edges must be a list", field="edges")
    e = np.zeros((len(raw_edges), 3))
    for k, rec in enumerate(raw_edges):
        where = f"edges[{k}]"
        if not isinstance(rec, dict):
            raise ParseError("edge must be an object", field=where)
        e[k] = (_field(rec, "u", int, where), _field(rec, "v", int, where), _field(rec, "b", float, where))
    origin = doc.get("origin")
    if origin is not None and (isinstance(origin, bool) or not isinstance(origin, int) or not 0 <= origin < n):
        raise ParseError("origin must be a vertex id", field="origin")
    return build_graph(e, m, q, labels, coords=carr, origin=origin, each_pair_once=True)


def load_graph(path) -> WeightedGraph:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return graph_from_dict(doc)
