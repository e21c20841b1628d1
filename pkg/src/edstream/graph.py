"""Exact graph containers, cut arithmetic and small-instance enumeration.

Vertices are the integers ``0..n-1``.  Both containers are immutable after
construction.  A self-loop contributes its multiplicity (or weight) exactly
once to the volume of its vertex, so that attaching ``tau`` loops per
boundary edge raises a vertex's volume by ``tau`` per boundary edge.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_flow

REL_TOL = 1e-9
BRUTE_FORCE_CAP = 20

Pair = tuple[int, int]
Cluster = tuple[int, ...]


class GraphError(ValueError):
    """Raised on out-of-range vertices or malformed graph data."""


class SizeError(ValueError):
    """Raised when an exhaustive routine is asked to exceed its vertex cap."""


def pair(u: int, v: int) -> Pair:
    return (u, v) if u < v else (v, u)


def close(a: float, b: float, rel: float = REL_TOL) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


class _Graph:
    _integral = True

    def __init__(self, n: int, edges: Mapping[Pair, float], loops: Mapping[int, float]):
        if n < 0:
            raise GraphError(f"negative vertex count {n}")
        self._n = int(n)
        w: dict[Pair, float] = {}
        for (u, v), x in edges.items():
            self._check_vertex(u)
            self._check_vertex(v)
            if u == v:
                raise GraphError(f"pair ({u},{v}) is a loop; use the loop map")
            self._check_weight(x)
            if x != 0:
                key = pair(u, v)
                w[key] = w.get(key, 0) + x
        lp: dict[int, float] = {}
        for v, x in loops.items():
            self._check_vertex(v)
            self._check_weight(x)
            if x != 0:
                lp[v] = lp.get(v, 0) + x
        self._w = dict(sorted(w.items()))
        self._loops = dict(sorted(lp.items()))
        self._adj: list[dict[int, float]] | None = None
        self._deg: np.ndarray | None = None

    def _check_vertex(self, v: int) -> None:
        if not isinstance(v, (int, np.integer)) or not 0 <= v < self._n:
            raise GraphError(f"vertex {v!r} outside [0, {self._n})")

    def _check_weight(self, x: float) -> None:
        if self._integral:
            if not isinstance(x, (int, np.integer)) or x < 0:
                raise GraphError(f"multiplicity {x!r} is not a non-negative integer")
        elif not math.isfinite(x) or x < 0:
            raise GraphError(f"weight {x!r} is not finite and non-negative")

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> Mapping[Pair, float]:
        return MappingProxyType(self._w)

    @property
    def loops(self) -> Mapping[int, float]:
        return MappingProxyType(self._loops)

    def weight(self, u: int, v: int) -> float:
        return self._w.get(pair(u, v), 0)

    def loop(self, v: int) -> float:
        return self._loops.get(v, 0)

    def adjacency(self) -> list[dict[int, float]]:
        if self._adj is None:
            adj: list[dict[int, float]] = [dict() for _ in range(self._n)]
            for (u, v), x in self._w.items():
                adj[u][v] = x
                adj[v][u] = x
            self._adj = adj
        return self._adj

    def neighbors(self, v: int) -> Mapping[int, float]:
        self._check_vertex(v)
        return MappingProxyType(self.adjacency()[v])

    def degrees(self) -> np.ndarray:
        if self._deg is None:
            deg = np.zeros(self._n, dtype=np.float64)
            for (u, v), x in self._w.items():
                deg[u] += x
                deg[v] += x
            for v, x in self._loops.items():
                deg[v] += x
            deg.setflags(write=False)
            self._deg = deg
        return self._deg

    def degree(self, v: int) -> float:
        self._check_vertex(v)
        return float(self.degrees()[v])

    def total_volume(self) -> float:
        return float(self.degrees().sum())

    def num_edges(self) -> float:
        """Total multiplicity (or weight) of non-loop edges."""
        return sum(self._w.values())

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._w:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0, dtype=np.float64)
        keys = np.array(list(self._w.keys()), dtype=np.int64)
        vals = np.array(list(self._w.values()), dtype=np.float64)
        return keys[:, 0], keys[:, 1], vals

    def induced(self, U: Iterable[int]):
        """Subgraph on ``U`` with the same vertex ids; outside vertices become isolated."""
        keep = set(U)
        for v in keep:
            self._check_vertex(v)
        edges = {e: x for e, x in self._w.items() if e[0] in keep and e[1] in keep}
        loops = {v: x for v, x in self._loops.items() if v in keep}
        return type(self)(self._n, edges, loops)

    def without_edges(self, pairs: Iterable[Pair]):
        drop = {pair(u, v) for u, v in pairs}
        edges = {e: x for e, x in self._w.items() if e not in drop}
        return type(self)(self._n, edges, dict(self._loops))

    def components(self) -> list[Cluster]:
        """Connected components, each sorted, ordered by smallest vertex."""
        labels = _component_labels(self._n, self._w.keys())
        groups: dict[int, list[int]] = {}
        for v, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(v)
        return sorted((tuple(g) for g in groups.values()), key=lambda c: c[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, _Graph) or type(other) is not type(self):
            return NotImplemented
        return self._n == other._n and self._w == other._w and self._loops == other._loops

    def __hash__(self) -> int:
        return hash((type(self).__name__, self._n, tuple(self._w.items()), tuple(self._loops.items())))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self._n}, edges={len(self._w)}, loops={len(self._loops)})"


class MultiGraph(_Graph):
    """Unweighted multigraph with integer multiplicities and self-loop counts."""

    _integral = True

    def __init__(
        self,
        n: int,
        edges: Mapping[Pair, int] | Iterable[Pair] = (),
        loops: Mapping[int, int] | None = None,
    ):
        if not isinstance(edges, Mapping):
            edges = Counter(pair(int(u), int(v)) if u != v else (int(u), int(v)) for u, v in edges)
        super().__init__(n, edges, loops or {})

    def to_weighted(self) -> "WeightedGraph":
        return WeightedGraph(
            self._n,
            {e: float(x) for e, x in self._w.items()},
            {v: float(x) for v, x in self._loops.items()},
        )

    def edge_list(self) -> list[Pair]:
        """Edges with repetition according to multiplicity."""
        out: list[Pair] = []
        for e, x in self._w.items():
            out.extend([e] * int(x))
        return out


class WeightedGraph(_Graph):
    """Weighted graph with non-negative real edge weights and self-loop weights."""

    _integral = False

    def __init__(
        self,
        n: int,
        wedges: Mapping[Pair, float] | None = None,
        wloops: Mapping[int, float] | None = None,
    ):
        super().__init__(n, wedges or {}, wloops or {})


Graph = Union[MultiGraph, WeightedGraph]


def _component_labels(n: int, pairs: Iterable[Pair]) -> np.ndarray:
    pairs = list(pairs)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if not pairs:
        return np.arange(n)
    arr = np.array(pairs, dtype=np.int64)
    mat = csr_matrix((np.ones(len(arr)), (arr[:, 0], arr[:, 1])), shape=(n, n))
    _, labels = connected_components(mat, directed=False)
    return labels


def make_cluster(vertices: Iterable[int], n: int | None = None) -> Cluster:
    out = tuple(sorted(set(int(v) for v in vertices)))
    if n is not None and out and (out[0] < 0 or out[-1] >= n):
        raise GraphError(f"cluster vertex outside [0, {n})")
    return out


def _subset(g: Graph, S: Iterable[int], U: Iterable[int] | None = None) -> frozenset[int]:
    s = frozenset(int(v) for v in S)
    for v in s:
        g._check_vertex(v)
    if U is not None:
        u = U if isinstance(U, (set, frozenset)) else frozenset(U)
        extra = s - u
        if extra:
            raise GraphError(f"vertices {sorted(extra)} are outside the cluster")
    return s


def cut_local(g: Graph, U: Iterable[int], S: Iterable[int]) -> float:
    """Weight of edges between ``S`` and ``U \\ S``."""
    u = frozenset(U)
    for v in u:
        g._check_vertex(v)
    s = _subset(g, S, u)
    adj = g.adjacency()
    return sum(x for a in s for b, x in adj[a].items() if b in u and b not in s)


def border(g: Graph, U: Iterable[int], S: Iterable[int]) -> float:
    """Weight of edges leaving the cluster ``U`` from ``S``."""
    u = frozenset(U)
    for v in u:
        g._check_vertex(v)
    s = _subset(g, S, u)
    adj = g.adjacency()
    return sum(x for a in s for b, x in adj[a].items() if b not in u)


def cut_global(g: Graph, S: Iterable[int]) -> float:
    s = _subset(g, S)
    adj = g.adjacency()
    return sum(x for a in s for b, x in adj[a].items() if b not in s)


def vol(g: Graph, S: Iterable[int]) -> float:
    s = _subset(g, S)
    deg = g.degrees()
    return float(sum(deg[v] for v in s))


@dataclass(frozen=True)
class BoundaryLinkedView:
    """The graph induced on ``cluster`` plus ``tau`` self-loops per boundary edge.

    ``tau = 1`` keeps every volume as in the base graph, ``tau = 0`` is the
    plain induced subgraph.
    """

    base: Graph
    cluster: Cluster
    tau: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "cluster", make_cluster(self.cluster, self.base.n))
        if self.tau < 0 or not math.isfinite(self.tau):
            raise GraphError(f"tau must be finite and non-negative, got {self.tau}")

    @property
    def members(self) -> frozenset[int]:
        return frozenset(self.cluster)

    def border(self, S: Iterable[int]) -> float:
        return border(self.base, self.members, S)

    def cut(self, S: Iterable[int]) -> float:
        return cut_local(self.base, self.members, S)

    def vol(self, S: Iterable[int]) -> float:
        s = _subset(self.base, S, self.members)
        return vol(self.base, s) + (self.tau - 1.0) * border(self.base, self.members, s)

    def total_volume(self) -> float:
        return self.vol(self.cluster)

    def sparsity(self, S: Iterable[int], diagnostics: list[str] | None = None) -> float:
        s = _subset(self.base, S, self.members)
        if not s or s == self.members:
            raise GraphError("sparsity needs a proper non-empty cut")
        rest = self.members - s
        return _ratio(self.cut(s), self.vol(s), self.vol(rest), diagnostics)

    def materialize(self) -> tuple[WeightedGraph, Cluster]:
        """Explicit weighted graph on ``0..|U|-1`` with the added loops; returns the label map too."""
        labels = self.cluster
        index = {v: i for i, v in enumerate(labels)}
        adj = self.base.adjacency()
        edges: dict[Pair, float] = {}
        loops: dict[int, float] = {}
        for v in labels:
            i = index[v]
            out = 0.0
            for w, x in adj[v].items():
                j = index.get(w)
                if j is None:
                    out += x
                elif i < j:
                    edges[(i, j)] = float(x)
            mass = float(self.base.loop(v)) + self.tau * out
            if mass > 0:
                loops[i] = mass
        return WeightedGraph(len(labels), edges, loops), labels


def _ratio(c: float, va: float, vb: float, diagnostics: list[str] | None) -> float:
    m = min(va, vb)
    if m <= 0:
        if diagnostics is not None:
            diagnostics.append("zero-volume side: sparsity taken as +inf")
        return math.inf
    return c / m


def full_view(g: Graph) -> BoundaryLinkedView:
    return BoundaryLinkedView(g, tuple(range(g.n)), 1.0)


def sparsity(
    obj: Graph | BoundaryLinkedView, S: Iterable[int], diagnostics: list[str] | None = None
) -> float:
    view = obj if isinstance(obj, BoundaryLinkedView) else full_view(obj)
    return view.sparsity(S, diagnostics)


@dataclass(frozen=True)
class CutTable:
    """Cut weight and volume of every vertex subset of a small graph, indexed by bitmask."""

    k: int
    cut: np.ndarray
    vol: np.ndarray
    total: float


def cut_table(g: Graph, cap: int = BRUTE_FORCE_CAP) -> CutTable:
    """Enumerate all ``2^n`` subsets of ``g`` (bit ``i`` set means vertex ``i`` is in S)."""
    k = g.n
    if k > cap:
        raise SizeError(f"{k} vertices exceed the enumeration cap {cap}")
    deg = g.degrees()
    adj = g.adjacency()
    cut = np.zeros(1, dtype=np.float64)
    volume = np.zeros(1, dtype=np.float64)
    for i in range(k):
        # weight from i to S for every subset S of the first i vertices
        to_s = np.zeros(1, dtype=np.float64)
        for j in range(i):
            to_s = np.concatenate([to_s, to_s + adj[i].get(j, 0.0)])
        back = sum(x for j, x in adj[i].items() if j < i)
        cut = np.concatenate([cut + to_s, cut + (back - to_s)])
        volume = np.concatenate([volume, volume + deg[i]])
    return CutTable(k, cut, volume, float(deg.sum()))


def mask_to_set(mask: int, labels: Sequence[int] | None = None) -> Cluster:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(labels[i] if labels is not None else i)
        mask >>= 1
        i += 1
    return tuple(sorted(out))


def _proper_masks(table: CutTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Masks that exclude the last vertex: every unordered proper cut exactly once."""
    half = 1 << (table.k - 1)
    masks = np.arange(1, half, dtype=np.int64)
    c = table.cut[1:half]
    v = table.vol[1:half]
    return masks, c, np.minimum(v, table.total - v)


def sparsity_profile(table: CutTable) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per unordered cut: mask, cut, min-side volume and sparsity (``inf`` on zero volume)."""
    masks, c, side = _proper_masks(table)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(side > 0, c / np.where(side > 0, side, 1.0), np.inf)
    return masks, c, side, phi


def small_side(table: CutTable, mask: int, labels: Sequence[int] | None = None) -> Cluster:
    """The lower-volume side of the cut ``mask`` (lexicographically smaller one on ties)."""
    full = (1 << table.k) - 1
    a, b = mask, full ^ mask
    va, vb = table.vol[a], table.vol[b]
    sa, sb = mask_to_set(a, labels), mask_to_set(b, labels)
    if close(va, vb):
        return min(sa, sb)
    return sa if va < vb else sb


def min_sparsity_bruteforce(
    obj: Graph | BoundaryLinkedView, cap: int = BRUTE_FORCE_CAP
) -> tuple[float, Cluster]:
    """Exact minimum sparsity over all proper cuts, with one minimizing side.

    Ties are broken towards the larger min-side volume, then the
    lexicographically smallest subset.  A cluster with fewer than two
    vertices has no proper cut and reports ``(inf, ())``.
    """
    view = obj if isinstance(obj, BoundaryLinkedView) else full_view(obj)
    if len(view.cluster) > cap:
        raise SizeError(f"{len(view.cluster)} vertices exceed the enumeration cap {cap}")
    if len(view.cluster) < 2:
        return math.inf, ()
    local, labels = view.materialize()
    table = cut_table(local, cap)
    masks, _, side, phi = sparsity_profile(table)
    best = float(phi.min())
    if math.isinf(best):
        cand = masks
        cand_side = side
    else:
        hit = np.abs(phi - best) <= REL_TOL * max(1.0, abs(best))
        cand, cand_side = masks[hit], side[hit]
    top = cand_side.max()
    cand = cand[np.abs(cand_side - top) <= REL_TOL * max(1.0, abs(top))]
    options = []
    full = (1 << table.k) - 1
    for m in cand.tolist():
        for sub in (m, full ^ m):
            if table.vol[sub] <= table.total - table.vol[sub] or close(table.vol[sub], table.total - table.vol[sub]):
                options.append(mask_to_set(sub, labels))
    return best, min(options)


def _capacity_matrix(g: Graph) -> csr_matrix:
    us, vs, ws = g.edge_arrays()
    if ws.size and not np.all(ws == np.round(ws)):
        raise GraphError("edge connectivity needs integral multiplicities")
    rows = np.concatenate([us, vs])
    cols = np.concatenate([vs, us])
    data = np.concatenate([ws, ws]).astype(np.int32)
    return csr_matrix((data, (rows, cols)), shape=(g.n, g.n), dtype=np.int32)


def _min_cut(cap: csr_matrix, s: int, t: int) -> tuple[int, frozenset[int]]:
    res = maximum_flow(cap, s, t, method="dinic")
    residual = (cap - res.flow).tocsr()
    residual.data[residual.data < 0] = 0
    residual.eliminate_zeros()
    reach = breadth_first_order(residual, s, directed=True, return_predecessors=False)
    return int(res.flow_value), frozenset(int(x) for x in reach)


def min_cut(g: Graph, u: int, v: int) -> tuple[int, frozenset[int]]:
    """Minimum ``u``-``v`` cut value and the source side of one minimum cut."""
    g._check_vertex(u)
    g._check_vertex(v)
    if u == v:
        raise GraphError("min cut needs two distinct vertices")
    return _min_cut(_capacity_matrix(g), u, v)


def edge_connectivity(g: Graph, u: int, v: int) -> int:
    """Least number of edges whose removal separates ``u`` from ``v``."""
    return min_cut(g, u, v)[0]


def connectivity_matrix(g: Graph) -> np.ndarray:
    """All-pairs edge connectivity via a Gomory-Hu flow-equivalent tree (Gusfield)."""
    n = g.n
    out = np.zeros((n, n), dtype=np.int64)
    if n < 2:
        return out
    cap = _capacity_matrix(g)
    parent = [0] * n
    flow = [0] * n
    for s in range(1, n):
        t = parent[s]
        value, side = _min_cut(cap, s, t)
        flow[s] = value
        for i in range(s + 1, n):
            if i in side and parent[i] == t:
                parent[i] = s
    tree: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s in range(1, n):
        tree[s].append((parent[s], flow[s]))
        tree[parent[s]].append((s, flow[s]))
    for root in range(n):
        best = {root: math.inf}
        stack = [root]
        while stack:
            x = stack.pop()
            for y, f in tree[x]:
                if y not in best:
                    best[y] = min(best[x], f)
                    stack.append(y)
        for y, f in best.items():
            if y != root:
                out[root, y] = int(f)
    return out


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of ``0..n-1`` by clusters, kept sorted by smallest vertex."""

    n: int
    clusters: tuple[Cluster, ...]

    def __post_init__(self):
        cl = tuple(sorted((make_cluster(c) for c in self.clusters if len(c)), key=lambda c: c[0]))
        seen: set[int] = set()
        for c in cl:
            for v in c:
                if v in seen:
                    raise GraphError(f"vertex {v} appears in two clusters")
                if not 0 <= v < self.n:
                    raise GraphError(f"vertex {v} outside [0, {self.n})")
                seen.add(v)
        if len(seen) != self.n:
            missing = sorted(set(range(self.n)) - seen)
            raise GraphError(f"partition misses vertices {missing[:10]}")
        object.__setattr__(self, "clusters", cl)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(n, tuple((v,) for v in range(n)))

    @classmethod
    def whole(cls, n: int) -> "Partition":
        return cls(n, (tuple(range(n)),) if n else ())

    def labels(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=np.int64)
        for i, c in enumerate(self.clusters):
            lab[list(c)] = i
        return lab

    def crossing_edges(self, g: Graph) -> float:
        """Half the sum over clusters of their global cut, i.e. weight of inter-cluster edges."""
        lab = self.labels()
        return sum(x for (u, v), x in g.edges.items() if lab[u] != lab[v])

    def intra_pairs(self, g: Graph) -> set[Pair]:
        lab = self.labels()
        return {e for e in g.edges if lab[e[0]] == lab[e[1]]}

    def __len__(self) -> int:
        return len(self.clusters)
