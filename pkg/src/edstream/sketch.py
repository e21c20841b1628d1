"""Linear sketches for dynamic edge streams.

Every sketch here is a linear function of the live edge-multiplicity vector:
cells hold wrapping 32-bit sums, so insert-then-delete restores the exact
zero state and sketches of two sub-streams add up to the sketch of their
union.  Hash functions are keyed by sub-seeds derived from one master seed.

The building block is an l0-sampler over the pair universe: ``reps``
independent columns, each with ``levels`` geometric sub-sampling levels
holding a 1-sparse recovery cell (count, index-weighted sum, fingerprint).
Columns are stored by exact level and summed into nested levels at decode
time, so each update touches one cell per column.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .graph import MultiGraph, WeightedGraph, connectivity_matrix, pair
from .randomness import derive_seed, keyed_hash, trailing_zeros

# failure rate of a single column on a large support (measured, see tests)
ONE_COLUMN_FAILURE = 0.28
_LOW32 = np.uint64(0xFFFFFFFF)
_CHUNK = 1 << 15


class StreamError(ValueError):
    """Malformed update or a live multiplicity that went negative."""


class SketchDecodeError(RuntimeError):
    """A sketch could not be decoded; ``level`` names the witness level when known."""

    def __init__(self, message: str, level: int | None = None):
        super().__init__(message if level is None else f"level {level}: {message}")
        self.level = level


class Decode(Enum):
    EMPTY = "empty"
    FAIL = "fail"


@dataclass(frozen=True)
class StreamUpdate:
    op: str
    u: int
    v: int

    def __post_init__(self):
        if self.op not in ("+", "-"):
            raise StreamError(f"unknown op {self.op!r}")
        if self.u == self.v:
            raise StreamError(f"update ({self.u},{self.v}) is a self-loop")
        if self.u < 0 or self.v < 0:
            raise StreamError("negative vertex id")

    @property
    def sign(self) -> int:
        return 1 if self.op == "+" else -1


def insertions(pairs: Iterable[tuple[int, int]]) -> list[StreamUpdate]:
    return [StreamUpdate("+", u, v) for u, v in pairs]


def live_counter(updates: Iterable[StreamUpdate], n: int | None = None) -> Counter:
    """Live multiplicities after the stream; raises if any ever goes negative."""
    live: Counter = Counter()
    for t, up in enumerate(updates):
        if n is not None and max(up.u, up.v) >= n:
            raise StreamError(f"update {t}: vertex outside [0, {n})")
        e = pair(up.u, up.v)
        live[e] += up.sign
        if live[e] < 0:
            raise StreamError(f"update {t}: edge {e} deleted more often than inserted")
        if live[e] == 0:
            del live[e]
    return live


def live_graph(n: int, updates: Iterable[StreamUpdate]) -> MultiGraph:
    return MultiGraph(n, dict(live_counter(updates, n)))


def _as_arrays(updates: Sequence[StreamUpdate]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    us = np.fromiter((min(x.u, x.v) for x in updates), dtype=np.int64, count=len(updates))
    vs = np.fromiter((max(x.u, x.v) for x in updates), dtype=np.int64, count=len(updates))
    ds = np.fromiter((x.sign for x in updates), dtype=np.int64, count=len(updates))
    return us, vs, ds


class PairIndex:
    """Row-major index of the pairs ``u < v`` of ``n`` vertices."""

    def __init__(self, n: int):
        self.n = n
        self.size = n * (n - 1) // 2
        iu, iv = np.triu_indices(n, 1)
        self.us = iu.astype(np.int64)
        self.vs = iv.astype(np.int64)

    def index(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        return lo * (2 * self.n - lo - 1) // 2 + (hi - lo - 1)


def sampler_reps(fail_prob: float) -> int:
    if not 0 < fail_prob < 1:
        raise ValueError("fail_prob must lie in (0, 1)")
    return max(1, math.ceil(math.log(fail_prob) / math.log(ONE_COLUMN_FAILURE)))


def sampler_levels(universe: int) -> int:
    return max(1, math.ceil(math.log2(max(universe, 2)))) + 2


def _u32(x: np.ndarray) -> np.ndarray:
    return (np.asarray(x).astype(np.int64).astype(np.uint64) & _LOW32).astype(np.uint32)


def _decode_cells(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, fkeys: np.ndarray, universe: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode exact-level cells of shape ``(m, reps, levels)``.

    Returns index, value and a status array (0 ok, 1 empty, 2 fail).  The
    first 1-sparse nested cell in (column, level) order wins; the rule is
    symmetric in the support, so the output is uniform over it.
    """
    m = a.shape[0]
    na = np.cumsum(a[..., ::-1], axis=-1, dtype=np.uint32)[..., ::-1]
    nb = np.cumsum(b[..., ::-1], axis=-1, dtype=np.uint32)[..., ::-1]
    nc = np.cumsum(c[..., ::-1], axis=-1, dtype=np.uint32)[..., ::-1]
    empty = np.all((na[..., 0] == 0) & (nb[..., 0] == 0) & (nc[..., 0] == 0), axis=1)
    sa = na.view(np.int32).astype(np.int64)
    sb = nb.view(np.int32).astype(np.int64)
    nz = sa != 0
    q, r = np.divmod(sb, np.where(nz, sa, 1))
    ok = nz & (r == 0) & (q >= 0) & (q < universe)
    qi = np.where(ok, q, 0).astype(np.uint64)
    fp = keyed_hash(fkeys[None, :, None], qi) & _LOW32
    ok &= ((na.astype(np.uint64) * fp) & _LOW32) == nc.astype(np.uint64)
    flat = ok.reshape(m, -1)
    first = flat.argmax(axis=1)
    has = flat[np.arange(m), first]
    idx = qi.reshape(m, -1)[np.arange(m), first].astype(np.int64)
    val = sa.reshape(m, -1)[np.arange(m), first]
    status = np.where(empty, 1, np.where(has, 0, 2))
    return idx, val, status


class L0Sampler:
    """Linear l0-sampler over indices ``0..universe-1``."""

    def __init__(self, universe: int, seed: int, fail_prob: float = 0.01):
        if universe < 1:
            raise ValueError("universe must be positive")
        self.universe = universe
        self.seed = seed
        self.reps = sampler_reps(fail_prob)
        self.levels = sampler_levels(universe)
        self._lkey = np.array([derive_seed(seed, "l0", r, "level") for r in range(self.reps)], dtype=np.uint64)
        self._fkey = np.array([derive_seed(seed, "l0", r, "fp") for r in range(self.reps)], dtype=np.uint64)
        self.cells = np.zeros((3, self.reps, self.levels), dtype=np.uint32)

    def update(self, index: int, delta: int) -> None:
        if not 0 <= index < self.universe:
            raise IndexError(f"index {index} outside [0, {self.universe})")
        idx = np.array([index], dtype=np.uint64)
        g = trailing_zeros(keyed_hash(self._lkey[:, None], idx), self.levels - 1)[:, 0]
        fp = keyed_hash(self._fkey, idx[0]) & _LOW32
        d = np.uint64(delta % (1 << 32))
        reps = np.arange(self.reps)
        np.add.at(self.cells[0], (reps, g), _u32(np.full(self.reps, delta)))
        np.add.at(self.cells[1], (reps, g), _u32(np.full(self.reps, delta * index)))
        np.add.at(self.cells[2], (reps, g), ((fp * d) & _LOW32).astype(np.uint32))

    def decode(self) -> tuple[int, int] | Decode:
        idx, val, status = _decode_cells(
            self.cells[0][None], self.cells[1][None], self.cells[2][None], self._fkey, self.universe
        )
        if status[0] == 1:
            return Decode.EMPTY
        if status[0] == 2:
            return Decode.FAIL
        return int(idx[0]), int(val[0])

    def state(self) -> bytes:
        return self.cells.tobytes()


def _boruvka_rounds(n: int) -> int:
    return (math.ceil(math.log2(n)) if n > 1 else 0) + 3


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True


class ForestBanks:
    """``count`` independent spanning-forest sketches over the same vertex set.

    A bank keeps, for every vertex and Borůvka round, one l0-sampler over the
    vertex's signed incidence vector (``+x`` at pair ``{u,v}`` for ``u``,
    ``-x`` for ``v``), so summing a vertex set cancels its internal edges.
    """

    def __init__(self, n: int, count: int, seed: int, label: str = "forest", fail_prob: float = 0.01):
        if n < 1 or count < 1:
            raise ValueError("need at least one vertex and one bank")
        self.n = n
        self.count = count
        self.seed = seed
        self.label = label
        self.fail_prob = fail_prob
        self.pairs = PairIndex(n)
        self.universe = max(self.pairs.size, 1)
        self.reps = sampler_reps(fail_prob)
        self.levels = sampler_levels(self.universe)
        self.rounds = _boruvka_rounds(n)
        shape = (count, self.rounds, self.reps)
        self.lkeys = np.empty(shape, dtype=np.uint64)
        self.fkeys = np.empty(shape, dtype=np.uint64)
        for j in range(count):
            for r in range(self.rounds):
                for p in range(self.reps):
                    self.lkeys[j, r, p] = derive_seed(seed, label, j, r, p, "level")
                    self.fkeys[j, r, p] = derive_seed(seed, label, j, r, p, "fp")
        self.cells = np.zeros((3, count, self.rounds, n, self.reps, self.levels), dtype=np.uint32)

    @property
    def words(self) -> int:
        return int(self.cells.size)

    def _scatter(
        self,
        target: np.ndarray,
        banks: np.ndarray,
        local_bank: np.ndarray,
        us: np.ndarray,
        vs: np.ndarray,
        ds: np.ndarray,
    ) -> None:
        """Add updates into ``target`` (shape ``(3, B, rounds, n, reps, levels)``).

        ``banks`` picks the hash keys, ``local_bank`` the slot inside ``target``.
        """
        R, P, L, n = self.rounds, self.reps, self.levels, self.n
        for lo in range(0, len(us), _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            bk, lb, u, v, d = banks[sl], local_bank[sl], us[sl], vs[sl], ds[sl]
            idx = self.pairs.index(u, v).astype(np.uint64)
            lk = self.lkeys[bk]
            fk = self.fkeys[bk]
            g = trailing_zeros(keyed_hash(lk, idx[:, None, None]), L - 1)
            fp = keyed_hash(fk, idx[:, None, None]) & _LOW32
            rr = np.arange(R)[None, :, None]
            pp = np.arange(P)[None, None, :]
            base = lb[:, None, None] * R + rr
            for vert, sgn in ((u, 1), (v, -1)):
                flat = (((base * n + vert[:, None, None]) * P + pp) * L + g).ravel()
                dd = np.broadcast_to((sgn * d)[:, None, None], g.shape)
                da = _u32(dd).ravel()
                db = _u32(dd * idx.astype(np.int64)[:, None, None]).ravel()
                dc = ((dd.astype(np.uint64) * fp) & _LOW32).astype(np.uint32).ravel()
                np.add.at(target[0].reshape(-1), flat, da)
                np.add.at(target[1].reshape(-1), flat, db)
                np.add.at(target[2].reshape(-1), flat, dc)

    def update_batch(
        self, us: np.ndarray, vs: np.ndarray, ds: np.ndarray, bank_limit: np.ndarray | None = None
    ) -> None:
        """Feed updates; update ``t`` reaches banks ``0..bank_limit[t]-1`` (all by default)."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        ds = np.asarray(ds, dtype=np.int64)
        if us.size == 0:
            return
        if np.any(us == vs) or us.min() < 0 or vs.min() < 0 or max(us.max(), vs.max()) >= self.n:
            raise StreamError("update endpoint out of range or self-loop")
        if bank_limit is None:
            bank_limit = np.full(us.shape, self.count, dtype=np.int64)
        reps = np.asarray(bank_limit, dtype=np.int64)
        which = np.repeat(np.arange(us.size), reps)
        offsets = np.arange(which.size) - np.repeat(np.cumsum(reps) - reps, reps)
        banks = offsets.astype(np.int64)
        self._scatter(self.cells, banks, banks, us[which], vs[which], ds[which])

    def bank_state(self, bank: int, removed: Counter | None = None) -> np.ndarray:
        """Copy of one bank with the ``removed`` pair multiplicities subtracted."""
        state = self.cells[:, bank : bank + 1].copy()
        if removed:
            items = sorted(removed.items())
            us = np.array([e[0] for e, _ in items], dtype=np.int64)
            vs = np.array([e[1] for e, _ in items], dtype=np.int64)
            ds = -np.array([x for _, x in items], dtype=np.int64)
            zero = np.zeros(len(items), dtype=np.int64)
            self._scatter(state, np.full(len(items), bank), zero, us, vs, ds)
        return state[:, 0]

    def spanning_forest(self, bank: int = 0, removed: Counter | None = None) -> list[tuple[int, int]]:
        """Borůvka over the bank's samplers; raises ``SketchDecodeError`` unless maximal."""
        state = self.bank_state(bank, removed)
        n = self.n
        uf = _UnionFind(n)
        forest: list[tuple[int, int]] = []
        for r in range(self.rounds):
            roots = np.array([uf.find(x) for x in range(n)])
            uniq, comp = np.unique(roots, return_inverse=True)
            m = uniq.size
            sums = np.zeros((3, m, self.reps, self.levels), dtype=np.uint32)
            for f in range(3):
                np.add.at(sums[f], comp, state[f, r])
            idx, _, status = _decode_cells(sums[0], sums[1], sums[2], self.fkeys[bank, r], self.universe)
            if np.all(status == 1):
                return sorted(forest)
            for ci in np.flatnonzero(status == 0):
                u, v = int(self.pairs.us[idx[ci]]), int(self.pairs.vs[idx[ci]])
                # a genuine cut edge has exactly one endpoint in the component
                if (comp[u] == ci) == (comp[v] == ci):
                    continue
                if uf.union(u, v):
                    forest.append((u, v))
        roots = np.array([uf.find(x) for x in range(n)])
        uniq, comp = np.unique(roots, return_inverse=True)
        sums = np.zeros((3, uniq.size, self.reps, self.levels), dtype=np.uint32)
        for f in range(3):
            np.add.at(sums[f], comp, state[f, 0])
        _, _, status = _decode_cells(sums[0], sums[1], sums[2], self.fkeys[bank, 0], self.universe)
        if np.all(status == 1):
            return sorted(forest)
        raise SketchDecodeError(f"bank {bank}: Borůvka left components with outgoing edges")

    def peel(self, banks: Sequence[int]) -> tuple[MultiGraph, list[list[tuple[int, int]]]]:
        """Edge-disjoint maximal forests from consecutive banks, each peeled off the next."""
        removed: Counter = Counter()
        forests: list[list[tuple[int, int]]] = []
        for j in banks:
            forest = self.spanning_forest(j, removed)
            forests.append(forest)
            if not forest:
                # the residual graph is empty, so every later forest is empty too
                forests.extend([] for _ in range(len(banks) - len(forests)))
                break
            removed.update(forest)
        return MultiGraph(self.n, dict(removed)), forests


class SpanningForestSketch:
    """A single spanning-forest sketch."""

    def __init__(self, n: int, seed: int, fail_prob: float = 0.01):
        self.banks = ForestBanks(n, 1, seed, "spanning", fail_prob)

    def update(self, upd: StreamUpdate) -> None:
        self.banks.update_batch(*_as_arrays([upd]))

    def update_many(self, updates: Sequence[StreamUpdate]) -> None:
        self.banks.update_batch(*_as_arrays(updates))

    def decode(self) -> list[tuple[int, int]]:
        return self.banks.spanning_forest(0)


def spanning_forest_decode(sketch: SpanningForestSketch) -> list[tuple[int, int]]:
    return sketch.decode()


class ConnWitSketch:
    """Union of ``k`` edge-disjoint maximal spanning forests, from ``k`` banks."""

    def __init__(self, n: int, k: int, seed: int, fail_prob: float = 0.01):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.n = n
        self.k = k
        self.banks = ForestBanks(n, k, seed, "connwit", fail_prob)
        self.forests: list[list[tuple[int, int]]] = []

    def update(self, upd: StreamUpdate) -> None:
        self.banks.update_batch(*_as_arrays([upd]))

    def update_many(self, updates: Sequence[StreamUpdate]) -> None:
        self.banks.update_batch(*_as_arrays(updates))

    def decode(self) -> MultiGraph:
        witness, forests = self.banks.peel(range(self.k))
        self.forests = forests
        return witness


def connwit_decode(cw: ConnWitSketch) -> MultiGraph:
    return cw.decode()


class Estimator(str, Enum):
    EXACT = "exact"
    WITNESS = "witness"


@dataclass
class AgmReport:
    """Runtime diagnostics of one decode: witness sizes and the bad events that could be checked."""

    witness_edges: list[int] = field(default_factory=list)
    forests_used: list[int] = field(default_factory=list)
    failed_level: int | None = None
    conn_out_of_range: int | None = None
    deep_connectivity: int | None = None
    low_confidence: int = 0
    max_level_used: int = 0

    def lines(self) -> list[str]:
        out = [
            f"witness_edges={','.join(map(str, self.witness_edges))}",
            f"forests_used={','.join(map(str, self.forests_used))}",
            f"failed_level={'none' if self.failed_level is None else self.failed_level}",
            f"bad_estimate_edges={'none' if self.conn_out_of_range is None else self.conn_out_of_range}",
            f"bad_deep_connectivity_edges={'none' if self.deep_connectivity is None else self.deep_connectivity}",
            f"low_confidence_edges={self.low_confidence}",
            f"max_level_used={self.max_level_used}",
        ]
        return out


def agm_k(n: int, delta: float, C: float) -> int:
    return math.ceil(16 * C * delta**-2 * math.log2(n) ** 3)


class AgmSketch:
    """Geometric-rate sampler feeding one connectivity witness per level.

    Pair ``e`` reaches level ``i`` iff its first ``i`` routing bits are all
    one.  Decoding assigns ``e`` the level ``j_e`` from its estimated edge
    connectivity and keeps it with weight ``2^j_e`` if the level-``j_e``
    witness contains it.

    The number of banks per level is ``min(k, n)`` unless ``k_cap`` says
    otherwise: a witness with at least as many forests as the largest
    pairwise connectivity already holds every live edge, and a simple graph
    has connectivity below ``n``.
    """

    VERSION = 1

    def __init__(
        self,
        n: int,
        delta: float,
        seed: int,
        C: float = 1.0,
        estimator: Estimator | str = Estimator.EXACT,
        k_cap: int | None = None,
        fail_prob: float = 0.01,
    ):
        if n < 4:
            raise ValueError("n must be at least 4")
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.n = n
        self.delta = float(delta)
        self.C = float(C)
        self.seed = seed
        self.estimator = Estimator(estimator)
        self.k = agm_k(n, delta, C)
        self.k_eff = min(self.k, k_cap if k_cap is not None else n)
        self.depth = math.ceil(2 * math.log2(n))
        self.fail_prob = fail_prob
        self.pairs = PairIndex(n)
        self._route_keys = np.array(
            [derive_seed(seed, "agm-route", j) for j in range(1, self.depth + 1)], dtype=np.uint64
        )
        self.banks = ForestBanks(n, (self.depth + 1) * self.k_eff, derive_seed(seed, "agm-witness"), "agm", fail_prob)
        self._live: Counter | None = Counter() if self.estimator is Estimator.EXACT else None
        self.report = AgmReport()

    @property
    def words(self) -> int:
        return self.banks.words

    def route_depth(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Deepest level each pair reaches (0 when its first routing bit is zero)."""
        idx = self.pairs.index(us, vs).astype(np.uint64)
        bits = (keyed_hash(self._route_keys[None, :], idx[:, None]) & np.uint64(1)).astype(np.int64)
        return np.cumprod(bits, axis=1).sum(axis=1)

    def update(self, upd: StreamUpdate) -> None:
        self.update_many([upd])

    def update_many(self, updates: Sequence[StreamUpdate]) -> None:
        if not updates:
            return
        us, vs, ds = _as_arrays(updates)
        self.update_arrays(us, vs, ds)

    def update_arrays(self, us: np.ndarray, vs: np.ndarray, ds: np.ndarray) -> None:
        if us.size == 0:
            return
        depth = self.route_depth(us, vs)
        self.banks.update_batch(us, vs, ds, (depth + 1) * self.k_eff)
        if self._live is not None:
            for u, v, d in zip(us.tolist(), vs.tolist(), ds.tolist()):
                self._live[pair(u, v)] += d

    def recorded_graph(self) -> MultiGraph:
        if self._live is None:
            raise SketchDecodeError("this sketch does not record the live graph")
        if any(x < 0 for x in self._live.values()):
            raise StreamError("recorded live graph has a negative multiplicity")
        return MultiGraph(self.n, {e: x for e, x in self._live.items() if x > 0})

    def witness(self, level: int) -> MultiGraph:
        lo = level * self.k_eff
        try:
            graph, forests = self.banks.peel(range(lo, lo + self.k_eff))
        except SketchDecodeError as exc:
            raise SketchDecodeError(str(exc), level) from exc
        self.report.forests_used.append(sum(1 for f in forests if f))
        return graph

    def _threshold(self) -> float:
        return self.C * math.log2(self.n) ** 3 / self.delta**2

    def level_for(self, lam: float) -> int:
        """``floor(log2(1/min(1, p)))`` for ``p = (2/lam) * C log^3 n / delta^2``."""
        p = 2.0 * self._threshold() / lam
        if p >= 1:
            return 0
        return int(math.floor(math.log2(1.0 / p) + 1e-12))

    def decode(self, reference: MultiGraph | None = None) -> WeightedGraph:
        self.report = AgmReport()
        levels = [self.witness(i) for i in range(self.depth + 1)]
        self.report.witness_edges = [int(g.num_edges()) for g in levels]
        bound = (self.depth + 1) * 3 * self.k_eff * self.n
        if sum(self.report.witness_edges) > bound:
            raise SketchDecodeError(f"witnesses hold more than {bound} edges")
        candidates = sorted(set().union(*(g.edges.keys() for g in levels)))
        lam = self._estimates(levels, candidates)
        weights: dict[tuple[int, int], float] = {}
        for e in candidates:
            j = self.level_for(lam[e])
            if j > self.depth:
                raise SketchDecodeError(f"pair {e} needs level {j} beyond {self.depth}")
            self.report.max_level_used = max(self.report.max_level_used, j)
            mult = levels[j].weight(*e)
            if mult:
                weights[e] = float(2**j * mult)
        truth = reference
        if truth is None and self._live is not None:
            truth = self.recorded_graph()
        if truth is not None:
            self._bad_events(truth, lam, candidates)
        return WeightedGraph(self.n, weights)

    def _estimates(self, levels: list[MultiGraph], candidates: list[tuple[int, int]]) -> dict:
        if not candidates:
            return {}
        if self.estimator is Estimator.EXACT:
            mat = connectivity_matrix(self.recorded_graph())
            return {e: float(mat[e]) for e in candidates}
        mats = [connectivity_matrix(g) for g in levels]
        out = {}
        low = 0
        for e in candidates:
            deep = [i for i, m in enumerate(mats) if m[e] >= self.k_eff]
            if not deep:
                out[e] = float(max(mats[0][e], 1))
                continue
            top = max(deep)
            if deep != list(range(top + 1)):
                low += 1
            out[e] = float(2**top * self.k_eff)
        self.report.low_confidence = low
        return out

    def _bad_events(self, truth: MultiGraph, lam: dict, candidates: list) -> None:
        exact = connectivity_matrix(truth)
        self.report.conn_out_of_range = sum(
            1 for e in candidates if not 0.5 * exact[e] <= lam[e] <= 1.5 * exact[e]
        )
        live = list(truth.edges.keys())
        if not live:
            self.report.deep_connectivity = 0
            return
        arr = np.array(live, dtype=np.int64)
        depth = self.route_depth(arr[:, 0], arr[:, 1])
        mult = {e: truth.weight(*e) for e in live}
        level_mats: dict[int, np.ndarray] = {}
        bad = 0
        for e in live:
            lam_e = exact[e]
            # ideal sampling rate C log^3 n / (lam delta^2), i.e. level_for(2 lam)
            tau = self.level_for(2.0 * lam_e)
            for j in range(max(0, tau - 2), min(tau, self.depth) + 1):
                if j not in level_mats:
                    sub = {f: mult[f] for f, d in zip(live, depth.tolist()) if d >= j}
                    level_mats[j] = connectivity_matrix(MultiGraph(self.n, sub))
                if level_mats[j][e] >= self.k_eff:
                    bad += 1
                    break
        self.report.deep_connectivity = bad

    def to_bytes(self) -> bytes:
        from .blob import pack

        meta = {
            "kind": "agm",
            "n": self.n,
            "delta": self.delta,
            "C": self.C,
            "seed": self.seed,
            "estimator": self.estimator.value,
            "k_cap": self.k_eff,
            "fail_prob": self.fail_prob,
        }
        arrays = {"cells": self.banks.cells}
        if self._live is not None:
            items = sorted((e, x) for e, x in self._live.items() if x != 0)
            arrays["live"] = np.array([[e[0], e[1], x] for e, x in items], dtype=np.int64).reshape(-1, 3)
        return pack(meta, arrays, self.VERSION)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "AgmSketch":
        from .blob import unpack

        meta, arrays = unpack(blob, cls.VERSION)
        if meta.get("kind") != "agm":
            raise ValueError("blob does not hold an AGM sketch")
        sk = cls(
            meta["n"], meta["delta"], meta["seed"], meta["C"], meta["estimator"], meta["k_cap"], meta["fail_prob"]
        )
        sk.banks.cells[...] = arrays["cells"]
        if "live" in arrays and sk._live is not None:
            for u, v, x in arrays["live"].tolist():
                sk._live[(u, v)] = x
        return sk


def agm_update(a: AgmSketch, upd: StreamUpdate) -> None:
    a.update(upd)


def agm_decode(a: AgmSketch, reference: MultiGraph | None = None) -> WeightedGraph:
    return a.decode(reference)


def estimate_connectivity(a: AgmSketch, e: tuple[int, int]) -> float:
    """Connectivity estimate for one pair under the sketch's estimator mode."""
    e = pair(*e)
    if a.estimator is Estimator.EXACT:
        return float(connectivity_matrix(a.recorded_graph())[e])
    levels = [a.witness(i) for i in range(a.depth + 1)]
    return a._estimates(levels, [e])[e]
