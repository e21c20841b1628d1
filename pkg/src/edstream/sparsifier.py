"""Cluster-sparsifier providers and the cluster-sparsifier predicate checker.

A provider owns one slot: an independently seeded sketch that is decoded at
most once.  ``Provisioning`` hands slots to a decomposition run, caches each
decoded sparsifier, and checks that every cluster served from one slot is
disjoint from the others, which is the only reuse the analysis allows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, Sequence

import numpy as np

from .graph import BRUTE_FORCE_CAP, REL_TOL, Cluster, Graph, MultiGraph, WeightedGraph, cut_table, make_cluster
from .randomness import derive_seed, rng
from .sketch import AgmSketch, Estimator, StreamUpdate, _as_arrays, live_graph


class Mode(str, Enum):
    EXACT = "exact"
    AGM = "agm"


class ProvisioningError(RuntimeError):
    """A slot was decoded twice or served overlapping clusters."""


Slot = tuple[Hashable, ...]


class StreamSource:
    """A recorded update stream; sketches are built by replaying it."""

    def __init__(self, n: int, updates: Sequence[StreamUpdate]):
        self.n = n
        self.updates = list(updates)
        self._graph: MultiGraph | None = None
        self._arrays = None

    @classmethod
    def from_graph(cls, g: MultiGraph) -> "StreamSource":
        if g.loops:
            raise ValueError("streams carry no self-loops")
        return cls(g.n, [StreamUpdate("+", u, v) for u, v in g.edge_list()])

    def graph(self) -> MultiGraph:
        if self._graph is None:
            self._graph = live_graph(self.n, self.updates)
        return self._graph

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._arrays is None:
            if self.updates:
                self._arrays = _as_arrays(self.updates)
            else:
                z = np.zeros(0, dtype=np.int64)
                self._arrays = (z, z.copy(), z.copy())
        return self._arrays


class SparsifierProvider:
    """One slot of the sparsifier distribution."""

    def __init__(
        self,
        mode: Mode | str,
        delta: float,
        seed: int,
        slot: Slot,
        source: StreamSource,
        C: float = 1.0,
        estimator: Estimator | str = Estimator.EXACT,
        k_cap: int | None = None,
    ):
        self.mode = Mode(mode)
        self.delta = delta
        self.seed = seed
        self.slot = tuple(slot)
        self.source = source
        self.C = C
        self.estimator = Estimator(estimator)
        self.k_cap = k_cap
        self.consumed = False
        self.words = 0
        self.sketch: AgmSketch | None = None

    def build(self) -> None:
        """Feed the stream into this slot's sketch (no-op in exact mode)."""
        if self.mode is Mode.EXACT or self.sketch is not None:
            return
        sk = AgmSketch(
            self.source.n, self.delta, derive_seed(self.seed, "sparsifier", *self.slot), self.C, self.estimator, self.k_cap
        )
        sk.update_arrays(*self.source.arrays())
        self.sketch = sk
        self.words = sk.words

    def provide(self, U: Sequence[int] | None = None) -> WeightedGraph:
        if self.consumed:
            raise ProvisioningError(f"slot {self.slot} was already decoded in this run")
        self.consumed = True
        if self.mode is Mode.EXACT:
            return self.source.graph().to_weighted()
        self.build()
        assert self.sketch is not None
        H = self.sketch.decode()
        # the decoded sketch is not needed again; drop its cells
        self.sketch = None
        return H


def provide(p: SparsifierProvider, U: Sequence[int] | None = None) -> WeightedGraph:
    return p.provide(U)


@dataclass
class Provisioning:
    """All sparsifier slots of one decomposition run.

    Slots are materialized lazily: a slot's sketch is built by replaying the
    recorded stream when the slot is first requested.  The sketch depends
    only on the stream and the slot's seed, so this yields the same state as
    building every slot during the pass.
    """

    source: StreamSource
    mode: Mode
    seed: int
    delta_for: Callable[[Slot], float]
    C: float = 1.0
    estimator: Estimator = Estimator.EXACT
    k_cap: int | None = None
    decoded: dict[Slot, WeightedGraph] = field(default_factory=dict)
    served: dict[Slot, set[int]] = field(default_factory=dict)
    words: dict[Slot, int] = field(default_factory=dict)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.estimator = Estimator(self.estimator)

    def provider(self, slot: Slot) -> SparsifierProvider:
        return SparsifierProvider(
            self.mode, self.delta_for(slot), self.seed, slot, self.source, self.C, self.estimator, self.k_cap
        )

    def sparsifier(self, slot: Slot, U: Sequence[int]) -> WeightedGraph:
        slot = tuple(slot)
        members = set(U)
        if slot in self.decoded:
            if self.served[slot] & members:
                raise ProvisioningError(f"slot {slot} asked for overlapping clusters")
            self.served[slot] |= members
            return self.decoded[slot]
        p = self.provider(slot)
        H = p.provide(U)
        self.decoded[slot] = H
        self.served[slot] = members
        self.words[slot] = p.words
        return H

    @property
    def consumed(self) -> int:
        return len(self.decoded)


@dataclass
class SparsifierCheck:
    delta: float
    local_pass: bool
    global_pass: bool
    worst_local_ratio: float
    worst_global_ratio: float
    local_violation: Cluster | None
    global_violation: Cluster | None
    local_cuts: int
    global_cuts: int
    global_probabilistic: bool

    @property
    def passed(self) -> bool:
        return self.local_pass and self.global_pass

    @property
    def worst_ratio(self) -> float:
        return max(self.worst_local_ratio, self.worst_global_ratio)

    def fields(self) -> dict[str, object]:
        return {
            "passed": self.passed,
            "delta": self.delta,
            "local_pass": self.local_pass,
            "global_pass": self.global_pass,
            "worst_local_ratio": self.worst_local_ratio,
            "worst_global_ratio": self.worst_global_ratio,
            "local_violation": list(self.local_violation) if self.local_violation else "none",
            "global_violation": list(self.global_violation) if self.global_violation else "none",
            "local_cuts": self.local_cuts,
            "global_cuts": self.global_cuts,
            "global_probabilistic": self.global_probabilistic,
        }


@dataclass(frozen=True)
class GlobalCheck:
    passed: bool
    worst_ratio: float
    violation: Cluster | None
    cuts: int
    probabilistic: bool


def _ratios(err: np.ndarray, scale: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), np.where(err > REL_TOL, np.inf, 0.0))
    return np.where(err <= REL_TOL * np.maximum(1.0, scale), 0.0, r)


def _additive_table(values: Sequence[float]) -> np.ndarray:
    out = np.zeros(1)
    for x in values:
        out = np.concatenate([out, out + x])
    return out


def _mask_members(masks: np.ndarray, labels: Sequence[int]) -> Cluster:
    m = int(masks)
    return make_cluster(labels[i] for i in range(len(labels)) if m >> i & 1)


def check_global(G: Graph, H: Graph, delta: float, seed: int = 0, cap: int = BRUTE_FORCE_CAP) -> GlobalCheck:
    """``(1-delta) cut_G(S) <= cut_H(S) <= (1+delta) cut_G(S)`` on all (or sampled) cuts."""
    n = G.n
    if n < 2:
        return GlobalCheck(True, 0.0, None, 0, False)
    if n <= cap:
        tg, th = cut_table(G, cap), cut_table(H, cap)
        half = 1 << (n - 1)
        cg, ch = tg.cut[1:half], th.cut[1:half]
        r = _ratios(np.abs(ch - cg), cg)
        i = int(np.argmax(r))
        ok = bool(r[i] <= delta + REL_TOL)
        bad = None if ok else _mask_members(i + 1, list(range(n)))
        return GlobalCheck(ok, float(r[i]), bad, half - 1, False)
    gen = rng(seed, "global-cuts", n)
    samples = 10 * n * n
    X = gen.random((samples, n)) < 0.5
    X = np.vstack([X, np.eye(n, dtype=bool)])
    sizes = X.sum(axis=1)
    X = X[(sizes > 0) & (sizes < n)]
    worst, where = 0.0, None
    gu, gv, gw = G.edge_arrays()
    hu, hv, hw = H.edge_arrays()
    for lo in range(0, X.shape[0], 4096):
        blk = X[lo : lo + 4096]
        cg = (blk[:, gu] != blk[:, gv]) @ gw if gw.size else np.zeros(blk.shape[0])
        ch = (blk[:, hu] != blk[:, hv]) @ hw if hw.size else np.zeros(blk.shape[0])
        r = _ratios(np.abs(ch - cg), cg)
        i = int(np.argmax(r))
        if r[i] > worst:
            worst, where = float(r[i]), tuple(int(v) for v in np.flatnonzero(blk[i]))
    ok = worst <= delta + REL_TOL
    return GlobalCheck(ok, worst, None if ok else where, int(X.shape[0]), True)


def check_cluster_sparsifier(
    G: Graph,
    H: Graph,
    U: Sequence[int],
    delta: float,
    seed: int = 0,
    cap: int = BRUTE_FORCE_CAP,
    global_check: GlobalCheck | None = None,
) -> SparsifierCheck:
    """Exhaustive local condition on ``U`` plus the global cut condition.

    ``global_check`` may be passed in to reuse one global test for many clusters.
    """
    labels = make_cluster(U, G.n)
    k = len(labels)
    if k > cap:
        raise ValueError(f"cluster of {k} vertices exceeds the enumeration cap {cap}")
    inside = set(labels)
    index = {v: i for i, v in enumerate(labels)}

    def local_graph(g: Graph) -> WeightedGraph:
        edges = {(index[u], index[v]): float(x) for (u, v), x in g.edges.items() if u in inside and v in inside}
        return WeightedGraph(k, edges)

    tg, th = cut_table(local_graph(G), cap), cut_table(local_graph(H), cap)
    adj = G.adjacency()
    out = [sum(x for w, x in adj[v].items() if w not in inside) for v in labels]
    total = tg.cut + _additive_table(out)
    err = np.abs(th.cut - tg.cut)
    r = _ratios(err, total)[1:]
    i = int(np.argmax(r)) if r.size else 0
    worst_local = float(r[i]) if r.size else 0.0
    local_ok = worst_local <= delta + REL_TOL
    local_bad = None if local_ok else _mask_members(i + 1, labels)
    gc = global_check if global_check is not None else check_global(G, H, delta, seed, cap)
    return SparsifierCheck(
        delta,
        local_ok,
        gc.passed,
        worst_local,
        gc.worst_ratio,
        local_bad,
        gc.violation,
        max(len(r), 0),
        gc.cuts,
        gc.probabilistic,
    )


def slot_delta(delta: float, n: int, alpha: float) -> Callable[[Slot], float]:
    """``delta`` for decomposition slots, ``delta_j`` for trimming slots ``("T", l, j, h)``."""
    shrink = alpha * (1.0 + 1.0 / math.log2(n))

    def f(slot: Slot) -> float:
        if slot and slot[0] == "T":
            return delta * shrink ** (-int(slot[2]))
        return delta

    return f
