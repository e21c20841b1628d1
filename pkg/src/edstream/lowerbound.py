"""Hard instances for streaming decompositions and the two-party recovery game.

Vertices ``0..n/2-1`` form ``S``, split into ``n/m`` blocks of ``m/2``
consecutive vertices; ``s(i, r)`` is the ``r``-th vertex (1-based) of block
``i`` (1-based).  ``T`` is ``n/2..n-1`` carrying a fixed seeded ``d``-regular
graph, split into groups of ``dm/2`` consecutive vertices.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import scipy.linalg

from .blob import pack, unpack
from .graph import BRUTE_FORCE_CAP, MultiGraph, Pair, Partition, min_sparsity_bruteforce, pair
from .randomness import rng
from .sketch import StreamUpdate


class HardParamsError(ValueError):
    pass


@dataclass(frozen=True)
class HardParams:
    n: int
    d: int
    m: int
    seed: int = 0
    t_seed: int = 0

    def __post_init__(self):
        n, d, m = self.n, self.d, self.m
        if not 3 <= d < m < n:
            raise HardParamsError("3 <= d < m < n required")
        if n % 2 or m % 2:
            raise HardParamsError("n and m must be even")
        if n % m:
            raise HardParamsError("m must divide n")
        if n % (d * m):
            raise HardParamsError("dm must divide n")
        if m // 2 < 2:
            raise HardParamsError("blocks need at least two vertices")

    @property
    def half(self) -> int:
        return self.n // 2

    @property
    def block_size(self) -> int:
        return self.m // 2

    @property
    def num_blocks(self) -> int:
        return self.n // self.m

    @property
    def group_size(self) -> int:
        return self.d * self.m // 2

    @property
    def num_groups(self) -> int:
        return self.n // (self.d * self.m)

    @property
    def p_er(self) -> float:
        return min(1.0, 4.0 * self.d / self.m)

    def warnings(self) -> list[str]:
        return ["ER probability 4d/m capped at 1"] if 4 * self.d > self.m else []


def s_vertex(p: HardParams, i: int, r: int) -> int:
    """``s_{i,r}`` with 1-based block ``i`` and 1-based position ``r``."""
    return (i - 1) * p.block_size + (r - 1)


def block_of(p: HardParams, s: int) -> int:
    return s // p.block_size + 1


def t_group(p: HardParams, g: int) -> range:
    """Vertices of the 1-based group ``T_g``."""
    start = p.half + (g - 1) * p.group_size
    return range(start, start + p.group_size)


def random_regular(N: int, d: int, seed: int, label: str = "regular", max_restarts: int = 1000) -> list[Pair]:
    """Simple ``d``-regular graph on ``0..N-1`` by random pairing with restarts."""
    if N * d % 2 or d >= N:
        raise HardParamsError(f"no simple {d}-regular graph on {N} vertices")
    gen = rng(seed, label, N, d)
    for _ in range(max_restarts):
        points = list(np.repeat(np.arange(N), d))
        edges: set[Pair] = set()
        stuck = False
        while points:
            for _attempt in range(50):
                a, b = gen.choice(len(points), size=2, replace=False)
                u, v = int(points[a]), int(points[b])
                if u != v and pair(u, v) not in edges:
                    break
            else:
                stuck = True
                break
            edges.add(pair(u, v))
            for idx in sorted((a, b), reverse=True):
                points[idx] = points[-1]
                points.pop()
        if not stuck:
            return sorted(edges)
    raise HardParamsError("regular graph generation failed after retries")


def normalized_gap(n: int, edges: Sequence[Pair], vertices: Sequence[int] | None = None) -> float:
    """Second smallest eigenvalue of the normalized Laplacian on ``vertices``."""
    vs = list(vertices) if vertices is not None else list(range(n))
    pos = {v: i for i, v in enumerate(vs)}
    A = np.zeros((len(vs), len(vs)))
    for u, v in edges:
        if u in pos and v in pos:
            A[pos[u], pos[v]] += 1
            A[pos[v], pos[u]] += 1
    deg = A.sum(axis=1)
    if len(vs) < 2 or np.any(deg == 0):
        return 0.0
    dinv = 1.0 / np.sqrt(deg)
    L = np.eye(len(vs)) - dinv[:, None] * A * dinv[None, :]
    return float(scipy.linalg.eigvalsh(L, subset_by_index=[1, 1])[0])


def sample_er(N: int, p: float, gen: np.random.Generator, offset: int = 0) -> list[Pair]:
    iu, iv = np.triu_indices(N, 1)
    keep = gen.random(iu.size) < p
    return [(int(a) + offset, int(b) + offset) for a, b in zip(iu[keep], iv[keep])]


@dataclass(frozen=True)
class HardInstance:
    params: HardParams
    blocks: tuple[tuple[Pair, ...], ...]
    K: int
    t_edges: tuple[Pair, ...]
    t_gap: float
    graph: MultiGraph = field(compare=False)

    @property
    def S(self) -> range:
        return range(0, self.params.half)

    @property
    def T(self) -> range:
        return range(self.params.half, self.params.n)

    def block(self, i: int) -> range:
        start = (i - 1) * self.params.block_size
        return range(start, start + self.params.block_size)

    @property
    def psi_t(self) -> float:
        return self.t_gap / 2.0

    @property
    def g_prime(self) -> MultiGraph:
        return MultiGraph(self.params.n, [e for blk in self.blocks for e in blk])

    @property
    def important_vertices(self) -> tuple[int, ...]:
        return tuple(s_vertex(self.params, i, self.K) for i in range(1, self.params.num_blocks + 1))

    @property
    def important_edges(self) -> list[Pair]:
        vstar = set(self.important_vertices)
        return [e for blk in self.blocks for e in blk if e[0] in vstar or e[1] in vstar]

    def st_edges(self, k: int | None = None) -> list[Pair]:
        return st_edges(self.params, self.K if k is None else k)


def st_edges(p: HardParams, k: int) -> list[Pair]:
    """``E_k(S,T)``: ``s_{i,k}`` joined to every vertex of ``T_{ceil(i/d)}``."""
    if not 1 <= k <= p.block_size:
        raise HardParamsError(f"k must lie in [1, {p.block_size}]")
    out = []
    for i in range(1, p.num_blocks + 1):
        s = s_vertex(p, i, k)
        out.extend((s, t) for t in t_group(p, math.ceil(i / p.d)))
    return out


def fixed_t_graph(p: HardParams) -> tuple[list[Pair], float]:
    local = random_regular(p.half, p.d, p.t_seed, "hard-T")
    edges = [(u + p.half, v + p.half) for u, v in local]
    return edges, normalized_gap(p.half, local)


_T_CACHE: dict[tuple[int, int, int], tuple[list[Pair], float]] = {}


def _t_graph(p: HardParams) -> tuple[list[Pair], float]:
    key = (p.n, p.d, p.t_seed)
    if key not in _T_CACHE:
        _T_CACHE[key] = fixed_t_graph(p)
    return _T_CACHE[key]


def from_factors(p: HardParams, blocks: Sequence[Sequence[Pair]], K: int) -> HardInstance:
    """Rebuild an instance from its random part ``G'`` (the blocks) and ``K``."""
    t_edges, gap = _t_graph(p)
    blocks = tuple(tuple(sorted(pair(*e) for e in blk)) for blk in blocks)
    if len(blocks) != p.num_blocks:
        raise HardParamsError("wrong number of blocks")
    for i, blk in enumerate(blocks, 1):
        lo, hi = (i - 1) * p.block_size, i * p.block_size
        if any(not (lo <= u < hi and lo <= v < hi) for u, v in blk):
            raise HardParamsError(f"block {i} has an edge outside its vertices")
    edges = [e for blk in blocks for e in blk] + list(t_edges) + st_edges(p, K)
    inst = HardInstance(p, blocks, K, tuple(t_edges), gap, MultiGraph(p.n, edges))
    check_structure(inst)
    return inst


def gen_hard(p: HardParams) -> HardInstance:
    blocks = []
    for i in range(1, p.num_blocks + 1):
        gen = rng(p.seed, "hard-block", i)
        blocks.append(sample_er(p.block_size, p.p_er, gen, (i - 1) * p.block_size))
    K = int(rng(p.seed, "hard-K").integers(1, p.block_size + 1))
    return from_factors(p, blocks, K)


def check_structure(inst: HardInstance) -> None:
    """Raises ``AssertionError`` unless the degree and incidence invariants hold."""
    p = inst.params
    g = inst.graph
    half = p.half
    st = [(u, v) for (u, v), x in g.edges.items() for _ in range(int(x)) if (u < half) != (v < half)]
    if len(st) != p.d * p.n // 2:
        raise AssertionError(f"|E(S,T)| = {len(st)}, expected {p.d * p.n // 2}")
    t_count = Counter(v for _, v in st)
    s_count = Counter(u for u, _ in st)
    if any(t_count[t] != p.d for t in range(half, p.n)):
        raise AssertionError("some vertex of T does not have exactly d edges into S")
    if set(s_count) != set(inst.important_vertices):
        raise AssertionError("E(S,T) is not incident exactly on the important vertices")
    if any(c != p.group_size for c in s_count.values()):
        raise AssertionError("an important vertex does not have dm/2 edges into T")
    tdeg = Counter()
    for (u, v), x in g.edges.items():
        if u >= half and v >= half:
            tdeg[u] += x
            tdeg[v] += x
    if any(tdeg[t] != p.d for t in range(half, p.n)):
        raise AssertionError("G[T] is not d-regular")
    for (u, v) in g.edges:
        if u < half and v < half and block_of(p, u) != block_of(p, v):
            raise AssertionError("an S-edge joins two blocks")


def instance_text(inst: HardInstance) -> str:
    """Graph text format followed by a commented metadata block."""
    from .formats import format_graph

    p = inst.params
    meta = {
        "n": p.n,
        "d": p.d,
        "m": p.m,
        "seed": p.seed,
        "t_seed": p.t_seed,
        "K": inst.K,
        "block_size": p.block_size,
        "blocks": p.num_blocks,
        "important_vertices": list(inst.important_vertices),
        "t_spectral_gap": inst.t_gap,
    }
    return format_graph(inst.graph) + "# meta " + json.dumps(meta, sort_keys=True) + "\n"


def parse_instance_meta(text: str) -> dict:
    for line in text.splitlines():
        if line.startswith("# meta "):
            return json.loads(line[len("# meta ") :])
    raise ValueError("no metadata block")


@dataclass
class ErReport:
    N: int
    p: float
    trials: int
    bad: int
    degree_bad: int
    expansion_bad: int
    exact: bool
    bound: float

    @property
    def frequency(self) -> float:
        return self.bad / self.trials if self.trials else 0.0

    def fields(self) -> dict[str, object]:
        return {
            "N": self.N,
            "p": self.p,
            "trials": self.trials,
            "bad_events": self.bad,
            "bad_frequency": self.frequency,
            "degree_failures": self.degree_bad,
            "expansion_failures": self.expansion_bad,
            "expansion_exact": self.exact,
            "theoretical_bound": self.bound,
        }


def er_expansion_ok(N: int, edges: Sequence[Pair], cap: int = BRUTE_FORCE_CAP) -> tuple[bool, bool]:
    """``(Phi >= 1/3, exact)``; a graph with an isolated vertex is never counted as an expander."""
    g = MultiGraph(N, list(edges))
    if np.any(g.degrees() == 0):
        return False, True
    if N <= cap:
        return min_sparsity_bruteforce(g, cap)[0] >= 1.0 / 3.0, True
    return normalized_gap(N, edges) / 2.0 >= 1.0 / 3.0, False


def check_er_block(N: int, p: float, trials: int, seed: int = 0, cap: int = BRUTE_FORCE_CAP) -> ErReport:
    if N < 10:
        raise HardParamsError("N >= 10 required")
    dbar = p * (N - 1)
    bad = deg_bad = exp_bad = 0
    exact = True
    for t in range(trials):
        edges = sample_er(N, p, rng(seed, "er-check", N, p, t))
        deg = np.zeros(N)
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        dfail = bool(np.any(np.abs(deg - dbar) > dbar / 11.0))
        ok, ex = er_expansion_ok(N, edges, cap)
        exact &= ex
        deg_bad += dfail
        exp_bad += not ok
        bad += dfail or not ok
    return ErReport(N, p, trials, bad, deg_bad, exp_bad, exact, 4.0 * N * math.exp(-p * N / 600.0))


@dataclass(frozen=True)
class BlockDegrees:
    block: int
    mean_degree: float
    min_degree: int
    max_degree: int
    vertex_fraction: float

    def mean_within(self, target: float, slack: float = 0.1) -> bool:
        return abs(self.mean_degree - target) <= slack * target

    def all_within(self, target: float, slack: float = 0.1) -> bool:
        return self.vertex_fraction == 1.0


def block_degrees(inst: HardInstance, slack: float = 0.1) -> list[BlockDegrees]:
    """Per block degree summary against the target ``2d``."""
    p = inst.params
    target = 2.0 * p.d
    out = []
    for i, blk in enumerate(inst.blocks, 1):
        deg = Counter()
        for u, v in blk:
            deg[u] += 1
            deg[v] += 1
        ds = np.array([deg[v] for v in inst.block(i)])
        within = np.abs(ds - target) <= slack * target
        out.append(BlockDegrees(i, float(ds.mean()), int(ds.min()), int(ds.max()), float(within.mean())))
    return out


class RedStreamingAlgorithm(Protocol):
    """A streaming two-level decomposition with serializable state."""

    n: int

    def feed(self, updates: Sequence[StreamUpdate]) -> None: ...

    def serialize(self) -> bytes: ...

    @classmethod
    def deserialize(cls, blob: bytes) -> "RedStreamingAlgorithm": ...

    def finish(self) -> tuple[Partition, Partition]: ...


class SingletonStrawman:
    """Outputs all-singleton partitions at both levels; keeps nothing but ``n``."""

    VERSION = 1

    def __init__(self, n: int):
        self.n = n

    def feed(self, updates: Sequence[StreamUpdate]) -> None:
        pass

    def serialize(self) -> bytes:
        return pack({"kind": "singletons", "n": self.n}, {}, self.VERSION)

    @classmethod
    def deserialize(cls, blob: bytes) -> "SingletonStrawman":
        meta, _ = unpack(blob, cls.VERSION)
        return cls(meta["n"])

    def finish(self) -> tuple[Partition, Partition]:
        return Partition.singletons(self.n), Partition.singletons(self.n)


class ExactRedOracle:
    """Stores every live edge and runs the offline two-level decomposition at the end."""

    VERSION = 1

    def __init__(self, n: int, eps: float, phi: float):
        self.n = n
        self.eps = eps
        self.phi = phi
        self.live: Counter = Counter()

    def feed(self, updates: Sequence[StreamUpdate]) -> None:
        for up in updates:
            e = pair(up.u, up.v)
            self.live[e] += up.sign
            if self.live[e] == 0:
                del self.live[e]

    def serialize(self) -> bytes:
        items = sorted(self.live.items())
        arr = np.array([[u, v, x] for (u, v), x in items], dtype=np.int64).reshape(-1, 3)
        return pack({"kind": "exact-red", "n": self.n, "eps": self.eps, "phi": self.phi}, {"edges": arr}, self.VERSION)

    @classmethod
    def deserialize(cls, blob: bytes) -> "ExactRedOracle":
        meta, arrays = unpack(blob, cls.VERSION)
        alg = cls(meta["n"], meta["eps"], meta["phi"])
        for u, v, x in arrays["edges"].tolist():
            alg.live[(u, v)] = x
        return alg

    def finish(self) -> tuple[Partition, Partition]:
        from .decompose import red_offline

        res = red_offline(MultiGraph(self.n, dict(self.live)), self.eps, self.phi, 2)
        return res.partitions[0], res.partitions[1]


def non_isolated(p: Partition) -> set[int]:
    return {v for c in p.clusters if len(c) > 1 for v in c}


@dataclass
class RecoverOutcome:
    params: HardParams
    eps: float
    F: set[Pair]
    E_prime: set[Pair]
    message_bits: int
    blob_bytes: int
    accepted_k: list[int]
    non_isolated_counts: list[int]
    important_fraction: float | None

    @property
    def xi(self) -> float:
        return self.eps * self.params.m

    @property
    def hits(self) -> int:
        return len(self.F & self.E_prime)

    @property
    def small_flag(self) -> bool:
        return len(self.F) <= 6.0 * self.xi * len(self.E_prime)

    @property
    def learn_flag(self) -> bool:
        return self.hits >= len(self.E_prime) / 10.0

    @property
    def recovered(self) -> bool:
        return self.small_flag and self.learn_flag

    def fields(self) -> dict[str, object]:
        return {
            "n": self.params.n,
            "d": self.params.d,
            "m": self.params.m,
            "seed": self.params.seed,
            "eps": self.eps,
            "xi": self.xi,
            "F_size": len(self.F),
            "F_hits": self.hits,
            "E_prime_size": len(self.E_prime),
            "flag_F_small": self.small_flag,
            "flag_F_learns": self.learn_flag,
            "recovered": self.recovered,
            "message_bits": self.message_bits,
            "blob_bytes": self.blob_bytes,
            "accepted_k": self.accepted_k,
            "non_isolated_level2": self.non_isolated_counts,
            "important_crossing_fraction": self.important_fraction if self.important_fraction is not None else "none",
        }


def _alice(alg: RedStreamingAlgorithm, inst: HardInstance) -> bytes:
    ups = [StreamUpdate("+", u, v) for u, v in inst.g_prime.edge_list()]
    ups += [StreamUpdate("+", u, v) for u, v in inst.t_edges]
    alg.feed(ups)
    return alg.serialize()


def recover_sim(factory, inst: HardInstance, eps: float) -> RecoverOutcome:
    """Play the recovery game: Alice streams ``G'`` and ``G[T]``, Bob only sees her blob.

    ``factory(n)`` builds Alice's algorithm; Bob's clones come from its class's ``deserialize``.
    """
    p = inst.params
    alice = factory(p.n)
    alg_cls = type(alice)
    blob = _alice(alice, inst)
    del alice
    F: set[Pair] = set()
    accepted, counts = [], []
    important = None
    limit = 3.0 * eps * p.d * p.n
    for k in range(1, p.block_size + 1):
        clone = alg_cls.deserialize(blob)
        clone.feed([StreamUpdate("+", u, v) for u, v in st_edges(p, k)])
        first, second = clone.finish()
        alive = non_isolated(second)
        counts.append(len(alive))
        if k == inst.K:
            important = special_edge_fraction(inst, first)
        if len(alive) <= limit:
            accepted.append(k)
            Fk = set()
            for i in range(1, p.num_blocks + 1):
                sk = s_vertex(p, i, k)
                Fk |= {pair(s, sk) for s in inst.block(i) if s in alive and s != sk}
            if len(Fk) > p.num_blocks * len(alive):
                raise AssertionError("F_k exceeds blocks times non-isolated vertices")
            F |= Fk
    if len(F) > p.block_size * max(counts, default=0) * p.num_blocks:
        raise AssertionError("F exceeds its counting bound")
    E_prime = set(inst.g_prime.edges)
    return RecoverOutcome(p, eps, F, E_prime, len(blob) * 8, len(blob), accepted, counts, important)


def special_edge_fraction(inst: HardInstance, partition: Partition) -> float | None:
    """``|E* \\ U| / |E*|``: the share of important edges that cross the partition."""
    imp = inst.important_edges
    if not imp:
        return None
    lab = partition.labels()
    return sum(1 for u, v in imp if lab[u] != lab[v]) / len(imp)


@dataclass
class SpecialEdgeReport:
    fraction: float | None
    preconditions: dict[str, bool]

    @property
    def applicable(self) -> bool:
        return all(self.preconditions.values())

    @property
    def threshold_pass(self) -> bool | None:
        if not self.applicable or self.fraction is None:
            return None
        return self.fraction >= 0.8

    def fields(self) -> dict[str, object]:
        out: dict[str, object] = {"fraction": self.fraction if self.fraction is not None else "none"}
        out.update({f"pre_{k}": v for k, v in self.preconditions.items()})
        out["threshold_checked"] = self.applicable
        tp = self.threshold_pass
        out["threshold_pass"] = "informational" if tp is None else tp
        return out


def check_special_edges(
    inst: HardInstance, partition: Partition, eps: float | None = None, phi: float | None = None, psi: float | None = None
) -> SpecialEdgeReport:
    p = inst.params
    psi = inst.psi_t if psi is None else psi
    blocks_ok = True
    for i, blk in enumerate(inst.blocks, 1):
        ok, _ = er_expansion_ok(p.block_size, [(u - (i - 1) * p.block_size, v - (i - 1) * p.block_size) for u, v in blk])
        if not ok:
            blocks_ok = False
            break
    if blocks_ok:
        blocks_ok = all(b.vertex_fraction == 1.0 for b in block_degrees(inst))
    pre = {
        "eps_small": eps is not None and eps <= 1e-5 * psi * p.d / p.m,
        "phi_large": phi is not None and phi >= 11.0 / p.m,
        "n_large": p.n >= 100 * p.m,
        "m_large": p.m >= 500,
        "blocks_regular_expanders": blocks_ok,
    }
    return SpecialEdgeReport(special_edge_fraction(inst, partition), pre)
