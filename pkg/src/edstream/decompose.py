"""Boundary-linked expander decomposition driven by cluster sparsifiers.

``decompose`` and ``trim`` follow the recursive decomposition with trimming,
but run on an explicit work stack so that depth, inner-loop and slot
budgets are checked as hard assertions and the trace is deterministic.
Logarithms are base 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .bscw import Bsca, HybridBsca, ParameterError
from .graph import BoundaryLinkedView, Cluster, MultiGraph, Partition, WeightedGraph, make_cluster
from .sketch import Estimator, StreamUpdate, agm_k, sampler_levels, sampler_reps, _boruvka_rounds
from .sparsifier import Mode, Provisioning, Slot, StreamSource, slot_delta


class TheoryViolation(AssertionError):
    """A bound that the analysis guarantees did not hold; always a bug or a broken assumption."""


@dataclass(frozen=True)
class BldParams:
    n: int
    b: float
    log_phi: float
    k: int
    eps: float | None = None
    alpha: float = 1.0
    lam: float = 1.0
    C: float = 40.0
    c: float = 1.0 / 40.0
    diagnostics: tuple[str, ...] = ()

    @property
    def log_n(self) -> float:
        return math.log2(self.n)

    @property
    def phi(self) -> float:
        return math.exp(self.log_phi)

    @property
    def tau(self) -> float:
        x = math.log(self.b) - self.log_phi
        return math.inf if x > 700 else math.exp(x)

    @property
    def mu(self) -> float:
        return 3.0 * self.C * self.lam + 2.0 * self.alpha

    @property
    def D(self) -> float:
        return 9.0 * self.C * self.lam * self.log_n

    @property
    def depth_budget(self) -> int:
        return math.floor(self.D)

    @property
    def shrink(self) -> float:
        return (1.0 + 1.0 / self.log_n) * self.alpha

    def b_j(self, j: int) -> float:
        return self.b / self.shrink**j

    def phi_j(self, j: int) -> float:
        return math.exp(self.log_phi - j * math.log(self.shrink))

    def psi(self, j: int) -> float:
        return (1.0 + 1.0 / (2.0 * self.log_n)) * self.phi_j(j)

    @property
    def delta(self) -> float:
        return self.c**2 * self.b / self.log_n

    def delta_j(self, j: int) -> float:
        return self.c**2 * self.b_j(j) / self.log_n

    @property
    def inner_budget(self) -> int:
        return math.ceil(1.0 / self.b)

    @property
    def slot_budget(self) -> int:
        return (self.depth_budget + 1) * (1 + (self.k + 1) * self.inner_budget)

    @property
    def gamma(self) -> float:
        return 6.0 * self.alpha ** (self.k + 1)

    def log_crossing_factor(self) -> float:
        """Natural log of ``4 mu phi D e^(2 b mu D)``, the crossing bound per unit volume."""
        return math.log(4.0 * self.mu * self.D) + self.log_phi + 2.0 * self.b * self.mu * self.D

    def crossing_bound(self, volume: float) -> float:
        if volume <= 0:
            return 0.0
        x = self.log_crossing_factor() + math.log(volume)
        return math.inf if x > 700 else math.exp(x)

    def fields(self) -> dict[str, object]:
        return {
            "n": self.n,
            "b": self.b,
            "eps": self.eps if self.eps is not None else "none",
            "phi": self.phi,
            "log_phi": self.log_phi,
            "tau": self.tau,
            "k": self.k,
            "alpha": self.alpha,
            "lambda": self.lam,
            "C": self.C,
            "c": self.c,
            "D": self.D,
            "delta": self.delta,
            "gamma": self.gamma,
            "inner_budget": self.inner_budget,
            "slot_budget": self.slot_budget,
            "diagnostics": "; ".join(self.diagnostics) or "none",
        }


def _choose_k(n: int, b: float, alpha: float, lam: float, k: int | None, notes: list[str]) -> int:
    cap = math.floor(math.log2(n))
    base = b**-0.5 / lam
    if base > 1:
        need = math.ceil(math.log(n**5 * alpha) / math.log(base))
    else:
        need = math.inf
    if k is None:
        k = min(need, cap)
        if need > cap:
            notes.append(f"k lower bound {need} exceeds log n; using k = {cap}")
    elif k < need:
        notes.append(f"k = {k} is below the lower bound {need}")
    k = max(1, int(k))
    if k > max(cap, 1):
        raise ParameterError(f"k = {k} exceeds log n = {math.log2(n):.3f}")
    return k


def derive_params(
    n: int,
    b: float,
    eps: float,
    alpha: float = 1.0,
    lam: float = 1.0,
    C: float = 40.0,
    c: float = 1.0 / 40.0,
    k: int | None = None,
) -> BldParams:
    """Parameters with ``phi`` solved from ``eps`` by the closed formula."""
    if n < 4:
        raise ParameterError("n >= 4 required")
    log_n = math.log2(n)
    if not 0 < b < 1:
        raise ParameterError("b in (0, 1) required")
    if b > 1.0 / log_n:
        raise ParameterError(f"b <= 1/log n violated: b = {b}, 1/log n = {1.0 / log_n}")
    if not n**-2 <= eps <= b * log_n:
        raise ParameterError(f"n^-2 <= eps <= b log n violated: eps = {eps}, range [{n**-2}, {b * log_n}]")
    if alpha < 1 or lam < 1:
        raise ParameterError("alpha, lambda >= 1 required")
    if alpha > 1.0 / (b * log_n):
        raise ParameterError(f"alpha <= 1/(b log n) violated: alpha = {alpha}")
    mu = 3.0 * C * lam + 2.0 * alpha
    D = 9.0 * C * lam * log_n
    log_phi = math.log(eps) - math.log(4.0 * mu * D) - 2.0 * b * mu * D
    notes: list[str] = []
    kk = _choose_k(n, b, alpha, lam, k, notes)
    slack = math.log(b) - log_phi
    if slack <= 0:
        raise ParameterError("phi < b violated")
    notes.append(f"log(b/phi) slack = {slack:.6g}")
    if math.exp(log_phi) == 0.0:
        notes.append("phi underflows double precision; use an explicit phi to run")
    return BldParams(n, b, log_phi, kk, eps, alpha, lam, C, c, tuple(notes))


def params_with_phi(
    n: int,
    b: float,
    phi: float,
    alpha: float = 1.0,
    lam: float = 1.0,
    C: float = 40.0,
    c: float = 1.0 / 40.0,
    k: int | None = None,
    eps: float | None = None,
) -> BldParams:
    """Parameters with an explicit ``phi``; unmet asymptotic preconditions become diagnostics."""
    if n < 4:
        raise ParameterError("n >= 4 required")
    if not 0 < phi < b < 1:
        raise ParameterError(f"0 < phi < b < 1 violated: phi = {phi}, b = {b}")
    if alpha < 1 or lam < 1:
        raise ParameterError("alpha, lambda >= 1 required")
    log_n = math.log2(n)
    notes: list[str] = []
    if b > 1.0 / log_n:
        notes.append("b <= 1/log n not met")
    if alpha > 1.0 / (b * log_n):
        notes.append("alpha <= 1/(b log n) not met")
    if b > c:
        notes.append("b <= c not met")
    kk = _choose_k(n, b, alpha, lam, k, notes)
    return BldParams(n, b, math.log(phi), kk, eps, alpha, lam, C, c, tuple(notes))


@dataclass
class CallRecord:
    cluster: Cluster
    level: int
    branch: str
    witness: Cluster | None = None
    nu: float = 0.0
    volume: float = 0.0
    slots: list[Slot] = field(default_factory=list)
    trim: list[tuple[int, int]] = field(default_factory=list)
    isolated: Cluster = ()


@dataclass
class DecomposeTrace:
    calls: list[CallRecord] = field(default_factory=list)

    @property
    def max_depth(self) -> int:
        return max((c.level for c in self.calls), default=0)

    @property
    def max_inner(self) -> int:
        return max((h for c in self.calls for _, h in c.trim), default=0)

    @property
    def max_break_j(self) -> int:
        """Largest outer iteration in which a trim loop broke (0 if none did)."""
        out = 0
        for c in self.calls:
            for j, _ in c.trim[:-1]:
                out = max(out, j)
        return out

    def slots(self) -> list[Slot]:
        return [s for c in self.calls for s in c.slots]

    def violations(self, params: BldParams) -> list[str]:
        bad = []
        if self.max_depth > params.D:
            bad.append(f"depth {self.max_depth} exceeds D = {params.D}")
        if self.max_inner > params.inner_budget:
            bad.append(f"inner loop ran {self.max_inner} > ceil(1/b) = {params.inner_budget} times")
        if self.max_break_j > params.k:
            bad.append(f"trim broke at j = {self.max_break_j} > k = {params.k}")
        seen: dict[Slot, set[int]] = {}
        for c in self.calls:
            for s in c.slots:
                if s in seen and seen[s] & set(c.cluster):
                    bad.append(f"slot {s} reused on overlapping clusters")
                seen.setdefault(s, set()).update(c.cluster)
        if len(seen) > params.slot_budget:
            bad.append(f"{len(seen)} slots exceed the budget {params.slot_budget}")
        return bad

    def lines(self) -> list[str]:
        out = []
        for i, c in enumerate(self.calls):
            trims = ",".join(f"{j}:{h}" for j, h in c.trim) or "-"
            out.append(
                f"call={i} level={c.level} size={len(c.cluster)} branch={c.branch} nu={c.nu:.6g} "
                f"vol={c.volume:.6g} trims={trims} isolated={len(c.isolated)} "
                f"cluster={' '.join(map(str, c.cluster))}"
            )
        return out


@dataclass
class DecomposeResult:
    clusters: list[Cluster]
    trace: DecomposeTrace

    def partition(self, n: int) -> Partition:
        return Partition(n, tuple(self.clusters))


def _check_runnable(params: BldParams) -> None:
    if params.phi <= 0 or not math.isfinite(params.tau):
        raise ParameterError("phi underflows at this size; supply phi explicitly")


def trim(
    U: Sequence[int], level: int, params: BldParams, providers: Provisioning, bsca: Bsca, record: CallRecord | None = None
) -> tuple[Cluster, bool]:
    """Returns ``(A, True)`` with ``A`` the surviving expander, or ``(R, False)`` with ``R`` a balanced cut."""
    U = make_cluster(U)
    A = U
    tau = params.tau
    for j in range(1, params.k + 2):
        h = 0
        while True:
            h += 1
            if h > params.inner_budget:
                raise TheoryViolation(
                    f"inner loop at level {level}, j = {j} exceeded ceil(1/b) = {params.inner_budget} iterations"
                )
            slot = ("T", level, j, h)
            H = providers.sparsifier(slot, A)
            if record is not None:
                record.slots.append(slot)
            omega = bsca(BoundaryLinkedView(H, A, tau), params.psi(j))
            if omega.is_bottom:
                if record is not None:
                    record.trim.append((j, h))
                return A, True
            vol_u = BoundaryLinkedView(H, U, tau).total_volume()
            scale = 1.0 / (params.C * params.lam)
            if omega.nu >= scale * vol_u:
                if record is not None:
                    record.trim.append((j, h))
                return omega.R, False
            if omega.nu >= scale * vol_u ** (1.0 - (j - 1) / params.k):
                A = make_cluster(set(A) - set(omega.R))
            else:
                if record is not None:
                    record.trim.append((j, h))
                break
        if j == params.k + 1:
            raise TheoryViolation(f"trim at level {level} broke in outer iteration k + 1 = {j}")
    raise TheoryViolation("trim left its outer loop without returning")


def decompose(
    U: Sequence[int], level: int, params: BldParams, providers: Provisioning, bsca: Bsca | None = None
) -> DecomposeResult:
    _check_runnable(params)
    bsca = bsca or HybridBsca()
    tau = params.tau
    trace = DecomposeTrace()
    out: list[Cluster] = []
    start = make_cluster(U)
    if not start:
        raise ValueError("decompose needs a non-empty cluster")
    stack: list[tuple[Cluster, int]] = [(start, level)]
    while stack:
        cl, lv = stack.pop()
        if lv > params.D:
            raise TheoryViolation(f"recursion depth {lv} exceeds D = {params.D}")
        rec = CallRecord(cl, lv, "expander")
        trace.calls.append(rec)
        slot = ("D", lv)
        H = providers.sparsifier(slot, cl)
        rec.slots.append(slot)
        deg = H.degrees()
        iso = tuple(v for v in cl if deg[v] == 0)
        if iso and len(cl) > 1:
            rec.isolated = iso
            out.extend((v,) for v in iso)
            cl = make_cluster(set(cl) - set(iso))
            if not cl:
                rec.branch = "isolated"
                continue
        view = BoundaryLinkedView(H, cl, tau)
        omega = bsca(view, params.psi(0))
        rec.volume = view.total_volume()
        if omega.is_bottom:
            out.append(cl)
            continue
        rec.witness, rec.nu = omega.R, omega.nu
        rest = make_cluster(set(cl) - set(omega.R))
        if omega.nu >= rec.volume / (params.C * params.lam):
            rec.branch = "balanced-recurse"
            stack.append((rest, lv + 1))
            stack.append((omega.R, lv + 1))
            continue
        S, is_exp = trim(cl, lv, params, providers, bsca, rec)
        other = make_cluster(set(cl) - set(S))
        if is_exp:
            rec.branch = "trim-expander"
            out.append(S)
            if other:
                stack.append((other, lv + 1))
        else:
            rec.branch = "trim-balanced"
            stack.append((other, lv + 1))
            stack.append((S, lv + 1))
    if providers.consumed > params.slot_budget:
        raise TheoryViolation(f"{providers.consumed} slots exceed the budget {params.slot_budget}")
    covered = sorted(v for c in out for v in c)
    if covered != list(start):
        raise TheoryViolation("decompose output is not a partition of its input")
    out.sort(key=lambda c: c[0])
    return DecomposeResult(out, trace)


def exact_provisioning(g: MultiGraph, params: BldParams) -> Provisioning:
    return Provisioning(StreamSource.from_graph(g), Mode.EXACT, 0, slot_delta(params.delta, params.n, params.alpha))


def decompose_graph(g: MultiGraph, params: BldParams, bsca: Bsca | None = None) -> DecomposeResult:
    """Exact-mode decomposition of the whole vertex set."""
    return decompose(range(g.n), 0, params, exact_provisioning(g, params), bsca)


def agm_slot_words(n: int, delta: float, C: float = 1.0, k_cap: int | None = None, fail_prob: float = 0.01) -> int:
    """Cells held by one sparsifier slot, without allocating it."""
    depth = math.ceil(2 * math.log2(n))
    k_eff = min(agm_k(n, delta, C), k_cap if k_cap is not None else n)
    universe = max(n * (n - 1) // 2, 1)
    per_bank = _boruvka_rounds(n) * n * sampler_reps(fail_prob) * sampler_levels(universe)
    return 3 * (depth + 1) * k_eff * per_bank


@dataclass
class StreamDecomposition:
    partition: Partition
    trace: DecomposeTrace
    params: BldParams
    slots_used: int
    words_used: int
    words_provisioned: int

    def fields(self) -> dict[str, object]:
        return {
            "clusters": len(self.partition),
            "slots_used": self.slots_used,
            "slot_budget": self.params.slot_budget,
            "words_used": self.words_used,
            "words_provisioned": self.words_provisioned,
            "max_depth": self.trace.max_depth,
            "max_inner": self.trace.max_inner,
        }


def decompose_stream(
    updates: Sequence[StreamUpdate],
    n: int,
    params: BldParams,
    mode: Mode | str = Mode.EXACT,
    seed: int = 0,
    C_agm: float = 1.0,
    estimator: Estimator | str = Estimator.EXACT,
    bsca: Bsca | None = None,
    k_cap: int | None = None,
) -> StreamDecomposition:
    """One pass over the stream feeding every slot, then decompose on the decoded sparsifiers.

    Slots are materialized on first use by replaying the stream (see ``Provisioning``).
    """
    _check_runnable(params)
    mode = Mode(mode)
    source = StreamSource(n, updates)
    source.graph()
    prov = Provisioning(source, mode, seed, slot_delta(params.delta, n, params.alpha), C_agm, Estimator(estimator), k_cap)
    res = decompose(range(n), 0, params, prov, bsca)
    used = sum(prov.words.values())
    if mode is Mode.AGM:
        per_d = agm_slot_words(n, params.delta, C_agm, k_cap)
        per_t = sum(agm_slot_words(n, params.delta_j(j), C_agm, k_cap) for j in range(1, params.k + 2))
        provisioned = (params.depth_budget + 1) * (per_d + params.inner_budget * per_t)
    else:
        provisioned = 0
    return StreamDecomposition(res.partition(n), res.trace, params, prov.consumed, used, provisioned)


@dataclass
class RedResult:
    partitions: list[Partition]
    crossing: list[float]
    residuals: list[MultiGraph]
    traces: list[list[DecomposeTrace]]


def residual_graph(g: MultiGraph, p: Partition) -> MultiGraph:
    """``g`` without every edge that lies inside a cluster of ``p``."""
    lab = p.labels()
    return MultiGraph(g.n, {e: x for e, x in g.edges.items() if lab[e[0]] != lab[e[1]]}, dict(g.loops))


def red_params(n: int, phi: float, b: float | None = None, alpha: float = 1.0, k: int | None = None) -> BldParams:
    """Parameters whose final trimming threshold equals ``phi``.

    Clusters certified by the decomposition are ``phi_{k+1}``-expanders, so
    the decomposition runs at ``phi * shrink^(k+1)``.
    """
    if not 0 < phi < 1:
        raise ParameterError("phi in (0, 1) required")
    log_n = math.log2(n)
    notes: list[str] = []
    kk = _choose_k(n, b if b is not None else 1.0 / log_n, alpha, 1.0, k, notes)
    shrink = (1.0 + 1.0 / log_n) * alpha
    phi_in = phi * shrink ** (kk + 1)
    if b is None:
        b = min(0.95, max(2.0 * phi_in, 1.0 / log_n))
    if not phi_in < b < 1:
        raise ParameterError(f"phi = {phi} too large: needs phi * shrink^(k+1) = {phi_in} < b = {b} < 1")
    return params_with_phi(n, b, phi_in, alpha, k=kk)


def red_offline(
    G: MultiGraph,
    eps: float,
    phi: float,
    levels: int,
    b: float | None = None,
    bsca: Bsca | None = None,
    k: int | None = None,
) -> RedResult:
    """A removal-based sequence of ``levels`` decompositions, each of the residual graph."""
    if levels < 1:
        raise ParameterError("levels >= 1 required")
    params = red_params(max(G.n, 4), phi, b, k=k)
    params = BldParams(
        params.n, params.b, params.log_phi, params.k, eps, params.alpha, params.lam, params.C, params.c, params.diagnostics
    )
    bsca = bsca or HybridBsca()
    current = MultiGraph(G.n, dict(G.edges))
    parts, crossing, residuals, traces = [], [], [], []
    for _ in range(levels):
        residuals.append(current)
        clusters: list[Cluster] = []
        level_traces = []
        for comp in current.components():
            if len(comp) == 1:
                clusters.append(comp)
                continue
            prov = exact_provisioning(current, params)
            res = decompose(comp, 0, params, prov, bsca)
            clusters.extend(res.clusters)
            level_traces.append(res.trace)
        p = Partition(G.n, tuple(clusters))
        parts.append(p)
        crossing.append(p.crossing_edges(current))
        traces.append(level_traces)
        current = residual_graph(current, p)
    return RedResult(parts, crossing, residuals, traces)
