"""Balanced sparse cut witnesses and the algorithms that produce them.

A witness for a weighted graph with self-loops ``H`` at sparsity ``psi`` is
either ``BOTTOM`` (``H`` is a ``psi``-expander) or a pair ``(R, nu)`` with
``R`` a sparse, not-too-small, lower-volume side and ``nu`` its volume.

All algorithms take a ``WeightedGraph`` (typically the materialized
boundary-linked view of a cluster) or a ``BoundaryLinkedView``; cuts are
reported in the view's vertex labels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import scipy.linalg

from .graph import (
    BRUTE_FORCE_CAP,
    REL_TOL,
    BoundaryLinkedView,
    Cluster,
    Graph,
    SizeError,
    WeightedGraph,
    close,
    cut_local,
    cut_table,
    make_cluster,
    mask_to_set,
    sparsity_profile,
    vol,
)


class ParameterError(ValueError):
    """A named precondition on the algorithm parameters does not hold."""


class ContractViolation(AssertionError):
    """An algorithm produced output its guarantee rules out."""


@dataclass(frozen=True)
class Bscw:
    R: Cluster | None
    nu: float = 0.0
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    @property
    def is_bottom(self) -> bool:
        return self.R is None

    def __post_init__(self):
        if self.R is not None:
            if not self.R:
                raise ContractViolation("a witness cut must be non-empty")
            if not self.nu > 0:
                raise ContractViolation("a witness volume must be positive")


BOTTOM = Bscw(None)


@dataclass(frozen=True)
class BscaParams:
    alpha: float
    lam: float
    psi: float
    xi: float = 0.0

    def __post_init__(self):
        if self.alpha < 1 or self.lam < 1:
            raise ParameterError("alpha and lambda must be at least 1")
        if not 0 < self.psi < 1:
            raise ParameterError("psi must lie in (0, 1)")
        if not 0 <= self.xi <= 1:
            raise ParameterError("xi must lie in [0, 1]")


class Bsca(Protocol):
    alpha: float
    lam: float

    def __call__(self, H: Graph | BoundaryLinkedView, psi: float) -> Bscw: ...


def _local(H: Graph | BoundaryLinkedView) -> tuple[Graph, Cluster]:
    if isinstance(H, BoundaryLinkedView):
        return H.materialize()
    return H, tuple(range(H.n))


def _relabel(S: Sequence[int], labels: Sequence[int]) -> Cluster:
    return make_cluster(labels[i] for i in S)


def _check_psi(psi: float) -> None:
    if not 0 < psi < 1:
        raise ParameterError(f"psi must lie in (0, 1), got {psi}")


def brute_force_bsca(H: Graph | BoundaryLinkedView, psi: float, cap: int = BRUTE_FORCE_CAP) -> Bscw:
    """Exact (1, 1)-BSCA: the psi-sparse cut of largest min-side volume, or ``BOTTOM``."""
    _check_psi(psi)
    g, labels = _local(H)
    if g.n > cap:
        raise SizeError(f"{g.n} vertices exceed the enumeration cap {cap}")
    if g.n < 2:
        return BOTTOM
    table = cut_table(g, cap)
    if table.total <= 0:
        return Bscw(None, 0.0, ("zero-volume cluster: every cut has infinite sparsity",))
    masks, _, side, phi = sparsity_profile(table)
    sparse = phi < psi
    if not sparse.any():
        return BOTTOM
    top = side[sparse].max()
    cand = masks[sparse & (np.abs(side - top) <= REL_TOL * max(1.0, top))]
    full = (1 << table.k) - 1
    options = []
    for m in cand.tolist():
        for s in (m, full ^ m):
            v = table.vol[s]
            if v < table.total - v or close(v, table.total - v):
                options.append(mask_to_set(s))
    best = min(options)
    R = _relabel(best, labels)
    nu = float(sum(g.degrees()[i] for i in best))
    return Bscw(R, nu)


class BruteForceBsca:
    alpha = 1.0
    lam = 1.0

    def __init__(self, cap: int = BRUTE_FORCE_CAP):
        self.cap = cap

    def __call__(self, H: Graph | BoundaryLinkedView, psi: float) -> Bscw:
        return brute_force_bsca(H, psi, self.cap)


def deloop(G: Graph) -> tuple[WeightedGraph, dict[int, int]]:
    """Replace each self-loop of weight ``w`` at ``u`` by an edge of weight ``w/2`` to a new leaf ``s(u)``."""
    edges = {e: float(x) for e, x in G.edges.items()}
    companion: dict[int, int] = {}
    nxt = G.n
    for u, x in G.loops.items():
        companion[u] = nxt
        edges[(u, nxt)] = float(x) / 2.0
        nxt += 1
    return WeightedGraph(nxt, edges), companion


def lift(X: Sequence[int], companion: dict[int, int]) -> Cluster:
    """``X`` together with the companions of its loop-bearing vertices."""
    return make_cluster(list(X) + [companion[u] for u in X if u in companion])


class SelfLoopBsca:
    """Runs a loop-free BSCA on the delooped graph; a (2 alpha, 4 lambda)-BSCA."""

    def __init__(self, inner: Bsca):
        self.inner = inner
        self.alpha = 2.0 * inner.alpha
        self.lam = 4.0 * inner.lam

    def __call__(self, H: Graph | BoundaryLinkedView, psi: float) -> Bscw:
        return selfloop_bsca(H, psi, self.inner)


def selfloop_bsca(H: Graph | BoundaryLinkedView, psi: float, inner: Bsca) -> Bscw:
    _check_psi(psi)
    if psi > 1.0 / (10.0 * inner.alpha):
        raise ParameterError(f"psi = {psi} exceeds 1/(10 alpha) = {1.0 / (10.0 * inner.alpha)}")
    g, labels = _local(H)
    hat, companion = deloop(g)
    omega = inner(hat, psi)
    if omega.is_bottom:
        return Bscw(None, 0.0, omega.diagnostics)
    X = [v for v in omega.R if v < g.n]
    if not X:
        raise ContractViolation("inner witness consists of companion vertices only")
    if len(X) == g.n:
        raise ContractViolation("inner witness contains every original vertex")
    rest = [v for v in range(g.n) if v not in set(X)]
    vx, vr = vol(g, X), vol(g, rest)
    side = X if vx <= vr else rest
    return Bscw(_relabel(side, labels), float(min(vx, vr)))


def _components(g: Graph, members: Sequence[int]) -> list[list[int]]:
    inside = set(members)
    adj = g.adjacency()
    seen: set[int] = set()
    out = []
    for s in members:
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        stack = [s]
        while stack:
            x = stack.pop()
            for y, w in adj[x].items():
                if w > 0 and y in inside and y not in seen:
                    seen.add(y)
                    comp.append(y)
                    stack.append(y)
        out.append(sorted(comp))
    return out


@dataclass(frozen=True)
class SweepResult:
    cut: Cluster | None
    phi: float
    lambda2: float


class SpectralSweep:
    """Approximate sparsest cut by a sweep over the second generalized eigenvector.

    ``apx`` is a declared factor, not a certified one.
    """

    def __init__(self, apx: float = 2.0):
        self.apx = apx

    def __call__(self, g: Graph) -> SweepResult:
        n = g.n
        deg = g.degrees()
        live = [v for v in range(n) if deg[v] > 0]
        if len(live) < 2:
            return SweepResult(None, math.inf, math.inf)
        comps = _components(g, live)
        total = float(deg.sum())
        if len(comps) > 1:
            comps.sort(key=lambda c: (float(deg[c].sum()), c))
            S = comps[0]
            vs = float(deg[S].sum())
            if vs > total - vs:
                S = [v for v in range(n) if v not in set(S)]
            return SweepResult(make_cluster(S), 0.0, 0.0)
        idx = np.array(live)
        A = np.zeros((len(live), len(live)))
        pos = {v: i for i, v in enumerate(live)}
        for (u, v), w in g.edges.items():
            A[pos[u], pos[v]] = A[pos[v], pos[u]] = w
        L = np.diag(A.sum(axis=1)) - A
        M = np.diag(deg[idx])
        vals, vecs = scipy.linalg.eigh(L, M, subset_by_index=[1, 1])
        x = vecs[:, 0]
        order = np.lexsort((idx, x))
        best, best_phi = None, math.inf
        member = np.zeros(n, dtype=bool)
        cut = 0.0
        vin = 0.0
        adj = g.adjacency()
        for t in range(len(order) - 1):
            v = int(idx[order[t]])
            for y, w in adj[v].items():
                cut += -w if member[y] else w
            member[v] = True
            vin += deg[v]
            m = min(vin, total - vin)
            phi = cut / m if m > 0 else math.inf
            if best is None or phi < best_phi - REL_TOL * max(1.0, best_phi):
                best_phi = phi
                best = t
        S = [int(idx[order[t]]) for t in range(best + 1)]
        vs = float(deg[S].sum())
        if vs > total - vs:
            S = [v for v in range(n) if v not in set(S)]
        return SweepResult(make_cluster(S), best_phi, float(vals[0]))


class IterativeBsca:
    """Peel approximate sparsest cuts until a fifth of the volume is collected or none is sparse."""

    def __init__(self, approximator: SpectralSweep | None = None):
        self.approximator = approximator or SpectralSweep()
        self.alpha = 4.0 * self.approximator.apx
        self.lam = 2.0

    def __call__(self, H: Graph | BoundaryLinkedView, psi: float) -> Bscw:
        return iterative_bsca(H, psi, self.approximator)


def iterative_bsca(H: Graph | BoundaryLinkedView, psi: float, approximator: SpectralSweep) -> Bscw:
    _check_psi(psi)
    g, labels = _local(H)
    total = g.total_volume()
    if g.n < 2:
        return BOTTOM
    if total <= 0:
        return Bscw(None, 0.0, ("zero-volume cluster: every cut has infinite sparsity",))
    R: set[int] = set()
    threshold = 2.0 * psi * approximator.apx
    while True:
        rest = [v for v in range(g.n) if v not in R]
        if len(rest) < 2:
            break
        sub, sub_labels = BoundaryLinkedView(g, tuple(rest), 1.0).materialize()
        res = approximator(sub)
        if res.cut is None or not res.phi < threshold:
            break
        R |= {sub_labels[i] for i in res.cut}
        if vol(g, R) >= total / 5.0:
            break
    if not R:
        return BOTTOM
    side = sorted(R)
    rest = [v for v in range(g.n) if v not in R]
    if vol(g, side) > vol(g, rest):
        side = rest
    return Bscw(_relabel(side, labels), float(vol(g, side)))


class HybridBsca:
    """Brute force up to ``cap`` vertices, the iterative heuristic beyond."""

    def __init__(self, cap: int = BRUTE_FORCE_CAP, fallback: IterativeBsca | None = None):
        self.cap = cap
        self.fallback = fallback or IterativeBsca()
        self.alpha = max(1.0, self.fallback.alpha)
        self.lam = max(1.0, self.fallback.lam)

    def __call__(self, H: Graph | BoundaryLinkedView, psi: float) -> Bscw:
        g, labels = _local(H)
        if g.n <= self.cap:
            out = brute_force_bsca(g, psi, self.cap)
        else:
            out = self.fallback(g, psi)
        if out.is_bottom:
            return out
        return Bscw(_relabel(out.R, labels), out.nu, out.diagnostics)


def _phi(g: Graph, S: Sequence[int], members: Sequence[int]) -> float:
    rest = [v for v in members if v not in set(S)]
    m = min(vol(g, S), vol(g, rest))
    if m <= 0:
        return math.inf
    return cut_local(g, members, S) / m


def bscw_violations(
    H: Graph | BoundaryLinkedView, omega: Bscw, psi: float, alpha: float, lam: float, xi: float = 0.0, cap: int = BRUTE_FORCE_CAP
) -> list[str]:
    """Clauses of the witness definition that ``omega`` breaks, by direct subset enumeration."""
    g, labels = _local(H)
    if g.n > cap:
        raise SizeError(f"{g.n} vertices exceed the enumeration cap {cap}")
    members = list(range(g.n))
    cuts = [
        S for r in range(1, g.n) for S in itertools.combinations(members, r)
    ]
    bad = []
    if omega.is_bottom:
        if any(_phi(g, S, members) < psi for S in cuts):
            bad.append("1: bottom returned but a psi-sparse cut exists")
        return bad
    back = {v: i for i, v in enumerate(labels)}
    if any(v not in back for v in omega.R):
        return ["R: witness leaves the cluster"]
    R = [back[v] for v in omega.R]
    if len(R) == g.n:
        return ["R: witness is the whole cluster"]
    rest = [v for v in members if v not in set(R)]
    vr, vrest = vol(g, R), vol(g, rest)
    if not _phi(g, R, members) < alpha * psi:
        bad.append("2a: witness is not alpha*psi-sparse")
    for S in cuts:
        vs = vol(g, S)
        vo = g.total_volume() - vs
        if _phi(g, S, members) < psi and vs <= vo * (1 + REL_TOL) and vs > lam * vr * (1 + REL_TOL):
            bad.append(f"2b: sparse cut {list(S)} is more balanced than lambda*vol(R)")
            break
    if vr > (1 + xi) * vrest * (1 + REL_TOL):
        bad.append("2c: witness is the larger side")
    if not ((1 - xi) * vr * (1 - REL_TOL) <= omega.nu <= (1 + xi) * vr * (1 + REL_TOL)):
        bad.append("2d: nu is not the witness volume")
    return bad
