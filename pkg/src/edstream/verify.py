"""Ground-truth checks for expander decompositions and their variants.

Clusters up to the enumeration cap are checked exactly; larger ones are
reported as unchecked and never fail a report on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .graph import BRUTE_FORCE_CAP, REL_TOL, BoundaryLinkedView, Cluster, Graph, MultiGraph, Partition, min_sparsity_bruteforce

VERIFIED = "verified"
FAILED = "failed"
UNCHECKED = "unchecked"


@dataclass(frozen=True)
class ClusterCheck:
    index: int
    size: int
    status: str
    min_phi: float
    witness: Cluster


@dataclass
class EdReport:
    eps: float
    phi: float
    tau: float
    crossing: float
    num_edges: float
    clusters: list[ClusterCheck] = field(default_factory=list)
    implied_ed_pass: bool | None = None

    @property
    def crossing_pass(self) -> bool:
        return self.crossing <= self.eps * self.num_edges * (1 + REL_TOL) + REL_TOL

    def count(self, status: str) -> int:
        return sum(1 for c in self.clusters if c.status == status)

    @property
    def expansion_pass(self) -> bool:
        return self.count(FAILED) == 0

    @property
    def failures(self) -> int:
        return int(not self.crossing_pass) + self.count(FAILED)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.implied_ed_pass is not False

    def worst(self, limit: int = 5) -> list[ClusterCheck]:
        checked = [c for c in self.clusters if c.status != UNCHECKED]
        return sorted(checked, key=lambda c: (c.min_phi, c.index))[:limit]

    def fields(self) -> dict[str, object]:
        out: dict[str, object] = {
            "passed": self.passed,
            "eps": self.eps,
            "phi": self.phi,
            "tau": self.tau,
            "crossing_edges": self.crossing,
            "num_edges": self.num_edges,
            "crossing_fraction": self.crossing / self.num_edges if self.num_edges else 0.0,
            "property1_pass": self.crossing_pass,
            "property2_pass": self.expansion_pass,
            "clusters": len(self.clusters),
            "verified": self.count(VERIFIED),
            "failed": self.count(FAILED),
            "unchecked": self.count(UNCHECKED),
            "unchecked_vertices": sum(c.size for c in self.clusters if c.status == UNCHECKED),
        }
        if self.implied_ed_pass is not None:
            out["implied_ed_pass"] = self.implied_ed_pass
        for c in self.worst():
            out[f"worst_cluster_{c.index}"] = f"size={c.size} min_phi={c.min_phi!r} status={c.status}"
        return out


def _check(G: Graph, partition: Partition, eps: float, phi: float, tau: float, cap: int) -> EdReport:
    if partition.n != G.n:
        raise ValueError(f"partition covers {partition.n} vertices, graph has {G.n}")
    rep = EdReport(eps, phi, tau, partition.crossing_edges(G), G.num_edges())
    for i, c in enumerate(partition.clusters):
        if len(c) > cap:
            rep.clusters.append(ClusterCheck(i, len(c), UNCHECKED, math.nan, ()))
            continue
        value, side = min_sparsity_bruteforce(BoundaryLinkedView(G, c, tau), cap)
        ok = value >= phi - REL_TOL * max(1.0, phi)
        rep.clusters.append(ClusterCheck(i, len(c), VERIFIED if ok else FAILED, value, side))
    return rep


def verify_ed(G: Graph, partition: Partition, eps: float, phi: float, cap: int = BRUTE_FORCE_CAP) -> EdReport:
    """Crossing edges at most ``eps |E|`` and every induced cluster a ``phi``-expander."""
    return _check(G, partition, eps, phi, 0.0, cap)


def verify_bld(
    G: Graph, partition: Partition, b: float, eps: float, phi: float, gamma: float, cap: int = BRUTE_FORCE_CAP
) -> EdReport:
    """As ``verify_ed`` but expansion ``phi/gamma`` is measured with ``b/phi`` loops per boundary edge."""
    rep = _check(G, partition, eps, phi / gamma, b / phi, cap)
    if rep.passed:
        rep.implied_ed_pass = verify_ed(G, partition, eps, phi / gamma, cap).passed
        if not rep.implied_ed_pass:
            raise AssertionError("a boundary-linked decomposition failed as a plain decomposition")
    return rep


def residual(G: MultiGraph, partition: Partition) -> MultiGraph:
    """``G`` minus all edges with both ends in one cluster."""
    lab = partition.labels()
    return MultiGraph(G.n, {e: x for e, x in G.edges.items() if lab[e[0]] != lab[e[1]]}, dict(G.loops))


@dataclass
class RedReport:
    levels: list[EdReport]
    edges: list[float]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.levels)

    @property
    def failures(self) -> int:
        return sum(r.failures for r in self.levels)

    def fields(self) -> dict[str, object]:
        out: dict[str, object] = {"passed": self.passed, "levels": len(self.levels), "failures": self.failures}
        for i, r in enumerate(self.levels, 1):
            for k, v in r.fields().items():
                out[f"level{i}_{k}"] = v
        return out


def verify_red(
    G: MultiGraph, partitions: Sequence[Partition], eps: float, phi: float, cap: int = BRUTE_FORCE_CAP
) -> RedReport:
    if not partitions:
        raise ValueError("at least one level is required")
    current = G
    reports, edges = [], []
    for p in partitions:
        reports.append(verify_ed(current, p, eps, phi, cap))
        edges.append(current.num_edges())
        current = residual(current, p)
    return RedReport(reports, edges)
