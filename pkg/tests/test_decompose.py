from __future__ import annotations

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import cliques, heavy_pendant, structured_battery
from edstream.bscw import BruteForceBsca, HybridBsca, ParameterError
from edstream.decompose import (
    BldParams,
    DecomposeTrace,
    TheoryViolation,
    decompose,
    decompose_graph,
    decompose_stream,
    derive_params,
    exact_provisioning,
    params_with_phi,
    red_offline,
    trim,
)
from edstream.graph import BoundaryLinkedView, MultiGraph, Partition, min_sparsity_bruteforce
from edstream.sketch import StreamUpdate, insertions
from edstream.sparsifier import Mode

B, PHI = 0.15, 0.12


def certified(g: MultiGraph, clusters, params: BldParams) -> bool:
    floor = params.phi_j(params.k + 1)
    for c in clusters:
        if 1 < len(c) <= 20:
            value, _ = min_sparsity_bruteforce(BoundaryLinkedView(g, c, params.tau))
            if value < floor - 1e-9:
                return False
    return True


class TestParams:
    def test_k_is_log_n(self):
        p = derive_params(256, 1 / 64, 1 / 8)
        assert p.k == 8

    def test_eps_above_range(self):
        with pytest.raises(ParameterError, match="eps"):
            derive_params(256, 1 / 64, 1.0)

    def test_b_precondition_named(self):
        with pytest.raises(ParameterError, match="1/log n"):
            derive_params(256, 0.5, 0.01)

    def test_phi_formula_reevaluated(self):
        n, b, eps, C = 256, 1 / 64, 1 / 8, 40.0
        p = derive_params(n, b, eps)
        mu = 3 * C + 2
        D = 9 * C * math.log2(n)
        # phi = eps / (4 mu D exp(2 b mu D)), compared in logs since it underflows
        expect = math.log(eps) - math.log(4 * mu * D) - 2 * b * mu * D
        assert p.log_phi == pytest.approx(expect, rel=1e-12)
        assert p.D == pytest.approx(2880.0)
        assert p.delta == pytest.approx((1 / 40) ** 2 * b / 8)

    def test_schedules(self):
        p = params_with_phi(64, 0.1, 0.01)
        for j in range(p.k + 2):
            assert p.b_j(j) / p.phi_j(j) == pytest.approx(p.tau)
            assert p.delta_j(j) == pytest.approx(p.c**2 * p.b_j(j) / 6)
        assert p.gamma == 6.0
        assert p.inner_budget == 10

    def test_explicit_phi_needs_phi_below_b(self):
        with pytest.raises(ParameterError):
            params_with_phi(16, 0.1, 0.2)

    def test_underflowing_phi_refuses_to_run(self):
        p = derive_params(64, 1 / 6, 0.5)
        with pytest.raises(ParameterError, match="underflow"):
            decompose_graph(cliques(4, 4), BldParams(8, p.b, p.log_phi, p.k))


class TestDecompose:
    def test_expander_kept_whole(self):
        g = cliques(8)
        res = decompose_graph(g, params_with_phi(8, B, PHI))
        assert res.clusters == [tuple(range(8))]

    def test_two_disjoint_k5(self):
        g = cliques(5, 5)
        res = decompose_graph(g, params_with_phi(10, 0.5, 0.1))
        assert res.clusters == [(0, 1, 2, 3, 4), (5, 6, 7, 8, 9)]
        assert res.partition(10).crossing_edges(g) == 0

    def test_two_k8_with_bridge(self):
        g = cliques(8, 8, bridges=((7, 8),))
        p = params_with_phi(16, B, PHI)
        res = decompose_graph(g, p)
        assert res.partition(16).crossing_edges(g) == 1
        assert certified(g, res.clusters, p)
        assert res.partition(16).crossing_edges(g) <= p.crossing_bound(g.total_volume())

    def test_pendant_trimmed(self):
        g = heavy_pendant(8, 13, 8)
        p = params_with_phi(g.n, B, PHI)
        prov = exact_provisioning(g, p)
        A, ok = trim(range(g.n), 0, p, prov, BruteForceBsca())
        assert ok and A == tuple(range(8))
        assert certified(g, [A], p)

    def test_trim_expander_immediately(self):
        g = cliques(8)
        p = params_with_phi(8, B, PHI)
        A, ok = trim(range(8), 0, p, exact_provisioning(g, p), BruteForceBsca())
        assert ok and A == tuple(range(8))

    def test_trim_balanced_cut_immediately(self):
        g = cliques(5, 5, bridges=((0, 5),))
        p = params_with_phi(10, B, PHI)
        R, ok = trim(range(10), 0, p, exact_provisioning(g, p), BruteForceBsca())
        assert not ok and set(R) in ({0, 1, 2, 3, 4}, {5, 6, 7, 8, 9})

    def test_isolated_vertices_become_singletons(self):
        g = MultiGraph(7, list(cliques(5).edges))
        res = decompose_graph(g, params_with_phi(7, B, PHI))
        assert sorted(res.clusters) == [(0, 1, 2, 3, 4), (5,), (6,)]

    def test_depth_budget_enforced(self):
        p = params_with_phi(8, B, PHI)
        with pytest.raises(TheoryViolation):
            decompose(range(8), math.floor(p.D) + 1, p, exact_provisioning(cliques(8), p))

    def test_trace_lines_and_invariants(self):
        g = cliques(4, 4, 4, bridges=((0, 4), (4, 8)))
        p = params_with_phi(12, B, PHI)
        res = decompose_graph(g, p)
        assert res.trace.violations(p) == []
        assert len(res.trace.lines()) == len(res.trace.calls)
        assert all(line.startswith("call=") for line in res.trace.lines())

    def test_trace_reports_reuse(self):
        t = DecomposeTrace()
        from edstream.decompose import CallRecord

        t.calls = [CallRecord((0, 1), 0, "expander", slots=[("D", 0)]), CallRecord((1, 2), 0, "expander", slots=[("D", 0)])]
        assert any("reused" in v for v in t.violations(params_with_phi(8, B, PHI)))

    @given(st.integers(0, 10**6))
    def test_output_is_partition_and_certified(self, seed):
        rnd = random.Random(seed)
        n = rnd.randint(4, 12)
        g = MultiGraph(n, oracles.random_simple(n, rnd.uniform(0.2, 0.7), rnd))
        p = params_with_phi(n, B, PHI)
        res = decompose_graph(g, p)
        assert sorted(v for c in res.clusters for v in c) == list(range(n))
        assert certified(g, res.clusters, p)
        assert res.trace.violations(p) == []

    @pytest.mark.parametrize("name,g", structured_battery(), ids=lambda x: x if isinstance(x, str) else "")
    def test_battery_slot_budget(self, name, g):
        p = params_with_phi(g.n, B, PHI)
        prov = exact_provisioning(g, p)
        res = decompose(range(g.n), 0, p, prov, HybridBsca())
        assert prov.consumed <= p.slot_budget
        assert res.trace.violations(p) == []


class TestStream:
    def test_empty_stream(self):
        res = decompose_stream([], 6, params_with_phi(6, B, PHI))
        assert res.partition == Partition.singletons(6)

    def test_full_churn(self):
        pairs = list(cliques(6).edges)
        ups = insertions(pairs) + [StreamUpdate("-", u, v) for u, v in pairs]
        for mode in Mode:
            res = decompose_stream(ups, 6, params_with_phi(6, B, PHI), mode, seed=1)
            assert res.partition == Partition.singletons(6)

    def test_agm_matches_exact_on_two_k5(self):
        g = cliques(5, 5)
        ups = insertions(g.edge_list())
        p = params_with_phi(10, B, PHI)
        exact = decompose_stream(ups, 10, p).partition
        agree = sum(decompose_stream(ups, 10, p, Mode.AGM, seed=s).partition == exact for s in range(5))
        assert agree >= 4

    def test_space_accounting(self):
        ups = insertions(cliques(4, 4).edge_list())
        p = params_with_phi(8, B, PHI)
        res = decompose_stream(ups, 8, p, Mode.AGM, seed=0)
        assert res.words_used > 0 and res.words_provisioned >= res.words_used
        assert res.slots_used <= p.slot_budget
        assert decompose_stream(ups, 8, p).words_used == 0


class TestRed:
    def test_single_level_matches_decomposition(self):
        g = cliques(6, 6, bridges=((0, 6),))
        res = red_offline(g, 0.5, 0.05, 1)
        assert len(res.partitions) == 1 and res.crossing == [1]

    def test_disjoint_cliques_second_level_singletons(self):
        g = cliques(4, 5)
        res = red_offline(g, 0.5, 0.05, 2)
        assert res.crossing[0] == 0
        assert res.residuals[1].num_edges() == 0
        assert res.partitions[1] == Partition.singletons(9)

    def test_residual_has_no_intra_cluster_edges(self):
        g = cliques(5, 5, 5, bridges=((0, 5), (1, 6), (5, 10)))
        res = red_offline(g, 0.5, 0.05, 3)
        for i, p in enumerate(res.partitions[:-1]):
            nxt = res.residuals[i + 1]
            assert not p.intra_pairs(nxt)
            assert set(nxt.edges) == set(res.residuals[i].edges) - p.intra_pairs(res.residuals[i])

    def test_levels_must_be_positive(self):
        with pytest.raises(ParameterError):
            red_offline(cliques(4), 0.5, 0.05, 0)
