from __future__ import annotations

from collections import Counter

import networkx as nx
import pytest

from edstream.graph import Partition
from edstream.lowerbound import (
    ExactRedOracle,
    HardParams,
    HardParamsError,
    SingletonStrawman,
    block_degrees,
    check_er_block,
    check_special_edges,
    from_factors,
    gen_hard,
    instance_text,
    parse_instance_meta,
    random_regular,
    recover_sim,
    s_vertex,
)

SMALL = HardParams(192, 4, 24, seed=2)


def st_structure_oracle(inst) -> tuple[Counter, Counter]:
    """Per-vertex counts of S-T edges, recomputed from the raw edge list."""
    half = inst.params.half
    t_side, s_side = Counter(), Counter()
    for u, v in inst.graph.edge_list():
        if (u < half) != (v < half):
            s, t = min(u, v), max(u, v)
            s_side[s] += 1
            t_side[t] += 1
    return s_side, t_side


class TestParams:
    @pytest.mark.parametrize("n,d,m", [(100, 4, 24), (96, 2, 24), (96, 4, 96), (90, 3, 12), (96, 5, 24)])
    def test_invalid(self, n, d, m):
        with pytest.raises(HardParamsError):
            HardParams(n, d, m)

    def test_derived_sizes(self):
        p = HardParams(480, 4, 24)
        assert (p.block_size, p.num_blocks, p.group_size, p.num_groups) == (12, 20, 48, 5)
        assert p.p_er == pytest.approx(4 * 4 / 24)

    def test_probability_capped(self):
        p = HardParams(96, 4, 12)
        assert p.p_er == 1.0 and p.warnings()

    def test_labelling(self):
        assert s_vertex(SMALL, 1, 1) == 0 and s_vertex(SMALL, 2, 3) == 14


class TestInstance:
    def test_structure(self):
        inst = gen_hard(HardParams(480, 4, 24, seed=5))
        s_side, t_side = st_structure_oracle(inst)
        assert sum(s_side.values()) == 960
        assert all(t_side[t] == 4 for t in inst.T)
        assert set(s_side) == set(inst.important_vertices)
        assert all(s_side[s] == 4 * 24 // 2 for s in inst.important_vertices)

    def test_important_edges(self):
        inst = gen_hard(SMALL)
        vstar = set(inst.important_vertices)
        expect = sorted(e for e in inst.g_prime.edges if vstar & set(e))
        assert sorted(inst.important_edges) == expect

    def test_round_trip(self):
        inst = gen_hard(SMALL)
        back = from_factors(SMALL, inst.blocks, inst.K)
        assert back == inst and back.graph == inst.graph
        assert instance_text(back) == instance_text(inst)

    def test_deterministic_and_seed_sensitive(self):
        assert instance_text(gen_hard(SMALL)) == instance_text(gen_hard(SMALL))
        other = HardParams(192, 4, 24, seed=3)
        assert instance_text(gen_hard(other)) != instance_text(gen_hard(SMALL))

    def test_metadata(self):
        inst = gen_hard(SMALL)
        meta = parse_instance_meta(instance_text(inst))
        assert meta["K"] == inst.K and meta["important_vertices"] == list(inst.important_vertices)

    def test_t_graph_is_regular_expander(self):
        inst = gen_hard(SMALL)
        g = nx.Graph(list(inst.t_edges))
        assert g.number_of_nodes() == SMALL.half and set(dict(g.degree()).values()) == {4}
        assert inst.psi_t > 0

    def test_random_regular(self):
        edges = random_regular(30, 3, 1)
        g = nx.Graph(edges)
        assert len(edges) == 45 and set(dict(g.degree()).values()) == {3}

    def test_bad_blocks_rejected(self):
        inst = gen_hard(SMALL)
        blocks = list(inst.blocks)
        blocks[0] = blocks[0] + ((0, 50),)
        with pytest.raises(HardParamsError):
            from_factors(SMALL, blocks, inst.K)


class TestEr:
    def test_near_clique_expands(self):
        rep = check_er_block(16, 0.9, 200, seed=0)
        assert rep.expansion_bad == 0 and rep.exact

    def test_empty_graph_fails(self):
        rep = check_er_block(12, 0.0, 20)
        assert rep.expansion_bad == 20 and rep.frequency == 1.0

    def test_sampled_regime(self):
        rep = check_er_block(64, 0.5, 100, seed=1)
        assert not rep.exact
        assert rep.frequency <= rep.bound
        assert rep.fields()["theoretical_bound"] == pytest.approx(4 * 64 * 2.718281828459045 ** (-32 / 600))

    def test_small_n_rejected(self):
        with pytest.raises(HardParamsError):
            check_er_block(8, 0.5, 1)

    def test_block_degree_summary(self):
        inst = gen_hard(SMALL)
        rows = block_degrees(inst)
        assert len(rows) == SMALL.num_blocks
        for row in rows:
            blk = inst.blocks[row.block - 1]
            assert row.mean_degree == pytest.approx(2 * len(blk) / SMALL.block_size)


class FixedSecondLevel:
    """Outputs the same second level regardless of its input."""

    def __init__(self, n: int):
        self.n = n

    def feed(self, updates):
        pass

    def serialize(self) -> bytes:
        return self.n.to_bytes(4, "little")

    @classmethod
    def deserialize(cls, blob: bytes):
        return cls(int.from_bytes(blob, "little"))

    def finish(self):
        second = Partition(self.n, ((0, 1, 2),) + tuple((v,) for v in range(3, self.n)))
        return Partition.singletons(self.n), second


class Spy(SingletonStrawman):
    built = 0

    def __init__(self, n: int):
        Spy.built += 1
        super().__init__(n)


class TestRecover:
    def test_strawman(self):
        out = recover_sim(SingletonStrawman, gen_hard(SMALL), 0.1)
        assert out.F == set() and not out.learn_flag and not out.recovered
        assert out.message_bits == 8 * out.blob_bytes

    def test_exact_oracle(self):
        inst = gen_hard(SMALL)
        out = recover_sim(lambda n: ExactRedOracle(n, 0.1, 0.1), inst, 0.1)
        f = out.fields()
        assert {"flag_F_small", "flag_F_learns", "important_crossing_fraction"} <= set(f)
        assert out.message_bits == 8 * out.blob_bytes
        assert 0.0 <= out.important_fraction <= 1.0
        assert out.hits == len(out.F & set(inst.g_prime.edges))

    def test_identical_clones_counting_bound(self):
        out = recover_sim(FixedSecondLevel, gen_hard(SMALL), 0.1)
        assert len(out.F) <= SMALL.block_size * 3 * SMALL.num_blocks
        assert out.non_isolated_counts == [3] * SMALL.block_size

    def test_bob_builds_only_from_blob(self):
        Spy.built = 0
        recover_sim(Spy, gen_hard(SMALL), 0.1)
        assert Spy.built == 1 + SMALL.block_size  # Alice, then one clone per k via deserialize


class TestSpecialEdges:
    def test_whole_and_singletons(self):
        inst = gen_hard(SMALL)
        assert check_special_edges(inst, Partition.whole(SMALL.n)).fraction == 0.0
        assert check_special_edges(inst, Partition.singletons(SMALL.n)).fraction == 1.0

    def test_preconditions_unmet_is_informational(self):
        inst = gen_hard(SMALL)
        rep = check_special_edges(inst, Partition.singletons(SMALL.n), 0.1, 0.1)
        assert not rep.applicable and rep.threshold_pass is None
        assert rep.fields()["threshold_pass"] == "informational"
