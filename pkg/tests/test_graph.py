import numpy as np
import pytest

from conftest import exhaustive_best_pattern
from losalign import dp
from losalign.channel import NormalizedChannel
from losalign.errors import DomainError, SizeError
from losalign.graph import (
    InterferenceGraph,
    TransmitPattern,
    brute_force_optimum,
    build_graph,
    is_feasible,
    mask_to_pattern,
    rate_report,
)


class TestBuildGraph:
    def test_fig1_specific_edges(self, fig1_nc):
        g = build_graph(fig1_nc, T=5)
        # delay 3 from tx 1: slot 1 lands at rx 2 slot 4
        assert g.has_edge((0, 1), (1, 4))
        # delay 0 from tx 3: same-slot collision at rx 2
        assert g.has_edge((2, 1), (1, 1))
        assert not g.has_edge((0, 1), (1, 3))

    def test_single_user_no_edges(self):
        nc = NormalizedChannel.from_lp([[0]])
        g = build_graph(nc, T=7)
        assert len(g.conflicts) == 0 and len(g.directed_edges) == 0

    def test_two_user_zero_delay_count(self):
        # independent enumeration: both directions collide in each of 3 slots
        nc = NormalizedChannel.from_lp([[0, 0], [0, 0]])
        g = build_graph(nc, T=3)
        assert len(g.directed_edges) == 6
        assert len(g.conflicts) == 3     # the two directions collapse per slot
        for t in (1, 2, 3):
            assert g.has_edge((0, t), (1, t))

    def test_edge_set_matches_definition(self, fig4_nc):
        g = build_graph(fig4_nc, T=6)
        expected = set()
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                d = int(fig4_nc.lp[i, j])
                for t in range(1, 7):
                    if 1 <= t + d <= 6:
                        a, b = g.vid(j, t), g.vid(i, t + d)
                        expected.add((min(a, b), max(a, b)))
        assert set(g.conflicts) == expected

    def test_negative_delay_edges_present(self, fig4_nc):
        g = build_graph(fig4_nc, T=5)
        # cross-delay 23 is -2: tx 3 slot 3 lands at rx 2 slot 1
        assert g.has_edge((2, 3), (1, 1))

    def test_degree_bound(self, fig1_nc):
        g = build_graph(fig1_nc, T=12)
        out_deg = {}
        in_deg = {}
        for i, j, t in g.directed_edges:
            out_deg[(j, t)] = out_deg.get((j, t), 0) + 1
            t2 = t + int(fig1_nc.lp[i, j])
            in_deg[(i, t2)] = in_deg.get((i, t2), 0) + 1
        assert max(out_deg.values()) <= 2 and max(in_deg.values()) <= 2
        interior = [(j, t) for j in range(3) for t in range(5, 9)]
        assert all(out_deg.get(v, 0) == 2 for v in interior)
        assert all(in_deg.get(v, 0) == 2 for v in interior)

    def test_dot_export(self, fig4_nc):
        g = build_graph(fig4_nc, T=3)
        dot = g.to_dot()
        assert dot.startswith("digraph") and '"u0t1"' in dot


class TestIsFeasible:
    def test_empty_pattern(self, fig1_nc):
        g = build_graph(fig1_nc, T=6)
        assert is_feasible(TransmitPattern.empty(3, 6), g)

    def test_maximal_set_is_feasible(self, fig1_nc):
        # the optimum found on the graph itself must pass the pairwise check
        g = build_graph(fig1_nc, T=8)
        best = brute_force_optimum(g)
        assert is_feasible(best.pattern, g)

    def test_shared_slot_conflict(self):
        nc = NormalizedChannel.from_lp([[0, 0], [0, 0]])
        g = build_graph(nc, T=2)
        p = TransmitPattern(K=2, T=2, slots=((1,), (1,)))
        assert not is_feasible(p, g)

    def test_dimension_mismatch(self, fig1_nc):
        g = build_graph(fig1_nc, T=6)
        with pytest.raises(DomainError):
            is_feasible(TransmitPattern.empty(3, 5), g)

    def test_direction_irrelevant(self, fig4_nc):
        # feasibility on the reversed channel (lp transposed and negated,
        # which reverses every edge) agrees for all small patterns
        g = build_graph(fig4_nc, T=4)
        rev = NormalizedChannel.from_lp(-fig4_nc.lp.T)
        g_rev = build_graph(rev, T=4)
        assert set(g.conflicts) == set(g_rev.conflicts)
        rng = np.random.default_rng(0)
        for _ in range(50):
            mask = int(rng.integers(0, 1 << 12))
            p = mask_to_pattern(mask, g)
            assert is_feasible(p, g) == is_feasible(p, g_rev)


class TestBruteForce:
    def test_single_user_all_slots(self):
        nc = NormalizedChannel.from_lp([[0]])
        g = build_graph(nc, T=4)
        res = brute_force_optimum(g)
        assert res.alpha == 4
        assert res.pattern.slots == ((1, 2, 3, 4),)

    def test_two_user_zero_delay_alpha(self):
        # oracle: exhaustive scan over all 16 subsets
        nc = NormalizedChannel.from_lp([[0, 0], [0, 0]])
        g = build_graph(nc, T=2)
        oracle_val, _ = exhaustive_best_pattern(g, [1, 1])
        res = brute_force_optimum(g)
        assert res.alpha == oracle_val == 2

    def test_matches_exhaustive_weighted(self, fig4_nc):
        g = build_graph(fig4_nc, T=4)
        weights = [3, 1, 2]
        oracle_val, _ = exhaustive_best_pattern(g, weights)
        res = brute_force_optimum(g, weights)
        assert res.objective == oracle_val
        assert res.alpha is None

    def test_matches_dp_on_fig4(self, fig4_nc):
        g = build_graph(fig4_nc, T=6)
        res = brute_force_optimum(g)
        sol = dp.solve_finite(fig4_nc, 6, boundary="exact")
        assert res.objective == sol.objective

    def test_alpha_monotone_in_horizon(self, fig4_nc):
        alphas = []
        for T in range(1, 8):
            g = build_graph(fig4_nc, T=T)
            alphas.append(brute_force_optimum(g).alpha)
        assert all(a <= b for a, b in zip(alphas, alphas[1:]))

    def test_size_cap(self):
        nc = NormalizedChannel.from_lp([[0, 0], [0, 0]])
        with pytest.raises(SizeError):
            brute_force_optimum(build_graph(nc, T=21))

    def test_deterministic_tie_break(self):
        nc = NormalizedChannel.from_lp([[0, 0], [0, 0]])
        g = build_graph(nc, T=2)
        res1 = brute_force_optimum(g)
        res2 = brute_force_optimum(g)
        assert res1.pattern == res2.pattern
        # among the optimal size-2 sets, user 0 transmitting both slots is
        # lexicographically first in (user, time) order
        assert res1.pattern.slots == ((1, 2), ())


class TestRateReport:
    def test_empty_pattern_zeros(self, fig1_nc):
        rep = rate_report(TransmitPattern.empty(3, 6), fig1_nc)
        assert rep.objective == 0 and rep.per_slot_rate == 0

    def test_per_slot_arithmetic(self):
        nc = NormalizedChannel.from_lp([[0]], r=[1.0])
        p = TransmitPattern(K=1, T=6, slots=((1, 3, 5),))
        rep = rate_report(p, nc)
        assert rep.counts == (3,)
        assert rep.per_user_per_slot == (0.5,)

    def test_unit_snr_gives_one_bit(self):
        nc = NormalizedChannel.from_lp([[0, 0], [0, 0]], r=[1.0, 1.0])
        p = TransmitPattern(K=2, T=4, slots=((1, 2), (3,)))
        rep = rate_report(p, nc)
        assert rep.per_user_bits == (2.0, 1.0)
        assert rep.objective == 3.0


class TestTransmitPattern:
    def test_slot_bounds(self):
        with pytest.raises(DomainError):
            TransmitPattern(K=1, T=3, slots=((4,),))

    def test_duplicates_rejected(self):
        with pytest.raises(DomainError):
            TransmitPattern(K=1, T=3, slots=((2, 2),))

    def test_json_export(self):
        p = TransmitPattern(K=2, T=3, slots=((1, 3), (2,)))
        assert p.to_json_dict() == {"slots": [[1, 3], [2]]}
