"""Tests for codesets.py: PD set algebra, Delta, identity report."""

import pytest
import numpy as np

from codesets import (
    as_mask, build_partition, check_identities, delta, frozen_count, frozen_sets, indices,
)
from verify import brute_force_identities, brute_force_sets


def _random_triple(rng, n):
    g_amp = rng.random(n) < rng.random()
    g_e = rng.random(n) < rng.random()
    g_ep = g_e | (rng.random(n) < rng.random())
    return g_amp, g_e, g_ep


class TestBuildPartition:

    def test_worked_example(self, worked_partition):
        p = worked_partition
        assert indices(p.p1) == {1, 2}
        assert indices(p.p2) == set()
        assert indices(p.s_in_degr) == {0}
        assert indices(p.p1_prime) == {1}
        assert indices(p.p2_prime) == set()
        assert indices(p.s_in_pd) == {0, 1}
        assert indices(p.b_both) == {3}
        assert p.delta_count == 1
        assert p.m == 1

    def test_conjugation_has_no_promotions(self, conjugation_partition):
        p = conjugation_partition
        assert not p.p1_prime.any()
        assert p.delta_count == 0
        assert np.array_equal(p.s_in_pd, p.s_in_degr)

    def test_perfect_channel(self, perfect_partition):
        p = perfect_partition
        assert p.s_in_degr.all() and p.s_in_pd.all()
        for name in ("p1", "p2", "p1_prime", "p2_prime", "b_both"):
            assert not getattr(p, name).any()

    def test_phase_sets_must_nest(self):
        with pytest.raises(ValueError, match="inconsistent PD classification"):
            build_partition({0}, {0, 1}, {0}, 4)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError, match="inconsistent PD classification"):
            build_partition({0, 4}, set(), set(), 4)

    def test_accepts_masks(self):
        mask = np.array([True, True, True, False])
        p = build_partition(mask, {0}, {0, 1}, 4)
        assert indices(p.s_in_pd) == {0, 1}

    def test_mask_length_checked(self):
        with pytest.raises(ValueError, match="inconsistent PD classification"):
            as_mask(np.zeros(3, dtype=bool), 4)

    def test_partition_is_immutable(self, worked_partition):
        with pytest.raises(ValueError):
            worked_partition.p1[0] = True

    def test_sizes(self, worked_partition):
        sizes = worked_partition.sizes()
        assert sizes["G_amp"] == 3
        assert sizes["P1"] == 2
        assert sizes["Sin_pd"] == 2
        assert sizes["B_both"] == 1


class TestDelta:

    def test_single_promotion(self):
        p = build_partition({2, 5}, set(), {5}, 8)
        assert indices(p.p1) == {2, 5}
        assert delta(p) == 1

    def test_no_promotion(self, conjugation_partition):
        assert delta(conjugation_partition) == 0

    def test_full_promotion(self):
        p = build_partition({0, 1, 2}, set(), {0, 1, 2}, 4)
        assert delta(p) == 3


class TestFrozenSets:

    def test_worked_example(self, worked_partition):
        amp_frozen, phase_frozen = frozen_sets(worked_partition)
        assert indices(amp_frozen) == {2}
        assert indices(phase_frozen) == set()
        assert frozen_count(worked_partition) == 2

    def test_conjugation(self, conjugation_partition):
        amp_frozen, phase_frozen = frozen_sets(conjugation_partition)
        assert np.array_equal(amp_frozen, conjugation_partition.p1)
        assert np.array_equal(phase_frozen, conjugation_partition.p2)

    def test_full_promotion(self):
        p = build_partition({0, 1}, set(), {0, 1}, 4)
        amp_frozen, phase_frozen = frozen_sets(p)
        assert not amp_frozen.any() and not phase_frozen.any()


class TestCheckIdentities:

    def test_worked_example(self, worked_partition):
        report = check_identities(worked_partition)
        assert report["passed"], report["failed"]
        assert report["counts"]["S_bad"] == 2
        assert report["counts"]["frozen"] == 2

    def test_empty_channel(self):
        report = check_identities(build_partition(set(), set(), set(), 8))
        assert report["passed"]
        assert report["counts"]["B_both"] == 8

    def test_conjugation_frozen_union(self, conjugation_partition):
        p = conjugation_partition
        report = check_identities(p)
        assert report["asserted"]["frozen_union_count"]
        both_sides = indices(p.s_in_degr) | indices(p.p1) | indices(p.p2)
        assert len(both_sides) == report["counts"]["Sin_degr"] + report["counts"]["P1"] + report["counts"]["P2"]

    def test_reported_entries_present(self, worked_partition):
        reported = check_identities(worked_partition)["reported"]
        assert set(reported) == {"promoted_in_g_amp", "frozen_in_g_amp", "g_amp_plus_unassigned",
                                 "outside_p1p_covered", "frozen_union_drops_p2"}

    def test_p2_frozen_is_reported_not_asserted(self):
        # P2 \ P2' nonempty: frozen phase indices sit outside G_amp
        p = build_partition({0}, {1}, {1}, 4)
        report = check_identities(p)
        assert report["passed"]
        assert report["reported"]["frozen_in_g_amp"] is False

    def test_randomized_partitions(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = 1 << int(rng.integers(2, 7))
            report = check_identities(build_partition(*_random_triple(rng, n), n))
            assert report["passed"], report["failed"]
            counts = report["counts"]
            assert counts["Sin_pd"] + counts["S_bad"] == n
            assert counts["Sin_pd"] == counts["Sin_degr"] + counts["P1p"]


class TestBruteForceOracle:

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    def test_agrees_with_masks(self, n):
        rng = np.random.default_rng(n)
        for _ in range(300):
            g_amp, g_e, g_ep = _random_triple(rng, n)
            partition = build_partition(g_amp, g_e, g_ep, n)
            oracle = brute_force_sets(indices(g_amp), indices(g_e), indices(g_ep), n)
            for name, members in oracle.items():
                assert indices(getattr(partition, name)) == members, name
            assert all(brute_force_identities(oracle, indices(g_amp), n).values())

    def test_enlarging_eprime_never_shrinks_pd(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            n = 32
            g_amp, g_e, g_ep = _random_triple(rng, n)
            wider = g_ep | (rng.random(n) < 0.3)
            before = build_partition(g_amp, g_e, g_ep, n).s_in_pd.sum()
            after = build_partition(g_amp, g_e, wider, n).s_in_pd.sum()
            assert after >= before
