"""
PD codeword-set algebra for pdpolar.
Builds P1, P2, P1', P2', S_in^degr, S_in^conj.PD and B from the three
classified good sets, computes Delta, and checks the set identities.

Index sets are boolean numpy masks of length n.
"""

import sys
import json
from dataclasses import dataclass

import numpy as np

from logger import get_logger

log = get_logger("codesets")


def as_mask(index_set, n):
    """Accept a length-n boolean mask or any iterable of indices in [0, n)."""
    if isinstance(index_set, np.ndarray) and index_set.dtype == bool:
        if index_set.shape != (n,):
            raise ValueError(f"inconsistent PD classification: mask length {index_set.size} != {n}")
        return index_set.copy()

    idx = np.fromiter((int(i) for i in index_set), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"inconsistent PD classification: index outside [0, {n})")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return mask


def indices(mask):
    """Sorted index set of a mask, as a Python set."""
    return set(np.flatnonzero(mask).tolist())


def _count(mask):
    return int(np.count_nonzero(mask))


@dataclass(frozen=True)
class CodeSetPartition:
    n: int
    g_amp: np.ndarray
    g_phase_e: np.ndarray
    g_phase_eprime: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p1_prime: np.ndarray
    p2_prime: np.ndarray
    s_in_degr: np.ndarray
    s_in_pd: np.ndarray
    b_both: np.ndarray
    delta_count: int
    m: int

    def __post_init__(self):
        for name in ("g_amp", "g_phase_e", "g_phase_eprime", "p1", "p2", "p1_prime",
                     "p2_prime", "s_in_degr", "s_in_pd", "b_both"):
            getattr(self, name).setflags(write=False)

    @property
    def p1_frozen(self):
        return self.p1 & ~self.p1_prime

    @property
    def p2_frozen(self):
        return self.p2 & ~self.p2_prime

    def sizes(self):
        return {
            "G_amp": _count(self.g_amp),
            "G_phase_E": _count(self.g_phase_e),
            "G_phase_Ep": _count(self.g_phase_eprime),
            "P1": _count(self.p1),
            "P2": _count(self.p2),
            "P1p": _count(self.p1_prime),
            "P2p": _count(self.p2_prime),
            "Sin_degr": _count(self.s_in_degr),
            "Sin_pd": _count(self.s_in_pd),
            "B_both": _count(self.b_both),
        }


def build_partition(g_amp, g_phase_e, g_phase_eprime, n) -> CodeSetPartition:
    """
    Two-pass PD classification. The E pass gives the degradable-channel sets,
    the E' pass promotes P1 indices whose phase becomes good against E'.
    """
    g_amp = as_mask(g_amp, n)
    g_phase_e = as_mask(g_phase_e, n)
    g_phase_eprime = as_mask(g_phase_eprime, n)

    if np.any(g_phase_e & ~g_phase_eprime):
        raise ValueError("inconsistent PD classification: G_phase_E is not contained in G_phase_E'")

    b_amp = ~g_amp
    b_phase_e = ~g_phase_e

    p1 = g_amp & b_phase_e
    p2 = b_amp & g_phase_e
    s_in_degr = g_amp & g_phase_e
    s_in_pd = g_amp & g_phase_eprime
    p1_prime = p1 & g_phase_eprime
    # P2 indices whose status the E' pass changed; empty while G_phase_E is inside G_phase_E'
    p2_prime = p2 & g_phase_eprime & b_phase_e
    b_both = b_amp & b_phase_e

    partition = CodeSetPartition(
        n=n,
        g_amp=g_amp, g_phase_e=g_phase_e, g_phase_eprime=g_phase_eprime,
        p1=p1, p2=p2, p1_prime=p1_prime, p2_prime=p2_prime,
        s_in_degr=s_in_degr, s_in_pd=s_in_pd, b_both=b_both,
        delta_count=_count(p1_prime), m=_count(s_in_degr),
    )
    log.debug(f"Partition n={n}: m={partition.m}, delta={partition.delta_count}, |B|={_count(b_both)}")
    return partition


def delta(partition: CodeSetPartition):
    """Delta = |P1| - |P1 \\ P1'| = |P1'|."""
    return _count(partition.p1) - _count(partition.p1_frozen)


def frozen_sets(partition: CodeSetPartition):
    """Amplitude and phase frozen sets for a PD channel: (P1 \\ P1', P2 \\ P2')."""
    return partition.p1_frozen, partition.p2_frozen


def frozen_count(partition: CodeSetPartition):
    """n - l: frozen positions, including the doubly-bad set B."""
    return _count(partition.p1_frozen) + _count(partition.p2_frozen) + _count(partition.b_both)


def _pairwise_disjoint(*masks):
    return sum(_count(m) for m in masks) == _count(np.logical_or.reduce(masks))


def check_identities(partition: CodeSetPartition):
    """
    Evaluate the set identities on a partition.
    "asserted" holds for every valid partition; "reported" entries are finite-n
    observations that only hold asymptotically.
    """
    p = partition
    n = p.n
    p1f, p2f = p.p1_frozen, p.p2_frozen
    promoted = p.p1_prime | p.p2_prime
    frozen = p1f | p2f
    s_bad = ~p.s_in_pd

    asserted = {
        "p1_p2_disjoint": not np.any(p.p1 & p.p2),
        "primes_are_subsets": not np.any(p.p1_prime & ~p.p1) and not np.any(p.p2_prime & ~p.p2),
        "pd_is_degr_plus_p1p": np.array_equal(p.s_in_pd, p.s_in_degr | p.p1_prime),
        "delta_is_p1p_size": p.delta_count == _count(p.p1_prime) == delta(p),
        "four_way_cover": _pairwise_disjoint(p.s_in_degr, p.p1_prime, p.p2_prime, p1f, p2f, p.b_both)
        and _count(p.s_in_degr | promoted | frozen | p.b_both) == n,
        "pd_disjoint_from_frozen": _pairwise_disjoint(p.s_in_pd, p1f, p2f, p.p2_prime),
        "p1_parts_in_g_amp": not np.any((p.p1_prime | p1f) & ~p.g_amp),
        "promoted_count_additive": _count(promoted) == _count(p.p1_prime) + _count(p.p2_prime),
        "p2_frozen_outside_g_amp": not np.any(p2f & p.g_amp),
        "p2_frozen_outside_pd_and_b": not np.any(p2f & (p.s_in_pd | p.b_both)),
        "cover_count_bound": _count(p.g_amp & ~p.s_in_degr) + _count(p2f) + _count(~(promoted | frozen)) <= n,
        "b_both_outside_pd": not np.any(p.b_both & p.s_in_pd),
        "p1_frozen_isolated": not np.any(p1f & (p.s_in_pd | p2f)) and not np.any(p1f & p.b_both),
        "frozen_union_count": _count(p.s_in_degr | promoted | frozen) == _count(p.s_in_pd | frozen),
        "pd_size_is_m_plus_delta": _count(p.s_in_pd) == p.m + p.delta_count,
        "bad_complement": _count(p.s_in_pd) + _count(s_bad) == n
        and _count(s_bad) == n - p.m - p.delta_count,
    }

    reported = {
        "promoted_in_g_amp": not np.any(promoted & ~p.g_amp),
        "frozen_in_g_amp": not np.any(frozen & ~p.g_amp),
        "g_amp_plus_unassigned": (_count(p.g_amp) + _count(~(promoted | frozen))) / n,
        "outside_p1p_covered": not np.any(~p.p1_prime & ~(p.s_in_pd | p1f)),
        "frozen_union_drops_p2": _count(p.s_in_pd | frozen) == _count(p.s_in_pd | p1f),
    }

    failed = [name for name, ok in asserted.items() if not ok]
    if failed:
        log.warning(f"Set identities failed: {failed}")

    return {
        "passed": not failed,
        "failed": failed,
        "asserted": asserted,
        "reported": reported,
        "counts": {**p.sizes(), "P1_frozen": _count(p1f), "P2_frozen": _count(p2f),
                   "S_bad": _count(s_bad), "frozen": frozen_count(p)},
    }


if __name__ == "__main__":
    if len(sys.argv) < 5:
        print("Usage: python codesets.py <n> <G_amp> <G_phase_E> <G_phase_E'>  (comma-separated indices)")
        sys.exit(1)

    def _parse(text):
        return [int(x) for x in text.split(",") if x.strip()]

    part = build_partition(_parse(sys.argv[2]), _parse(sys.argv[3]), _parse(sys.argv[4]), int(sys.argv[1]))
    print(json.dumps(check_identities(part), indent=2))
