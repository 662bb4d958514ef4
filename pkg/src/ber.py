"""
Block-error-probability estimates for pdpolar.
Lower/upper bounds from the logical-channel fidelities, the threshold set
A(eta), and a genie-aided successive-cancellation Monte Carlo oracle on
the erasure surrogate.
"""

import sys
import json
import math
import concurrent.futures
from dataclasses import dataclass
from typing import Optional

import numpy as np

from codesets import as_mask
from polarize import MODE_EXACT, SyntheticTable
from logger import get_logger

log = get_logger("ber")

ORACLE_SAMPLE_FLOOR = 10_000
# Bool entries simulated per block; fixes the block layout independently of worker count
BLOCK_BUDGET = 1 << 22
PRACTICAL_BER = 1e-4


@dataclass(frozen=True)
class BerEstimate:
    lower: float
    upper: float
    eta: float
    a_eta: np.ndarray
    lower_sum: float
    upper_sum: float
    mc_estimate: Optional[float] = None
    mc_samples: int = 0
    seed: Optional[int] = None

    @property
    def crossed(self):
        """The two bounds are unrelated formulas and may cross."""
        return self.upper < self.lower


def combined_fidelities(amp: SyntheticTable, phase: SyntheticTable):
    """A quantum index fails if its amplitude or its phase sub-channel fails."""
    return np.minimum(1.0, amp.values + phase.values)


def _clamp01(x):
    return min(1.0, max(0.0, float(x)))


def union_bound(fidelities, info_set):
    fidelities = np.asarray(fidelities, dtype=float)
    return float(fidelities[as_mask(info_set, fidelities.size)].sum())


def ber_lower(fidelities, info_set):
    """p_BER >= 1/2 (1 - sqrt(1 - S)), S summed over the information set."""
    s = _clamp01(union_bound(fidelities, info_set))
    return 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - s)))


def restrict_eta(fidelities, eta):
    """A(eta) = {i : F_i <= eta}."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"invalid threshold: eta={eta} must lie in (0, 1)")
    return np.asarray(fidelities, dtype=float) <= eta


def ber_upper(fidelities, eta):
    """p_BER <= 1/2 (1 - sqrt(S)), S summed over A(eta)."""
    fidelities = np.asarray(fidelities, dtype=float)
    s = _clamp01(fidelities[restrict_eta(fidelities, eta)].sum())
    return 0.5 * (1.0 - math.sqrt(s))


# ============================================================
# Genie-aided SC oracle (erasure surrogate)
# ============================================================

def _genie_erasures(pattern, k):
    """
    Synthesized-channel erasure indicators for a batch of physical erasure patterns.
    Adjacent blocks combine level by level: minus = A | B, plus = A & B.
    """
    batch, n = pattern.shape
    arr = pattern.reshape(batch, n, 1)
    for _ in range(k):
        a = arr[:, 0::2, :]
        b = arr[:, 1::2, :]
        merged = np.empty((batch, a.shape[1], 2 * a.shape[2]), dtype=bool)
        merged[:, :, 0::2] = a | b
        merged[:, :, 1::2] = a & b
        arr = merged
    return arr.reshape(batch, n)


def _simulate(bases, k, info_mask, samples, seed, workers=1):
    n = 1 << k
    if not info_mask.any() or all(base == 0.0 for base in bases):
        return 0.0

    block_size = max(1, BLOCK_BUDGET // n)
    blocks = [(b, min(block_size, samples - start))
              for b, start in enumerate(range(0, samples, block_size))]

    def run_block(block):
        index, size = block
        rng = np.random.default_rng([seed, index])
        failed = np.zeros(size, dtype=bool)
        for base in bases:
            synth = _genie_erasures(rng.random((size, n)) < base, k)
            failed |= synth[:, info_mask].any(axis=1)
        return int(np.count_nonzero(failed))

    if workers > 1 and len(blocks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            errors = sum(executor.map(run_block, blocks))
    else:
        errors = sum(run_block(block) for block in blocks)

    log.debug(f"Oracle: {errors}/{samples} block errors over {len(blocks)} blocks (n={n})")
    return errors / samples


def _check_oracle_tables(tables, samples):
    if samples < ORACLE_SAMPLE_FLOOR:
        raise ValueError(f"insufficient samples: {samples} < {ORACLE_SAMPLE_FLOOR}")
    for table in tables:
        if table.mode != MODE_EXACT:
            raise ValueError("oracle requires erasure mode")
    if len({table.geometry.k for table in tables}) != 1:
        raise ValueError("oracle tables must share one geometry")


def mc_genie_sc(table: SyntheticTable, info_set, samples, seed, workers=1):
    """
    Empirical block-error rate of genie-aided SC over the base erasure channel.
    An erased information bit counts as a block error. Deterministic given seed.
    """
    _check_oracle_tables([table], samples)
    info_mask = as_mask(info_set, table.n)
    return _simulate([table.base], table.geometry.k, info_mask, samples, seed, workers)


def mc_genie_sc_joint(tables, info_set, samples, seed, workers=1):
    """Independent erasure patterns per sub-channel table; any erased info bit fails the block."""
    _check_oracle_tables(tables, samples)
    info_mask = as_mask(info_set, tables[0].n)
    return _simulate([t.base for t in tables], tables[0].geometry.k, info_mask, samples, seed, workers)


def estimate_ber(fidelities, info_set, eta, tables=None, samples=0, seed=None, workers=1) -> BerEstimate:
    """
    Both bounds over the information set; the oracle runs only when tables and
    samples are given.
    """
    fidelities = np.asarray(fidelities, dtype=float)
    info_mask = as_mask(info_set, fidelities.size)
    analyzed = fidelities[info_mask]
    a_eta = restrict_eta(fidelities, eta) & info_mask

    mc_estimate = None
    if tables and samples:
        mc_estimate = mc_genie_sc_joint(tables, info_mask, samples, seed, workers)

    estimate = BerEstimate(
        lower=ber_lower(analyzed, range(analyzed.size)),
        upper=ber_upper(analyzed, eta) if analyzed.size else 0.5,
        eta=eta,
        a_eta=a_eta,
        lower_sum=float(analyzed.sum()),
        upper_sum=float(fidelities[a_eta].sum()),
        mc_estimate=mc_estimate,
        mc_samples=int(samples) if mc_estimate is not None else 0,
        seed=seed,
    )
    if estimate.crossed:
        log.info(f"Bounds cross: upper={estimate.upper:.6g} < lower={estimate.lower:.6g}")
    return estimate


# ============================================================
# Rate curves
# ============================================================

def best_info_set(fidelities, rate):
    """The floor(rate * n) most reliable indices, ties broken by index."""
    fidelities = np.asarray(fidelities, dtype=float)
    count = int(math.floor(rate * fidelities.size + 1e-9))
    mask = np.zeros(fidelities.size, dtype=bool)
    mask[np.argsort(fidelities, kind="stable")[:count]] = True
    return mask


def rate_curve(fidelities, rates, eta):
    """Bounds along a list of rate targets, one dict per target."""
    fidelities = np.asarray(fidelities, dtype=float)
    curve = []
    for rate in rates:
        info = best_info_set(fidelities, rate)
        analyzed = fidelities[info]
        curve.append({
            "rate": float(rate),
            "size_info": int(info.sum()),
            "ber_union": float(analyzed.sum()),
            "ber_lower": ber_lower(analyzed, range(analyzed.size)),
            "ber_upper": ber_upper(analyzed, eta) if analyzed.size else 0.5,
            "info_mask": info,
        })
    return curve


def practical_rate(fidelities, target=PRACTICAL_BER):
    """Largest rate whose best information set keeps the union bound at or below target."""
    fidelities = np.sort(np.asarray(fidelities, dtype=float))
    usable = int(np.searchsorted(np.cumsum(fidelities), target, side="right"))
    return usable / fidelities.size


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print("Usage: python ber.py <eta> <F_0,F_1,...>")
        sys.exit(1)

    eta = float(sys.argv[1])
    values = [float(x) for x in sys.argv[2].split(",")]
    print(json.dumps({
        "lower": ber_lower(values, range(len(values))),
        "upper": ber_upper(values, eta),
        "a_eta": np.flatnonzero(restrict_eta(values, eta)).tolist(),
        "practical_rate": practical_rate(values),
    }, indent=2))
