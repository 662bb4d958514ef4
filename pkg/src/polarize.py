"""
Channel polarization for pdpolar.
k-level recursion over a base parameter, in exact erasure mode and in a
Monte Carlo population density-evolution mode, plus the good/bad
classification of the synthesized logical channels.
"""

import sys
import json
import math
from dataclasses import dataclass

import numpy as np

from logger import get_logger

log = get_logger("polarize")

K_GUARD = 24
MC_SAMPLE_FLOOR = 1000

MODE_EXACT = "erasure_exact"
MODE_MC = "mc_density_evolution"
KERNELS = ("erasure", "bsc")


@dataclass(frozen=True)
class CodeGeometry:
    k: int
    beta: float = 0.3

    def __post_init__(self):
        if not 1 <= self.k <= K_GUARD:
            raise ValueError(f"k must lie in [1, {K_GUARD}], got {self.k}")
        if not 0.0 < self.beta < 0.5:
            raise ValueError("beta out of range (0, 0.5)")

    @property
    def n(self):
        return 1 << self.k

    @property
    def exponent(self):
        """n^beta, the exponent of the classification threshold 2^{-n^beta}."""
        return float(self.n) ** self.beta


@dataclass(frozen=True)
class SyntheticTable:
    geometry: CodeGeometry
    values: np.ndarray
    mode: str = MODE_EXACT
    mc_samples: int = 0
    base: float = 0.0
    kernel: str = "erasure"

    def __post_init__(self):
        object.__setattr__(self, "values", np.array(self.values, dtype=float))
        if self.values.shape != (self.geometry.n,):
            raise ValueError(f"table needs {self.geometry.n} entries, got {self.values.shape}")
        self.values.setflags(write=False)

    @property
    def n(self):
        return self.geometry.n


def _check_base(base):
    if not 0.0 <= base <= 1.0:
        raise ValueError(f"base parameter must lie in [0, 1], got {base}")


def polarize_exact(base, geometry: CodeGeometry) -> SyntheticTable:
    """
    Erasure recursion: minus 2e - e^2, plus e^2.
    Index bits read MSB-first pick the transform per level (0 -> minus, 1 -> plus).
    """
    _check_base(base)
    values = np.array([base], dtype=float)
    for _ in range(geometry.k):
        nxt = np.empty(2 * values.size)
        nxt[0::2] = 2.0 * values - values * values
        nxt[1::2] = values * values
        values = nxt

    np.clip(values, 0.0, 1.0, out=values)
    log.debug(f"Exact polarization: base={base:.6g}, n={geometry.n}")
    return SyntheticTable(geometry=geometry, values=values, mode=MODE_EXACT, base=float(base))


# ============================================================
# Population density evolution
# ============================================================

def _initial_llrs(base, samples, kernel, rng):
    """LLR population of the base channel under the all-zero input."""
    draws = rng.random(samples)
    if kernel == "erasure":
        return np.where(draws < base, 0.0, np.inf)

    # bsc: base is the Bhattacharyya parameter z = 2 sqrt(p(1-p))
    p = 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - base * base)))
    ell = math.inf if p == 0.0 else math.log((1.0 - p) / p)
    return np.where(draws < p, -ell, ell)


def _boxplus(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * np.arctanh(np.tanh(a / 2.0) * np.tanh(b / 2.0))
    return np.nan_to_num(out, nan=0.0, posinf=np.inf, neginf=-np.inf)


def _bhattacharyya_estimate(llrs):
    with np.errstate(over="ignore"):
        return float(np.clip(np.mean(np.exp(-llrs / 2.0)), 0.0, 1.0))


def _descend(llrs, depth, index, out, rng):
    if depth == 0:
        out[index] = _bhattacharyya_estimate(llrs)
        return

    size = llrs.size
    a = llrs[rng.permutation(size)]
    b = llrs[rng.permutation(size)]
    _descend(_boxplus(a, b), depth - 1, 2 * index, out, rng)
    _descend(a + b, depth - 1, 2 * index + 1, out, rng)


def polarize_mc(base, geometry: CodeGeometry, samples, seed, kernel="erasure") -> SyntheticTable:
    """
    Monte Carlo density evolution over the same transform tree as polarize_exact.
    Depth-first, so memory stays O(k * samples). Deterministic given seed.
    """
    _check_base(base)
    if samples < MC_SAMPLE_FLOOR:
        raise ValueError(f"insufficient samples: {samples} < {MC_SAMPLE_FLOOR}")
    if kernel not in KERNELS:
        raise ValueError(f"unknown density-evolution kernel: {kernel}")

    rng = np.random.default_rng(seed)
    values = np.empty(geometry.n)
    _descend(_initial_llrs(base, samples, kernel, rng), geometry.k, 0, values, rng)

    log.debug(f"MC density evolution: base={base:.6g}, n={geometry.n}, samples={samples}, kernel={kernel}")
    return SyntheticTable(
        geometry=geometry, values=values, mode=MODE_MC,
        mc_samples=int(samples), base=float(base), kernel=kernel,
    )


# ============================================================
# Classification
# ============================================================

def classify_good(table: SyntheticTable) -> np.ndarray:
    """
    Good set mask: sqrt(F_i) < 2^{-n^beta}.
    Compared in the log2 domain so the threshold never underflows.
    """
    with np.errstate(divide="ignore"):
        half_log = 0.5 * np.log2(table.values)
    return half_log < -table.geometry.exponent


def classify_bad(table: SyntheticTable) -> np.ndarray:
    """Strictly-bad mask: sqrt(F_i) >= 1 - 2^{-n^beta}."""
    margin = 2.0 ** (-table.geometry.exponent)
    return np.sqrt(table.values) >= 1.0 - margin


def unpolarized_mask(table: SyntheticTable) -> np.ndarray:
    return ~(classify_good(table) | classify_bad(table))


def unpolarized_fraction(table: SyntheticTable):
    """Fraction of indices in the band between the good and bad thresholds."""
    return np.count_nonzero(unpolarized_mask(table)) / table.n


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print("Usage: python polarize.py <base> <k> [beta]")
        sys.exit(1)

    geometry = CodeGeometry(k=int(sys.argv[2]), beta=float(sys.argv[3]) if len(sys.argv) > 3 else 0.3)
    table = polarize_exact(float(sys.argv[1]), geometry)
    print(json.dumps({
        "n": geometry.n,
        "good": int(np.count_nonzero(classify_good(table))),
        "bad": int(np.count_nonzero(classify_bad(table))),
        "unpolarized": unpolarized_fraction(table),
    }, indent=2))
