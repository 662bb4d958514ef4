"""
Invariant suite behind `pdpolar verify`.
Each check returns {"check", "passed", "detail", "seconds"}; --quick scales
iteration counts down for smoke runs.
"""

import os
import sys
import json
import math
import time
import tempfile
from itertools import groupby

import numpy as np

from polarize import CodeGeometry, polarize_exact, polarize_mc
from codesets import build_partition, check_identities, indices
from rates import rate_degr, rate_pd
from ber import ber_lower, ber_upper, best_info_set, mc_genie_sc
from config import RunConfig
from pipeline import analyze_cell, build_cell_partition, build_tables, emit_csv, run_sweep, CURVE_COLUMNS, CSV_COLUMNS
from logger import get_logger

log = get_logger("verify")

SEED = 20240611
FAMILY_SAMPLES = {
    "erasure": {"family": "erasure", "epsilon": 0.3},
    "pauli": {"family": "pauli", "pauli": [0.85, 0.05, 0.03, 0.07]},
    "cloning": {"family": "cloning", "clones": 3},
}


def make_config(channel, k=10, beta=0.3, eta=0.5, sweep=None, **extra) -> RunConfig:
    raw = {
        "channel": channel,
        "geometry": {"k": k, "beta": beta},
        "eta": eta,
        "output": {"dir": "out", "timing": False},
        **extra,
    }
    if sweep is not None:
        raw["sweep"] = sweep
    return RunConfig.model_validate(raw)


def _result(name, passed, detail, started):
    return {"check": name, "passed": bool(passed), "detail": detail,
            "seconds": round(time.perf_counter() - started, 3)}


# ============================================================
# Checks
# ============================================================

def check_conjugation_equivalence(quick=False):
    started = time.perf_counter()
    detail = {}
    for family, channel in FAMILY_SAMPLES.items():
        config = make_config({**channel, "degrading": {"kind": "conjugation"}}, k=10)
        row = analyze_cell(config.channel, 10, config).row
        detail[family] = {"delta": row["delta"], "rq_degr": row["rq_degr"], "rq_pd": row["rq_pd"]}
    passed = all(d["delta"] == 0 and d["rq_pd"] == d["rq_degr"] for d in detail.values())
    return _result("conjugation_equivalence", passed, detail, started)


def _random_pd_channel(rng, trial):
    """Parametric channels cycling erasure, pauli and cloning; only the last two can promote."""
    degrading = {"kind": "parametric", "delta": float(1.0 - rng.random())}  # (0, 1]
    family = ("erasure", "pauli", "cloning")[trial % 3]
    if family == "erasure":
        return {"family": "erasure", "epsilon": float(rng.uniform(0.1, 0.9)), "degrading": degrading}
    if family == "pauli":
        # amplitude flips below phase flips, so G_amp reaches past G_phase_E
        p_y = float(rng.uniform(0.0, 0.01))
        amp_flip = float(rng.uniform(0.01, 0.1))
        phase_flip = amp_flip + float(rng.uniform(0.02, 0.1))
        p_x, p_z = amp_flip - p_y, phase_flip - p_y
        return {"family": "pauli", "pauli": [1.0 - p_x - p_y - p_z, p_x, p_y, p_z], "degrading": degrading}
    clones = int(rng.choice([1, 2, 3, 5, 8, 12, 24]))
    return {"family": "cloning", "clones": clones, "degrading": degrading}


def check_pd_rate_monotonicity(quick=False):
    started = time.perf_counter()
    rng = np.random.default_rng(SEED)
    trials = 21 if quick else 201
    geometry = CodeGeometry(10, 0.3)
    violations = []
    promoted = 0

    for trial in range(trials):
        channel = _random_pd_channel(rng, trial)
        config = make_config(channel, k=10)
        partition = build_cell_partition(build_tables(config.channel, geometry, config))
        degr, pd_rate = rate_degr(partition), rate_pd(partition)
        if partition.delta_count > 0:
            promoted += 1
        if pd_rate < degr or (partition.delta_count > 0 and not pd_rate > degr):
            violations.append({"channel": channel, "rq_degr": degr, "rq_pd": pd_rate})

    # a run without promotions never exercises the strict half
    return _result("pd_rate_monotonicity", promoted > 0 and not violations,
                   {"trials": trials, "with_promotions": promoted, "violations": violations[:5]}, started)


def brute_force_sets(g_amp, g_phase_e, g_phase_eprime, n):
    """Membership enumeration over Python sets, independent of the mask algebra."""
    universe = set(range(n))
    ga, ge, gep = set(g_amp), set(g_phase_e), set(g_phase_eprime)
    p1 = {i for i in universe if i in ga and i not in ge}
    p2 = {i for i in universe if i not in ga and i in ge}
    sets = {
        "p1": p1,
        "p2": p2,
        "s_in_degr": {i for i in universe if i in ga and i in ge},
        "s_in_pd": {i for i in universe if i in ga and i in gep},
        "p1_prime": {i for i in p1 if i in gep},
        "p2_prime": {i for i in p2 if i in gep and i not in ge},
        "b_both": {i for i in universe if i not in ga and i not in ge},
    }
    return sets


def brute_force_identities(sets, g_amp, n):
    ga = set(g_amp)
    p1f = sets["p1"] - sets["p1_prime"]
    p2f = sets["p2"] - sets["p2_prime"]
    promoted = sets["p1_prime"] | sets["p2_prime"]
    frozen = p1f | p2f
    s_pd, b = sets["s_in_pd"], sets["b_both"]
    return {
        "p1_p2_disjoint": not (sets["p1"] & sets["p2"]),
        "promoted_count_additive": len(promoted) == len(sets["p1_prime"]) + len(sets["p2_prime"]),
        "p2_frozen_outside_g_amp": not (p2f & ga),
        "p2_frozen_outside_pd_and_b": not (p2f & (s_pd | b)),
        "b_both_outside_pd": not (b & s_pd),
        "p1_frozen_isolated": not (p1f & (s_pd | p2f | b)),
        "frozen_union_count": len(sets["s_in_degr"] | promoted | frozen) == len(s_pd | frozen),
        "pd_size_is_m_plus_delta": len(s_pd) == len(sets["s_in_degr"]) + len(sets["p1_prime"]),
        "bad_complement": len(s_pd) + len(set(range(n)) - s_pd) == n,
    }


def check_set_identities(quick=False):
    started = time.perf_counter()
    rng = np.random.default_rng(SEED + 1)
    trials = 500 if quick else 10_000
    mismatches = []

    for trial in range(trials):
        n = 1 << int(rng.integers(2, 7))
        g_amp = rng.random(n) < rng.random()
        g_e = rng.random(n) < rng.random()
        g_ep = g_e | (rng.random(n) < rng.random())

        partition = build_partition(g_amp, g_e, g_ep, n)
        report = check_identities(partition)
        oracle = brute_force_sets(indices(g_amp), indices(g_e), indices(g_ep), n)
        same_sets = all(indices(getattr(partition, name)) == members for name, members in oracle.items())
        oracle_ok = all(brute_force_identities(oracle, indices(g_amp), n).values())

        if not (same_sets and oracle_ok and report["passed"]):
            mismatches.append({"trial": trial, "n": n, "failed": report["failed"],
                               "same_sets": same_sets, "oracle_ok": oracle_ok})

    return _result("set_identities", not mismatches, {"trials": trials, "mismatches": mismatches[:5]}, started)


def check_polarization(quick=False):
    started = time.perf_counter()
    expected = [0.9375, 0.5625, 0.4375, 0.0625]
    got = polarize_exact(0.5, CodeGeometry(2)).values.tolist()

    k_max = 10 if quick else 16
    worst = 0.0
    for base in np.linspace(0.0, 1.0, 11):
        for k in range(1, k_max + 1):
            worst = max(worst, abs(float(polarize_exact(base, CodeGeometry(k)).values.mean()) - base))

    return _result("polarization", got == expected and worst <= 1e-9,
                   {"k2_table": got, "max_conservation_error": worst, "k_max": k_max}, started)


def check_polarization_trend(quick=False):
    """Entanglement consumption and the unpolarized band both shrink with n."""
    started = time.perf_counter()
    detail = {}
    for k in (8, 16):
        config = make_config({"family": "erasure", "epsilon": 0.5}, k=k, beta=0.25)
        row = analyze_cell(config.channel, k, config).row
        detail[k] = {"ent_consumption": row["ent_consumption"], "unpolarized": row["unpolarized"]}
    passed = (detail[16]["ent_consumption"] < detail[8]["ent_consumption"]
              and detail[16]["unpolarized"] < detail[8]["unpolarized"])
    return _result("polarization_trend", passed, detail, started)


def check_ber_bounds(quick=False):
    started = time.perf_counter()
    spot_lower = ber_lower([0.36], [0])
    spot_upper = ber_upper([0.04, 0.05], 0.1)
    spots_ok = abs(spot_lower - 0.1) <= 1e-12 and abs(spot_upper - 0.35) <= 1e-12

    rng = np.random.default_rng(SEED + 2)
    draws = 1000 if quick else 10_000
    out_of_range = 0
    for _ in range(draws):
        size = int(rng.integers(1, 33))
        fidelities = rng.random(size) ** rng.uniform(0.2, 5.0)
        info = np.flatnonzero(rng.random(size) < 0.5)
        eta = float(rng.uniform(1e-6, 1.0 - 1e-6))
        lower, upper = ber_lower(fidelities, info), ber_upper(fidelities, eta)
        if not (0.0 <= lower <= 0.5 and 0.0 <= upper <= 0.5):
            out_of_range += 1

    return _result("ber_bounds", spots_ok and not out_of_range,
                   {"lower_S036": spot_lower, "upper_S009": spot_upper, "draws": draws,
                    "out_of_range": out_of_range}, started)


def check_monte_carlo(quick=False):
    started = time.perf_counter()
    samples = 100_000
    table = polarize_exact(0.5, CodeGeometry(2))
    estimate = mc_genie_sc(table, {3}, samples, SEED)
    sigma = (0.0625 * 0.9375 / samples) ** 0.5
    oracle_ok = abs(estimate - 0.0625) <= 3.0 * sigma

    k = 6 if quick else 8
    de_samples = 20_000 if quick else 50_000
    geometry = CodeGeometry(k)
    exact = polarize_exact(0.5, geometry).values
    averaged = np.mean([polarize_mc(0.5, geometry, de_samples, SEED + s).values for s in range(5)], axis=0)
    de_error = float(np.max(np.abs(averaged - exact)))

    return _result("monte_carlo", oracle_ok and de_error <= 0.02,
                   {"oracle_estimate": estimate, "three_sigma": 3.0 * sigma,
                    "de_k": k, "de_max_error": de_error}, started)


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def _monotone(values, increasing=True, tol=1e-12):
    pairs = zip(values, values[1:])
    if increasing:
        return all(b >= a - tol for a, b in pairs)
    return all(b <= a + tol for a, b in pairs)


ORACLE_SHAPE_K = (4, 6, 8)
ORACLE_SHAPE_RATES = (0.125, 0.25, 0.375, 0.5)


def oracle_curves(epsilon, k_list, rates, samples, seed):
    """Genie-SC estimates on the best info set per rate; {k: [estimate per rate]}."""
    curves = {}
    for k in k_list:
        table = polarize_exact(epsilon, CodeGeometry(k))
        curves[k] = [mc_genie_sc(table, best_info_set(table.values, rate), samples, seed) for rate in rates]
    return curves


def _three_sigma_apart(a, b, samples):
    """b exceeds a by more than the 3-sigma noise of both estimates."""
    noise = 3.0 * math.sqrt((a * (1.0 - a) + b * (1.0 - b)) / samples)
    return b > a + noise


def _oracle_shape(samples):
    curves = oracle_curves(0.2, ORACLE_SHAPE_K, ORACLE_SHAPE_RATES, samples, SEED)
    rate_ok = not any(_three_sigma_apart(b, a, samples)
                      for values in curves.values() for a, b in zip(values, values[1:]))
    k_ok = not any(_three_sigma_apart(a, b, samples)
                   for column in zip(*(curves[k] for k in ORACLE_SHAPE_K))
                   for a, b in zip(column, column[1:]))
    return rate_ok, k_ok, {str(k): values for k, values in curves.items()}


def check_sweep_shape(quick=False):
    """BER-vs-rate curves rise with rate, fall with k, and sweeps are byte-reproducible."""
    started = time.perf_counter()
    clones = [1, 8] if quick else [1, 2, 3, 5, 8, 12, 24]
    k_list = [5, 10] if quick else [5, 10, 15]
    config = make_config({"family": "cloning", "clones": clones[0]}, k=k_list[0],
                         sweep={"k_list": k_list, "param_grid": [{"clones": c} for c in clones]})

    serial = run_sweep(config, workers=1)
    concurrent_run = run_sweep(config, workers=4)
    if "error" in serial or "error" in concurrent_run:
        return _result("sweep_shape", False, {"error": serial.get("error") or concurrent_run.get("error")}, started)

    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for tag, result in (("serial", serial), ("concurrent", concurrent_run)):
            emit_csv(result["rows"], os.path.join(tmp, f"{tag}.csv"), CSV_COLUMNS)
            emit_csv(result["curve"], os.path.join(tmp, f"{tag}_curve.csv"), CURVE_COLUMNS)
            blobs.append(b"".join(_read_bytes(os.path.join(tmp, name))
                                  for name in (f"{tag}.csv", f"{tag}_curve.csv")))
    identical = blobs[0] == blobs[1]

    curve = serial["curve"]
    by_cell = {key: [p["ber_lower"] for p in points]
               for key, points in groupby(curve, key=lambda p: (p["param1"], p["k"]))}
    rate_ok = all(_monotone(values) for values in by_cell.values())

    k_ok = True
    for param in {p["param1"] for p in curve}:
        per_k = [by_cell[(param, k)] for k in k_list]
        for column in zip(*per_k):
            k_ok &= _monotone(list(column), increasing=False)

    oracle_rate_ok, oracle_k_ok, oracle = _oracle_shape(10_000 if quick else 40_000)

    return _result("sweep_shape", identical and rate_ok and k_ok and oracle_rate_ok and oracle_k_ok,
                   {"cells": len(serial["rows"]), "byte_identical": identical,
                    "monotone_in_rate": rate_ok, "non_increasing_in_k": k_ok,
                    "oracle_monotone_in_rate": oracle_rate_ok, "oracle_non_increasing_in_k": oracle_k_ok,
                    "oracle_curves": oracle}, started)


def check_performance_guard(quick=False):
    started = time.perf_counter()
    config = make_config({"family": "erasure", "epsilon": 0.5}, k=20)
    analyze_cell(config.channel, 20, config)
    elapsed = time.perf_counter() - started
    return _result("performance_k20", elapsed < 10.0, {"elapsed_s": round(elapsed, 3)}, started)


CHECKS = [
    check_conjugation_equivalence,
    check_pd_rate_monotonicity,
    check_set_identities,
    check_polarization,
    check_polarization_trend,
    check_ber_bounds,
    check_monte_carlo,
    check_sweep_shape,
]


def run_checks(quick=False):
    """Yield one result per check. The k=20 guard only runs in full mode."""
    checks = CHECKS if quick else CHECKS + [check_performance_guard]
    for check in checks:
        try:
            result = check(quick=quick)
        except Exception as e:
            log.error(f"{check.__name__} raised: {e}")
            result = {"check": check.__name__.removeprefix("check_"), "passed": False,
                      "detail": {"error": str(e)}, "seconds": 0.0}
        level = "info" if result["passed"] else "warning"
        getattr(log, level)(f"verify {result['check']}: {'PASS' if result['passed'] else 'FAIL'}")
        yield result


if __name__ == "__main__":
    quick = "--quick" in sys.argv
    failures = 0
    for result in run_checks(quick=quick):
        failures += not result["passed"]
        print(json.dumps(result))
    sys.exit(1 if failures else 0)
