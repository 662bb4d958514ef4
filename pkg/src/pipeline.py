"""
Pipeline orchestration for pdpolar.
channel -> polarize -> codesets -> rates -> ber, for one analysis cell or
a whole parameter sweep, plus CSV emission.
"""

import time
import concurrent.futures
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from channel_param import ChannelModel, base_params, effective_degrading, sub_channel_view
from polarize import (
    CodeGeometry, SyntheticTable, MODE_EXACT,
    polarize_exact, polarize_mc, classify_good, unpolarized_mask,
)
from codesets import CodeSetPartition, build_partition, check_identities
from rates import build_report, rate_capacity_identity
from ber import combined_fidelities, estimate_ber, practical_rate, rate_curve, mc_genie_sc_joint
from config import RunConfig, WORKERS
from logger import get_logger

log = get_logger("pipeline")

CSV_COLUMNS = [
    "family", "param1", "param2", "delta_map", "k", "n", "beta", "eta",
    "size_G_amp", "size_G_phase_E", "size_G_phase_Ep", "size_P1", "size_P2", "size_P1p", "size_P2p",
    "size_Sin_degr", "size_Sin_pd", "size_B_both", "delta",
    "rq_degr", "rq_pd", "chi_ab", "chi_ae", "chi_aep", "ent_consumption", "unpolarized",
    "ber_lower", "ber_upper", "ber_mc", "ms",
]

CURVE_COLUMNS = [
    "family", "param1", "param2", "delta_map", "k", "n",
    "rate", "size_info", "ber_union", "ber_lower", "ber_upper", "ber_mc",
]

FLOAT_FORMAT = "%.9g"
ORACLE_SLOW_K = 16  # per-target genie runs dominate sweep time from here on


class StageError(Exception):
    """A module failure inside the pipeline, tagged with the failing module."""

    def __init__(self, module, message):
        super().__init__(message)
        self.module = module


def _stage(module, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError as e:
        raise StageError(module, str(e)) from e


def _fmt(x):
    return format(float(x), ".9g")


def channel_labels(channel: ChannelModel):
    """(param1, param2, delta_map) CSV labels for a channel."""
    if channel.family == "erasure":
        param1, param2 = _fmt(channel.epsilon), ""
    elif channel.family == "pauli":
        p_i, p_x, p_y, p_z = channel.pauli
        param1, param2 = _fmt(p_x + p_y), _fmt(p_z + p_y)
    else:
        param1, param2 = str(channel.clones), ""

    spec = effective_degrading(channel)
    delta_map = "conjugation" if spec.kind == "conjugation" else f"parametric:{_fmt(spec.delta)}"
    return param1, param2, delta_map


@dataclass(frozen=True)
class CellTables:
    amp: SyntheticTable
    phase_e: SyntheticTable
    phase_eprime: SyntheticTable

    @property
    def exact(self):
        return self.phase_eprime.mode == MODE_EXACT and self.amp.mode == MODE_EXACT


@dataclass
class CellResult:
    row: dict
    tables: CellTables
    partition: CodeSetPartition
    fidelities: np.ndarray
    details: dict = field(default_factory=dict)


def build_tables(channel: ChannelModel, geometry: CodeGeometry, config: RunConfig) -> CellTables:
    """Polarize the three sub-channel views. Equal base parameters share one table."""
    pairs = _stage("channel_param", base_params, channel)
    mc = config.mc
    kernel = sub_channel_view(channel)
    cache = {}

    def polarize(base, view):
        # Both phase views draw the same stream so their estimates stay ordered
        if base not in cache:
            if mc.density_evolution:
                cache[base] = _stage("polarize", polarize_mc, base, geometry,
                                     mc.de_samples, [mc.seed, view], kernel)
            else:
                cache[base] = _stage("polarize", polarize_exact, base, geometry)
        return cache[base]

    return CellTables(
        amp=polarize(pairs.z_amp, 0),
        phase_e=polarize(pairs.z_phase_e, 1),
        phase_eprime=polarize(pairs.z_phase_eprime, 1),
    )


def build_cell_partition(tables: CellTables) -> CodeSetPartition:
    return _stage(
        "codesets", build_partition,
        classify_good(tables.amp), classify_good(tables.phase_e), classify_good(tables.phase_eprime),
        tables.amp.n,
    )


def analyze_cell(channel: ChannelModel, k, config: RunConfig, workers=1) -> CellResult:
    """Run one (channel, k) cell end to end. Raises StageError."""
    started = time.perf_counter()
    geometry = _stage("polarize", CodeGeometry, k, config.geometry.beta)

    tables = build_tables(channel, geometry, config)
    partition = build_cell_partition(tables)

    identities = check_identities(partition)
    if not identities["passed"]:
        raise StageError("codesets", f"inconsistent PD classification: failed {identities['failed']}")

    unpolarized = float(np.mean(unpolarized_mask(tables.amp) | unpolarized_mask(tables.phase_eprime)))
    report = build_report(partition, unpolarized)
    capacity = rate_capacity_identity(report, partition)
    if not capacity["passed"]:
        raise StageError("rates", f"rate identity residual {capacity['residual']:.9g}")

    fidelities = combined_fidelities(tables.amp, tables.phase_eprime)
    oracle_tables = None
    if config.mc.enabled:
        if tables.exact:
            oracle_tables = [tables.amp, tables.phase_eprime]
        else:
            log.warning("Oracle skipped: density-evolution tables are not erasure_exact")

    estimate = _stage(
        "ber", estimate_ber, fidelities, partition.s_in_pd, config.eta,
        tables=oracle_tables, samples=config.mc.samples if oracle_tables else 0,
        seed=config.mc.seed, workers=workers,
    )

    param1, param2, delta_map = channel_labels(channel)
    sizes = partition.sizes()
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    row = {
        "family": channel.family,
        "param1": param1,
        "param2": param2,
        "delta_map": delta_map,
        "k": geometry.k,
        "n": geometry.n,
        "beta": geometry.beta,
        "eta": config.eta,
        **{f"size_{name}": count for name, count in sizes.items()},
        "delta": partition.delta_count,
        "rq_degr": report.rq_degr,
        "rq_pd": report.rq_pd,
        "chi_ab": report.chi_ab,
        "chi_ae": report.chi_ae,
        "chi_aep": report.chi_aeprime,
        "ent_consumption": report.ent_consumption,
        "unpolarized": report.unpolarized_fraction,
        "ber_lower": estimate.lower,
        "ber_upper": estimate.upper,
        "ber_mc": estimate.mc_estimate if estimate.mc_estimate is not None else float("nan"),
        "ms": round(elapsed_ms, 3) if config.output.timing else 0,
    }

    details = {
        "practical_rate": practical_rate(fidelities),
        "bounds_crossed": estimate.crossed,
        "lower_sum": estimate.lower_sum,
        "upper_sum": estimate.upper_sum,
        "size_A_eta": int(np.count_nonzero(estimate.a_eta)),
        "rate_gap": report.rate_gap,
        "chi_aep_p1": report.chi_aeprime_p1,
        "identities": identities,
        "rate_identity": capacity,
    }
    log.info(f"Cell {channel.family}({param1},{param2}) {delta_map} k={k}: "
             f"rq_degr={report.rq_degr:.6g}, rq_pd={report.rq_pd:.6g}, delta={partition.delta_count}")
    return CellResult(row=row, tables=tables, partition=partition, fidelities=fidelities, details=details)


def run_analyze(config: RunConfig, workers=WORKERS):
    """
    Full pipeline for the configured channel at geometry.k.
    Returns {"row": ResultRow, ...details} or {"error", "module"} on failure.
    """
    try:
        result = analyze_cell(config.channel, config.geometry.k, config, workers=workers)
        return {"row": result.row, **result.details}
    except StageError as e:
        log.error(f"Analyze failed in {e.module}: {e}")
        return {"error": str(e), "module": e.module}


# ============================================================
# Sweeps
# ============================================================

def sweep_cells(config: RunConfig):
    """Grid order: channel entries outermost, k innermost."""
    if config.sweep is None or not config.sweep.param_grid:
        raise ValueError("empty sweep")
    return [(config.grid_channel(i), k)
            for i in range(len(config.sweep.param_grid))
            for k in config.sweep.k_list]


def oracle_cost_warning(config: RunConfig):
    """Warning text when the sweep will run the genie oracle at large k, else None."""
    if not config.mc.enabled or config.mc.density_evolution or config.sweep is None:
        return None
    slow = [k for k in config.sweep.k_list if k >= ORACLE_SLOW_K]
    if not slow:
        return None
    runs = len(config.sweep.param_grid) * len(slow) * len(config.sweep.rate_targets)
    return (f"Oracle enabled at k={slow}: {runs} genie runs of {config.mc.samples} samples "
            f"over n up to {1 << max(slow)}; expect a long sweep")


def curve_rows(result: CellResult, config: RunConfig):
    """Rate-curve rows of one cell; the oracle runs per rate target when enabled."""
    row = result.row
    prefix = {key: row[key] for key in ("family", "param1", "param2", "delta_map", "k", "n")}
    oracle = config.mc.enabled and result.tables.exact

    rows = []
    for point in rate_curve(result.fidelities, config.sweep.rate_targets, config.eta):
        ber_mc = float("nan")
        if oracle:
            ber_mc = _stage("ber", mc_genie_sc_joint, [result.tables.amp, result.tables.phase_eprime],
                            point["info_mask"], config.mc.samples, config.mc.seed)
        rows.append({
            **prefix,
            "rate": point["rate"],
            "size_info": point["size_info"],
            "ber_union": point["ber_union"],
            "ber_lower": point["ber_lower"],
            "ber_upper": point["ber_upper"],
            "ber_mc": ber_mc,
        })
    return rows


def run_sweep(config: RunConfig, workers=None):
    """
    Run every (grid entry, k) cell, concurrently when workers > 1.
    Returns {"rows", "curve"} in grid order, or {"error", "cell"} naming the
    first failing cell.
    """
    try:
        cells = sweep_cells(config)
    except ValueError as e:
        log.error(f"Sweep rejected: {e}")
        return {"error": str(e), "cell": None}

    workers = workers or WORKERS
    log.info(f"Sweep: {len(cells)} cells on {workers} workers")
    warning = oracle_cost_warning(config)
    if warning:
        log.warning(warning)

    def run_cell(cell):
        channel, k = cell
        result = analyze_cell(channel, k, config)
        return result.row, curve_rows(result, config)

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_cell, cell) for cell in cells]

        rows, curve = [], []
        for index, future in enumerate(futures):
            channel, k = cells[index]
            try:
                row, points = future.result()
            except StageError as e:
                for pending in futures[index + 1:]:
                    pending.cancel()
                name = f"#{index} {channel.model_dump_json(exclude_none=True)} k={k}"
                log.error(f"Sweep cell {name} failed in {e.module}: {e}")
                return {"error": str(e), "cell": name, "module": e.module}
            rows.append(row)
            curve.extend(points)

    log.info(f"Sweep done: {len(rows)} rows, {len(curve)} curve points")
    return {"rows": rows, "curve": curve}


def emit_csv(rows, path, columns=CSV_COLUMNS):
    """Write rows with the fixed header, 9 significant digits, trailing newline."""
    if not rows:
        raise ValueError("no rows to emit")
    df = pd.DataFrame(rows, columns=columns)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    log.info(f"Wrote {len(df)} rows to {path}")
