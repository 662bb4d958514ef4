"""Tests for pipeline.py: analyze, sweep and CSV emission."""

import math

import pytest

from config import RunConfig
import pipeline
from pipeline import (
    CSV_COLUMNS, CURVE_COLUMNS, channel_labels, emit_csv, oracle_cost_warning, run_analyze, run_sweep,
)


def _config(base_config, **updates):
    raw = {**base_config, **updates}
    return RunConfig.model_validate(raw)


def _erasure_sweep(base_config, k_list=(5, 10), epsilons=(0.25, 0.5), **extra):
    return _config(base_config, sweep={
        "k_list": list(k_list),
        "param_grid": [{"epsilon": e} for e in epsilons],
        **extra,
    })


class TestRunAnalyze:

    def test_conjugation_row(self, base_config):
        result = run_analyze(_config(base_config))
        row = result["row"]
        assert list(row) == CSV_COLUMNS
        assert row["delta"] == 0
        assert row["rq_pd"] == row["rq_degr"]
        assert row["n"] == 1024
        assert row["delta_map"] == "conjugation"
        assert math.isnan(row["ber_mc"])
        assert row["ms"] == 0
        assert result["identities"]["passed"]
        assert result["rate_identity"]["passed"]

    def test_parametric_row(self, base_config):
        base_config["channel"]["degrading"] = {"kind": "parametric", "delta": 0.4}
        row = run_analyze(_config(base_config))["row"]
        assert row["delta"] >= 0
        assert row["rq_pd"] >= row["rq_degr"]
        assert row["rq_pd"] == pytest.approx(row["rq_degr"] + row["delta"] / row["n"])
        assert row["delta_map"] == "parametric:0.4"

    def test_parametric_cloning_promotes(self, base_config):
        base_config["channel"] = {"family": "cloning", "clones": 3, "degrading": {"kind": "parametric"}}
        result = run_analyze(_config(base_config))
        row = result["row"]
        assert row["delta"] > 0
        assert row["rq_pd"] > row["rq_degr"]
        assert row["rq_pd"] == pytest.approx(row["rq_degr"] + row["delta"] / row["n"])
        assert row["delta_map"] == "parametric:0.2"
        assert result["identities"]["passed"]

    def test_cloning_conjugation_does_not_promote(self, base_config):
        base_config["channel"] = {"family": "cloning", "clones": 3}
        row = run_analyze(_config(base_config))["row"]
        assert row["delta"] == 0
        assert row["rq_pd"] == row["rq_degr"]

    @pytest.mark.parametrize("kind", ["conjugation", "parametric"])
    def test_perfect_channel(self, base_config, kind):
        base_config["channel"] = {"family": "erasure", "epsilon": 0.0,
                                  "degrading": {"kind": kind, "delta": 0.3}}
        row = run_analyze(_config(base_config))["row"]
        assert row["rq_pd"] == 1.0
        assert row["ber_lower"] == 0.0

    def test_pauli_labels(self, base_config):
        base_config["channel"] = {"family": "pauli", "pauli": [0.85, 0.05, 0.03, 0.07]}
        row = run_analyze(_config(base_config))["row"]
        assert (row["param1"], row["param2"]) == ("0.08", "0.1")

    def test_cloning_labels(self):
        channel = RunConfig.model_validate({
            "channel": {"family": "cloning", "clones": 5, "degrading": {"kind": "parametric"}},
            "geometry": {"k": 4}, "eta": 0.5,
        }).channel
        assert channel_labels(channel) == ("5", "", "parametric:0.17")

    def test_module_error(self, base_config):
        base_config["channel"] = {"family": "cloning", "clones": 4}
        result = run_analyze(_config(base_config))
        assert result["module"] == "channel_param"
        assert "unknown cloning parameter" in result["error"]

    def test_oracle_column(self, base_config):
        base_config["geometry"]["k"] = 4
        base_config["mc"] = {"enabled": True, "samples": 10_000, "seed": 17}
        first = run_analyze(_config(base_config))
        second = run_analyze(_config(base_config), workers=1)
        assert 0.0 <= first["row"]["ber_mc"] <= 1.0
        assert first["row"]["ber_mc"] == second["row"]["ber_mc"]

    def test_density_evolution_skips_oracle(self, base_config):
        base_config["geometry"]["k"] = 4
        base_config["mc"] = {"enabled": True, "seed": 3, "density_evolution": True, "de_samples": 5000}
        result = run_analyze(_config(base_config))
        assert "error" not in result
        assert math.isnan(result["row"]["ber_mc"])

    def test_deterministic(self, base_config):
        first = run_analyze(_config(base_config))["row"]
        second = run_analyze(_config(base_config))["row"]
        first.pop("ber_mc"), second.pop("ber_mc")  # NaN never compares equal
        assert first == second

    def test_k20_exact(self, base_config):
        base_config["geometry"]["k"] = 20
        row = run_analyze(_config(base_config))["row"]
        assert row["n"] == 1 << 20
        assert 0 < row["size_Sin_pd"] < row["n"]


class TestRunSweep:

    def test_grid_order(self, base_config):
        result = run_sweep(_erasure_sweep(base_config), workers=2)
        cells = [(row["param1"], row["k"]) for row in result["rows"]]
        assert cells == [("0.25", 5), ("0.25", 10), ("0.5", 5), ("0.5", 10)]

    def test_curve_points(self, base_config):
        result = run_sweep(_erasure_sweep(base_config, rate_targets=[0.1, 0.2]), workers=2)
        assert len(result["curve"]) == 4 * 2
        assert list(result["curve"][0]) == CURVE_COLUMNS

    def test_empty_sweep(self, base_config):
        result = run_sweep(_config(base_config, sweep={"param_grid": []}))
        assert result["error"] == "empty sweep"

    def test_missing_sweep_section(self, base_config):
        assert run_sweep(_config(base_config))["error"] == "empty sweep"

    def test_failing_cell_is_named(self, base_config):
        base_config["channel"] = {"family": "cloning", "clones": 1}
        config = _config(base_config, sweep={"k_list": [5], "param_grid": [{"clones": 1}, {"clones": 7}]})
        result = run_sweep(config, workers=2)
        assert "unknown cloning parameter" in result["error"]
        assert result["cell"].startswith("#1 ")
        assert result["module"] == "channel_param"

    def test_oracle_cost_warning(self, base_config):
        base_config["mc"] = {"enabled": True, "samples": 10_000, "seed": 5}
        slow = _erasure_sweep(base_config, k_list=(5, 16, 20), rate_targets=[0.1, 0.2])
        message = oracle_cost_warning(slow)
        assert "k=[16, 20]" in message
        assert "8 genie runs" in message
        assert oracle_cost_warning(_erasure_sweep(base_config, k_list=(5, 15))) is None

    def test_no_warning_without_oracle(self, base_config):
        assert oracle_cost_warning(_erasure_sweep(base_config, k_list=(20,))) is None
        base_config["mc"] = {"enabled": True, "seed": 5, "density_evolution": True}
        assert oracle_cost_warning(_erasure_sweep(base_config, k_list=(20,))) is None

    def test_sweep_logs_oracle_cost(self, base_config, monkeypatch):
        warnings = []
        monkeypatch.setattr(pipeline.log, "warning", warnings.append)
        monkeypatch.setattr(pipeline, "ORACLE_SLOW_K", 5)
        base_config["mc"] = {"enabled": True, "samples": 10_000, "seed": 5}
        result = run_sweep(_erasure_sweep(base_config, k_list=(5,), epsilons=(0.5,), rate_targets=[0.1]),
                           workers=1)
        assert "error" not in result
        assert any("1 genie runs" in message for message in warnings)

    def test_serial_and_concurrent_bytes_match(self, base_config, tmp_path):
        config = _erasure_sweep(base_config, k_list=(5, 8, 10), epsilons=(0.2, 0.35, 0.5))
        blobs = []
        for workers in (1, 4):
            path = tmp_path / f"sweep_{workers}.csv"
            emit_csv(run_sweep(config, workers=workers)["rows"], str(path))
            blobs.append(path.read_bytes())
        assert blobs[0] == blobs[1]


class TestEmitCsv:

    def test_header_and_single_row(self, base_config, tmp_path):
        path = tmp_path / "analyze.csv"
        emit_csv([run_analyze(_config(base_config))["row"]], str(path))
        text = path.read_text()
        lines = text.split("\n")
        assert text.endswith("\n")
        assert len(lines) == 3 and lines[2] == ""
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("erasure,0.5,,conjugation,10,1024,0.3,0.5,")
        assert lines[1].split(",")[CSV_COLUMNS.index("ber_mc")] == ""

    def test_float_formatting(self, tmp_path):
        path = tmp_path / "fmt.csv"
        emit_csv([{"a": 0.5, "b": 1 / 3}], str(path), columns=["a", "b"])
        assert path.read_text() == "a,b\n0.5,0.333333333\n"

    def test_sweep_line_count(self, base_config, tmp_path):
        path = tmp_path / "sweep.csv"
        emit_csv(run_sweep(_erasure_sweep(base_config))["rows"], str(path))
        assert len(path.read_text().splitlines()) == 5

    def test_empty_rows(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv([], str(tmp_path / "none.csv"))
