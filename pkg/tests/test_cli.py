"""Tests for the command-line driver: config parsing, reports, determinism."""

import contextlib
import csv
import io
import json
import subprocess
from pathlib import Path

import pytest

from pathint.cli import ConfigError, RunSpec, load_model, main, run
from pathint.models import ExponentialMap, HullWhiteParams, MappedModel, PotentialModel
from pathint.pricing import PriceQuery, price_hull_white_exact

MODELS = Path(__file__).resolve().parents[1] / "models"
HW = str(MODELS / "hw.toml")
BK = str(MODELS / "bk.toml")
HARMONIC = str(MODELS / "harmonic.toml")


def _capture(spec):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        status = run(spec)
    return status, out.getvalue(), err.getvalue()


class TestRunSpec:
    def test_unknown_command(self):
        with pytest.raises(ValueError, match="command"):
            RunSpec("frobnicate", HW)

    def test_missing_model_file(self):
        with pytest.raises(ValueError, match="not found"):
            RunSpec("price", "/nonexistent/model.toml", z=0.05, T=1.0)

    def test_price_needs_z_and_T(self):
        with pytest.raises(ValueError, match="--z is required"):
            RunSpec("price", HW, T=1.0)
        with pytest.raises(ValueError, match="--T is required"):
            RunSpec("price", HW, z=0.05)

    def test_curve_maturities_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            RunSpec("curve", HW, z=0.05, maturities=(1.0, 1.0, 2.0))

    def test_oracle_method_restricted(self):
        with pytest.raises(ValueError, match="oracle method"):
            RunSpec("oracle", HW, z=0.05, T=1.0, method="exact")

    def test_bad_output(self):
        with pytest.raises(ValueError, match="output"):
            RunSpec("price", HW, z=0.05, T=1.0, output="xml")


class TestLoadModel:
    def test_shipped_models(self):
        assert isinstance(load_model(HW), HullWhiteParams)
        bk = load_model(BK)
        assert isinstance(bk, MappedModel)
        assert bk.r0 == 0.05
        assert isinstance(bk.map, ExponentialMap)
        assert isinstance(load_model(HARMONIC), PotentialModel)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="model.toml"):
            load_model("/nonexistent/model.toml")

    def test_syntax_error_carries_line(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[hull_white]\nsigma = = 0.01\n")
        with pytest.raises(ConfigError, match=r"bad\.toml"):
            load_model(str(bad))

    def test_two_sections_rejected(self, tmp_path):
        f = tmp_path / "two.toml"
        f.write_text("[hull_white]\nsigma = 0.01\ntheta = 0.05\nalpha = 1.0\n[mapped]\n")
        with pytest.raises(ConfigError, match="exactly one"):
            load_model(str(f))

    def test_unknown_key_named_with_line(self, tmp_path):
        f = tmp_path / "junk.toml"
        f.write_text("\n[hull_white]\nsigma = 0.01\ntheta = 0.05\nalpha = 1.0\nvol = 2\n")
        with pytest.raises(ConfigError, match=r"junk\.toml:2: \[hull_white\] unknown keys: vol"):
            load_model(str(f))

    def test_unknown_key_is_config_exit(self, tmp_path):
        f = tmp_path / "junk.toml"
        f.write_text("[potential]\nbuiltin = \"harmonic\"\nomega = 1.0\nspring = 2\n")
        status, out, err = _capture(RunSpec("price", str(f), z=0.5, T=1.0))
        assert status == 2
        assert "unknown keys: spring" in err
        assert out == ""

    def test_mapped_needs_known_map(self, tmp_path):
        f = tmp_path / "m.toml"
        f.write_text(
            '[mapped]\nsigma = 0.1\ntheta = 0.0\nalpha = 1.0\nr0 = 0.05\nmap = "cubic"\n'
        )
        with pytest.raises(ConfigError, match="cubic"):
            load_model(str(f))


class TestPriceCommand:
    def test_json_report_matches_library(self):
        status, out, err = _capture(RunSpec("price", HW, z=0.05, T=1.0))
        assert status == 0 and err == ""
        doc = json.loads(out)
        assert doc["schema"] == "1"
        assert doc["method"] == "exact"
        ref = price_hull_white_exact(load_model(HW), PriceQuery(0.05, 0.0, 1.0))
        assert doc["price"] == ref.price
        assert doc["yield"] == ref.yield_

    def test_csv_report_round_trips(self):
        status, out, _ = _capture(RunSpec("price", HW, z=0.05, T=2.0, output="csv"))
        assert status == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["method"] for r in rows] == ["exact"]
        ref = price_hull_white_exact(load_model(HW), PriceQuery(0.05, 0.0, 2.0))
        assert float(rows[0]["price"]) == ref.price
        assert float(rows[0]["T"]) == 2.0

    def test_method_all_lists_every_applicable_method(self):
        spec = RunSpec("price", HW, z=0.05, T=1.0, method="all", mc_paths=20_000)
        status, out, _ = _capture(spec)
        assert status == 0
        doc = json.loads(out)
        methods = [r["method"] for r in doc["results"]]
        assert methods == ["exact", "semiclassical", "mc", "pde"]
        prices = [r["price"] for r in doc["results"]]
        assert max(prices) - min(prices) < 5e-4

    def test_inapplicable_method_is_config_error(self):
        status, out, err = _capture(RunSpec("price", HW, z=0.05, T=1.0, method="lattice"))
        assert status == 2
        assert "does not apply" in err and "available" in err
        assert out == ""

    def test_numerical_failure_is_status_one(self):
        spec = RunSpec("price", HW, z=-0.5, T=5.0, method="pde")
        status, _, err = _capture(spec)
        assert status == 1
        assert "InstabilityError" in err

    def test_semiclassical_on_mapped_model(self):
        status, out, _ = _capture(RunSpec("price", BK, z=0.05, T=1.0))
        assert status == 0
        doc = json.loads(out)
        assert doc["method"] == "semiclassical"
        assert doc["price"] == pytest.approx(0.9511638971397313, rel=1e-11)
        assert doc["diagnostics"]["quad_error"] >= 0.0


class TestCurveCommand:
    def test_csv_columns_and_boundary_row(self):
        spec = RunSpec("curve", HW, z=0.05, maturities=(0.0, 0.5, 1.0, 2.0))
        status, out, _ = _capture(spec)
        assert status == 0
        lines = out.splitlines()
        assert lines[0] == "T,price,yield,method,err_estimate"
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 4
        assert float(rows[0]["price"]) == 1.0
        assert float(rows[0]["yield"]) == 0.0
        hw = load_model(HW)
        for r in rows[1:]:
            ref = price_hull_white_exact(hw, PriceQuery(0.05, 0.0, float(r["T"])))
            assert float(r["price"]) == ref.price
            assert float(r["yield"]) == ref.yield_

    def test_json_rows(self):
        spec = RunSpec("curve", HW, z=0.05, maturities=(1.0, 5.0), output="json")
        status, out, _ = _capture(spec)
        assert status == 0
        doc = json.loads(out)
        assert doc["schema"] == "1"
        assert [row["T"] for row in doc["rows"]] == [1.0, 5.0]


class TestOracleCommand:
    def test_mc_default_with_error_bar(self):
        spec = RunSpec("oracle", HW, z=0.05, T=1.0, mc_paths=50_000, seed=3)
        status, out, _ = _capture(spec)
        assert status == 0
        doc = json.loads(out)
        assert doc["method"] == "mc"
        se = doc["diagnostics"]["std_error"]
        ref = price_hull_white_exact(load_model(HW), PriceQuery(0.05, 0.0, 1.0)).price
        assert abs(doc["price"] - ref) < 3.0 * se

    def test_byte_identical_reruns(self):
        spec = RunSpec("oracle", HW, z=0.05, T=1.0, mc_paths=30_000, seed=9, workers=1)
        again = RunSpec("oracle", HW, z=0.05, T=1.0, mc_paths=30_000, seed=9, workers=4)
        _, out1, _ = _capture(spec)
        _, out2, _ = _capture(again)
        assert out1 == out2


class TestValidateCommand:
    def test_shipped_hull_white_model_passes(self):
        status, out, _ = _capture(RunSpec("validate", HW))
        assert status == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) >= 10
        assert all(r["status"] == "pass" for r in rows)
        assert any("gelfand-yaglom" in r["check"] for r in rows)


class TestMain:
    def test_happy_path_exits_zero(self):
        out = io.StringIO()
        with contextlib.redirect_stdout(out), pytest.raises(SystemExit) as exc:
            main(["price", "--model", HW, "--z", "0.05", "--T", "1"])
        assert exc.value.code == 0
        assert json.loads(out.getvalue())["schema"] == "1"

    def test_bad_maturities_exit_two(self):
        err = io.StringIO()
        with contextlib.redirect_stderr(err), pytest.raises(SystemExit) as exc:
            main(["curve", "--model", HW, "--z", "0.05", "--maturities", "1,zz"])
        assert exc.value.code == 2
        assert "maturities" in err.getvalue()

    def test_console_script(self):
        proc = subprocess.run(
            ["pathint", "price", "--model", HW, "--z", "0.05", "--T", "1"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["schema"] == "1"
