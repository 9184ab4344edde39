import json
import subprocess
import sys

import pytest

from uacesd import cli, harness

SMOKE = {"schema_version": 1, "M": 16, "K": 24, "U": 10, "L": 40, "activity": {"n_active": 2},
         "paths_per_user": 3, "snr_db_list": [8], "mode": "sd", "trials": 2, "seed": 3}


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMOKE))
    return p


class TestSimulate:
    """Exit codes and flag overrides of ``simulate``."""

    def test_success(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.main(["--config", str(config_file), "--out", str(out)]) == 0
        rows = (out / "results.csv").read_text().splitlines()
        assert rows[0] == ",".join(harness.CSV_HEADER) and len(rows) == 2

    def test_overrides(self, config_file, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["--config", str(config_file), "--out", str(out), "--mode", "sd",
                       "--mode", "cesd", "--snr-list", "0", "inf", "--trials", "1", "--seed", "9"])
        assert rc == 0
        recs = harness.read_results(out / "results.csv")
        assert sorted((r.mode, r.snr_db) for r in recs) == [
            ("cesd", 0.0), ("cesd", float("inf")), ("sd", 0.0), ("sd", float("inf"))]

    def test_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(dict(SMOKE, K=8)))
        assert cli.main(["--config", str(bad), "--out", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_snr_flag(self, config_file, tmp_path):
        assert cli.main(["--config", str(config_file), "--out", str(tmp_path),
                         "--snr-list", "loud"]) == 2

    def test_majority_divergence(self, config_file, tmp_path, monkeypatch):
        real = harness.run_receiver

        def diverging(*args, **kw):
            out = real(*args, **kw)
            out.diverged = True
            return out

        monkeypatch.setattr(harness, "run_receiver", diverging)
        assert cli.main(["--config", str(config_file), "--out", str(tmp_path)]) == 3

    def test_unknown_mode_rejected_by_parser(self, config_file, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["--config", str(config_file), "--out", str(tmp_path), "--mode", "oracle"])

    def test_console_script_module(self, config_file, tmp_path):
        r = subprocess.run([sys.executable, "-m", "uacesd.cli", "--config", str(config_file),
                            "--out", str(tmp_path / "o")], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        assert "results.csv" in r.stdout
