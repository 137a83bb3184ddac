import json
import os
import subprocess
import sys

import numpy as np
import pytest

from phaseless.cli import ExperimentConfig, main, run_experiment, run_sweep
from phaseless.signals import ConfigError


def write_cfg(tmp_path, **kw):
    base = dict(scheme="noiseless", n=256, k=4, trials=3, seed=7,
                tail_model="zero", magnitude_range=[1.0, 2.0], phases=4)
    base.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(base))
    return str(p)


class TestRunExperiment:
    def test_noiseless_small(self, tmp_path):
        cfg = ExperimentConfig.from_file(write_cfg(tmp_path))
        summary = run_experiment(cfg, str(tmp_path / "out"))
        assert summary["success_rate"] == 1.0
        csv = (tmp_path / "out" / "results.csv").read_text().splitlines()
        assert csv[0] == "trial,success,err_linf,err_l2,err_l1,m,status"
        assert len(csv) == 4

    def test_determinism_byte_identical(self, tmp_path):
        cfg_path = write_cfg(tmp_path, scheme="l1_l1", phases=1, k=4,
                             tail_model="power_law", tail_param=0.7,
                             tail_scale=0.5, magnitude_range=[2.0, 4.0])
        cfg1 = ExperimentConfig.from_file(cfg_path)
        cfg2 = ExperimentConfig.from_file(cfg_path)
        run_experiment(cfg1, str(tmp_path / "a"))
        run_experiment(cfg2, str(tmp_path / "b"))
        for name in ("results.csv", "summary.json"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, name

    def test_config_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(write_cfg(tmp_path, scheme="bogus")).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(write_cfg(tmp_path, trials=0)).validate()
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema": 1}))
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(bad))


class TestSweep:
    def test_grid_of_one_matches_run(self, tmp_path):
        cfg_path = write_cfg(tmp_path, sweep={"k": [4]})
        cfg = ExperimentConfig.from_file(cfg_path)
        index = run_sweep(cfg, str(tmp_path / "sw"))
        assert len(index["runs"]) == 1
        single = ExperimentConfig.from_file(write_cfg(tmp_path))
        summary = run_experiment(single, str(tmp_path / "single"))
        assert index["runs"][0]["success_rate"] == summary["success_rate"]

    def test_empty_grid_raises(self, tmp_path):
        cfg = ExperimentConfig.from_file(write_cfg(tmp_path, sweep={"k": []}))
        with pytest.raises(ConfigError):
            run_sweep(cfg, str(tmp_path / "x"))


class TestStages:
    def test_gen_measure_decode_eval_roundtrip(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        sig = str(tmp_path / "x.cprsig")
        meas = str(tmp_path / "y.json")
        xhat = str(tmp_path / "xhat.json")
        assert main(["gen", "--config", cfg_path, "--out", sig]) == 0
        assert main(["measure", "--config", cfg_path, "--signal", sig, "--out", meas]) == 0
        assert main(["decode", "--config", cfg_path, "--measurements", meas, "--out", xhat]) == 0
        rc = main(["eval", "--config", cfg_path, "--signal", sig, "--xhat", xhat,
                   "--out", str(tmp_path / "eval.json")])
        assert rc == 0
        result = json.loads((tmp_path / "eval.json").read_text())
        assert result["success"] is True

    def test_eval_gate_failure_exit_code(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        sig = str(tmp_path / "x.cprsig")
        main(["gen", "--config", cfg_path, "--out", sig])
        garbage = tmp_path / "junk.json"
        garbage.write_text(json.dumps({"n": 256, "support": [0], "values": [[9.0, 0.0]]}))
        rc = main(["eval", "--config", cfg_path, "--signal", sig, "--xhat", str(garbage)])
        assert rc == 3

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"scheme": "bogus"}))
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


class TestEntrypoint:
    def test_module_invocation(self, tmp_path):
        cfg_path = write_cfg(tmp_path, trials=2)
        out = subprocess.run(
            [sys.executable, "-m", "phaseless.cli", "run", "--config", cfg_path,
             "--out", str(tmp_path / "out")],
            capture_output=True, text=True,
        )
        assert out.returncode == 0, out.stderr
        assert json.loads(out.stdout)["success_rate"] == 1.0
