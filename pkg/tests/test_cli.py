import json
import math

import numpy as np
import pytest

from logwave.cli import (
    EXIT_BLOWUP,
    EXIT_CHECKS,
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    build_initial,
    main,
    parse_config,
    read_csv,
)
from logwave.functionals import CSV_COLUMNS

MINIMAL = {
    "domain": {"dim": 3, "length": math.pi},
    "model": {"gamma": 4.0},
    "initial": {"amplitude": 0.05},
}


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def fast_run_config(tmp_path, **extra):
    doc = {
        "domain": {"dim": 3, "length": math.pi, "modes_per_dim": 4},
        "model": {"gamma": 4.0},
        "solver": {"dt": 1e-3, "t_end": 1.0},
        "initial": {"amplitude": 0.05},
        "well": {"trial_count": 2},
    }
    for section, keys in extra.items():
        doc.setdefault(section, {}).update(keys)
    return write_config(tmp_path / "config.json", doc)


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(json.dumps(MINIMAL))
        assert cfg.domain.modes_per_dim == 8
        assert cfg.domain.oversample == 2
        assert cfg.solver.dt == 1e-3
        assert cfg.solver.t_end == 20.0
        assert cfg.solver.scheme == "IMEX2"
        assert cfg.solver.report_every == 10
        assert cfg.initial.type == "eigenmode"
        assert cfg.initial.mode == (1, 1, 1)
        assert cfg.well.trial_count == 32
        assert cfg.well.safety == 0.5

    def test_gamma_window_enforced(self):
        doc = dict(MINIMAL, model={"gamma": 3.5})
        with pytest.raises(ConfigError, match=r"\[4, 6\)"):
            parse_config(json.dumps(doc))
        doc = dict(MINIMAL, model={"gamma": 5.9})
        assert parse_config(json.dumps(doc)).model.gamma == 5.9
        doc = dict(MINIMAL, model={"gamma": 3.5, "unsafe_gamma": True})
        assert parse_config(json.dumps(doc)).model.unsafe_gamma

    def test_unknown_keys_rejected(self):
        doc = dict(MINIMAL)
        doc["solver"] = {"dtt": 1e-3}
        with pytest.raises(ConfigError, match="solver.dtt"):
            parse_config(json.dumps(doc))
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(json.dumps(dict(MINIMAL, extra={})))

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="model.gamma"):
            parse_config(json.dumps({"domain": MINIMAL["domain"],
                                     "initial": {"amplitude": 0.05}}))
        with pytest.raises(ConfigError, match="initial.amplitude"):
            parse_config(json.dumps({"domain": MINIMAL["domain"],
                                     "model": {"gamma": 4.0}}))

    def test_malformed_json_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config('{\n  "domain": }')

    def test_mode_validation(self):
        doc = dict(MINIMAL, initial={"amplitude": 0.05, "mode": [1, 1]})
        with pytest.raises(ConfigError, match="initial.mode"):
            parse_config(json.dumps(doc))
        doc = dict(MINIMAL, initial={"amplitude": 0.05, "mode": [1, 1, 9]})
        with pytest.raises(ConfigError, match="initial.mode"):
            parse_config(json.dumps(doc))

    def test_type_errors_carry_paths(self):
        doc = dict(MINIMAL, solver={"dt": "fast"})
        with pytest.raises(ConfigError, match="solver.dt"):
            parse_config(json.dumps(doc))


class TestBuildInitial:
    def test_eigenmode(self):
        cfg = parse_config(json.dumps(MINIMAL))
        u0, u1 = build_initial(cfg)
        assert u0.coeffs[0, 0, 0] == 0.05
        assert np.count_nonzero(u0.coeffs) == 1
        assert not np.any(u1.coeffs)

    def test_random_normalized(self):
        doc = dict(MINIMAL, initial={"type": "random", "amplitude": 0.3, "seed": 5})
        cfg = parse_config(json.dumps(doc))
        u0, _ = build_initial(cfg)
        from logwave.domain import grad_norm_sq
        assert math.sqrt(grad_norm_sq(u0)) == pytest.approx(0.3, rel=1e-12)

    def test_from_file(self, tmp_path):
        coeffs = np.zeros((8, 8, 8))
        coeffs[0, 0, 0] = 0.25
        npz = tmp_path / "init.npz"
        np.savez(npz, u0=coeffs)
        doc = dict(MINIMAL, initial={"type": "file", "path": str(npz)})
        cfg = parse_config(json.dumps(doc))
        u0, u1 = build_initial(cfg)
        assert u0.coeffs[0, 0, 0] == 0.25
        assert not np.any(u1.coeffs)


class TestCmdRun:
    def test_trivial_zero_run_exits_ok(self, tmp_path):
        cfg = fast_run_config(tmp_path, initial={"amplitude": 0.0})
        code = main(["run", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "COMPLETED"
        assert summary["stable_set"]["trivial_zero"]

    def test_stable_run_artifacts(self, tmp_path):
        cfg = fast_run_config(tmp_path)
        code = main(["run", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["stable_set"]["status"] == "IN"
        mandatory = [c for c in summary["checks"] if c["mandatory"]]
        assert all(c["status"] != "FAIL" for c in mandatory)

        # exact column set and 17-significant-digit round-trip
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        reports = read_csv(tmp_path / "trajectory.csv")
        assert reports[0].E == pytest.approx(summary["E0"], rel=1e-16)

    def test_byte_identical_reruns(self, tmp_path):
        cfg = fast_run_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", cfg, "--output-dir", str(a), "--quiet"]) == EXIT_OK
        assert main(["run", "--config", cfg, "--output-dir", str(b), "--quiet"]) == EXIT_OK
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_blowup_exit_code(self, tmp_path):
        cfg = write_config(tmp_path / "blow.json", {
            "domain": {"dim": 1, "length": math.pi, "modes_per_dim": 16},
            "model": {"gamma": 4.0, "unsafe_gamma": True},
            "solver": {"dt": 1e-3, "t_end": 5.0},
            "initial": {"amplitude": 10.0},
            "well": {"trial_count": 1},
        })
        code = main(["run", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_BLOWUP
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "BLOWUP"
        assert summary["t_max"] < 5.0

    def test_config_error_exit_code(self, tmp_path):
        bad = write_config(tmp_path / "bad.json", dict(MINIMAL, model={"gamma": 3.0}))
        assert main(["run", "--config", bad, "--quiet"]) == EXIT_CONFIG
        assert main(["run", "--config", str(tmp_path / "missing.json"), "--quiet"]) == EXIT_CONFIG


class TestOtherCommands:
    def test_welldepth_single_trial(self, tmp_path):
        cfg = fast_run_config(tmp_path, well={"trial_count": 0})
        code = main(["welldepth", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "summary.json").read_text())
        assert report["d_hat"] > 0
        assert len(report["trials"]) == 1
        assert report["trials"][0]["lambda_star"] > 0

    def test_converge_linear_machine_precision(self, tmp_path):
        cfg = fast_run_config(
            tmp_path,
            model={"source_enabled": False},
            solver={"t_end": 0.5},
            study={"m_list": [2, 4]},
        )
        code = main(["converge", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "summary.json").read_text())
        assert report["passed"]
        assert max(report["E_diffs"]) <= 1e-15

    def test_depend_zero_epsilon(self, tmp_path):
        cfg = fast_run_config(tmp_path, solver={"t_end": 0.5},
                              study={"epsilons": [0.0]})
        code = main(["depend", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "summary.json").read_text())
        assert all(d == 0.0 for d in report["D"][0])

    def test_verify_roundtrip(self, tmp_path):
        cfg = fast_run_config(tmp_path)
        assert main(["run", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"]) == EXIT_OK
        code = main(["verify", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "summary.json").read_text())
        names = {c["name"]: c for c in report["checks"]}
        assert names["energy_identity"]["status"] == "PASS"
        # the velocity-gradient column is not in the CSV
        assert names["poincare_margin"]["status"] == "SKIP"

    def test_verify_rejects_malformed_csv(self, tmp_path):
        cfg = fast_run_config(tmp_path)
        (tmp_path / "trajectory.csv").write_text("t,E\n0,1\n")
        code = main(["verify", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_CONFIG

    def test_verify_flags_corrupted_ledger(self, tmp_path):
        cfg = fast_run_config(tmp_path)
        assert main(["run", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"]) == EXIT_OK
        csv_path = tmp_path / "trajectory.csv"
        lines = csv_path.read_text().splitlines()
        cells = lines[-1].split(",")
        cells[-1] = "0.5"  # identity residual far above tolerance
        lines[-1] = ",".join(cells)
        csv_path.write_text("\n".join(lines) + "\n")
        code = main(["verify", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert code == EXIT_CHECKS
        report = json.loads((tmp_path / "summary.json").read_text())
        names = {c["name"]: c for c in report["checks"]}
        assert names["energy_identity"]["status"] == "FAIL"


class TestSeedOverride:
    def test_seed_changes_random_initial(self, tmp_path):
        cfg = fast_run_config(tmp_path, initial={"type": "random", "amplitude": 0.02},
                              solver={"t_end": 0.1})
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        main(["run", "--config", cfg, "--output-dir", str(a), "--seed", "1", "--quiet"])
        main(["run", "--config", cfg, "--output-dir", str(b), "--seed", "2", "--quiet"])
        main(["run", "--config", cfg, "--output-dir", str(c), "--seed", "1", "--quiet"])
        csv_a = (a / "trajectory.csv").read_bytes()
        assert csv_a != (b / "trajectory.csv").read_bytes()
        assert csv_a == (c / "trajectory.csv").read_bytes()
