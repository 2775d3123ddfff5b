"""Configuration parsing, experiment orchestration and file output.

One JSON config document drives every subcommand.  Sections and defaults:

    domain:  dim (required), length (required), modes_per_dim=8, oversample=2
    model:   gamma (required), unsafe_gamma=false, source_enabled=true
    solver:  dt=1e-3, t_end=20.0, scheme="IMEX2", blowup_threshold=1e8,
             report_every=10
    initial: type="eigenmode" | "random" | "file", amplitude (required for
             eigenmode/random), mode=[1,...], seed=0, path (required for file)
    well:    trial_count=32, safety=0.5, seed=0
    outputs: csv_path="trajectory.csv", json_path="summary.json"
    study:   m_list=[4,8,16], epsilons=[1e-3,1e-4]

Unknown keys are rejected.  Exit codes: 0 success, 2 configuration or data
error, 3 blow-up, 4 mandatory check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    FitError,
    check_energy_identity,
    check_integral_bound,
    check_virial_identity,
    continuous_dependence,
    convergence_study,
    fit_decay,
)
from .domain import DomainSpec, ModalField, grad_norm_sq, random_band_limited
from .functionals import (
    CSV_COLUMNS,
    EnergyReport,
    ModelParams,
    source_dual_norm,
    uniform_bound_constant,
)
from .solver import BLOWUP, COMPLETED, SolverConfig, integrate
from .well import IN, default_trial_family, estimate_depth, stable_set_check

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_CHECKS = 4


class ConfigError(ValueError):
    """Configuration document rejected; message carries the key path."""


@dataclass(frozen=True)
class InitialSpec:
    type: str
    amplitude: float
    mode: tuple[int, ...]
    seed: int
    path: str | None


@dataclass(frozen=True)
class WellSpec:
    trial_count: int
    safety: float
    seed: int


@dataclass(frozen=True)
class OutputSpec:
    csv_path: str
    json_path: str


@dataclass(frozen=True)
class StudySpec:
    m_list: tuple[int, ...]
    epsilons: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    model: ModelParams
    solver: SolverConfig
    initial: InitialSpec
    well: WellSpec
    outputs: OutputSpec
    study: StudySpec


_SECTIONS = {
    "domain": {"dim", "length", "modes_per_dim", "oversample"},
    "model": {"gamma", "unsafe_gamma", "source_enabled"},
    "solver": {"dt", "t_end", "scheme", "blowup_threshold", "report_every"},
    "initial": {"type", "amplitude", "mode", "seed", "path"},
    "well": {"trial_count", "safety", "seed"},
    "outputs": {"csv_path", "json_path"},
    "study": {"m_list", "epsilons"},
}


def _reject_unknown(doc: dict):
    for section in doc:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section '{section}'")
        if not isinstance(doc[section], dict):
            raise ConfigError(f"section '{section}' must be an object")
        for key in doc[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key '{section}.{key}'")


def _get(doc: dict, section: str, key: str, default=None, required: bool = False):
    value = doc.get(section, {}).get(key, None)
    if value is None:
        if required:
            raise ConfigError(f"missing required key '{section}.{key}'")
        return default
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{path}' must be a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{path}' must be an integer, got {value!r}")
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document into a RunConfig."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be an object")
    _reject_unknown(doc)

    try:
        domain = DomainSpec(
            dim=_integer(_get(doc, "domain", "dim", required=True), "domain.dim"),
            length=_number(_get(doc, "domain", "length", required=True), "domain.length"),
            modes_per_dim=_integer(_get(doc, "domain", "modes_per_dim", 8), "domain.modes_per_dim"),
            oversample=_integer(_get(doc, "domain", "oversample", 2), "domain.oversample"),
        )
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from exc

    try:
        model = ModelParams(
            gamma=_number(_get(doc, "model", "gamma", required=True), "model.gamma"),
            dim=domain.dim,
            unsafe_gamma=bool(_get(doc, "model", "unsafe_gamma", False)),
            source_enabled=bool(_get(doc, "model", "source_enabled", True)),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    try:
        solver = SolverConfig(
            dt=_number(_get(doc, "solver", "dt", 1e-3), "solver.dt"),
            t_end=_number(_get(doc, "solver", "t_end", 20.0), "solver.t_end"),
            scheme=str(_get(doc, "solver", "scheme", "IMEX2")),
            blowup_threshold=_number(_get(doc, "solver", "blowup_threshold", 1e8), "solver.blowup_threshold"),
            report_every=_integer(_get(doc, "solver", "report_every", 10), "solver.report_every"),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    kind = str(_get(doc, "initial", "type", "eigenmode"))
    if kind not in ("eigenmode", "random", "file"):
        raise ConfigError(f"'initial.type' must be eigenmode, random or file, got {kind!r}")
    path = _get(doc, "initial", "path")
    if kind == "file":
        if not path:
            raise ConfigError("missing required key 'initial.path' for type=file")
        amplitude = _number(_get(doc, "initial", "amplitude", 1.0), "initial.amplitude")
    else:
        amplitude = _number(_get(doc, "initial", "amplitude", required=True), "initial.amplitude")
    mode_raw = _get(doc, "initial", "mode", [1] * domain.dim)
    if (not isinstance(mode_raw, list) or len(mode_raw) != domain.dim
            or not all(isinstance(k, int) and not isinstance(k, bool) for k in mode_raw)):
        raise ConfigError(f"'initial.mode' must be a list of {domain.dim} integers")
    if not all(1 <= k <= domain.modes_per_dim for k in mode_raw):
        raise ConfigError(
            f"'initial.mode' indices must lie in 1..{domain.modes_per_dim}"
        )
    initial = InitialSpec(
        type=kind, amplitude=amplitude, mode=tuple(mode_raw),
        seed=_integer(_get(doc, "initial", "seed", 0), "initial.seed"),
        path=str(path) if path else None,
    )

    safety = _number(_get(doc, "well", "safety", 0.5), "well.safety")
    if not 0 < safety <= 1:
        raise ConfigError(f"'well.safety' must lie in (0, 1], got {safety}")
    well = WellSpec(
        trial_count=_integer(_get(doc, "well", "trial_count", 32), "well.trial_count"),
        safety=safety,
        seed=_integer(_get(doc, "well", "seed", 0), "well.seed"),
    )

    outputs = OutputSpec(
        csv_path=str(_get(doc, "outputs", "csv_path", "trajectory.csv")),
        json_path=str(_get(doc, "outputs", "json_path", "summary.json")),
    )

    m_list = _get(doc, "study", "m_list", [4, 8, 16])
    if (not isinstance(m_list, list) or len(m_list) < 2
            or not all(isinstance(m, int) and not isinstance(m, bool) and m >= 1 for m in m_list)):
        raise ConfigError("'study.m_list' must be a list of >= 2 positive integers")
    eps_list = _get(doc, "study", "epsilons", [1e-3, 1e-4])
    if not isinstance(eps_list, list) or not all(
            isinstance(e, (int, float)) and not isinstance(e, bool) and e >= 0 for e in eps_list):
        raise ConfigError("'study.epsilons' must be a list of nonnegative numbers")
    study = StudySpec(m_list=tuple(m_list), epsilons=tuple(float(e) for e in eps_list))

    return RunConfig(domain=domain, model=model, solver=solver, initial=initial,
                     well=well, outputs=outputs, study=study)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())


def build_initial(cfg: RunConfig) -> tuple[ModalField, ModalField]:
    """Construct (u0, u1) from the initial section."""
    dom = cfg.domain
    spec = cfg.initial
    u1 = ModalField.zeros(dom)
    if spec.type == "eigenmode":
        u0 = ModalField.eigenmode(dom, spec.mode, spec.amplitude)
    elif spec.type == "random":
        raw = random_band_limited(dom, np.random.default_rng(spec.seed))
        u0 = raw.scaled(spec.amplitude / math.sqrt(grad_norm_sq(raw)))
    else:
        with np.load(spec.path) as data:
            if "u0" not in data:
                raise ConfigError(f"'{spec.path}' has no 'u0' array")
            u0 = ModalField(dom, data["u0"] * spec.amplitude)
            if "u1" in data:
                u1 = ModalField(dom, data["u1"])
    return u0, u1


# ---------------------------------------------------------------------------
# file output

def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def write_csv(path: Path, reports: list[EnergyReport]):
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rep in reports:
            fh.write(",".join(f"{getattr(rep, c):.17g}" for c in CSV_COLUMNS) + "\n")
    os.replace(tmp, path)


def read_csv(path: Path) -> list[EnergyReport]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ConfigError(
                f"'{path}' does not carry the expected column set {CSV_COLUMNS}"
            )
        reports = []
        for row in reader:
            if len(row) != len(CSV_COLUMNS):
                raise ConfigError(f"'{path}': malformed row {row!r}")
            vals = dict(zip(CSV_COLUMNS, (float(x) for x in row)))
            reports.append(EnergyReport(**vals))
    return reports


# ---------------------------------------------------------------------------
# verification suite

def _check(name: str, passed: bool | None, measured, tolerance, mandatory: bool) -> dict:
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    return {"name": name, "status": status, "measured": measured,
            "tolerance": tolerance, "mandatory": mandatory}


def run_checks(reports, domain, params, verdict=None, decay_window=None) -> tuple[list[dict], dict]:
    """Evaluate the verification suite on a trajectory.

    ``verdict`` (a StableSetVerdict) enables the invariance checks; without
    it they are skipped.  Returns (checks, extras) where extras holds the
    decay fit and the estimate suite for the JSON summary.
    """
    checks = []
    extras = {}
    e0 = reports[0].E
    e_scale = max(e0, 1e-30)
    es = np.array([r.E for r in reports])

    res = check_energy_identity(reports)
    checks.append(_check("energy_identity", res <= 1e-4, res, 1e-4, True))

    max_rise = float(np.max(np.diff(es))) / e_scale if len(es) > 1 else 0.0
    checks.append(_check("monotone_dissipation", max_rise <= 1e-10, max_rise, 1e-10, True))

    if verdict is not None and verdict.status == IN:
        min_i = min(r.I for r in reports)
        checks.append(_check("invariance_I_positive", min_i > 0, min_i, 0.0, True))
        max_e = float(np.max(es))
        checks.append(_check("invariance_E_below_threshold",
                             max_e < verdict.threshold, max_e, verdict.threshold, True))
        c3 = uniform_bound_constant(params.gamma)
        bound = max(
            c3 * (2.0 * r.kinetic + r.grad_sq + r.lgamma) / e_scale for r in reports
        )
        checks.append(_check("uniform_bound", bound < 1.0, bound, 1.0, True))
    else:
        checks.append(_check("invariance_I_positive", None, None, 0.0, True))
        checks.append(_check("invariance_E_below_threshold", None, None, None, True))
        checks.append(_check("uniform_bound", None, None, 1.0, True))

    try:
        vir = check_virial_identity(reports)
        checks.append(_check("virial_identity", vir <= 1e-3, vir, 1e-3, True))
    except ValueError:
        checks.append(_check("virial_identity", None, None, 1e-3, True))

    suite = check_integral_bound(reports, domain, params)
    extras["estimates"] = asdict(suite)
    pm = suite.poincare_margin
    if math.isfinite(pm):
        checks.append(_check("poincare_margin", pm <= 1.0 + 1e-10, pm, 1.0 + 1e-10, True))
    else:
        checks.append(_check("poincare_margin", None, None, 1.0 + 1e-10, True))
    checks.append(_check("integral_bound_finite",
                         math.isfinite(suite.c0_hat) if suite.n_s_samples else None,
                         suite.c0_hat, None, False))

    # the decay tail of a resolved run is accurate far below the absolute
    # energy floor, and the fixed window needs those samples: fit them all
    try:
        fit = fit_decay(reports, window=decay_window, min_energy=0.0)
        extras["decay_fit"] = asdict(fit)
        checks.append(_check("decay_rate_positive", fit.C2 > 0, fit.C2, 0.0, False))
        checks.append(_check("decay_fit_r_squared", fit.r_squared >= 0.99,
                             fit.r_squared, 0.99, False))
    except FitError:
        extras["decay_fit"] = None
        checks.append(_check("decay_rate_positive", None, None, 0.0, False))
        checks.append(_check("decay_fit_r_squared", None, None, 0.99, False))
    return checks, extras


def _mandatory_ok(checks: list[dict]) -> bool:
    return all(c["status"] != "FAIL" for c in checks if c["mandatory"])


def _emit(checks: list[dict], quiet: bool):
    if quiet:
        return
    for c in checks:
        measured = "n/a" if c["measured"] is None else f"{c['measured']:.6g}"
        tol = "n/a" if c["tolerance"] is None else f"{c['tolerance']:.6g}"
        print(f"{c['status']:4s} {c['name']} measured={measured} tolerance={tol}")


# ---------------------------------------------------------------------------
# subcommands

def _out_paths(cfg: RunConfig, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / cfg.outputs.csv_path, out_dir / cfg.outputs.json_path


def cmd_run(cfg: RunConfig, out_dir: Path, quiet: bool = False) -> int:
    csv_path, json_path = _out_paths(cfg, out_dir)
    trials, labels = default_trial_family(cfg.domain, cfg.well.trial_count,
                                          cfg.well.seed)
    depth = estimate_depth(trials, cfg.model, cfg.well.safety, labels)
    u0, u1 = build_initial(cfg)
    verdict = stable_set_check(u0, u1, depth.d_hat, cfg.well.safety, cfg.model)
    if not quiet:
        print(f"well depth estimate d_hat={depth.d_hat:.6g} "
              f"(threshold {verdict.threshold:.6g}); stable set: {verdict.status}")

    result = integrate(u0, u1, cfg.solver, cfg.model)
    summary = {
        "command": "run",
        "status": result.status,
        "t_max": result.t_max,
        "well_depth": {
            "d_hat": depth.d_hat,
            "safety": depth.safety,
            "trials": [
                {"label": lab, "lambda_star": ls, "j_max": jm}
                for lab, ls, jm in depth.trials
            ],
        },
        "stable_set": asdict(verdict),
        "E0": result.reports[0].E,
        "E_end": result.reports[-1].E,
        "n_reports": len(result.reports),
        "model": {"gamma": cfg.model.gamma, "dim": cfg.model.dim,
                  "rho": cfg.model.rho, "mu": cfg.model.mu,
                  "source_dual_norm_initial": source_dual_norm(u0, cfg.model)
                  if cfg.model.source_enabled else None},
    }
    write_csv(csv_path, result.reports)

    if result.status == BLOWUP:
        summary["checks"] = []
        summary["exit_code"] = EXIT_BLOWUP
        write_json(json_path, summary)
        if not quiet:
            print(f"BLOWUP at t={result.t_max:.6g}; wrote {csv_path} and {json_path}")
        return EXIT_BLOWUP

    checks, extras = run_checks(result.reports, cfg.domain, cfg.model, verdict)
    summary.update(extras)
    summary["checks"] = checks
    ok = _mandatory_ok(checks)
    summary["exit_code"] = EXIT_OK if ok else EXIT_CHECKS
    write_json(json_path, summary)
    _emit(checks, quiet)
    if not quiet:
        print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if ok else EXIT_CHECKS


def cmd_welldepth(cfg: RunConfig, out_dir: Path, quiet: bool = False) -> int:
    _, json_path = _out_paths(cfg, out_dir)
    trials, labels = default_trial_family(cfg.domain, cfg.well.trial_count,
                                          cfg.well.seed)
    depth = estimate_depth(trials, cfg.model, cfg.well.safety, labels)
    write_json(json_path, {
        "command": "welldepth",
        "d_hat": depth.d_hat,
        "safety": depth.safety,
        "trials": [
            {"label": lab, "lambda_star": ls, "j_max": jm}
            for lab, ls, jm in depth.trials
        ],
    })
    if not quiet:
        print(f"d_hat={depth.d_hat:.12g} over {len(depth.trials)} trials; wrote {json_path}")
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out_dir: Path, quiet: bool = False) -> int:
    _, json_path = _out_paths(cfg, out_dir)
    u0, u1 = build_initial(cfg)
    study = convergence_study(u0, u1, cfg.solver, cfg.model, list(cfg.study.m_list))
    write_json(json_path, {"command": "converge", **asdict(study)})
    if not quiet:
        print(f"convergence {'PASS' if study.passed else 'FAIL'} "
              f"E_diffs={list(study.E_diffs)}; wrote {json_path}")
    if study.status == BLOWUP:
        return EXIT_BLOWUP
    return EXIT_OK if study.passed else EXIT_CHECKS


def cmd_depend(cfg: RunConfig, out_dir: Path, quiet: bool = False) -> int:
    _, json_path = _out_paths(cfg, out_dir)
    u0, u1 = build_initial(cfg)
    report = continuous_dependence(
        u0, u1, cfg.solver, cfg.model,
        epsilons=cfg.study.epsilons, seed=cfg.initial.seed,
    )
    write_json(json_path, {"command": "depend", **asdict(report)})
    if not quiet:
        print(f"dependence status={report.status} "
              f"growth_rate={report.growth_rate:.6g}; wrote {json_path}")
    return EXIT_OK if report.status == COMPLETED else EXIT_BLOWUP


def cmd_verify(cfg: RunConfig, out_dir: Path, quiet: bool = False) -> int:
    csv_path, json_path = _out_paths(cfg, out_dir)
    reports = read_csv(csv_path)
    checks, extras = run_checks(reports, cfg.domain, cfg.model, verdict=None)
    ok = _mandatory_ok(checks)
    write_json(json_path, {
        "command": "verify",
        "csv_path": str(csv_path),
        "checks": checks,
        **extras,
        "exit_code": EXIT_OK if ok else EXIT_CHECKS,
    })
    _emit(checks, quiet)
    return EXIT_OK if ok else EXIT_CHECKS


_COMMANDS = {
    "run": cmd_run,
    "welldepth": cmd_welldepth,
    "converge": cmd_converge,
    "depend": cmd_depend,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="logwave",
        description="Spectral simulator for the strongly damped wave equation "
                    "with a logarithmic source",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--output-dir", default=".", help="directory for output files")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the initial and well seeds")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = RunConfig(
                domain=cfg.domain, model=cfg.model, solver=cfg.solver,
                initial=InitialSpec(cfg.initial.type, cfg.initial.amplitude,
                                    cfg.initial.mode, args.seed, cfg.initial.path),
                well=WellSpec(cfg.well.trial_count, cfg.well.safety, args.seed),
                outputs=cfg.outputs, study=cfg.study,
            )
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _COMMANDS[args.command](cfg, Path(args.output_dir), args.quiet)
    except ConfigError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
