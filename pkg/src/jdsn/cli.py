"""Command-line front end: ``jdsn {simulate,estimate,fisher,mc,check-rho}``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, JdsnError
from .estimate import OptimizerOptions, classify_increments, maximize_contrast
from .fisher import FisherInformation, fisher_information
from .mcstudy import consistency_ladder, normality_diagnostics, run_replications
from .model import (
    ParameterDomain,
    ParameterPoint,
    RegimeConfig,
    builtin_models,
    get_model,
    validate_regime_ladder,
    validate_rho,
)
from .simulate import DEFAULT_SUBSTEPS, ObservationRecord, replication_seed, simulate_path

log = logging.getLogger("jdsn")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_KNOWN_KEYS = {
    "model", "family", "x0", "theta0", "alpha0", "domain", "regime", "ladder",
    "optimizer", "reps", "substeps", "seed", "out", "data", "time_steps",
}


def _version() -> str:
    from . import __version__

    return __version__


@dataclass
class StudyConfig:
    model: str
    theta0: ParameterPoint
    regime: RegimeConfig | None = None
    ladder: list[RegimeConfig] = field(default_factory=list)
    x0: float | None = None
    domain: ParameterDomain | None = None
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    reps: int | None = None
    substeps: int = DEFAULT_SUBSTEPS
    seed: int = 0
    out: str | None = None
    data: str | None = None
    time_steps: int = 2001

    def build_model(self):
        m = get_model(self.model, self.x0)
        if self.domain is not None:
            m = m.with_domain(self.domain)
        if not m.domain.contains(self.theta0.as_vector()):
            raise ConfigError(f"theta0 {self.theta0.as_vector().tolist()} lies outside the parameter domain")
        if self.theta0.dims != m.dims:
            raise ConfigError(f"theta0 has dimensions {self.theta0.dims}, model {self.model} needs {m.dims}")
        return m

    def regimes(self) -> list[RegimeConfig]:
        return list(self.ladder) if self.ladder else ([self.regime] if self.regime else [])

    def to_dict(self) -> dict:
        """Canonical form; ``out`` is left out so it never changes a hash."""
        d = {
            "model": self.model,
            "theta0": self.theta0.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "substeps": self.substeps,
            "seed": self.seed,
            "time_steps": self.time_steps,
        }
        if self.regime is not None:
            d["regime"] = self.regime.to_dict()
        if self.ladder:
            d["ladder"] = [r.to_dict() for r in self.ladder]
        if self.x0 is not None:
            d["x0"] = self.x0
        if self.domain is not None:
            d["domain"] = self.domain.to_dict()
        if self.reps is not None:
            d["reps"] = self.reps
        if self.data is not None:
            d["data"] = self.data
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in data and "config_sha256" in data:  # a manifest
            data = data["config"]
        unknown = set(data) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            key = str(data["model"]).lower()
            if "family" in data:
                fam = str(data["family"]).lower()
                if key == "ou":
                    key = f"ou-{fam}"
                elif not key.endswith(f"-{fam}"):
                    raise ConfigError(f"model {key!r} does not use the {fam!r} jump density")
            if key not in builtin_models():
                raise ConfigError(f"unknown model {key!r}; choose from {sorted(builtin_models())}")
            x0 = float(data["x0"]) if "x0" in data else None
            base = get_model(key, x0)
            theta0 = ParameterPoint.from_dict(data["theta0"]) if "theta0" in data else base.theta0
            if "alpha0" in data:
                theta0 = ParameterPoint(theta0.mu, theta0.sigma, data["alpha0"])
            domain = None
            if "domain" in data:
                domain = ParameterDomain(data["domain"]["lower"], data["domain"]["upper"])
            regime = RegimeConfig.from_dict(data["regime"]) if "regime" in data else None
            ladder = [RegimeConfig.from_dict(r) for r in data.get("ladder", [])]
            reps = data.get("reps")
            if reps is not None and (int(reps) != reps or reps < 1):
                raise ConfigError(f"reps must be a positive integer, got {reps}")
            seed = int(data.get("seed", 0))
            if not 0 <= seed < 2**64:
                raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
            cfg = cls(
                model=key,
                theta0=theta0,
                regime=regime,
                ladder=ladder,
                x0=x0,
                domain=domain,
                optimizer=OptimizerOptions.from_dict(data.get("optimizer")),
                reps=None if reps is None else int(reps),
                substeps=int(data.get("substeps", DEFAULT_SUBSTEPS)),
                seed=seed,
                out=data.get("out"),
                data=data.get("data"),
                time_steps=int(data.get("time_steps", 2001)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        cfg.build_model()
        return cfg

    @classmethod
    def load(cls, path) -> "StudyConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _g(v) -> str:
    return f"{float(v):.17g}"


def write_columns(path: Path, header, columns) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(str(int(v)) if np.issubdtype(type(v), np.integer) else _g(v) for v in row) + "\n")


def read_path_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``t,X`` CSV with a header row."""
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read path data {path}: {exc}") from None
    if arr.shape[1] < 2:
        raise ConfigError(f"{path}: expected columns t,X")
    return arr[:, 0], arr[:, 1]


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_manifest(out: Path, cfg: StudyConfig, command: str, files: list[str]) -> None:
    _write_json(
        out / "manifest.json",
        {
            "command": command,
            "version": _version(),
            "seed": cfg.seed,
            "config_sha256": cfg.sha256(),
            "config": cfg.to_dict(),
            "files": sorted(files),
        },
    )


def _need_regime(cfg: StudyConfig) -> RegimeConfig:
    if cfg.regime is None:
        raise ConfigError("this command needs a 'regime' entry")
    return cfg.regime


def _check_rho_or_fail(model, regimes) -> None:
    for reg in regimes:
        verdict = validate_rho(model.density, reg.rho)
        if not verdict.admissible:
            raise ConfigError(verdict.reason)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: StudyConfig, out: Path, workers: int = 1) -> list[str]:
    model = cfg.build_model()
    regime = _need_regime(cfg)
    _check_rho_or_fail(model, [regime])
    files = []
    if cfg.reps is None:
        jobs = [(regime.with_seed(cfg.seed), "")]
    else:
        jobs = [(regime.with_seed(replication_seed(cfg.seed, i)), f"_{i:04d}") for i in range(cfg.reps)]
    for reg, suffix in jobs:
        obs, truth = simulate_path(model, cfg.theta0, reg, substeps=cfg.substeps)
        write_columns(out / f"path{suffix}.csv", ["t", "X"], [obs.times, obs.values])
        write_columns(
            out / f"truth{suffix}.csv",
            ["jump_time", "mark", "interval_index"],
            [truth.jump_times, truth.jump_marks, truth.jump_interval.astype(np.int64)],
        )
        files += [f"path{suffix}.csv", f"truth{suffix}.csv"]
        log.info("simulated %d jumps with seed %d", truth.n_jumps, reg.seed)
    return files


def cmd_estimate(cfg: StudyConfig, out: Path, workers: int = 1) -> list[str]:
    model = cfg.build_model()
    regime = _need_regime(cfg).with_seed(cfg.seed)
    _check_rho_or_fail(model, [regime])
    if cfg.data is not None:
        _, x = read_path_csv(cfg.data)
        obs = ObservationRecord.from_values(x, regime.epsilon)
        if obs.n != regime.n:
            raise ConfigError(f"data has n={obs.n} increments, regime says n={regime.n}")
    else:
        obs, _ = simulate_path(model, cfg.theta0, regime, substeps=cfg.substeps)
    labels = classify_increments(obs, regime, model.density.support, cfg.optimizer.filter_scale)
    res = maximize_contrast(obs, model, regime, cfg.optimizer, labels)
    _write_json(out / "estimate.json", res.to_dict())
    write_columns(
        out / "labels.csv",
        ["k", "increment", "jump"],
        [np.arange(1, obs.n + 1, dtype=np.int64), obs.increments, labels.is_jump.astype(np.int64)],
    )
    log.info("estimate %s (converged=%s)", res.theta_hat.as_vector().tolist(), res.converged)
    return ["estimate.json", "labels.csv"]


def _fisher(cfg: StudyConfig, model) -> FisherInformation:
    return fisher_information(model, cfg.theta0, time_steps=cfg.time_steps)


def cmd_fisher(cfg: StudyConfig, out: Path, workers: int = 1) -> list[str]:
    model = cfg.build_model()
    info = _fisher(cfg, model)
    (out / "fisher.csv").write_text(info.to_csv())
    _write_json(out / "fisher.json", info.to_dict())
    return ["fisher.csv", "fisher.json"]


def cmd_mc(cfg: StudyConfig, out: Path, workers: int = 1) -> list[str]:
    model = cfg.build_model()
    if cfg.reps is None:
        raise ConfigError("mc needs 'reps'")
    if cfg.ladder:
        res = consistency_ladder(model, cfg.theta0, cfg.ladder, cfg.reps, cfg.seed, workers, cfg.substeps, cfg.optimizer)
        files = ["ladder.csv", "ladder.json"]
        (out / "ladder.csv").write_text(res.to_csv())
        _write_json(out / "ladder.json", res.to_dict())
        for k, tab in enumerate(res.tables):
            tab.write_csv(out / f"mc_rung{k}.csv")
            files.append(f"mc_rung{k}.csv")
        return files
    regime = _need_regime(cfg)
    table = run_replications(model, cfg.theta0, regime, cfg.reps, cfg.seed, workers, cfg.substeps, cfg.optimizer)
    table.write_csv(out / "mc.csv")
    files = ["mc.csv"]
    usable = int(table.usable.sum())
    if usable >= 100:
        report = normality_diagnostics(table, _fisher(cfg, model))
        (out / "normality.json").write_text(report.to_json() + "\n")
        (out / "qq.csv").write_text(report.qq_csv())
        files += ["normality.json", "qq.csv"]
    else:
        log.info("skipping normality diagnostics: %d usable rows (< 100)", usable)
    return files


def cmd_check_rho(cfg: StudyConfig, out: Path, workers: int = 1) -> list[str]:
    model = cfg.build_model()
    regimes = cfg.regimes()
    if not regimes:
        raise ConfigError("check-rho needs a 'regime' or 'ladder'")
    verdicts = [validate_rho(model.density, r.rho) for r in regimes]
    report = {"family": model.density.key, "verdicts": [v.to_dict() for v in verdicts]}
    if len(regimes) > 1:
        report["ladder"] = validate_regime_ladder(regimes, model.density, cfg.theta0.alpha).to_dict()
    _write_json(out / "check_rho.json", report)
    print(json.dumps(report, sort_keys=True))
    bad = [v for v in verdicts if not v.admissible]
    if bad:
        raise ConfigError(bad[0].reason)
    return ["check_rho.json"]


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "fisher": cmd_fisher,
    "mc": cmd_mc,
    "check-rho": cmd_check_rho,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jdsn", description=__doc__)
    p.add_argument("--version", action="version", version=f"jdsn {_version()}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON study config (a manifest also works)")
        s.add_argument("--out", help="output directory (default: config 'out' or '.')")
        s.add_argument("--seed", type=int, help="master seed, overrides the config")
        s.add_argument("--workers", type=int, help="worker processes (default: $JDSN_WORKERS or 1)")
        s.add_argument("--verbose", "-v", action="store_true")
    return p


def _workers(arg) -> int:
    if arg is not None:
        w = arg
    else:
        env = os.environ.get("JDSN_WORKERS")
        try:
            w = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"JDSN_WORKERS must be an integer, got {env!r}") from None
    if w < 1:
        raise ConfigError(f"workers must be >= 1, got {w}")
    return w


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = None
    try:
        cfg = StudyConfig.load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
            cfg.seed = args.seed
        out = Path(args.out or cfg.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        workers = _workers(args.workers)
        files = COMMANDS[args.command](cfg, out, workers)
        write_manifest(out, cfg, args.command, files)
        return EXIT_OK
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG, out)
    except (JdsnError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERICAL, out)


def _fail(exc: Exception, code: int, out: Path | None) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


if __name__ == "__main__":
    sys.exit(main())
