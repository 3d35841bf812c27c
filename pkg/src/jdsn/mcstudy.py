"""Replication studies: consistency ladders and normality diagnostics."""

from __future__ import annotations

import io
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, JdsnError, StudyError
from .estimate import OptimizerOptions, classify_increments, maximize_contrast
from .fisher import FisherInformation
from .model import RATE_CONDITIONS, ModelSpec, ParameterPoint, RegimeConfig, validate_regime_ladder, validate_rho
from .simulate import DEFAULT_SUBSTEPS, replication_seed, simulate_path

MAX_FAILURE_FRACTION = 0.20
MIN_DIAGNOSTIC_ROWS = 100
KS_LEVEL = 0.01


def parameter_names(dims) -> list[str]:
    d1, d2, d3 = dims
    return [f"mu{i + 1}" for i in range(d1)] + [f"sigma{i + 1}" for i in range(d2)] + [f"alpha{i + 1}" for i in range(d3)]


def standardization_scales(regime: RegimeConfig, dims) -> np.ndarray:
    """Diagonal of the rate matrix: 1/eps for mu, sqrt(n) for sigma, sqrt(lambda) for alpha."""
    if regime.epsilon <= 0:
        raise ConfigError("standardized errors need epsilon > 0")
    if regime.lam <= 0:
        raise ConfigError("standardized errors need lambda > 0")
    d1, d2, d3 = dims
    return np.concatenate(
        [np.full(d1, 1.0 / regime.epsilon), np.full(d2, math.sqrt(regime.n)), np.full(d3, math.sqrt(regime.lam))]
    )


def standardize(raw_errors, scales) -> np.ndarray:
    return np.asarray(raw_errors, dtype=float) * scales


def unstandardize(std_errors, scales) -> np.ndarray:
    return np.asarray(std_errors, dtype=float) / scales


# ---------------------------------------------------------------------------
# table
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return f"{float(v):.17g}"


@dataclass
class McTable:
    model: str
    dims: tuple[int, int, int]
    theta0: ParameterPoint
    regime: RegimeConfig
    master_seed: int
    seeds: np.ndarray  # uint64 per row
    theta_hat: np.ndarray  # (reps, d), NaN on failed rows
    lambda_hat: np.ndarray
    converged: np.ndarray
    errors: np.ndarray  # standardized, (reps, d)
    messages: list[str] = field(default_factory=list)

    @property
    def reps(self) -> int:
        return int(self.seeds.size)

    @property
    def failed(self) -> np.ndarray:
        return np.array([bool(m) for m in self.messages])

    @property
    def usable(self) -> np.ndarray:
        return self.converged & ~self.failed & np.all(np.isfinite(self.errors), axis=1)

    @property
    def names(self) -> list[str]:
        return parameter_names(self.dims)

    def raw_errors(self) -> np.ndarray:
        return unstandardize(self.errors, standardization_scales(self.regime, self.dims))

    def metadata(self) -> dict:
        return {
            "model": self.model,
            "dims": list(self.dims),
            "theta0": self.theta0.to_dict(),
            "regime": self.regime.to_dict(),
            "master_seed": self.master_seed,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.metadata(), sort_keys=True) + "\n")
        names = self.names
        header = ["index", "seed", "converged", "lambda_hat"] + [f"hat_{p}" for p in names] + [f"e_{p}" for p in names]
        buf.write(",".join(header + ["error"]) + "\n")
        for i in range(self.reps):
            cells = [str(i), str(int(self.seeds[i])), str(int(self.converged[i])), _fmt(self.lambda_hat[i])]
            cells += [_fmt(v) for v in self.theta_hat[i]] + [_fmt(v) for v in self.errors[i]]
            msg = " ".join(self.messages[i].replace('"', "'").split())
            cells.append(f'"{msg}"' if msg else "")
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "McTable":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ConfigError("McTable CSV must start with a metadata comment line")
        meta = json.loads(lines[0][2:])
        dims = tuple(meta["dims"])
        d = sum(dims)
        rows = [ln for ln in lines[2:] if ln]
        seeds, conv, lam, th, err, msgs = [], [], [], [], [], []
        for ln in rows:
            head, _, tail = ln.partition('"')
            cells = head.rstrip(",").split(",") if tail else ln.split(",")[:-1]
            msg = tail[:-1] if tail else ""
            seeds.append(int(cells[1]))
            conv.append(cells[2] == "1")
            lam.append(float(cells[3]))
            th.append([float(c) for c in cells[4 : 4 + d]])
            err.append([float(c) for c in cells[4 + d : 4 + 2 * d]])
            msgs.append(msg)
        return cls(
            model=meta["model"],
            dims=dims,
            theta0=ParameterPoint.from_dict(meta["theta0"]),
            regime=RegimeConfig.from_dict(meta["regime"]),
            master_seed=int(meta["master_seed"]),
            seeds=np.array(seeds, dtype=np.uint64),
            theta_hat=np.array(th, dtype=float).reshape(-1, d),
            lambda_hat=np.array(lam, dtype=float),
            converged=np.array(conv, dtype=bool),
            errors=np.array(err, dtype=float).reshape(-1, d),
            messages=msgs,
        )


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------

# Set in the parent before forking; children inherit it.  Model coefficient
# callables are often lambdas, which do not pickle.
_JOB: dict = {}


def _replicate(index: int) -> tuple:
    job = _JOB
    model, theta0, regime = job["model"], job["theta0"], job["regime"]
    seed = replication_seed(job["master_seed"], index)
    d = theta0.d
    try:
        with np.errstate(all="ignore"):
            reg = regime.with_seed(seed)
            obs, _ = simulate_path(model, theta0, reg, substeps=job["substeps"], check_coefficients=False)
            labels = classify_increments(obs, reg, model.density.support, job["opts"].filter_scale)
            res = maximize_contrast(obs, model, reg, job["opts"], labels)
        est = res.theta_hat.as_vector()
        e = standardize(est - theta0.as_vector(), job["scales"])
        if not np.all(np.isfinite(e)):
            return index, seed, np.full(d, np.nan), math.nan, False, np.full(d, np.nan), "non-finite estimate"
        return index, seed, est, float(res.lambda_hat), bool(res.converged), e, ""
    except (JdsnError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return index, seed, np.full(d, np.nan), math.nan, False, np.full(d, np.nan), f"{type(exc).__name__}: {exc}"


def run_replications(
    model: ModelSpec,
    theta0: ParameterPoint,
    regime: RegimeConfig,
    reps: int,
    master_seed: int,
    workers: int = 1,
    substeps: int = DEFAULT_SUBSTEPS,
    opts: OptimizerOptions | None = None,
) -> McTable:
    """Simulate, filter and estimate ``reps`` times.

    Replication ``i`` uses the seed ``replication_seed(master_seed, i)``, so
    the table does not depend on ``workers``.
    """
    if int(reps) < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    verdict = validate_rho(model.density, regime.rho)
    if not verdict.admissible:
        raise ConfigError(verdict.reason)
    opts = opts or OptimizerOptions()
    reps = int(reps)
    global _JOB
    _JOB = {
        "model": model,
        "theta0": theta0,
        "regime": regime,
        "master_seed": int(master_seed),
        "substeps": int(substeps),
        "opts": opts,
        "scales": standardization_scales(regime, theta0.dims),
    }
    try:
        if workers > 1 and reps > 1:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=int(workers), mp_context=ctx) as pool:
                chunk = max(1, reps // (8 * int(workers)))
                results = list(pool.map(_replicate, range(reps), chunksize=chunk))
        else:
            results = [_replicate(i) for i in range(reps)]
    finally:
        _JOB = {}
    results.sort(key=lambda r: r[0])
    table = McTable(
        model=model.name,
        dims=theta0.dims,
        theta0=theta0,
        regime=regime,
        master_seed=int(master_seed),
        seeds=np.array([r[1] for r in results], dtype=np.uint64),
        theta_hat=np.array([r[2] for r in results], dtype=float).reshape(reps, -1),
        lambda_hat=np.array([r[3] for r in results], dtype=float),
        converged=np.array([r[4] for r in results], dtype=bool),
        errors=np.array([r[5] for r in results], dtype=float).reshape(reps, -1),
        messages=[r[6] for r in results],
    )
    n_failed = int(table.failed.sum())
    if n_failed > MAX_FAILURE_FRACTION * reps:
        first = next(m for m in table.messages if m)
        raise StudyError(f"{n_failed} of {reps} replications failed (limit 20%); first failure: {first}")
    return table


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------


@dataclass
class LadderResult:
    names: list[str]
    regimes: list[RegimeConfig]
    rmse: np.ndarray  # (rungs, d)
    usable: list[int]
    tables: list[McTable]
    verdict: dict | None  # per-component bool, or None for a single rung

    def shrink_factors(self) -> np.ndarray:
        """RMSE ratio first rung / last rung per component."""
        return self.rmse[0] / self.rmse[-1]

    def to_csv(self) -> str:
        lines = [",".join(["rung", "n", "epsilon", "lambda", "usable"] + [f"rmse_{p}" for p in self.names])]
        for k, (reg, row) in enumerate(zip(self.regimes, self.rmse)):
            lines.append(",".join([str(k), str(reg.n), _fmt(reg.epsilon), _fmt(reg.lam), str(self.usable[k])] + [_fmt(v) for v in row]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "names": self.names,
            "regimes": [r.to_dict() for r in self.regimes],
            "rmse": self.rmse.tolist(),
            "usable": self.usable,
            "verdict": self.verdict,
        }


def rmse_verdict(rmse: np.ndarray, names, rise_tolerance: float = 0.10) -> dict:
    """Per component: RMSE non-increasing, allowing one rise of at most 10%."""
    out = {}
    for j, name in enumerate(names):
        col = rmse[:, j]
        ratios = col[1:] / col[:-1]
        rises = ratios[ratios > 1.0]
        out[name] = bool(np.all(np.isfinite(col)) and rises.size <= 1 and np.all(rises <= 1.0 + rise_tolerance))
    return out


def consistency_ladder(
    model: ModelSpec,
    theta0: ParameterPoint,
    ladder,
    reps: int,
    master_seed: int,
    workers: int = 1,
    substeps: int = DEFAULT_SUBSTEPS,
    opts: OptimizerOptions | None = None,
) -> LadderResult:
    """Componentwise RMSE of raw errors at each rung of a regime ladder.

    Ladders whose rate conditions move the wrong way are refused before any
    simulation.
    """
    ladder = list(ladder)
    diag = validate_regime_ladder(ladder, model.density, theta0.alpha)
    bad = [c for c in diag.violations if c in RATE_CONDITIONS]
    if bad:
        raise ConfigError(f"regime ladder violates the joint-limit conditions: {', '.join(bad)}")
    for reg in ladder:
        verdict = validate_rho(model.density, reg.rho)
        if not verdict.admissible:
            raise ConfigError(verdict.reason)
    names = parameter_names(theta0.dims)
    tables, rmse, usable = [], [], []
    for k, reg in enumerate(ladder):
        rung_seed = replication_seed(master_seed, k)
        tab = run_replications(model, theta0, reg, reps, rung_seed, workers, substeps, opts)
        raw = tab.raw_errors()[tab.usable]
        rmse.append(np.sqrt(np.mean(raw**2, axis=0)) if raw.size else np.full(len(names), np.nan))
        usable.append(int(tab.usable.sum()))
        tables.append(tab)
    rmse = np.asarray(rmse)
    verdict = rmse_verdict(rmse, names) if len(ladder) > 1 else None
    return LadderResult(names, ladder, rmse, usable, tables, verdict)


# ---------------------------------------------------------------------------
# normality
# ---------------------------------------------------------------------------


@dataclass
class NormalityReport:
    names: list[str]
    n_rows: int
    n_used: int
    n_not_converged: int
    n_failed: int
    mean: np.ndarray
    covariance: np.ndarray
    target: np.ndarray
    relative_error: float
    ks_statistic: np.ndarray
    ks_pvalue: np.ndarray
    constant: list[str]
    whitened: np.ndarray = field(repr=False)

    @property
    def ks_passed(self) -> int:
        return int(np.sum(self.ks_pvalue > KS_LEVEL))

    def to_dict(self) -> dict:
        d = self.mean.size
        return {
            "names": self.names,
            "rows": self.n_rows,
            "used": self.n_used,
            "not_converged": self.n_not_converged,
            "failed": self.n_failed,
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "target_covariance": self.target.tolist(),
            "relative_covariance_error": self.relative_error,
            "ks_statistic": self.ks_statistic.tolist(),
            "ks_pvalue": self.ks_pvalue.tolist(),
            "ks_level": KS_LEVEL,
            "ks_passed": self.ks_passed,
            "bonferroni_level": KS_LEVEL / d,
            "constant_columns": self.constant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def qq_csv(self) -> str:
        """Sorted whitened values against standard normal quantiles."""
        m = self.whitened.shape[0]
        q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
        srt = np.sort(self.whitened, axis=0)
        lines = [",".join(["normal_quantile"] + self.names)]
        for i in range(m):
            lines.append(",".join([_fmt(q[i])] + [_fmt(v) for v in srt[i]]))
        return "\n".join(lines) + "\n"


def normality_diagnostics(table: McTable, info: FisherInformation, min_rows: int = MIN_DIAGNOSTIC_ROWS) -> NormalityReport:
    """Compare standardized errors with N(0, I^{-1}).

    Rows are whitened by the symmetric square root of I and each coordinate
    is tested against N(0, 1) with a one-sample KS test.
    """
    target = info.inverse()  # raises SingularInformationError
    root = info.sqrt()
    if target.shape[0] != table.errors.shape[1]:
        raise ConfigError(f"information has dimension {target.shape[0]}, table has {table.errors.shape[1]} columns")
    use = table.usable
    e = table.errors[use]
    if e.shape[0] < min_rows:
        raise StudyError(f"normality diagnostics need >= {min_rows} converged rows, got {e.shape[0]}")
    mean = e.mean(axis=0)
    cov = np.cov(e, rowvar=False, ddof=1)
    rel = float(np.linalg.norm(cov - target) / np.linalg.norm(target))
    w = e @ root  # root is symmetric
    names = table.names
    stat = np.empty(w.shape[1])
    pval = np.empty(w.shape[1])
    for j in range(w.shape[1]):
        r = stats.kstest(w[:, j], "norm")
        stat[j], pval[j] = r.statistic, r.pvalue
    constant = [names[j] for j in range(e.shape[1]) if np.ptp(e[:, j]) == 0.0]
    constant += [f"whitened {names[j]}" for j in range(w.shape[1]) if np.ptp(w[:, j]) == 0.0]
    failed = table.failed
    return NormalityReport(
        names=names,
        n_rows=table.reps,
        n_used=int(use.sum()),
        n_not_converged=int((~table.converged & ~failed).sum()),
        n_failed=int(failed.sum()),
        mean=mean,
        covariance=cov,
        target=target,
        relative_error=rel,
        ks_statistic=stat,
        ks_pvalue=pval,
        constant=constant,
        whitened=w,
    )
