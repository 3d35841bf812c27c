"""Parametric model: coefficients, parameter boxes, regimes and the psi function.

The SDE is

    dX_t = a(X_t, mu) dt + eps * b(X_t, sigma) dW_t + eps * c(X_{t-}, alpha) dZ_t,

with ``Z`` a compound Poisson process of intensity ``lam`` whose marks have
density ``f_alpha``.  ``psi(x, y, alpha) = log |f_alpha(y / c) / c|`` is the
log-density of a scaled jump, set to 0 where that density vanishes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .densities import FAMILIES, JumpDensityFamily, SupportKind, get_family
from .errors import BoundaryEvaluationError, ConfigError, ModelError, ParameterDomainError


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterPoint:
    mu: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        for name in ("mu", "sigma", "alpha"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.setflags(write=False)
            if not np.all(np.isfinite(arr)):
                raise ParameterDomainError(f"{name} has non-finite entries: {arr}")
            object.__setattr__(self, name, arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.mu.size, self.sigma.size, self.alpha.size)

    @property
    def d(self) -> int:
        return sum(self.dims)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.mu, self.sigma, self.alpha])

    @classmethod
    def from_vector(cls, vec, dims: Sequence[int]) -> "ParameterPoint":
        vec = np.asarray(vec, dtype=float)
        d1, d2, d3 = dims
        if vec.size != d1 + d2 + d3:
            raise ParameterDomainError(f"vector of length {vec.size} does not match dims {tuple(dims)}")
        return cls(vec[:d1], vec[d1 : d1 + d2], vec[d1 + d2 :])

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist(), "alpha": self.alpha.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterPoint":
        return cls(data["mu"], data["sigma"], data["alpha"])


@dataclass(frozen=True)
class ParameterDomain:
    """Open box ``lower < theta < upper`` standing in for the convex set Theta."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).copy()
        hi = np.asarray(self.upper, dtype=float).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ParameterDomainError("lower and upper must be 1-d arrays of equal length")
        if not np.all(lo < hi):
            raise ParameterDomainError(f"empty box: lower={lo}, upper={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def margin(self) -> np.ndarray:
        return 1e-9 * (self.upper - self.lower)

    def contains(self, vec) -> bool:
        vec = np.asarray(vec, dtype=float)
        return bool(np.all(vec > self.lower) and np.all(vec < self.upper))

    def clamp(self, vec) -> np.ndarray:
        """Project strictly inside the open box."""
        return np.clip(np.asarray(vec, dtype=float), self.lower + self.margin, self.upper - self.margin)

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def sub(self, start: int, stop: int) -> "ParameterDomain":
        return ParameterDomain(self.lower[start:stop], self.upper[start:stop])

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

Coef = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """Coefficient functions with parameter derivatives.

    Gradients return shape ``x.shape + (d_i,)`` and Hessians
    ``x.shape + (d_i, d_i)``.  ``a``, ``b`` and ``c`` must also accept a
    Python float ``x`` with a tuple of parameters (used in the simulation
    loop).
    """

    name: str
    dims: tuple[int, int, int]
    density: JumpDensityFamily
    x0: float
    a: Coef
    a_mu: Coef
    a_mumu: Coef
    b: Coef
    b_sigma: Coef
    b_sigmasigma: Coef
    c: Coef
    c_alpha: Coef
    c_alphaalpha: Coef
    domain: ParameterDomain | None = None
    theta0: ParameterPoint | None = None
    c_state_dependent: bool = True
    description: str = ""

    def __post_init__(self):
        if self.dims[2] < self.density.alpha_dim:
            raise ConfigError(
                f"{self.name}: alpha has {self.dims[2]} entries but {self.density.key} needs {self.density.alpha_dim}"
            )

    @property
    def d(self) -> int:
        return sum(self.dims)

    def with_x0(self, x0: float) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, x0=float(x0))

    def with_domain(self, domain: ParameterDomain) -> "ModelSpec":
        from dataclasses import replace

        if domain.d != self.d:
            raise ConfigError(f"domain has dimension {domain.d}, model needs {self.d}")
        return replace(self, domain=domain)

    def split(self, vec):
        d1, d2, _ = self.dims
        vec = np.asarray(vec, dtype=float)
        return vec[:d1], vec[d1 : d1 + d2], vec[d1 + d2 :]


# ---------------------------------------------------------------------------
# psi and its derivatives
# ---------------------------------------------------------------------------


def _psi_state(model: ModelSpec, x, y, alpha):
    alpha = np.asarray(alpha, dtype=float)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    c = np.asarray(model.c(x, alpha), dtype=float) * np.ones_like(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(c != 0.0, y / np.where(c != 0.0, c, 1.0), np.nan)
    inside = (c != 0.0) & model.density.in_support(z)
    return x, y, c, z, inside, alpha


def psi(model: ModelSpec, x, y, alpha):
    """``log|f_alpha(y/c)/c|`` where defined, 0 otherwise (never an error)."""
    x, y, c, z, inside, alpha = _psi_state(model, x, y, alpha)
    out = np.zeros(x.shape)
    if np.any(inside):
        lp = model.density.logpdf(z[inside], alpha)
        ok = np.isfinite(lp)
        vals = np.where(ok, lp - np.log(np.abs(c[inside])), 0.0)
        out[inside] = vals
    return out if out.ndim else float(out)


def _interior(model, x, y, alpha, what):
    x, y, c, z, inside, alpha = _psi_state(model, x, y, alpha)
    if not np.all(inside):
        bad = np.flatnonzero(~inside.ravel())[:3]
        raise BoundaryEvaluationError(
            f"{what}: y/c outside the open support of {model.density.key} at flat indices {bad.tolist()}"
        )
    return x, y, c, z, alpha


def _log_c_derivs(model: ModelSpec, x, alpha, c, second: bool):
    d3 = model.dims[2]
    ca = np.asarray(model.c_alpha(x, alpha), dtype=float) * np.ones(x.shape + (d3,))
    L1 = ca / c[..., None]
    if not second:
        return L1, None
    caa = np.asarray(model.c_alphaalpha(x, alpha), dtype=float) * np.ones(x.shape + (d3, d3))
    L2 = caa / c[..., None, None] - L1[..., :, None] * L1[..., None, :]
    return L1, L2


def _pad(arr, d3, ndim_extra):
    """Zero-pad density derivatives (alpha_dim entries) to the full alpha length."""
    k = arr.shape[-1]
    if k == d3:
        return arr
    if ndim_extra == 1:
        out = np.zeros(arr.shape[:-1] + (d3,))
        out[..., :k] = arr
    else:
        out = np.zeros(arr.shape[:-2] + (d3, d3))
        out[..., :k, :k] = arr
    return out


def psi_dy(model: ModelSpec, x, y, alpha):
    x, y, c, z, alpha = _interior(model, x, y, alpha, "psi_dy")
    out = model.density.dlog_dz(z, alpha) / c
    return out if np.ndim(out) else float(out)


def psi_dalpha(model: ModelSpec, x, y, alpha):
    """Gradient of psi in alpha, shape ``x.shape + (d3,)``."""
    x, y, c, z, alpha = _interior(model, x, y, alpha, "psi_dalpha")
    d3 = model.dims[2]
    fam = model.density
    L1, _ = _log_c_derivs(model, x, alpha, c, second=False)
    gz = fam.dlog_dz(z, alpha)
    ga = _pad(fam.dlog_dalpha(z, alpha), d3, 1)
    return -L1 * (1.0 + z * gz)[..., None] + ga


def psi_d2(model: ModelSpec, x, y, alpha):
    """Return ``(d2psi/dy dalpha, d2psi/dalpha dalpha)``."""
    x, y, c, z, alpha = _interior(model, x, y, alpha, "psi_d2")
    d3 = model.dims[2]
    fam = model.density
    L1, L2 = _log_c_derivs(model, x, alpha, c, second=True)
    gz = fam.dlog_dz(z, alpha)[..., None]
    gzz = fam.d2log_dz2(z, alpha)[..., None]
    gza = _pad(fam.d2log_dz_dalpha(z, alpha), d3, 1)
    gaa = _pad(fam.d2log_dalpha2(z, alpha), d3, 2)
    zz = z[..., None]

    dya = (-L1 * (zz * gzz + gz) + gza) / c[..., None]

    t1 = -L2 * (1.0 + zz * gz)[..., None]
    t2 = (L1[..., :, None] * L1[..., None, :]) * (zz * (gz + zz * gzz))[..., None]
    t3 = -(zz * gza)[..., :, None] * L1[..., None, :]
    daa = t1 + t2 + t3 + np.swapaxes(t3, -1, -2) + gaa
    return dya, daa


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeConfig:
    n: int
    epsilon: float
    lam: float
    rho: float
    v: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ConfigError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lambda must be finite and >= 0, got {self.lam}")
        if not (0.0 < self.rho < 0.5):
            raise ConfigError(f"rho must lie in (0, 1/2), got {self.rho}")
        if not self.v > 0:
            raise ConfigError(f"threshold level v must be positive, got {self.v}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))
        for name in ("epsilon", "lam", "rho", "v"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def threshold(self) -> float:
        return self.v / self.n**self.rho

    def kappa(self, c1: float) -> float:
        return 4.0 * self.v / c1

    def with_seed(self, seed: int) -> "RegimeConfig":
        from dataclasses import replace

        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {"n": self.n, "epsilon": self.epsilon, "lambda": self.lam, "rho": self.rho, "v": self.v, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "RegimeConfig":
        lam = data["lambda"] if "lambda" in data else data["lam"]
        return cls(
            n=data["n"],
            epsilon=float(data["epsilon"]),
            lam=float(lam),
            rho=float(data["rho"]),
            v=float(data.get("v", 1.0)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True)
class RhoVerdict:
    admissible: bool
    interval: tuple[float, float]
    reason: str

    def to_dict(self) -> dict:
        return {"admissible": self.admissible, "interval": list(self.interval), "reason": self.reason}


def rho_interval(family: JumpDensityFamily) -> tuple[float, float]:
    if family.support is SupportKind.WHOLE_LINE:
        return (0.0, 0.5)
    q = family.q_exponent
    upper = 0.5 if q == 0 else min(0.5, 1.0 / (4.0 * q))
    return (0.0, upper)


def validate_rho(family: JumpDensityFamily, rho: float) -> RhoVerdict:
    if not math.isfinite(rho):
        raise ConfigError(f"rho must be finite, got {rho}")
    lo, hi = rho_interval(family)
    if lo < rho < hi:
        return RhoVerdict(True, (lo, hi), f"rho={rho} lies in ({lo}, {hi}) for {family.key}")
    return RhoVerdict(False, (lo, hi), f"rho={rho} outside the open interval ({lo}, {hi}) for {family.key}")


@dataclass(frozen=True)
class ConditionTrend:
    name: str
    values: tuple[float, ...]
    status: str  # "ok", "flat", "wrong-way", "no trend"
    note: str = ""


@dataclass(frozen=True)
class LadderDiagnostics:
    conditions: tuple[ConditionTrend, ...]
    notes: tuple[str, ...] = ()

    @property
    def flagged(self) -> list[str]:
        return [c.name for c in self.conditions if c.status in ("flat", "wrong-way")]

    @property
    def violations(self) -> list[str]:
        return [c.name for c in self.conditions if c.status == "wrong-way"]

    def condition(self, name: str) -> ConditionTrend:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "conditions": [
                {"name": c.name, "values": list(c.values), "status": c.status, "note": c.note} for c in self.conditions
            ],
            "flagged": self.flagged,
            "violations": self.violations,
            "notes": list(self.notes),
        }


# conditions whose wrong-way movement makes a ladder unusable
RATE_CONDITIONS = ("lambda", "eps*lambda", "lambda^2/n", "1/(eps^2 n)")


def small_mark_mass(family: JumpDensityFamily, alpha, u: float) -> float:
    """P(|V| <= u) by quadrature of the density."""
    if u <= 0:
        return 0.0
    lo = 0.0 if family.support is SupportKind.POSITIVE_HALF_LINE else -u
    val, _ = integrate.quad(lambda z: float(family.pdf(z, alpha)), lo, u, limit=200)
    return min(max(val, 0.0), 1.0)


def _trend(name, values, direction, rel_tol=1e-12):
    """direction: +1 must increase, -1 must decrease, 0 must not increase."""
    if len(values) < 2:
        return ConditionTrend(name, tuple(values), "no trend", "single rung")
    diffs = np.diff(values)
    scale = np.maximum(np.abs(values[:-1]), 1e-300) * rel_tol
    up = diffs > scale
    down = diffs < -scale
    if direction > 0:
        if np.any(down):
            return ConditionTrend(name, tuple(values), "wrong-way", "decreases along the ladder")
        if not np.all(up):
            return ConditionTrend(name, tuple(values), "flat", "non-increasing step; should grow")
    elif direction < 0:
        if np.any(up):
            return ConditionTrend(name, tuple(values), "wrong-way", "increases along the ladder; should tend to 0")
        if not np.all(down):
            return ConditionTrend(name, tuple(values), "flat", "non-decreasing step; should tend to 0")
    else:
        if np.any(up):
            return ConditionTrend(name, tuple(values), "wrong-way", "increases; must stay bounded")
    return ConditionTrend(name, tuple(values), "ok")


def validate_regime_ladder(
    ladder: Sequence[RegimeConfig],
    family: JumpDensityFamily | None = None,
    alpha0=None,
    c1: float = 1.0,
) -> LadderDiagnostics:
    """Report how the joint-limit conditions move along a ladder of regimes."""
    if len(ladder) == 0:
        raise ConfigError("regime ladder is empty")
    lam = np.array([r.lam for r in ladder])
    eps = np.array([r.epsilon for r in ladder])
    n = np.array([r.n for r in ladder], dtype=float)
    with np.errstate(divide="ignore"):
        inv_eps2n = 1.0 / (eps**2 * n)
    conds = [
        _trend("lambda", lam, +1),
        _trend("eps*lambda", eps * lam, -1),
        _trend("lambda^2/n", lam**2 / n, -1),
        _trend("1/(eps^2 n)", inv_eps2n, 0),
    ]
    notes = []
    if family is not None and alpha0 is not None:
        mass = np.array(
            [r.lam * small_mark_mass(family, alpha0, r.kappa(c1) / r.n**r.rho) for r in ladder]
        )
        conds.append(_trend("lambda*P(|V|<=kappa/n^rho)", mass, -1))
    else:
        notes.append("small-jump mass condition skipped: no density supplied")
    if len(ladder) == 1:
        notes.append("no trend: single-rung ladder")
    return LadderDiagnostics(tuple(conds), tuple(notes))


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------


def coefficient_ranges(model: ModelSpec, theta: ParameterPoint, states) -> dict:
    """min |b| and the range of |c| over the given states."""
    states = np.asarray(states, dtype=float)
    bvals = np.abs(np.asarray(model.b(states, theta.sigma), dtype=float) * np.ones_like(states))
    cvals = np.abs(np.asarray(model.c(states, theta.alpha), dtype=float) * np.ones_like(states))
    return {"b_min": float(bvals.min()), "c_min": float(cvals.min()), "c_max": float(cvals.max())}


def check_path_coefficients(model: ModelSpec, theta: ParameterPoint, states, b_floor=1e-8, c_floor=1e-8) -> dict:
    """Warn when b nearly vanishes or c leaves a positive band on a path."""
    rng = coefficient_ranges(model, theta, states)
    if not np.isfinite(rng["b_min"]) or rng["b_min"] <= b_floor:
        warnings.warn(f"{model.name}: |b| drops to {rng['b_min']:.3g} on the path", RuntimeWarning, stacklevel=2)
    if not np.isfinite(rng["c_min"]) or rng["c_min"] <= c_floor:
        warnings.warn(f"{model.name}: |c| drops to {rng['c_min']:.3g} on the path", RuntimeWarning, stacklevel=2)
    return rng


def lipschitz_estimate(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, points: int = 2001) -> float:
    """Largest finite-difference slope on a uniform grid."""
    xs = np.linspace(lo, hi, points)
    vals = np.asarray(func(xs), dtype=float) * np.ones_like(xs)
    if not np.all(np.isfinite(vals)):
        raise ModelError("non-finite coefficient value while estimating a Lipschitz constant")
    return float(np.max(np.abs(np.diff(vals) / np.diff(xs))))


def check_model_assumptions(model: ModelSpec, theta: ParameterPoint, lo: float = -5.0, hi: float = 5.0) -> dict:
    """Numerical spot checks of Lipschitz continuity and coefficient bounds."""
    out = {
        "lipschitz_a": lipschitz_estimate(lambda x: model.a(x, theta.mu), lo, hi),
        "lipschitz_b": lipschitz_estimate(lambda x: model.b(x, theta.sigma), lo, hi),
        "lipschitz_c": lipschitz_estimate(lambda x: model.c(x, theta.alpha), lo, hi),
    }
    out.update(coefficient_ranges(model, theta, np.linspace(lo, hi, 2001)))
    return out


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def _zeros_like_grad(x, k):
    return np.zeros(np.shape(x) + (k,))


def _ones_like_grad(x, k, idx=0):
    out = np.zeros(np.shape(x) + (k,))
    out[..., idx] = 1.0
    return out


def _ou_coefficients():
    return dict(
        a=lambda x, mu: -mu[0] * x,
        a_mu=lambda x, mu: (-np.asarray(x, dtype=float))[..., None],
        a_mumu=lambda x, mu: np.zeros(np.shape(x) + (1, 1)),
        b=lambda x, sigma: sigma[0] + 0.0 * x,
        b_sigma=lambda x, sigma: _ones_like_grad(x, 1),
        b_sigmasigma=lambda x, sigma: np.zeros(np.shape(x) + (1, 1)),
    )


def _constant_c(d3):
    return dict(
        c=lambda x, alpha: 1.0 + 0.0 * x,
        c_alpha=lambda x, alpha: _zeros_like_grad(x, d3),
        c_alphaalpha=lambda x, alpha: np.zeros(np.shape(x) + (d3, d3)),
    )


_OU_DEFAULTS = {
    "normal": ((1.0, 0.5), (-5.0, 0.05), (5.0, 5.0)),
    "gamma": ((1.0, 2.0), (0.05, 1.0), (10.0, 10.0)),
    "ig": ((1.0, 2.0), (0.05, 0.05), (10.0, 20.0)),
    "weibull": ((1.0, 2.0), (0.05, 1.0), (10.0, 10.0)),
    "lognormal": ((0.0, 0.5), (-3.0, 0.05), (3.0, 5.0)),
}


def ou_model(family_key: str, x0: float = 1.0) -> ModelSpec:
    """a = -mu x, b = sigma, c = 1 with the given jump family."""
    fam = get_family(family_key)
    alpha0, alo, ahi = _OU_DEFAULTS[fam.key]
    return ModelSpec(
        name=f"ou-{fam.key}",
        dims=(1, 1, 2),
        density=fam,
        x0=float(x0),
        **_ou_coefficients(),
        **_constant_c(2),
        domain=ParameterDomain([0.01, 0.05, *alo], [5.0, 5.0, *ahi]),
        theta0=ParameterPoint([1.0], [1.0], list(alpha0)),
        c_state_dependent=False,
        description=f"Ornstein-Uhlenbeck drift, constant diffusion, unit jump coefficient, {fam.kind} marks",
    )


def _xc_model(x0: float = 1.0) -> ModelSpec:
    """Two-parameter drift and diffusion, state-dependent jump coefficient sharing alpha_3."""

    def a(x, mu):
        return mu[0] - mu[1] * x

    def a_mu(x, mu):
        x = np.asarray(x, dtype=float)
        return np.stack(np.broadcast_arrays(np.ones_like(x), -x), axis=-1)

    def b(x, s):
        return np.sqrt(s[0] ** 2 + s[1] ** 2 * np.square(x)) if np.ndim(x) else math.sqrt(s[0] ** 2 + s[1] ** 2 * x * x)

    def b_sigma(x, s):
        x = np.asarray(x, dtype=float)
        bb = np.sqrt(s[0] ** 2 + s[1] ** 2 * x**2)
        return np.stack([s[0] / bb, s[1] * x**2 / bb], axis=-1)

    def b_ss(x, s):
        x = np.asarray(x, dtype=float)
        bb = np.sqrt(s[0] ** 2 + s[1] ** 2 * x**2)
        x2 = x**2
        h11 = 1.0 / bb - s[0] ** 2 / bb**3
        h12 = -s[0] * s[1] * x2 / bb**3
        h22 = x2 / bb - s[1] ** 2 * x2**2 / bb**3
        return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)

    def c(x, al):
        return math.exp(al[2] * math.tanh(x)) if not np.ndim(x) else np.exp(al[2] * np.tanh(x))

    def c_alpha(x, al):
        x = np.asarray(x, dtype=float)
        cc = np.exp(al[2] * np.tanh(x))
        z = np.zeros_like(x)
        return np.stack([z, z, np.tanh(x) * cc], axis=-1)

    def c_aa(x, al):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (3, 3))
        out[..., 2, 2] = np.tanh(x) ** 2 * np.exp(al[2] * np.tanh(x))
        return out

    fam = get_family("gamma")
    return ModelSpec(
        name="xc-gamma",
        dims=(2, 2, 3),
        density=fam,
        x0=float(x0),
        a=a,
        a_mu=a_mu,
        a_mumu=lambda x, mu: np.zeros(np.shape(x) + (2, 2)),
        b=b,
        b_sigma=b_sigma,
        b_sigmasigma=b_ss,
        c=c,
        c_alpha=c_alpha,
        c_alphaalpha=c_aa,
        domain=ParameterDomain([-2.0, 0.05, 0.1, 0.0, 0.05, 1.0, -1.0], [2.0, 5.0, 3.0, 2.0, 10.0, 10.0, 1.0]),
        theta0=ParameterPoint([0.2, 1.0], [1.0, 0.5], [1.0, 2.0, 0.3]),
        c_state_dependent=True,
        description="a = mu1 - mu2 x, b = sqrt(s1^2 + s2^2 x^2), c = exp(alpha3 tanh x), Gamma marks",
    )


def builtin_models() -> dict[str, Callable[..., ModelSpec]]:
    table: dict[str, Callable[..., ModelSpec]] = {f"ou-{k}": (lambda x0=1.0, _k=k: ou_model(_k, x0)) for k in FAMILIES}
    table["xc-gamma"] = _xc_model
    return table


def get_model(key: str, x0: float | None = None) -> ModelSpec:
    table = builtin_models()
    try:
        factory = table[key.lower()]
    except KeyError:
        raise ConfigError(f"unknown model {key!r}; choose from {sorted(table)}") from None
    return factory() if x0 is None else factory(x0)
