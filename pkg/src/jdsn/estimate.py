"""Threshold filter, contrast functions, scores and the contrast maximizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .densities import SupportKind
from .errors import ConfigError, ModelError
from .model import ModelSpec, ParameterDomain, ParameterPoint, RegimeConfig, psi, psi_d2, psi_dalpha
from .simulate import ObservationRecord

FILTER_SCALES = ("epsilon", "raw")
LAMBDA_MODES = ("true", "estimated")


@dataclass(frozen=True)
class FilterLabels:
    """Per-interval C/D labels; ``is_jump[k-1]`` is True on D_k."""

    is_jump: np.ndarray
    threshold: float
    support: SupportKind
    scale: float = 1.0  # increments are divided by this before comparison

    @property
    def n(self) -> int:
        return int(self.is_jump.size)

    @property
    def n_jump(self) -> int:
        return int(np.count_nonzero(self.is_jump))

    @property
    def n_continuous(self) -> int:
        return self.n - self.n_jump

    @property
    def labels(self) -> np.ndarray:
        return np.where(self.is_jump, "D", "C")

    @classmethod
    def from_labels(cls, labels, threshold: float, support: SupportKind, scale: float = 1.0) -> "FilterLabels":
        lab = np.asarray(labels)
        if not np.all(np.isin(lab, ("C", "D"))):
            raise ConfigError("labels must be 'C' or 'D'")
        return cls(lab == "D", float(threshold), support, float(scale))


def classify_increments(
    obs: ObservationRecord,
    regime: RegimeConfig,
    support: SupportKind,
    filter_scale: str = "epsilon",
) -> FilterLabels:
    """Label each increment C (continuous) or D (jump) at threshold ``v / n^rho``.

    With ``filter_scale="epsilon"`` (default) the increment is divided by
    ``obs.epsilon`` first, so the threshold acts on the noise scale where
    jumps have size ``c * V``.  ``"raw"`` compares the increment itself.
    """
    if obs.n != regime.n:
        raise ConfigError(f"observation count {obs.n} does not match regime n={regime.n}")
    if filter_scale not in FILTER_SCALES:
        raise ConfigError(f"filter_scale must be one of {FILTER_SCALES}, got {filter_scale!r}")
    scale = obs.epsilon if filter_scale == "epsilon" else 1.0
    if scale <= 0:
        raise ConfigError("epsilon-scaled filtering needs epsilon > 0")
    y = obs.increments / scale
    thr = regime.threshold
    if support is SupportKind.WHOLE_LINE:
        is_jump = np.abs(y) > thr
    else:
        is_jump = y > thr
    return FilterLabels(is_jump, thr, support, scale)


def estimate_intensity(labels: FilterLabels) -> float:
    """Number of D intervals, an estimate of the jump intensity."""
    return float(labels.n_jump)


# ---------------------------------------------------------------------------
# contrast pieces
# ---------------------------------------------------------------------------


class _ContinuousPart:
    """Gaussian quasi-likelihood on the C intervals, with cached data."""

    def __init__(self, obs: ObservationRecord, labels: FilterLabels, model: ModelSpec):
        if labels.n != obs.n:
            raise ConfigError("labels and observations disagree on n")
        keep = ~labels.is_jump
        self.n = obs.n
        self.eps2 = obs.epsilon**2
        self.x = obs.left_states[keep]
        self.dx = obs.increments[keep]
        self.model = model

    def _terms(self, mu, sigma):
        m = self.model
        shape = self.x.shape
        r = self.dx - np.asarray(m.a(self.x, mu), dtype=float) * np.ones(shape) / self.n
        bb = np.asarray(m.b(self.x, sigma), dtype=float) * np.ones(shape)
        if np.any(bb == 0.0):
            raise ModelError(f"{m.name}: b vanishes at a C-interval state")
        return r, bb

    def value(self, mu, sigma) -> float:
        if self.x.size == 0:
            return 0.0
        r, bb = self._terms(mu, sigma)
        b2 = bb * bb
        q = r * r * self.n / (2.0 * self.eps2 * b2)
        return -float(np.sum(q + 0.5 * np.log(b2))) / self.n

    def gradient(self, mu, sigma):
        m = self.model
        d1, d2, _ = m.dims
        if self.x.size == 0:
            return np.zeros(d1), np.zeros(d2)
        r, bb = self._terms(mu, sigma)
        am = np.asarray(m.a_mu(self.x, mu), dtype=float)
        bs = np.asarray(m.b_sigma(self.x, sigma), dtype=float)
        g_mu = (r / bb**2) @ am / (self.n * self.eps2)
        q = r * r * self.n / (self.eps2 * bb**2)
        g_sigma = -((1.0 - q) / bb) @ bs / self.n
        return g_mu, g_sigma

    def scores(self, mu, sigma):
        """Per-interval terms summing to (eps*n*dPsi/dmu, sqrt(n)*dPsi/dsigma)."""
        m = self.model
        r, bb = self._terms(mu, sigma)
        am = np.asarray(m.a_mu(self.x, mu), dtype=float)
        bs = np.asarray(m.b_sigma(self.x, sigma), dtype=float)
        eps = math.sqrt(self.eps2)
        xi1 = (r / (eps * bb**2))[:, None] * am
        q = r * r * self.n / (self.eps2 * bb**2)
        xi2 = -((1.0 - q) / (math.sqrt(self.n) * bb))[:, None] * bs
        return xi1, xi2

    def hessian(self, mu, sigma):
        """Raw second derivatives (mumu, musigma, sigmasigma) of the contrast."""
        m = self.model
        d1, d2, _ = m.dims
        if self.x.size == 0:
            return np.zeros((d1, d1)), np.zeros((d1, d2)), np.zeros((d2, d2))
        r, bb = self._terms(mu, sigma)
        n, e2 = self.n, self.eps2
        am = np.asarray(m.a_mu(self.x, mu), dtype=float)
        amm = np.asarray(m.a_mumu(self.x, mu), dtype=float) * np.ones(self.x.shape + (d1, d1))
        bs = np.asarray(m.b_sigma(self.x, sigma), dtype=float)
        bss = np.asarray(m.b_sigmasigma(self.x, sigma), dtype=float) * np.ones(self.x.shape + (d2, d2))
        w = 1.0 / bb**2
        h_mm = (np.einsum("k,kij->ij", r * w, amm) - np.einsum("k,ki,kj->ij", w / n, am, am)) / (n * e2)
        h_ms = -2.0 * np.einsum("k,ki,kj->ij", r / bb**3, am, bs) / (n * e2)
        q = r * r * n / (e2 * bb**2)
        dlogb = bss / bb[:, None, None] - np.einsum("ki,kj->kij", bs, bs) / bb[:, None, None] ** 2
        h_ss = -np.einsum("k,kij->ij", 1.0 - q, dlogb) / n - 2.0 * np.einsum("k,ki,kj->ij", q / bb**2, bs, bs) / n
        return h_mm, h_ms, h_ss


class _JumpPart:
    """Sum of psi over the D intervals."""

    def __init__(self, obs: ObservationRecord, labels: FilterLabels, model: ModelSpec):
        if labels.n != obs.n:
            raise ConfigError("labels and observations disagree on n")
        if obs.epsilon <= 0:
            raise ConfigError("the jump contrast needs epsilon > 0")
        keep = labels.is_jump
        self.x = obs.left_states[keep]
        self.y = obs.increments[keep] / obs.epsilon
        self.model = model

    def value(self, alpha, lam: float) -> float:
        if self.x.size == 0:
            return 0.0
        return float(np.sum(psi(self.model, self.x, self.y, alpha))) / lam

    def _defined(self, alpha):
        # intervals on the psi = 0 branch contribute nothing to any derivative
        c = np.asarray(self.model.c(self.x, alpha), dtype=float) * np.ones_like(self.x)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.y / c
        return (c != 0.0) & self.model.density.in_support(z)

    def gradient(self, alpha, lam: float) -> np.ndarray:
        d3 = self.model.dims[2]
        ok = self._defined(alpha)
        if not np.any(ok):
            return np.zeros(d3)
        return psi_dalpha(self.model, self.x[ok], self.y[ok], alpha).sum(axis=0) / lam

    def scores(self, alpha, lam: float) -> np.ndarray:
        out = np.zeros((self.x.size, self.model.dims[2]))
        ok = self._defined(alpha)
        if np.any(ok):
            out[ok] = psi_dalpha(self.model, self.x[ok], self.y[ok], alpha) / math.sqrt(lam)
        return out

    def hessian(self, alpha, lam: float) -> np.ndarray:
        d3 = self.model.dims[2]
        ok = self._defined(alpha)
        if not np.any(ok):
            return np.zeros((d3, d3))
        _, daa = psi_d2(self.model, self.x[ok], self.y[ok], alpha)
        return daa.sum(axis=0) / lam


def contrast_continuous(obs, mu, sigma, labels, model) -> float:
    return _ContinuousPart(obs, labels, model).value(np.atleast_1d(mu), np.atleast_1d(sigma))


def contrast_jump(obs, alpha, labels, model, lambda_for_scale: float) -> float:
    if not lambda_for_scale > 0:
        raise ConfigError(f"lambda_for_scale must be positive, got {lambda_for_scale}")
    return _JumpPart(obs, labels, model).value(np.atleast_1d(alpha), lambda_for_scale)


def contrast_full(obs, theta: ParameterPoint, labels, model, lambda_for_scale: float) -> float:
    return contrast_continuous(obs, theta.mu, theta.sigma, labels, model) + contrast_jump(
        obs, theta.alpha, labels, model, lambda_for_scale
    )


def contrast_gradient(obs, theta: ParameterPoint, labels, model, lambda_for_scale: float) -> np.ndarray:
    """Analytic gradient of the full contrast, ordered (mu, sigma, alpha)."""
    g_mu, g_sigma = _ContinuousPart(obs, labels, model).gradient(theta.mu, theta.sigma)
    g_alpha = _JumpPart(obs, labels, model).gradient(theta.alpha, lambda_for_scale)
    return np.concatenate([g_mu, g_sigma, g_alpha])


def contrast_hessian_blocks(obs, theta: ParameterPoint, labels, model, lambda_for_scale: float):
    """Unscaled Hessian blocks ``(mumu, musigma, sigmasigma, alphaalpha)``."""
    h_mm, h_ms, h_ss = _ContinuousPart(obs, labels, model).hessian(theta.mu, theta.sigma)
    h_aa = _JumpPart(obs, labels, model).hessian(theta.alpha, lambda_for_scale)
    return h_mm, h_ms, h_ss, h_aa


def score_scalings(obs: ObservationRecord, lam: float) -> tuple[float, float, float]:
    """Factors turning contrast gradients into score sums: (eps*n, sqrt(n), sqrt(lam))."""
    return obs.epsilon * obs.n, math.sqrt(obs.n), math.sqrt(lam)


def score_components(obs, theta: ParameterPoint, labels, model, lambda_for_scale: float):
    """Per-interval score matrices ``(xi1, xi2, xi3)``, each of shape ``(n, d_l)``.

    Column sums equal the contrast gradient scaled by :func:`score_scalings`.
    """
    d1, d2, d3 = model.dims
    n = obs.n
    xi1 = np.zeros((n, d1))
    xi2 = np.zeros((n, d2))
    xi3 = np.zeros((n, d3))
    cont = ~labels.is_jump
    if np.any(cont):
        s1, s2 = _ContinuousPart(obs, labels, model).scores(theta.mu, theta.sigma)
        xi1[cont] = s1
        xi2[cont] = s2
    if labels.n_jump:
        xi3[labels.is_jump] = _JumpPart(obs, labels, model).scores(theta.alpha, lambda_for_scale)
    return xi1, xi2, xi3


# ---------------------------------------------------------------------------
# maximization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerOptions:
    starts: int = 8
    max_iter: int = 2000
    xatol: float = 1e-9  # simplex size in units of the box width
    fatol: float = 1e-13
    polish: bool = True
    lambda_mode: str = "true"
    filter_scale: str = "epsilon"
    joint: bool = False

    def __post_init__(self):
        if self.starts < 1:
            raise ConfigError("starts must be >= 1")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ConfigError(f"lambda_mode must be one of {LAMBDA_MODES}")
        if self.filter_scale not in FILTER_SCALES:
            raise ConfigError(f"filter_scale must be one of {FILTER_SCALES}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict | None) -> "OptimizerOptions":
        return cls(**(data or {}))


@dataclass
class BlockResult:
    x: np.ndarray
    value: float
    center_value: float
    iterations: int
    restarts: int
    best_start: int
    converged: bool
    message: str = ""


@dataclass
class EstimationResult:
    theta_hat: ParameterPoint
    contrast_value: float
    lambda_hat: float
    lambda_used: float
    n_continuous: int
    n_jump: int
    converged: bool
    iterations: int
    restarts: int
    blocks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "contrast_value": self.contrast_value,
            "lambda_hat": self.lambda_hat,
            "lambda_used": self.lambda_used,
            "n_continuous": self.n_continuous,
            "n_jump": self.n_jump,
            "converged": self.converged,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "blocks": self.blocks,
        }


def start_points(dim: int, count: int) -> np.ndarray:
    """Box center followed by Halton points, in unit coordinates."""
    pts = [np.full(dim, 0.5)]
    if count > 1:
        halton = qmc.Halton(d=dim, scramble=False).random(count)[1:]
        pts.extend(halton)
    return np.asarray(pts[:count])


def maximize_block(fun, grad, domain: ParameterDomain, opts: OptimizerOptions) -> BlockResult:
    """Multi-start Nelder-Mead with a bounded quasi-Newton polish.

    Works in unit coordinates of the box.  Non-finite objective values count
    as -inf.  Ties go to the lowest start index.
    """
    lo, width = domain.lower, domain.upper - domain.lower
    margin = 1e-9
    bounds = [(margin, 1.0 - margin)] * domain.d

    def neg(u):
        try:
            val = fun(lo + u * width)
        except (FloatingPointError, ValueError, ArithmeticError):
            return math.inf
        return -val if math.isfinite(val) else math.inf

    def neg_grad(u):
        g = grad(lo + u * width)
        g = np.where(np.isfinite(g), g, 0.0)
        return -g * width

    starts = start_points(domain.d, opts.starts)
    center_val = neg(starts[0])
    best_u, best_f, best_i = None, math.inf, -1
    iters = 0
    ok_any = False
    for i, u0 in enumerate(starts):
        with np.errstate(all="ignore"):
            res = optimize.minimize(
                neg,
                u0,
                method="Nelder-Mead",
                bounds=bounds,
                options={"xatol": opts.xatol, "fatol": opts.fatol, "maxiter": opts.max_iter, "maxfev": 4 * opts.max_iter},
            )
        u, f = res.x, res.fun
        iters += int(res.nit)
        ok = bool(res.success)
        if opts.polish and grad is not None and math.isfinite(f):
            with np.errstate(all="ignore"):
                pol = optimize.minimize(neg, u, jac=neg_grad, method="L-BFGS-B", bounds=bounds,
                                        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
            if math.isfinite(pol.fun) and pol.fun <= f:
                u, f = pol.x, pol.fun
                ok = ok or bool(pol.success)
            iters += int(pol.nit)
        if f < best_f:
            best_u, best_f, best_i = u, f, i
            ok_any = ok
    if best_u is None:
        best_u, best_f, best_i = starts[0], center_val, 0
    improved = best_f < center_val - 1e-15 * max(1.0, abs(center_val))
    x = domain.clamp(lo + np.clip(best_u, 0.0, 1.0) * width)
    value = -neg((x - lo) / width)
    return BlockResult(
        x=x,
        value=value,
        center_value=-center_val,
        iterations=iters,
        restarts=len(starts),
        best_start=best_i,
        converged=bool(improved and ok_any),
        message="" if improved else "no start improved on the domain center",
    )


def _lambda_for_scale(labels: FilterLabels, regime: RegimeConfig, mode: str) -> tuple[float, float]:
    lam_hat = estimate_intensity(labels)
    if mode == "true" and regime.lam > 0:
        return lam_hat, float(regime.lam)
    return lam_hat, max(lam_hat, 1.0)


def maximize_contrast(
    obs: ObservationRecord,
    model: ModelSpec,
    regime: RegimeConfig,
    opts: OptimizerOptions | None = None,
    labels: FilterLabels | None = None,
) -> EstimationResult:
    """Maximize the contrast over the model's parameter box.

    The contrast separates into a (mu, sigma) part and an alpha part, which
    are maximized independently unless ``opts.joint`` is set.
    """
    opts = opts or OptimizerOptions()
    if model.domain is None:
        raise ConfigError(f"{model.name}: no parameter domain")
    if obs.n < 2:
        raise ConfigError("need n >= 2 observations")
    if labels is None:
        labels = classify_increments(obs, regime, model.density.support, opts.filter_scale)
    lam_hat, lam = _lambda_for_scale(labels, regime, opts.lambda_mode)
    d1, d2, d3 = model.dims
    dom = model.domain
    cont = _ContinuousPart(obs, labels, model)
    jump = _JumpPart(obs, labels, model)

    if opts.joint:
        def f_all(v):
            mu, sg, al = model.split(v)
            return cont.value(mu, sg) + jump.value(al, lam)

        def g_all(v):
            mu, sg, al = model.split(v)
            gm, gs = cont.gradient(mu, sg)
            return np.concatenate([gm, gs, jump.gradient(al, lam)])

        res = maximize_block(f_all, g_all, dom, opts)
        blocks = {"joint": _block_dict(res)}
        x_all, total = res.x, res.value
        converged, iters, restarts = res.converged, res.iterations, res.restarts
    else:
        def f1(v):
            return cont.value(v[:d1], v[d1:])

        def g1(v):
            gm, gs = cont.gradient(v[:d1], v[d1:])
            return np.concatenate([gm, gs])

        r1 = maximize_block(f1, g1, dom.sub(0, d1 + d2), opts)
        r2 = maximize_block(lambda v: jump.value(v, lam), lambda v: jump.gradient(v, lam), dom.sub(d1 + d2, d1 + d2 + d3), opts)
        blocks = {"continuous": _block_dict(r1), "jump": _block_dict(r2)}
        x_all = np.concatenate([r1.x, r2.x])
        total = r1.value + r2.value
        converged = r1.converged and r2.converged
        iters = r1.iterations + r2.iterations
        restarts = r1.restarts + r2.restarts

    theta_hat = ParameterPoint.from_vector(x_all, model.dims)
    return EstimationResult(
        theta_hat=theta_hat,
        contrast_value=float(total),
        lambda_hat=lam_hat,
        lambda_used=lam,
        n_continuous=labels.n_continuous,
        n_jump=labels.n_jump,
        converged=bool(converged),
        iterations=int(iters),
        restarts=int(restarts),
        blocks=blocks,
    )


def _block_dict(r: BlockResult) -> dict:
    return {
        "x": r.x.tolist(),
        "value": r.value,
        "center_value": r.center_value,
        "iterations": r.iterations,
        "restarts": r.restarts,
        "best_start": r.best_start,
        "converged": r.converged,
        "message": r.message,
    }
