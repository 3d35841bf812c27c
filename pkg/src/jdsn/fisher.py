"""Asymptotic information by quadrature and the observed information from data."""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .densities import SupportKind
from .errors import QuadratureError, SingularInformationError
from .estimate import FilterLabels, contrast_hessian_blocks
from .model import ModelSpec, ParameterPoint, psi_dalpha
from .simulate import ObservationRecord, solve_limit_path


@dataclass(frozen=True)
class QuadSpec:
    tol: float = 1e-11  # absolute tolerance of the z-integral
    tail_mass: float = 1e-14  # density mass discarded in each truncated tail
    max_depth: int = 50
    initial_panels: int = 64


@dataclass(frozen=True)
class FisherInformation:
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray

    @property
    def assembled(self) -> np.ndarray:
        d1, d2, d3 = self.dims
        out = np.zeros((d1 + d2 + d3,) * 2)
        out[:d1, :d1] = self.I1
        out[d1 : d1 + d2, d1 : d1 + d2] = self.I2
        out[d1 + d2 :, d1 + d2 :] = self.I3
        return out

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.I1.shape[0], self.I2.shape[0], self.I3.shape[0])

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.assembled)

    def require_positive_definite(self, rel: float = 1e-10) -> None:
        ev = self.eigenvalues()
        if ev.min() < rel * max(ev.max(), 0.0) or ev.max() <= 0:
            raise SingularInformationError(
                f"information matrix is numerically singular (eigenvalues {ev.min():.3g} .. {ev.max():.3g}); "
                "asymptotic normality needs it positive definite"
            )

    def inverse(self) -> np.ndarray:
        self.require_positive_definite()
        return np.linalg.inv(self.assembled)

    def sqrt(self) -> np.ndarray:
        """Symmetric square root of the assembled matrix."""
        self.require_positive_definite()
        w, v = np.linalg.eigh(self.assembled)
        return (v * np.sqrt(w)) @ v.T

    def to_dict(self) -> dict:
        return {"I1": self.I1.tolist(), "I2": self.I2.tolist(), "I3": self.I3.tolist(), "assembled": self.assembled.tolist()}

    def to_csv(self) -> str:
        """Row-major assembled matrix; header records the block offsets."""
        d1, d2, d3 = self.dims
        lines = [f"# blocks mu=0:{d1} sigma={d1}:{d1 + d2} alpha={d1 + d2}:{d1 + d2 + d3}"]
        lines.append(",".join(f"c{j}" for j in range(d1 + d2 + d3)))
        for row in self.assembled:
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-11, max_depth: int = 50, initial_panels: int = 64):
    """Vector-valued adaptive Simpson rule.

    ``f`` maps a 1-d array of nodes to an array of shape ``(m, k)``.  Panels
    are refined breadth-first until the Richardson error estimate of every
    panel is below its share of ``tol``.
    """
    if not b > a:
        raise QuadratureError(f"empty interval [{a}, {b}]")
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    fa, fm, fb = (np.atleast_2d(np.asarray(f(p), dtype=float).reshape(p.size, -1)) for p in (lo, mid, hi))
    whole = (hi - lo)[:, None] / 6.0 * (fa + 4.0 * fm + fb)
    total = np.zeros(fa.shape[1])
    span = b - a
    for depth in range(max_depth + 1):
        if lo.size == 0:
            return total
        lq = 0.5 * (lo + mid)
        rq = 0.5 * (mid + hi)
        flq = np.asarray(f(lq), dtype=float).reshape(lq.size, -1)
        frq = np.asarray(f(rq), dtype=float).reshape(rq.size, -1)
        if not (np.all(np.isfinite(flq)) and np.all(np.isfinite(frq))):
            bad = np.concatenate([lq[~np.all(np.isfinite(flq), axis=1)], rq[~np.all(np.isfinite(frq), axis=1)]])
            raise QuadratureError(f"non-finite integrand near z={bad[:3].tolist()}")
        w = (hi - lo)[:, None]
        left = w / 12.0 * (fa + 4.0 * flq + fm)
        right = w / 12.0 * (fm + 4.0 * frq + fb)
        err = np.max(np.abs(left + right - whole), axis=1)
        allowed = 15.0 * tol * (hi - lo) / span
        done = (err <= allowed) | (depth == max_depth)
        if depth == max_depth and not np.all(err <= allowed):
            raise QuadratureError(f"adaptive Simpson did not converge within depth {max_depth}")
        total += np.sum((left + right + (left + right - whole) / 15.0)[done], axis=0)
        keep = ~done
        # split unfinished panels in two
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        flq, frq = flq[keep], frq[keep]
        left, right = left[keep], right[keep]
        lq, rq = lq[keep], rq[keep]
        lo, mid, hi = np.concatenate([lo, mid]), np.concatenate([lq, rq]), np.concatenate([mid, hi])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flq, frq]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
    return total


def _tail_mass(pdf, lo: float, hi: float) -> float:
    # only compared against a cutoff inside a bisection, so slow-convergence warnings are noise
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(pdf, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-10)
    return val


def _bisect(pred, good: float, bad: float, iters: int = 60) -> float:
    """Boundary between a point where ``pred`` holds and one where it fails."""
    for _ in range(iters):
        mid = 0.5 * (good + bad)
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


def integration_range(family, alpha, tail_mass: float = 1e-10) -> tuple[float, float]:
    """Truncation points in the integration variable (log z on the half line).

    Found by bisection on numerically integrated tail masses.
    """
    pdf = lambda z: float(family.pdf(z, alpha))  # noqa: E731
    sample_med = _median(family, alpha)
    if family.support is SupportKind.POSITIVE_HALF_LINE:
        u_med = math.log(sample_med)
        step = 1.0
        u_hi = u_med + step
        while _tail_mass(pdf, math.exp(u_hi), math.inf) > tail_mass:
            step *= 2.0
            u_hi = u_med + step
        u_hi = _bisect(lambda u: _tail_mass(pdf, math.exp(u), math.inf) > tail_mass, u_med, u_hi)
        step = 1.0
        u_lo = u_med - step
        while _tail_mass(pdf, 0.0, math.exp(u_lo)) > tail_mass:
            step *= 2.0
            u_lo = u_med - step
            if u_lo < -700:
                break
        u_lo = _bisect(lambda u: _tail_mass(pdf, 0.0, math.exp(u)) > tail_mass, u_med, u_lo)
        return u_lo, u_hi
    step = 1.0
    z_hi = sample_med + step
    while _tail_mass(pdf, z_hi, math.inf) > tail_mass:
        step *= 2.0
        z_hi = sample_med + step
    z_hi = _bisect(lambda z: _tail_mass(pdf, z, math.inf) > tail_mass, sample_med, z_hi)
    step = 1.0
    z_lo = sample_med - step
    while _tail_mass(pdf, -math.inf, z_lo) > tail_mass:
        step *= 2.0
        z_lo = sample_med - step
    z_lo = _bisect(lambda z: _tail_mass(pdf, -math.inf, z) > tail_mass, sample_med, z_lo)
    return z_lo, z_hi


@functools.lru_cache(maxsize=256)
def _cached_range(key: str, alpha: tuple, tail_mass: float) -> tuple[float, float]:
    from .densities import get_family

    return integration_range(get_family(key), np.asarray(alpha), tail_mass)


def _median(family, alpha) -> float:
    """Rough center of mass used to seed the tail search."""
    rng = np.random.default_rng(0)
    return float(np.median(family.sample(rng, alpha, 4001)))


def integrate_against_density(func, family, alpha, quad: QuadSpec = QuadSpec()):
    """``int func(z) f_alpha(z) dz`` for a vector-valued ``func``.

    Half-line densities are integrated in ``u = log z``.
    """
    lo, hi = _cached_range(family.key, tuple(float(a) for a in np.atleast_1d(alpha)), quad.tail_mass)
    if family.support is SupportKind.POSITIVE_HALF_LINE:
        def integrand(u):
            z = np.exp(u)
            vals = np.asarray(func(z), dtype=float).reshape(z.size, -1)
            return vals * (np.exp(family.logpdf(z, alpha)) * z)[:, None]
    else:
        def integrand(z):
            vals = np.asarray(func(z), dtype=float).reshape(z.size, -1)
            return vals * np.exp(family.logpdf(z, alpha))[:, None]
    return adaptive_simpson(integrand, lo, hi, quad.tol, quad.max_depth, quad.initial_panels)


def jump_score_moments(model: ModelSpec, x: float, alpha0, quad: QuadSpec = QuadSpec()):
    """``(E[dpsi/dalpha], E[dpsi/dalpha dpsi/dalpha^T])`` at state ``x`` under f_alpha0."""
    alpha0 = np.asarray(alpha0, dtype=float)
    d3 = model.dims[2]
    c0 = float(np.asarray(model.c(np.asarray([x]), alpha0)).ravel()[0])

    def func(z):
        g = psi_dalpha(model, np.full(z.shape, x), c0 * z, alpha0)
        outer = g[:, :, None] * g[:, None, :]
        return np.concatenate([g, outer.reshape(z.size, d3 * d3)], axis=1)

    vals = integrate_against_density(func, model.density, alpha0, quad)
    return vals[:d3], vals[d3:].reshape(d3, d3)


def _simpson_weights(m: int) -> np.ndarray:
    """Composite Simpson weights on [0, 1] with ``m`` (odd) nodes."""
    h = 1.0 / (m - 1)
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def fisher_information(
    model: ModelSpec,
    theta0: ParameterPoint,
    time_steps: int = 2001,
    z_quadrature: QuadSpec = QuadSpec(),
    jump_time_steps: int = 101,
) -> FisherInformation:
    """Blocks of the asymptotic information along the deterministic path.

    Time integrals use composite Simpson on the RK4 grid; the jump block's
    inner integral uses adaptive Simpson.  When ``c`` depends on the state
    the inner integral is evaluated on a ``jump_time_steps`` sub-grid.
    """
    if time_steps % 2 == 0:
        time_steps += 1
    path = solve_limit_path(model, theta0.mu, time_steps)
    xs = path.values
    w = _simpson_weights(time_steps)
    mu0, s0, al0 = theta0.mu, theta0.sigma, theta0.alpha

    am = np.asarray(model.a_mu(xs, mu0), dtype=float)
    bb = np.asarray(model.b(xs, s0), dtype=float) * np.ones_like(xs)
    bs = np.asarray(model.b_sigma(xs, s0), dtype=float)
    if not (np.all(np.isfinite(am)) and np.all(np.isfinite(bs)) and np.all(bb != 0)):
        raise QuadratureError(f"{model.name}: non-finite drift/diffusion derivatives or b = 0 on the limit path")
    I1 = np.einsum("t,ti,tj->ij", w / bb**2, am, am)
    I2 = 2.0 * np.einsum("t,ti,tj->ij", w / bb**2, bs, bs)

    if model.c_state_dependent:
        m = jump_time_steps if jump_time_steps % 2 else jump_time_steps + 1
        sub = solve_limit_path(model, mu0, m).values
        wj = _simpson_weights(m)
        I3 = sum(wk * jump_score_moments(model, float(xk), al0, z_quadrature)[1] for wk, xk in zip(wj, sub))
    else:
        I3 = jump_score_moments(model, float(model.x0), al0, z_quadrature)[1]
    I3 = 0.5 * (I3 + I3.T)
    return FisherInformation(0.5 * (I1 + I1.T), 0.5 * (I2 + I2.T), I3)


def jump_information_mc(model: ModelSpec, theta0: ParameterPoint, draws: int, rng: np.random.Generator, x: float | None = None):
    """Sample mean of dpsi/dalpha dpsi/dalpha^T and its standard errors."""
    x = float(model.x0 if x is None else x)
    al0 = np.asarray(theta0.alpha, dtype=float)
    v = model.density.sample(rng, al0, draws)
    c0 = float(np.asarray(model.c(np.asarray([x]), al0)).ravel()[0])
    g = psi_dalpha(model, np.full(draws, x), c0 * v, al0)
    outer = g[:, :, None] * g[:, None, :]
    return outer.mean(axis=0), outer.std(axis=0, ddof=1) / math.sqrt(draws)


def observed_information(
    obs: ObservationRecord,
    theta: ParameterPoint,
    labels: FilterLabels,
    model: ModelSpec,
    lambda_for_scale: float,
) -> np.ndarray:
    """Scaled Hessian of the contrast; tends to minus the asymptotic information.

    The (mu, mu) and (mu, sigma) blocks carry the factor eps^2 n, the
    (sigma, mu) block is the unscaled transpose, and the cross blocks with
    alpha are zero.
    """
    d1, d2, d3 = model.dims
    h_mm, h_ms, h_ss, h_aa = contrast_hessian_blocks(obs, theta, labels, model, lambda_for_scale)
    s = obs.epsilon**2 * obs.n
    out = np.zeros((d1 + d2 + d3,) * 2)
    out[:d1, :d1] = s * h_mm
    out[:d1, d1 : d1 + d2] = s * h_ms
    out[d1 : d1 + d2, :d1] = h_ms.T
    out[d1 : d1 + d2, d1 : d1 + d2] = h_ss
    out[d1 + d2 :, d1 + d2 :] = h_aa
    return out
