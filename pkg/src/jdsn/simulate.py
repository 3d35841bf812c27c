"""Path simulation: exact compound-Poisson jumps, Euler-Maruyama in between."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelError, SimulationDivergedError
from .model import ModelSpec, ParameterPoint, RegimeConfig, check_path_coefficients

DIVERGENCE_BOUND = 1e12
DEFAULT_SUBSTEPS = 16


@dataclass(frozen=True)
class DeterministicPath:
    grid: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)


@dataclass(frozen=True)
class ObservationRecord:
    n: int
    epsilon: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.n + 1,) or self.times.shape != (self.n + 1,):
            raise ConfigError(f"expected {self.n + 1} observations, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("observations must be finite")

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def left_states(self) -> np.ndarray:
        return self.values[:-1]

    @classmethod
    def from_values(cls, values, epsilon: float) -> "ObservationRecord":
        values = np.asarray(values, dtype=float)
        n = values.size - 1
        if n < 2:
            raise ConfigError(f"need at least 3 observations (n >= 2), got {values.size}")
        return cls(n, float(epsilon), np.arange(n + 1) / n, values)


@dataclass(frozen=True)
class SimulatedTruth:
    jump_times: np.ndarray
    jump_marks: np.ndarray
    jump_sizes: np.ndarray  # realized eps * c(X_{tau-}, alpha) * V
    jump_interval: np.ndarray  # 1-based interval index k with t_{k-1} < tau <= t_k
    counts: np.ndarray  # per-interval jump counts, length n
    first_jump: np.ndarray  # tau_k, NaN on jump-free intervals
    last_jump: np.ndarray  # eta_k, NaN on jump-free intervals
    wiener: np.ndarray | None = None  # fine-grid Wiener increments if requested

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def event_classes(self) -> np.ndarray:
        """0, 1 or 2 per interval: no jump, one jump, two or more."""
        return np.minimum(self.counts, 2)


def solve_limit_path(model: ModelSpec, mu0, steps: int = 1001) -> DeterministicPath:
    """Classical RK4 for dx/dt = a(x, mu0), x(0) = x0 on [0, 1]."""
    if steps < 2:
        raise ConfigError(f"steps must be >= 2, got {steps}")
    mu0 = tuple(float(m) for m in np.atleast_1d(mu0))
    grid = np.linspace(0.0, 1.0, steps)
    h = 1.0 / (steps - 1)
    vals = np.empty(steps)
    x = float(model.x0)
    vals[0] = x
    a = model.a
    for i in range(1, steps):
        k1 = a(x, mu0)
        k2 = a(x + 0.5 * h * k1, mu0)
        k3 = a(x + 0.5 * h * k2, mu0)
        k4 = a(x + h * k3, mu0)
        x = x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not math.isfinite(x):
            raise ModelError(f"{model.name}: non-finite drift on the limit path at t={grid[i]:.6g}")
        vals[i] = x
    return DeterministicPath(grid, vals)


def replication_seed(master_seed: int, index: int) -> int:
    """64-bit seed of replication ``index``; independent of scheduling."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def _streams(seed: int):
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _poisson_arrivals(rng: np.random.Generator, lam: float) -> np.ndarray:
    if lam <= 0:
        return np.empty(0)
    times = []
    t = rng.exponential(1.0 / lam)
    while t <= 1.0:
        times.append(t)
        t += rng.exponential(1.0 / lam)
    return np.asarray(times, dtype=float)


def wiener_increments(rng: np.random.Generator, n: int, substeps: int) -> np.ndarray:
    """Fine-grid Wiener increments on [0, 1] with ``n * substeps`` steps.

    For power-of-two ``substeps`` the path is built by dyadic midpoint
    refinement from the coarse increments, so runs that differ only in
    ``substeps`` share the same Brownian path.
    """
    if substeps & (substeps - 1) == 0:
        inc = rng.standard_normal(n) * math.sqrt(1.0 / n)
        h = 1.0 / n
        while inc.size < n * substeps:
            half = 0.5 * inc
            dev = rng.standard_normal(inc.size) * (0.5 * math.sqrt(h))
            inc = np.column_stack([half + dev, half - dev]).ravel()
            h *= 0.5
        return inc
    m = n * substeps
    return rng.standard_normal(m) * math.sqrt(1.0 / m)


def simulate_path(
    model: ModelSpec,
    theta0: ParameterPoint,
    regime: RegimeConfig,
    substeps: int = DEFAULT_SUBSTEPS,
    keep_wiener: bool = False,
    check_coefficients: bool = True,
):
    """Simulate ``X`` on [0, 1] and return ``(ObservationRecord, SimulatedTruth)``."""
    if substeps < 1:
        raise ConfigError(f"substeps must be >= 1, got {substeps}")
    if model.domain is not None and not model.domain.contains(theta0.as_vector()):
        raise ConfigError(f"theta0 {theta0.as_vector()} lies outside the model domain")
    n = regime.n
    eps = float(regime.epsilon)
    rng_jump, rng_w, rng_bridge = _streams(regime.seed)

    taus = _poisson_arrivals(rng_jump, regime.lam)
    marks = model.density.sample(rng_jump, theta0.alpha, taus.size) if taus.size else np.empty(0)
    dW = wiener_increments(rng_w, n, substeps)

    m = n * substeps
    fine = np.arange(m + 1) / m
    # fine step j covers (fine[j], fine[j+1]]
    jump_step = np.searchsorted(fine, taus, side="left") - 1
    jump_step = np.maximum(jump_step, 0)

    mu = tuple(float(v) for v in theta0.mu)
    sg = tuple(float(v) for v in theta0.sigma)
    al = tuple(float(v) for v in theta0.alpha)
    a, b, c = model.a, model.b, model.c
    h = 1.0 / m
    sqrt = math.sqrt

    values = np.empty(n + 1)
    x = float(model.x0)
    values[0] = x
    sizes = np.empty(taus.size)
    dw = dW.tolist()
    ji = 0
    next_step = int(jump_step[0]) if taus.size else -1
    j = 0
    for k in range(1, n + 1):
        for _ in range(substeps):
            if j == next_step:
                s0 = fine[j]
                rem_len = fine[j + 1] - s0
                rem_w = dw[j]
                while ji < taus.size and jump_step[ji] == j:
                    tau = taus[ji]
                    p = tau - s0
                    if p > 0:
                        mean = rem_w * p / rem_len
                        var = max(p * (rem_len - p) / rem_len, 0.0)
                        piece = mean + sqrt(var) * rng_bridge.standard_normal()
                        x = x + a(x, mu) * p + eps * b(x, sg) * piece
                        rem_w -= piece
                        rem_len -= p
                        s0 = tau
                    jump = eps * c(x, al) * marks[ji]
                    sizes[ji] = jump
                    x = x + jump
                    ji += 1
                if rem_len > 0:
                    x = x + a(x, mu) * rem_len + eps * b(x, sg) * rem_w
                next_step = int(jump_step[ji]) if ji < taus.size else -1
            else:
                x = x + a(x, mu) * h + eps * b(x, sg) * dw[j]
            j += 1
        if not (abs(x) <= DIVERGENCE_BOUND):
            raise SimulationDivergedError(
                f"{model.name}: |X| exceeded {DIVERGENCE_BOUND:g} (or became NaN) by t={k / n:.6g}"
            )
        values[k] = x

    times = np.arange(n + 1) / n
    obs = ObservationRecord(n, eps, times, values)
    interval = np.searchsorted(times, taus, side="left")
    interval = np.clip(interval, 1, n)
    counts = np.bincount(interval - 1, minlength=n) if taus.size else np.zeros(n, dtype=int)
    first = np.full(n, np.nan)
    last = np.full(n, np.nan)
    if taus.size:
        # taus are sorted: reverse assignment keeps the first, forward keeps the last
        first[interval[::-1] - 1] = taus[::-1]
        last[interval - 1] = taus
    truth = SimulatedTruth(
        jump_times=taus,
        jump_marks=marks,
        jump_sizes=sizes,
        jump_interval=interval,
        counts=counts,
        first_jump=first,
        last_jump=last,
        wiener=dW if keep_wiener else None,
    )
    if check_coefficients:
        check_path_coefficients(model, theta0, values)
    return obs, truth
