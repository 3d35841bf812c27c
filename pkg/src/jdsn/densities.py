"""Jump-size density families and their log-density derivatives.

Every family works on the *standardized* mark ``z`` and exposes the
log-density ``g(z, alpha) = log f_alpha(z)`` together with its first and
second partial derivatives in ``z`` and ``alpha``.  The chain rule through
the jump coefficient ``c(x, alpha)`` lives in :mod:`jdsn.model`.

All methods are vectorized over ``z``.  Derivative methods assume ``z`` is
in the open support; callers are responsible for masking.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy import special

from .errors import ConfigError, ParameterDomainError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class SupportKind(str, enum.Enum):
    WHOLE_LINE = "WholeLine"
    POSITIVE_HALF_LINE = "PositiveHalfLine"


class JumpDensityFamily:
    """Base class; subclasses fill in the closed forms."""

    kind: str = ""
    key: str = ""
    support: SupportKind = SupportKind.WHOLE_LINE
    # blow-up order of d(psi)/dy near 0; None for whole-line families
    q_exponent: float | None = None
    alpha_dim: int = 2
    alpha_names: tuple[str, ...] = ()

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"

    # -- parameter handling -------------------------------------------------
    def _params(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape[0] < self.alpha_dim:
            raise ParameterDomainError(
                f"{self.key}: expected at least {self.alpha_dim} parameters, got {alpha.shape[0]}"
            )
        a = alpha[: self.alpha_dim]
        if not np.all(np.isfinite(a)):
            raise ParameterDomainError(f"{self.key}: non-finite parameter {a}")
        self.check_alpha(a)
        return a

    def check_alpha(self, a: np.ndarray) -> None:
        raise NotImplementedError

    def admissible(self, alpha) -> bool:
        try:
            self._params(alpha)
        except ParameterDomainError:
            return False
        return True

    def in_support(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.support is SupportKind.WHOLE_LINE:
            return np.isfinite(z)
        return np.isfinite(z) & (z > 0.0)

    # -- density ------------------------------------------------------------
    def logpdf(self, z, alpha) -> np.ndarray:
        a = self._params(alpha)
        z = np.asarray(z, dtype=float)
        inside = self.in_support(z)
        out = np.full(z.shape, -np.inf)
        if np.any(inside):
            out[inside] = self._logpdf(z[inside], a)
        return out if out.ndim else float(out)

    def pdf(self, z, alpha) -> np.ndarray:
        return np.exp(self.logpdf(z, alpha))

    def sample(self, rng: np.random.Generator, alpha, size: int) -> np.ndarray:
        return self._sample(rng, self._params(alpha), size)

    # -- derivatives of g = log f on the open support -------------------------
    def dlog_dz(self, z, alpha):
        return self._dz(np.asarray(z, dtype=float), self._params(alpha))

    def d2log_dz2(self, z, alpha):
        return self._dzz(np.asarray(z, dtype=float), self._params(alpha))

    def dlog_dalpha(self, z, alpha):
        """Shape ``z.shape + (alpha_dim,)``."""
        return self._da(np.asarray(z, dtype=float), self._params(alpha))

    def d2log_dz_dalpha(self, z, alpha):
        return self._dza(np.asarray(z, dtype=float), self._params(alpha))

    def d2log_dalpha2(self, z, alpha):
        """Shape ``z.shape + (alpha_dim, alpha_dim)``."""
        return self._daa(np.asarray(z, dtype=float), self._params(alpha))

    # -- subclass hooks -------------------------------------------------------
    def _logpdf(self, z, a):
        raise NotImplementedError

    def _sample(self, rng, a, size):
        raise NotImplementedError

    def _dz(self, z, a):
        raise NotImplementedError

    def _dzz(self, z, a):
        raise NotImplementedError

    def _da(self, z, a):
        raise NotImplementedError

    def _dza(self, z, a):
        raise NotImplementedError

    def _daa(self, z, a):
        raise NotImplementedError


def _stack(*cols):
    cols = np.broadcast_arrays(*cols)
    return np.stack(cols, axis=-1)


def _sym2(a11, a12, a22):
    a11, a12, a22 = np.broadcast_arrays(a11, a12, a22)
    row1 = np.stack([a11, a12], axis=-1)
    row2 = np.stack([a12, a22], axis=-1)
    return np.stack([row1, row2], axis=-2)


class Normal(JumpDensityFamily):
    """N(alpha_1, alpha_2^2): mean and standard deviation."""

    kind = "Normal"
    key = "normal"
    support = SupportKind.WHOLE_LINE
    q_exponent = None
    alpha_names = ("mean", "sd")

    def check_alpha(self, a):
        if not a[1] > 0:
            raise ParameterDomainError(f"normal: sd must be positive, got {a[1]}")

    def _logpdf(self, z, a):
        m, s = a
        return -LOG_SQRT_2PI - math.log(s) - 0.5 * ((z - m) / s) ** 2

    def _sample(self, rng, a, size):
        return rng.normal(a[0], a[1], size)

    def _dz(self, z, a):
        m, s = a
        return -(z - m) / s**2

    def _dzz(self, z, a):
        return np.full_like(z, -1.0 / a[1] ** 2)

    def _da(self, z, a):
        m, s = a
        d = z - m
        return _stack(d / s**2, -1.0 / s + d**2 / s**3)

    def _dza(self, z, a):
        m, s = a
        return _stack(np.full_like(z, 1.0 / s**2), 2.0 * (z - m) / s**3)

    def _daa(self, z, a):
        m, s = a
        d = z - m
        return _sym2(np.full_like(z, -1.0 / s**2), -2.0 * d / s**3, 1.0 / s**2 - 3.0 * d**2 / s**4)


class Gamma(JumpDensityFamily):
    """Gamma with scale alpha_1 and shape alpha_2 > 1."""

    kind = "Gamma"
    key = "gamma"
    support = SupportKind.POSITIVE_HALF_LINE
    q_exponent = 1.0
    alpha_names = ("scale", "shape")

    def check_alpha(self, a):
        if not (a[0] > 0 and a[1] > 1):
            raise ParameterDomainError(f"gamma: need scale > 0 and shape > 1, got {tuple(a)}")

    def _logpdf(self, z, a):
        th, k = a
        return -special.gammaln(k) - k * math.log(th) + (k - 1.0) * np.log(z) - z / th

    def _sample(self, rng, a, size):
        return rng.gamma(a[1], a[0], size)

    def _dz(self, z, a):
        th, k = a
        return (k - 1.0) / z - 1.0 / th

    def _dzz(self, z, a):
        return -(a[1] - 1.0) / z**2

    def _da(self, z, a):
        th, k = a
        return _stack(-k / th + z / th**2, -special.digamma(k) - math.log(th) + np.log(z))

    def _dza(self, z, a):
        th, _ = a
        return _stack(np.full_like(z, 1.0 / th**2), 1.0 / z)

    def _daa(self, z, a):
        th, k = a
        return _sym2(k / th**2 - 2.0 * z / th**3, np.full_like(z, -1.0 / th), np.full_like(z, -special.polygamma(1, k)))


class InverseGaussian(JumpDensityFamily):
    """Inverse Gaussian with mean alpha_1 and shape alpha_2."""

    kind = "InverseGaussian"
    key = "ig"
    support = SupportKind.POSITIVE_HALF_LINE
    q_exponent = 2.0
    alpha_names = ("mean", "shape")

    def check_alpha(self, a):
        if not (a[0] > 0 and a[1] > 0):
            raise ParameterDomainError(f"ig: need mean > 0 and shape > 0, got {tuple(a)}")

    def _logpdf(self, z, a):
        m, s = a
        return 0.5 * math.log(s) - LOG_SQRT_2PI - 1.5 * np.log(z) - s * (z - m) ** 2 / (2.0 * m**2 * z)

    def _sample(self, rng, a, size):
        return rng.wald(a[0], a[1], size)

    def _dz(self, z, a):
        m, s = a
        return -1.5 / z - 0.5 * s * (1.0 / m**2 - 1.0 / z**2)

    def _dzz(self, z, a):
        return 1.5 / z**2 - a[1] / z**3

    def _da(self, z, a):
        m, s = a
        return _stack(s * (z - m) / m**3, 0.5 / s - (z - m) ** 2 / (2.0 * m**2 * z))

    def _dza(self, z, a):
        m, s = a
        return _stack(np.full_like(z, s / m**3), -0.5 * (1.0 / m**2 - 1.0 / z**2))

    def _daa(self, z, a):
        m, s = a
        return _sym2(s * (2.0 / m**3 - 3.0 * z / m**4), (z - m) / m**3, np.full_like(z, -0.5 / s**2))


class Weibull(JumpDensityFamily):
    """Weibull with scale alpha_1 and shape alpha_2 > 1."""

    kind = "Weibull"
    key = "weibull"
    support = SupportKind.POSITIVE_HALF_LINE
    q_exponent = 1.0
    alpha_names = ("scale", "shape")

    def check_alpha(self, a):
        if not (a[0] > 0 and a[1] > 1):
            raise ParameterDomainError(f"weibull: need scale > 0 and shape > 1, got {tuple(a)}")

    def _logpdf(self, z, a):
        lam, k = a
        u = z / lam
        return math.log(k) - math.log(lam) + (k - 1.0) * np.log(u) - u**k

    def _sample(self, rng, a, size):
        return a[0] * rng.weibull(a[1], size)

    def _dz(self, z, a):
        lam, k = a
        w = (z / lam) ** k
        return (k - 1.0 - k * w) / z

    def _dzz(self, z, a):
        lam, k = a
        w = (z / lam) ** k
        return -(k - 1.0) * (1.0 + k * w) / z**2

    def _da(self, z, a):
        lam, k = a
        lu = np.log(z / lam)
        w = np.exp(k * lu)
        return _stack(k * (w - 1.0) / lam, 1.0 / k + lu - w * lu)

    def _dza(self, z, a):
        lam, k = a
        lu = np.log(z / lam)
        w = np.exp(k * lu)
        return _stack(k**2 * w / (lam * z), (1.0 - w - k * w * lu) / z)

    def _daa(self, z, a):
        lam, k = a
        lu = np.log(z / lam)
        w = np.exp(k * lu)
        return _sym2(
            -(k / lam**2) * ((k + 1.0) * w - 1.0),
            (w - 1.0 + k * w * lu) / lam,
            -1.0 / k**2 - w * lu**2,
        )


class LogNormal(JumpDensityFamily):
    """log V ~ N(alpha_1, alpha_2^2)."""

    kind = "LogNormal"
    key = "lognormal"
    support = SupportKind.POSITIVE_HALF_LINE
    # the true bound carries an extra log factor; 1 matches the rho range (0, 1/4)
    q_exponent = 1.0
    alpha_names = ("meanlog", "sdlog")

    def check_alpha(self, a):
        if not a[1] > 0:
            raise ParameterDomainError(f"lognormal: sdlog must be positive, got {a[1]}")

    def _logpdf(self, z, a):
        m, s = a
        lz = np.log(z)
        return -LOG_SQRT_2PI - math.log(s) - lz - (lz - m) ** 2 / (2.0 * s**2)

    def _sample(self, rng, a, size):
        return rng.lognormal(a[0], a[1], size)

    def _dz(self, z, a):
        m, s = a
        return -(s**2 + np.log(z) - m) / (s**2 * z)

    def _dzz(self, z, a):
        m, s = a
        return 1.0 / z**2 - (1.0 - np.log(z) + m) / (s**2 * z**2)

    def _da(self, z, a):
        m, s = a
        d = np.log(z) - m
        return _stack(d / s**2, -1.0 / s + d**2 / s**3)

    def _dza(self, z, a):
        m, s = a
        d = np.log(z) - m
        return _stack(1.0 / (s**2 * z), 2.0 * d / (s**3 * z))

    def _daa(self, z, a):
        m, s = a
        d = np.log(z) - m
        return _sym2(np.full_like(z, -1.0 / s**2), -2.0 * d / s**3, 1.0 / s**2 - 3.0 * d**2 / s**4)


FAMILIES: dict[str, JumpDensityFamily] = {
    f.key: f for f in (Normal(), Gamma(), InverseGaussian(), Weibull(), LogNormal())
}


def get_family(key: str) -> JumpDensityFamily:
    try:
        return FAMILIES[key.lower()]
    except KeyError:
        raise ConfigError(f"unknown density family {key!r}; choose from {sorted(FAMILIES)}") from None


def density_pdf(family: JumpDensityFamily, alpha, z):
    """Jump-size density; exactly 0 off the support."""
    return family.pdf(z, alpha)
