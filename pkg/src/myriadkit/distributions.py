"""Student-t, projected normal and wrapped Cauchy densities, samplers and
parameter conversions.

Conventions
-----------
* All circular quantities are reduced to [-pi, pi); where a formula yields
  +pi it is mapped to -pi.
* Samplers take an explicit 64-bit seed and draw from ``numpy``'s PCG64
  generator, so sequences are reproducible across platforms.  Gamma variates
  come from the generator's squeeze method; the samplers are validated by
  moment and distribution-fit tests rather than by a fixed stream contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidNu, NotPositiveDefinite, NotUnitVector
from .estimators import SampleSet
from .numkernel import SpdMatrix, logdet, mahalanobis

__all__ = [
    "StudentTParams",
    "WrappedCauchyParams",
    "wrap_angle",
    "student_t_logpdf",
    "projected_normal_logpdf",
    "wrapped_cauchy_pdf",
    "sample_student_t",
    "sample_wrapped_cauchy",
    "pn_to_wc",
    "wc_to_pn",
]

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Reduce angles to the canonical interval [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=np.float64) + math.pi, TWO_PI) - math.pi


@dataclass(frozen=True)
class StudentTParams:
    """Location mu, scatter sigma and degrees of freedom nu.

    nu = 0 is allowed only for scatter-only / projected-normal use; the
    density and sampler require nu > 0.
    """

    mu: np.ndarray
    sigma: SpdMatrix
    nu: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "mu", mu)
        if not isinstance(self.sigma, SpdMatrix):
            object.__setattr__(self, "sigma", SpdMatrix(self.sigma))
        if mu.shape[0] != self.sigma.dim:
            raise ValueError("mu and sigma dimensions disagree")
        if not np.isfinite(self.nu) or self.nu < 0:
            raise InvalidNu(f"nu must be >= 0, got {self.nu}")

    @property
    def dim(self) -> int:
        return self.sigma.dim


@dataclass(frozen=True)
class WrappedCauchyParams:
    """Circular location a in [-pi, pi) and concentration rho in [0, 1)."""

    a: float
    rho: float

    def __post_init__(self):
        if not (-math.pi <= self.a < math.pi):
            raise ValueError(f"a must lie in [-pi, pi), got {self.a}")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def gamma(self) -> float:
        """Cauchy scale of the unwrapped distribution, -log(rho)."""
        return math.inf if self.rho == 0.0 else -math.log(self.rho)


def student_t_logpdf(x, p: StudentTParams) -> float:
    """Log density of the d-dimensional Student-t distribution at x."""
    if p.nu <= 0:
        raise InvalidNu("density requires nu > 0")
    d = p.dim
    nu = p.nu
    delta = mahalanobis(x, p.mu, p.sigma)
    return float(
        gammaln(0.5 * (d + nu))
        - gammaln(0.5 * nu)
        - 0.5 * d * math.log(math.pi * nu)
        - 0.5 * logdet(p.sigma)
        - 0.5 * (d + nu) * math.log1p(delta / nu)
    )


def projected_normal_logpdf(x, sigma) -> float:
    """Log density on the unit sphere of the zero-mean projected normal.

    The scatter matrix is only identifiable up to a positive factor:
    the value is unchanged under sigma -> lambda * sigma.
    """
    sigma = sigma if isinstance(sigma, SpdMatrix) else SpdMatrix(sigma)
    d = sigma.dim
    if d < 2:
        raise ValueError("projected normal requires dimension >= 2")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    nrm = float(np.linalg.norm(x))
    if abs(nrm - 1.0) > 1e-8:
        raise NotUnitVector(f"|x| = {nrm}, expected 1 within 1e-8")
    delta = mahalanobis(x, np.zeros(d), sigma)
    return float(
        gammaln(0.5 * d)
        - math.log(2.0)
        - 0.5 * d * math.log(math.pi)
        - 0.5 * logdet(sigma)
        - 0.5 * d * math.log(delta)
    )


def wrapped_cauchy_pdf(theta, p: WrappedCauchyParams):
    """Wrapped Cauchy density on [-pi, pi); vectorized in theta."""
    theta = np.asarray(theta, dtype=np.float64)
    rho = p.rho
    val = (1.0 - rho * rho) / (
        TWO_PI * (1.0 + rho * rho - 2.0 * rho * np.cos(theta - p.a))
    )
    return val if val.ndim else float(val)


def sample_student_t(p: StudentTParams, n: int, seed: int) -> SampleSet:
    """Draw n i.i.d. samples X = mu + Z / sqrt(Y).

    Z is centered Gaussian with the given scatter (Cholesky factor times
    standard normals) and Y is Gamma(nu/2, rate nu/2), independent.
    Deterministic given the seed.
    """
    if p.nu <= 0:
        raise InvalidNu("sampling requires nu > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = p.dim
    z = rng.standard_normal((n, d)) @ p.sigma.cholesky_lower().T
    y = rng.gamma(shape=0.5 * p.nu, scale=2.0 / p.nu, size=n)
    return SampleSet(p.mu + z / np.sqrt(y)[:, None])


def sample_wrapped_cauchy(p: WrappedCauchyParams, n: int, seed: int) -> np.ndarray:
    """Draw n wrapped Cauchy angles in [-pi, pi); deterministic given seed.

    rho = 0 has no finite Cauchy scale; the degenerate case falls back to
    uniform draws on the circle (the rho -> 0 limit of the density).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    if p.rho == 0.0:
        return wrap_angle(-math.pi + TWO_PI * u)
    draws = p.a + p.gamma * np.tan(math.pi * (u - 0.5))
    return wrap_angle(draws)


def pn_to_wc(sigma) -> WrappedCauchyParams:
    """Wrapped Cauchy parameters of the doubled angle of a 2-d projected normal.

    The isotropic case (equal diagonal, zero off-diagonal) has rho = 0 and no
    meaningful location; by convention a = -pi is returned there and callers
    must not interpret a when rho vanishes.
    """
    sigma = sigma if isinstance(sigma, SpdMatrix) else SpdMatrix(sigma)
    if sigma.dim != 2:
        raise ValueError("conversion defined for 2x2 scatter matrices only")
    s11 = float(sigma.entries[0, 0])
    s22 = float(sigma.entries[1, 1])
    s12 = float(sigma.entries[0, 1])
    det = s11 * s22 - s12 * s12
    if det <= 0.0:
        raise NotPositiveDefinite("non-positive determinant")
    tr = s11 + s22
    root = 2.0 * math.sqrt(det)
    ratio = max((tr - root) / (tr + root), 0.0)
    rho = math.sqrt(ratio)
    if s11 == s22 and s12 == 0.0:
        a = -math.pi
    else:
        a = math.atan2(2.0 * s12, s11 - s22)
        if a == math.pi:
            a = -math.pi
    return WrappedCauchyParams(a=a, rho=rho)


def wc_to_pn(p: WrappedCauchyParams) -> SpdMatrix:
    """Trace-one scatter matrix whose projected normal doubles to the given
    wrapped Cauchy distribution (representative of the positive-scale class)."""
    c = p.rho / (1.0 + p.rho * p.rho)
    off = c * math.sin(p.a)
    dia = c * math.cos(p.a)
    return SpdMatrix(np.array([[0.5 + dia, off], [off, 0.5 - dia]]))
