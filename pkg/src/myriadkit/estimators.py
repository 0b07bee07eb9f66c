"""Weighted maximum-likelihood estimators for the Student-t family.

The central object is the weighted negative log-likelihood

    L(mu, Sigma) = (d + nu) * sum_i w_i log(nu + delta_i) + log|Sigma|,

with delta_i the squared Mahalanobis distance of sample i.  Four fixed-point
iterations minimize it (or its nu = 0 analogue):

* ``gmmf_estimate`` -- the normalized (Jacobi-style) iteration that updates
  location and scatter simultaneously from the previous iterate; the
  multivariate myriad filter.
* ``em_estimate`` -- the classical EM iteration: same location update, but
  scatter evaluated at the fresh location with an explicit (nu + d) factor.
* ``tyler_estimate`` -- the nu = 0 scatter-only estimator on sphere-normalized
  data, trace-normalized after every step.
* ``wrapped_cauchy_estimate`` -- the two-dimensional nu = 0 case rewritten in
  circular parameters (zeta_1, zeta_2) for angle data.

Reproducibility: every estimator first reorders its samples into a canonical
lexicographic order and accumulates all weighted sums in ascending index
order (plain einsum loops, no threaded reductions), so results are
bit-identical under permutation of the input pairs and independent of any
caller-side parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import (
    AssumptionViolation,
    DegenerateData,
    InvalidNu,
    NotPositiveDefinite,
    ZeroSample,
)
from .numkernel import SpdMatrix, _factor

__all__ = [
    "WeightVector",
    "SampleSet",
    "EstimatorOptions",
    "EstimateResult",
    "FeasibilityReport",
    "neg_loglik",
    "neg_loglik_pn",
    "check_assumptions",
    "gmmf_step",
    "gmmf_estimate",
    "em_estimate",
    "tyler_estimate",
    "wrapped_cauchy_estimate",
    "blue_restore",
]

MODES = ("joint", "scatter_only", "tyler")


@dataclass(frozen=True)
class SampleSet:
    """n samples of dimension d, stored as an (n, d) float array."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValueError(f"expected an (n, d) array with n >= 1, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("sample entries must be finite")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class WeightVector:
    """Strictly positive weights on the open probability simplex."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if w.size < 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a non-empty finite vector")
        if np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive")
        if abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to one within 1e-12")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class EstimatorOptions:
    tol: float = 1e-6
    max_iter: int = 10000
    mode: str = "joint"

    def __post_init__(self):
        if not (self.tol > 0):
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class EstimateResult:
    """Converged parameters plus iteration diagnostics.

    ``objective_trace`` holds the objective at the initial point and after
    every update (length iterations + 1); ``normalizer_trace`` holds the
    per-iteration denominator sum_i w_i / (nu + delta_i) of the normalized
    update.  ``final_step`` is the last value of the stopping criterion.
    """

    params: object
    iterations: int
    final_step: float
    objective_trace: list = field(default_factory=list)
    normalizer_trace: list = field(default_factory=list)
    converged: bool = False
    fp_mu_residual: float = 0.0
    fp_sigma_residual: float = 0.0
    trace_residual: float = 0.0
    assumptions_bypassed: bool = False
    init_regularized: bool = False
    guard_events: int = 0


@dataclass(frozen=True)
class FeasibilityReport:
    independence_ok: bool
    weight_bound_ok: bool
    worst_weight: float
    required_bound: float
    violating_subset: list | None = None
    exhaustive: bool = True

    @property
    def ok(self) -> bool:
        return self.independence_ok and self.weight_bound_ok


def _as_samples(samples) -> SampleSet:
    return samples if isinstance(samples, SampleSet) else SampleSet(samples)


def _as_weights(w, n: int) -> WeightVector:
    if w is None:
        return WeightVector.uniform(n)
    wv = w if isinstance(w, WeightVector) else WeightVector(w)
    if wv.n != n:
        raise ValueError(f"{wv.n} weights for {n} samples")
    return wv


def _canonical_order(rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Lexicographic order over (sample row, weight); fixes summation order."""
    keys = [w] + [rows[:, j] for j in range(rows.shape[1] - 1, -1, -1)]
    return np.lexsort(tuple(keys))


def _mahalanobis_all(rows: np.ndarray, mu: np.ndarray, lower: np.ndarray) -> np.ndarray:
    y = scipy.linalg.solve_triangular(
        lower, (rows - mu).T, lower=True, check_finite=False
    )
    return np.einsum("ij,ij->j", y, y)


def _objective(w, nu, d, delta, lower) -> float:
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return float((d + nu) * np.einsum("i,i->", w, np.log(nu + delta)) + logdet)


def neg_loglik(samples, w, p) -> float:
    """Weighted negative log-likelihood L(mu, Sigma), constants dropped."""
    samples = _as_samples(samples)
    w = _as_weights(w, samples.n)
    if p.nu <= 0:
        raise InvalidNu("objective requires nu > 0")
    if p.dim != samples.d:
        raise ValueError("parameter and sample dimensions disagree")
    lower = p.sigma.cholesky_lower()
    delta = _mahalanobis_all(samples.rows, p.mu, lower)
    return _objective(w.w, p.nu, samples.d, delta, lower)


def neg_loglik_pn(samples, w, sigma) -> float:
    """Weighted negative log-likelihood of the projected normal,
    L0(Sigma) = d * sum_i w_i log(delta_i) + log|Sigma| (scale invariant)."""
    samples = _as_samples(samples)
    w = _as_weights(w, samples.n)
    if samples.d < 2:
        raise ValueError("projected normal objective requires d >= 2")
    sigma = sigma if isinstance(sigma, SpdMatrix) else SpdMatrix(sigma)
    lower = sigma.cholesky_lower()
    delta = _mahalanobis_all(samples.rows, np.zeros(samples.d), lower)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return float(samples.d * np.einsum("i,i->", w.w, np.log(delta)) + logdet)


# ---------------------------------------------------------------------------
# feasibility checks
# ---------------------------------------------------------------------------

_EXHAUSTIVE_N = 15
_RANDOM_SUBSETS = 200


def _weight_bound(d: int, nu: float, mode: str) -> float:
    if mode == "tyler":
        return 1.0 / d
    bound = (nu + d - 1.0) / (nu + d)
    factor = float(d) if mode == "joint" else float(d - 1)
    if factor <= 0.0:
        return math.inf
    return bound / factor


def _subset_independent(rows: np.ndarray, idx, affine: bool) -> bool:
    sub = rows[list(idx)]
    if affine:
        sub = np.hstack([sub, np.ones((sub.shape[0], 1))])
    return np.linalg.matrix_rank(sub) == sub.shape[0]


def _independence(rows: np.ndarray, size: int, affine: bool):
    """Check every subset of `size` samples for (affine) independence.

    Exhaustive for small n; otherwise a deterministic full-rank check plus
    randomized subset probes, which can miss degeneracies (flagged via the
    report's ``exhaustive`` field).
    """
    n = rows.shape[0]
    size = min(size, n)
    if n <= _EXHAUSTIVE_N:
        for idx in combinations(range(n), size):
            if not _subset_independent(rows, idx, affine):
                return False, list(idx), True
        return True, None, True
    full = np.hstack([rows, np.ones((n, 1))]) if affine else rows
    if np.linalg.matrix_rank(full) < min(full.shape):
        return False, None, False
    rng = np.random.default_rng(0)
    for _ in range(_RANDOM_SUBSETS):
        idx = rng.choice(n, size=size, replace=False)
        if not _subset_independent(rows, idx, affine):
            return False, sorted(int(i) for i in idx), False
    return True, None, False


def _pairwise_noncollinear(rows: np.ndarray):
    """No two samples on a common line through the origin."""
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        return False, [int(np.argmin(norms))], True
    unit = rows / norms[:, None]
    n = unit.shape[0]
    if n <= 2048:
        gram = np.abs(unit @ unit.T)
        np.fill_diagonal(gram, 0.0)
        worst = np.unravel_index(int(np.argmax(gram)), gram.shape)
        if gram[worst] >= 1.0 - 1e-12:
            return False, sorted(int(i) for i in worst), True
        return True, None, True
    # sign-canonicalize so antipodal pairs collide, then sort and compare
    first = np.argmax(np.abs(unit) > 0.0, axis=1)
    signs = np.sign(unit[np.arange(n), first])
    canon = unit * signs[:, None]
    order = np.lexsort(tuple(canon[:, j] for j in range(canon.shape[1] - 1, -1, -1)))
    sc = canon[order]
    close = np.all(np.abs(np.diff(sc, axis=0)) <= 1e-12, axis=1)
    if np.any(close):
        k = int(np.argmax(close))
        return False, sorted([int(order[k]), int(order[k + 1])]), False
    return True, None, False


def check_assumptions(samples, w, nu: float, mode: str = "joint") -> FeasibilityReport:
    """Feasibility report for the requested estimation mode.

    joint:        any <= d+1 samples affinely independent and
                  d * w_max < (nu + d - 1) / (nu + d)
    scatter_only: any <= d samples linearly independent and
                  (d - 1) * w_max < (nu + d - 1) / (nu + d)
    tyler:        pairwise non-collinear samples and w_max < 1/d

    Never raises; callers decide what to do with a failing report.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    samples = _as_samples(samples)
    w = _as_weights(w, samples.n)
    d = samples.d
    worst = float(np.max(w.w))
    bound = _weight_bound(d, nu, mode)
    weight_ok = worst < bound

    if mode == "tyler":
        indep_ok, subset, exhaustive = _pairwise_noncollinear(samples.rows)
    elif mode == "joint":
        indep_ok, subset, exhaustive = _independence(samples.rows, d + 1, affine=True)
    else:
        indep_ok, subset, exhaustive = _independence(samples.rows, d, affine=False)

    return FeasibilityReport(
        independence_ok=indep_ok,
        weight_bound_ok=weight_ok,
        worst_weight=worst,
        required_bound=bound,
        violating_subset=subset,
        exhaustive=exhaustive,
    )


# ---------------------------------------------------------------------------
# fixed-point iterations
# ---------------------------------------------------------------------------


def gmmf_step(state, samples, w, nu: float):
    """One normalized fixed-point update (mu_r, Sigma_r) -> (mu_{r+1}, Sigma_{r+1}).

    The scatter update averages outer products at the *previous* location
    mu_r and divides by the same reweighting denominator as the location
    update (Jacobi variant).
    """
    samples = _as_samples(samples)
    w = _as_weights(w, samples.n)
    if nu < 1:
        raise InvalidNu("joint location/scatter update requires nu >= 1")
    mu_r, sigma_r = state
    mu_r = np.asarray(mu_r, dtype=np.float64).reshape(-1)
    sigma_r = sigma_r if isinstance(sigma_r, SpdMatrix) else SpdMatrix(sigma_r)
    lower = sigma_r.cholesky_lower()
    delta = _mahalanobis_all(samples.rows, mu_r, lower)
    c = w.w / (nu + delta)
    s0 = float(np.sum(c))
    mu_next = np.einsum("i,ij->j", c, samples.rows) / s0
    centered = samples.rows - mu_r
    sigma_next = np.einsum("i,ij,ik->jk", c, centered, centered) / s0
    return mu_next, SpdMatrix(sigma_next)


def _student_t_params(mu, sigma, nu):
    from .distributions import StudentTParams  # deferred: distributions imports us

    return StudentTParams(mu=mu, sigma=sigma, nu=nu)


def _run_student_t(rows, w, nu, tol, max_iter, update, mu_fixed=None):
    """Shared driver for the joint / scatter-only GMMF and EM iterations."""
    n, d = rows.shape
    scatter_only = mu_fixed is not None

    init_regularized = False
    if scatter_only:
        mu = np.asarray(mu_fixed, dtype=np.float64).reshape(-1)
        centered = rows - mu
        sigma = np.einsum("ij,ik->jk", centered, centered) / n
    else:
        mu = np.einsum("ij->j", rows) / n
        centered = rows - mu
        sigma = np.einsum("ij,ik->jk", centered, centered) / n
    try:
        lower = _factor(sigma)
    except NotPositiveDefinite:
        eps = 1e-8 * max(float(np.trace(sigma)) / d, 1e-100)
        sigma = sigma + eps * np.eye(d)
        lower = _factor(sigma)  # still degenerate data propagates the error
        init_regularized = True

    objective_trace = []
    normalizer_trace = []
    converged = False
    rel_step = math.inf
    iterations = 0

    for _ in range(max_iter):
        delta = _mahalanobis_all(rows, mu, lower)
        objective_trace.append(_objective(w, nu, d, delta, lower))
        c = w / (nu + delta)
        s0 = float(np.sum(c))
        normalizer_trace.append(s0)

        mu_next = mu if scatter_only else np.einsum("i,ij->j", c, rows) / s0
        if update == "gmmf":
            centered = rows - mu
            sigma_next = np.einsum("i,ij,ik->jk", c, centered, centered) / s0
        else:  # em
            centered = rows - mu_next
            sigma_next = (nu + d) * np.einsum("i,ij,ik->jk", c, centered, centered)
        sigma_next = 0.5 * (sigma_next + sigma_next.T)
        lower_next = _factor(sigma_next)

        step = math.sqrt(
            float(np.sum((mu_next - mu) ** 2))
            + float(np.sum((sigma_next - sigma) ** 2))
        )
        denom = math.sqrt(float(np.sum(mu**2)) + float(np.sum(sigma**2)))
        rel_step = step / denom if denom >= 1e-300 else step

        mu, sigma, lower = mu_next, sigma_next, lower_next
        iterations += 1
        if rel_step < tol:
            converged = True
            break

    # final objective and fixed-point residuals at the returned parameters
    delta = _mahalanobis_all(rows, mu, lower)
    objective_trace.append(_objective(w, nu, d, delta, lower))
    c = w / (nu + delta)
    s0 = float(np.sum(c))
    centered = rows - mu
    fp_mu = float(np.linalg.norm(np.einsum("i,ij->j", c, centered))) / (
        1.0 + float(np.linalg.norm(mu))
    )
    rhs = (nu + d) * np.einsum("i,ij,ik->jk", c, centered, centered)
    fp_sigma = float(np.linalg.norm(sigma - rhs)) / float(np.linalg.norm(sigma))
    trace_res = abs((d + nu) * s0 - 1.0)

    return {
        "mu": mu,
        "sigma": SpdMatrix(sigma),
        "iterations": iterations,
        "final_step": rel_step,
        "objective_trace": objective_trace,
        "normalizer_trace": normalizer_trace,
        "converged": converged,
        "fp_mu_residual": fp_mu,
        "fp_sigma_residual": fp_sigma,
        "trace_residual": trace_res,
        "init_regularized": init_regularized,
    }


def _estimate_student_t(samples, w, nu, opts, update, mu=None, check=True):
    samples = _as_samples(samples)
    w = _as_weights(w, samples.n)
    opts = opts or EstimatorOptions()
    if opts.mode == "tyler":
        raise ValueError("use tyler_estimate for the nu = 0 scatter estimator")
    scatter_only = opts.mode == "scatter_only"
    if scatter_only:
        if mu is None:
            raise ValueError("scatter_only mode needs the fixed location mu")
        if nu <= 0:
            raise InvalidNu("scatter-only estimation requires nu > 0")
    elif nu < 1:
        raise InvalidNu("joint location/scatter estimation requires nu >= 1")

    if check:
        report = check_assumptions(samples, w, nu, opts.mode)
        if not report.ok:
            raise AssumptionViolation(
                f"feasibility check failed: independence_ok={report.independence_ok},"
                f" weight_bound_ok={report.weight_bound_ok}"
                f" (w_max={report.worst_weight:g}, bound={report.required_bound:g})"
            )

    order = _canonical_order(samples.rows, w.w)
    rows = np.ascontiguousarray(samples.rows[order])
    weights = w.w[order]

    out = _run_student_t(
        rows,
        weights,
        nu,
        opts.tol,
        opts.max_iter,
        update,
        mu_fixed=mu if scatter_only else None,
    )
    return EstimateResult(
        params=_student_t_params(out["mu"], out["sigma"], nu),
        iterations=out["iterations"],
        final_step=out["final_step"],
        objective_trace=out["objective_trace"],
        normalizer_trace=out["normalizer_trace"],
        converged=out["converged"],
        fp_mu_residual=out["fp_mu_residual"],
        fp_sigma_residual=out["fp_sigma_residual"],
        trace_residual=out["trace_residual"],
        assumptions_bypassed=not check,
        init_regularized=out["init_regularized"],
    )


def gmmf_estimate(samples, w=None, nu: float = 1.0,
                  opts: EstimatorOptions | None = None,
                  *, mu=None, check: bool = True) -> EstimateResult:
    """Run the normalized fixed-point iteration to the weighted ML estimate.

    Initialized at the sample mean and (population) sample covariance;
    stops when the relative step

        sqrt(|mu_{r+1}-mu_r|^2 + |Sigma_{r+1}-Sigma_r|_F^2)
            / sqrt(|mu_r|^2 + |Sigma_r|_F^2)

    falls below ``opts.tol`` (absolute step if the denominator underflows),
    or after ``opts.max_iter`` updates with ``converged=False``.  A singular
    initial covariance is regularized by 1e-8 * trace/d on the diagonal and
    flagged on the result.  In ``scatter_only`` mode the location stays at
    the caller-supplied ``mu``.  ``check=False`` skips the feasibility
    pre-check; the bypass is recorded on the result.
    """
    return _estimate_student_t(samples, w, nu, opts, "gmmf", mu=mu, check=check)


def em_estimate(samples, w=None, nu: float = 1.0,
                opts: EstimatorOptions | None = None,
                *, mu=None, check: bool = True) -> EstimateResult:
    """EM iteration: location update as in ``gmmf_estimate``; scatter update

        Sigma_{r+1} = (nu + d) * sum_i w_i (x_i - mu_{r+1})(x_i - mu_{r+1})^T
                                    / (nu + delta_{i,r})

    with Mahalanobis distances from the previous iterate.  Same
    initialization and stopping rule as ``gmmf_estimate``.
    """
    return _estimate_student_t(samples, w, nu, opts, "em", mu=mu, check=check)


def tyler_estimate(samples, w=None, opts: EstimatorOptions | None = None,
                   *, check: bool = True) -> EstimateResult:
    """Scatter-only nu = 0 estimator on sphere-normalized data.

    Samples are normalized to unit Euclidean norm internally (zero vectors
    rejected).  Runs the normalized scatter recursion with nu = 0, mu = 0,
    renormalizing each iterate to trace one; the returned scatter has trace
    exactly one and satisfies the nu = 0 fixed-point equation up to the
    reported ``fp_sigma_residual``.
    """
    samples = _as_samples(samples)
    w = _as_weights(w, samples.n)
    opts = opts or EstimatorOptions()
    norms = np.linalg.norm(samples.rows, axis=1)
    if np.any(norms == 0.0):
        raise ZeroSample("sample with zero norm cannot be sphere-normalized")
    unit = samples.rows / norms[:, None]

    if check:
        report = check_assumptions(unit, w, 0.0, "tyler")
        if not report.ok:
            raise AssumptionViolation(
                f"feasibility check failed: independence_ok={report.independence_ok},"
                f" weight_bound_ok={report.weight_bound_ok}"
                f" (w_max={report.worst_weight:g}, bound={report.required_bound:g})"
            )

    order = _canonical_order(unit, w.w)
    rows = np.ascontiguousarray(unit[order])
    weights = w.w[order]
    n, d = rows.shape
    zero = np.zeros(d)

    sigma = np.einsum("ij,ik->jk", rows, rows) / n
    sigma = sigma / float(np.trace(sigma))
    lower = _factor(sigma)

    objective_trace = []
    normalizer_trace = []
    converged = False
    rel_step = math.inf
    iterations = 0
    for _ in range(opts.max_iter):
        delta = _mahalanobis_all(rows, zero, lower)
        logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
        objective_trace.append(
            float(d * np.einsum("i,i->", weights, np.log(delta)) + logdet)
        )
        c = weights / delta
        s0 = float(np.sum(c))
        normalizer_trace.append(s0)
        sigma_next = np.einsum("i,ij,ik->jk", c, rows, rows) / s0
        sigma_next = 0.5 * (sigma_next + sigma_next.T)
        sigma_next = sigma_next / float(np.trace(sigma_next))
        lower_next = _factor(sigma_next)

        step = float(np.linalg.norm(sigma_next - sigma))
        denom = float(np.linalg.norm(sigma))
        rel_step = step / denom if denom >= 1e-300 else step
        sigma, lower = sigma_next, lower_next
        iterations += 1
        if rel_step < opts.tol:
            converged = True
            break

    delta = _mahalanobis_all(rows, zero, lower)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    objective_trace.append(
        float(d * np.einsum("i,i->", weights, np.log(delta)) + logdet)
    )
    c = weights / delta
    y = scipy.linalg.solve_triangular(lower, rows.T, lower=True, check_finite=False)
    lhs = d * np.einsum("i,ji,ki->jk", c, y, y)
    fp_sigma = float(np.linalg.norm(lhs - np.eye(d))) / math.sqrt(d)

    return EstimateResult(
        params=_student_t_params(zero, SpdMatrix(sigma), 0.0),
        iterations=iterations,
        final_step=rel_step,
        objective_trace=objective_trace,
        normalizer_trace=normalizer_trace,
        converged=converged,
        fp_sigma_residual=fp_sigma,
        trace_residual=abs(float(np.trace(sigma)) - 1.0),
        assumptions_bypassed=not check,
    )


def wrapped_cauchy_estimate(angles, w=None,
                            opts: EstimatorOptions | None = None) -> EstimateResult:
    """ML estimation of wrapped Cauchy location and concentration.

    Iterates the circular reweighting

        zeta_{r+1} = sum_i w_i u_i / (1 - <zeta_r, u_i>)
                     / sum_i w_i / (1 - <zeta_r, u_i>),  u_i = (cos t_i, sin t_i)

    from zeta_0 = 0, stopping when |zeta_{r+1} - zeta_r| / max(|zeta_r|, 1e-12)
    drops below tol.  The estimate is recovered as a = atan2(zeta_2, zeta_1)
    and rho = (1 - sqrt(1 - |zeta|^2)) / |zeta|.  An update that would leave
    the open unit disk is damped back onto it (counted in ``guard_events``),
    keeping the reweighting denominators strictly positive.
    """
    theta = np.asarray(angles, dtype=np.float64).reshape(-1)
    n = theta.size
    if n < 3:
        raise DegenerateData("need at least 3 angles")
    if np.any(theta < -math.pi) or np.any(theta >= math.pi):
        raise ValueError("angles must lie in [-pi, pi)")
    w = _as_weights(w, n)
    opts = opts or EstimatorOptions()
    if np.unique(theta).size <= 2:
        raise DegenerateData("angles concentrated on at most two directions")

    order = np.lexsort((w.w, theta))
    theta_s = theta[order]
    weights = w.w[order]
    cos_t = np.cos(theta_s)
    sin_t = np.sin(theta_s)

    zeta = np.zeros(2)
    objective_trace = []
    normalizer_trace = []
    guard_events = 0
    converged = False
    rel_step = math.inf
    iterations = 0
    for _ in range(opts.max_iter):
        denom = 1.0 - zeta[0] * cos_t - zeta[1] * sin_t
        nz2 = float(zeta @ zeta)
        objective_trace.append(
            float(np.einsum("i,i->", weights, np.log(denom)))
            - 0.5 * math.log1p(-nz2)
            + math.log(2.0 * math.pi)
        )
        u = weights / denom
        s0 = float(np.sum(u))
        normalizer_trace.append(s0)
        zeta_next = (
            np.array([np.einsum("i,i->", u, cos_t), np.einsum("i,i->", u, sin_t)])
            / s0
        )
        nrm = float(np.linalg.norm(zeta_next))
        if nrm >= 1.0:
            zeta_next = zeta_next * ((1.0 - 1e-9) / nrm)
            guard_events += 1
        step = float(np.linalg.norm(zeta_next - zeta))
        rel_step = step / max(float(np.linalg.norm(zeta)), 1e-12)
        zeta = zeta_next
        iterations += 1
        if rel_step < opts.tol:
            converged = True
            break

    xi = float(np.linalg.norm(zeta))
    if xi == 0.0:
        rho = 0.0
    else:
        rho = (1.0 - math.sqrt(max(1.0 - xi * xi, 0.0))) / xi
    a = math.atan2(zeta[1], zeta[0])
    if a == math.pi:
        a = -math.pi
    from .distributions import WrappedCauchyParams  # deferred, see _student_t_params

    return EstimateResult(
        params=WrappedCauchyParams(a=a, rho=min(rho, 1.0 - 1e-15)),
        iterations=iterations,
        final_step=rel_step,
        objective_trace=objective_trace,
        normalizer_trace=normalizer_trace,
        converged=converged,
        guard_events=guard_events,
    )


def blue_restore(p, mu_hat, sigma_hat, nu: float, sigma_noise: float) -> np.ndarray:
    """Linearly shrink a noisy patch toward the estimated patch mean.

    For nu > 2 returns mu + M Sigma^{-1} (p - mu) with
    M = Sigma - (nu / (nu - 2)) sigma_noise^2 I, symmetrized and with its
    negative eigenvalues clamped to zero (the raw difference is not
    guaranteed positive semidefinite).  For nu <= 2 the patch mean itself
    is the estimate.
    """
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be >= 0")
    mu_hat = np.asarray(mu_hat, dtype=np.float64).reshape(-1)
    if nu <= 2.0:
        return mu_hat.copy()
    sigma_hat = sigma_hat if isinstance(sigma_hat, SpdMatrix) else SpdMatrix(sigma_hat)
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    d = sigma_hat.dim
    shrink = sigma_hat.entries - (nu / (nu - 2.0)) * sigma_noise**2 * np.eye(d)
    evals, evecs = np.linalg.eigh(0.5 * (shrink + shrink.T))
    shrink = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    lower = sigma_hat.cholesky_lower()
    z = scipy.linalg.solve_triangular(lower, p - mu_hat, lower=True, check_finite=False)
    y = scipy.linalg.solve_triangular(
        lower, z, lower=True, trans="T", check_finite=False
    )
    return mu_hat + shrink @ y
