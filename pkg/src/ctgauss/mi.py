"""Mutual information of Gaussian channels, computed three ways.

All values are in nats.  For the integrator channel
``dY = sqrt(snr) X dt + dB`` with stationary OU input:

* continuous time, causal-MMSE route: I = (snr/2) int_0^T Sigma(t) dt with
  Sigma the Riccati error variance (:func:`duncan_mi`);
* sampled vectors, log-determinant route: for observation times t_1..t_n,
  I(X~; Y) = 1/2 [ln det(snr C + Sigma_B) - ln det Sigma_B] with C the
  covariance of the integrated input at the sample times and
  Sigma_B[i,j] = min(t_i, t_j) (:func:`sampled_mi_gaussian`); computed
  internally on observation *increments*, where Sigma_B is diagonal -- an
  invertible linear map, so the value is identical and the factorisation is
  far better conditioned;
* its derivative in snr, noncausal-MMSE route: dI/dsnr = 1/2 int_0^T
  smoothed error variance (:func:`mi_derivative_snr`).

On uniform grids the log-determinant is also evaluated in O(transient)
time through the innovation decomposition of the exact discrete filter
(:func:`uniform_sampled_mi`): the prediction-error variances are the pivots
of the covariance's block LDL factorisation, so this is the same
determinant, not an approximation.  That route makes sample counts of 2^24
routine, which the convergence experiments at large mean-reversion rates
need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DeskScaleError, NumericalError
from .kalman import (
    discrete_stationary_error,
    ou_discrete_model,
    riccati_mmse_integral,
    smoothed_error_variance,
)
from .sampling import (
    OuParams,
    SamplingGrid,
    _bridge_kernel,
    _expm1_relief,
    _frozen_array,
)

_METHODS = ("duncan", "logdet", "feedback_logdet", "closed_form")
_JITTER_SCALE = 1e-12


@dataclass(frozen=True, eq=False)
class MiEstimate:
    """A mutual-information value with its computation metadata."""

    value: float
    method: str
    grid_points: int
    horizon: float

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.value < -1e-9:
            raise ValueError(f"mutual information must be nonnegative, got {self.value}")
        if self.value < 0.0:  # clip float dust
            object.__setattr__(self, "value", 0.0)

    @property
    def rate(self) -> float:
        """Value per second."""
        return self.value / self.horizon if self.horizon > 0 else 0.0


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric PSD matrix with the package's jitter policy for Cholesky."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if m.size:
            scale = np.max(np.abs(m))
            if scale > 0 and np.max(np.abs(m - m.T)) > 1e-12 * scale:
                raise ValueError("covariance must be symmetric to 1e-12 relative")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor; one diagonal jitter retry, then hard error."""
        try:
            return np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError:
            pass
        jitter = _JITTER_SCALE * np.trace(self.matrix) / max(self.dimension, 1)
        try:
            return np.linalg.cholesky(self.matrix + jitter * np.eye(self.dimension))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "covariance not positive definite even after jitter "
                f"{jitter:.3g}"
            ) from exc

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.cholesky()))))


# ---------------------------------------------------------------------------
# Point-to-point capacities
# ---------------------------------------------------------------------------


def finite_bandwidth_capacity(power: float, bandwidth: float) -> float:
    """Capacity W ln(1 + P / 2W) in nats/second of the band-limited channel."""
    if power < 0:
        raise ValueError(f"power must be nonnegative, got {power}")
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    return bandwidth * math.log1p(power / (2.0 * bandwidth))


def infinite_bandwidth_capacity(power: float) -> float:
    """Capacity P/2 in nats/second without a bandwidth constraint."""
    if power < 0:
        raise ValueError(f"power must be nonnegative, got {power}")
    return 0.5 * power


def constant_level_mi(power: float, horizon: float) -> float:
    """MI of the constant-level channel: X(t) = Z ~ N(0, P) held on [0, T].

    The rate-0 limit of an OU input is handled as this explicit special
    case rather than by degenerate OU parameters: Y(T) = Z T + B(T) gives
    I = 1/2 ln(1 + P T).
    """
    return 0.5 * math.log1p(power * horizon)


# ---------------------------------------------------------------------------
# Covariance construction for sampled vectors
# ---------------------------------------------------------------------------


def brownian_covariance(grid: SamplingGrid) -> CovarianceMatrix:
    """Cov(B(t_i), B(t_j)) = min(t_i, t_j) over the positive grid times."""
    t = grid.times[1:]
    return CovarianceMatrix(np.minimum(t[:, None], t[None, :]))


def ou_integrated_covariance(params: OuParams, grid: SamplingGrid) -> CovarianceMatrix:
    """Covariance of the integrated OU path at the positive grid times.

    Closed form of Cov(X~(s), X~(t)) = int_0^s int_0^t P e^{-a|u-v|} du dv;
    time 0 is omitted because the integral vanishes there.
    """
    a, p = params.a, params.power
    t = grid.times[1:]
    lo = np.minimum(t[:, None], t[None, :])
    hi = np.maximum(t[:, None], t[None, :])
    cov = (p / a**2) * (
        2.0 * a * lo
        - _expm1_relief(a * lo)
        - np.exp(-a * (hi - lo)) * _expm1_relief(a * lo)
    )
    cov = 0.5 * (cov + cov.T)
    return CovarianceMatrix(cov)


def ou_increment_covariance(params: OuParams, grid: SamplingGrid) -> CovarianceMatrix:
    """Covariance of the exact integrals of an OU path over the grid intervals.

    Entry (i, j) is int_{I_i} int_{I_j} P e^{-a|u-v|} du dv, evaluated in a
    cancellation-free form (products of 1 - e^{-a w} factors and one decaying
    exponential of the gap between the intervals).
    """
    a, p = params.a, params.power
    t = grid.times
    lo, hi = t[:-1], t[1:]
    w = hi - lo
    gap = np.clip(lo[None, :] - hi[:, None], 0.0, None)
    u = _expm1_relief(a * w)
    cov = (p / a**2) * np.exp(-a * gap) * u[:, None] * u[None, :]
    cov = np.triu(cov, 1)
    cov = cov + cov.T
    np.fill_diagonal(cov, (2.0 * p / a**2) * _bridge_kernel(a * w))
    return CovarianceMatrix(cov)


# ---------------------------------------------------------------------------
# Mutual information routes
# ---------------------------------------------------------------------------


def duncan_mi(params: OuParams, snr: float, horizon: float) -> MiEstimate:
    """Continuous-time MI via the causal-MMSE identity.

    I(X_0^T; Y_0^T) = (snr/2) int_0^T Var(X(t) | Y_0^t) dt, with the error
    variance from the closed-form Riccati solution started at the prior P.
    """
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    value = 0.5 * snr * riccati_mmse_integral(params, snr, horizon)
    return MiEstimate(value, "duncan", 0, horizon)


def sampled_mi_gaussian(params: OuParams, snr: float, grid: SamplingGrid) -> MiEstimate:
    """Exact MI of the sampled pair (X~ at grid times, Y at grid times).

    Equals 1/2 [ln det(snr C + Sigma_B) - ln det Sigma_B] with C the
    integrated-input covariance and Sigma_B the min(s, t) kernel; evaluated
    on observation increments (a unit-determinant change of basis), where
    the Brownian block is diagonal.
    """
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    n = grid.n_points - 1
    if n < 1 or params.power == 0.0 or snr == 0.0:
        return MiEstimate(0.0, "logdet", grid.n_points, grid.horizon)
    widths = grid.widths
    cov = snr * ou_increment_covariance(params, grid).matrix + np.diag(widths)
    ld = CovarianceMatrix(cov).logdet()
    value = 0.5 * (ld - float(np.sum(np.log(widths))))
    return MiEstimate(value, "logdet", grid.n_points, grid.horizon)


def _merge_components(components) -> list[tuple[float, float]]:
    """Sum the powers of same-rate OU components (their sum is OU in law)."""
    merged: dict[float, float] = {}
    for params, gain in components:
        eff = gain * gain * params.power
        if eff == 0.0:
            continue
        merged[params.a] = merged.get(params.a, 0.0) + eff
    return sorted(merged.items())


# Transient iterations allowed before the scalar recursion must have reached
# its fixed point; generous for any desk-scale a * width.
_TRANSIENT_CAP = 4_000_000
_MIXED_RATE_STEP_CAP = 2**21


def _uniform_logdet_ratio(components, width: float, steps: int) -> float:
    """ln det Cov(Z) - ln det Cov(dB) for Z_i = sum_j U_{j,i} + dB_i.

    U_j are interval integrals of independent OU components on a uniform
    grid of ``steps`` intervals of ``width``.  Evaluated as the sum of
    ln(innovation variance / width) along the exact discrete filter: the
    innovation decomposition is the block LDL factorisation of Cov(Z), so
    this is the log-determinant itself.  After the variance recursion hits
    its (closed form) fixed point the remaining terms are identical, which
    keeps the cost independent of ``steps``.
    """
    merged = _merge_components(components)
    if not merged or steps == 0:
        return 0.0
    if len(merged) == 1:
        (a, power), = merged
        params = OuParams(a, power)
        phi, q, h, r, g = (float(v) for v in ou_discrete_model(params, 1.0, width))
        sig_star = discrete_stationary_error(params, 1.0, width)
        s_star = h * h * sig_star + r
        log_w = math.log(width)
        total = 0.0
        sig = power
        tol = 64.0 * np.finfo(float).eps * max(sig_star, 1e-300)
        for i in range(steps):
            if abs(sig - sig_star) <= tol:
                total += (steps - i) * (math.log(s_star) - log_w)
                return total
            if i >= _TRANSIENT_CAP:
                raise NumericalError(
                    "innovation recursion did not reach its fixed point within "
                    f"{_TRANSIENT_CAP} steps (a*width too small)"
                )
            s = h * h * sig + r
            k = (phi * sig * h + g) / s
            total += math.log(s) - log_w
            sig = phi * phi * sig + q - k * k * s
        return total
    # Mixed mean-reversion rates: run the full multi-state recursion.
    if steps > _MIXED_RATE_STEP_CAP:
        raise DeskScaleError(
            f"mixed-rate inputs support at most {_MIXED_RATE_STEP_CAP} uniform steps"
        )
    d = len(merged)
    phi = np.empty(d); q = np.empty(d); h = np.empty(d); g = np.empty(d)
    r_extra = width
    for j, (a, power) in enumerate(merged):
        pj, qj, hj, rj, gj = (float(v) for v in ou_discrete_model(OuParams(a, power), 1.0, width))
        phi[j], q[j], h[j], g[j] = pj, qj, hj, gj
        r_extra += rj - width  # rj includes one Brownian width each
    sig = np.diag([power for _, power in merged])
    log_w = math.log(width)
    total = 0.0
    for _ in range(steps):
        s = float(h @ sig @ h + r_extra)
        k = ((phi[:, None] * sig) @ h + g) / s
        total += math.log(s) - log_w
        sig = (phi[:, None] * sig * phi[None, :]) + np.diag(q) - np.outer(k, k) * s
    return total


def uniform_sampled_mi(components, horizon: float, steps: int) -> MiEstimate:
    """Sampled MI of (all inputs; Y) on a uniform grid via innovations.

    ``components`` is a sequence of (OuParams, gain) pairs; the channel is
    Y = sum_j gain_j Int X_j + B sampled at ``steps`` uniform times.  Equals
    the dense log-determinant route exactly (same determinant), but supports
    very large step counts.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    value = 0.5 * _uniform_logdet_ratio(components, horizon / steps, steps)
    return MiEstimate(value, "logdet", steps + 1, horizon)


@dataclass(frozen=True)
class MiQuartet:
    """Exact sampled MI quartet of the two-sender adder channel.

    Values in nats over [0, horizon]: joint I(X1, X2; Y), conditional
    I(X1; Y | X2) and I(X2; Y | X1), single-user I(X1; Y) and I(X2; Y).
    ``chain_residual`` is the worst deviation from the chain-rule identity
    I(X1, X2; Y) = I(Xi; Y) + I(Xj; Y | Xi).
    """

    joint: float
    cond_1: float
    cond_2: float
    single_1: float
    single_2: float
    chain_residual: float
    horizon: float
    steps: int


def mac_mi_quartet(params1: OuParams, params2: OuParams, snr: float,
                   horizon: float, steps: int) -> MiQuartet:
    """All four exact sampled MIs of Y = sqrt(snr)(Int X1 + Int X2) + B."""
    root = math.sqrt(snr)
    ld12 = _uniform_logdet_ratio(
        [(params1, root), (params2, root)], horizon / steps, steps)
    ld1 = _uniform_logdet_ratio([(params1, root)], horizon / steps, steps)
    ld2 = _uniform_logdet_ratio([(params2, root)], horizon / steps, steps)
    joint = 0.5 * ld12
    cond_1, cond_2 = 0.5 * ld1, 0.5 * ld2
    single_1 = 0.5 * (ld12 - ld2)
    single_2 = 0.5 * (ld12 - ld1)
    residual = max(abs(joint - single_1 - cond_2), abs(joint - single_2 - cond_1))
    return MiQuartet(joint, cond_1, cond_2, single_1, single_2, residual,
                     horizon, steps)


def feedback_linear_mi(power: float, var0: float, horizon: float,
                       grid: SamplingGrid) -> MiEstimate:
    """Sampled MI of the power-P linear-feedback scheme for a Gaussian level.

    The sender tracks theta ~ N(0, var0) with its causal estimate and
    transmits X(t) = gamma(t) (theta - E[theta | Y_0^t]) with gamma chosen so
    E[X(t)^2] = P for all t; the conditional variance then decays as
    var0 e^{-P t} and the continuous-time MI is P T / 2.  Under its own
    filtration the output is a standard Brownian motion, so on any grid the
    output increments are independent N(0, dt) with
    Cov(theta, Y(t)) = 2 sqrt(var0 / P) (1 - e^{-P t / 2}), giving the exact
    I(theta; Y at grid times) = 1/2 ln(var0 / Var(theta | Y at grid times)).
    """
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")
    if not var0 > 0:
        raise ValueError(f"prior variance must be positive, got {var0}")
    if abs(grid.horizon - horizon) > 1e-12 * max(1.0, horizon):
        raise ValueError("grid horizon does not match the requested horizon")
    t = grid.times
    if t.size < 2:
        return MiEstimate(0.0, "feedback_logdet", t.size, horizon)
    # Cov(theta, dY_i), stable for fine grids.
    scale = 2.0 * math.sqrt(var0 / power)
    dc = scale * np.exp(-0.5 * power * t[:-1]) * _expm1_relief(0.5 * power * grid.widths)
    explained = float(np.sum(dc * dc / grid.widths))
    value = -0.5 * math.log1p(-explained / var0)
    return MiEstimate(value, "feedback_logdet", t.size, horizon)


def mi_derivative_snr(params: OuParams, snr: float, horizon: float) -> float:
    """dI/dsnr = 1/2 int_0^T Var(X(t) | Y_0^T) dt (noncausal MMSE route)."""
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    if params.power == 0.0:
        return 0.0
    if snr == 0.0:
        return 0.5 * params.power * horizon
    integrand = lambda t: smoothed_error_variance(params, snr, t, horizon)
    total, _ = quad(integrand, 0.0, horizon, epsabs=1e-12, epsrel=1e-11, limit=200)
    return 0.5 * float(total)


def mi_over_snr_monotonicity(params: OuParams, snr_list, horizon: float,
                             slack: float = 1e-9):
    """Table of duncan_mi(snr)/snr over the list and its monotonicity verdict.

    Returns (nonincreasing, rows) with rows of (snr, mi_nats, mi_over_snr).
    """
    snrs = [float(s) for s in snr_list]
    if any(s <= 0 for s in snrs) or any(b <= a for a, b in zip(snrs, snrs[1:])):
        raise ValueError("snr_list must be positive and strictly increasing")
    rows = []
    for s in snrs:
        mi = duncan_mi(params, s, horizon).value
        rows.append((s, mi, mi / s))
    ratios = [r[2] for r in rows]
    nonincreasing = all(b <= a + slack for a, b in zip(ratios, ratios[1:]))
    return nonincreasing, rows
