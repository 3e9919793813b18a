"""Kalman-Bucy filtering and Riccati error variances for the linear channel.

Model: OU input X with rate a and stationary power P, observed through

    dY(t) = sqrt(snr) X(t) dt + dB(t),

with B a standard Brownian motion.  The causal estimation error variance
Sigma(t) = Var(X(t) | Y_0^t) solves the scalar Riccati ODE

    dSigma/dt = -2 a Sigma + 2 a P - snr Sigma^2,

whose stationary point is the nonnegative root of
``snr S^2 + 2 a S - 2 a P = 0``.  Both the ODE solution and its time
integral have closed forms (the ODE is a constant-coefficient scalar
Riccati), which this module evaluates directly; :func:`riccati_solve` also
integrates the ODE numerically (fixed-step RK4 with a Richardson check) as
an independent route.

Discrete-time filtering/smoothing on a grid uses the *exact* joint Gaussian
law of (X(t_i), int_{t_{i-1}}^{t_i} X ds) for the OU prior, with the
observation increment Y_i - Y_{i-1} = sqrt(snr) int X ds + dB.  No
left-endpoint approximation enters, so the filter is the exact conditional
law of the sampled system and all gains and variances are functions of the
grid alone, never of the observed values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarseError, NumericalError
from .sampling import OuParams, Path, SamplingGrid, _frozen_array, _ou_step_moments

# Minimum grid resolution for discrete filtering: 8 points per 1/a.
_POINTS_PER_CORRELATION_TIME = 8


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Causal error variance on a grid plus its stationary value."""

    grid: SamplingGrid
    error_variance: np.ndarray
    stationary_value: float

    def __post_init__(self):
        object.__setattr__(self, "error_variance", _frozen_array(self.error_variance))
        if self.error_variance.shape != self.grid.times.shape:
            raise ValueError("one error variance per grid time required")
        if np.any(self.error_variance < 0):
            raise ValueError("error variances must be nonnegative")


@dataclass(frozen=True, eq=False)
class FilterEstimate:
    """Causal (filtered) and fixed-interval (smoothed) means and variances."""

    grid: SamplingGrid
    causal_mean: np.ndarray
    causal_var: np.ndarray
    smoothed_mean: np.ndarray
    smoothed_var: np.ndarray

    def __post_init__(self):
        for name in ("causal_mean", "causal_var", "smoothed_mean", "smoothed_var"):
            arr = _frozen_array(getattr(self, name))
            object.__setattr__(self, name, arr)
            if arr.shape != self.grid.times.shape:
                raise ValueError(f"{name} must have one entry per grid time")


def riccati_stationary(params: OuParams, snr: float) -> float:
    """Stationary causal MMSE: nonnegative root of snr S^2 + 2aS - 2aP = 0."""
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    a, p = params.a, params.power
    if snr == 0.0 or p == 0.0:
        return p
    return (-a + math.sqrt(a * a + 2.0 * a * p * snr)) / snr


def riccati_error_variance(params: OuParams, snr: float, t, sigma0: float) -> np.ndarray:
    """Closed-form Riccati solution Sigma(t) with Sigma(0) = sigma0.

    For snr > 0 the ODE factors through its roots r+ (stationary) and r-,
    giving Sigma(t) = (r+ - r- K e^{-2 lam t}) / (1 - K e^{-2 lam t}) with
    K = (sigma0 - r+)/(sigma0 - r-) and lam = sqrt(a^2 + 2 a P snr).
    """
    if sigma0 < 0:
        raise ValueError(f"initial variance must be nonnegative, got {sigma0}")
    a, p = params.a, params.power
    t = np.asarray(t, dtype=float)
    if snr == 0.0:
        return p + (sigma0 - p) * np.exp(-2.0 * a * t)
    lam = math.sqrt(a * a + 2.0 * a * p * snr)
    r_plus = (-a + lam) / snr
    r_minus = (-a - lam) / snr
    k = (sigma0 - r_plus) / (sigma0 - r_minus)
    decay = k * np.exp(-2.0 * lam * t)
    return (r_plus - r_minus * decay) / (1.0 - decay)


def riccati_mmse_integral(params: OuParams, snr: float, horizon: float,
                          sigma0: float | None = None) -> float:
    """Closed form of int_0^T Sigma(t) dt; sigma0 defaults to the prior P."""
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    a, p = params.a, params.power
    s0 = p if sigma0 is None else sigma0
    if snr == 0.0:
        return p * horizon + (s0 - p) * (1.0 - math.exp(-2.0 * a * horizon)) / (2.0 * a)
    lam = math.sqrt(a * a + 2.0 * a * p * snr)
    r_plus = (-a + lam) / snr
    r_minus = (-a - lam) / snr
    k = (s0 - r_plus) / (s0 - r_minus)
    tail = math.log1p(-k * math.exp(-2.0 * lam * horizon)) - math.log1p(-k)
    return r_plus * horizon + (r_plus - r_minus) / (2.0 * lam) * tail


def smoothed_error_variance(params: OuParams, snr: float, t, horizon: float) -> np.ndarray:
    """Noncausal (fixed-interval) error variance Var(X(t) | Y_0^T).

    Two-filter combination for the stationary Markov prior: the precision of
    the smoothed estimate is the forward-filter precision plus the
    backward-filter precision minus the prior precision 1/P (the prior is
    counted once in each filter).  The backward filter sees the time-reversed
    process, which for stationary OU has the same law.
    """
    p = params.power
    t = np.asarray(t, dtype=float)
    if p == 0.0:
        return np.zeros_like(t)
    fwd = riccati_error_variance(params, snr, t, p)
    bwd = riccati_error_variance(params, snr, horizon - t, p)
    return 1.0 / (1.0 / fwd + 1.0 / bwd - 1.0 / p)


def riccati_solve(params: OuParams, snr: float, grid: SamplingGrid,
                  sigma0: float, rtol: float = 1e-8) -> RiccatiSolution:
    """Integrate the Riccati ODE on the grid with fixed-step RK4.

    Each grid interval is subdivided so the fastest local rate stays well
    inside the RK4 stability region; the whole solve is repeated at half the
    step and the two runs must agree to ``rtol`` (Richardson check), else a
    :class:`NumericalError` is raised.
    """
    if sigma0 < 0:
        raise ValueError(f"initial variance must be nonnegative, got {sigma0}")
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    a, p = params.a, params.power
    lam = math.sqrt(a * a + 2.0 * a * p * snr)

    def rhs(s):
        return -2.0 * a * s + 2.0 * a * p - snr * s * s

    def solve(substep_scale):
        values = np.empty(grid.n_points)
        values[0] = sigma0
        s = sigma0
        for i, w in enumerate(grid.widths):
            nsub = max(1, math.ceil(substep_scale * lam * w))
            h = w / nsub
            for _ in range(nsub):
                k1 = rhs(s)
                k2 = rhs(s + 0.5 * h * k1)
                k3 = rhs(s + 0.5 * h * k2)
                k4 = rhs(s + h * k3)
                s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            values[i + 1] = s
        return values

    coarse = solve(128.0)
    fine = solve(256.0)
    scale = max(p, sigma0, 1e-300)
    if np.max(np.abs(fine - coarse)) > rtol * scale:
        raise NumericalError(
            "Riccati RK4 Richardson check failed: halving the step moved the "
            f"solution by more than rtol={rtol}"
        )
    fine = np.maximum(fine, 0.0)
    return RiccatiSolution(grid, fine, riccati_stationary(params, snr))


def ou_discrete_model(params: OuParams, snr: float, widths):
    """Per-interval coefficients of the exact sampled observation model.

    State transition X_i = phi X_{i-1} + xi with Var(xi) = q; observation
    increment z_i = h X_{i-1} + noise_i with Var(noise_i) = r (Brownian
    increment included) and Cov(xi, noise_i) = g.  Returns (phi, q, h, r, g)
    as arrays over intervals.
    """
    w = np.asarray(widths, dtype=float)
    phi, q, m, v_int, c = _ou_step_moments(params.a, params.power, w)
    root = math.sqrt(snr)
    h = root * m
    r = snr * v_int + w
    g = root * c
    return phi, q, h, r, g


@dataclass(frozen=True, eq=False)
class FilterRecursions:
    """Value-independent filter/smoother coefficients for one grid.

    Forward scan:   mean_{i+1} = phi_i mean_i + kgain_i (z_i - h_i mean_i)
    Backward scan:  sm_mean_i = mean_i + bg_next_i (sm_mean_{i+1} - phi_i mean_i)
                               + bg_obs_i (z_i - h_i mean_i)
                    sm_var_i  = bresid_i + bg_next_i^2 sm_var_{i+1}
    """

    phi: np.ndarray
    h: np.ndarray
    kgain: np.ndarray
    post_var: np.ndarray      # causal Var(X(t_i) | z_1..i), length n+1
    innov_var: np.ndarray
    bg_next: np.ndarray
    bg_obs: np.ndarray
    bresid: np.ndarray


def filter_recursions(params: OuParams, snr: float, widths) -> FilterRecursions:
    """Precompute all gains and variances of the exact discrete filter."""
    phi, q, h, r, g = ou_discrete_model(params, snr, widths)
    n = len(np.atleast_1d(np.asarray(widths, dtype=float)))
    phi, q, h, r, g = (np.broadcast_to(x, (n,)).astype(float) for x in (phi, q, h, r, g))
    post_var = np.empty(n + 1)
    innov_var = np.empty(n)
    kgain = np.empty(n)
    bg_next = np.empty(n)
    bg_obs = np.empty(n)
    bresid = np.empty(n)
    post_var[0] = params.power
    if params.power == 0.0:
        zeros = np.zeros(n)
        return FilterRecursions(phi, h, zeros, np.zeros(n + 1), r.copy(),
                                zeros, zeros.copy(), zeros.copy())
    for i in range(n):
        v = post_var[i]
        s = h[i] * h[i] * v + r[i]
        k = (phi[i] * v * h[i] + g[i]) / s
        innov_var[i] = s
        kgain[i] = k
        post_var[i + 1] = phi[i] * phi[i] * v + q[i] - k * k * s
        # Backward conditioning of X_i on (X_{i+1}, z_{i+1}) jointly: the
        # observation straddles the transition, so the plain RTS gain that
        # ignores z_{i+1} would not be exact.
        var_next = phi[i] * phi[i] * v + q[i]
        cov_next_z = phi[i] * v * h[i] + g[i]
        joint = np.array([[var_next, cov_next_z], [cov_next_z, s]])
        rhs = np.array([phi[i] * v, h[i] * v])
        gain = np.linalg.solve(joint, rhs)
        bg_next[i], bg_obs[i] = gain
        bresid[i] = v - gain @ rhs
    return FilterRecursions(phi, h, kgain, post_var, innov_var, bg_next, bg_obs, bresid)


def _check_grid_fineness(params: OuParams, grid: SamplingGrid):
    max_width = float(np.max(grid.widths)) if grid.n_points > 1 else 0.0
    limit = 1.0 / (_POINTS_PER_CORRELATION_TIME * params.a)
    if max_width > limit:
        raise GridTooCoarseError(
            f"grid spacing {max_width:.3g} exceeds 1/({_POINTS_PER_CORRELATION_TIME} a)"
            f" = {limit:.3g}; refine the grid"
        )


def _causal_means(rec: FilterRecursions, z: np.ndarray) -> np.ndarray:
    n = z.shape[-1]
    mean = np.zeros(z.shape[:-1] + (n + 1,))
    for i in range(n):
        m = mean[..., i]
        mean[..., i + 1] = rec.phi[i] * m + rec.kgain[i] * (z[..., i] - rec.h[i] * m)
    return mean


def _smoothed_moments(rec: FilterRecursions, z: np.ndarray, mean: np.ndarray):
    n = z.shape[-1]
    sm_mean = np.empty_like(mean)
    sm_var = np.empty(n + 1)
    sm_mean[..., n] = mean[..., n]
    sm_var[n] = rec.post_var[n]
    for i in range(n - 1, -1, -1):
        innov = z[..., i] - rec.h[i] * mean[..., i]
        dnext = sm_mean[..., i + 1] - rec.phi[i] * mean[..., i]
        sm_mean[..., i] = mean[..., i] + rec.bg_next[i] * dnext + rec.bg_obs[i] * innov
        sm_var[i] = rec.bresid[i] + rec.bg_next[i] ** 2 * sm_var[i + 1]
    return sm_mean, sm_var


def kalman_causal(params: OuParams, snr: float, y: Path) -> FilterEstimate:
    """Causal means E[X(t_i) | Y at grid times <= t_i] and their variances.

    Smoothed fields are filled with the causal ones; use
    :func:`kalman_smoother` for the fixed-interval estimates.
    """
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    _check_grid_fineness(params, y.grid)
    rec = filter_recursions(params, snr, y.grid.widths)
    mean = _causal_means(rec, np.diff(y.values))
    return FilterEstimate(y.grid, mean, rec.post_var, mean, rec.post_var)


def kalman_smoother(params: OuParams, snr: float, y: Path) -> FilterEstimate:
    """Fixed-interval smoother: E[X(t_i) | all observations] and variances."""
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    _check_grid_fineness(params, y.grid)
    rec = filter_recursions(params, snr, y.grid.widths)
    z = np.diff(y.values)
    mean = _causal_means(rec, z)
    sm_mean, sm_var = _smoothed_moments(rec, z, mean)
    return FilterEstimate(y.grid, mean, rec.post_var, sm_mean, sm_var)


def discrete_stationary_error(params: OuParams, snr: float, width: float) -> float:
    """Fixed point of the discrete filter variance recursion on a uniform grid.

    Solves the steady-state equation in closed form (it reduces to a
    quadratic); converges to :func:`riccati_stationary` as the width shrinks.
    """
    phi, q, h, r, g = ou_discrete_model(params, snr, width)
    phi, q, h, r, g = (float(x) for x in (phi, q, h, r, g))
    if h == 0.0 or params.power == 0.0:
        return params.power
    b = phi * phi * r + q * h * h - r - 2.0 * phi * h * g
    const = q * r - g * g
    return (b + math.sqrt(b * b + 4.0 * h * h * const)) / (2.0 * h * h)
