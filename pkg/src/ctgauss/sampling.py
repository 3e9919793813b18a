"""Sampling grids and exact Gaussian sample paths.

The toolkit works on finite observation grids over a horizon [0, T].  Grids
refine dyadically (each refinement inserts interval midpoints, so a refined
grid contains its parent).  Two process families are generated with exact
Gaussian increments, never with an Euler scheme:

* standard Brownian motion: independent N(0, dt) increments;
* stationary Ornstein-Uhlenbeck with mean-reversion rate ``a`` and
  stationary power ``P``: autocovariance ``P * exp(-a|t-s|)``, sampled
  through the exact AR(1) transition
  ``X(t+dt) = exp(-a dt) X(t) + N(0, P (1 - exp(-2 a dt)))``.

:func:`sample_ou_with_integral` additionally draws the exact time integral
of the path over each grid interval, jointly with the endpoint values, from
the closed-form bivariate transition law.  Downstream consumers (filtering,
decoding statistics) rely on those integrals being exact, not quadrature
approximations of the sampled values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .rng import RngSeed


def _frozen_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Ordered observation times on [0, T], first 0, last T."""

    times: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("grid needs a 1-D, nonempty array of times")
        if times[0] != 0.0:
            raise ValueError(f"first grid time must be 0, got {times[0]}")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_points(self) -> int:
        return int(self.times.size)

    @property
    def widths(self) -> np.ndarray:
        """Interval widths t_i - t_{i-1}."""
        return np.diff(self.times)

    def __eq__(self, other):
        if not isinstance(other, SamplingGrid):
            return NotImplemented
        return self.times.shape == other.times.shape and bool(
            np.all(self.times == other.times)
        )


@dataclass(frozen=True, eq=False)
class Path:
    """Process values observed on a grid, one value per grid time."""

    grid: SamplingGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.times.shape:
            raise ValueError(
                f"{values.size} values for {self.grid.n_points} grid times"
            )


@dataclass(frozen=True)
class OuParams:
    """Ornstein-Uhlenbeck input: mean-reversion rate a > 0, stationary power P >= 0."""

    a: float
    power: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"mean-reversion rate must be positive, got {self.a}")
        if self.power < 0:
            raise ValueError(f"stationary power must be nonnegative, got {self.power}")


def make_dyadic_grid(horizon: float, level: int) -> SamplingGrid:
    """Uniform grid with ``2**level`` equal intervals on [0, horizon]."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    return SamplingGrid(np.linspace(0.0, horizon, 2**level + 1))


def refine(grid: SamplingGrid) -> SamplingGrid:
    """Insert the midpoint of every interval; the result contains the parent."""
    t = grid.times
    if t.size < 2:
        return SamplingGrid(t.copy())
    mids = 0.5 * (t[:-1] + t[1:])
    out = np.empty(t.size + mids.size)
    out[0::2] = t
    out[1::2] = mids
    return SamplingGrid(out)


def sample_brownian(grid: SamplingGrid, seed: RngSeed) -> Path:
    """Standard Brownian motion on the grid: B(0)=0, increments N(0, dt)."""
    rng = seed.generator()
    widths = grid.widths
    inc = rng.standard_normal(widths.size) * np.sqrt(widths)
    values = np.concatenate(([0.0], np.cumsum(inc)))
    return Path(grid, values)


def _expm1_relief(x):
    """1 - exp(-x) for x >= 0 without cancellation."""
    return -np.expm1(-np.asarray(x, dtype=float))


def _bridge_kernel(x):
    """x - 1 + exp(-x), series below x = 0.1 to dodge cancellation."""
    x = np.asarray(x, dtype=float)
    small = x < 0.1
    direct = np.where(small, 1.0, x) - 1.0 + np.exp(-np.where(small, 1.0, x))
    xs = np.where(small, x, 0.0)
    series = xs * xs * (1.0 / 2 + xs * (-1.0 / 6 + xs * (1.0 / 24 + xs * (
        -1.0 / 120 + xs * (1.0 / 720 + xs * (-1.0 / 5040 + xs * (1.0 / 40320)))))))
    return np.where(small, series, direct)


def _int_var_kernel(x):
    """2x - 3 + 4 exp(-x) - exp(-2x), series below x = 0.1.

    Equals the conditional variance kernel of the interval integral of a
    unit-power OU path given its left endpoint (before the P/a^2 scale); the
    direct form loses all precision for small x because the leading order is
    (2/3) x^3.
    """
    x = np.asarray(x, dtype=float)
    small = x < 0.1
    xb = np.where(small, 1.0, x)
    direct = 2.0 * xb - 3.0 + 4.0 * np.exp(-xb) - np.exp(-2.0 * xb)
    xs = np.where(small, x, 0.0)
    series = xs**3 * (2.0 / 3 + xs * (-1.0 / 2 + xs * (7.0 / 30 + xs * (
        -1.0 / 12 + xs * (31.0 / 1260 + xs * (-1.0 / 160 + xs * (127.0 / 90720)))))))
    return np.where(small, series, direct)


def _ou_step_moments(a: float, power: float, width):
    """Exact one-step moments of (X(t+w), int_t^{t+w} X ds) given X(t).

    Returns (phi, q, m, v_int, c) with
      X(t+w)      = phi X(t) + xi,           xi  ~ N(0, q)
      int X ds    = m  X(t) + eta,           eta ~ N(0, v_int), Cov(xi,eta)=c
    for the stationary-OU transition kernel.  All kernels are evaluated in
    cancellation-free form so the moments stay accurate down to a*w ~ 1e-12.
    """
    x = a * np.asarray(width, dtype=float)
    one_m_e = _expm1_relief(x)
    phi = 1.0 - one_m_e
    q = power * _expm1_relief(2.0 * x)
    m = one_m_e / a
    v_int = (power / a**2) * _int_var_kernel(x)
    c = (power / a) * one_m_e * one_m_e
    return phi, q, m, v_int, c


def _sample_ou_arrays(params: OuParams, grid: SamplingGrid, rng, n_paths: int):
    """Exact joint draw of n_paths OU paths and their interval integrals.

    Returns (X, U): X has shape (n_paths, n_points) with the process at grid
    times, U has shape (n_paths, n_points - 1) with the exact integral of the
    path over each interval.  Stationary initialisation X(0) ~ N(0, P).
    """
    a, power = params.a, params.power
    widths = grid.widths
    n = widths.size
    x0 = rng.standard_normal(n_paths) * math.sqrt(power)
    if n == 0:
        return x0[:, None], np.empty((n_paths, 0))
    phi, q, m, v_int, c = _ou_step_moments(a, power, widths)
    xi = rng.standard_normal((n_paths, n)) * np.sqrt(q)
    zeta = rng.standard_normal((n_paths, n))
    if power == 0.0:
        return np.zeros((n_paths, n + 1)), np.zeros((n_paths, n))
    # X_i = phi_i X_{i-1} + xi_i.  Uniform grids take the vectorised AR(1)
    # scan; nonuniform ones fall back to a per-step loop.
    X = np.empty((n_paths, n + 1))
    X[:, 0] = x0
    if np.all(widths == widths[0]):
        p = float(np.atleast_1d(phi)[0])
        drive = xi.copy()
        drive[:, 0] += p * x0
        X[:, 1:] = lfilter([1.0], [1.0, -p], drive, axis=1)
    else:
        for i in range(n):
            X[:, i + 1] = phi[i] * X[:, i] + xi[:, i]
    # Integral increments: eta | xi is Gaussian with slope c/q.
    beta = np.where(q > 0, c / np.where(q > 0, q, 1.0), 0.0)
    resid = np.sqrt(np.maximum(v_int - beta * c, 0.0))
    U = m * X[:, :-1] + beta * xi + resid * zeta
    return X, U


def sample_ou(params: OuParams, grid: SamplingGrid, seed: RngSeed) -> Path:
    """Stationary OU path on the grid via the exact Gaussian transition."""
    X, _ = _sample_ou_arrays(params, grid, seed.generator(), 1)
    return Path(grid, X[0])


def sample_ou_with_integral(
    params: OuParams, grid: SamplingGrid, seed: RngSeed
) -> tuple[Path, np.ndarray]:
    """OU path plus the exact integral of the path over each grid interval.

    The integral increments are drawn jointly with the endpoint values from
    the exact bivariate transition law, so ``sum(increments[:i])`` is an
    exact sample of ``int_0^{t_i} X ds`` (not a quadrature of the values).
    """
    X, U = _sample_ou_arrays(params, grid, seed.generator(), 1)
    return Path(grid, X[0]), U[0]


def ou_psd(params: OuParams, lam) -> np.ndarray | float:
    """Power spectral density 2aP / (2 pi (lam^2 + a^2)); integrates to P."""
    lam = np.asarray(lam, dtype=float)
    out = 2.0 * params.a * params.power / (2.0 * np.pi * (lam**2 + params.a**2))
    return out if out.ndim else float(out)


def average_power(path: Path) -> float:
    """Time-average power (1/T) int_0^T X(s)^2 ds by the trapezoid rule."""
    if path.grid.n_points < 2:
        raise ValueError("average power needs a grid with at least 2 points")
    sq = path.values**2
    return float(np.trapezoid(sq, path.grid.times) / path.grid.horizon)


def integrate_path(path: Path) -> Path:
    """Cumulative trapezoid integral of the path; value 0 at t=0."""
    if path.grid.n_points < 2:
        raise ValueError("integration needs a grid with at least 2 points")
    inc = 0.5 * (path.values[1:] + path.values[:-1]) * path.grid.widths
    values = np.concatenate(([0.0], np.cumsum(inc)))
    return Path(path.grid, values)
