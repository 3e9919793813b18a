"""Grid construction and exact path sampling."""

import numpy as np
import pytest

from ctgauss.rng import RngSeed
from ctgauss.sampling import (
    OuParams,
    Path,
    SamplingGrid,
    average_power,
    integrate_path,
    make_dyadic_grid,
    ou_psd,
    refine,
    sample_brownian,
    sample_ou,
    sample_ou_with_integral,
)


def test_dyadic_grid_endpoints():
    g = make_dyadic_grid(1.0, 0)
    assert np.array_equal(g.times, [0.0, 1.0])


def test_dyadic_grid_quarters():
    g = make_dyadic_grid(1.0, 2)
    assert np.array_equal(g.times, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_dyadic_grid_midpoint():
    g = make_dyadic_grid(2.0, 1)
    assert np.array_equal(g.times, [0.0, 1.0, 2.0])


def test_dyadic_grid_rejects_bad_horizon():
    with pytest.raises(ValueError):
        make_dyadic_grid(0.0, 3)
    with pytest.raises(ValueError):
        make_dyadic_grid(-1.0, 3)


def test_refine_inserts_midpoints():
    g = SamplingGrid(np.array([0.0, 1.0]))
    assert np.array_equal(refine(g).times, [0.0, 0.5, 1.0])
    assert np.array_equal(refine(refine(g)).times, [0.0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize("level", [0, 1, 3, 5])
def test_refinement_chain_is_nested(level):
    coarse = make_dyadic_grid(1.7, level)
    finer = make_dyadic_grid(1.7, level + 1)
    assert set(np.round(coarse.times, 12)) <= set(np.round(finer.times, 12))
    # refine() reproduces the next dyadic level on uniform grids
    assert np.allclose(refine(coarse).times, finer.times)


def test_refine_superset_on_irregular_grids():
    rng = np.random.default_rng(5)
    for _ in range(20):
        times = np.concatenate(([0.0], np.sort(rng.uniform(0.01, 0.99, 7)), [1.0]))
        g = SamplingGrid(times)
        assert set(g.times) <= set(refine(g).times)


def test_grid_validation():
    with pytest.raises(ValueError):
        SamplingGrid(np.array([0.1, 1.0]))
    with pytest.raises(ValueError):
        SamplingGrid(np.array([0.0, 0.5, 0.5, 1.0]))


def test_brownian_starts_at_zero():
    path = sample_brownian(make_dyadic_grid(1.0, 4), RngSeed(1))
    assert path.values[0] == 0.0


def test_brownian_variance_and_min_covariance():
    # E[B(1)^2] = 1 and Cov(B(0.5), B(1)) = 0.5, Monte Carlo at fixed seed
    grid = make_dyadic_grid(1.0, 1)
    draws = np.array(
        [sample_brownian(grid, RngSeed(77, k)).values for k in range(10**5)]
    )
    var_end = np.var(draws[:, 2])
    cov = np.mean(draws[:, 1] * draws[:, 2])
    assert abs(var_end - 1.0) < 0.02
    assert abs(cov - 0.5) < 0.02


def test_ou_zero_power_is_zero_path():
    path = sample_ou(OuParams(1.0, 0.0), make_dyadic_grid(1.0, 5), RngSeed(3))
    assert np.all(path.values == 0.0)


def test_ou_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        OuParams(0.0, 1.0)
    with pytest.raises(ValueError):
        OuParams(-2.0, 1.0)


def _ou_draws(params, grid, master, n):
    seed = RngSeed(master)
    return np.array([sample_ou(params, grid, seed.child(k)).values for k in range(n)])


def test_ou_stationary_variance_monte_carlo():
    grid = make_dyadic_grid(1.0, 2)
    draws = _ou_draws(OuParams(1.0, 1.0), grid, 11, 10**5)
    assert np.all(np.abs(np.var(draws, axis=0) - 1.0) < 0.02)


def test_ou_autocorrelation_monte_carlo():
    grid = make_dyadic_grid(1.0, 2)
    draws = _ou_draws(OuParams(1.0, 1.0), grid, 12, 10**5)
    corr = np.mean(draws[:, 0] * draws[:, -1])
    assert abs(corr - np.exp(-1.0)) < 0.02


def test_ou_seeded_determinism():
    params, grid = OuParams(0.7, 2.0), make_dyadic_grid(2.0, 6)
    a = sample_ou(params, grid, RngSeed(42, 9)).values
    b = sample_ou(params, grid, RngSeed(42, 9)).values
    c = sample_ou(params, grid, RngSeed(42, 10)).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_ou_marginal_law_consistent_across_refinement():
    # mean/variance at shared times agree within 3 standard errors
    params = OuParams(1.0, 1.0)
    coarse = make_dyadic_grid(1.0, 2)
    fine = refine(coarse)
    n = 20000
    d_coarse = _ou_draws(params, coarse, 21, n)
    d_fine = _ou_draws(params, fine, 22, n)[:, ::2]
    se_mean = np.sqrt(1.0 / n)
    se_var = np.sqrt(2.0 / n)
    assert np.all(np.abs(d_coarse.mean(0) - d_fine.mean(0)) < 3 * np.sqrt(2) * se_mean)
    assert np.all(np.abs(d_coarse.var(0) - d_fine.var(0)) < 3 * np.sqrt(2) * se_var)


def test_ou_integral_increments_match_trapezoid_in_the_limit():
    # exact integral increments agree with the trapezoid of a fine path
    params = OuParams(1.0, 1.0)
    grid = make_dyadic_grid(1.0, 10)
    path, inc = sample_ou_with_integral(params, grid, RngSeed(33))
    trap = np.diff(integrate_path(path).values)
    assert np.corrcoef(inc, trap)[0, 1] > 0.999


def test_ou_integral_increment_variance():
    # Var(int_0^w X) = (2P/a^2)(a w - 1 + e^{-a w}), Monte Carlo
    params = OuParams(1.0, 1.0)
    grid = make_dyadic_grid(0.5, 0)
    seed = RngSeed(55)
    draws = np.array(
        [sample_ou_with_integral(params, grid, seed.child(k))[1][0] for k in range(40000)]
    )
    target = 2.0 * (0.5 - 1.0 + np.exp(-0.5))
    assert abs(np.var(draws) - target) < 4 * np.sqrt(2.0 / 40000) * target


def test_ou_psd_values():
    assert ou_psd(OuParams(1.0, 1.0), 0.0) == pytest.approx(1.0 / np.pi)
    assert ou_psd(OuParams(2.0, 0.0), 1.3) == 0.0


def test_ou_psd_integrates_to_power():
    from scipy.integrate import quad

    params = OuParams(1.7, 2.3)
    total, _ = quad(lambda lam: ou_psd(params, lam), -np.inf, np.inf)
    assert total == pytest.approx(params.power, rel=1e-9)


def test_average_power_constant_and_zero():
    grid = make_dyadic_grid(2.0, 3)
    c = Path(grid, np.full(grid.n_points, 3.0))
    assert average_power(c) == pytest.approx(9.0)
    z = Path(grid, np.zeros(grid.n_points))
    assert average_power(z) == 0.0


def test_average_power_linear_path():
    grid = make_dyadic_grid(1.0, 10)
    path = Path(grid, grid.times.copy())
    assert abs(average_power(path) - 1.0 / 3.0) < 1e-4


def test_average_power_rejects_single_point():
    grid = SamplingGrid(np.array([0.0]))
    with pytest.raises(ValueError):
        average_power(Path(grid, np.array([1.0])))


def test_integrate_path_exact_cases():
    grid = make_dyadic_grid(1.0, 4)
    zero = integrate_path(Path(grid, np.zeros(grid.n_points)))
    assert np.all(zero.values == 0.0)
    const = integrate_path(Path(grid, np.full(grid.n_points, 2.5)))
    assert np.allclose(const.values, 2.5 * grid.times)


def test_integrate_path_linear():
    grid = make_dyadic_grid(1.0, 10)
    out = integrate_path(Path(grid, grid.times.copy()))
    assert abs(out.values[-1] - 0.5) < 1e-6
    assert out.values[0] == 0.0


def test_power_excess_fraction_decreases_with_horizon():
    # ergodicity: P(average_power > P + delta) shrinks as T grows
    params = OuParams(1.0, 1.0)
    delta, n = 0.25, 3000
    fractions = []
    for master, horizon in [(61, 4.0), (62, 16.0), (63, 64.0)]:
        grid = make_dyadic_grid(horizon, 9)
        seed = RngSeed(master)
        count = sum(
            average_power(sample_ou(params, grid, seed.child(k))) > 1.0 + delta
            for k in range(n)
        )
        fractions.append(count / n)
    assert fractions[0] > fractions[1] > fractions[2]
