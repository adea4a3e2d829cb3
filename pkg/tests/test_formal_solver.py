import numpy as np
import pytest
from scipy.special import gamma

from borelsum.formal_solver import FormalSeriesT, falling_product, formal_residual, gevrey_rate, solve_recursion
from borelsum.grid_core import MGrid, e_beta_mu_norm
from borelsum.problem_model import PolynomialSpec, SpecError


def _weight(spec, j):
    m = abs(spec.grid.nodes[j])
    return (1 + m) ** spec.mu * np.exp(spec.beta * m)


def test_recursion_residual_small(spec):
    for eps in (0.05, 0.2j, 1.0):
        s = solve_recursion(spec, eps, 16)
        res, scale = formal_residual(spec, s, eps, return_scale=True)
        assert all(r <= 1e-10 * sc for r, sc in zip(res, scale))


def test_perturbed_coefficient_shows_in_residual(spec):
    eps = 0.05
    s = solve_recursion(spec, eps, 8)
    j = spec.grid.points // 2              # m = 0, weight 1, |Q(0)| = 1
    c = s.coeffs.copy()
    c[1, j] += 1.0                         # U_2
    res = formal_residual(spec, FormalSeriesT(s.grid, c, eps), eps)
    q = abs(spec.Q(1j * spec.grid.nodes[j]))
    assert res[1] == pytest.approx(2 * q * _weight(spec, j), rel=1e-6)


def test_zero_series_residual_is_the_forcing(spec):
    eps = 0.1
    zero = FormalSeriesT(spec.grid, np.zeros((4, spec.grid.points), complex), eps)
    res = formal_residual(spec, zero, eps)
    assert res[0] == 0.0
    for n in (1, 2, 3):
        want = e_beta_mu_norm(spec.F(n) * (1 / eps), spec.beta, spec.mu)
        assert res[n] == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_recursion_errors(spec):
    with pytest.raises(SpecError):
        solve_recursion(spec, 0.1, 1)
    with pytest.raises(SpecError):
        solve_recursion(spec, 0.0, 8)
    with pytest.raises(SpecError):
        solve_recursion(spec.replace(Q=PolynomialSpec((0.0, 0.0, 1.0))), 0.1, 8)


def test_first_coefficient_is_the_forcing(spec):
    eps = 0.3
    s = solve_recursion(spec, eps, 4)
    # order 0: Q U_1 = F_0 / eps = 0, order 1: 2 Q U_2 = F_1 / eps
    assert np.all(s.U(1).values == 0)
    q = spec.Q(spec.im)
    assert np.allclose(s.U(2).values, spec.F(1).values / (eps * 2 * q))


def test_falling_product():
    assert falling_product(5, 2, 3) == 4 * 3
    assert falling_product(3, 1, 4) == 0


def _synthetic(norms, grid=MGrid(2.0, 5)):
    prof = np.zeros(grid.points)
    prof[grid.points // 2] = 1.0
    return FormalSeriesT(grid, np.outer(norms, prof).astype(complex), 1.0)


def test_gevrey_rate_geometric_borel_growth():
    n = np.arange(1, 21)
    for k in (1, 2, 3):
        g = gevrey_rate(_synthetic(gamma(n / k) * 2.0**n), k)
        assert g["rho_est"] == pytest.approx(0.5, rel=1e-6)
        assert g["fit_r2"] > 0.999
        assert g["divergent"]


def test_gevrey_rate_convergent_series_flagged():
    n = np.arange(1, 21)
    g = gevrey_rate(_synthetic(3.0**n), 2)
    assert not g["divergent"]
    assert g["flag"] == "no divergence detected"


def test_gevrey_rate_terminating_series():
    n = np.arange(1, 21)
    vals = np.where(n <= 5, 1.0, 0.0)
    with pytest.raises(SpecError, match="series terminates"):
        gevrey_rate(_synthetic(vals), 2)


def test_canonical_rate_stable(spec):
    r = [gevrey_rate(solve_recursion(spec, 1.0, N), spec.k)["rho_est"] for N in (12, 16)]
    assert r[0] > 0 and abs(r[1] / r[0] - 1) <= 0.2
