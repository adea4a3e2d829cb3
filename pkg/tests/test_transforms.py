import numpy as np
import pytest
from scipy.special import gamma

from borelsum.convolution_solver import BorelSolution
from borelsum.grid_core import MGrid, TauMField, TauRay
from borelsum.problem_model import SectorSpec
from borelsum.transforms import (DomainError, LaplaceError, build_solution, choose_direction,
                                 dt_kernel_coefficients, laplace_mk)


def test_choose_direction_cases():
    sec = SectorSpec(0.4, 0.0)
    assert choose_direction(np.exp(0.4j), sec, 0.5) == pytest.approx(0.4)
    with pytest.raises(DomainError, match="outside summable sector"):
        choose_direction(np.exp(1j * (0.4 + np.pi / 4)), sec, 0.5, k=2)
    g = choose_direction(np.exp(0.3j), SectorSpec(0.0, 0.2), 0.5, k=2)
    assert g == pytest.approx(0.1)
    assert np.cos(2 * (g - 0.3)) == pytest.approx(np.cos(0.4))


def _borel_monomial(n, k, R, profile, direction=0.0):
    grid = MGrid(2.0, 5)
    ray = TauRay.uniform(direction, R, 48, 2)
    vals = np.outer(ray.points**n / gamma(n / k), profile)
    return BorelSolution(TauMField(ray, grid, vals), 1.0, direction, 0.0, [])


def test_laplace_of_borel_monomial():
    prof = np.array([0.5, 1.0, 2.0, 1.0, 0.5])
    for k in (1, 2, 3):
        T = 0.4 * np.exp(0.1j)
        sol = _borel_monomial(1, k, 0.4 * 60.0 ** (1 / k), prof)
        assert np.allclose(laplace_mk(sol, T, k=k).values, T * prof, rtol=1e-10)
    zero = _borel_monomial(1, 2, 5.0, np.zeros(5))
    assert np.all(laplace_mk(zero, 0.3, k=2).values == 0)


def test_laplace_tail_check():
    sol = _borel_monomial(1, 2, 0.5, np.ones(5))
    with pytest.raises(LaplaceError, match="larger R_max"):
        laplace_mk(sol, 0.4, k=2)


def test_dt_kernel_coefficients():
    # d/dt exp(-(c/t)^k) = exp(-y) t^-1 (k y)
    assert np.allclose(dt_kernel_coefficients(1, 2), [0.0, 2.0])
    k, c, t, h = 2, 0.3, 0.5, 1e-4
    f = lambda s: np.exp(-(c / s) ** k)
    y = (c / t) ** k
    num = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
    co = dt_kernel_coefficients(2, k)
    assert num == pytest.approx(f(t) / t**2 * sum(ci * y**i for i, ci in enumerate(co)), rel=1e-6)


@pytest.fixture(scope="module")
def sector0(spec, plan):
    return build_solution(plan, 0, spec, 0.05, tol=1e-12)


def test_domain_checks(spec, plan, sector0):
    bp = sector0.beta_prime
    sector0(0.5 * sector0.h_prime, np.array([1j * bp]))
    with pytest.raises(DomainError):
        sector0(0.5 * sector0.h_prime, np.array([1j * bp * 1.01]))
    with pytest.raises(DomainError):
        sector0(2 * sector0.h_prime, np.array([0.0]))
    with pytest.raises(DomainError):
        build_solution(plan, 0, spec, 0.05j)


def test_linear_decay_at_t0(sector0):
    z = np.array([0.0, 1.0])
    vals = [np.max(np.abs(sector0(t, z))) for t in (1e-2, 1e-3, 1e-4)]
    assert vals[0] > vals[1] > vals[2]
    # at least linear; the canonical forcing starts at F_1, so U_1 = 0 and
    # the leading term is of order t^2
    order = np.log10(vals[1] / vals[2])
    assert order >= 0.95
    assert order == pytest.approx(2.0, abs=0.01)
    assert np.all(sector0(0.0, z) == 0)


def test_real_on_real_axis(sector0):
    z = np.linspace(-2, 2, 5)
    u = sector0(0.5 * sector0.h_prime, z)
    assert np.max(np.abs(u.imag)) < 1e-10 * max(1.0, np.max(np.abs(u)))
