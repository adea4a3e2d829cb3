import dataclasses

import numpy as np
import pytest

from borelsum.convolution_solver import ContractionError
from borelsum.transforms import build_solution
from borelsum.verifier import (_taylor, fit_flatness, flatness_probe, pde_residual, rs_check, sample_grid)


def test_zero_problem_residual(spec, plan):
    zero = spec.replace(forcing_series=[], coeff_series=[])
    sol = build_solution(plan, 0, zero, 0.05)
    ts, zs = sample_grid(sol)
    r = pde_residual(sol, ts, zs)
    assert r["residual"] == 0.0 and r["forcing_scale"] == 0.0


@pytest.mark.slow
def test_residual_and_perturbation(spec, plan):
    sol = build_solution(plan, 1, spec, 0.05 * np.exp(1j * plan.sectors[1].direction), tol=1e-12)
    ts, zs = sample_grid(sol)
    good = pde_residual(sol, ts, zs)
    assert good["relative"] < 1e-6
    base = sol.solution_field
    scaled = dataclasses.replace(base, field=base.field * 1.01)
    bad = build_solution(plan, 1, spec, sol.eps, solution=scaled)
    r = pde_residual(bad, ts, zs)
    assert r["residual"] >= 1e-2 * good["lhs_scale"]


def test_fit_flatness_recovers_order():
    a = 0.6 * 0.9 ** np.arange(8)
    d = 3.0 * np.exp(-0.5 / a**2)
    logK, M, r2, r2_lower = fit_flatness(a, d, 2)
    assert M == pytest.approx(0.5) and np.exp(logK) == pytest.approx(3.0)
    assert r2 == pytest.approx(1.0) and r2_lower < r2


def test_taylor_interpolation():
    s = 0.04 * 2.0 ** -np.arange(4)
    vals = [np.array([1 + 2 * x - x**2 + 0.5 * x**3]) for x in s]
    c = _taylor(vals, s, 3)
    assert np.allclose(c[:, 0], [1, 2, -1, 0.5])


@pytest.mark.slow
def test_degenerate_plan_is_flat(spec, plan):
    P = plan.count
    deg = dataclasses.replace(plan, sectors=[plan.sectors[0]] * P, directions=[plan.directions[0]] * P,
                              borel_sectors=[plan.borel_sectors[0]] * P, reports=[plan.reports[0]] * P)
    rep = flatness_probe(deg, 0, spec)
    assert rep.status == "flat beyond measurement"
    assert rep.passed


@pytest.mark.slow
def test_rs_check_canonical(spec, plan, flatness_reports):
    rs = rs_check(plan, spec, flatness=[r for r, _ in flatness_reports])
    assert rs.hypothesis1, rs.growth_slopes
    assert rs.hypothesis2, rs.failing
    assert len(rs.flatness) == plan.count and rs.flatness[-1].q == 0


def test_rs_check_unreachable_when_contraction_fails(spec, plan):
    loud = spec.replace(forcing_series=[f * 1e3 for f in spec.forcing_series])
    with pytest.raises(ContractionError):
        rs_check(plan, loud, n_eps=1, flatness=[])
