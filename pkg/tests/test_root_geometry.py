import numpy as np
import pytest

from borelsum.problem_model import PolynomialSpec
from borelsum.root_geometry import (CoveringPlan, GeometryError, P_m, build_good_covering, direction_admissibility,
                                    root_residuals, roots_qlm, verify_covering)


def test_roots_examples(spec):
    r0 = np.sort_complex(roots_qlm(spec, 0.0))
    assert np.allclose(r0, [-np.sqrt(0.5) * 1j, np.sqrt(0.5) * 1j], atol=1e-14)
    r1 = np.sort_complex(roots_qlm(spec, 1.0))
    assert np.allclose(r1, [-1j, 1j], atol=1e-14)
    assert np.max(root_residuals(spec)) < 1e-10
    assert np.allclose(P_m(spec, r1, 1.0), 0, atol=1e-13)


def test_roots_error_when_Q_vanishes(spec):
    with pytest.raises(GeometryError):
        roots_qlm(spec.replace(Q=PolynomialSpec((0.0, 0.0, 1.0))), 0.0)


def test_admissibility_cases(spec):
    good = direction_admissibility(spec, 0.0, 0.0, spec.rho)
    assert good.admissible and good.M1 > 0.25 and good.M2 > 0.5
    bad = direction_admissibility(spec, np.pi / 2, 0.0, spec.rho)
    assert not bad.admissible and bad.M1 < 1e-3
    big = direction_admissibility(spec, 0.0, 0.0, 1.0)
    assert not big.admissible and big.reason == "roots enter 2rho disc"


def test_covering_five_sectors(spec, plan):
    assert plan.count == 5
    assert all(s.aperture > np.pi / 2 for s in plan.sectors)
    checks = verify_covering(plan)
    assert checks["all"], checks
    # angular oracle: every direction in one or two sectors, never three
    phi = np.linspace(-np.pi, np.pi, 10_000, endpoint=False)
    cnt = sum(s.contains_arg(phi).astype(int) for s in plan.sectors)
    assert cnt.min() == 1 and cnt.max() == 2
    for p in range(plan.count):
        lo, hi = plan.overlap_arc(p)
        assert hi > lo


def test_covering_four_sectors(spec):
    p4 = build_good_covering(spec, 4, 1.0, offset=np.pi / 4)
    assert verify_covering(p4)["all"]
    lo, hi = p4.overlap_arc(0)
    assert hi - lo > 0
    with pytest.raises(GeometryError, match="no admissible direction"):
        build_good_covering(spec, 4, 1.0)         # directions through the roots at +-pi/2


def test_covering_three_sectors_impossible(spec):
    with pytest.raises(GeometryError, match="aperture constraint unsatisfiable"):
        build_good_covering(spec, 3, 1.0)


def test_plan_json_round_trip(plan, tmp_path):
    plan.to_json(tmp_path / "plan.json", {"note": "x"})
    back = CoveringPlan.from_json(tmp_path / "plan.json")
    assert back.count == plan.count
    assert np.allclose(back.directions, plan.directions)
    assert verify_covering(back)["all"]
