import numpy as np
import pytest

from borelsum.grid_core import MGrid
from borelsum.problem_model import (H_DD, H_DELTA_INC, H_QUOTIENT, H_SERIES, OperatorTerm, PolynomialSpec, SectorSpec,
                                    SpecError, canonical_spec, derived_indices, expansion_coefficients, quotient_sector,
                                    validate_structure, wrap_angle)

ONE = PolynomialSpec.const(1.0)


def test_canonical_passes_every_hypothesis(spec):
    rep = validate_structure(spec)
    assert rep.overall, rep.failures


def test_non_increasing_delta_is_flagged(spec):
    terms = [OperatorTerm(4, 1, 1, ONE), OperatorTerm(3, 1, 2, ONE)]
    rep = validate_structure(spec.replace(terms=terms))
    assert not rep.flags[H_DELTA_INC]
    assert not rep.overall


def test_wrong_d_D_is_flagged(spec):
    terms = [OperatorTerm(4, 1, 1, ONE), OperatorTerm(2, 2, 2, ONE)]
    rep = validate_structure(spec.replace(terms=terms))
    assert not rep.flags[H_DD]
    assert H_DD in rep.failures


def test_single_term_is_a_hard_error(spec):
    with pytest.raises(SpecError):
        validate_structure(spec.replace(terms=[OperatorTerm(4, 1, 1, ONE)]))
    with pytest.raises(SpecError):
        validate_structure(spec.replace(terms=[]))


def test_operator_term_range():
    with pytest.raises(SpecError):
        OperatorTerm(1, 0, 1, ONE)


def test_large_data_fails_series_bound(spec):
    big = [f * 10.0 for f in spec.forcing_series]
    rep = validate_structure(spec.replace(forcing_series=big))
    assert not rep.flags[H_SERIES]


def test_derived_indices(spec):
    assert derived_indices(spec) == [4, 0]
    k1 = spec.replace(k=1, terms=[OperatorTerm(5, 2, 1, ONE), OperatorTerm(2, 2, 1, ONE)])
    assert derived_indices(k1)[0] == 3


def test_negative_derived_index_raises(spec):
    with pytest.raises(SpecError):
        derived_indices(spec.replace(terms=[OperatorTerm(1, 1, 1, ONE), OperatorTerm(0, 2, 2, ONE)]))


def test_quotient_sector_cases(spec):
    sec = quotient_sector(spec)
    assert abs(abs(sec.direction) - np.pi) < 1e-12
    assert sec.aperture < 1e-12
    assert sec.inner_radius == pytest.approx(1.0)
    same = quotient_sector(spec.replace(Q=ONE))
    assert same.direction == pytest.approx(0.0) and same.aperture == pytest.approx(0.0)
    assert same.inner_radius == pytest.approx(1.0)
    with pytest.raises(SpecError):
        quotient_sector(spec.replace(Q=PolynomialSpec((0.0, 0.0, 1.0))))
    rep = validate_structure(spec.replace(Q=PolynomialSpec((0.0, 0.0, 1.0))))
    assert not rep.flags[H_QUOTIENT]


def test_expansion_coefficients_match_operator_identity():
    # apply T^{delta(k+1)} dT^delta and the expansion to T^n and compare
    for k in (1, 2, 3):
        for delta in (1, 2, 3, 4):
            A = expansion_coefficients(delta, k)
            for n in range(1, 8):
                lhs = np.prod([n - j for j in range(delta)], dtype=float)
                rising = lambda p: np.prod([n + i * k for i in range(p)], dtype=float)
                rhs = rising(delta) + sum(a * rising(p) for p, a in enumerate(A, start=1))
                assert lhs == rhs


def test_polynomial_and_sector_helpers():
    p = PolynomialSpec((1.0, 0.0, 0.0))
    assert p.degree == 0
    assert PolynomialSpec((-1.0, 0.0, 1.0))(2j) == pytest.approx(-5.0)
    s = SectorSpec(0.0, 1.0, 0.0, 2.0)
    assert s.contains(1.0 + 0.1j) and not s.contains(3.0) and not s.contains(1j)
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    with pytest.raises(SpecError):
        SectorSpec(0.0, 7.0)


def test_canonical_grid_override():
    s = canonical_spec(MGrid(5.0, 51))
    assert s.grid.points == 51 and len(s.coeff_series[0].values) == 51
