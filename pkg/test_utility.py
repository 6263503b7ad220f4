"""
Tests for utility index assignment, quadratic fitting and risk-aversion analysis
"""

import sys
from fractions import Fraction

import numpy as np
import pytest

from src.lab_errors import StationaryPointError, ValidationError
from src.utility_functions import (
    CONCAVE,
    CONVEX,
    LINEAR,
    DeductibleContract,
    QuadraticUtility,
    UtilityIndexScheme,
    UtilityPoint,
    analyze_utility,
    ara,
    assign_utility_indices,
    classify_risk_attitude,
    curvature_of,
    curvature_under_schemes,
    deductible_final_wealth,
    evaluate_utility,
    fit_quadratic,
    points_domain,
)

SCHEME = UtilityIndexScheme()

FD_STEP = Fraction(1, 100_000)

PRINTED_POINTS = {
    "D": [UtilityPoint(0.51, 0.333), UtilityPoint(0.75, 0.666), UtilityPoint(0.79, 0.999)],
    "N": [UtilityPoint(0.35, 0.999), UtilityPoint(0.20, 0.333), UtilityPoint(0.24, 0.666)],
    "U": [UtilityPoint(0.22, 0.333), UtilityPoint(0.36, 0.666), UtilityPoint(0.41, 0.999)],
}


def test_indices_follow_the_excess_ranking():
    points = assign_utility_indices([0.35, 0.20, 0.24], SCHEME)
    assert [p.u for p in points] == [0.999, 0.333, 0.666]
    assert [p.x for p in points] == [0.35, 0.20, 0.24]

    points = assign_utility_indices([0.51, 0.75, 0.79], SCHEME)
    assert [p.u for p in points] == [0.333, 0.666, 0.999]


def test_ties_keep_instance_order():
    points = assign_utility_indices([0.3, 0.3, 0.1], SCHEME)
    assert [p.u for p in points] == [0.666, 0.999, 0.333]


def test_scheme_length_must_match():
    with pytest.raises(ValidationError):
        assign_utility_indices([0.1, 0.2], SCHEME)


def test_scheme_validation():
    with pytest.raises(ValidationError):
        UtilityIndexScheme(())
    with pytest.raises(ValidationError):
        UtilityIndexScheme((0.5, 0.4))
    with pytest.raises(ValidationError):
        UtilityIndexScheme((0.0, 0.5))
    with pytest.raises(ValidationError):
        UtilityIndexScheme((0.5, 1.2))
    assert UtilityIndexScheme.equally_spaced(3).indices == (0.333, 0.666, 0.999)
    assert len(UtilityIndexScheme.equally_spaced(5)) == 5


def test_utility_point_range():
    with pytest.raises(ValidationError):
        UtilityPoint(0.1, 0.0)
    with pytest.raises(ValidationError):
        UtilityPoint(0.1, 1.5)


@pytest.mark.parametrize("label, coefficients", [
    ("D", (24.777, -29.831, 9.1025)),
    ("N", (-35.318, 23.865, -3.0273)),
    ("U", (22.534, -10.691, 1.5944)),
])
def test_fit_reproduces_the_printed_coefficients(label, coefficients):
    points = PRINTED_POINTS[label]
    q = fit_quadratic(points)
    assert q.coefficients == pytest.approx(coefficients, abs=1e-2)
    for point in points:
        assert abs(evaluate_utility(q, point.x)[0] - point.u) < 1e-9


def test_collinear_points_fit_a_line():
    q = fit_quadratic([UtilityPoint(0.1, 0.2), UtilityPoint(0.2, 0.4), UtilityPoint(0.3, 0.6)])
    assert abs(q.a2) < 1e-9
    assert q.a1 == pytest.approx(2.0, abs=1e-9)
    assert curvature_of(q) == LINEAR


def test_more_points_are_fitted_by_least_squares():
    xs = np.linspace(0.1, 0.9, 7)
    q = fit_quadratic([UtilityPoint(x, 0.1 + 0.5 * x * x) for x in xs])
    assert q.coefficients == pytest.approx((0.5, 0.0, 0.1), abs=1e-9)


def test_fit_errors():
    with pytest.raises(ValidationError, match="insufficient points"):
        fit_quadratic(PRINTED_POINTS["D"][:2])
    duplicate = [UtilityPoint(0.3658, 0.333), UtilityPoint(0.3658, 0.666), UtilityPoint(0.3658, 0.999)]
    with pytest.raises(ValidationError, match="duplicate"):
        fit_quadratic(duplicate)


def test_evaluate_at_the_first_printed_point():
    q = QuadraticUtility(24.777, -29.831, 9.1025)
    u, du, d2u = evaluate_utility(q, 0.51)
    assert u == pytest.approx(0.333, abs=1e-3)
    assert d2u == pytest.approx(2 * 24.777, abs=1e-12)
    assert du == pytest.approx(2 * 24.777 * 0.51 - 29.831, abs=1e-12)


def test_arrow_pratt_values():
    q = QuadraticUtility(24.777, -29.831, 9.1025)
    assert ara(q, 0.7) == pytest.approx(-10.203, abs=1e-3)
    assert ara(QuadraticUtility(0.0, 2.0, 0.1), 0.4) == 0.0
    assert evaluate_utility(QuadraticUtility.from_parabolic(0.0, 1.0, 1.0), 0.0)[1] == 1.0


def test_parabolic_parameterisation():
    q = QuadraticUtility.from_parabolic(1.0, 2.0, 3.0)
    assert q.coefficients == (-3.0, 2.0, 1.0)
    assert q.as_parabolic() == (1.0, 2.0, 3.0)
    # lambda = 2c / (b - 2cx) at x = 0
    assert ara(QuadraticUtility.from_parabolic(0.0, 1.0, 1.0), 0.0) == pytest.approx(2.0, abs=1e-12)


def test_lambda_is_undefined_at_the_vertex():
    q = QuadraticUtility(1.0, -1.0, 0.0)
    with pytest.raises(StationaryPointError):
        ara(q, 0.5)
    assert classify_risk_attitude(q, 0.5) == "undefined"


def test_stationary_point_error_is_arithmetic():
    with pytest.raises(ArithmeticError):
        ara(QuadraticUtility(0.0, 0.0, 1.0), 0.3)


@pytest.mark.parametrize("label, curvature, vertex", [
    ("D", CONVEX, 0.60199),
    ("N", CONCAVE, 0.33786),
    ("U", CONVEX, 0.23722),
])
def test_analysis_of_the_printed_fits(label, curvature, vertex):
    q = fit_quadratic(PRINTED_POINTS[label])
    analysis = analyze_utility(q, points_domain(PRINTED_POINTS[label]))
    assert analysis.curvature == curvature
    assert analysis.vertex_x == pytest.approx(vertex, abs=1e-4)
    assert analysis.non_monotone
    assert len(analysis.ara_sign_by_interval) == 2
    assert analysis.iara_flag == (curvature == CONCAVE)


def test_convex_fit_is_risk_loving_above_the_vertex():
    q = fit_quadratic(PRINTED_POINTS["D"])
    analysis = analyze_utility(q, (0.0, 1.0))
    below, above = analysis.ara_sign_by_interval
    assert below.attitude == "risk_averse"
    assert above.attitude == "risk_loving"
    assert analysis.increasing_interval == pytest.approx((analysis.vertex_x, 1.0))
    assert analysis.bliss_point is None


def test_concave_fit_has_a_bliss_point():
    q = fit_quadratic(PRINTED_POINTS["N"])
    analysis = analyze_utility(q, (0.0, 1.0))
    below, above = analysis.ara_sign_by_interval
    assert below.attitude == "risk_averse"
    assert above.attitude == "risk_loving"
    assert analysis.bliss_point == analysis.vertex_x
    assert analysis.increasing_interval == pytest.approx((0.0, analysis.vertex_x))


def test_vertex_outside_the_domain_gives_one_interval():
    analysis = analyze_utility(QuadraticUtility(-1.0, 4.0, 0.0), (0.0, 1.0))
    assert not analysis.non_monotone
    assert [i.attitude for i in analysis.ara_sign_by_interval] == ["risk_averse"]
    assert analysis.increasing_interval == (0.0, 1.0)


def test_linear_analysis():
    analysis = analyze_utility(QuadraticUtility(0.0, 2.0, 0.1), (0.0, 1.0))
    assert analysis.curvature == LINEAR
    assert analysis.vertex_x is None
    assert analysis.ara_sign_by_interval[0].attitude == "risk_neutral"


def test_empty_domain():
    with pytest.raises(ValidationError):
        analyze_utility(QuadraticUtility(1.0, 0.0, 0.0), (1.0, 0.0))
    with pytest.raises(ValidationError):
        points_domain([])


def test_derivative_vanishes_at_the_vertex():
    rng = np.random.default_rng(31)
    for _ in range(200):
        q = QuadraticUtility(rng.choice([-1, 1]) * rng.uniform(1, 20), rng.uniform(-5, 5), rng.uniform(-1, 1))
        vertex = analyze_utility(q, (-1.0, 1.0)).vertex_x
        assert abs(evaluate_utility(q, vertex)[1]) < 1e-9


def _finite_difference_lambda(q, x, step=FD_STEP):
    """-u''/u' from central differences of u, evaluated in exact arithmetic."""
    a2, a1, a0 = (Fraction(c) for c in q.coefficients)

    def u(t):
        return a2 * t * t + a1 * t + a0

    x = Fraction(x)
    first = (u(x + step) - u(x - step)) / (2 * step)
    second = (u(x + step) - 2 * u(x) + u(x - step)) / (step * step)
    return float(-second / first)


def _random_quadratic(rng, sign=None):
    sign = rng.choice([-1, 1]) if sign is None else sign
    return QuadraticUtility(sign * rng.uniform(1, 20), rng.uniform(-5, 5), rng.uniform(-1, 1))


def test_arrow_pratt_matches_finite_differences():
    rng = np.random.default_rng(32)
    grid = np.linspace(-1.0, 1.0, 41)
    for _ in range(100):
        q = _random_quadratic(rng)
        vertex = -q.a1 / (2 * q.a2)
        for x in grid:
            if abs(x - vertex) < 1e-3:
                continue
            assert abs(ara(q, x) - _finite_difference_lambda(q, x)) < 1e-6


@pytest.mark.parametrize("label", ["D", "N", "U"])
def test_arrow_pratt_of_the_printed_fits_matches_finite_differences(label):
    q = fit_quadratic(PRINTED_POINTS[label])
    vertex = -q.a1 / (2 * q.a2)
    for x in np.linspace(0.0, 1.0, 101):
        if abs(x - vertex) < 1e-3:
            continue
        assert abs(ara(q, x) - _finite_difference_lambda(q, x)) < 1e-6


def test_concave_utility_has_increasing_absolute_risk_aversion():
    q = QuadraticUtility.from_parabolic(0.0, 2.0, 1.0)
    xs = np.linspace(0.0, 0.9, 10)
    values = [ara(q, x) for x in xs]
    assert all(later > earlier for earlier, later in zip(values, values[1:]))
    assert analyze_utility(q, (0.0, 0.9)).iara_flag


def test_random_concave_utilities_have_increasing_absolute_risk_aversion():
    rng = np.random.default_rng(33)
    for _ in range(100):
        q = _random_quadratic(rng, sign=-1)
        vertex = -q.a1 / (2 * q.a2)
        analysis = analyze_utility(q, (vertex - 2.0, vertex + 1.0))
        assert analysis.iara_flag
        lower, upper = analysis.increasing_interval
        assert upper == pytest.approx(analysis.bliss_point)

        values = [ara(q, x) for x in np.linspace(lower, upper - 1e-3, 25)]
        assert all(value > 0 for value in values)
        assert all(later > earlier for earlier, later in zip(values, values[1:]))


def _spread_triple(rng, min_gap):
    while True:
        xs = np.sort(rng.uniform(0.0, 1.0, 3))
        if np.min(np.diff(xs)) >= min_gap:
            return xs


def test_random_three_point_fits_interpolate():
    rng = np.random.default_rng(34)
    for _ in range(200):
        xs = rng.permutation(_spread_triple(rng, 0.05))
        points = assign_utility_indices(xs, SCHEME)
        q = fit_quadratic(points)
        for point in points:
            assert abs(evaluate_utility(q, point.x)[0] - point.u) < 1e-9


def test_curvature_follows_the_spacing_of_the_excess_equities():
    rng = np.random.default_rng(35)
    schemes = [SCHEME, UtilityIndexScheme((0.2, 0.4, 0.6)), UtilityIndexScheme((0.5, 0.7, 0.9))]
    checked = 0
    while checked < 200:
        x1, x2, x3 = _spread_triple(rng, 0.01)
        spacing = (x2 - x1) - (x3 - x2)
        if abs(spacing) < 1e-3:
            continue
        expected = CONVEX if spacing > 0 else CONCAVE
        excess = rng.permutation([x1, x2, x3])
        assert curvature_under_schemes(excess, schemes) == [expected] * len(schemes)
        checked += 1


def test_ranking_does_not_depend_on_the_scheme_or_the_input_order():
    rng = np.random.default_rng(36)
    wide = UtilityIndexScheme.equally_spaced(5)
    skewed = UtilityIndexScheme((0.01, 0.02, 0.5, 0.51, 1.0))
    for _ in range(100):
        excess = rng.uniform(-1.0, 1.0, 5)
        ranks_wide = [wide.indices.index(p.u) for p in assign_utility_indices(excess, wide)]
        ranks_skewed = [skewed.indices.index(p.u) for p in assign_utility_indices(excess, skewed)]
        assert ranks_wide == ranks_skewed
        assert ranks_wide == list(np.argsort(np.argsort(excess, kind="stable"), kind="stable"))

        order = rng.permutation(5)
        shuffled = assign_utility_indices(excess[order], wide)
        paired = {p.x: p.u for p in assign_utility_indices(excess, wide)}
        assert {p.x: p.u for p in shuffled} == paired


def test_spacing_of_indices_can_flip_curvature():
    excess = [0.51, 0.75, 0.79]
    curvatures = curvature_under_schemes(excess, [SCHEME, UtilityIndexScheme((0.1, 0.9, 0.95))])
    assert curvatures == [CONVEX, CONCAVE]


def test_rescaled_indices_keep_curvature():
    excess = [0.22, 0.36, 0.41]
    scaled = UtilityIndexScheme(tuple(round(v / 2, 4) for v in SCHEME.indices))
    assert curvature_under_schemes(excess, [SCHEME, scaled]) == [CONVEX, CONVEX]

    wider = UtilityIndexScheme((0.111, 0.555, 0.999))
    assert curvature_under_schemes([0.51, 0.75, 0.79], [SCHEME, wider]) == [CONVEX, CONVEX]


@pytest.mark.parametrize("contract, loss, wealth", [
    (DeductibleContract(100.0, 10.0, 15.0, 2.0, deductible=5.0), 20.0, 103.0),
    (DeductibleContract(0.0, 0.0, 0.0, 0.0), 0.0, 0.0),
    (DeductibleContract(100.0, 0.0, 0.0, 1.0), 5.0, 94.0),
    (DeductibleContract(100.0, 10.0, 0.0, 2.0, deductible=5.0), 5.0, 103.0),
    (DeductibleContract(100.0, 10.0, 0.0, 2.0, deductible=5.0), 108.0, 0.0),
    (DeductibleContract(100.0, 10.0, 15.0, 1.0, deductible=5.0), 30.0, 94.0),
])
def test_deductible_final_wealth(contract, loss, wealth):
    assert deductible_final_wealth(contract, loss) == pytest.approx(wealth, abs=1e-12)


def test_deductible_cap():
    with pytest.raises(ValidationError):
        DeductibleContract(100.0, 10.0, 0.0, 2.0, deductible=11.0)
    DeductibleContract(100.0, 10.0, 0.0, 2.0, deductible=11.0, cap=20.0)
    with pytest.raises(ValidationError):
        deductible_final_wealth(DeductibleContract(100.0, 10.0, 0.0, 2.0), -1.0)


def main():
    return pytest.main([__file__, "-q"])


if __name__ == "__main__":
    sys.exit(main())
