"""
Tests for put valuation
Monte Carlo determinism and convergence, the enumeration oracle, and parity
"""

import math
import sys

import numpy as np
import pytest

from src.lab_errors import ValidationError
from src.market_core_functions import (
    PAPER_INSTANCES,
    PAPER_MARKET,
    PAPER_SCENARIOS,
    MarketParams,
    MoveInstance,
    ScenarioSpec,
    terminal_distribution,
)
from src.pricing_functions import (
    BLOCK_SIZE,
    CALL_FROM_PUT,
    PUT_FROM_CALL,
    analytic_values,
    cell_seed,
    consistency_band,
    draw_move,
    draw_moves,
    mc_estimate,
    parity_transform,
    replication_uniforms,
)

D, N, U = PAPER_SCENARIOS
I, II, III = PAPER_INSTANCES
DISCOUNT = math.exp(-0.05)


@pytest.mark.parametrize("u, move", [
    (0.05, "up"),
    (0.1, "neutral"),
    (0.25, "neutral"),
    (0.45, "down"),
    (0.95, "down"),
    (1.0, "down"),
    (0.0, "up"),
])
def test_draw_move_bands(u, move):
    assert draw_move(D, u) == move


def test_draw_move_rejects_out_of_range_deviates():
    with pytest.raises(ValidationError):
        draw_move(D, -0.1)
    with pytest.raises(ValidationError):
        draw_move(D, 1.5)


def test_vectorised_draws_agree_with_draw_move():
    grid = np.linspace(0.0, 1.0, 1001)
    labels = ["up", "neutral", "down"]
    for scenario in PAPER_SCENARIOS:
        indices = draw_moves(scenario, grid)
        assert [labels[k] for k in indices] == [draw_move(scenario, u) for u in grid]


@pytest.mark.parametrize("scenario, put_price, expected_asset", [
    (D, 7.1342, 48.50),
    (N, 4.7561, 52.00),
    (U, 2.3781, 58.50),
])
def test_oracle_prices_for_instance_i(scenario, put_price, expected_asset):
    oracle = analytic_values(PAPER_MARKET, scenario, I)
    assert oracle.put_price == pytest.approx(put_price, abs=1e-4)
    assert oracle.expected_asset == pytest.approx(expected_asset, abs=1e-12)
    assert oracle.put_price == pytest.approx(DISCOUNT * oracle.expected_put_payoff_undiscounted, abs=1e-12)


def test_scenario_d_put_price_does_not_depend_on_the_up_move():
    for instance in PAPER_INSTANCES:
        assert analytic_values(PAPER_MARKET, D, instance).put_price == pytest.approx(7.5 * DISCOUNT, abs=1e-12)


def test_zero_strike_put_is_worthless():
    params = MarketParams(50, 0, 0.05, 1)
    for scenario in PAPER_SCENARIOS:
        assert analytic_values(params, scenario, I).put_price == 0.0


def test_oracle_put_minus_call_is_the_discounted_expected_intrinsic_value():
    rng = np.random.default_rng(5)
    for _ in range(200):
        spot = rng.uniform(10, 100)
        params = MarketParams(spot, rng.uniform(0, 150), rng.uniform(0, 0.2), rng.uniform(0.1, 3))
        p_up, p_neutral, p_down = rng.dirichlet([1, 1, 1])
        scenario = ScenarioSpec("rand", p_up, p_neutral, 1.0 - p_up - p_neutral)
        instance = MoveInstance(rng.uniform(0.1, 50), rng.uniform(0, spot * 0.9))

        oracle = analytic_values(params, scenario, instance)
        distribution = terminal_distribution(params, scenario, instance)
        intrinsic = params.discount_factor * np.dot(distribution.probabilities, params.strike - distribution.prices)
        assert oracle.put_price - oracle.call_price == pytest.approx(intrinsic, abs=1e-12 * max(1.0, params.strike))


def test_deep_in_the_money_put_pays_on_every_branch():
    params = MarketParams(50, 120, 0.05, 1)
    oracle = analytic_values(params, U, I)
    assert oracle.put_price == pytest.approx(params.discount_factor * (120 - oracle.expected_asset), abs=1e-12)


def test_degenerate_scenario_has_zero_variance():
    flat = ScenarioSpec("flat", 0.0, 1.0, 0.0)
    for seed in (0, 1, 2 ** 63):
        estimate = mc_estimate(PAPER_MARKET, flat, II, replications=250, seed=seed)
        assert estimate.put_price_mean == pytest.approx(5 * DISCOUNT, abs=1e-12)
        assert estimate.put_price_variance == 0.0
        assert estimate.asset_value_mean == 50.0
        assert estimate.asset_value_variance == 0.0


def test_single_replication_reports_zero_variance():
    estimate = mc_estimate(PAPER_MARKET, D, I, replications=1, seed=3)
    assert estimate.put_price_variance == 0.0
    assert estimate.asset_value_variance == 0.0
    assert estimate.replications == 1


def test_monte_carlo_is_deterministic_for_a_seed():
    first = mc_estimate(PAPER_MARKET, N, III, replications=100, seed=42)
    second = mc_estimate(PAPER_MARKET, N, III, replications=100, seed=42)
    assert first == second
    assert mc_estimate(PAPER_MARKET, N, III, replications=100, seed=43) != first


def test_worker_count_does_not_change_the_estimate():
    replications = 2 * BLOCK_SIZE + 123
    serial = mc_estimate(PAPER_MARKET, D, II, replications=replications, seed=9, workers=1)
    parallel = mc_estimate(PAPER_MARKET, D, II, replications=replications, seed=9, workers=4)
    assert serial == parallel


def test_uniform_stream_slices_are_reproducible():
    whole = replication_uniforms(17, 0, BLOCK_SIZE + 500)
    middle = replication_uniforms(17, BLOCK_SIZE - 10, BLOCK_SIZE + 10)
    assert np.array_equal(whole[BLOCK_SIZE - 10:BLOCK_SIZE + 10], middle)
    assert np.all((whole >= 0) & (whole < 1))


def test_paper_sample_size_is_consistent_with_the_printed_put_price():
    estimate = mc_estimate(PAPER_MARKET, D, I, replications=100, seed=0)
    assert abs(estimate.put_price_mean - 7.1342) <= 3 * math.sqrt(11.63 / 100)


def test_convergence_within_four_standard_errors():
    replications = 10_000
    for scenario in PAPER_SCENARIOS:
        oracle = analytic_values(PAPER_MARKET, scenario, I)
        bound = 4 * math.sqrt(oracle.put_price_variance / replications)
        for seed in range(20):
            estimate = mc_estimate(PAPER_MARKET, scenario, I, replications=replications, seed=seed)
            assert abs(estimate.put_price_mean - oracle.put_price) < bound


def test_large_samples_approach_the_oracle_in_every_cell():
    for scenario_index, scenario in enumerate(PAPER_SCENARIOS):
        for instance_index, instance in enumerate(PAPER_INSTANCES):
            oracle = analytic_values(PAPER_MARKET, scenario, instance)
            estimate = mc_estimate(PAPER_MARKET, scenario, instance, replications=100_000,
                                   seed=cell_seed(0, scenario_index, instance_index))
            assert abs(estimate.put_price_mean - oracle.put_price) < 0.05


def test_million_replications_of_scenario_u():
    estimate = mc_estimate(PAPER_MARKET, U, I, replications=1_000_000, seed=1, workers=2)
    assert abs(estimate.put_price_mean - 2.3781) < 0.02


def test_invalid_simulation_arguments():
    with pytest.raises(ValidationError):
        mc_estimate(PAPER_MARKET, D, I, replications=0)
    with pytest.raises(ValidationError):
        mc_estimate(PAPER_MARKET, D, I, seed=-1)
    with pytest.raises(ValidationError):
        mc_estimate(PAPER_MARKET, D, I, seed=True)
    with pytest.raises(ValidationError):
        mc_estimate(PAPER_MARKET, D, I, workers=0)


def test_parity_transform():
    put = parity_transform(PUT_FROM_CALL, 1.0, PAPER_MARKET)
    assert put == pytest.approx(3.3176, abs=1e-4)
    assert parity_transform(CALL_FROM_PUT, put, PAPER_MARKET) == pytest.approx(1.0, abs=1e-12)

    symmetric = MarketParams(55 * DISCOUNT, 55, 0.05, 1)
    assert parity_transform(PUT_FROM_CALL, 0.0, symmetric) == pytest.approx(0.0, abs=1e-12)


def test_parity_round_trip_on_random_inputs():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        params = MarketParams(rng.uniform(1, 200), rng.uniform(0, 300), rng.uniform(0, 0.2), rng.uniform(0.1, 5))
        price = rng.uniform(0, 50)
        there = parity_transform(PUT_FROM_CALL, price, params)
        if there >= 0:
            assert parity_transform(CALL_FROM_PUT, there, params) == pytest.approx(price, abs=1e-12 * 300)


def test_parity_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        parity_transform(PUT_FROM_CALL, -1.0, PAPER_MARKET)
    with pytest.raises(ValidationError):
        parity_transform("sideways", 1.0, PAPER_MARKET)


def test_cell_seeds_are_distinct_and_stable():
    seeds = {cell_seed(0, s, i) for s in range(3) for i in range(3)}
    assert len(seeds) == 9
    assert cell_seed(5, 1, 2) == cell_seed(5, 1, 2)


def test_consistency_band():
    assert consistency_band(11.63) == pytest.approx(1.0231, abs=1e-4)
    with pytest.raises(ValidationError):
        consistency_band(-1.0)


def main():
    return pytest.main([__file__, "-q"])


if __name__ == "__main__":
    sys.exit(main())
