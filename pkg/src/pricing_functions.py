"""
Put (and call) valuation on the one-step trinomial tree

Monte Carlo estimates use a counter-keyed uniform stream so that the result
depends only on (inputs, seed, replications), never on how the replications
were split across workers. analytic_values enumerates the three outcomes
exactly and is the oracle for the simulated quantities.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from src.lab_errors import ValidationError
from src.market_core_functions import (
    MarketParams,
    MoveInstance,
    ScenarioSpec,
    terminal_distribution,
)

logger = logging.getLogger(__name__)

# replications per cell in the printed study
DEFAULT_REPLICATIONS = 100

# replications per counter block; fixed so block boundaries never depend on workers
BLOCK_SIZE = 1 << 16

MAX_SEED = (1 << 64) - 1

CALL_FROM_PUT = "call_from_put"
PUT_FROM_CALL = "put_from_call"


@dataclass(frozen=True)
class SimulationEstimate:
    """
    Sample statistics of one Monte Carlo run.

    Attributes:
        put_price_mean(float): mean of the discounted put payoffs
        put_price_variance(float): unbiased variance of the discounted put payoffs
        asset_value_mean(float): mean of the (undiscounted) terminal prices
        asset_value_variance(float): unbiased variance of the terminal prices
        replications(int): sample size
        seed(int): 64-bit seed of the uniform stream
    """
    put_price_mean: float
    put_price_variance: float
    asset_value_mean: float
    asset_value_variance: float
    replications: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "put_price_mean": self.put_price_mean,
            "put_price_variance": self.put_price_variance,
            "asset_value_mean": self.asset_value_mean,
            "asset_value_variance": self.asset_value_variance,
            "replications": self.replications,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class OracleValues:
    """Exact enumeration counterparts of the simulated quantities."""
    put_price: float
    call_price: float
    expected_asset: float
    expected_put_payoff_undiscounted: float
    put_price_variance: float
    asset_variance: float

    def to_dict(self) -> dict:
        return {
            "put_price": self.put_price,
            "call_price": self.call_price,
            "expected_asset": self.expected_asset,
            "expected_put_payoff_undiscounted": self.expected_put_payoff_undiscounted,
            "put_price_variance": self.put_price_variance,
            "asset_variance": self.asset_variance,
        }


def draw_move(scenario: ScenarioSpec, u: float) -> str:
    """
    Maps a unit-interval deviate onto a move by inverting the scenario CDF

    Bands are half-open: up on [0, p_up), neutral on [p_up, p_up + p_neutral),
    down on the rest, with the last band closed at 1.

    Raises:
        ValidationError: u outside [0, 1]
    """
    if not (0.0 <= u <= 1.0):
        raise ValidationError(f"deviate must lie in [0, 1], got {u}")
    if u < scenario.p_up:
        return "up"
    if u < scenario.p_up + scenario.p_neutral:
        return "neutral"
    return "down"


def draw_moves(scenario: ScenarioSpec, uniforms: np.ndarray) -> np.ndarray:
    """
    Vectorised draw_move

    Returns:
        move_indices(np.ndarray):
            integer array, 0=up, 1=neutral, 2=down (indices into MOVE_LABELS)
    """
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.size and (uniforms.min() < 0.0 or uniforms.max() > 1.0):
        raise ValidationError("deviates must lie in [0, 1]")
    edges = np.array([scenario.p_up, scenario.p_up + scenario.p_neutral])
    return np.searchsorted(edges, uniforms, side="right")


def _validate_seed(seed: int):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not (0 <= int(seed) <= MAX_SEED):
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


def _block_generator(seed: int, block: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(sequence))


def _block_uniforms(seed: int, block: int, count: int) -> np.ndarray:
    return _block_generator(seed, block).random(count)


def replication_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """
    Returns the uniform deviates of replications [start, stop)

    Replication k is the (k mod BLOCK_SIZE)-th draw of block k // BLOCK_SIZE,
    and each block is keyed by (seed, block) only.
    """
    _validate_seed(seed)
    if start < 0 or stop < start:
        raise ValidationError(f"invalid replication range [{start}, {stop})")

    pieces = []
    position = start
    while position < stop:
        block = position // BLOCK_SIZE
        block_start = block * BLOCK_SIZE
        offset = position - block_start
        take = min(stop, block_start + BLOCK_SIZE) - position
        pieces.append(_block_uniforms(seed, block, offset + take)[offset:])
        position += take

    if not pieces:
        return np.empty(0)
    return np.concatenate(pieces)


def _sample_uniforms(seed: int, replications: int, workers: int) -> np.ndarray:
    n_blocks = (replications + BLOCK_SIZE - 1) // BLOCK_SIZE
    sizes = [min(BLOCK_SIZE, replications - b * BLOCK_SIZE) for b in range(n_blocks)]

    if workers <= 1 or n_blocks == 1:
        blocks = [_block_uniforms(seed, b, size) for b, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map keeps block order
            blocks = list(pool.map(lambda item: _block_uniforms(seed, item[0], item[1]),
                                   enumerate(sizes)))
    return np.concatenate(blocks)


def _shifted_stats(samples: np.ndarray):
    """Mean and unbiased variance computed around the first sample."""
    if samples.size == 1:
        return float(samples[0]), 0.0
    shift = samples[0]
    centred = samples - shift
    mean = float(shift + centred.mean())
    variance = float(centred.var(ddof=1))
    return mean, variance


def mc_estimate(params: MarketParams,
                scenario: ScenarioSpec,
                instance: MoveInstance,
                replications: int = DEFAULT_REPLICATIONS,
                seed: int = 0,
                workers: int = 1) -> SimulationEstimate:
    """
    Monte Carlo valuation of the put by sampling the trinomial terminal price

    Parameters:
        params, scenario, instance:
            the market cell to value
        replications(int):
            sample size n >= 1
        seed(int):
            unsigned 64-bit seed of the counter-keyed stream
        workers(int):
            number of threads generating blocks; does not change the result

    Returns:
        estimate(SimulationEstimate):
            means and (n-1)-denominator variances of the discounted put payoffs
            and of the undiscounted terminal prices
    """
    if isinstance(replications, bool) or not isinstance(replications, (int, np.integer)) or replications < 1:
        raise ValidationError(f"replications must be a positive integer, got {replications!r}")
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers}")
    _validate_seed(seed)

    distribution = terminal_distribution(params, scenario, instance)
    prices = distribution.prices
    discounted_payoffs = params.discount_factor * np.maximum(params.strike - prices, 0.0)

    uniforms = _sample_uniforms(seed, int(replications), workers)
    moves = draw_moves(scenario, uniforms)

    put_mean, put_variance = _shifted_stats(discounted_payoffs[moves])
    asset_mean, asset_variance = _shifted_stats(prices[moves])

    logger.info(
        "mc_estimate %s/%s n=%d seed=%d put=%.4f",
        scenario.label, instance.roman, replications, seed, put_mean,
    )
    return SimulationEstimate(
        put_price_mean=put_mean,
        put_price_variance=put_variance,
        asset_value_mean=asset_mean,
        asset_value_variance=asset_variance,
        replications=int(replications),
        seed=int(seed),
    )


def analytic_values(params: MarketParams,
                    scenario: ScenarioSpec,
                    instance: MoveInstance) -> OracleValues:
    """
    Exact three-outcome enumeration of the put, the call and the terminal asset
    """
    distribution = terminal_distribution(params, scenario, instance)
    probabilities = distribution.probabilities
    prices = distribution.prices
    discount = params.discount_factor

    put_payoffs = np.maximum(params.strike - prices, 0.0)
    call_payoffs = np.maximum(prices - params.strike, 0.0)

    expected_put = float(np.dot(probabilities, put_payoffs))
    expected_call = float(np.dot(probabilities, call_payoffs))
    expected_asset = float(np.dot(probabilities, prices))

    discounted = discount * put_payoffs
    put_variance = float(np.dot(probabilities, (discounted - discount * expected_put) ** 2))
    asset_variance = float(np.dot(probabilities, (prices - expected_asset) ** 2))

    return OracleValues(
        put_price=discount * expected_put,
        call_price=discount * expected_call,
        expected_asset=expected_asset,
        expected_put_payoff_undiscounted=expected_put,
        put_price_variance=put_variance,
        asset_variance=asset_variance,
    )


def parity_transform(direction: str, price: float, params: MarketParams) -> float:
    """
    Put-call parity as a formula transform, P = C + X e^(-r tau) - S

    Negative results are returned as they are; nothing here asserts
    absence of arbitrage.
    """
    if price < 0:
        raise ValidationError(f"option price must be >= 0, got {price}")
    discounted_strike = params.strike * params.discount_factor

    if direction == PUT_FROM_CALL:
        return price + discounted_strike - params.spot
    if direction == CALL_FROM_PUT:
        return price - discounted_strike + params.spot
    raise ValidationError(
        f"direction must be '{CALL_FROM_PUT}' or '{PUT_FROM_CALL}', got {direction!r}"
    )


def cell_seed(seed: int, scenario_index: int, instance_index: int) -> int:
    """
    Derives an independent 64-bit seed for one (scenario, instance) cell
    """
    _validate_seed(seed)
    sequence = np.random.SeedSequence(entropy=int(seed),
                                      spawn_key=(int(scenario_index), int(instance_index)))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def consistency_band(printed_variance: float,
                     replications: int = DEFAULT_REPLICATIONS,
                     width: float = 3.0) -> float:
    """Half-width of a `width` standard-error band around a sample mean."""
    if printed_variance < 0:
        raise ValidationError(f"variance must be >= 0, got {printed_variance}")
    return width * math.sqrt(printed_variance / replications)
