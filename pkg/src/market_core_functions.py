"""
One-period trinomial market model

Holds the contract economics (spot, strike, rate, horizon), the probability
spaces over {up, neutral, down}, the move magnitudes, and the terminal price
distribution they induce.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.lab_errors import ValidationError

logger = logging.getLogger(__name__)

MOVE_LABELS = ("up", "neutral", "down")

# tolerance on the probability sum
PROBABILITY_TOLERANCE = 1e-12

ROMAN_NUMERALS = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x")


@dataclass(frozen=True)
class MarketParams:
    """
    Contract economics of the put and its underlying.

    Attributes:
        spot(float): purchase price of the underlying (S)
        strike(float): put strike price (X)
        rate(float): per-period risk-free rate (r)
        horizon(float): periods to maturity (T - t)
    """
    spot: float
    strike: float
    rate: float
    horizon: float

    @property
    def discount_factor(self) -> float:
        return math.exp(-self.rate * self.horizon)

    def to_dict(self) -> dict:
        return {
            "spot": self.spot,
            "strike": self.strike,
            "rate": self.rate,
            "horizon": self.horizon,
        }


@dataclass(frozen=True)
class ScenarioSpec:
    """
    A probability space over the three moves.

    Attributes:
        label(str): D, N, U or any user-defined name
        p_up, p_neutral, p_down(float): move probabilities
    """
    label: str
    p_up: float
    p_neutral: float
    p_down: float

    @property
    def probabilities(self) -> Tuple[float, float, float]:
        return (self.p_up, self.p_neutral, self.p_down)

    def to_dict(self) -> dict:
        return {
            "name": self.label,
            "p_up": self.p_up,
            "p_neutral": self.p_neutral,
            "p_down": self.p_down,
        }


@dataclass(frozen=True)
class MoveInstance:
    """
    Move magnitudes for one instance; direction is implied by the move label.

    Attributes:
        up_move(float): size of the up move, (+)dS
        down_move(float): size of the down move, (-)dS
        ordinal(int): 1-based instance index
    """
    up_move: float
    down_move: float
    ordinal: int = 1

    @property
    def roman(self) -> str:
        if 1 <= self.ordinal <= len(ROMAN_NUMERALS):
            return ROMAN_NUMERALS[self.ordinal - 1]
        return str(self.ordinal)

    def to_dict(self) -> dict:
        return {
            "ordinal": self.ordinal,
            "up_move": self.up_move,
            "down_move": self.down_move,
        }


@dataclass(frozen=True)
class Outcome:
    move_label: str
    terminal_price: float
    probability: float


@dataclass(frozen=True)
class OutcomeDistribution:
    """Three terminal outcomes, ordered up, neutral, down."""
    outcomes: Tuple[Outcome, Outcome, Outcome]

    @property
    def prices(self) -> np.ndarray:
        return np.array([o.terminal_price for o in self.outcomes])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([o.probability for o in self.outcomes])

    def outcome(self, move_label: str) -> Outcome:
        return self.outcomes[MOVE_LABELS.index(move_label)]


# hypothetical market and event spaces of the printed study
PAPER_MARKET = MarketParams(spot=50.0, strike=55.0, rate=0.05, horizon=1.0)

PAPER_SCENARIOS = (
    ScenarioSpec("D", 0.1, 0.3, 0.6),
    ScenarioSpec("N", 0.2, 0.6, 0.2),
    ScenarioSpec("U", 0.6, 0.3, 0.1),
)

PAPER_INSTANCES = (
    MoveInstance(up_move=15.0, down_move=5.0, ordinal=1),
    MoveInstance(up_move=30.0, down_move=5.0, ordinal=2),
    MoveInstance(up_move=60.0, down_move=5.0, ordinal=3),
)


def _require_finite(value: float, name: str, owner: str):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ValidationError(f"{owner}: {name} must be a finite number, got {value!r}")


def validate_market(candidate: MarketParams) -> MarketParams:
    """
    Checks the market invariants and returns the value unchanged

    Parameters:
        candidate(MarketParams):
            the market to validate

    Returns:
        candidate(MarketParams):
            the same object when every invariant holds

    Raises:
        ValidationError: naming the first violated invariant
    """
    owner = "market"
    for name in ("spot", "strike", "rate", "horizon"):
        _require_finite(getattr(candidate, name), name, owner)

    if candidate.spot <= 0:
        raise ValidationError(f"{owner}: spot must be > 0, got {candidate.spot}")
    if candidate.strike < 0:
        raise ValidationError(f"{owner}: strike must be >= 0, got {candidate.strike}")
    if candidate.rate < 0:
        raise ValidationError(f"{owner}: rate must be >= 0, got {candidate.rate}")
    if candidate.horizon <= 0:
        raise ValidationError(f"{owner}: horizon must be > 0, got {candidate.horizon}")

    discount = candidate.discount_factor
    if not (0 < discount <= 1):
        raise ValidationError(f"{owner}: discount factor {discount} outside (0, 1]")
    return candidate


def validate_scenario(candidate: ScenarioSpec) -> ScenarioSpec:
    """
    Checks that the scenario probabilities form a distribution

    Raises:
        ValidationError: a probability outside [0, 1] or a sum off 1 by more than 1e-12
    """
    owner = f"scenario '{candidate.label}'"
    for name in ("p_up", "p_neutral", "p_down"):
        value = getattr(candidate, name)
        _require_finite(value, name, owner)
        if value < 0 or value > 1:
            raise ValidationError(f"{owner}: {name} must lie in [0, 1], got {value}")

    total = candidate.p_up + candidate.p_neutral + candidate.p_down
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise ValidationError(f"{owner}: probabilities sum to {total!r}, expected 1")
    return candidate


def validate_instance(candidate: MoveInstance, params: Optional[MarketParams] = None) -> MoveInstance:
    """
    Checks the move magnitudes; with params, the down move must keep the price positive
    """
    owner = f"instance {candidate.ordinal}"
    _require_finite(candidate.up_move, "up_move", owner)
    _require_finite(candidate.down_move, "down_move", owner)

    if candidate.up_move <= 0:
        raise ValidationError(f"{owner}: up_move must be > 0, got {candidate.up_move}")
    if candidate.down_move < 0:
        raise ValidationError(f"{owner}: down_move must be >= 0, got {candidate.down_move}")
    if params is not None and candidate.down_move >= params.spot:
        raise ValidationError(
            f"{owner}: down_move {candidate.down_move} must be below spot {params.spot}"
        )
    return candidate


def terminal_distribution(params: MarketParams,
                          scenario: ScenarioSpec,
                          instance: MoveInstance) -> OutcomeDistribution:
    """
    Builds the terminal price distribution of the one-step tree

    Returns:
        distribution(OutcomeDistribution):
            outcomes in the order
            [
                (up, S + up_move, p_up),
                (neutral, S, p_neutral),
                (down, S - down_move, p_down),
            ]
    """
    validate_market(params)
    validate_scenario(scenario)
    validate_instance(instance, params)

    spot = params.spot
    return OutcomeDistribution(outcomes=(
        Outcome("up", spot + instance.up_move, scenario.p_up),
        Outcome("neutral", spot, scenario.p_neutral),
        Outcome("down", spot - instance.down_move, scenario.p_down),
    ))


def expected_terminal_price(params: MarketParams,
                            scenario: ScenarioSpec,
                            instance: MoveInstance) -> float:
    distribution = terminal_distribution(params, scenario, instance)
    return float(np.dot(distribution.probabilities, distribution.prices))
