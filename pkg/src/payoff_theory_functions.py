"""
Vanilla payoffs and the modified expected position values of a call or put buyer

The put premium is always derived from the call premium C through parity,
P = C + X e^(-r tau) - S, exactly as the preference-ordering derivation does.
"""
import logging
from dataclasses import dataclass

from src.lab_errors import PreconditionError, ValidationError
from src.market_core_functions import (
    MarketParams,
    ScenarioSpec,
    validate_market,
    validate_scenario,
)
from src.pricing_functions import PUT_FROM_CALL, parity_transform

logger = logging.getLogger(__name__)

CALL = "call"
PUT = "put"
POSITION_KINDS = (CALL, PUT)

# p_up and p_down closer than this count as equal (neutral space)
NEUTRAL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PositionSpec:
    """
    Attributes:
        kind(str): 'call' or 'put'
        premium(float): the call premium C; for puts P is derived from it
        symmetric_move(float): ds, used for both the up and the down move
    """
    kind: str
    premium: float
    symmetric_move: float


@dataclass(frozen=True)
class PositionExpectation:
    """
    Attributes:
        pre_floor(float): E_X(.) before the outer Max
        floored(float): max(pre_floor, loss_bound)
        loss_bound(float): -C for calls, -P for puts
        negative_premium(bool): parity produced P < 0
    """
    pre_floor: float
    floored: float
    loss_bound: float
    negative_premium: bool = False


@dataclass(frozen=True)
class OrderingReport:
    """Six pre-floor expectations plus the strict/weak ordering flags."""
    call_pre_floor: dict
    put_pre_floor: dict
    call_floored: dict
    put_floored: dict
    calls_strictly_ordered: bool
    puts_strictly_ordered: bool
    calls_floored_weakly_ordered: bool
    puts_floored_weakly_ordered: bool
    negative_premium_warning: bool

    def to_dict(self) -> dict:
        return {
            "call_pre_floor": dict(self.call_pre_floor),
            "put_pre_floor": dict(self.put_pre_floor),
            "call_floored": dict(self.call_floored),
            "put_floored": dict(self.put_floored),
            "calls_strictly_ordered": self.calls_strictly_ordered,
            "puts_strictly_ordered": self.puts_strictly_ordered,
            "calls_floored_weakly_ordered": self.calls_floored_weakly_ordered,
            "puts_floored_weakly_ordered": self.puts_floored_weakly_ordered,
            "negative_premium_warning": self.negative_premium_warning,
        }


def _check_kind(kind: str):
    if kind not in POSITION_KINDS:
        raise ValidationError(f"position kind must be one of {POSITION_KINDS}, got {kind!r}")


def vanilla_payoff(kind: str, terminal_price: float, strike: float) -> float:
    """
    Payoff at maturity of a plain vanilla European option

    call -> max(S_T - X, 0)
    put  -> max(X - S_T, 0)
    """
    _check_kind(kind)
    if terminal_price < 0 or strike < 0:
        raise ValidationError(
            f"terminal price and strike must be >= 0, got {terminal_price} and {strike}"
        )
    if kind == CALL:
        return max(terminal_price - strike, 0.0)
    return max(strike - terminal_price, 0.0)


def validate_position(position: PositionSpec) -> PositionSpec:
    _check_kind(position.kind)
    if position.premium < 0:
        raise ValidationError(f"premium C must be >= 0, got {position.premium}")
    if position.symmetric_move <= 0:
        raise ValidationError(f"symmetric move must be > 0, got {position.symmetric_move}")
    return position


def position_expectation(kind: str,
                         params: MarketParams,
                         scenario: ScenarioSpec,
                         position: PositionSpec,
                         allow_negative_premium: bool = True) -> PositionExpectation:
    """
    Modified expected value of a long call or long put under one probability space

    Parameters:
        kind(str):
            'call' or 'put'
        params(MarketParams):
            S, X, r and tau
        scenario(ScenarioSpec):
            the probability space; only p_up - p_down matters
        position(PositionSpec):
            call premium C and symmetric move ds
        allow_negative_premium(bool):
            when False a parity-derived P < 0 is rejected

    Returns:
        expectation(PositionExpectation):
            call: pre_floor = S + e^(-r tau) ds (p_up - p_down) - X e^(-r tau) - C, bound -C
            put:  pre_floor = -e^(-r tau) ds (p_up - p_down) - C, bound -P
    """
    _check_kind(kind)
    validate_market(params)
    validate_scenario(scenario)
    validate_position(position)

    discount = params.discount_factor
    premium = position.premium
    tilt = discount * position.symmetric_move * (scenario.p_up - scenario.p_down)

    if kind == CALL:
        pre_floor = params.spot + tilt - params.strike * discount - premium
        loss_bound = -premium
        return PositionExpectation(pre_floor, max(pre_floor, loss_bound), loss_bound)

    put_premium = parity_transform(PUT_FROM_CALL, premium, params)
    negative = put_premium < 0
    if negative:
        if not allow_negative_premium:
            raise ValidationError(
                f"parity-derived put premium is negative ({put_premium:.6f}); "
                "spot exceeds C + X e^(-r tau)"
            )
        logger.warning("parity-derived put premium %.6f is negative", put_premium)

    pre_floor = -tilt - premium
    loss_bound = -put_premium
    return PositionExpectation(pre_floor, max(pre_floor, loss_bound), loss_bound, negative)


def _check_orderings(up_scenario: ScenarioSpec,
                     neutral_scenario: ScenarioSpec,
                     down_scenario: ScenarioSpec):
    if not up_scenario.p_up > up_scenario.p_down:
        raise PreconditionError(
            f"scenario '{up_scenario.label}' must have p_up > p_down to act as the up space"
        )
    if abs(neutral_scenario.p_up - neutral_scenario.p_down) > NEUTRAL_TOLERANCE:
        raise PreconditionError(
            f"scenario '{neutral_scenario.label}' must have p_up = p_down to act as the neutral space"
        )
    if not down_scenario.p_down > down_scenario.p_up:
        raise PreconditionError(
            f"scenario '{down_scenario.label}' must have p_down > p_up to act as the down space"
        )


def verify_preference_ordering(params: MarketParams,
                               position: PositionSpec,
                               up_scenario: ScenarioSpec,
                               neutral_scenario: ScenarioSpec,
                               down_scenario: ScenarioSpec) -> OrderingReport:
    """
    Evaluates call and put expectations in the U, N and D spaces and checks

        calls: E_D < E_N < E_U
        puts:  E_U < E_N < E_D

    strictly on the pre-floor values and weakly on the floored values, since
    distinct spaces can tie at the loss bound after the outer Max.
    """
    _check_orderings(up_scenario, neutral_scenario, down_scenario)

    spaces = {"U": up_scenario, "N": neutral_scenario, "D": down_scenario}
    calls = {}
    puts = {}
    for key, scenario in spaces.items():
        calls[key] = position_expectation(CALL, params, scenario, PositionSpec(CALL, position.premium, position.symmetric_move))
        puts[key] = position_expectation(PUT, params, scenario, PositionSpec(PUT, position.premium, position.symmetric_move))

    call_pre = {key: value.pre_floor for key, value in calls.items()}
    put_pre = {key: value.pre_floor for key, value in puts.items()}
    call_floored = {key: value.floored for key, value in calls.items()}
    put_floored = {key: value.floored for key, value in puts.items()}

    return OrderingReport(
        call_pre_floor=call_pre,
        put_pre_floor=put_pre,
        call_floored=call_floored,
        put_floored=put_floored,
        calls_strictly_ordered=call_pre["D"] < call_pre["N"] < call_pre["U"],
        puts_strictly_ordered=put_pre["U"] < put_pre["N"] < put_pre["D"],
        calls_floored_weakly_ordered=call_floored["D"] <= call_floored["N"] <= call_floored["U"],
        puts_floored_weakly_ordered=put_floored["U"] <= put_floored["N"] <= put_floored["D"],
        negative_premium_warning=any(value.negative_premium for value in puts.values()),
    )
