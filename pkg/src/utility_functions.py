"""
Rank-based utility indices, quadratic utility fitting and Arrow-Pratt analysis

u(x) = a2 x^2 + a1 x + a0 over expected excess equity x. The general parabolic
form a + bx - cx^2 maps onto it as a0 = a, a1 = b, a2 = -c.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.lab_errors import StationaryPointError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_INDEX_SCHEME = (0.333, 0.666, 0.999)

# |a2| at or below this is treated as a straight line
LINEAR_TOLERANCE = 1e-9

# |u'(x)| below this makes lambda undefined
STATIONARY_TOLERANCE = 1e-12

# x values closer than this (scaled by max(1, max|x|)) are duplicates
DUPLICATE_X_TOLERANCE = 1e-9

CONVEX = "convex"
CONCAVE = "concave"
LINEAR = "linear"


@dataclass(frozen=True)
class UtilityIndexScheme:
    """Strictly increasing utility indices in (0, 1], one per ranked instance."""
    indices: Tuple[float, ...] = DEFAULT_INDEX_SCHEME

    def __post_init__(self):
        values = tuple(float(v) for v in self.indices)
        object.__setattr__(self, "indices", values)
        if not values:
            raise ValidationError("utility index scheme must not be empty")
        for value in values:
            if not (0 < value <= 1):
                raise ValidationError(f"utility index {value} outside (0, 1]")
        for lower, upper in zip(values, values[1:]):
            if not lower < upper:
                raise ValidationError(f"utility indices must be strictly increasing: {values}")

    def __len__(self):
        return len(self.indices)

    @classmethod
    def equally_spaced(cls, count: int, top: float = 0.999) -> "UtilityIndexScheme":
        """index_k = round(top * k / count, 3); (0.333, 0.666, 0.999) for three."""
        if count < 1:
            raise ValidationError(f"scheme needs at least one index, got {count}")
        return cls(tuple(round(top * k / count, 3) for k in range(1, count + 1)))


@dataclass(frozen=True)
class UtilityPoint:
    x: float
    u: float

    def __post_init__(self):
        if not (0 < self.u <= 1):
            raise ValidationError(f"utility value {self.u} outside (0, 1]")


@dataclass(frozen=True)
class QuadraticUtility:
    a2: float
    a1: float
    a0: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.a2, self.a1, self.a0])):
            raise ValidationError(f"quadratic coefficients must be finite: {self}")

    @classmethod
    def from_parabolic(cls, a: float, b: float, c: float) -> "QuadraticUtility":
        """u(x) = a + bx - cx^2"""
        return cls(a2=-c, a1=b, a0=a)

    def as_parabolic(self) -> Tuple[float, float, float]:
        return (self.a0, self.a1, -self.a2)

    @property
    def coefficients(self) -> Tuple[float, float, float]:
        return (self.a2, self.a1, self.a0)

    def to_dict(self) -> dict:
        return {"a2": self.a2, "a1": self.a1, "a0": self.a0}


@dataclass(frozen=True)
class SignInterval:
    """Sign of lambda on one side of the vertex."""
    lower: float
    upper: float
    sign: str

    @property
    def attitude(self) -> str:
        return _ATTITUDE_BY_SIGN[self.sign]

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "sign": self.sign, "attitude": self.attitude}


@dataclass(frozen=True)
class UtilityAnalysis:
    """
    Attributes:
        curvature(str): convex, concave or linear
        vertex_x(float|None): stationary point -a1 / (2 a2), None when linear
        increasing_interval(tuple|None): part of the domain where u' > 0
        ara_sign_by_interval(list): SignInterval entries covering the domain
        bliss_point(float|None): the vertex for a concave u, b / 2c
        iara_flag(bool): True for concave u
        non_monotone(bool): the vertex lies strictly inside the domain
        domain(tuple): the interval analysed
    """
    curvature: str
    vertex_x: Optional[float]
    increasing_interval: Optional[Tuple[float, float]]
    ara_sign_by_interval: List[SignInterval] = field(default_factory=list)
    bliss_point: Optional[float] = None
    iara_flag: bool = False
    non_monotone: bool = False
    domain: Tuple[float, float] = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {
            "curvature": self.curvature,
            "vertex_x": self.vertex_x,
            "increasing_interval": list(self.increasing_interval) if self.increasing_interval else None,
            "ara_sign_by_interval": [interval.to_dict() for interval in self.ara_sign_by_interval],
            "bliss_point": self.bliss_point,
            "iara_flag": self.iara_flag,
            "non_monotone": self.non_monotone,
            "domain": list(self.domain),
        }


@dataclass(frozen=True)
class DeductibleContract:
    """
    Deductible insurance on a non-financial asset.

    Attributes:
        initial_wealth(float): Z_0
        income(float): M
        indemnification(float): I(x), already evaluated at the loss
        cost(float): C(D)
        deductible(float): D, with 0 <= D <= cap
        cap(float|None): upper bound of D; the income M when None
    """
    initial_wealth: float
    income: float
    indemnification: float
    cost: float
    deductible: float = 0.0
    cap: Optional[float] = None

    def __post_init__(self):
        cap = self.income if self.cap is None else self.cap
        if not (0 <= self.deductible <= cap):
            raise ValidationError(f"deductible {self.deductible} must satisfy 0 <= D <= {cap}")


_ATTITUDE_BY_SIGN = {
    "positive": "risk_averse",
    "zero": "risk_neutral",
    "negative": "risk_loving",
    "undefined": "undefined",
}


def assign_utility_indices(excess: Sequence[float], scheme: UtilityIndexScheme) -> List[UtilityPoint]:
    """
    Gives the k-th smallest excess equity the k-th smallest utility index

    Parameters:
        excess(Sequence[float]):
            expected excess equity per instance, in instance order
        scheme(UtilityIndexScheme):
            increasing indices, same length as excess

    Returns:
        points(List[UtilityPoint]):
            one point per instance, still in instance order; ties keep input order
    """
    values = np.asarray(excess, dtype=float)
    if values.size != len(scheme):
        raise ValidationError(
            f"{values.size} excess values cannot be ranked on a scheme of length {len(scheme)}"
        )

    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=int)
    ranks[order] = np.arange(values.size)
    return [UtilityPoint(x=float(x), u=scheme.indices[rank]) for x, rank in zip(values, ranks)]


def _check_distinct(xs: np.ndarray):
    ordered = np.sort(xs)
    scale = max(1.0, float(np.max(np.abs(xs))))
    gaps = np.diff(ordered)
    if np.any(gaps <= DUPLICATE_X_TOLERANCE * scale):
        raise ValidationError(f"duplicate x values {xs.tolist()} make the fit singular")


def fit_quadratic(points: Sequence[UtilityPoint]) -> QuadraticUtility:
    """
    Fits u(x) = a2 x^2 + a1 x + a0 through the points

    Exactly three points are interpolated by solving the Vandermonde system;
    more than three are fitted by least squares.

    Raises:
        ValidationError: fewer than 3 points or duplicate x values
    """
    if len(points) < 3:
        raise ValidationError(f"insufficient points: a quadratic needs 3, got {len(points)}")

    xs = np.array([p.x for p in points], dtype=float)
    us = np.array([p.u for p in points], dtype=float)
    _check_distinct(xs)

    vandermonde = np.vander(xs, 3)
    if len(points) == 3:
        coefficients = np.linalg.solve(vandermonde, us)
    else:
        coefficients, *_ = np.linalg.lstsq(vandermonde, us, rcond=None)

    a2, a1, a0 = (float(c) for c in coefficients)
    return QuadraticUtility(a2=a2, a1=a1, a0=a0)


def evaluate_utility(q: QuadraticUtility, x: float) -> Tuple[float, float, float]:
    """Returns (u, u', u'') at x."""
    u = q.a2 * x * x + q.a1 * x + q.a0
    du = 2.0 * q.a2 * x + q.a1
    d2u = 2.0 * q.a2
    return u, du, d2u


def ara(q: QuadraticUtility, x: float) -> float:
    """
    Arrow-Pratt absolute risk aversion, lambda(x) = -u''(x) / u'(x)

    Raises:
        StationaryPointError: u'(x) is (numerically) zero
    """
    _, du, d2u = evaluate_utility(q, x)
    if abs(du) < STATIONARY_TOLERANCE:
        raise StationaryPointError(f"lambda is undefined at the stationary point x={x}")
    # + 0.0 turns -0.0 into 0.0 for straight lines
    return -d2u / du + 0.0


def classify_risk_attitude(q: QuadraticUtility, x: float) -> str:
    """risk_averse, risk_neutral, risk_loving or undefined from the sign of lambda(x)."""
    return _ATTITUDE_BY_SIGN[_lambda_sign(q, x)]


def _lambda_sign(q: QuadraticUtility, x: float) -> str:
    if abs(q.a2) <= LINEAR_TOLERANCE:
        return "zero" if abs(q.a1) >= STATIONARY_TOLERANCE else "undefined"
    try:
        value = ara(q, x)
    except StationaryPointError:
        return "undefined"
    if value > 0:
        return "positive"
    if value < 0:
        return "negative"
    return "zero"


def curvature_of(q: QuadraticUtility) -> str:
    if abs(q.a2) <= LINEAR_TOLERANCE:
        return LINEAR
    return CONVEX if q.a2 > 0 else CONCAVE


def analyze_utility(q: QuadraticUtility, domain: Tuple[float, float]) -> UtilityAnalysis:
    """
    Curvature, vertex, increasing region and the sign map of lambda over a domain

    The sign of lambda is reported on each side of the vertex instead of a
    one-sided "defining range".
    """
    lower, upper = float(domain[0]), float(domain[1])
    if lower > upper:
        raise ValidationError(f"domain [{lower}, {upper}] is empty")

    curvature = curvature_of(q)

    if curvature == LINEAR:
        if q.a1 > 0:
            increasing = (lower, upper)
        else:
            increasing = None
        sign = _lambda_sign(q, lower)
        return UtilityAnalysis(
            curvature=LINEAR,
            vertex_x=None,
            increasing_interval=increasing,
            ara_sign_by_interval=[SignInterval(lower, upper, sign)],
            domain=(lower, upper),
        )

    vertex = -q.a1 / (2.0 * q.a2)
    inside = lower < vertex < upper

    if curvature == CONVEX:
        start = max(lower, vertex)
        increasing = (start, upper) if start < upper else None
    else:
        stop = min(upper, vertex)
        increasing = (lower, stop) if lower < stop else None

    if inside:
        pieces = [(lower, vertex), (vertex, upper)]
    else:
        pieces = [(lower, upper)]

    intervals = []
    for piece_lower, piece_upper in pieces:
        midpoint = 0.5 * (piece_lower + piece_upper)
        intervals.append(SignInterval(piece_lower, piece_upper, _lambda_sign(q, midpoint)))

    concave = curvature == CONCAVE
    return UtilityAnalysis(
        curvature=curvature,
        vertex_x=vertex,
        increasing_interval=increasing,
        ara_sign_by_interval=intervals,
        bliss_point=vertex if concave else None,
        iara_flag=concave,
        non_monotone=inside,
        domain=(lower, upper),
    )


def points_domain(points: Sequence[UtilityPoint]) -> Tuple[float, float]:
    xs = [p.x for p in points]
    if not xs:
        raise ValidationError("no points to take a domain from")
    return (min(xs), max(xs))


def curvature_under_schemes(excess: Sequence[float],
                            schemes: Sequence[UtilityIndexScheme]) -> List[str]:
    """
    Fitted curvature class of the same excess equities under several index schemes
    """
    return [curvature_of(fit_quadratic(assign_utility_indices(excess, scheme))) for scheme in schemes]


def deductible_final_wealth(contract: DeductibleContract, loss: float) -> float:
    """
    Final wealth under deductible insurance

    Z_T = Z_0 + M - x + I(x) - C(D)
    """
    if loss < 0:
        raise ValidationError(f"loss must be >= 0, got {loss}")
    return (contract.initial_wealth + contract.income - loss
            + contract.indemnification - contract.cost)
