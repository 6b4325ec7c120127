"""Weight schemes for weighted quorum consensus.

A weight scheme assigns every node a distinct positive weight.  A round
commits once the acknowledging weights exceed the consensus threshold
(half of the total weight).  For a failure threshold ``t`` the scheme must
keep the sum of the ``t`` largest weights *below* the threshold (so the
system survives the loss of any ``t`` nodes) while the ``t + 1`` largest
weights exceed it (so the cabinet — the top ``t + 1`` holders — forms the
minimal quorum and no disjoint quorum can exist).

Generated schemes are geometric: ``w_i = r**(n - i)`` with ``w_n = 1`` and
ratio ``r`` in the open interval (1, 2) chosen so that

    r**(n-t-1)  <  (r**n + 1) / 2  <  r**(n-t)

Both bounds are located by bisection and the returned ratio is the
geometric midpoint of the feasible interval.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "BadThresholdError",
    "InfeasibleRatioError",
    "SchemeError",
    "SchemeVerdict",
    "Violation",
    "WeightScheme",
    "feasible_ratio_interval",
    "generate_scheme",
    "geometric_weights",
    "max_failure_threshold",
    "ratio_is_feasible",
    "scheme_from_json",
    "scheme_to_json",
    "validate_scheme",
]

# Relative tolerance for the "ct equals half the total weight" check.
CT_REL_TOL = 1e-9
# Quorum margins must exceed this fraction of the total weight to count.
MARGIN_REL_TOL = 1e-9
# Absolute bisection tolerance on the ratio.
RATIO_TOL = 1e-12


class SchemeError(ValueError):
    """Invalid weight-scheme request."""


class BadThresholdError(SchemeError):
    """Failure threshold outside 1 <= t <= floor((n-1)/2)."""


class InfeasibleRatioError(SchemeError):
    """No ratio in (1, 2) satisfies the quorum inequalities numerically.

    Mathematically a ratio always exists for a valid (n, t); raising this
    signals a numeric failure rather than clamping to a bad scheme.
    """


def max_failure_threshold(n: int) -> int:
    return (n - 1) // 2


class Violation(Enum):
    NONE = "none"
    SAFETY = "safety"
    LIVENESS = "liveness"
    NONPOSITIVE_WEIGHT = "nonpositive_weight"
    BAD_THRESHOLD_RANGE = "bad_threshold_range"
    CT_MISMATCH = "ct_mismatch"


@dataclass(frozen=True)
class SchemeVerdict:
    """Outcome of validating a weight scheme against a threshold."""

    valid: bool
    violated: Violation
    margins: tuple[float, float]  # (ct - top_t_sum, top_{t+1}_sum - ct)


@dataclass(frozen=True)
class WeightScheme:
    """Ordered weights (w_1 highest) with consensus threshold ct.

    ``ratio`` is the geometric ratio used to build the weights, or None for
    handcrafted schemes.  ``ratio_interval`` records the feasible open
    interval the ratio was picked from, when known.
    """

    n: int
    t: int
    ratio: float | None
    weights: tuple[float, ...]
    ct: float
    ratio_interval: tuple[float, float] | None = None

    def __post_init__(self):
        if len(self.weights) != self.n:
            raise SchemeError(f"expected {self.n} weights, got {len(self.weights)}")
        if any(b >= a for a, b in zip(self.weights, self.weights[1:])):
            raise SchemeError("weights must be strictly descending")
        verdict = validate_scheme(self.weights, self.ct, self.t)
        if not verdict.valid:
            raise SchemeError(f"scheme violates {verdict.violated.value}, margins {verdict.margins}")

    @property
    def total(self) -> float:
        return sum(self.weights)

    def cabinet_size(self) -> int:
        return self.t + 1


def validate_scheme(weights, ct: float, t: int) -> SchemeVerdict:
    """Check a weight list against the quorum invariants for threshold t.

    Total function: returns a verdict, never raises.  Top-k sums are taken
    over the weights sorted descending, so input order does not affect the
    verdict.  The first violation is reported in the order
    bad_threshold_range, nonpositive_weight, ct_mismatch, liveness, safety.
    """
    ws = sorted(weights, reverse=True)
    n = len(ws)
    total = math.fsum(ws)
    top_t = math.fsum(ws[: max(t, 0)])
    top_t1 = math.fsum(ws[: max(t + 1, 0)])
    margins = (ct - top_t, top_t1 - ct)

    if not 1 <= t <= max_failure_threshold(n):
        return SchemeVerdict(False, Violation.BAD_THRESHOLD_RANGE, margins)
    if any(w <= 0 for w in ws):
        return SchemeVerdict(False, Violation.NONPOSITIVE_WEIGHT, margins)
    if not math.isclose(ct, total / 2, rel_tol=CT_REL_TOL, abs_tol=0.0):
        return SchemeVerdict(False, Violation.CT_MISMATCH, margins)
    tol = MARGIN_REL_TOL * total
    if margins[0] <= tol:
        return SchemeVerdict(False, Violation.LIVENESS, margins)
    if margins[1] <= tol:
        return SchemeVerdict(False, Violation.SAFETY, margins)
    return SchemeVerdict(True, Violation.NONE, margins)


def ratio_is_feasible(n: int, t: int, r: float) -> bool:
    """True when r strictly satisfies r^(n-t-1) < (r^n + 1)/2 < r^(n-t)."""
    half = (r**n + 1) / 2
    return r ** (n - t - 1) < half < r ** (n - t)


def _lower_gap(n, t, r):
    # positive once (r^n + 1)/2 exceeds r^(n-t-1)
    return (r**n + 1) / 2 - r ** (n - t - 1)


def _upper_gap(n, t, r):
    # positive while r^(n-t) exceeds (r^n + 1)/2
    return r ** (n - t) - (r**n + 1) / 2


def feasible_ratio_interval(n: int, t: int) -> tuple[float, float]:
    """Open interval of ratios in (1, 2) satisfying both quorum bounds.

    Each bound is bisected independently to RATIO_TOL.  The lower gap is
    nonnegative throughout (1, 2) whenever 2*(t+1) >= n; otherwise it has a
    single sign change, as does the upper gap.
    """
    if not 1 <= t <= max_failure_threshold(n):
        raise BadThresholdError(f"t={t} outside [1, {max_failure_threshold(n)}] for n={n}")

    if 2 * (t + 1) >= n:
        lo = 1.0
    else:
        a, b = 1.0, 2.0  # _lower_gap(a) <= 0 < _lower_gap(b)
        while b - a > RATIO_TOL:
            mid = (a + b) / 2
            if _lower_gap(n, t, mid) > 0:
                b = mid
            else:
                a = mid
        lo = b

    a, b = 1.0, 2.0  # _upper_gap positive just above a, negative at b
    while b - a > RATIO_TOL:
        mid = (a + b) / 2
        if _upper_gap(n, t, mid) > 0:
            a = mid
        else:
            b = mid
    hi = a

    if not hi > lo:
        raise InfeasibleRatioError(f"no feasible ratio located for n={n}, t={t}")
    return lo, hi


def geometric_weights(n: int, r: float) -> tuple[float, ...]:
    """Descending weights r^(n-1), ..., r, 1."""
    return tuple(r ** (n - i) for i in range(1, n + 1))


def generate_scheme(n: int, t: int) -> WeightScheme:
    """Build a geometric weight scheme for (n, t).

    The ratio is the geometric midpoint of the feasible interval, which
    keeps both quorum margins comfortably away from the boundary.
    """
    if n < 3:
        raise SchemeError(f"need at least 3 nodes, got n={n}")
    lo, hi = feasible_ratio_interval(n, t)
    r = math.sqrt(lo * hi) if lo > 1.0 else math.sqrt(hi)
    if not ratio_is_feasible(n, t, r):
        raise InfeasibleRatioError(f"midpoint ratio {r} infeasible for n={n}, t={t}")
    weights = geometric_weights(n, r)
    ct = math.fsum(weights) / 2
    scheme = WeightScheme(n=n, t=t, ratio=r, weights=weights, ct=ct, ratio_interval=(lo, hi))
    verdict = validate_scheme(scheme.weights, scheme.ct, t)
    if not verdict.valid:
        raise InfeasibleRatioError(f"generated scheme invalid: {verdict.violated.value}")
    return scheme


def scheme_to_json(scheme: WeightScheme) -> str:
    return json.dumps(
        {
            "n": scheme.n,
            "t": scheme.t,
            "r": scheme.ratio,
            "weights": list(scheme.weights),
            "ct": scheme.ct,
        }
    )


def scheme_from_json(text: str) -> WeightScheme:
    obj = json.loads(text)
    return WeightScheme(
        n=int(obj["n"]),
        t=int(obj["t"]),
        ratio=None if obj.get("r") is None else float(obj["r"]),
        weights=tuple(float(w) for w in obj["weights"]),
        ct=float(obj["ct"]),
    )
