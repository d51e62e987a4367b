"""Closed-form accountant for privacy amplification by shuffling or swapping.

All bounds share the per-step budget eps1 = 2 e^(2 eps0) (e^(eps0) - 1) / n.
The calculator evaluates every closed form whose hypotheses hold, returns
the minimum, and never reports worse than the trivial bound eps0 (a local
guarantee is a central guarantee as-is).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, OutOfRegimeError

REGIME_GENERAL = "general"
REGIME_MODERATE = "moderate"
REGIME_SIMPLIFIED = "simplified"
REGIME_NONE = "no-amplification"


@dataclass(frozen=True)
class AmplificationResult:
    """Amplified central-model guarantee plus how it was obtained.

    `bounds` holds every closed form that was applicable, uncapped;
    `epsilon_central` is their minimum capped at epsilon0, and `regime`
    labels the winner ("no-amplification" when the cap bites).
    `index_restricted` marks guarantees that hold at position one only.
    """

    epsilon_central: float
    epsilon_1: float
    regime: str
    delta: float
    bounds: dict = field(default_factory=dict)
    index_restricted: bool = False


def _validate(epsilon0, n, delta):
    if not (epsilon0 > 0.0 and math.isfinite(epsilon0)):
        raise InvalidParameterError(f"epsilon0 must be > 0, got {epsilon0}")
    if not (isinstance(n, (int, np.integer)) and n >= 2):
        raise InvalidParameterError(f"need at least two reports, got n={n}")
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")


def per_step_epsilon(epsilon0, n):
    """Per-step budget 2 e^(2 eps0) (e^(eps0) - 1) / n of the swapped protocol."""
    return 2.0 * math.exp(2.0 * epsilon0) * math.expm1(epsilon0) / n


def _general_bound(eps1, n, delta):
    if eps1 > 700.0:  # expm1 overflow; the bound is vacuous long before this
        return math.inf
    return eps1 * math.sqrt(2.0 * n * math.log(1.0 / delta)) + n * eps1 * math.expm1(eps1)


def _moderate_bound(epsilon0, n, delta):
    lead = math.exp(2.0 * epsilon0) * math.expm1(epsilon0)
    return lead * math.sqrt(8.0 * math.log(1.0 / delta) / n) \
        + 6.0 * math.exp(4.0 * epsilon0) * math.expm1(epsilon0) ** 2 / n


def _simplified_bound(epsilon0, n, delta):
    return 12.0 * epsilon0 * math.sqrt(math.log(1.0 / delta) / n)


def amplify_shuffle(epsilon0, n, delta):
    """Central-model budget of n shuffled eps0-local reports.

    Evaluates the general bound always, the moderate bound when
    eps0 <= ln(n/4)/3, and the simplified bound 12 eps0 sqrt(log(1/delta)/n)
    when n >= 1000, eps0 < 1/2 and delta < 1/100; returns the minimum,
    capped at eps0.
    """
    _validate(epsilon0, n, delta)
    n = int(n)
    eps1 = per_step_epsilon(epsilon0, n)
    bounds = {REGIME_GENERAL: _general_bound(eps1, n, delta)}
    if epsilon0 <= math.log(n / 4.0) / 3.0:
        bounds[REGIME_MODERATE] = _moderate_bound(epsilon0, n, delta)
    if n >= 1000 and 0.0 < epsilon0 < 0.5 and 0.0 < delta < 0.01:
        bounds[REGIME_SIMPLIFIED] = _simplified_bound(epsilon0, n, delta)
    regime, best = min(bounds.items(), key=lambda item: item[1])
    if best >= epsilon0:
        return AmplificationResult(epsilon0, eps1, REGIME_NONE, delta, bounds)
    return AmplificationResult(best, eps1, regime, delta, bounds)


def amplify_swap(epsilon0, n, delta):
    """Central-model budget of the one-swap protocol; holds at index 1 only.

    Same general closed form as `amplify_shuffle`, without the reduced
    special-case regimes, capped at eps0.
    """
    _validate(epsilon0, n, delta)
    n = int(n)
    eps1 = per_step_epsilon(epsilon0, n)
    bounds = {REGIME_GENERAL: _general_bound(eps1, n, delta)}
    best = bounds[REGIME_GENERAL]
    if best >= epsilon0:
        return AmplificationResult(epsilon0, eps1, REGIME_NONE, delta, bounds,
                                   index_restricted=True)
    return AmplificationResult(best, eps1, REGIME_GENERAL, delta, bounds,
                               index_restricted=True)


def amplify_group(epsilon0, group_size, delta):
    """Per-member budget when only a group of identical reports is shuffled.

    Applies 12 eps0 sqrt(log(1/delta)/|S|) under its stated hypotheses
    (|S| >= 1000, eps0 < 1/2, delta < 1/100) and refuses anything outside
    them rather than extrapolating; fall back to `amplify_shuffle` whose
    general regime is unconditional.
    """
    if not (epsilon0 > 0.0 and math.isfinite(epsilon0)):
        raise InvalidParameterError(f"epsilon0 must be > 0, got {epsilon0}")
    if not (isinstance(group_size, (int, np.integer)) and group_size >= 1000):
        raise OutOfRegimeError(f"group bound needs |S| >= 1000, got {group_size}")
    if not epsilon0 < 0.5:
        raise OutOfRegimeError(f"group bound needs epsilon0 < 1/2, got {epsilon0}")
    if not 0.0 < delta < 0.01:
        raise OutOfRegimeError(f"group bound needs delta in (0, 1/100), got {delta}")
    group_size = int(group_size)
    value = _simplified_bound(epsilon0, group_size, delta)
    return AmplificationResult(value, per_step_epsilon(epsilon0, group_size),
                               REGIME_SIMPLIFIED, delta,
                               {REGIME_SIMPLIFIED: value})


def rdp_bound(epsilon0, n, alpha):
    """Renyi-DP budget 2 alpha e^(4 eps0) (e^(eps0) - 1)^2 / n of the
    shuffled protocol at order alpha; linear in alpha, decreasing in n."""
    if not (epsilon0 > 0.0 and math.isfinite(epsilon0)):
        raise InvalidParameterError(f"epsilon0 must be > 0, got {epsilon0}")
    if not (isinstance(n, (int, np.integer)) and n >= 2):
        raise InvalidParameterError(f"need at least two reports, got n={n}")
    if not alpha >= 1.0:
        raise InvalidParameterError(f"order must be >= 1, got {alpha}")
    return 2.0 * alpha * math.exp(4.0 * epsilon0) * math.expm1(epsilon0) ** 2 / int(n)


def binary_case_bound(epsilon0, n, delta):
    """Asymptotic reference curve min(1, eps0) e^(eps0/2) sqrt(log(1/delta)/n)
    for the one-bit case, with the unknown constant set to 1.

    Plot/comparison aid only; never a certified guarantee.
    """
    _validate(epsilon0, n, delta)
    return min(1.0, epsilon0) * math.exp(epsilon0 / 2.0) \
        * math.sqrt(math.log(1.0 / delta) / int(n))
