"""Privacy-parameter arithmetic shared by every other module.

Everything here is a pure function. Formulas that touch ``e^x - 1`` or
``log(1 + y)`` are evaluated with expm1/log1p so the small-budget regime
(epsilon around 1e-3) keeps full precision.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

# Max |sum - 1| accepted before a probability vector is rejected. Vectors
# inside the tolerance are renormalized; silent renormalization beyond it
# would mask convolution bugs.
PROB_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) differential-privacy guarantee."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidParameterError(f"delta must be in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class SubsampleRate:
    """Mixture weight of the sensitive component in a subsampled mechanism."""

    q: float

    def __post_init__(self):
        if not 0.0 < self.q < 0.5:
            raise InvalidParameterError(f"subsample rate must be in (0, 1/2), got {self.q}")


def rr_probability(epsilon):
    """Probability of answering truthfully in binary randomized response.

    Returns e^(eps/2) / (1 + e^(eps/2)), which is 1/2 at zero budget and
    approaches 1 as the budget grows.
    """
    if not (epsilon >= 0.0 and math.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
    return 1.0 / (1.0 + math.exp(-epsilon / 2.0))


def scale_factor(epsilon):
    """Debiasing factor (e^(eps/2) + 1) / (e^(eps/2) - 1) for response sums.

    This is the reciprocal of the randomized-response bias 2p - 1, so
    ``scale_factor(eps) * (2 * rr_probability(eps) - 1) == 1``. Diverges as
    epsilon approaches 0, hence the strict positivity requirement.
    """
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    return 1.0 + 2.0 / math.expm1(epsilon / 2.0)


def advanced_composition(epsilon, delta, k, delta_prime):
    """Privacy of the adaptive k-fold composition of (epsilon, delta) mechanisms.

    Returns (eps', k*delta + delta') with
    eps' = eps * sqrt(2k log(1/delta')) + k * eps * (e^eps - 1).
    """
    if not (epsilon >= 0.0 and math.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
    if not 0.0 <= delta < 1.0:
        raise InvalidParameterError(f"delta must be in [0, 1), got {delta}")
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise InvalidParameterError(f"k must be a positive integer, got {k}")
    if not delta_prime > 0.0:
        raise InvalidParameterError(f"delta_prime must be > 0, got {delta_prime}")
    eps_total = epsilon * math.sqrt(2.0 * k * math.log(1.0 / delta_prime)) \
        + k * epsilon * math.expm1(epsilon)
    return PrivacyParams(eps_total, k * delta + delta_prime)


def subsample_amplify(epsilon, q):
    """Amplified budget log(q (e^eps - 1) + 1) after q-subsampling.

    Only the epsilon side of the amplification; the caller is responsible
    for scaling the additive slack (delta becomes q * delta).
    """
    if isinstance(q, SubsampleRate):
        q = q.q
    if not 0.0 < q < 0.5:
        raise InvalidParameterError(f"subsample rate must be in (0, 1/2), got {q}")
    if not (epsilon >= 0.0 and math.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
    return math.log1p(q * math.expm1(epsilon))


def _as_probability_vector(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidParameterError("probability vector must be one-dimensional")
    if np.any(p < 0.0):
        raise InvalidParameterError("probability vector has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise InvalidParameterError(
            f"probability vector sums to {total!r}, outside tolerance {PROB_TOLERANCE}"
        )
    return p / total


def hockey_stick_delta(p, q, epsilon):
    """Smallest delta for which two finite distributions are (eps, delta)-close.

    Symmetric in its arguments: returns
    max( sum_x max(P(x) - e^eps Q(x), 0), sum_x max(Q(x) - e^eps P(x), 0) ),
    the exact additive slack in both neighbor orders. Zero iff the pair is
    (eps, 0)-close; at eps = 0 this is the total-variation distance.
    """
    if not (epsilon >= 0.0 and math.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
    p = _as_probability_vector(p)
    q = _as_probability_vector(q)
    if p.shape != q.shape:
        raise InvalidParameterError(
            f"support mismatch: {p.shape[0]} vs {q.shape[0]} entries"
        )
    e_eps = math.exp(epsilon)
    forward = float(np.maximum(p - e_eps * q, 0.0).sum())
    backward = float(np.maximum(q - e_eps * p, 0.0).sum())
    return max(forward, backward)
