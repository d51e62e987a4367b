"""Longitudinal local-DP collection with shuffle-model privacy amplification.

The package splits into: privacy-parameter arithmetic (`core`), local
randomizers and deterministic streams (`randomizer`), the per-client
reporting protocol (`client`), server-side aggregation (`aggregator`),
shuffled sequential execution (`shuffle`), the closed-form amplification
accountant (`amplification`), the exact small-n certification oracle
(`divergence`), and the simulation harness plus CLI (`harness`, `cli`).
"""

from .aggregator import SumTree, accumulate, accumulate_arrays, dyadic_cover, estimate_marginals
from .amplification import (AmplificationResult, amplify_group, amplify_shuffle,
                            amplify_swap, binary_case_bound, per_step_epsilon, rdp_bound)
from .client import (ClientState, Report, client_setup, client_update,
                     clip_changes, pad_to_power_of_two, run_client)
from .core import (PrivacyParams, SubsampleRate, advanced_composition,
                   hockey_stick_delta, rr_probability, scale_factor, subsample_amplify)
from .divergence import (CertificationRecord, certify_amplification,
                         shuffled_rr_count_distribution, worst_case_divergence)
from .errors import (InvalidParameterError, MalformedReportError, OutOfRegimeError,
                     ParseError, ProtocolError)
from .harness import SimulationConfig, SimulationResult, generate_inputs, simulate
from .randomizer import (LocalRandomizer, OneBitRandomizer, RandomnessStream,
                         binary_rr, one_bit_rr_randomizer, uniform_sign)
from .shuffle import run_local, run_shuffled, run_swap, shuffle_responses

__version__ = "0.1.0"
