"""Simulation driver: synthetic populations through the full
client -> (optional shuffle) -> server pipeline, measured against the
closed-form error bound.

Reproducibility contract: every trial draws from its own counter-based
stream keyed by (seed, trial), consumed in a fixed order (input generation,
per-client change/level draws, the report-coin matrix, then the optional
post-shuffle permutation). Client i's randomness is row i of the bulk
draws, so results are independent of how the work is scheduled, and two
runs with the same config are bit-identical.
"""

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .aggregator import accumulate_arrays, estimate_marginals
from .client import (clip_changes, is_power_of_two, level_count,
                     write_report_arrays)
from .core import rr_probability, scale_factor
from .errors import InvalidParameterError, ParseError
from .kernels import emit_reports, resolve_backend
from .randomizer import RandomnessStream

INPUT_MODELS = ("worst-case-sparse", "random-changes", "step-function", "file")
SHUFFLE_MODES = ("none", "post-shuffle")

# refuse accidental huge runs; override with allow_large
RESOURCE_GUARD_CELLS = 10 ** 9


@dataclass
class SimulationConfig:
    n: int
    d: int
    k: int
    epsilon: float
    beta: float = 1.0 / 3.0
    trials: int = 1
    seed: int = 0
    input_model: str = "random-changes"
    shuffle_mode: str = "none"
    output_path: str = None
    step_time: int = None          # step-function model: common flip time
    input_path: str = None         # file model: JSON-lines change vectors
    reports_path: str = None       # dump the trial-0 report stream here
    allow_large: bool = False
    backend: str = None

    def validate(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise InvalidParameterError(f"need n >= 1 clients, got {self.n}")
        if not is_power_of_two(self.d):
            raise InvalidParameterError(f"horizon must be a power of two, got {self.d}")
        if not (isinstance(self.k, int) and self.k >= 1):
            raise InvalidParameterError(f"change budget must be >= 1, got {self.k}")
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise InvalidParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.beta < 1.0:
            raise InvalidParameterError(f"beta must be in (0, 1), got {self.beta}")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise InvalidParameterError(f"need trials >= 1, got {self.trials}")
        if self.input_model not in INPUT_MODELS:
            raise InvalidParameterError(
                f"unknown input model {self.input_model!r}; pick from {INPUT_MODELS}"
            )
        if self.shuffle_mode not in SHUFFLE_MODES:
            raise InvalidParameterError(
                f"unknown shuffle mode {self.shuffle_mode!r}; pick from {SHUFFLE_MODES}"
            )
        if self.input_model == "file" and not self.input_path:
            raise InvalidParameterError("file input model needs input_path")
        if self.n * self.d > RESOURCE_GUARD_CELLS and not self.allow_large:
            raise InvalidParameterError(
                f"n*d = {self.n * self.d} exceeds the resource guard; "
                "set allow_large to override"
            )
        resolve_backend(self.backend)

    def to_json_dict(self):
        out = dataclasses.asdict(self)
        out.pop("allow_large")
        return out


@dataclass
class SimulationResult:
    """One trial's error profile against the closed-form bound."""

    trial: int
    max_abs_error: float
    errors: np.ndarray
    theorem_bound: float
    bound_satisfied: bool
    wall_time: float
    clipped_clients: int = 0


def theorem_error_bound(n, d, k, epsilon, beta):
    """High-probability cap c_eps * k * (log2 d)^(3/2) * sqrt(n log(2d/beta))
    on the worst marginal error."""
    log2d = math.log2(d) if d > 1 else 1.0
    return scale_factor(epsilon) * k * log2d ** 1.5 \
        * math.sqrt(n * math.log(2.0 * d / beta))


def read_change_vectors(path, n, d, k):
    """Read JSON-lines rows {"x": [...]} into an (n, d) change matrix.

    Rows beyond the change budget are clipped; returns (matrix, number of
    clipped rows). Malformed rows raise ParseError with their line number.
    """
    rows = []
    clipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
            if not isinstance(row, dict) or "x" not in row:
                raise ParseError('expected an object with an "x" array', lineno)
            x = row["x"]
            if not isinstance(x, list) or len(x) != d:
                raise ParseError(f'"x" must be a list of length {d}', lineno)
            if any(v not in (-1, 0, 1) for v in x):
                raise ParseError('"x" entries must be in {-1, 0, 1}', lineno)
            x = np.asarray(x, dtype=np.int8)
            if np.count_nonzero(x) > k:
                x = clip_changes(x, k)
                clipped += 1
            rows.append(x)
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, found {len(rows)}")
    return np.vstack(rows), clipped


def generate_inputs(n, d, k, input_model, rng, step_time=None, input_path=None):
    """Synthesize an (n, d) change matrix under one of the input models.

    Every row keeps at most k changes and a boolean state trajectory.
    Returns (matrix, clipped row count); only the file model can clip.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise InvalidParameterError(f"need n >= 1 clients, got {n}")
    if not is_power_of_two(d):
        raise InvalidParameterError(f"horizon must be a power of two, got {d}")
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= d):
        raise InvalidParameterError(f"change budget must be in [1, {d}], got {k}")

    n, d, k = int(n), int(d), int(k)
    signs = np.where(np.arange(k) % 2 == 0, 1, -1).astype(np.int8)

    if input_model == "worst-case-sparse":
        # every client changes at the same k evenly spaced timesteps,
        # starting with +1, so whole stretches carry marginal n
        times = (np.arange(k) * d) // k
        x = np.zeros((n, d), dtype=np.int8)
        x[:, times] = signs
        return x, 0

    if input_model == "random-changes":
        scores = rng.uniform(size=(n, d))
        cols = np.argpartition(scores, k - 1, axis=1)[:, :k] if k < d \
            else np.tile(np.arange(d), (n, 1))
        cols = np.sort(cols, axis=1)
        x = np.zeros((n, d), dtype=np.int8)
        x[np.repeat(np.arange(n), k), cols.ravel()] = np.tile(signs, n)
        return x, 0

    if input_model == "step-function":
        t0 = max(1, d // 2) if step_time is None else int(step_time)
        if not 1 <= t0 <= d:
            raise InvalidParameterError(f"step time must be in [1, {d}], got {t0}")
        x = np.zeros((n, d), dtype=np.int8)
        x[:, t0 - 1] = 1
        return x, 0

    if input_model == "file":
        if not input_path:
            raise InvalidParameterError("file input model needs input_path")
        return read_change_vectors(input_path, n, d, k)

    raise InvalidParameterError(
        f"unknown input model {input_model!r}; pick from {INPUT_MODELS}"
    )


def run_trial(config, trial):
    """Run one seeded trial; returns (estimates, truth, reports, clipped)."""
    stream = RandomnessStream(config.seed, trial)
    x, clipped = generate_inputs(config.n, config.d, config.k, config.input_model,
                                 stream, step_time=config.step_time,
                                 input_path=config.input_path)
    truth = np.cumsum(x.sum(axis=0, dtype=np.int64))

    levels_total = level_count(config.d)
    target = stream.integers(1, config.k + 1, size=config.n).astype(np.int64)
    levels = stream.integers(1, levels_total + 1, size=config.n).astype(np.int64)

    # locate each client's sampled change: first timestep where the running
    # nonzero count hits the target
    nonzero_count = np.cumsum(np.abs(x), axis=1)
    hit = (nonzero_count == target[:, None]) & (x != 0)
    has_signal = hit.any(axis=1)
    signal_t = np.where(has_signal, hit.argmax(axis=1) + 1, 0).astype(np.int64)
    rows = np.arange(config.n)
    signal_v = np.where(has_signal, x[rows, np.maximum(signal_t - 1, 0)], 0).astype(np.int64)

    coins = stream.uniform(size=(config.n, config.d))
    h, t, u = emit_reports(signal_t, signal_v, levels, coins,
                           rr_probability(config.epsilon), config.d,
                           backend=config.backend)
    if config.shuffle_mode == "post-shuffle":
        perm = stream.permutation(len(h))
        h, t, u = h[perm], t[perm], u[perm]

    tree = accumulate_arrays(h, t, u, config.d)
    estimates = estimate_marginals(tree, config.epsilon, config.k, config.d)
    return estimates, truth, (h, t, u), clipped


def simulate(config):
    """Run every trial of a configuration; deterministic given the seed."""
    config.validate()
    bound = theorem_error_bound(config.n, config.d, config.k,
                                config.epsilon, config.beta)
    results = []
    for trial in range(config.trials):
        start = time.perf_counter()
        estimates, truth, reports, clipped = run_trial(config, trial)
        errors = np.abs(truth - estimates)
        max_err = float(errors.max())
        elapsed = time.perf_counter() - start
        if trial == 0 and config.reports_path:
            write_report_arrays(config.reports_path, *reports)
        results.append(SimulationResult(
            trial=trial,
            max_abs_error=max_err,
            errors=errors,
            theorem_bound=bound,
            bound_satisfied=bool(max_err <= bound),
            wall_time=elapsed,
            clipped_clients=clipped,
        ))
    return results


# ---------------------------------------------------------------------------
# Result serialization. Wall times vary between executions, so they are
# reported in memory but never written to the canonical output files; that
# keeps identical (config, seed) runs byte-identical. Max-error
# distributions are heavy tailed, so the summary quotes the median and
# quantiles rather than a mean.
# ---------------------------------------------------------------------------

def _fmt(value):
    return f"{value:.17g}"


def summarize(results):
    errs = np.array([r.max_abs_error for r in results])
    return {
        "trials": len(results),
        "median_max_abs_error": float(np.median(errs)),
        "q10_max_abs_error": float(np.quantile(errs, 0.10)),
        "q90_max_abs_error": float(np.quantile(errs, 0.90)),
        "bound_satisfied_fraction": float(np.mean([r.bound_satisfied for r in results])),
        "theorem_bound": results[0].theorem_bound,
        "clipped_clients": int(results[0].clipped_clients),
    }


def results_to_json(config, results):
    """Canonical JSON text for a run; floats keep 17 significant digits."""
    payload = {
        "config": config.to_json_dict(),
        "summary": summarize(results),
        "trials": [
            {
                "trial": r.trial,
                "max_abs_error": r.max_abs_error,
                "theorem_bound": r.theorem_bound,
                "bound_satisfied": r.bound_satisfied,
                "errors": [float(e) for e in r.errors],
            }
            for r in results
        ],
    }

    def encode(obj):
        if isinstance(obj, float):
            return float(_fmt(obj))
        if isinstance(obj, dict):
            return {k: encode(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [encode(v) for v in obj]
        return obj

    return json.dumps(encode(payload), sort_keys=True, indent=2) + "\n"


def results_to_csv(config, results):
    """One CSV row per trial for sweep-style post-processing."""
    head = ["trial", "n", "d", "k", "epsilon", "beta", "seed", "input_model",
            "shuffle_mode", "max_abs_error", "theorem_bound", "bound_satisfied"]
    lines = [",".join(head)]
    for r in results:
        lines.append(",".join([
            str(r.trial), str(config.n), str(config.d), str(config.k),
            _fmt(config.epsilon), _fmt(config.beta), str(config.seed),
            config.input_model, config.shuffle_mode,
            _fmt(r.max_abs_error), _fmt(r.theorem_bound),
            str(int(r.bound_satisfied)),
        ]))
    return "\n".join(lines) + "\n"


def write_results(config, results, path):
    """Write results to path: CSV when it ends in .csv, JSON otherwise."""
    text = results_to_csv(config, results) if str(path).endswith(".csv") \
        else results_to_json(config, results)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
