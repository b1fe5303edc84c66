"""Goodness-of-fit testing and the window-prediction benchmark.

Two evaluation tracks:

* Monte Carlo goodness of fit -- compare the inter-event-time CDF of the
  data against sequences simulated from the fitted model, using the area
  between CDFs as the discrepancy.  Because fitted parameters depend on the
  data, the null distribution of the area is itself estimated by refitting
  on simulated data, and the two groups of areas are compared with a
  one-sided rank-sum (or permutation) test.

* Window prediction -- given a user's history up to a split time ``t``,
  score the probability of at least one event of each tracked type in
  ``[t, t + epsilon]``, then sweep thresholds into precision-recall curves
  per type and model.

All randomized routines take an integer seed and derive child streams from
``numpy.random.SeedSequence`` in a fixed order, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import EstimationError, InputError, PeriodicHawkesError
from .estimation import EmConfig, fit_map_em
from .model import (
    EventSequence,
    GammaPriors,
    HawkesParams,
    day_bucket_durations,
)
from .poisson import PoissonParams, fit_poisson, simulate_poisson, window_event_probability
from .simulation import _thinning, _require_stationary, excitation_components, simulate


# ---------------------------------------------------------------------------
# Empirical CDFs and the area statistic


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step CDF of a finite sample."""

    values: np.ndarray  # sorted

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalCdf":
        arr = np.sort(np.asarray(samples, dtype=float).reshape(-1))
        if arr.size == 0:
            raise InputError("cannot build a CDF from an empty sample")
        arr.setflags(write=False)
        return cls(values=arr)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def __call__(self, x) -> np.ndarray | float:
        result = np.searchsorted(self.values, x, side="right") / self.values.size
        if np.isscalar(x):
            return float(result)
        return result

    def breakpoints(self) -> np.ndarray:
        return np.unique(self.values)


def interevent_gaps(seq: EventSequence) -> np.ndarray:
    """Gaps between consecutive events, pooled across all types."""
    if len(seq) < 2:
        raise InputError("need at least 2 events to form inter-event gaps")
    return np.diff(seq.times)


def interevent_cdf(seq: EventSequence) -> EmpiricalCdf:
    """Empirical CDF of consecutive inter-event gaps (all types pooled)."""
    return EmpiricalCdf.from_samples(interevent_gaps(seq))


def interevent_cdf_by_type(seq: EventSequence) -> dict[int, EmpiricalCdf]:
    """Per-type variant: gaps within each type's own subsequence."""
    out: dict[int, EmpiricalCdf] = {}
    for u in range(seq.num_types):
        times = seq.times[seq.types == u]
        if times.size >= 2:
            out[u] = EmpiricalCdf.from_samples(np.diff(times))
    return out


def area_statistic(f: EmpiricalCdf, g: EmpiricalCdf) -> float:
    """Area between two step CDFs, integrated exactly over the merged grid."""
    grid = np.union1d(f.breakpoints(), g.breakpoints())
    if grid.size < 2:
        return 0.0
    heights = np.abs(f(grid[:-1]) - g(grid[:-1]))
    return float(np.sum(heights * np.diff(grid)))


# ---------------------------------------------------------------------------
# Monte Carlo goodness of fit


@dataclass(frozen=True)
class GofResult:
    """Outcome of the Monte Carlo goodness-of-fit test."""

    areas_data_model: np.ndarray  # data vs model-simulated, one per replicate
    areas_model_model: np.ndarray  # refit-simulated vs model-simulated
    p_value: float
    rejected_at_5pct: bool
    replicates: int
    method: str


def _group_p_value(
    data_areas: np.ndarray,
    null_areas: np.ndarray,
    method: str,
    seed: int,
    permutations: int,
) -> float:
    if method == "ranksum":
        if np.ptp(np.concatenate([data_areas, null_areas])) == 0.0:
            return 1.0  # all areas identical: no evidence against the model
        return float(
            stats.mannwhitneyu(data_areas, null_areas, alternative="greater").pvalue
        )
    if method == "permutation":
        rng = np.random.default_rng(seed)
        observed = data_areas.mean() - null_areas.mean()
        pool = np.concatenate([data_areas, null_areas])
        m = data_areas.size
        count = 0
        for _ in range(permutations):
            perm = rng.permutation(pool)
            if perm[:m].mean() - perm[m:].mean() >= observed:
                count += 1
        return (1 + count) / (1 + permutations)
    raise InputError(f"unknown group comparison method {method!r}")


def mc_gof_test(
    seq: EventSequence,
    fitter: Callable[[EventSequence], Any],
    simulator: Callable[[Any, float, int], EventSequence],
    replicates: int = 20,
    seed: int = 0,
    method: str = "ranksum",
    permutations: int = 10_000,
) -> GofResult:
    """Monte Carlo test of whether ``seq`` is plausible under a model family.

    Fits the model on the data, then per replicate: simulate a dataset from
    the fit and record the area between its inter-event CDF and the data's;
    refit on the simulated dataset, simulate again, and record the area
    between those two simulated CDFs.  The first group measures data-model
    discrepancy, the second the discrepancy expected from estimation noise
    alone; a one-sided comparison (data areas stochastically larger) gives
    the p-value, with rejection at the 5% level.
    """
    if replicates < 20:
        raise InputError("at least 20 Monte Carlo replicates are required")
    horizon = seq.horizon
    data_cdf = interevent_cdf(seq)
    fitted = fitter(seq)
    seeds = np.random.SeedSequence(seed).generate_state(2 * replicates, dtype=np.uint64)

    data_areas = np.empty(replicates)
    null_areas = np.empty(replicates)
    for m in range(replicates):
        try:
            sim_one = simulator(fitted, horizon, int(seeds[2 * m]))
            sim_one_cdf = interevent_cdf(sim_one)
            data_areas[m] = area_statistic(data_cdf, sim_one_cdf)
            refit = fitter(sim_one)
            sim_two = simulator(refit, horizon, int(seeds[2 * m + 1]))
            null_areas[m] = area_statistic(sim_one_cdf, interevent_cdf(sim_two))
        except PeriodicHawkesError as exc:
            raise EstimationError(f"goodness-of-fit replicate {m} failed: {exc}") from exc

    p_value = _group_p_value(data_areas, null_areas, method, seed, permutations)
    return GofResult(
        areas_data_model=data_areas,
        areas_model_model=null_areas,
        p_value=p_value,
        rejected_at_5pct=p_value < 0.05,
        replicates=replicates,
        method=method,
    )


def hawkes_gof_pair(
    priors: GammaPriors | None = None, cfg: EmConfig | None = None
) -> tuple[Callable[[EventSequence], HawkesParams], Callable[[HawkesParams, float, int], EventSequence]]:
    """(fitter, simulator) pair for testing the Hawkes model itself."""

    def fitter(seq: EventSequence) -> HawkesParams:
        return fit_map_em(seq, priors=priors, cfg=cfg).params

    return fitter, simulate


def poisson_gof_pair() -> tuple[
    Callable[[EventSequence], PoissonParams],
    Callable[[PoissonParams, float, int], EventSequence],
]:
    """(fitter, simulator) pair for testing the periodic Poisson baseline."""
    return fit_poisson, simulate_poisson


# ---------------------------------------------------------------------------
# Compensator diagnostics


def time_rescaled_gaps(params: HawkesParams, seq: EventSequence) -> np.ndarray:
    """Compensator increments between consecutive events (all types pooled).

    Under the true parameters these are iid Exponential(1), which makes them
    a standard residual diagnostic (for example via a KS test).
    """
    if len(seq) == 0:
        return np.zeros(0)
    mu_total = float(params.mu.sum())
    omega = params.omega
    gaps = np.empty(len(seq))
    excitation = np.zeros(params.num_types)
    prev = 0.0
    for i, (t, u) in enumerate(zip(seq.times, seq.types)):
        dt = t - prev
        lengths = day_bucket_durations(prev, t, params.days)
        background = mu_total * float(params.delta @ lengths)
        decayed = float(excitation.sum()) * (1.0 - np.exp(-omega * dt)) / omega
        gaps[i] = background + decayed
        excitation = excitation * np.exp(-omega * dt) + params.excitation[u, :] * omega
        prev = t
    return gaps


# ---------------------------------------------------------------------------
# Window prediction


def window_presence_probabilities(
    params: HawkesParams,
    history: EventSequence,
    t: float,
    epsilon: float,
    types: Sequence[int],
    n_samples: int = 1000,
    seed: int = 0,
) -> np.ndarray:
    """Fraction of simulated continuations containing each queried type.

    Simulates ``n_samples`` continuations of ``history`` on
    ``[t, t + epsilon]`` and, for each entry of ``types``, reports the
    fraction of runs with at least one event of that type.
    """
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    if n_samples < 100:
        raise InputError("n_samples must be at least 100")
    if len(history) and history.times[-1] > t:
        raise InputError("history must not extend past the prediction time")
    _require_stationary(params)
    excitation = excitation_components(params, history, t)
    rng = np.random.default_rng(seed)
    hits = np.zeros(params.num_types, dtype=np.int64)
    for _ in range(n_samples):
        _, drawn_types = _thinning(params, t, t + epsilon, excitation, rng)
        for u in set(drawn_types):
            hits[u] += 1
    return hits[np.asarray(types, dtype=np.int64)] / n_samples


def predict_window_probability(
    params: HawkesParams,
    history: EventSequence,
    t: float,
    epsilon: float,
    u: int,
    n_samples: int = 1000,
    seed: int = 0,
) -> float:
    """Probability of at least one type-``u`` event in ``[t, t + epsilon]``."""
    probs = window_presence_probabilities(
        params, history, t, epsilon, [u], n_samples=n_samples, seed=seed
    )
    return float(probs[0])


@dataclass(frozen=True)
class PredictionScore:
    """One (user, type, model) prediction with its realized label."""

    user: str
    type_index: int
    score: float
    label: bool
    model: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class PrCurve:
    """Precision-recall sweep over a threshold grid."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    average_precision: float
    num_positive: int
    num_scored: int


def default_thresholds(count: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, count)


def precision_recall(
    scores: Sequence[PredictionScore], thresholds: Sequence[float]
) -> PrCurve:
    """Threshold sweep: classify ``score >= threshold`` as positive.

    Precision at zero classified positives is defined as 1 (no false
    positives were issued).  The average precision is the mean precision
    over the given threshold grid.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.size == 0:
        raise InputError("thresholds must be non-empty")
    if np.any(np.diff(thresholds) < 0):
        raise InputError("thresholds must be sorted ascending")
    values = np.array([s.score for s in scores])
    labels = np.array([s.label for s in scores], dtype=bool)
    positives = int(labels.sum())
    if positives == 0:
        raise InputError("precision-recall requires at least one positive label")
    precision = np.empty(thresholds.size)
    recall = np.empty(thresholds.size)
    for k, threshold in enumerate(thresholds):
        predicted = values >= threshold
        classified = int(predicted.sum())
        true_pos = int((predicted & labels).sum())
        precision[k] = true_pos / classified if classified else 1.0
        recall[k] = true_pos / positives
    return PrCurve(
        thresholds=thresholds,
        precision=precision,
        recall=recall,
        average_precision=float(precision.mean()),
        num_positive=positives,
        num_scored=len(scores),
    )


@dataclass(frozen=True)
class PredictionModel:
    """Adapter a benchmark model must satisfy.

    ``fit`` maps a training sequence to a fitted object; ``probabilities``
    maps (fitted, history, t, epsilon, types, n_samples, seed) to per-type
    window probabilities in [0, 1].
    """

    name: str
    fit: Callable[[EventSequence], Any]
    probabilities: Callable[..., np.ndarray]


def hawkes_prediction_model(
    priors: GammaPriors | None = None, cfg: EmConfig | None = None
) -> PredictionModel:
    def fit(seq: EventSequence) -> HawkesParams:
        return fit_map_em(seq, priors=priors, cfg=cfg).params

    def probabilities(fitted, history, t, epsilon, types, n_samples, seed):
        return window_presence_probabilities(
            fitted, history, t, epsilon, types, n_samples=n_samples, seed=seed
        )

    return PredictionModel(name="hawkes", fit=fit, probabilities=probabilities)


def poisson_prediction_model() -> PredictionModel:
    def probabilities(fitted, history, t, epsilon, types, n_samples, seed):
        # Closed form: no sampling noise in the baseline's scores.
        return np.array(
            [window_event_probability(fitted, (t, t + epsilon), u) for u in types]
        )

    return PredictionModel(name="poisson", fit=fit_poisson, probabilities=probabilities)


@dataclass(frozen=True)
class BenchmarkResult:
    """Scores and per-(model, type) precision-recall curves."""

    scores: list[PredictionScore]
    curves: dict[tuple[str, int], PrCurve]
    tracked_types: list[int]
    split_times: dict[str, float]
    skipped_users: int
    skipped_types: list[int] = field(default_factory=list)


def _top_types(users: Mapping[str, EventSequence], top_k: int) -> list[int]:
    num_types = next(iter(users.values())).num_types
    counts = np.zeros(num_types, dtype=np.int64)
    for seq in users.values():
        counts += seq.counts_by_type()
    order = np.lexsort((np.arange(num_types), -counts))
    return [int(u) for u in order[:top_k] if counts[order[0]] > 0][:top_k]


def prediction_benchmark(
    users: Mapping[str, EventSequence],
    epsilon: float = 2.0,
    holdout_fraction: float = 0.10,
    models: Sequence[PredictionModel] | None = None,
    seed: int = 0,
    top_k: int = 10,
    n_samples: int = 200,
    thresholds: Sequence[float] | None = None,
) -> BenchmarkResult:
    """Window-prediction benchmark over a population of users.

    For each user a split day ``t`` is drawn uniformly from the integer days
    in the last ``holdout_fraction`` of the observation window; each model is
    fit on the events before ``t`` and scores every tracked type's
    probability of appearing in ``[t, t + epsilon]``.  Labels come from the
    held-out events.  Scores aggregate into one precision-recall curve per
    (model, type); users with fewer than two training events are skipped and
    counted, as are types with no positive label.  By default each curve is
    swept over its own observed score values (scale-invariant across
    models); pass ``thresholds`` to pin a common grid instead.
    """
    if not users:
        raise InputError("benchmark requires at least one user")
    if not 0.0 < holdout_fraction < 1.0:
        raise InputError("holdout_fraction must lie strictly between 0 and 1")
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    models = list(models) if models is not None else [
        hawkes_prediction_model(),
        poisson_prediction_model(),
    ]
    if thresholds is not None:
        thresholds = np.asarray(thresholds, dtype=float)
    tracked = _top_types(users, top_k)
    if not tracked:
        raise InputError("no events in the population; nothing to track")

    scores: list[PredictionScore] = []
    split_times: dict[str, float] = {}
    skipped = 0
    for user_index, user_id in enumerate(sorted(users)):
        seq = users[user_id]
        user_rng = np.random.default_rng(np.random.SeedSequence((seed, user_index)))
        horizon = seq.horizon
        lo = int(np.ceil((1.0 - holdout_fraction) * horizon))
        candidates = np.arange(max(lo, 1), int(np.ceil(horizon)))
        if candidates.size == 0:
            skipped += 1
            continue
        t_split = float(user_rng.choice(candidates))
        train = seq.truncated(t_split)
        if len(train) < 2:
            skipped += 1
            continue
        split_times[user_id] = t_split
        labels = {
            u: seq.has_event_in(t_split, t_split + epsilon, u) for u in tracked
        }
        for m_index, model in enumerate(models):
            fitted = model.fit(train)
            score_seed = int(
                np.random.SeedSequence((seed, user_index, m_index)).generate_state(
                    1, dtype=np.uint64
                )[0]
            )
            probs = model.probabilities(
                fitted, train, t_split, epsilon, tracked, n_samples, score_seed
            )
            for u, prob in zip(tracked, probs):
                scores.append(
                    PredictionScore(
                        user=user_id,
                        type_index=int(u),
                        score=float(np.clip(prob, 0.0, 1.0)),
                        label=labels[u],
                        model=model.name,
                    )
                )

    curves: dict[tuple[str, int], PrCurve] = {}
    skipped_types: list[int] = []
    for model in models:
        for u in tracked:
            subset = [s for s in scores if s.model == model.name and s.type_index == u]
            if not subset or not any(s.label for s in subset):
                if u not in skipped_types:
                    skipped_types.append(u)
                continue
            if thresholds is None:
                # Observed scores as the grid: scale-invariant, and the
                # zero-classified convention never fires inside the sweep.
                grid = np.unique([s.score for s in subset])
            else:
                grid = thresholds
            curves[(model.name, u)] = precision_recall(subset, grid)
    return BenchmarkResult(
        scores=scores,
        curves=curves,
        tracked_types=tracked,
        split_times=split_times,
        skipped_users=skipped,
        skipped_types=skipped_types,
    )
