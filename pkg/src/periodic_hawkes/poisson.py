"""Periodic Poisson baseline: the Hawkes model with zero excitation.

Defining the baseline as the exact restriction ``excitation = 0`` keeps every
comparison (goodness of fit, prediction) focused on the excitation mechanism
alone.  Fitting is closed form and simulation reuses the thinning sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, InputError
from .model import (
    EventSequence,
    HawkesParams,
    _day_indices,
    _readonly,
    day_bucket_durations,
)
from .simulation import simulate


@dataclass(frozen=True)
class PoissonParams:
    """Background rates and day profile of the zero-excitation model."""

    mu: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        mu = _readonly(np.asarray(self.mu, dtype=float).reshape(-1))
        delta = _readonly(np.asarray(self.delta, dtype=float).reshape(-1))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "delta", delta)
        if np.any(mu < 0) or np.any(delta < 0):
            raise InputError("rates and day multipliers must be non-negative")
        if abs(delta.sum() - delta.size) > 1e-9:
            raise InputError(f"day profile must sum to {delta.size}")

    @property
    def num_types(self) -> int:
        return int(self.mu.size)

    @property
    def days(self) -> int:
        return int(self.delta.size)

    def as_hawkes(self, omega: float = 1.0) -> HawkesParams:
        u = self.num_types
        return HawkesParams(
            mu=self.mu, delta=self.delta, excitation=np.zeros((u, u)), omega=omega
        )


def fit_poisson(seq: EventSequence, days: int = 7) -> PoissonParams:
    """Closed-form maximum likelihood fit.

    ``mu[u]`` is the type count over the horizon.  The day profile is
    proportional to per-bucket counts divided by the exact bucket durations
    inside the window, renormalized to sum to ``days``; with whole-week
    horizons this reduces to plain count proportions and coincides with the
    zero-excitation fixed point of the Hawkes EM under flat priors.
    """
    if len(seq) == 0:
        raise InputError("cannot fit on an empty sequence")
    if seq.horizon <= 0:
        raise InputError("cannot fit on a zero-length observation window")
    mu = seq.counts_by_type() / seq.horizon
    durations = day_bucket_durations(0.0, seq.horizon, days)
    day_counts = np.bincount(_day_indices(seq.times, days), minlength=days).astype(float)
    if np.any((durations == 0) & (day_counts > 0)):
        raise EstimationError("events observed in a zero-duration day bucket")
    with np.errstate(invalid="ignore", divide="ignore"):
        density = np.where(durations > 0, day_counts / np.where(durations > 0, durations, 1.0), 0.0)
    delta = density * (days / density.sum())
    return PoissonParams(mu=mu, delta=delta)


def simulate_poisson(params: PoissonParams, horizon: float, seed: int) -> EventSequence:
    """Draw one sequence from the baseline via the shared thinning sampler."""
    return simulate(params.as_hawkes(), horizon, seed)


def window_event_probability(
    params: PoissonParams, window: tuple[float, float], u: int
) -> float:
    """Closed-form probability of at least one type-``u`` event in ``window``."""
    t_start, t_end = window
    if not 0 <= t_start <= t_end:
        raise InputError(f"invalid window {window}")
    if not 0 <= u < params.num_types:
        raise InputError(f"type index {u} out of range")
    lengths = day_bucket_durations(t_start, t_end, params.days)
    mean_count = float(params.mu[u]) * float(params.delta @ lengths)
    return float(-np.expm1(-mean_count))
