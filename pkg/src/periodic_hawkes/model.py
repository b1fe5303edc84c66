"""Core types and probability computations for the periodic Hawkes model.

The model: events of ``U`` categorical types arrive on ``[0, T]`` (time in
days).  Type ``u`` has conditional intensity

    lambda_u(t) = mu[u] * delta[d(t)] + sum_{t_i < t} excitation[u_i, u] * omega * exp(-omega (t - t_i))

where ``d(t)`` is the day-of-week bucket of ``t`` and ``delta`` is a weekly
profile normalized to sum to the number of buckets.  ``excitation[i, j]`` is
the expected number of type-``j`` children spawned by one type-``i`` event
(rows are parents, columns are children), so the process is stationary iff
the spectral radius of ``excitation`` is below 1.

All types here are immutable after construction and all functions are pure,
so values can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError

#: Kernel spans beyond this many decay lengths carry relative mass under
#: 1e-20, far below every tolerance in use; pair scans stop there.
KERNEL_SPAN = 46.0

#: Sentinel for configurations that assign the data probability zero.
IMPOSSIBLE = float("-inf")


def day_index(t: float, days: int = 7) -> int:
    """Day-of-week bucket of time ``t``: floor(t) mod days.

    Day boundaries sit at integer times; sub-day timestamps fall in the
    enclosing day's bucket.
    """
    if t < 0:
        raise InputError(f"time must be non-negative, got {t}")
    return int(math.floor(t)) % days


def _day_indices(times: np.ndarray, days: int) -> np.ndarray:
    return np.floor(times).astype(np.int64) % days


def day_bucket_durations(start: float, end: float, days: int = 7) -> np.ndarray:
    """Exact total duration of each day bucket inside ``[start, end]``.

    Returns an array of length ``days`` summing to ``end - start``.  Used for
    the compensator of partial weeks and for window probabilities.
    """
    if start < 0 or end < start:
        raise InputError(f"invalid interval [{start}, {end}]")
    out = np.zeros(days)
    if end == start:
        return out
    lo = int(math.floor(start))
    hi = int(math.floor(end))
    if lo == hi:
        out[lo % days] = end - start
        return out
    out[lo % days] += (lo + 1) - start
    whole = hi - lo - 1
    if whole > 0:
        out += whole // days
        rem = whole % days
        if rem:
            out[(np.arange(rem) + lo + 1) % days] += 1.0
    if end > hi:
        out[hi % days] += end - hi
    return out


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EventSequence:
    """Time-ordered marked events on an observation window ``[0, horizon]``.

    ``times`` is non-decreasing; for equal timestamps the stored order is the
    canonical tie-break ("j precedes i" always means ``j < i`` by index).
    """

    times: np.ndarray
    types: np.ndarray
    horizon: float
    num_types: int

    def __post_init__(self):
        times = _readonly(np.asarray(self.times, dtype=float).reshape(-1))
        types = _readonly(np.asarray(self.types, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "types", types)
        if times.shape != types.shape:
            raise InputError("times and types must have equal length")
        if self.num_types < 1:
            raise InputError("num_types must be positive")
        if self.horizon < 0:
            raise InputError("horizon must be non-negative")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise InputError("event times must be non-decreasing")
            if times[0] < 0 or times[-1] > self.horizon:
                raise InputError("event times must lie in [0, horizon]")
            if types.min() < 0 or types.max() >= self.num_types:
                raise InputError("event types must lie in [0, num_types)")

    @classmethod
    def from_pairs(cls, pairs, horizon: float, num_types: int) -> "EventSequence":
        """Build from an iterable of ``(time, type)`` pairs (order preserved)."""
        pairs = list(pairs)
        times = np.array([p[0] for p in pairs], dtype=float)
        types = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(times, types, horizon, num_types)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def n_events(self) -> int:
        return len(self)

    def truncated(self, t: float) -> "EventSequence":
        """The sub-sequence of events strictly before ``t``, on window ``[0, t]``."""
        mask = self.times < t
        return EventSequence(self.times[mask], self.types[mask], t, self.num_types)

    def counts_by_type(self) -> np.ndarray:
        return np.bincount(self.types, minlength=self.num_types)

    def has_event_in(self, t_start: float, t_end: float, event_type: int) -> bool:
        mask = (self.times >= t_start) & (self.times <= t_end)
        return bool(np.any(self.types[mask] == event_type))


@dataclass(frozen=True)
class HawkesParams:
    """Parameters of the multivariate periodic Hawkes process.

    Attributes
    ----------
    mu : array, shape (U,)
        Non-negative background rates (events/day) per type.
    delta : array, shape (D,)
        Non-negative day-of-week multipliers summing to ``D`` (so a flat
        profile is all ones).
    excitation : array, shape (U, U)
        ``excitation[i, j]`` is the expected number of type-``j`` children
        per type-``i`` parent: row index = parent type, column = child type.
        The intensity of type ``u`` therefore picks up
        ``excitation[u_i, u] * omega * exp(-omega dt)`` from a past event of
        type ``u_i``.
    omega : float
        Global exponential decay rate (1/days) of the triggering kernel.
    """

    mu: np.ndarray
    delta: np.ndarray
    excitation: np.ndarray
    omega: float = 1.0

    def __post_init__(self):
        mu = _readonly(np.asarray(self.mu, dtype=float).reshape(-1))
        delta = _readonly(np.asarray(self.delta, dtype=float).reshape(-1))
        excitation = np.asarray(self.excitation, dtype=float)
        if excitation.ndim != 2 or excitation.shape[0] != excitation.shape[1]:
            raise InputError("excitation must be a square matrix")
        excitation = _readonly(excitation)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "excitation", excitation)
        if excitation.shape[0] != mu.size:
            raise InputError("excitation shape must match mu length")
        if np.any(mu < 0) or np.any(delta < 0) or np.any(excitation < 0):
            raise InputError("rates and excitation entries must be non-negative")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise InputError("omega must be a positive finite number")
        if abs(delta.sum() - delta.size) > 1e-9:
            raise InputError(
                f"day profile must sum to {delta.size}, got {delta.sum()!r}"
            )

    @property
    def num_types(self) -> int:
        return int(self.mu.size)

    @property
    def days(self) -> int:
        return int(self.delta.size)


@dataclass(frozen=True)
class GammaPriors:
    """Gamma prior hyperparameters for the excitation matrix and day profile.

    ``shape_a[i, j]`` / ``rate_a[i, j]`` act as pseudocounts of observed
    parent-child pairs and parent opportunities for ``excitation[i, j]``
    (same orientation as the matrix itself).  ``shape_delta`` / ``rate_delta``
    play the same role for the day profile; ``rate_delta`` is accepted for
    forward compatibility but does not enter the closed-form update.
    """

    shape_a: np.ndarray
    rate_a: np.ndarray
    shape_delta: np.ndarray
    rate_delta: np.ndarray

    def __post_init__(self):
        for name in ("shape_a", "rate_a", "shape_delta", "rate_delta"):
            object.__setattr__(
                self, name, _readonly(np.asarray(getattr(self, name), dtype=float))
            )
        if self.shape_a.shape != self.rate_a.shape or self.shape_a.ndim != 2:
            raise InputError("shape_a and rate_a must be equal-shape square matrices")
        if self.shape_delta.shape != self.rate_delta.shape or self.shape_delta.ndim != 1:
            raise InputError("shape_delta and rate_delta must be equal-length vectors")
        if np.any(self.shape_a < 1) or np.any(self.shape_delta < 1):
            raise InputError("prior shapes must be >= 1")
        if np.any(self.rate_a < 0) or np.any(self.rate_delta < 0):
            raise InputError("prior rates must be non-negative")

    @classmethod
    def flat(cls, num_types: int, days: int = 7) -> "GammaPriors":
        """Priors that leave the posterior equal to the likelihood."""
        return cls(
            shape_a=np.ones((num_types, num_types)),
            rate_a=np.zeros((num_types, num_types)),
            shape_delta=np.ones(days),
            rate_delta=np.zeros(days),
        )

    @classmethod
    def uniform(
        cls,
        num_types: int,
        days: int = 7,
        shape_a: float = 1.0,
        rate_a: float = 0.0,
        shape_delta: float = 1.0,
    ) -> "GammaPriors":
        return cls(
            shape_a=np.full((num_types, num_types), shape_a),
            rate_a=np.full((num_types, num_types), rate_a),
            shape_delta=np.full(days, shape_delta),
            rate_delta=np.zeros(days),
        )


@dataclass(frozen=True)
class BranchingEstimate:
    """Expected branching structure: each event's parent distribution.

    Row ``i`` (the ``i``-th event) assigns probability ``background[i]`` to
    being a background event and ``probability[k]`` to having been triggered
    by the earlier event ``parent[k]`` for every stored pair with
    ``child[k] == i``.  Pairs omitted from storage have probability exactly
    zero.  Every row sums to one.
    """

    background: np.ndarray
    child: np.ndarray
    parent: np.ndarray
    probability: np.ndarray

    def __post_init__(self):
        bg = _readonly(np.asarray(self.background, dtype=float).reshape(-1))
        child = _readonly(np.asarray(self.child, dtype=np.int64).reshape(-1))
        parent = _readonly(np.asarray(self.parent, dtype=np.int64).reshape(-1))
        prob = _readonly(np.asarray(self.probability, dtype=float).reshape(-1))
        object.__setattr__(self, "background", bg)
        object.__setattr__(self, "child", child)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "probability", prob)
        if not (child.shape == parent.shape == prob.shape):
            raise InputError("pair arrays must have equal length")
        n = bg.size
        if child.size:
            if child.min() < 0 or child.max() >= n:
                raise InputError("pair child indices out of range")
            if np.any(parent >= child):
                raise InputError("parents must strictly precede children (j < i)")
            if parent.min() < 0:
                raise InputError("pair parent indices out of range")
        if np.any(bg < 0) or np.any(prob < 0):
            raise InputError("branching probabilities must be non-negative")
        sums = self.row_sums()
        if n and np.max(np.abs(sums - 1.0)) > 1e-12:
            raise InputError("branching rows must sum to one")

    @property
    def size(self) -> int:
        return int(self.background.size)

    def row_sums(self) -> np.ndarray:
        return self.background + np.bincount(
            self.child, weights=self.probability, minlength=self.background.size
        )

    def to_dense(self) -> np.ndarray:
        """Dense lower-triangular matrix (row = child, column = parent)."""
        n = self.size
        dense = np.zeros((n, n))
        dense[np.arange(n), np.arange(n)] = self.background
        np.add.at(dense, (self.child, self.parent), self.probability)
        return dense

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "BranchingEstimate":
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        child, parent = np.nonzero(np.tril(matrix, k=-1))
        return cls(
            background=np.diag(matrix).copy(),
            child=child,
            parent=parent,
            probability=matrix[child, parent],
        )


@dataclass(frozen=True)
class KernelPairs:
    """Precomputed (child, parent) index pairs with kernel values.

    Covers every ordered pair ``j < i`` whose gap is within ``KERNEL_SPAN``
    decay lengths; beyond that the kernel value underflows all tolerances.
    ``kernel[k] = omega * exp(-omega * (t_child - t_parent))``.
    """

    child: np.ndarray
    parent: np.ndarray
    kernel: np.ndarray

    @classmethod
    def build(cls, seq: EventSequence, omega: float) -> "KernelPairs":
        times = seq.times
        n = times.size
        idx = np.arange(n)
        starts = np.searchsorted(times, times - KERNEL_SPAN / omega, side="left")
        counts = idx - starts
        total = int(counts.sum())
        child = np.repeat(idx, counts)
        group_first = np.concatenate(([0], np.cumsum(counts)[:-1])) if n else np.zeros(0, dtype=np.int64)
        parent = (
            np.arange(total)
            - np.repeat(group_first, counts)
            + np.repeat(starts, counts)
        )
        kernel = omega * np.exp(-omega * (times[child] - times[parent]))
        return cls(child=child, parent=parent, kernel=kernel)


def intensity(params: HawkesParams, history: EventSequence, t: float, u: int) -> float:
    """Conditional intensity of type ``u`` at time ``t`` given earlier events.

    Only events strictly before ``t`` contribute; an event at exactly ``t``
    is excluded.  The result is bounded below by the periodic background
    ``mu[u] * delta[d(t)]``.
    """
    if not 0 <= u < params.num_types:
        raise InputError(f"type index {u} out of range")
    rate = params.mu[u] * params.delta[day_index(t, params.days)]
    mask = history.times < t
    if np.any(mask):
        dt = t - history.times[mask]
        rate += float(
            np.sum(
                params.excitation[history.types[mask], u]
                * params.omega
                * np.exp(-params.omega * dt)
            )
        )
    return float(rate)


def event_intensities(params: HawkesParams, seq: EventSequence, pairs: KernelPairs | None = None) -> np.ndarray:
    """Intensity of each event's own type just before it occurs.

    Uses index precedence (``j < i``), so simultaneous events excite each
    other in stored order with kernel value ``omega`` at zero gap.
    """
    if pairs is None:
        pairs = KernelPairs.build(seq, params.omega)
    d = _day_indices(seq.times, params.days)
    rates = params.mu[seq.types] * params.delta[d]
    if pairs.child.size:
        contrib = (
            params.excitation[seq.types[pairs.parent], seq.types[pairs.child]]
            * pairs.kernel
        )
        rates = rates + np.bincount(pairs.child, weights=contrib, minlength=len(seq))
    return rates


def kernel_mass(omega: float, dt) -> np.ndarray:
    """Integrated kernel on ``[0, dt]``: ``1 - exp(-omega * dt)``."""
    return -np.expm1(-omega * np.asarray(dt, dtype=float))


def compensator(
    params: HawkesParams, seq: EventSequence, whole_week_approx: bool = False
) -> float:
    """Total integrated intensity over all types on ``[0, horizon]``.

    With ``whole_week_approx`` the background term uses the week-averaged
    profile ``horizon * sum(mu) * mean(delta)`` instead of exact per-bucket
    durations; the two agree when the horizon is a whole number of weeks.
    """
    if whole_week_approx:
        background = seq.horizon / params.days * float(params.mu.sum()) * float(params.delta.sum())
    else:
        durations = day_bucket_durations(0.0, seq.horizon, params.days)
        background = float(params.mu.sum()) * float(params.delta @ durations)
    row_mass = params.excitation.sum(axis=1)
    excite = float(
        np.sum(row_mass[seq.types] * kernel_mass(params.omega, seq.horizon - seq.times))
    )
    return background + excite


def observed_log_likelihood(
    params: HawkesParams, seq: EventSequence, whole_week_approx: bool = False
) -> float:
    """Log-likelihood of the sequence: sum of log-intensities minus compensator.

    Returns the ``IMPOSSIBLE`` sentinel (-inf) when an observed event has
    zero intensity under the parameters.
    """
    rates = event_intensities(params, seq)
    if np.any(rates <= 0):
        return IMPOSSIBLE
    return float(np.log(rates).sum()) - compensator(params, seq, whole_week_approx)


def complete_data_log_likelihood(
    params: HawkesParams, seq: EventSequence, branching: BranchingEstimate
) -> float:
    """Expected log-likelihood of (events, branching) under soft assignments.

    Each event contributes ``p * log(rate / p)`` for its background and
    parent hypotheses (entropy included, ``0 log 0 = 0``), minus the
    compensator.  When the branching matrix equals the exact posterior
    parent distribution this coincides with :func:`observed_log_likelihood`.
    Assigning positive probability to a zero-rate hypothesis yields the
    ``IMPOSSIBLE`` sentinel.
    """
    if branching.size != len(seq):
        raise InputError("branching size must match the number of events")
    d = _day_indices(seq.times, params.days)
    bg_rate = params.mu[seq.types] * params.delta[d]
    p_bg = branching.background
    active = p_bg > 0
    if np.any(bg_rate[active] == 0):
        return IMPOSSIBLE
    total = float(
        np.sum(p_bg[active] * (np.log(bg_rate[active]) - np.log(p_bg[active])))
    )
    if branching.child.size:
        dt = seq.times[branching.child] - seq.times[branching.parent]
        pair_rate = (
            params.excitation[seq.types[branching.parent], seq.types[branching.child]]
            * params.omega
            * np.exp(-params.omega * dt)
        )
        p = branching.probability
        live = p > 0
        if np.any(pair_rate[live] == 0):
            return IMPOSSIBLE
        total += float(
            np.sum(p[live] * (np.log(pair_rate[live]) - np.log(p[live])))
        )
    return total - compensator(params, seq)


def log_prior(params: HawkesParams, priors: GammaPriors) -> float:
    """Gamma log-prior kernel on excitation and day profile, up to a constant.

    A zero entry with shape > 1 makes the prior density vanish, yielding the
    ``IMPOSSIBLE`` sentinel; with shape exactly 1 the term is zero.
    """
    if priors.shape_a.shape != params.excitation.shape:
        raise InputError("prior shape_a must match the excitation matrix")
    if priors.shape_delta.size != params.days:
        raise InputError("prior shape_delta must match the day profile")
    a = params.excitation
    pos = a > 0
    if np.any((priors.shape_a > 1) & ~pos):
        return IMPOSSIBLE
    total = float(np.sum((priors.shape_a[pos] - 1.0) * np.log(a[pos])))
    total -= float(np.sum(priors.rate_a * a))
    dpos = params.delta > 0
    if np.any((priors.shape_delta > 1) & ~dpos):
        return IMPOSSIBLE
    total += float(np.sum((priors.shape_delta[dpos] - 1.0) * np.log(params.delta[dpos])))
    total -= float(np.sum(priors.rate_delta * params.delta))
    return total


def log_posterior(
    params: HawkesParams,
    seq: EventSequence,
    branching: BranchingEstimate,
    priors: GammaPriors,
) -> float:
    """Complete-data log-posterior, up to an additive parameter-free constant."""
    like = complete_data_log_likelihood(params, seq, branching)
    if like == IMPOSSIBLE:
        return IMPOSSIBLE
    prior = log_prior(params, priors)
    if prior == IMPOSSIBLE:
        return IMPOSSIBLE
    return like + prior


def spectral_radius(matrix: np.ndarray, tol: float = 1e-10, max_iters: int = 10_000) -> float:
    """Largest eigenvalue modulus of a non-negative matrix by power iteration.

    Iterates on ``matrix + I`` (which shifts the dominant eigenvalue to
    ``radius + 1`` and makes it strictly dominant for non-negative input)
    from the all-ones start vector, then undoes the shift.  Deterministic.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    if np.any(a < 0):
        raise InputError("matrix must be non-negative")
    n = a.shape[0]
    shifted = a + np.eye(n)
    vec = np.full(n, 1.0 / math.sqrt(n))
    estimate = 1.0
    for _ in range(max_iters):
        nxt = shifted @ vec
        norm = float(np.linalg.norm(nxt))
        if norm == 0.0:
            return 0.0
        vec = nxt / norm
        if abs(norm - estimate) <= tol:
            return max(norm - 1.0, 0.0)
        estimate = norm
    raise NumericError(
        f"power iteration did not converge within {max_iters} iterations",
        estimate=max(estimate - 1.0, 0.0),
    )
