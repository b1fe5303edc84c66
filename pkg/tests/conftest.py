import numpy as np
import pytest

from periodic_hawkes import EventSequence, HawkesParams, normalize_delta


@pytest.fixture
def cascade_params() -> HawkesParams:
    """Three types: background-driven type 0 self-excites and triggers 1,
    which triggers 2."""
    excitation = np.zeros((3, 3))
    excitation[0, 0] = 0.5
    excitation[0, 1] = 0.5
    excitation[1, 2] = 0.5
    return HawkesParams(
        mu=np.array([0.2, 0.0, 0.0]),
        delta=np.ones(7),
        excitation=excitation,
        omega=1.0,
    )


@pytest.fixture
def tilted_params() -> HawkesParams:
    """Two types with cross-excitation and a non-flat weekly profile."""
    return HawkesParams(
        mu=np.array([0.4, 0.3]),
        delta=normalize_delta(np.array([1.4, 1.0, 0.9, 1.1, 0.6, 1.2, 0.8])),
        excitation=np.array([[0.3, 0.15], [0.05, 0.25]]),
        omega=1.5,
    )


def random_sequence(rng: np.random.Generator, num_types: int, horizon: float,
                    n_events: int) -> EventSequence:
    times = np.sort(rng.uniform(0, horizon, size=n_events))
    types = rng.integers(0, num_types, size=n_events)
    return EventSequence(times, types, horizon, num_types)


def random_params(rng: np.random.Generator, num_types: int, days: int = 7,
                  omega: float = 1.0) -> HawkesParams:
    mu = rng.uniform(0.05, 0.5, size=num_types)
    delta = normalize_delta(rng.uniform(0.5, 1.5, size=days))
    excitation = rng.uniform(0, 1, size=(num_types, num_types))
    excitation *= 0.8 / max(np.abs(np.linalg.eigvals(excitation)).max(), 1e-9)
    return HawkesParams(mu=mu, delta=delta, excitation=excitation, omega=omega)
