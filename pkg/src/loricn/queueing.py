"""Analytic model of the per-node CFP queue, plus a Monte Carlo oracle.

One packet leaves the queue at each service opportunity (one per service
interval); Poisson arrivals accumulate in between.  The embedded chain over
queue lengths right after a service opportunity is solved for its stationary
distribution; the time-average occupancy adds half an arrival batch for the
slot-alignment delay, and the mean wait follows from Little's law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError, QueueModelError

DEFAULT_CLIP = 64
DEFAULT_TOL = 1e-12
MAX_POWER_ITERATIONS = 1_000_000
TAIL_MASS_LIMIT = 1e-9


@dataclass(frozen=True, slots=True)
class QueueModelParams:
    arrival_rate: float  # packets per second
    service_interval_s: float  # seconds between service opportunities
    clip: int = DEFAULT_CLIP
    tol: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        if self.arrival_rate <= 0:
            raise ConfigError(f"arrival rate must be positive, got {self.arrival_rate}")
        if self.service_interval_s <= 0:
            raise ConfigError(f"service interval must be positive, got {self.service_interval_s}")
        if self.clip < 4:
            raise ConfigError(f"clip {self.clip} is too small to hold a queue tail")
        if self.load >= 1.0:
            raise QueueModelError(
                f"load {self.load:.4f} >= 1: the queue has no stationary distribution"
            )

    @property
    def load(self) -> float:
        return self.arrival_rate * self.service_interval_s


@dataclass(frozen=True, slots=True)
class StationaryResult:
    params: QueueModelParams
    distribution: np.ndarray
    mean_queue_at_service: float
    mean_queue: float
    mean_wait_s: float


def transition_matrix(params: QueueModelParams) -> np.ndarray:
    """Stochastic matrix of S' = max(S + A - 1, 0) over states 0..clip."""
    n = params.clip + 1
    pmf = stats.poisson.pmf(np.arange(n + 1), params.load)
    mat = np.zeros((n, n))
    mat[0, 0] = pmf[0] + pmf[1]
    mat[0, 1:n - 1] = pmf[2:n]
    for s in range(1, n):
        lo = s - 1
        width = n - 1 - lo
        mat[s, lo:n - 1] = pmf[:width]
    mat[:, n - 1] = np.maximum(1.0 - mat[:, : n - 1].sum(axis=1), 0.0)
    return mat


def stationary_distribution(matrix: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    n = matrix.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(MAX_POWER_ITERATIONS):
        nxt = pi @ matrix
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise QueueModelError("stationary solve did not converge within the iteration budget")


def waiting_time(params: QueueModelParams) -> StationaryResult:
    pi = stationary_distribution(transition_matrix(params), params.tol)
    if pi[-1] >= TAIL_MASS_LIMIT:
        raise QueueModelError(
            f"tail mass {pi[-1]:.2e} at clipped state {params.clip}: raise clip"
        )
    mean_at_service = float(np.arange(pi.size) @ pi)
    mean_queue = mean_at_service + params.load / 2.0
    mean_wait = mean_queue / params.arrival_rate
    return StationaryResult(params, pi, mean_at_service, mean_queue, mean_wait)


@dataclass(frozen=True, slots=True)
class SimulatedQueue:
    n_frames: int
    n_packets: int
    mean_queue_at_service: float
    mean_queue: float
    mean_wait_s: float
    wait_bound_max_s: float


def simulate_queue(
    params: QueueModelParams,
    n_frames: int,
    seed: int = 0,
    chunk: int = 1 << 20,
) -> SimulatedQueue:
    """Direct Monte Carlo of the queue recursion with per-packet waits.

    A packet arriving in a frame at phase p waits (1 + queue ahead - p)
    service intervals; the sum over packets needs only per-frame counts and
    the pooled phase total, so frames are processed in vectorized chunks.
    """
    if n_frames < 1:
        raise ConfigError("need at least one frame")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    load = params.load
    interval = params.service_interval_s

    state = 0.0
    queue_sum = 0.0
    wait_slots_sum = 0.0
    phase_sum = 0.0
    packets = 0
    bound_max = 0.0
    remaining = n_frames
    while remaining > 0:
        size = min(chunk, remaining)
        remaining -= size
        arrivals = rng.poisson(load, size)
        drift = np.cumsum(arrivals - 1.0)
        prefix_min = np.minimum.accumulate(drift)
        states = np.maximum(state + drift, drift - prefix_min)
        prev = np.empty(size)
        prev[0] = state
        prev[1:] = states[:-1]
        queue_sum += states.sum()
        wait_slots_sum += float((arrivals * (1.0 + prev) + arrivals * (arrivals - 1.0) / 2.0).sum())
        n_arr = int(arrivals.sum())
        if n_arr:
            phase_sum += float(rng.random(n_arr).sum())
            bound_max = max(bound_max, float((prev + arrivals)[arrivals > 0].max()))
        packets += n_arr
        state = float(states[-1])

    wait_total_s = interval * (wait_slots_sum - phase_sum)
    mean_wait = wait_total_s / packets if packets else 0.0
    return SimulatedQueue(
        n_frames=n_frames,
        n_packets=packets,
        mean_queue_at_service=queue_sum / n_frames,
        mean_queue=wait_total_s / (n_frames * interval),
        mean_wait_s=mean_wait,
        wait_bound_max_s=interval * bound_max,
    )
