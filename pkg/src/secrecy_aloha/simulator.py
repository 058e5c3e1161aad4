"""Discrete-time slotted ALOHA with N finite-rate queues.

Each slot, in order:

1. every user receives a packet with probability ``lam_i`` (Bernoulli);
2. every user with a non-empty queue (every user, in dominant mode)
   transmits its head packet with probability ``q_i``;
3. a lone transmission succeeds with probability ``1 - p_f,i``; two or more
   transmissions all fail. Failed packets stay at the head of the queue.

In dominant mode a user with an empty queue sends a dummy packet, so its
success counts toward throughput but not toward departures.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numba
import numpy as np

from .errors import InsufficientData
from .regions import SystemParams
from .rng import make_generator

Z_95 = 1.959963984540054
MIN_TRAJECTORY = 1000

TX, COLLIDED, SUCCEEDED = 1, 2, 4


@dataclass
class SimConfig:
    params: SystemParams
    n_slots: int
    seed: int
    warmup_slots: int = 0
    dominant_mode: bool = False
    replications: int = 1
    drift_threshold: float = 0.01

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")
        if not 0 <= self.warmup_slots < self.n_slots:
            raise ValueError("warmup_slots must lie in [0, n_slots)")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@numba.njit(cache=True)
def _run_slots(rng, lam, q, pf, dominant, warmup, queue, traj, events, counts, totals):
    # counts rows (post-warmup): 0 successes, 1 empty slots, 2 clean tx,
    # 3 transmissions, 4 collision slots (user 0 column only).
    # totals rows (all slots): 0 arrivals, 1 departures.
    n_slots, n = traj.shape
    record = events.shape[0] > 0
    sending = np.zeros(n, dtype=np.bool_)
    for t in range(n_slots):
        post = t >= warmup
        n_tx = 0
        sender = -1
        for i in range(n):
            if rng.random() < lam[i]:
                queue[i] += 1
                totals[0, i] += 1
            empty = queue[i] == 0
            if post and empty:
                counts[1, i] += 1
            x = (dominant or not empty) and rng.random() < q[i]
            sending[i] = x
            if x:
                n_tx += 1
                sender = i
        if n_tx == 1:
            if rng.random() >= pf[sender]:
                if post:
                    counts[0, sender] += 1
                if queue[sender] > 0:
                    queue[sender] -= 1
                    totals[1, sender] += 1
                if record:
                    events[t, sender] |= 4
            if post:
                counts[2, sender] += 1
        elif n_tx > 1 and post:
            counts[4, 0] += 1
        for i in range(n):
            traj[t, i] = queue[i]
            if sending[i]:
                if post:
                    counts[3, i] += 1
                if record:
                    events[t, i] |= 1
                    if n_tx > 1:
                        events[t, i] |= 2


@dataclass
class Replication:
    """Raw outcome of one simulated run."""

    throughput: np.ndarray
    empty_prob: np.ndarray
    collision_fraction: float
    clean_tx_fraction: np.ndarray
    clean_tx_given_busy: np.ndarray
    mean_queue: np.ndarray
    drift: np.ndarray
    stable: np.ndarray
    arrivals: np.ndarray
    departures: np.ndarray
    final_queue: np.ndarray
    trajectory: Optional[np.ndarray] = None
    events: Optional[np.ndarray] = None


def simulate_replication(config: SimConfig, replication: int = 0, keep_trajectory: bool = False,
                         trace: bool = False) -> Replication:
    """Run one replication on stream ``(config.seed, replication)``."""
    p = config.params
    n = p.n_users
    rng = make_generator(config.seed, replication)
    queue = np.zeros(n, dtype=np.int64)
    traj = np.zeros((config.n_slots, n), dtype=np.int64)
    events = np.zeros((config.n_slots if trace else 0, n), dtype=np.uint8)
    counts = np.zeros((5, n), dtype=np.int64)
    totals = np.zeros((2, n), dtype=np.int64)
    _run_slots(rng, p.arrival, p.tx_prob, p.fail_prob, config.dominant_mode,
               config.warmup_slots, queue, traj, events, counts, totals)

    post = traj[config.warmup_slots:]
    n_post = post.shape[0]
    busy = n_post - counts[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        given_busy = np.where(busy > 0, counts[2] / busy, np.nan)
    if n_post >= MIN_TRAJECTORY:
        drift = queue_drift(post)
        stable = detect_stability(post, config.drift_threshold)
    else:
        drift = np.full(n, np.nan)
        stable = np.zeros(n, dtype=bool)
    return Replication(
        throughput=counts[0] / n_post,
        empty_prob=counts[1] / n_post,
        collision_fraction=counts[4, 0] / n_post,
        clean_tx_fraction=counts[2] / n_post,
        clean_tx_given_busy=given_busy,
        mean_queue=post.mean(axis=0),
        drift=drift,
        stable=stable,
        arrivals=totals[0].copy(),
        departures=totals[1].copy(),
        final_queue=queue.copy(),
        trajectory=traj if keep_trajectory else None,
        events=events if trace else None,
    )


def queue_drift(trajectory: np.ndarray) -> np.ndarray:
    """Least-squares slope (packets/slot) of each queue over the second half of the run."""
    y = np.asarray(trajectory, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] < MIN_TRAJECTORY:
        raise InsufficientData(f"need at least {MIN_TRAJECTORY} slots, got {y.shape[0]}")
    tail = y[y.shape[0] // 2:]
    x = np.arange(tail.shape[0], dtype=float)
    x -= x.mean()
    return (x @ (tail - tail.mean(axis=0))) / (x @ x)


def detect_stability(trajectory: np.ndarray, drift_threshold: float = 0.01,
                     growth_factor: float = 10.0) -> np.ndarray:
    """Finite-horizon stability proxy, one verdict per queue.

    A queue is called stable when its second-half drift is below
    ``drift_threshold`` and its final size stays under ``growth_factor``
    times its first-half mean (floored at one packet, so idle queues pass).
    """
    y = np.asarray(trajectory, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    drift = queue_drift(y)
    first_half_mean = y[: y.shape[0] // 2].mean(axis=0)
    bounded = y[-1] < growth_factor * np.maximum(first_half_mean, 1.0)
    return (drift < drift_threshold) & bounded


@dataclass
class SimMetrics:
    throughput_per_user: np.ndarray
    empty_prob_per_user: np.ndarray
    collision_fraction: float
    clean_tx_fraction_per_user: np.ndarray
    clean_tx_given_busy: np.ndarray
    mean_queue: np.ndarray
    queue_drift: np.ndarray
    stable_verdict: np.ndarray
    replications: int
    ci_halfwidth: Optional[dict] = None
    arrivals: list = field(default_factory=list)
    departures: list = field(default_factory=list)
    final_queue: list = field(default_factory=list)

    @property
    def total_throughput(self) -> float:
        return float(np.sum(self.throughput_per_user))

    def to_dict(self) -> dict:
        def lst(x):
            return np.asarray(x).tolist()

        ci = None
        if self.ci_halfwidth is not None:
            ci = {k: lst(v) for k, v in self.ci_halfwidth.items()}
        return {
            "throughput_per_user": lst(self.throughput_per_user),
            "total_throughput": self.total_throughput,
            "empty_prob_per_user": lst(self.empty_prob_per_user),
            "collision_fraction": float(self.collision_fraction),
            "clean_tx_fraction_per_user": lst(self.clean_tx_fraction_per_user),
            "clean_tx_given_busy": [None if np.isnan(v) else v for v in lst(self.clean_tx_given_busy)],
            "mean_queue": lst(self.mean_queue),
            "queue_drift": lst(self.queue_drift),
            "stable_verdict": lst(self.stable_verdict),
            "replications": self.replications,
            "ci_halfwidth": ci,
        }


_AGGREGATED = {
    "throughput_per_user": "throughput",
    "total_throughput": None,
    "empty_prob_per_user": "empty_prob",
    "collision_fraction": "collision_fraction",
    "clean_tx_fraction_per_user": "clean_tx_fraction",
    "clean_tx_given_busy": "clean_tx_given_busy",
    "mean_queue": "mean_queue",
    "queue_drift": "drift",
}


def aggregate(reps: list) -> SimMetrics:
    """Mean over replications with 95% normal-approximation half-widths."""
    r = len(reps)
    stacked = {}
    for name, attr in _AGGREGATED.items():
        if attr is None:
            stacked[name] = np.array([np.sum(x.throughput) for x in reps])
        else:
            stacked[name] = np.array([getattr(x, attr) for x in reps], dtype=float)
    means = {k: v.mean(axis=0) for k, v in stacked.items()}
    ci = None
    if r >= 2:
        ci = {k: Z_95 * v.std(axis=0, ddof=1) / np.sqrt(r) for k, v in stacked.items()}
    return SimMetrics(
        throughput_per_user=means["throughput_per_user"],
        empty_prob_per_user=means["empty_prob_per_user"],
        collision_fraction=float(means["collision_fraction"]),
        clean_tx_fraction_per_user=means["clean_tx_fraction_per_user"],
        clean_tx_given_busy=means["clean_tx_given_busy"],
        mean_queue=means["mean_queue"],
        queue_drift=means["queue_drift"],
        stable_verdict=np.all([x.stable for x in reps], axis=0),
        replications=r,
        ci_halfwidth=ci,
        arrivals=[x.arrivals for x in reps],
        departures=[x.departures for x in reps],
        final_queue=[x.final_queue for x in reps],
    )


def run_replications(config: SimConfig) -> SimMetrics:
    """Independent replications on streams ``(seed, 0) ... (seed, R-1)``, aggregated."""
    return aggregate([simulate_replication(config, k) for k in range(config.replications)])


def run_simulation(config: SimConfig) -> SimMetrics:
    """Simulate ``config``; with one replication the CIs are reported as unavailable."""
    return run_replications(config)


def write_trace_csv(path, config: SimConfig, replication: int = 0) -> Path:
    """Per-slot, per-user trace of one replication.

    Output has ``n_slots * n_users`` rows; keep ``n_slots`` modest.
    """
    rep = simulate_replication(config, replication, keep_trajectory=True, trace=True)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "user", "queue_len", "transmitted", "collided", "succeeded"])
        for t in range(config.n_slots):
            for i in range(config.params.n_users):
                e = int(rep.events[t, i])
                w.writerow([t, i, int(rep.trajectory[t, i]),
                            int(bool(e & TX)), int(bool(e & COLLIDED)), int(bool(e & SUCCEEDED))])
    return path
