"""Rayleigh block-fading uplink: gain sampling and Monte Carlo capacity estimates.

Gains are power gains |h|^2, exponential with a configured mean (Rayleigh
amplitude). Noise variance is 1, so ``power`` is a linear SNR. All logs are
base 2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DegenerateCapacity, ZeroConditioningHits
from .rng import make_generator

# Fixed so that the stream partition (and hence every estimate) is independent
# of how callers batch their work.
BATCH_SIZE = 1 << 16


@dataclass
class ChannelParams:
    n_users: int
    power: float
    mean_gain_base: np.ndarray
    mean_gain_cross: np.ndarray

    def __post_init__(self):
        self.mean_gain_base = np.asarray(self.mean_gain_base, dtype=float)
        self.mean_gain_cross = np.asarray(self.mean_gain_cross, dtype=float)
        n = self.n_users
        if n < 2:
            raise ValueError("n_users must be at least 2")
        if self.mean_gain_base.shape != (n,):
            raise ValueError(f"mean_gain_base must have shape ({n},)")
        if self.mean_gain_cross.shape != (n, n):
            raise ValueError(f"mean_gain_cross must have shape ({n}, {n})")
        if not np.isfinite(self.power) or self.power < 0:
            raise ValueError("power must be finite and non-negative")
        if np.any(self.mean_gain_base <= 0):
            raise ValueError("mean_gain_base entries must be positive")
        off_diag = self.mean_gain_cross[~np.eye(n, dtype=bool)]
        if np.any(off_diag <= 0):
            raise ValueError("off-diagonal mean_gain_cross entries must be positive")


@dataclass
class ChannelState:
    gain_base: np.ndarray
    gain_cross: np.ndarray


@dataclass
class CapacityEstimate:
    value: float
    std_error: float
    n_samples: int
    n_conditioning_hits: int

    def to_record(self, user: int) -> dict:
        return {
            "user": user,
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "n_conditioning_hits": self.n_conditioning_hits,
        }


@dataclass
class RhoEstimate:
    """Secrecy ratios with the estimates they were built from."""

    values: np.ndarray
    secrecy: list
    ergodic: list
    clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_clamped(self) -> int:
        return int(np.count_nonzero(self.clamped))


class _Moments:
    """Running count/mean/M2, merged batch-wise with Chan's update."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: np.ndarray):
        nb = x.size
        if nb == 0:
            return
        mb = float(np.mean(x))
        m2b = float(np.sum((x - mb) ** 2))
        n = self.n + nb
        delta = mb - self.mean
        self.mean += delta * nb / n
        self.m2 += m2b + delta * delta * self.n * nb / n
        self.n = n

    def std_error(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


def _draw(params: ChannelParams, rng: np.random.Generator, size: int):
    n = params.n_users
    base = rng.standard_exponential((size, n)) * params.mean_gain_base
    cross_means = params.mean_gain_cross.copy()
    np.fill_diagonal(cross_means, 0.0)
    cross = rng.standard_exponential((size, n, n)) * cross_means
    return base, cross


def sample_channel_state(params: ChannelParams, rng_seed: int) -> ChannelState:
    """Draw one fading state; deterministic in ``rng_seed``."""
    base, cross = _draw(params, make_generator(rng_seed), 1)
    return ChannelState(gain_base=base[0], gain_cross=cross[0])


def iter_channel_batches(
    params: ChannelParams, n_samples: int, seed: int
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(gain_base, gain_cross)`` batches totalling ``n_samples`` states.

    Batch ``b`` is drawn from stream ``(seed, b)``, so a prefix of the sample
    stream is identical for any ``n_samples``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    for b, start in enumerate(range(0, n_samples, BATCH_SIZE)):
        size = min(BATCH_SIZE, n_samples - start)
        yield _draw(params, make_generator(seed, b), size)


def best_user_mask(gain_base: np.ndarray, i: int) -> np.ndarray:
    """Membership of each state in A(i); ties go to the lowest index."""
    return np.argmax(gain_base, axis=-1) == i


def estimate_secrecy_capacity(
    i: int,
    params: ChannelParams,
    n_samples: int,
    seed: int,
    positive_part: bool = False,
) -> CapacityEstimate:
    """Monte Carlo secrecy capacity of user ``i``.

    For each eavesdropper ``j != i`` the log-capacity difference between the
    base-station link and the ``i -> j`` link is averaged over states in
    which user ``i`` has the strongest base-station gain. The smallest of
    those means is returned, floored at zero. With ``positive_part`` each
    per-sample difference is floored before averaging instead.
    """
    P = params.power
    others = [j for j in range(params.n_users) if j != i]
    moments = {j: _Moments() for j in others}
    hits = 0
    for base, cross in iter_channel_batches(params, n_samples, seed):
        mask = best_user_mask(base, i)
        hits += int(np.count_nonzero(mask))
        c_main = np.log2(1.0 + P * base[mask, i])
        for j in others:
            d = c_main - np.log2(1.0 + P * cross[mask, i, j])
            if positive_part:
                d = np.maximum(d, 0.0)
            moments[j].add(d)
    if hits == 0:
        raise ZeroConditioningHits(f"no sample in A({i}) out of {n_samples}")
    worst = min(others, key=lambda j: moments[j].mean)
    m = moments[worst]
    return CapacityEstimate(
        value=max(m.mean, 0.0),
        std_error=m.std_error(),
        n_samples=n_samples,
        n_conditioning_hits=hits,
    )


def estimate_ergodic_capacity(
    i: int,
    params: ChannelParams,
    n_samples: int,
    seed: int,
    conditioned: bool = False,
) -> CapacityEstimate:
    """Monte Carlo mean of ``log2(1 + P*|h_i|^2)``.

    With ``conditioned=True`` the mean is taken over A(i) only, on the same
    sample stream that ``estimate_secrecy_capacity`` uses.
    """
    P = params.power
    m = _Moments()
    hits = 0
    for base, _ in iter_channel_batches(params, n_samples, seed):
        g = base[:, i]
        if conditioned:
            mask = best_user_mask(base, i)
            hits += int(np.count_nonzero(mask))
            g = g[mask]
        else:
            hits += g.size
        m.add(np.log2(1.0 + P * g))
    if conditioned and hits == 0:
        raise ZeroConditioningHits(f"no sample in A({i}) out of {n_samples}")
    return CapacityEstimate(m.mean, m.std_error(), n_samples, hits)


def compute_rho(
    params: ChannelParams,
    n_samples: int,
    seed: int,
    positive_part: bool = False,
) -> RhoEstimate:
    """Secrecy ratio ``R_s,i / R_i`` per user, clamped to [0, 1].

    Every clamp from above is reported through a ``RuntimeWarning`` and the
    ``clamped`` mask of the result.
    """
    n = params.n_users
    ergodic = [estimate_ergodic_capacity(i, params, n_samples, seed) for i in range(n)]
    for i, est in enumerate(ergodic):
        if not est.value > 0:
            raise DegenerateCapacity(
                f"ergodic capacity of user {i} is {est.value}; check power and gains"
            )
    secrecy = [
        estimate_secrecy_capacity(i, params, n_samples, seed, positive_part)
        for i in range(n)
    ]
    raw = np.array([s.value / e.value for s, e in zip(secrecy, ergodic)])
    clamped = (raw > 1.0) | (raw < 0.0)
    if clamped.any():
        warnings.warn(
            f"secrecy ratio clamped to [0, 1] for users {np.flatnonzero(clamped).tolist()}"
            f" (raw values {raw[clamped].tolist()})",
            RuntimeWarning,
            stacklevel=2,
        )
    return RhoEstimate(
        values=np.clip(raw, 0.0, 1.0),
        secrecy=secrecy,
        ergodic=ergodic,
        clamped=clamped,
    )


def outage_failure_prob(target_rate: float, power: float, mean_gain: float) -> float:
    """Probability that ``log2(1 + P*g) < target_rate`` for exponential ``g``."""
    if target_rate < 0 or power <= 0 or mean_gain <= 0:
        raise ValueError("target_rate must be >= 0; power and mean_gain > 0")
    with np.errstate(over="ignore"):
        threshold = np.expm1(target_rate * np.log(2.0))
    return float(-np.expm1(-threshold / (power * mean_gain)))
