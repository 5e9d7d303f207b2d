"""Closed-form M/M/1 probabilities for pause triggering and rate decrease,
plus Monte-Carlo estimators used to check them.

Sizes are in bytes, rates in 1/s (arrivals) or bytes/s (queue growth).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

KB = 1024


@dataclass(frozen=True)
class ModelParams:
    K: float                  # pause threshold, bytes
    S: float                  # mean flow size, bytes
    rho: float                # utilization lam / mu
    K0: float = 0.0           # headroom above K, bytes
    n: int = 32               # ingress ports feeding one switch
    lam: float = 0.0          # flow arrivals per second
    C: float = 10e9           # link capacity, bits/s

    def validate(self) -> None:
        if self.K < 0 or self.K0 < 0:
            raise ValueError("K and K0 must be >= 0")
        if self.S <= 0:
            raise ValueError("mean size S must be positive")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must be in [0, 1) for a steady state, got {self.rho}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def mu(self) -> float:
        """Service rate in flows per second."""
        return self.C / 8 / self.S


def pfc_trigger_probability(p: ModelParams) -> float:
    """P{Q > K} for an M/M/1 ingress queue: exp(-(K/S)(1 - rho))."""
    p.validate()
    return math.exp(-(p.K / p.S) * (1 - p.rho))


def congestion_tree_exponent(p: ModelParams, j: int) -> float:
    """Exponent (positive) of the probability that ``j`` cascaded ingress
    ports are all above threshold."""
    if j < 1:
        raise ValueError("hop count j must be >= 1")
    p.validate()
    n = p.n
    num = n ** (j - 1) * p.K
    for i in range(1, j):
        num += n ** (i - 1) * (p.K + p.K0)
    return (num / p.S) * (1 - p.rho)


def congestion_tree_probability(p: ModelParams, j: int) -> float:
    return math.exp(-congestion_tree_exponent(p, j))


def log_congestion_tree_probability(p: ModelParams, j: int) -> float:
    """Natural log of :func:`congestion_tree_probability`; stays finite
    where the probability itself underflows to 0."""
    return -congestion_tree_exponent(p, j)


def exponential_cdf(lam: float) -> Callable[[float], float]:
    if lam < 0:
        raise ValueError("arrival rate must be >= 0")
    return lambda t: -math.expm1(-lam * t) if t > 0 else 0.0


def rate_decrease_probability(mean_size: float, r: float, interarrival_cdf) -> float:
    """P{tau < E[S]/r}: the next arrival lands before the current flow's
    bytes drain at growth rate ``r``.

    ``interarrival_cdf`` is a callable or any object with a ``cdf`` method
    (e.g. a frozen scipy distribution).
    """
    if r <= 0:
        raise ValueError("queue growth rate r must be positive")
    if mean_size < 0:
        raise ValueError("mean size must be >= 0")
    cdf = getattr(interarrival_cdf, "cdf", interarrival_cdf)
    return float(cdf(mean_size / r))


def rate_decrease_probability_exp(lam: float, mean_size: float, r: float) -> float:
    """P{tau < S/r} averaged over exponential sizes with exponential
    interarrivals: lam*E[S] / (r + lam*E[S])."""
    if r <= 0:
        raise ValueError("queue growth rate r must be positive")
    if lam < 0 or mean_size < 0:
        raise ValueError("lam and mean size must be >= 0")
    x = lam * mean_size
    return x / (r + x)


@dataclass(frozen=True)
class Estimate:
    value: float
    low: float
    high: float
    stderr: float
    samples: int

    def covers(self, x: float) -> bool:
        return self.low <= x <= self.high


def rate_decrease_monte_carlo(lam: float, mean_size: float, r: float, samples: int = 10**6,
                              seed: int = 0) -> Estimate:
    """Sample (tau, S) pairs and count tau < S/r."""
    if lam <= 0:
        return Estimate(0.0, 0.0, 0.0, 0.0, samples)
    rng = np.random.default_rng(seed)
    tau = rng.exponential(1 / lam, samples)
    size = rng.exponential(mean_size, samples)
    hits = tau < size / r
    p = float(hits.mean())
    se = math.sqrt(p * (1 - p) / samples)
    return Estimate(p, p - 1.96 * se, p + 1.96 * se, se, samples)


def _workload_after_arrivals(lam: float, mu: float, mean_size: float, count: int,
                             rng: np.random.Generator, w0: float) -> np.ndarray:
    """Bytes in the system just after each of ``count`` arrivals join it.

    Lindley's recursion W' = max(0, W + X - C*A) unrolled as a running
    minimum of the net-input random walk.
    """
    C = mu * mean_size
    sizes = rng.exponential(mean_size, count)
    gaps = rng.exponential(1 / lam, count) * C
    # pre-arrival workload of arrival k: P_k - min(-w0, P_1..P_k), P_0 = 0
    steps = np.empty(count)
    steps[0] = 0.0
    np.subtract(sizes[:-1], gaps[1:], out=steps[1:])
    walk = np.cumsum(steps)
    floor = np.minimum.accumulate(np.minimum(walk, -w0))
    return walk - floor + sizes


def mm1_monte_carlo(lam: float, mu: float, K: float, mean_size: float, samples: int = 10**6,
                    seed: int = 0, batches: int = 40, chunk: int = 2_000_000) -> Estimate:
    """Fraction of arrivals that push the workload above ``K`` bytes in an
    M/M/1 queue, with a batch-means 95% confidence interval.

    The queue starts from its stationary workload law so no warm-up is
    discarded.
    """
    if lam < 0 or mu <= 0:
        raise ValueError("need lam >= 0 and mu > 0")
    if lam >= mu:
        raise ValueError(f"lam ({lam}) must be below mu ({mu}) for a steady state")
    if samples < batches * 2:
        raise ValueError("need at least two samples per batch")
    if lam == 0:
        return Estimate(0.0, 0.0, 0.0, 0.0, samples)
    rng = np.random.default_rng(seed)
    rho = lam / mu
    w = rng.exponential(mean_size / (1 - rho)) if rng.random() < rho else 0.0
    hits = np.empty(samples, dtype=bool)
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        post = _workload_after_arrivals(lam, mu, mean_size, n, rng, w)
        hits[done:done + n] = post > K
        # carry the pre-arrival workload of the next arrival into the next chunk
        w = max(0.0, post[-1] - rng.exponential(1 / lam) * mu * mean_size)
        done += n
    size = samples // batches
    means = hits[:size * batches].reshape(batches, size).mean(axis=1)
    est = float(hits.mean())
    se = float(means.std(ddof=1) / math.sqrt(batches))
    half = float(stats.t.ppf(0.975, batches - 1)) * se
    return Estimate(est, est - half, est + half, se, samples)
