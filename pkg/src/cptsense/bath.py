"""Ornstein-Uhlenbeck model of the fluctuating spin bath.

Paths are generated with the exact AR(1) discretisation of the OU
process, so the step size only sets the sampling resolution and never
introduces discretisation error.
"""
import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ._validation import check_positive
from .cpt import MHZ
from .exceptions import MismatchedPaths
from .seeding import derive_rng


@dataclass(frozen=True)
class BathParams:
    """Memory time ``tau_n`` (s) and stationary standard deviation ``sigma`` (rad/s)."""

    tau_n: float = 1e-3
    sigma: float = 0.13 * MHZ

    def __post_init__(self):
        check_positive("tau_n", self.tau_n)
        check_positive("sigma", self.sigma)

    @classmethod
    def from_mhz(cls, tau_n_s=1e-3, sigma_mhz=0.13):
        return cls(tau_n=tau_n_s, sigma=sigma_mhz * MHZ)

    @property
    def t2_star(self):
        """Inhomogeneous dephasing time ``sqrt(2) / sigma`` in seconds."""
        return np.sqrt(2.0) / self.sigma

    def decay(self, dt):
        return np.exp(-dt / self.tau_n)

    def innovation_std(self, dt):
        """Standard deviation of the AR(1) innovation over a step ``dt``."""
        return np.sqrt(self.sigma ** 2 * -np.expm1(-2.0 * dt / self.tau_n))


@dataclass(frozen=True)
class BathPath:
    """Samples of x(t) at ``t_start + k*dt``, each held over ``[t_k, t_k + dt)``."""

    t_start: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        check_positive("dt", self.dt)
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def times(self):
        return self.t_start + self.dt * np.arange(self.samples.size)

    @property
    def duration(self):
        return self.dt * self.samples.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_rad_per_s"])
            for t, x in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(x))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, x = data[:, 0], data[:, 1]
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(t_start=float(t[0]), dt=dt, samples=x)


def ou_step(x_prev, dt, b, draw):
    """One exact OU transition driven by the standard normal ``draw``."""
    check_positive("dt", dt)
    return x_prev * b.decay(dt) + b.innovation_std(dt) * draw


def n_samples(duration, dt):
    """Number of samples of width ``dt`` covering ``duration`` (at least one)."""
    return max(int(np.floor(duration / dt + 1e-9)), 1)


def ou_path(b, duration, dt, seed=None, t_start=0.0):
    """Sample an OU path started from the stationary distribution.

    ``seed`` may be an int, a :class:`numpy.random.Generator`, or None.
    """
    check_positive("dt", dt)
    if duration < dt * (1 - 1e-9):
        raise ValueError(f"duration {duration} shorter than dt {dt}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = n_samples(duration, dt)
    draws = rng.standard_normal(n)
    a = b.decay(dt)
    x0 = b.sigma * draws[0]
    if n == 1:
        return BathPath(t_start, dt, np.array([x0]))
    innov = b.innovation_std(dt) * draws[1:]
    # x_k = a x_{k-1} + innov_k, seeded with x0
    rest, _ = lfilter([1.0], [1.0, -a], innov, zi=[a * x0])
    return BathPath(t_start, dt, np.concatenate(([x0], rest)))


def ou_paths(b, duration, dt, master_seed, n_paths):
    """Independent paths, path ``r`` drawn from stream ``(master_seed, r, "bath")``."""
    return [ou_path(b, duration, dt, derive_rng(master_seed, r, "bath")) for r in range(n_paths)]


def ou_transition_pdf(x_next, x_prev, dt, b):
    """Density of ``x(t + dt)`` given ``x(t) = x_prev``."""
    check_positive("dt", dt)
    mean = np.asarray(x_prev) * b.decay(dt)
    var = b.innovation_std(dt) ** 2
    z = np.asarray(x_next) - mean
    return np.exp(-0.5 * z * z / var) / np.sqrt(2.0 * np.pi * var)


def autocorrelation_estimate(paths, max_lag):
    """Ensemble- and time-averaged ``<x(t0) x(t0 + t)>``.

    Returns
    -------
    lags : ndarray
        Lag times in seconds, ``0, dt, ..., K*dt`` with ``K*dt <= max_lag``.
    r : ndarray
        Autocorrelation estimate at each lag.
    """
    paths = list(paths)
    if len(paths) < 2:
        raise MismatchedPaths("need at least two paths")
    dt, n = paths[0].dt, len(paths[0])
    for p in paths[1:]:
        if not np.isclose(p.dt, dt, rtol=1e-12, atol=0) or len(p) != n:
            raise MismatchedPaths("paths differ in dt or length")
    n_lag = min(int(np.floor(max_lag / dt + 1e-9)), n - 1)
    x = np.stack([p.samples for p in paths])
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft, axis=1)
    acov = np.fft.irfft(spec * spec.conj(), nfft, axis=1)[:, : n_lag + 1]
    pairs = n - np.arange(n_lag + 1)
    r = acov.sum(axis=0) / (pairs * len(paths))
    return dt * np.arange(n_lag + 1), r
