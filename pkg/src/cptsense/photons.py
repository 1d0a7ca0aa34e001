"""Photon emission and detection time series.

Two routes produce counts:

* :func:`sse_trajectory` unravels the master equation into quantum-jump
  trajectories (every emitted photon is an event), followed by
  :func:`thin_detect` and :func:`bin_events`.
* :func:`steady_emission_counts` assumes the emitter adiabatically follows
  the bath and draws Poisson counts from the steady-state rate.
"""
import csv
import enum
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import check_positive
from .bath import BathPath
from .cpt import hamiltonian, jump_operators, rho_ee_analytic
from .exceptions import StepTooCoarse

MAX_GAMMA_DT = 0.05
NORM_SLACK = 1e-9  # allowed relative norm growth per RK4 step (round-off)


class Channel(enum.IntEnum):
    TO_STATE_0 = 0
    TO_STATE_1 = 1


@dataclass(frozen=True)
class EmissionEvent:
    time: float
    channel: Channel


@dataclass(frozen=True)
class CountSeries:
    """Photon counts in consecutive bins of width ``bin_width`` from ``t_start``."""

    bin_width: float
    t_start: float
    counts: np.ndarray

    def __post_init__(self):
        check_positive("bin_width", self.bin_width)
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise ValueError("counts must be 1-D")
        if counts.size and (counts.min() < 0 or not np.all(np.isfinite(counts))):
            raise ValueError("counts must be finite and nonnegative")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    def __len__(self):
        return self.counts.size

    @property
    def times(self):
        return self.t_start + self.bin_width * np.arange(self.counts.size)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_index", "t_s", "count"])
            for i, (t, c) in enumerate(zip(self.times, self.counts)):
                w.writerow([i, repr(float(t)), int(c)])


@dataclass
class Trajectory:
    """Output of :func:`sse_trajectory`."""

    events: list
    rho_ee: np.ndarray = None  # sampled once per bath step, if requested
    max_norm_growth: float = 0.0
    dt_int: float = 0.0


def events_to_csv(events, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "channel"])
        for ev in events:
            w.writerow([repr(float(ev.time)), int(ev.channel)])


def _rk4_propagator(h_eff, dt):
    # RK4 applied to the linear ODE psi' = A psi is exactly this polynomial in A;
    # h_eff may be a stack of matrices
    a = -1j * dt * h_eff
    a2 = a @ a
    a3 = a2 @ a
    return np.eye(3) + a + a2 / 2.0 + a3 / 6.0 + a3 @ a / 24.0


@numba.njit(cache=True, nogil=True)
def _jump_kernel(props, n_sub, dt_int, t_start, ops, emitting, rng, record):
    n_seg = props.shape[0]
    n_ops = ops.shape[0]
    psi = np.zeros(3, dtype=np.complex128)
    psi[0] = 1.0
    norm2 = 1.0
    u = rng.random()
    ev_t = []
    ev_c = []
    rho_trace = np.zeros(n_seg if record else 0)
    max_growth = 0.0
    tmp = np.zeros(3, dtype=np.complex128)
    weights = np.zeros(n_ops)
    step = 0
    for seg in range(n_seg):
        m = props[seg]
        for _ in range(n_sub):
            for i in range(3):
                tmp[i] = m[i, 0] * psi[0] + m[i, 1] * psi[1] + m[i, 2] * psi[2]
            new2 = 0.0
            for i in range(3):
                psi[i] = tmp[i]
                new2 += psi[i].real ** 2 + psi[i].imag ** 2
            growth = (new2 - norm2) / norm2
            if growth > max_growth:
                max_growth = growth
            norm2 = new2
            step += 1
            if norm2 <= u:
                total = 0.0
                for k in range(n_ops):
                    w = 0.0
                    for i in range(3):
                        acc = ops[k, i, 0] * psi[0] + ops[k, i, 1] * psi[1] + ops[k, i, 2] * psi[2]
                        w += acc.real ** 2 + acc.imag ** 2
                    weights[k] = w
                    total += w
                r = rng.random() * total
                k = 0
                while k < n_ops - 1 and r >= weights[k]:
                    r -= weights[k]
                    k += 1
                for i in range(3):
                    tmp[i] = ops[k, i, 0] * psi[0] + ops[k, i, 1] * psi[1] + ops[k, i, 2] * psi[2]
                nrm = 0.0
                for i in range(3):
                    nrm += tmp[i].real ** 2 + tmp[i].imag ** 2
                nrm = np.sqrt(nrm)
                for i in range(3):
                    psi[i] = tmp[i] / nrm
                norm2 = 1.0
                u = rng.random()
                if emitting[k] >= 0:
                    ev_t.append(t_start + step * dt_int)
                    ev_c.append(emitting[k])
        if record:
            pe = psi[2].real ** 2 + psi[2].imag ** 2
            rho_trace[seg] = pe / norm2
    return ev_t, ev_c, rho_trace, max_growth


def sse_trajectory(p, bath, dt_int=None, seed=None, record_rho=False):
    """Quantum-jump trajectory of the Lambda system under a bath path.

    The unnormalised state evolves under the non-Hermitian effective
    Hamiltonian with the bath held constant over each ``bath.dt``; a jump
    occurs at the end of the first step where the squared norm falls below
    a uniform draw.  The collapse channel is chosen with probability
    proportional to ``|L_k psi|^2``; only the two radiative channels emit
    a photon.  Starts in ``|0>``.

    Parameters
    ----------
    dt_int : float, optional
        Upper bound on the integration step. The actual step divides
        ``bath.dt`` evenly. Defaults to ``0.05 / gamma``.

    Returns
    -------
    Trajectory
    """
    if dt_int is None:
        dt_int = MAX_GAMMA_DT / p.gamma
    check_positive("dt_int", dt_int)
    if dt_int * p.gamma > MAX_GAMMA_DT * (1 + 1e-12):
        raise StepTooCoarse(f"dt_int*gamma = {dt_int * p.gamma:.3g} exceeds {MAX_GAMMA_DT}")
    if bath.dt < dt_int * (1 - 1e-9):
        raise ValueError("bath.dt must be at least dt_int")
    n_sub = int(np.ceil(bath.dt / dt_int - 1e-9))
    step = bath.dt / n_sub

    ops = np.array(jump_operators(p), dtype=np.complex128)
    decay = sum(op.conj().T @ op for op in ops)
    h_eff = np.broadcast_to(hamiltonian(p, 0.0) - 0.5j * decay, (len(bath), 3, 3)).copy()
    h_eff[:, 1, 1] -= bath.samples
    props = np.ascontiguousarray(_rk4_propagator(h_eff, step))
    emitting = np.array([0, 1, -1, -1], dtype=np.int64)

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    t, c, rho, growth = _jump_kernel(props, n_sub, step, bath.t_start, ops, emitting, rng,
                                     record_rho)
    events = [EmissionEvent(float(ti), Channel(int(ci))) for ti, ci in zip(t, c)]
    return Trajectory(events=events, rho_ee=rho if record_rho else None,
                      max_norm_growth=float(growth), dt_int=step)


def thin_detect(events, eta, seed=None):
    """Keep each event independently with probability ``eta``."""
    check_positive("eta", eta)
    if eta > 1:
        raise ValueError("eta must be <= 1")
    events = list(events)
    if eta == 1.0 or not events:
        return events
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = rng.random(len(events)) < eta
    return [ev for ev, k in zip(events, keep) if k]


def bin_events(events, bin_width, t_start, duration):
    """Histogram event times into bins ``[t_start + n*w, t_start + (n+1)*w)``."""
    check_positive("bin_width", bin_width)
    n_bins = max(int(np.floor(duration / bin_width + 1e-9)), 1)
    t = np.array([ev.time if isinstance(ev, EmissionEvent) else ev for ev in events], dtype=float)
    t = t[t >= t_start]
    idx = np.floor((t - t_start) / bin_width).astype(np.int64)
    idx = idx[idx < n_bins]
    return CountSeries(bin_width, t_start, np.bincount(idx, minlength=n_bins))


def bin_rates(p, bath, bin_width):
    """Mean detection rate (counts/s) in each bin, averaging over bath samples.

    ``bin_width`` must be a multiple of ``bath.dt``.
    """
    ratio = bin_width / bath.dt
    per_bin = int(round(ratio))
    if per_bin < 1 or abs(ratio - per_bin) > 1e-6 * ratio:
        raise ValueError("bin_width must be a positive multiple of bath.dt")
    n_bins = len(bath) // per_bin
    rate = p.eta * p.gamma * rho_ee_analytic(p, bath.samples[: n_bins * per_bin])
    return rate.reshape(n_bins, per_bin).mean(axis=1)


def bin_truth(bath, bin_width):
    """Bath value at the start of each bin (the quantity estimated per bin)."""
    per_bin = int(round(bin_width / bath.dt))
    n_bins = len(bath) // per_bin
    return bath.samples[: n_bins * per_bin : per_bin].copy()


def steady_emission_counts(p, bath, bin_width, seed=None):
    """Poisson detected counts with the adiabatic steady-state rate."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mean = bin_rates(p, bath, bin_width) * bin_width
    return CountSeries(bin_width, bath.t_start, rng.poisson(mean))
