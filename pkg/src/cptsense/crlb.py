"""Cramer-Rao lower bounds for tracking an OU detuning from photon counts.

The closed forms assume the per-photon information density ``g(sigma)``
is constant in time; :func:`fisher_matrices` and :func:`crlb_discrete`
build the finite Fisher matrix explicitly to check them.
"""
import json
from dataclasses import asdict, dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import LinAlgError, solveh_banded

from ._validation import check_int, check_positive
from .exceptions import AssumptionViolated, NotPositiveDefinite, QuadratureNotConverged

QUAD_NODES = 64
QUAD_RTOL = 1e-3


def information_density(p, x):
    """``(d rho_ee / dx)^2 / rho_ee`` in closed form.

    The common factor ``(bias - x)^2`` is cancelled analytically, so with
    ``gamma_s = 0`` the value at the dark point is the finite limit
    ``4 rho_max / broadening^2`` rather than 0/0.
    """
    d = p.bias - np.asarray(x, dtype=float)
    b = p.broadening
    c = p.gamma_s + b
    d2 = d * d
    base = 4.0 * p.rho_max * c * c * b * b / (d2 + c * c) ** 3
    if p.gamma_s == 0:
        return base
    return base * d2 / (d2 + p.gamma_s * c)


def _gh_expectation(func, sigma, n):
    z, w = hermegauss(n)
    return float(np.sum(w * func(sigma * z)) / np.sqrt(2.0 * np.pi))


def g_of_sigma(p, sigma, nodes=QUAD_NODES):
    """Expected information density over ``x ~ N(0, sigma^2)``.

    Gauss-Hermite quadrature with ``nodes`` points, checked against twice
    as many.

    Raises
    ------
    QuadratureNotConverged
        If the refinement changes the value by more than 0.1 %.
    """
    check_positive("sigma", sigma)
    g = _gh_expectation(lambda x: information_density(p, x), sigma, nodes)
    g2 = _gh_expectation(lambda x: information_density(p, x), sigma, 2 * nodes)
    if abs(g2 - g) > QUAD_RTOL * abs(g2):
        raise QuadratureNotConverged(f"g changed from {g:.6e} to {g2:.6e} on refinement")
    return g2


def info_product(p, b):
    """Dimensionless ``tau_n * eta * gamma * sigma^2 * g(sigma)``."""
    return b.tau_n * p.eta * p.gamma * b.sigma ** 2 * g_of_sigma(p, b.sigma)


def _full(sigma2, s):
    return sigma2 / np.sqrt(1.0 + 2.0 * s)


def _causal_factor(s):
    return 2.0 / (1.0 + 4.0 / np.sqrt(1.0 + 32.0 * s))


def crlb_full(p, b):
    """Bound on the variance when the whole record is used (smoothing)."""
    return float(_full(b.sigma ** 2, info_product(p, b)))


def crlb_causal(p, b):
    """Bound on the variance when only past counts are used (filtering).

    Raises
    ------
    AssumptionViolated
        If the information product is not above 2. The value is attached
        to the exception.
    """
    s = info_product(p, b)
    value = float(_full(b.sigma ** 2, s) * _causal_factor(s))
    if s <= 2:
        raise AssumptionViolated(f"information product {s:.3g} <= 2", value, s)
    return value


@dataclass(frozen=True)
class CrlbReport:
    g_value: float
    info_product: float
    var_full: float
    var_causal: float
    assumption_ok: bool
    inputs: dict

    def to_json(self, **kw):
        return json.dumps(asdict(self), **kw)


def crlb_report(p, b):
    g = g_of_sigma(p, b.sigma)
    s = b.tau_n * p.eta * p.gamma * b.sigma ** 2 * g
    full = float(_full(b.sigma ** 2, s))
    inputs = {"cpt": asdict(p), "bath": asdict(b)}
    return CrlbReport(g, s, full, full * float(_causal_factor(s)), bool(s > 2), inputs)


@dataclass(frozen=True)
class FisherMatrices:
    """Measurement (diagonal) and prior (tridiagonal) Fisher information.

    Stored in banded form: ``fm_diag`` is the diagonal of F_M, and
    ``fb_diag`` / ``fb_off`` the main and first off-diagonal of F_B.
    """

    fm_diag: np.ndarray
    fb_diag: np.ndarray
    fb_off: np.ndarray
    tau: float

    @property
    def n_steps(self):
        return self.fm_diag.size

    def dense(self):
        fm = np.diag(self.fm_diag)
        fb = np.diag(self.fb_diag) + np.diag(self.fb_off, 1) + np.diag(self.fb_off, -1)
        return fm, fb


def fisher_matrices(p, b, tau, n_steps):
    """Fisher information for ``n_steps`` bins of width ``tau``.

    Each bin contributes ``gamma * eta * tau * g(sigma)`` of measurement
    information; the prior term is the precision matrix of the stationary
    AR(1) sequence sampled every ``tau``.
    """
    check_positive("tau", tau)
    n = check_int("n_steps", n_steps, 2)
    g = g_of_sigma(p, b.sigma)
    a = b.decay(tau)
    q = b.innovation_std(tau) ** 2
    fb_diag = np.full(n, (1.0 + a * a) / q)
    fb_diag[0] = 1.0 / b.sigma ** 2 + a * a / q
    fb_diag[-1] = 1.0 / q
    fb_off = np.full(n - 1, -a / q)
    fm_diag = np.full(n, p.gamma * p.eta * tau * g)
    return FisherMatrices(fm_diag, fb_diag, fb_off, tau)


def crlb_discrete(fm, index):
    """Diagonal element ``(F^{-1})_{ii}`` of the inverse Fisher matrix.

    ``index`` may be an int, ``"middle"`` or ``"end"``.  F_M already
    holds per-bin information, so this is directly a variance bound for
    the detuning in bin ``index``.
    """
    n = fm.n_steps
    if index == "middle":
        index = n // 2
    elif index == "end":
        index = n - 1
    index = int(index)
    if not -n <= index < n:
        raise IndexError(index)
    ab = np.zeros((2, n))
    ab[0, 1:] = fm.fb_off
    ab[1] = fm.fb_diag + fm.fm_diag
    e = np.zeros(n)
    e[index] = 1.0
    try:
        return float(solveh_banded(ab, e)[index])
    except LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
