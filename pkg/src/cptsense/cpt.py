"""Excited-state population of a driven Lambda system.

States are ordered ``(|0>, |1>, |e>)``.  All frequencies are angular
(rad/s).  The bath shifts the Raman detuning, so the dark point sits at
``x = bias`` and the effective detuning is ``bias - x``.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive
from .exceptions import SingularLiouvillian

TWO_PI = 2.0 * np.pi
MHZ = TWO_PI * 1e6  # rad/s per MHz of nu = omega / 2pi


@dataclass(frozen=True)
class CptParams:
    """Drive and decay parameters of the Lambda system.

    Parameters
    ----------
    rabi : float
        Rabi frequency of both optical fields, rad/s.
    gamma : float
        Spontaneous emission rate of ``|e>``, rad/s.
    bias : float
        Raman detuning at zero bath field, rad/s.
    kappa : float, optional
        Optical dipole decoherence rate. Defaults to ``gamma / 2``.
    gamma_s : float
        Ground-state spin decoherence rate. Defaults to 0.
    eta : float
        Overall collection/detection efficiency in (0, 1].
    """

    rabi: float
    gamma: float
    bias: float = 0.0
    kappa: float = None
    gamma_s: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        check_positive("rabi", self.rabi)
        check_positive("gamma", self.gamma)
        if not np.isfinite(self.bias):
            raise ValueError(f"bias must be finite, got {self.bias!r}")
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.gamma / 2.0)
        check_positive("kappa", self.kappa)
        check_positive("gamma_s", self.gamma_s, allow_zero=True)
        check_positive("eta", self.eta)
        if self.eta > 1:
            raise ValueError(f"eta must be <= 1, got {self.eta!r}")

    @classmethod
    def from_mhz(cls, rabi_mhz, gamma_mhz, bias_mhz=0.0, kappa_mhz=None,
                 gamma_s_mhz=0.0, eta=1.0):
        """Build from frequencies quoted as nu = omega / 2pi in MHz."""
        kappa = None if kappa_mhz is None else kappa_mhz * MHZ
        return cls(rabi=rabi_mhz * MHZ, gamma=gamma_mhz * MHZ, bias=bias_mhz * MHZ,
                   kappa=kappa, gamma_s=gamma_s_mhz * MHZ, eta=eta)

    @property
    def broadening(self):
        """Power broadening ``rabi**2 / (2 kappa)``."""
        return self.rabi ** 2 / (2.0 * self.kappa)

    @property
    def rho_max(self):
        """Off-resonant plateau ``rabi**2 / (2 gamma kappa)``."""
        return self.rabi ** 2 / (2.0 * self.gamma * self.kappa)

    @property
    def cooperativity(self):
        """``rabi**2 / (2 kappa gamma_s)``; ``inf`` when ``gamma_s == 0``."""
        if self.gamma_s == 0:
            return float("inf")
        return self.broadening / self.gamma_s


def _lineshape_terms(p, x):
    delta = p.bias - np.asarray(x, dtype=float)
    width = p.gamma_s + p.broadening
    return delta, width


def rho_ee_analytic(p, x):
    """Steady-state excited population in the weak-excitation limit.

    Vectorised over ``x`` (bath detuning, rad/s).
    """
    delta, width = _lineshape_terms(p, x)
    d2 = delta * delta
    # rho_max * (d2 + gamma_s*width) / (d2 + width**2), cancellation-free form
    rho = p.rho_max * (d2 + p.gamma_s * width) / (d2 + width * width)
    rho = np.maximum(rho, 0.0)
    return rho if rho.ndim else float(rho)


def rho_ee_derivative(p, x):
    """Derivative of :func:`rho_ee_analytic` with respect to ``x``."""
    delta, width = _lineshape_terms(p, x)
    denom = delta * delta + width * width
    # d rho / d delta, then chain rule d delta / dx = -1
    drho = -2.0 * p.rho_max * p.broadening * width * delta / (denom * denom)
    return drho if drho.ndim else float(drho)


def detection_rate(p, x):
    """Mean detected photon rate ``eta * gamma * rho_ee`` in counts/s."""
    return p.eta * p.gamma * rho_ee_analytic(p, x)


def hamiltonian(p, x):
    """Rotating-frame Hamiltonian (hbar = 1) for bath detuning ``x``."""
    h = np.zeros((3, 3), dtype=complex)
    h[2, 0] = h[0, 2] = h[2, 1] = h[1, 2] = p.rabi / 2.0
    h[1, 1] = p.bias - x
    return h


def jump_operators(p):
    """Collapse operators ``[L_0, L_1, L_spin, L_optical]``.

    The first two are the radiative decays ``|e> -> |0>`` and ``|e> -> |1>``
    at rate gamma/2 each.  Pure dephasing terms reproduce ``gamma_s`` for
    the ground coherence and the excess ``kappa - gamma/2`` for the optical
    coherences; they are zero with the default parameters.
    """
    if p.kappa < p.gamma / 2.0 * (1 - 1e-12):
        raise ValueError("kappa below gamma/2 cannot be represented by a Lindblad model")
    extra = max(p.kappa - p.gamma / 2.0, 0.0)
    e = np.eye(3)
    return [
        np.sqrt(p.gamma / 2.0) * np.outer(e[0], e[2]),
        np.sqrt(p.gamma / 2.0) * np.outer(e[1], e[2]),
        np.sqrt(2.0 * p.gamma_s) * np.outer(e[1], e[1]),
        np.sqrt(2.0 * extra) * np.outer(e[2], e[2]),
    ]


def liouvillian(p, x):
    """9x9 Liouvillian acting on the row-major vectorised density matrix."""
    h = hamiltonian(p, x)
    eye = np.eye(3)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op in jump_operators(p):
        ldl = op.conj().T @ op
        lv += np.kron(op, op.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
    return lv


def liouvillian_steady_state(p, x, rcond=1e-14):
    """Exact steady state of the three-level master equation.

    One row of the Liouvillian is replaced by the trace-one constraint and
    the resulting 9x9 system is solved directly.

    Raises
    ------
    SingularLiouvillian
        If the constrained system is numerically singular, i.e. the
        steady state is not unique.
    """
    lv = liouvillian(p, float(x))
    lv[0, :] = 0.0
    lv[0, [0, 4, 8]] = 1.0
    sv = np.linalg.svd(lv, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise SingularLiouvillian(
            f"steady state not unique (smallest/largest singular value {sv[-1] / sv[0]:.3e})")
    rhs = np.zeros(9, dtype=complex)
    rhs[0] = 1.0
    rho = np.linalg.solve(lv, rhs).reshape(3, 3)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def rho_ee_exact(p, x):
    """Excited population from :func:`liouvillian_steady_state` (vectorised)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([max(liouvillian_steady_state(p, xi)[2, 2].real, 0.0) for xi in xs])
    return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])
