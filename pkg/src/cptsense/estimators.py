"""Causal estimators of the bath detuning from photon counts.

Three estimators share a scikit-learn transformer interface: ``fit``
validates hyper-parameters and precomputes grids, ``transform`` maps count
series (rows) to estimate series of the same shape, and ``score`` returns
the negative mean squared error against the true bath values.

* :class:`AverageCountEstimator` inverts the lineshape on a sliding count
  window.
* :class:`SimpleBayesEstimator` accumulates Poisson likelihoods on a grid.
* :class:`OUBayesEstimator` additionally propagates the posterior with the
  OU transition kernel between bins.

The module-level functions (:func:`init_prior`, :func:`bayes_update`, ...)
expose the individual filter steps on a :class:`PosteriorGrid`.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_counts, check_int, check_positive, check_series
from .bath import BathParams
from .cpt import CptParams, rho_ee_analytic
from .exceptions import AlignmentError, DegeneratePosterior

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class EstimatorConfig:
    cpt: CptParams
    assumed_bath: BathParams
    update_interval: float = 1e-5
    grid_halfwidth: float = 5.0
    grid_size: int = 251
    avg_window_bins: int = 100

    def __post_init__(self):
        check_positive("update_interval", self.update_interval)
        if self.grid_halfwidth < 4:
            raise ValueError("grid_halfwidth must be >= 4")
        check_int("grid_size", self.grid_size, 101)
        if self.grid_size % 2 == 0:
            raise ValueError("grid_size must be odd so that x = 0 is a node")
        check_int("avg_window_bins", self.avg_window_bins, 1)

    def estimator_params(self):
        return dict(cpt=self.cpt, assumed_bath=self.assumed_bath,
                    update_interval=self.update_interval)


@dataclass
class PosteriorGrid:
    """Probability density over x sampled on a uniform grid."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def spacing(self):
        return float(self.nodes[1] - self.nodes[0])

    def total(self):
        return float(self.weights.sum() * self.spacing)

    def copy(self):
        return PosteriorGrid(self.nodes, self.weights.copy())


@dataclass
class EstimateSeries:
    t_start: float
    update_interval: float
    estimates: np.ndarray
    valid_from: int = 0

    def __len__(self):
        return self.estimates.size

    @property
    def times(self):
        return self.t_start + self.update_interval * np.arange(self.estimates.size)

    @property
    def valid(self):
        mask = np.zeros(self.estimates.size, dtype=bool)
        mask[self.valid_from:] = True
        return mask


def grid_nodes(sigma, halfwidth, size):
    return np.linspace(-halfwidth * sigma, halfwidth * sigma, size)


def _normalize(w, dx):
    return w / (w.sum(axis=-1, keepdims=True) * dx)


def ou_kernel(nodes, tau, bath):
    """Column-stochastic transition matrix ``K[i, j] ~ p(x_i | x_j)`` over one bin."""
    a = bath.decay(tau)
    std = bath.innovation_std(tau)
    z = (nodes[:, None] - a * nodes[None, :]) / std
    logk = -0.5 * z * z
    logk -= logk.max(axis=0, keepdims=True)
    k = np.exp(logk)
    return k / k.sum(axis=0, keepdims=True)


def _stationary(nodes, sigma):
    w = np.exp(-0.5 * (nodes / sigma) ** 2)
    return _normalize(w, nodes[1] - nodes[0])


class _GridBayesEstimator(TransformerMixin, BaseEstimator):
    _propagate = False

    def __init__(self, cpt=None, assumed_bath=None, update_interval=1e-5,
                 grid_halfwidth=5.0, grid_size=251):
        self.cpt = cpt
        self.assumed_bath = assumed_bath
        self.update_interval = update_interval
        self.grid_halfwidth = grid_halfwidth
        self.grid_size = grid_size

    def fit(self, X=None, y=None):
        """Build the grid, prior and (for the OU filter) transition kernel.

        ``X`` is accepted for pipeline compatibility and otherwise ignored.
        """
        if not isinstance(self.cpt, CptParams):
            raise ValueError("cpt must be a CptParams instance")
        bath = self.assumed_bath if self.assumed_bath is not None else BathParams()
        if not isinstance(bath, BathParams):
            raise ValueError("assumed_bath must be a BathParams instance")
        cfg = EstimatorConfig(self.cpt, bath, self.update_interval,
                              self.grid_halfwidth, self.grid_size)
        self.nodes_ = grid_nodes(bath.sigma, cfg.grid_halfwidth, cfg.grid_size)
        self.spacing_ = float(self.nodes_[1] - self.nodes_[0])
        self.prior_ = _stationary(self.nodes_, bath.sigma)
        self.mean_counts_ = self.cpt.eta * self.update_interval * self.cpt.gamma \
            * rho_ee_analytic(self.cpt, self.nodes_)
        self.kernel_ = ou_kernel(self.nodes_, self.update_interval, bath) \
            if self._propagate else None
        return self

    def _loglik_table(self, values):
        y = np.asarray(values, dtype=float)[:, None]
        # log Poisson pmf without the y! term, which cancels on normalisation
        return xlogy(y, self.mean_counts_[None, :]) - self.mean_counts_[None, :]

    def filter(self, X, return_posterior=False):
        """Run the filter on a batch of count series.

        Returns the posterior-mean estimates, and optionally the final
        posterior weights for each series.
        """
        check_is_fitted(self, "nodes_")
        X = check_counts(X)
        n_runs, n_bins = X.shape
        values, codes = np.unique(X, return_inverse=True)
        codes = codes.reshape(X.shape)
        table = self._loglik_table(values)
        lik = np.exp(table - table.max(axis=1, keepdims=True))
        dx = self.spacing_
        post = np.tile(self.prior_, (n_runs, 1))
        est = np.empty((n_runs, n_bins))
        kt = self.kernel_.T if self._propagate else None
        for n in range(n_bins):
            if kt is not None:
                post = post @ kt
            post = post * lik[codes[:, n]]
            peak = post.max(axis=1)
            if np.any(peak < UNDERFLOW):
                r = int(np.argmin(peak))
                raise DegeneratePosterior(
                    f"posterior underflow at bin {n} (run {r})", bin_index=n, run_index=r)
            post = _normalize(post, dx)
            est[:, n] = post @ self.nodes_ * dx
        return (est, post) if return_posterior else est

    def transform(self, X):
        """Estimate series (rad/s), same shape as the 2-D count array."""
        return self.filter(X)

    def score(self, X, y):
        """Negative mean squared error of the estimates against truth ``y``."""
        est = self.transform(X)
        truth = check_series(y, "y")
        if truth.shape != est.shape:
            raise AlignmentError(f"truth shape {truth.shape} != estimate shape {est.shape}")
        return -float(np.mean((est - truth) ** 2))


class SimpleBayesEstimator(_GridBayesEstimator):
    """Grid Bayes filter with no dynamics between bins.

    The posterior after bin n is the prior for bin n+1, so evidence
    accumulates without forgetting.
    """

    _propagate = False


class OUBayesEstimator(_GridBayesEstimator):
    """Grid Bayes filter with OU propagation between bins.

    Before each update the posterior is convolved with the exact OU
    transition density over one update interval, using the assumed bath
    parameters.
    """

    _propagate = True


class AverageCountEstimator(TransformerMixin, BaseEstimator):
    """Invert the lineshape using the counts in a trailing window.

    Uses the branch ``x <= bias`` that contains the bath mean. Bins before
    the first complete window are reported as 0 and flagged invalid via
    ``valid_from_``.
    """

    def __init__(self, cpt=None, update_interval=1e-5, window_bins=100):
        self.cpt = cpt
        self.update_interval = update_interval
        self.window_bins = window_bins

    def fit(self, X=None, y=None):
        if not isinstance(self.cpt, CptParams):
            raise ValueError("cpt must be a CptParams instance")
        check_positive("update_interval", self.update_interval)
        check_int("window_bins", self.window_bins, 1)
        self.valid_from_ = self.window_bins - 1
        return self

    def invert(self, rho_hat):
        """Detuning ``x <= bias`` at which the lineshape equals ``rho_hat``."""
        p = self.cpt
        width = p.gamma_s + p.broadening
        floor = p.rho_max * p.gamma_s / width
        rho = np.clip(rho_hat, floor, p.rho_max * (1 - 1e-9))
        # rho (d^2 + w^2) = rho_max (d^2 + gamma_s w)  solved for d^2
        d2 = width * (rho * width - p.rho_max * p.gamma_s) / (p.rho_max - rho)
        return p.bias - np.sqrt(np.maximum(d2, 0.0))

    def transform(self, X):
        check_is_fitted(self, "valid_from_")
        X = check_counts(X)
        w = self.window_bins
        csum = np.cumsum(X, axis=1)
        window = np.zeros(X.shape, dtype=float)
        if X.shape[1] >= w:
            window[:, w - 1:] = csum[:, w - 1:]
            window[:, w:] -= csum[:, :-w]
        p = self.cpt
        rho_hat = window / (p.eta * p.gamma * self.update_interval * w)
        est = self.invert(rho_hat)
        est[:, : self.valid_from_] = 0.0
        return est

    def score(self, X, y):
        est = self.transform(X)
        truth = check_series(y, "y")
        if truth.shape != est.shape:
            raise AlignmentError(f"truth shape {truth.shape} != estimate shape {est.shape}")
        m = slice(self.valid_from_, None)
        return -float(np.mean((est[:, m] - truth[:, m]) ** 2))


# -- step-level operations on a PosteriorGrid --------------------------------

def _fitted(cfg, cls=OUBayesEstimator):
    return cls(grid_halfwidth=cfg.grid_halfwidth, grid_size=cfg.grid_size,
               **cfg.estimator_params()).fit()


def init_prior(cfg):
    """Stationary N(0, sigma'^2) prior on the estimator grid."""
    est = _fitted(cfg, SimpleBayesEstimator)
    return PosteriorGrid(est.nodes_, est.prior_.copy())


def bayes_update(grid, y, cfg):
    """Multiply by the Poisson likelihood of ``y`` counts and renormalise."""
    if y < 0:
        raise ValueError("count must be nonnegative")
    p = cfg.cpt
    mean = p.eta * cfg.update_interval * p.gamma * rho_ee_analytic(p, grid.nodes)
    loglik = xlogy(y, mean) - mean
    w = grid.weights * np.exp(loglik - loglik.max())
    if w.max() < UNDERFLOW:
        raise DegeneratePosterior("posterior underflow")
    return PosteriorGrid(grid.nodes, _normalize(w, grid.spacing))


def ou_propagate(grid, cfg):
    """Chapman-Kolmogorov step with the assumed OU kernel over one interval."""
    k = ou_kernel(grid.nodes, cfg.update_interval, cfg.assumed_bath)
    return PosteriorGrid(grid.nodes, _normalize(k @ grid.weights, grid.spacing))


def posterior_mean(grid):
    return float(np.sum(grid.nodes * grid.weights) * grid.spacing)


def _as_counts(counts):
    return counts.counts if hasattr(counts, "counts") else np.asarray(counts)


def _series(counts, cfg, est, valid_from=0):
    t0 = getattr(counts, "t_start", 0.0)
    return EstimateSeries(t0, cfg.update_interval, est, valid_from)


def run_simple_bayes(counts, cfg):
    est = _fitted(cfg, SimpleBayesEstimator).transform(_as_counts(counts))[0]
    return _series(counts, cfg, est)


def run_ou_bayes(counts, cfg):
    est = _fitted(cfg, OUBayesEstimator).transform(_as_counts(counts))[0]
    return _series(counts, cfg, est)


def run_average_count(counts, cfg):
    model = AverageCountEstimator(cfg.cpt, cfg.update_interval, cfg.avg_window_bins).fit()
    est = model.transform(_as_counts(counts))[0]
    return _series(counts, cfg, est, model.valid_from_)


def per_run_mse(estimates, truths, discard_before=0.0):
    """Mean squared error of each (estimate, truth) pair over valid bins."""
    if isinstance(estimates, EstimateSeries):
        estimates, truths = [estimates], [truths]
    out = []
    for est, truth in zip(estimates, truths, strict=True):
        x = truth.samples if hasattr(truth, "samples") else np.asarray(truth, dtype=float)
        if x.shape != est.estimates.shape:
            raise AlignmentError(f"{x.size} truth samples vs {len(est)} estimates")
        dt = getattr(truth, "dt", est.update_interval)
        if not np.isclose(dt, est.update_interval, rtol=1e-9):
            raise AlignmentError("truth and estimate time steps differ")
        mask = est.valid & (est.times >= discard_before - 1e-12)
        if not mask.any():
            raise AlignmentError("no valid bins after discard_before")
        out.append(float(np.mean((est.estimates[mask] - x[mask]) ** 2)))
    return np.array(out)


def estimation_variance(estimates, truths, discard_before=0.0):
    """Pooled mean squared error over all valid bins at or after ``discard_before``.

    Accepts a single series or parallel sequences of series.  Truths may be
    :class:`~cptsense.bath.BathPath` objects sampled once per bin or plain
    arrays.
    """
    return float(np.mean(per_run_mse(estimates, truths, discard_before)))
