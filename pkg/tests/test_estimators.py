import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cptsense.bath import BathParams, BathPath, ou_path
from cptsense.cpt import CptParams, rho_ee_analytic
from cptsense.estimators import (AverageCountEstimator, EstimateSeries, EstimatorConfig,
                                 OUBayesEstimator, PosteriorGrid, SimpleBayesEstimator,
                                 bayes_update, estimation_variance, init_prior, ou_propagate,
                                 posterior_mean, run_average_count, run_ou_bayes,
                                 run_simple_bayes)
from cptsense.exceptions import AlignmentError, DegeneratePosterior
from cptsense.photons import CountSeries, steady_emission_counts


@pytest.fixture
def cfg(ref_cpt, bath):
    return EstimatorConfig(cpt=ref_cpt, assumed_bath=bath, update_interval=1e-5)


@pytest.fixture
def sample_run(ref_cpt, bath):
    path = ou_path(bath, 10e-3, 1e-5, seed=123)
    counts = steady_emission_counts(ref_cpt, path, 1e-5, seed=456)
    return path, counts


def test_config_validation(ref_cpt, bath):
    for kw in (dict(grid_size=100), dict(grid_size=99), dict(grid_halfwidth=3.0),
               dict(update_interval=0.0), dict(avg_window_bins=0)):
        with pytest.raises(ValueError):
            EstimatorConfig(cpt=ref_cpt, assumed_bath=bath, **kw)


def test_init_prior(cfg, bath):
    g = init_prior(cfg)
    assert g.nodes.size == 251 and g.nodes[125] == 0.0
    assert np.all(g.weights > 0)
    assert g.total() == pytest.approx(1.0, abs=1e-9)
    assert abs(posterior_mean(g)) < 1e-12 * bath.sigma
    var = np.sum(g.nodes ** 2 * g.weights) * g.spacing
    assert var == pytest.approx(bath.sigma ** 2, rel=0.01)


def test_zero_count_moves_mass_to_dark_point(cfg, ref_cpt):
    g = init_prior(cfg)
    mean0 = posterior_mean(g)
    g1 = bayes_update(g, 0, cfg)
    assert g1.total() == pytest.approx(1.0, abs=1e-9)
    assert mean0 < posterior_mean(g1) < ref_cpt.bias


def test_uniform_prior_gives_likelihood(cfg, ref_cpt):
    nodes = init_prior(cfg).nodes
    flat = PosteriorGrid(nodes, np.full(nodes.size, 1.0 / (nodes[-1] - nodes[0] + nodes[1] - nodes[0])))
    lam = ref_cpt.eta * cfg.update_interval * ref_cpt.gamma * rho_ee_analytic(ref_cpt, nodes)
    for y in (0, 1, 3):
        post = bayes_update(flat, y, cfg)
        lik = lam ** y * np.exp(-lam)
        np.testing.assert_allclose(post.weights, lik / (lik.sum() * flat.spacing), rtol=1e-10)


def test_large_count_concentrates_on_brightest_nodes(ref_cpt, bath):
    cfg = EstimatorConfig(cpt=ref_cpt, assumed_bath=bath, update_interval=2e-6)
    nodes = np.linspace(-5, 5, 5) * bath.sigma
    grid = PosteriorGrid(nodes, np.full(5, 1.0 / (5 * nodes[1] - 5 * nodes[0])))
    lam = ref_cpt.eta * cfg.update_interval * ref_cpt.gamma * rho_ee_analytic(ref_cpt, nodes)
    assert lam.max() <= 0.1
    post = bayes_update(grid, 20, cfg)
    direct = lam ** 20 * np.exp(-lam)
    direct /= direct.sum() * grid.spacing
    np.testing.assert_allclose(post.weights, direct, rtol=1e-10)
    # grid edges, far from the dark point, are brightest
    assert np.argmax(post.weights) in (0, 4)
    assert post.weights[[0, 4]].sum() * grid.spacing > 0.99


def test_degenerate_posterior(cfg):
    nodes = init_prior(cfg).nodes
    g = PosteriorGrid(nodes, np.where(np.arange(nodes.size) == 0, 1e-320, 0.0))
    with pytest.raises(DegeneratePosterior):
        bayes_update(g, 0, cfg)


def test_propagate_memory_loss(ref_cpt, bath):
    long = EstimatorConfig(cpt=ref_cpt, assumed_bath=bath, update_interval=100 * bath.tau_n)
    g = init_prior(long)
    spike = PosteriorGrid(g.nodes, np.where(np.arange(g.nodes.size) == 40, 1 / g.spacing, 0.0))
    out = ou_propagate(spike, long)
    np.testing.assert_allclose(out.weights, g.weights, rtol=1e-6, atol=1e-12 * g.weights.max())


def test_propagate_identity_limit(ref_cpt, bath, cfg):
    short = EstimatorConfig(cpt=ref_cpt, assumed_bath=bath, update_interval=1e-9 * bath.tau_n)
    g = bayes_update(init_prior(cfg), 1, cfg)
    out = ou_propagate(g, short)
    tv = 0.5 * np.sum(np.abs(out.weights - g.weights)) * g.spacing
    assert tv < 1e-6


@pytest.mark.parametrize("j", [30, 125, 200])
def test_propagate_delta_mean(cfg, bath, j):
    g = init_prior(cfg)
    spike = PosteriorGrid(g.nodes, np.where(np.arange(g.nodes.size) == j, 1 / g.spacing, 0.0))
    out = ou_propagate(spike, cfg)
    assert out.total() == pytest.approx(1.0, abs=1e-9)
    expected = g.nodes[j] * np.exp(-cfg.update_interval / bath.tau_n)
    assert abs(posterior_mean(out) - expected) < 0.5 * g.spacing


def test_posterior_mean_basics(cfg):
    g = init_prior(cfg)
    sym = PosteriorGrid(g.nodes, np.ones(g.nodes.size) / (g.nodes.size * g.spacing))
    assert abs(posterior_mean(sym)) < 1e-9 * g.spacing
    delta = PosteriorGrid(g.nodes, np.where(np.arange(g.nodes.size) == 17, 1 / g.spacing, 0.0))
    assert posterior_mean(delta) == pytest.approx(g.nodes[17], rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=30))
def test_normalisation_preserved(counts):
    p = CptParams.from_mhz(2.8, 13.0, 0.25, eta=0.016)
    b = BathParams.from_mhz()
    cfg = EstimatorConfig(cpt=p, assumed_bath=b)
    g = init_prior(cfg)
    for y in counts:
        g = ou_propagate(g, cfg)
        assert g.total() == pytest.approx(1.0, abs=1e-9)
        g = bayes_update(g, y, cfg)
        assert g.total() == pytest.approx(1.0, abs=1e-9)
        assert np.all(g.weights >= 0)


def test_filter_matches_step_operations(cfg, sample_run):
    _, counts = sample_run
    y = counts.counts[:200]
    g = init_prior(cfg)
    steps = []
    for yn in y:
        g = bayes_update(ou_propagate(g, cfg), yn, cfg)
        steps.append(posterior_mean(g))
    batch = run_ou_bayes(y, cfg).estimates
    np.testing.assert_allclose(batch, steps, rtol=1e-9, atol=1e-9 * cfg.assumed_bath.sigma)


def test_simple_bayes_zero_counts(cfg, ref_cpt, bath):
    est = run_simple_bayes(np.zeros(1000, dtype=int), cfg).estimates
    assert np.all(np.diff(est) >= -1e-9 * bath.sigma)
    assert abs(est[-1] - ref_cpt.bias) < 0.5 * bath.sigma
    assert np.all(est <= ref_cpt.bias)


def test_ou_bayes_zero_counts_bounded(cfg, ref_cpt, bath):
    est = run_ou_bayes(np.zeros(3000, dtype=int), cfg).estimates
    assert np.all(est >= -1e-9 * bath.sigma)
    assert np.all(est <= ref_cpt.bias)
    # settles on a fixed point strictly inside (0, bias)
    assert np.std(est[-500:]) < 1e-3 * bath.sigma
    assert 0 < est[-1] < ref_cpt.bias


def test_runs_deterministic(cfg, sample_run):
    _, counts = sample_run
    for run in (run_simple_bayes, run_ou_bayes, run_average_count):
        a, b = run(counts, cfg), run(counts, cfg)
        assert a.estimates.tobytes() == b.estimates.tobytes()


def test_estimates_within_grid(cfg, sample_run, bath):
    _, counts = sample_run
    for run in (run_simple_bayes, run_ou_bayes):
        est = run(counts, cfg).estimates
        assert np.all(np.abs(est) <= 5 * bath.sigma)


def test_grid_refinement(ref_cpt, bath, sample_run):
    _, counts = sample_run
    coarse = EstimatorConfig(cpt=ref_cpt, assumed_bath=bath)
    fine = EstimatorConfig(cpt=ref_cpt, assumed_bath=bath, grid_size=501)
    for run in (run_simple_bayes, run_ou_bayes):
        diff = np.abs(run(counts, coarse).estimates - run(counts, fine).estimates)
        assert diff.max() < 0.01 * bath.sigma


def test_average_count_inversion(ref_cpt, cfg):
    m = AverageCountEstimator(ref_cpt, 1e-5, 100).fit()
    width = ref_cpt.rabi ** 2 / ref_cpt.gamma
    assert m.invert(0.0) == ref_cpt.bias
    assert m.invert(ref_cpt.rho_max / 2) == pytest.approx(ref_cpt.bias - width, rel=1e-12)
    est = run_average_count(np.zeros(300, dtype=int), cfg)
    assert est.valid_from == 99
    np.testing.assert_array_equal(est.estimates[:99], 0.0)
    np.testing.assert_array_equal(est.estimates[99:], ref_cpt.bias)


@pytest.mark.parametrize("gamma_s_mhz,kappa_mhz", [(0.01, None), (0.0, 9.0), (0.03, 8.0)])
def test_average_count_inversion_general_against_bisection(gamma_s_mhz, kappa_mhz):
    p = CptParams.from_mhz(2.8, 13.0, 0.25, kappa_mhz=kappa_mhz, gamma_s_mhz=gamma_s_mhz,
                           eta=0.016)
    m = AverageCountEstimator(p, 1e-5, 100).fit()
    floor = rho_ee_analytic(p, p.bias)
    for frac in (0.05, 0.3, 0.7, 0.95):
        target = floor + frac * (p.rho_max - floor)
        x = brentq(lambda x: rho_ee_analytic(p, x) - target, p.bias - 1e4 * p.rabi, p.bias,
                   xtol=1e-6, rtol=1e-14)
        assert m.invert(target) == pytest.approx(x, rel=1e-8)


def test_average_count_window_sum(ref_cpt):
    m = AverageCountEstimator(ref_cpt, 1e-5, 3).fit()
    y = np.array([[1, 0, 2, 0, 0, 5]])
    rho_hat = np.array([3, 2, 2, 5]) / (ref_cpt.eta * ref_cpt.gamma * 3e-5)
    np.testing.assert_allclose(m.transform(y)[0, 2:], m.invert(rho_hat), rtol=1e-12)


def test_estimation_variance_basics(bath):
    truth = ou_path(bath, 1.0, 1e-5, seed=1)
    exact = EstimateSeries(0.0, 1e-5, truth.samples.copy())
    assert estimation_variance(exact, truth) == 0.0
    zero = EstimateSeries(0.0, 1e-5, np.zeros(len(truth)))
    assert estimation_variance(zero, truth) == pytest.approx(bath.sigma ** 2, rel=0.2)
    shifted = EstimateSeries(0.0, 1e-5, truth.samples + 3.0)
    assert estimation_variance(shifted, truth, discard_before=0.5) == pytest.approx(9.0)


def test_estimation_variance_discard_and_valid(bath):
    truth = BathPath(0.0, 1.0, np.zeros(10))
    est = EstimateSeries(0.0, 1.0, np.arange(10.0), valid_from=4)
    assert estimation_variance(est, truth) == pytest.approx(np.mean(np.arange(4, 10) ** 2))
    assert estimation_variance(est, truth, discard_before=7) == pytest.approx(
        np.mean(np.arange(7, 10) ** 2))
    pooled = estimation_variance([est, est], [truth, truth], discard_before=7)
    assert pooled == pytest.approx(np.mean(np.arange(7, 10) ** 2))


def test_estimation_variance_alignment(bath):
    with pytest.raises(AlignmentError):
        estimation_variance(EstimateSeries(0.0, 1.0, np.zeros(5)), BathPath(0, 1.0, np.zeros(6)))
    with pytest.raises(AlignmentError):
        estimation_variance(EstimateSeries(0.0, 1.0, np.zeros(5)), BathPath(0, 2.0, np.zeros(5)))


def test_sklearn_interface(ref_cpt, bath, sample_run):
    path, counts = sample_run
    model = OUBayesEstimator(cpt=ref_cpt, assumed_bath=bath)
    with pytest.raises(NotFittedError):
        model.transform(counts.counts)
    params = model.get_params()
    assert params["grid_size"] == 251 and params["assumed_bath"] is bath
    twin = clone(model).set_params(grid_size=301)
    assert twin.grid_size == 301 and model.grid_size == 251
    X = np.stack([counts.counts, counts.counts])
    out = model.fit_transform(X)
    assert out.shape == X.shape
    np.testing.assert_array_equal(out[0], out[1])
    truth = np.stack([path.samples, path.samples])
    assert model.score(X, truth) == pytest.approx(-np.mean((out - truth) ** 2))
    with pytest.raises(ValueError):
        model.transform([[0, -1, 2]])
    with pytest.raises(ValueError):
        model.transform([[0.5, 1.0]])


def test_sklearn_fit_validates(bath):
    with pytest.raises(ValueError):
        SimpleBayesEstimator(cpt=None, assumed_bath=bath).fit()
    with pytest.raises(ValueError):
        AverageCountEstimator(cpt="nope").fit()


def test_filter_reports_degenerate_bin(ref_cpt):
    # an absurd count at the dark point cannot be explained by the model
    # one-second bins: zeros pin the posterior at the dark point, then a
    # huge count has vanishing likelihood everywhere the posterior lives
    model = SimpleBayesEstimator(cpt=ref_cpt, assumed_bath=BathParams(),
                                 update_interval=1.0).fit()
    with pytest.raises(DegeneratePosterior) as info:
        model.transform(np.array([[0, 0, 10 ** 6]]))
    assert info.value.bin_index == 2


def test_counts_series_input(cfg, sample_run):
    _, counts = sample_run
    shifted = CountSeries(counts.bin_width, 0.25, counts.counts)
    est = run_ou_bayes(shifted, cfg)
    assert est.t_start == 0.25 and len(est) == len(counts)
