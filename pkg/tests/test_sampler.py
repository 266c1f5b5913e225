import numpy as np
import pytest
from scipy import stats

from oracles import (
    circle_density_by_hand,
    exact_location_scale_posterior,
    manifold_log_density_fd,
    standardized_huber_stats,
    vm_log_density,
    vmf_cosine_cdf,
)
from restricted_lm.errors import ConfigError, ImproperPosterior, ZeroScale
from restricted_lm.estimators import EstimatorSpec, irls_solve
from restricted_lm.geometry import build_geometry, sample_sphere
from restricted_lm.sampler import (
    VMF,
    AugmentedState,
    ChainConfig,
    Constraint,
    NIGPrior,
    ThetaState,
    conjugate_posterior,
    gibbs_theta_normal,
    h_transform,
    inverse_h,
    mh_augment_step,
    proposal_log_density,
    run_chain,
    run_hierarchical,
    run_student_t_baseline,
    t_prior_adjustment,
)
from restricted_lm.sampler.proposal import log_acceptance_ratio, log_coarea, sample_vmf_step, uniform_log_base


def _huber_case(n=10, p=2, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n)] + [rng.standard_normal(n) for _ in range(p - 1)])
    y = X @ np.arange(1.0, p + 1) + rng.standard_normal(n)
    y[0] += 6.0
    return X, y, rng


# ---------------------------------------------------------------------------
# h and its inverse
# ---------------------------------------------------------------------------


def test_h_identity_when_statistic_already_matches():
    X, y, _ = _huber_case()
    c = Constraint.from_observed(X, y, EstimatorSpec.huber())
    z = y.copy()
    np.testing.assert_allclose(h_transform(z, c), y, atol=1e-10)


def test_h_mean_sd_three_points():
    X = np.ones((3, 1))
    c = Constraint.from_observed(X, np.array([-1.0, 0.0, 1.0]) * np.sqrt(1.5), EstimatorSpec.least_squares())
    assert abs(c.target.b[0]) < 1e-14 and abs(c.target.s - 1.0) < 1e-12
    z = np.array([1.0, -2.0, 1.0]) / np.sqrt(6.0)
    np.testing.assert_allclose(h_transform(z, c), np.sqrt(3.0) * z, atol=1e-12)


def test_h_round_trip_statistic_huber():
    X, y, rng = _huber_case()
    spec = EstimatorSpec.huber()
    c = Constraint.from_observed(X, y, spec)
    for _ in range(10):
        yy = h_transform(sample_sphere(c.geom, rng), c)
        st_ = irls_solve(X, yy, spec)
        assert st_.deviation(c.target) < 1e-8


def test_h_rejects_zero_scale():
    X = np.ones((5, 1))
    c = Constraint.from_observed(X, np.array([0.0, 1.0, 3.0, -2.0, 0.5]), EstimatorSpec.huber())
    with pytest.raises(ZeroScale):
        h_transform(np.zeros(5), c)


def test_inverse_h_fixed_point_and_shift():
    X, _, rng = _huber_case()
    g = build_geometry(X)
    z = sample_sphere(g, rng)
    np.testing.assert_allclose(inverse_h(z, g), z, atol=1e-12)
    np.testing.assert_allclose(inverse_h(z + X @ [3.0, -7.0], g), z, atol=1e-12)


@pytest.mark.parametrize("name", ["huber", "tukey"])
def test_inverse_h_round_trip(name):
    X, y, rng = _huber_case(seed=1)
    c = Constraint.from_observed(X, y, EstimatorSpec.from_name(name))
    worst = 0.0
    for _ in range(50):
        yy = h_transform(sample_sphere(c.geom, rng), c)
        worst = max(worst, np.max(np.abs(h_transform(inverse_h(yy, c.geom), c) - yy)))
    assert worst < 1e-8


# ---------------------------------------------------------------------------
# proposal density
# ---------------------------------------------------------------------------


def test_proposal_density_sufficient_statistics():
    X, y, rng = _huber_case()
    c = Constraint.from_observed(X, y, EstimatorSpec.least_squares())
    yy = h_transform(sample_sphere(c.geom, rng), c)
    ev = proposal_log_density(yy, c)
    assert abs(ev.log_cos_gamma) < 1e-12
    assert ev.log_vol_P == 0.0
    r = np.linalg.norm(c.geom.project_complement(yy))
    expected = uniform_log_base(c.geom) - (c.n - c.p - 1) * np.log(r)
    assert abs(ev.log_density - expected) < 1e-10


def test_proposal_density_circle_oracle():
    rng = np.random.default_rng(13)
    X = np.ones((3, 1))
    c = Constraint.from_observed(X, np.array([0.3, -1.1, 2.0]), EstimatorSpec.least_squares())
    kappa, mu = 1.7, 0.4
    e1 = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    e2 = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)

    def base(z):
        return vm_log_density(np.arctan2(z @ e2, z @ e1), kappa, mu)

    for _ in range(20):
        phi = rng.uniform(-np.pi, np.pi)
        yy = h_transform(np.cos(phi) * e1 + np.sin(phi) * e2, c)
        ours = proposal_log_density(yy, c, log_base=base).log_density
        ref, phi_back = circle_density_by_hand(yy, kappa, mu)
        assert abs(np.angle(np.exp(1j * (phi_back - phi)))) < 1e-10
        assert abs(ours - ref) / abs(ref) < 1e-8


@pytest.mark.parametrize("n,p,name", [(3, 1, "huber"), (5, 1, "huber"), (6, 2, "tukey"), (7, 2, "huber")])
def test_proposal_density_matches_finite_difference_pushforward(n, p, name):
    X, y, rng = _huber_case(n, p, seed=n)
    c = Constraint.from_observed(X, y, EstimatorSpec.from_name(name))
    W = c.geom.W
    for _ in range(5):
        z0 = sample_sphere(c.geom, rng)
        # tangent of the sphere inside C(X)^perp at z0
        E = W @ np.linalg.svd(np.eye(n - p) - np.outer(W.T @ z0, W.T @ z0))[0][:, : n - p - 1]
        yy = h_transform(z0, c)
        ours = proposal_log_density(yy, c).log_density
        ref = manifold_log_density_fd(lambda z: h_transform(z, c, check=False), z0, E,
                                      lambda z: uniform_log_base(c.geom))
        assert abs(ours - ref) < 1e-5 * max(1.0, abs(ref))


def test_proposal_density_assembly():
    X, y, rng = _huber_case()
    c = Constraint.from_observed(X, y, EstimatorSpec.huber())
    for _ in range(10):
        ev = proposal_log_density(h_transform(sample_sphere(c.geom, rng), c), c)
        parts = ev.log_base - (c.n - c.p - 1) * np.log(ev.r) + ev.log_cos_gamma + ev.log_vol_P
        assert abs(parts - ev.log_density) < 1e-12
        assert ev.log_cos_gamma <= 0.0 and np.isfinite(ev.log_density)


def test_proposal_density_self_consistency():
    # uniform draws pushed through h, reweighted to the vMF-base density,
    # must reproduce direct vMF draws pushed through h
    rng = np.random.default_rng(21)
    X = np.ones((5, 1))
    c = Constraint.from_observed(X, np.array([0.2, -0.4, 1.3, 0.1, 4.0]), EstimatorSpec.huber())
    mu_dir = inverse_h(np.array([1.0, 0.0, 0.0, 0.0, -1.0]), c.geom)
    kappa = 2.0
    dim = c.n - c.p
    from scipy.special import ive

    log_c = (0.5 * dim - 1) * np.log(kappa) - 0.5 * dim * np.log(2 * np.pi) - np.log(ive(0.5 * dim - 1, kappa)) - kappa

    def vmf_base(z):
        return log_c + kappa * (z @ mu_dir)

    f = lambda y: np.max(y) - np.min(y)  # noqa: E731
    N = 4000
    fu, lw = np.empty(N), np.empty(N)
    for i in range(N):
        yy = h_transform(sample_sphere(c.geom, rng), c, check=False)
        fu[i] = f(yy)
        lw[i] = proposal_log_density(yy, c, vmf_base).log_density - proposal_log_density(yy, c).log_density
    w = np.exp(lw - lw.max())
    w /= w.sum()
    direct = np.array([f(h_transform(sample_vmf_step(mu_dir, kappa, c.geom, rng), c, check=False))
                       for _ in range(N)])
    # resample the weighted set and compare distributions
    resampled = fu[rng.choice(N, size=N, p=w)]
    assert stats.ks_2samp(resampled, direct).pvalue > 0.01


# ---------------------------------------------------------------------------
# MH step and Gibbs update
# ---------------------------------------------------------------------------


def test_identity_proposal_ratio_is_one():
    X, y, _ = _huber_case()
    c = Constraint.from_observed(X, y, EstimatorSpec.huber())
    s = AugmentedState.at(y, c)
    assert log_acceptance_ratio(s, s, X, np.array([1.0, 2.0]), 1.3) == 0.0


def test_mh_step_stays_on_manifold():
    X, y, rng = _huber_case()
    c = Constraint.from_observed(X, y, EstimatorSpec.huber())
    s = AugmentedState.at(y, c)
    acc = 0
    for _ in range(50):
        s, a, failed = mh_augment_step(s, c.target.b, c.target.s**2, c, rng)
        acc += a
        assert c.satisfied_by(s.y)
    assert acc > 0


def test_coarea_constant_for_least_squares():
    X, y, _ = _huber_case(9, 2, seed=33)
    c = Constraint.from_observed(X, y, EstimatorSpec.least_squares())
    rng = np.random.default_rng(34)
    vals = [log_coarea(h_transform(sample_sphere(c.geom, rng), c), c) for _ in range(20)]
    assert np.ptp(vals) < 1e-10


def test_coarea_ratio_terms():
    X, y, rng = _huber_case(8, 2, seed=35)
    c = Constraint.from_observed(X, y, EstimatorSpec.huber())
    a = AugmentedState.at(y, c, coarea=True)
    assert a.log_coarea == pytest.approx(log_coarea(y, c), abs=1e-12)
    b = AugmentedState.at(h_transform(sample_sphere(c.geom, rng), c), c, coarea=True)
    plain = log_acceptance_ratio(AugmentedState.at(a.y, c), AugmentedState.at(b.y, c), X, c.target.b, 1.0)
    assert log_acceptance_ratio(a, b, X, c.target.b, 1.0) == pytest.approx(plain + a.log_coarea - b.log_coarea)


def _bm_se(x, nb=40):
    m = x[: len(x) // nb * nb].reshape(nb, -1).mean(axis=1)
    return m.std(ddof=1) / np.sqrt(nb)


def test_coarea_chain_matches_exact_location_scale_posterior():
    y = np.array([-0.8, 0.1, 0.3, 0.9, 3.5])
    X = np.ones((5, 1))
    spec = EstimatorSpec.huber()
    t = irls_solve(X, y, spec)
    b_e, s_e = standardized_huber_stats(5, 200_000, np.random.default_rng(36))
    beta, sig2, w = exact_location_scale_posterior(
        (t.b[0], t.s), b_e, s_e, lambda b: stats.norm.logpdf(b, 0, 2), lambda v: stats.invgamma.logpdf(v, 3, scale=2))
    prior = NIGPrior.scalar(0.0, 2.0, 3.0, 2.0)
    out = run_chain(y, X, prior, spec, ChainConfig(iterations=20000, burn_in=1000, thin=1, seed=37, coarea=True))
    for draws, ref in ((out.beta[:, 0], w @ beta), (out.sigma2, w @ sig2)):
        assert abs(draws.mean() - ref) < 4 * _bm_se(draws) + 2e-3


def test_gibbs_conjugate_moments():
    rng = np.random.default_rng(31)
    y = np.array([1.2, 0.4, 2.2, 1.7])
    X = np.ones((4, 1))
    prior = NIGPrior.scalar(0.5, 2.0, 3.0, 2.0, conjugate=True)
    # hand-derived NIG update, n = 4, p = 1
    k0, m0, a0, b0 = 1 / 4.0, 0.5, 3.0, 2.0
    kn = k0 + 4
    mn = (k0 * m0 + y.sum()) / kn
    an = a0 + 2
    bn = b0 + 0.5 * (np.sum((y - y.mean()) ** 2) + k0 * 4 / kn * (y.mean() - m0) ** 2)
    post = conjugate_posterior(y, X, prior)
    assert abs(post.mean[0] - mn) < 1e-12 and abs(post.b - bn) < 1e-12
    N = 100_000
    draws = [gibbs_theta_normal(y, X, prior, rng) for _ in range(N)]
    b = np.array([d.beta[0] for d in draws])
    s2 = np.array([d.sigma2 for d in draws])
    beta_var = bn / (an - 1) / kn
    assert abs(b.mean() - mn) < 3 * np.sqrt(beta_var / N)
    assert abs(s2.mean() - bn / (an - 1)) < 3 * s2.std() / np.sqrt(N)
    # the beta marginal is a t with 2 * an dof, so its variance estimate has extra kurtosis
    assert abs(b.var() - beta_var) < 4 * beta_var * np.sqrt(2.0 / N + 6.0 / (2 * an - 4) / N)


def test_gibbs_tight_prior_and_empty_data():
    rng = np.random.default_rng(32)
    y = np.array([10.0, 11.0, 12.0])
    tight = NIGPrior.scalar(-4.0, 1e-8, 3.0, 2.0)
    d = gibbs_theta_normal(y, np.ones((3, 1)), tight, rng, current=ThetaState([0.0], 1.0))
    assert abs(d.beta[0] + 4.0) < 1e-6
    prior = NIGPrior.scalar(1.0, 2.0, 4.0, 3.0, conjugate=True)
    s2 = np.array([gibbs_theta_normal(np.empty(0), np.empty((0, 1)), prior, rng).sigma2 for _ in range(20000)])
    assert stats.kstest(s2, stats.invgamma(4.0, scale=3.0).cdf).pvalue > 0.01


def test_independent_prior_needs_current_state():
    prior = NIGPrior.scalar(0.0, 1.0, 2.0, 2.0)
    with pytest.raises(ConfigError):
        gibbs_theta_normal(np.ones(3), np.ones((3, 1)), prior, np.random.default_rng(0))


def test_prior_validation():
    with pytest.raises(ConfigError):
        NIGPrior(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 1.0, 1.0)
    with pytest.raises(ConfigError):
        NIGPrior.scalar(0.0, 1.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------


def test_chain_config_validation():
    with pytest.raises(ConfigError):
        ChainConfig(iterations=10, burn_in=10)
    with pytest.raises(ConfigError):
        ChainConfig(proposal=VMF)
    with pytest.raises(ConfigError):
        ChainConfig(proposal=VMF, kappa=-1.0)
    assert ChainConfig(iterations=20, burn_in=5, thin=5).n_kept == 3


def test_chain_determinism_and_constraint():
    X, y, _ = _huber_case(12, 2, seed=4)
    prior = NIGPrior(np.zeros(2), np.eye(2) * 25.0, 3.0, 3.0)
    spec = EstimatorSpec.huber()
    cfg = ChainConfig(iterations=400, burn_in=100, thin=1, seed=9, keep_augmented=True)
    a = run_chain(y, X, prior, spec, cfg)
    b = run_chain(y, X, prior, spec, cfg)
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.sigma2, b.sigma2)
    assert a.acceptance_rate == a.accepted / a.attempted
    assert 0.0 < a.acceptance_rate < 1.0
    target = irls_solve(X, y, spec)
    for yy in a.augmented[::10]:
        assert irls_solve(X, yy, spec).deviation(target) <= 10 * spec.tol
    assert a.summary()["draws"] == 300


def test_vmf_chain_runs():
    X, y, _ = _huber_case(12, 2, seed=4)
    prior = NIGPrior(np.zeros(2), np.eye(2) * 25.0, 3.0, 3.0)
    out = run_chain(y, X, prior, EstimatorSpec.tukey(),
                    ChainConfig(iterations=200, burn_in=50, thin=1, seed=1, proposal=VMF, kappa=50.0))
    assert out.acceptance_rate > 0.2


def test_vmf_cosine_law():
    rng = np.random.default_rng(41)
    g = build_geometry(np.ones((6, 1)))
    mu = sample_sphere(g, rng)
    kappa = 3.0
    t = np.array([sample_vmf_step(mu, kappa, g, rng) @ mu for _ in range(4000)])
    assert stats.kstest(t, vmf_cosine_cdf(kappa, 5)).pvalue > 0.01
    with pytest.raises(ConfigError):
        sample_vmf_step(mu, 0.0, g, rng)


# ---------------------------------------------------------------------------
# hierarchical
# ---------------------------------------------------------------------------


def _groups(G=4, n=6, seed=51):
    rng = np.random.default_rng(seed)
    return [rng.normal(th, 1.5, n) for th in rng.normal(0.0, 2.0, G)]


def test_hierarchical_needs_three_groups():
    with pytest.raises(ImproperPosterior):
        run_hierarchical(_groups(2), 3.0, 3.0, None, ChainConfig(iterations=10, burn_in=0))
    with pytest.raises(ConfigError):
        run_hierarchical([np.ones(2)] * 3, 3.0, 3.0, None, ChainConfig(iterations=10, burn_in=0))


def test_hierarchical_groups_stay_on_their_manifolds():
    groups = _groups()
    spec = EstimatorSpec.huber()
    out = run_hierarchical(groups, 3.0, 3.0, spec, ChainConfig(iterations=150, burn_in=50, thin=1, seed=2))
    for y_obs, y_aug in zip(groups, out.augmented_final):
        X = np.ones((y_obs.size, 1))
        assert irls_solve(X, y_aug, spec).deviation(irls_solve(X, y_obs, spec)) <= 10 * spec.tol
    assert np.all(out.acceptance_rate > 0)


def test_hierarchical_sufficient_statistics_collapse_to_full_data():
    groups = _groups(G=5, n=8, seed=52)
    cfg = ChainConfig(iterations=6000, burn_in=1000, thin=1, seed=3)
    full = run_hierarchical(groups, 3.0, 3.0, None, cfg)
    restricted = run_hierarchical(groups, 3.0, 3.0, EstimatorSpec.least_squares(), cfg)

    def bm_se(x, nb=25):
        m = x[: len(x) // nb * nb].reshape(nb, -1).mean(axis=1)
        return m.std(ddof=1) / np.sqrt(nb)

    for i in range(5):
        a, b = full.theta[:, i], restricted.theta[:, i]
        assert abs(a.mean() - b.mean()) < 4 * np.hypot(bm_se(a), bm_se(b))
    assert abs(full.mu.mean() - restricted.mu.mean()) < 4 * np.hypot(bm_se(full.mu), bm_se(restricted.mu))


# ---------------------------------------------------------------------------
# Student-t baseline
# ---------------------------------------------------------------------------


def test_t_prior_adjustment():
    prior = NIGPrior.scalar(0.0, 1.0, 5.0, 10.0)
    assert t_prior_adjustment(prior, 5.0).b0 == pytest.approx(6.0)
    with pytest.raises(ConfigError):
        run_student_t_baseline(np.ones(5), np.ones((5, 1)), prior, 2.0, ChainConfig(iterations=10, burn_in=0))


def test_t_large_nu_matches_normal():
    rng = np.random.default_rng(61)
    y = rng.normal(3.0, 2.0, 20)
    X = np.ones((20, 1))
    prior = NIGPrior.scalar(0.0, 10.0, 3.0, 4.0)
    cfg = ChainConfig(iterations=11000, burn_in=1000, thin=2, seed=5)
    t_out = run_student_t_baseline(y, X, prior, 1e6, cfg)
    n_out = run_chain(y, X, prior, None, cfg.__class__(**{**cfg.as_dict(), "seed": 6}))
    assert stats.ks_2samp(t_out.beta[:, 0], n_out.beta[:, 0]).statistic < 0.05


def test_t_downweights_contamination():
    rng = np.random.default_rng(62)
    y = rng.normal(0.0, 1.0, 20)
    y[:3] += np.array([12.0, -9.0, 15.0])
    X = np.ones((20, 1))
    prior = NIGPrior.scalar(0.0, 10.0, 3.0, 4.0)
    cfg = ChainConfig(iterations=4000, burn_in=500, thin=1, seed=7)
    t_sd = run_student_t_baseline(y, X, prior, 5.0, cfg).beta[:, 0].std()
    n_sd = run_chain(y, X, prior, None, cfg).beta[:, 0].std()
    assert t_sd < n_sd
