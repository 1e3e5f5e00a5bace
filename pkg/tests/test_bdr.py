import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dwl import bdr
from dwl.bdr import BdrConfig, Prior
from dwl.datasets import make_lowrank
from dwl.errors import BadConfigError, BadShapeError, DimMismatchError, RankDeficientError
from dwl.numerics import principal_angles, seeded_rng, thin_qr


def random_state(rng, d, r, n, mode):
    x = rng.standard_normal((d, n))
    cfg = BdrConfig(r=r, prior_mode=mode, sigma_z_sq=rng.uniform(0.2, 2.0))
    state = bdr.bdr_init(x, cfg, q_init=rng.standard_normal((d, r)))
    covs = []
    for _ in range(r):
        a = rng.standard_normal((d, d))
        covs.append(a @ a.T / d + 0.1 * np.eye(d))
    phi = rng.uniform(0.5, 3.0, size=(d, r) if mode == "elementwise" else r)
    return x, cfg, dataclasses.replace(state, sigma_q=np.array(covs), phi_mean=phi)


# -- configuration --------------------------------------------------------

def test_config_defaults():
    cfg = BdrConfig(r=2)
    assert cfg.alpha_phi == 1.0 and cfg.beta_phi == 1.0
    assert cfg.max_iter == 200
    assert cfg.prior_mode is Prior.ARD


@pytest.mark.parametrize("kwargs", [{"r": 0}, {"r": 2, "sigma_z_sq": 0.0},
                                    {"r": 2, "tol": -1.0}, {"r": 2, "max_iter": 0},
                                    {"r": 2, "prior_mode": "nope"}])
def test_config_validation(kwargs):
    with pytest.raises((BadConfigError, ValueError)):
        BdrConfig(**kwargs)


def test_fit_rejects_r_above_min_dims():
    with pytest.raises(BadConfigError):
        bdr.bdr_fit(np.ones((3, 10)), BdrConfig(r=4))


# -- initialization -------------------------------------------------------

def test_init_prior_means_and_determinism():
    x = seeded_rng(0).standard_normal((6, 9))
    a = bdr.bdr_init(x, BdrConfig(r=2, prior_mode="elementwise"))
    b = bdr.bdr_init(x, BdrConfig(r=2, prior_mode="elementwise"))
    assert np.all(a.phi_mean == 1.0) and a.phi_mean.shape == (6, 2)
    assert np.array_equal(a.q_mu, b.q_mu)
    assert np.array_equal(a.sigma_q, np.broadcast_to(np.eye(6), (2, 6, 6)))


def test_init_zero_q_gives_unit_latent_covariance():
    x = seeded_rng(0).standard_normal((4, 5))
    s = bdr.bdr_init(x, BdrConfig(r=3), q_init=np.zeros((4, 3)))
    assert np.array_equal(s.z_mu, np.zeros((3, 5)))
    assert np.array_equal(s.sigma_z, np.eye(3))


def test_init_rejects_bad_shapes():
    with pytest.raises(BadShapeError):
        bdr.bdr_init(np.ones((4, 1)), BdrConfig(r=1))
    with pytest.raises(BadShapeError):
        bdr.bdr_init(np.ones((4, 5)), BdrConfig(r=1), q_init=np.ones((3, 1)))


# -- single-step updates --------------------------------------------------

def test_latents_orthonormal_q_unit_noise():
    rng = seeded_rng(1)
    q, _ = thin_qr(rng.standard_normal((5, 2)))
    x = rng.standard_normal((5, 4))
    s = bdr.bdr_init(x, BdrConfig(r=2, sigma_z_sq=1.0), q_init=q)
    np.testing.assert_allclose(s.sigma_z, 0.5 * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(s.z_mu, 0.5 * q.T @ x, atol=1e-14)


def test_latents_match_oracle():
    rng = seeded_rng(2)
    x, cfg, s = random_state(rng, 6, 2, 5, "ard")
    got = bdr.update_latents(s, x, cfg)
    z, sz = oracles.latents(s.q_mu, x, cfg.sigma_z_sq)
    assert np.abs(got.z_mu - z).max() <= 1e-10
    assert np.abs(got.sigma_z - sz).max() <= 1e-10


def test_precision_elementwise_examples():
    x = np.zeros((2, 3))
    cfg = BdrConfig(r=1, prior_mode="elementwise")
    s = bdr.bdr_init(x, cfg, q_init=np.array([[0.0], [2.0]]))
    s = dataclasses.replace(s, sigma_q=np.zeros((1, 2, 2)))
    phi = bdr.update_precision_elementwise(s, cfg).phi_mean
    np.testing.assert_allclose(phi[:, 0], [1.5, 0.5])


def test_precision_ard_examples():
    cfg = BdrConfig(r=1)
    s = bdr.bdr_init(np.zeros((4, 3)), cfg, q_init=np.zeros((4, 1)))
    s = dataclasses.replace(s, sigma_q=np.zeros((1, 4, 4)))
    assert bdr.update_precision_ard(s, cfg).phi_mean[0] == 3.0
    s = bdr.bdr_init(np.zeros((2, 3)), cfg, q_init=np.ones((2, 1)))
    s = dataclasses.replace(s, sigma_q=np.zeros((1, 2, 2)))
    assert bdr.update_precision_ard(s, cfg).phi_mean[0] == 1.0


def test_precision_mode_guard():
    s = bdr.bdr_init(np.ones((3, 4)), BdrConfig(r=1))
    with pytest.raises(BadConfigError):
        bdr.update_precision_elementwise(s, BdrConfig(r=1))


@pytest.mark.parametrize("mode", ["elementwise", "ard"])
def test_precision_match_oracle(mode):
    rng = seeded_rng(3)
    x, cfg, s = random_state(rng, 5, 3, 6, mode)
    got = bdr.update_precision(s, cfg).phi_mean
    if mode == "ard":
        want = oracles.precision_ard(s.q_mu, s.sigma_q, cfg.alpha_phi, cfg.beta_phi)
    else:
        want = oracles.precision_elementwise(s.q_mu, s.sigma_q, cfg.alpha_phi, cfg.beta_phi)
    assert np.abs(got - want).max() <= 1e-12


def test_projection_zero_data():
    cfg = BdrConfig(r=1, prior_mode="elementwise")
    s = bdr.bdr_init(np.zeros((3, 4)), cfg)
    got = bdr.update_projection(s, np.zeros((3, 4)), cfg)
    np.testing.assert_allclose(got.sigma_q[0], np.eye(3))
    assert np.all(got.q_mu == 0)
    cfg = BdrConfig(r=1)
    s = dataclasses.replace(bdr.bdr_init(np.zeros((3, 4)), cfg), phi_mean=np.array([4.0]))
    np.testing.assert_allclose(bdr.update_projection(s, np.zeros((3, 4)), cfg).sigma_q[0],
                               0.25 * np.eye(3), atol=1e-15)


@pytest.mark.parametrize("mode", ["elementwise", "ard"])
def test_projection_match_oracle(mode):
    rng = seeded_rng(4)
    x, cfg, s = random_state(rng, 5, 2, 7, mode)
    got = bdr.update_projection(s, x, cfg)
    q, covs = oracles.projection(x, s.z_mu, s.phi_mean, cfg.sigma_z_sq, mode == "ard")
    assert np.abs(got.q_mu - q).max() <= 1e-10
    assert np.abs(got.sigma_q - covs).max() <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["elementwise", "ard"]))
def test_positivity_and_spd_after_each_step(seed, mode):
    rng = seeded_rng(seed)
    x = rng.standard_normal((5, 8))
    cfg = BdrConfig(r=2, prior_mode=mode)
    s = bdr.bdr_init(x, cfg)
    for _ in range(3):
        s = bdr.cavi_step(s, x, cfg)
        assert np.all(s.phi_mean > 0)
        assert np.all(np.linalg.eigvalsh(s.sigma_z) > 0)
        for cov in s.sigma_q:
            assert np.allclose(cov, cov.T)
            assert np.all(np.linalg.eigvalsh(cov) > 0)


# -- fitting --------------------------------------------------------------

def test_fit_zero_data_is_rank_deficient():
    with pytest.raises(RankDeficientError):
        bdr.bdr_fit(np.zeros((5, 10)), BdrConfig(r=2, prior_mode="elementwise"))


def test_fit_noiseless_rank2_ard_recovers_subspace():
    ds, _ = make_lowrank(seeded_rng(5), 20, 200, 2, 0.0)
    model, _ = bdr.bdr_fit(ds.x, BdrConfig(r=2))
    oracle = bdr.pca_baseline(ds.x, 2)
    assert principal_angles(model.q_orth, oracle).max() < 0.05


def test_fit_is_deterministic():
    ds, _ = make_lowrank(seeded_rng(6), 10, 50, 2, 0.1)
    a, _ = bdr.bdr_fit(ds.x, BdrConfig(r=3))
    b, _ = bdr.bdr_fit(ds.x, BdrConfig(r=3))
    assert np.array_equal(a.q_orth, b.q_orth)


def test_fixed_point_after_convergence():
    ds, _ = make_lowrank(seeded_rng(7), 20, 200, 3, 0.01)
    cfg = BdrConfig(r=3)
    x = ds.x - ds.x.mean(axis=1, keepdims=True)
    state, report = bdr.run_cavi(x, cfg)
    assert report.converged
    again = bdr.cavi_step(state, x, cfg)
    assert again.last_delta < 10 * cfg.tol
    assert len(report.delta_history) == report.iterations_run


def test_project_examples():
    q = np.eye(5)[:, :2]
    model = bdr.BdrModel(q, np.eye(2), np.zeros(5), [0, 1], BdrConfig(r=2), None)
    x = seeded_rng(8).standard_normal((5, 4))
    np.testing.assert_array_equal(bdr.bdr_project(model, x), x[:2].T)
    center = np.arange(5.0)
    model.center = center
    assert np.all(bdr.bdr_project(model, np.tile(center[:, None], (1, 3))) == 0)
    with pytest.raises(DimMismatchError):
        bdr.bdr_project(model, np.ones((4, 2)))


def test_orthonormalize_examples():
    q, _ = thin_qr(seeded_rng(9).standard_normal((6, 3)))
    qo, r = bdr.orthonormalize(q)
    np.testing.assert_allclose(qo, q, atol=1e-14)
    np.testing.assert_allclose(r, np.eye(3), atol=1e-14)
    _, r2 = bdr.orthonormalize(2 * q)
    np.testing.assert_allclose(r2, 2 * np.eye(3), atol=1e-14)


# -- pruning --------------------------------------------------------------

def test_prune_examples():
    q = np.eye(4)[:, :2]
    state = bdr.BdrState(q, np.zeros((2, 4, 4)), np.array([1.0, 1.0]), None, None)
    assert bdr.ard_prune(state, 1e4) == [0, 1]
    state.phi_mean = np.array([1.0, 1e6])
    assert bdr.ard_prune(state, 1e4) == [0]
    state.phi_mean = np.array([1e6, 1e7])
    assert bdr.ard_prune(state, 1e4) == [0]


def test_prune_drops_redundant_and_vanished_columns():
    q = np.zeros((4, 3))
    q[:, 0] = [1, 0, 0, 0]
    q[:, 1] = [2, 0, 0, 0]  # same direction, larger
    state = bdr.BdrState(q, None, np.array([1.0, 1.0, 1.0]), None, None)
    assert bdr.ard_prune(state, 1e4) == [1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 1e3), st.floats(1.0, 1e3))
def test_prune_monotone_in_threshold(seed, t1, factor):
    rng = seeded_rng(seed)
    q = rng.standard_normal((6, 4)) * rng.uniform(1e-4, 1, size=4)
    phi = rng.uniform(0.5, 20, size=4)
    state = bdr.BdrState(q, None, phi, None, None)
    low = set(bdr.ard_prune(state, t1))
    high = set(bdr.ard_prune(state, t1 * factor))
    assert low <= high


# -- PCA baseline ---------------------------------------------------------

def test_pca_axis_data():
    x = np.zeros((3, 20))
    x[0] = np.linspace(-1, 1, 20)
    basis = bdr.pca_baseline(x, 1)
    np.testing.assert_allclose(basis[:, 0], [1, 0, 0], atol=1e-12)


def test_pca_full_rank_preserves_variance():
    x = seeded_rng(10).standard_normal((4, 50))
    basis = bdr.pca_baseline(x, 4)
    xc = x - x.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(basis.T @ basis, np.eye(4), atol=1e-12)
    assert np.isclose(np.sum((xc.T @ basis) ** 2), np.sum(xc**2))


def test_pca_anisotropic_axes():
    rng = seeded_rng(11)
    axes, _ = thin_qr(rng.standard_normal((3, 3)))
    x = axes @ (np.array([3.0, 1.5, 0.5])[:, None] * rng.standard_normal((3, 10_000)))
    basis = bdr.pca_baseline(x, 3)
    for i in range(3):
        assert principal_angles(basis[:, i:i + 1], axes[:, i:i + 1])[0] < 0.1


def test_pca_bad_shape():
    with pytest.raises(BadShapeError):
        bdr.pca_baseline(np.ones((3, 5)), 4)
