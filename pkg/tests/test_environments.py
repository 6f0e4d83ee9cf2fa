import numpy as np
import pytest
from scipy import stats

from corrbandit.core import RewardDomain
from corrbandit.environments import (BINARY, BoundFunction, EmpiricalEnvironment, LatentArm,
                                     LatentDistribution, LatentSourceEnvironment,
                                     TabularJointEnvironment, binary_pair_env, latent_two_arm_env,
                                     realization_hash, ternary_env)
from corrbandit.errors import ConfigError


def test_binary_pair_marginals_by_sampling():
    r = binary_pair_env("a").realize(100_000, np.random.default_rng(0))
    assert r[:, 0].mean() == pytest.approx(0.6, abs=0.01)
    r = binary_pair_env("b").realize(100_000, np.random.default_rng(1))
    assert r[:, 1].mean() == pytest.approx(0.5, abs=0.01)


def test_true_means():
    np.testing.assert_allclose(binary_pair_env("a").true_means(), [0.6, 0.4], atol=1e-12)
    assert ternary_env().true_means()[0] == pytest.approx(1.4, abs=1e-12)
    np.testing.assert_allclose(ternary_env().marginal_pmf(0), [0.2, 0.2, 0.6])
    pool = EmpiricalEnvironment((np.array([1.0, 1.0, 1.0]),), (RewardDomain.discrete([1.0], B=5),))
    assert pool.true_means()[0] == 1.0


def test_degenerate_joint_always_same_tuple():
    env = TabularJointEnvironment.from_dict((BINARY, BINARY), {(1, 0): 1.0})
    r = env.realize(50, np.random.default_rng(0))
    assert np.all(r == [1, 0])
    np.testing.assert_array_equal(env.sample_joint(np.random.default_rng(3)), [1, 0])


def test_joint_validation():
    with pytest.raises(ConfigError):
        TabularJointEnvironment.from_dict((BINARY, BINARY), {(1, 0): 0.5})
    with pytest.raises(Exception):
        TabularJointEnvironment.from_dict((BINARY, BINARY), {(2, 0): 1.0})


def test_tabular_text_round_trip():
    env = ternary_env()
    again = TabularJointEnvironment.from_text(env.to_text())
    np.testing.assert_array_equal(again.support, env.support)
    np.testing.assert_array_equal(again.masses, env.masses)
    assert again.domains == env.domains


def test_realization_hash_depends_on_values():
    r = binary_pair_env("a").realize(20, np.random.default_rng(0))
    assert realization_hash(r) == realization_hash(r.copy())
    r2 = r.copy()
    r2[0, 0] = 1 - r2[0, 0]
    assert realization_hash(r) != realization_hash(r2)


def test_latent_sample_means():
    env = latent_two_arm_env(1.0, 1.0)
    r = env.realize(100_000, np.random.default_rng(4))
    assert r[:, 0].mean() == pytest.approx(6.0, abs=0.05)
    assert r[:, 1].mean() == pytest.approx(3.0, abs=0.05)
    env = latent_two_arm_env(1.5, 5.0)
    r = env.realize(100_000, np.random.default_rng(5))
    assert r[:, 0].mean() == pytest.approx(2.769, abs=0.05)
    assert r[:, 1].mean() == pytest.approx(3.461, abs=0.05)
    assert r[:, 1].mean() > r[:, 0].mean()


def _beta_moment_means(a, b):
    # X = 6 U with U ~ Beta(a, b); arm 1 mean 2 E[X], arm 2 mean E[(3 - X)^2]
    m1 = a / (a + b)
    m2 = a * (a + 1) / ((a + b) * (a + b + 1))
    ex, ex2 = 6 * m1, 36 * m2
    return np.array([2 * ex, 9 - 6 * ex + ex2])


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.5, 5.0), (0.5, 0.5), (3.0, 2.0)])
def test_latent_true_means_against_beta_moments(a, b):
    env = latent_two_arm_env(a, b)
    np.testing.assert_allclose(env.true_means(), _beta_moment_means(a, b), atol=1e-3)


def test_latent_samples_stay_within_bounds():
    env = latent_two_arm_env(1.5, 5.0)
    rng = np.random.default_rng(0)
    for _ in range(200):
        r = env.sample_latent(1, rng)
        assert -1.0 <= r <= 10.0
    assert env.domains[0].lo == pytest.approx(-1.0) and env.domains[1].hi == pytest.approx(10.0)
    assert env.B == pytest.approx(13.0)


def test_latent_bound_validation():
    lat = LatentDistribution.scaled_beta(1, 1, 0, 1)
    bad = LatentArm(BoundFunction("linear", (1.0, 1.0)), BoundFunction("linear", (1.0, 0.0)))
    with pytest.raises(ConfigError):
        LatentSourceEnvironment(lat, (bad,))
    with pytest.raises(ConfigError):
        BoundFunction("square", (1.0,))


def test_latent_reward_pmf_matches_sampling():
    from corrbandit.pseudo import from_latent_bounds
    env = latent_two_arm_env(1.5, 5.0)
    table = from_latent_bounds(env, grid_n=401, bins=20)
    pmf = env.reward_pmf(1, table)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    r = env.realize(200_000, np.random.default_rng(8))[:, 1]
    freq = np.bincount(table.column_indices(1, r), minlength=20) / len(r)
    np.testing.assert_allclose(pmf[:20], freq, atol=0.01)


def test_grid_latent_quadrature_is_exact():
    lat = LatentDistribution("grid", points=(0.0, 1.0, 2.0), pmf=(0.5, 0.25, 0.25))
    env = LatentSourceEnvironment(lat, (LatentArm.band(BoundFunction("linear", (1.0, 0.0)), 0.0),))
    assert env.true_means()[0] == pytest.approx(0.75, abs=1e-12)


def test_quadrature_weights_for_unbounded_density():
    lat = LatentDistribution.scaled_beta(0.5, 0.5, 0.0, 1.0)
    x, w = lat.quadrature(2001)
    assert w.sum() == pytest.approx(1.0)
    assert w @ x == pytest.approx(stats.beta.mean(0.5, 0.5), abs=1e-6)
