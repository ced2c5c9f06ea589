"""Shrink-and-perturb re-initialization checks."""

import numpy as np
import pytest

from alem.nn import Dense, ReLU, init_net
from alem.warmstart import SPConfig, shrink_and_perturb


def flat_params(net):
    return np.concatenate([a.reshape(-1) for a in net.weights + net.biases])


def test_identity_config_is_bitwise_noop():
    net = init_net((Dense(4, 8), ReLU(), Dense(8, 3)), 0)
    out = shrink_and_perturb(net, SPConfig(shrink=1.0, noise_std=0.0, seed=3))
    assert np.array_equal(flat_params(out), flat_params(net))
    assert out is not net


def test_full_shrink_no_noise_zeroes_everything():
    net = init_net((Dense(5, 5),), 1)
    out = shrink_and_perturb(net, SPConfig(shrink=0.0, noise_std=0.0))
    assert np.all(flat_params(out) == 0.0)


def test_spec_and_shapes_preserved():
    net = init_net((Dense(6, 10), ReLU(), Dense(10, 2)), 2)
    out = shrink_and_perturb(net, SPConfig())
    assert out.spec == net.spec
    for a, b in zip(out.weights + out.biases, net.weights + net.biases):
        assert a.shape == b.shape


def test_input_net_not_mutated():
    net = init_net((Dense(3, 3),), 4)
    before = flat_params(net)
    shrink_and_perturb(net, SPConfig(seed=0))
    assert np.array_equal(flat_params(net), before)


def test_deterministic_per_seed_and_round():
    net = init_net((Dense(4, 4),), 5)
    a = shrink_and_perturb(net, SPConfig(seed=9), round_index=2)
    b = shrink_and_perturb(net, SPConfig(seed=9), round_index=2)
    c = shrink_and_perturb(net, SPConfig(seed=9), round_index=3)
    assert np.array_equal(flat_params(a), flat_params(b))
    assert not np.array_equal(flat_params(a), flat_params(c))


def test_moments_on_unit_parameters():
    """lambda*1 + N(0, sigma^2) over 1e5 params: mean 0.5 +- 0.002,
    variance 0.01 +- 10% (3-sigma bounds)."""
    spec = (Dense(285, 350), ReLU(), Dense(350, 4))
    net = init_net(spec, 0)
    for w in net.weights:
        w[:] = 1.0
    for b in net.biases:
        b[:] = 1.0
    assert net.n_params() >= 100_000
    out = shrink_and_perturb(net, SPConfig(shrink=0.5, noise_std=0.1, seed=0))
    flat = flat_params(out)
    assert abs(flat.mean() - 0.5) < 0.002
    assert abs(flat.var() - 0.01) < 0.001


def test_residual_noise_is_centered_gaussian_scale():
    net = init_net((Dense(300, 340),), 1)
    cfg = SPConfig(shrink=0.5, noise_std=0.1, seed=7)
    out = shrink_and_perturb(net, cfg)
    resid = flat_params(out) - 0.5 * flat_params(net)
    assert abs(resid.mean()) < 0.002
    assert abs(resid.std() - 0.1) < 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        SPConfig(shrink=1.5)
    with pytest.raises(ValueError):
        SPConfig(shrink=-0.1)
    with pytest.raises(ValueError):
        SPConfig(noise_std=-1.0)
