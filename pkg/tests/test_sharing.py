import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdmm.field import PrimeField
from sdmm.sharing import (ConfigError, NoiseBatch, SdmmConfig, SecretBatch, check_csa, check_general, csa_points,
                          csa_share, general_points, general_share, min_field_size, reconstruct_from_shares)


def scalar_batch(f, a_vals, b_vals):
    return SecretBatch.from_lists(f, [[[v]] for v in a_vals], [[[v]] for v in b_vals])


def scalar_noise(f, z, zp):
    return NoiseBatch(tuple(tuple(np.array([[v]]) for v in row) for row in z),
                      tuple(tuple(np.array([[v]]) for v in row) for row in zp))


def test_config_validation():
    with pytest.raises(ConfigError):
        SdmmConfig(0, 1, 1, 2, 1, 1, 1, 5)
    with pytest.raises(ConfigError):
        SdmmConfig(1, 1, 1, 2, 1, 1, 1, 6)
    with pytest.raises(ConfigError):
        SdmmConfig(1, 1, 1, 2, 1, 1, 1, 5, version="B_A")  # A unsecured there
    with pytest.raises(ConfigError):
        SdmmConfig(1, 1, 1, 2, 0, 1, 1, 5, version="AB_A")


def test_for_scheme_batch_sizes():
    assert SdmmConfig.for_scheme("csa", "AB_phi", 1, 1, 1, 4, 1, 11).S == 2
    assert SdmmConfig.for_scheme("general", "AB_phi", 1, 1, 1, 4, 1, 11).S == 3
    assert SdmmConfig.for_scheme("csa", "B_A", 1, 1, 1, 4, 1, 11).S == 3
    with pytest.raises(ConfigError):
        SdmmConfig.for_scheme("csa", "AB_phi", 1, 1, 1, 2, 1, 11)


def test_scheme_checks():
    check_general(SdmmConfig(1, 1, 1, 3, 1, 1, 2, 5))
    with pytest.raises(ConfigError):
        check_general(SdmmConfig(1, 1, 1, 3, 1, 1, 1, 5))
    check_general(SdmmConfig(1, 1, 1, 3, 1, 1, 1, 5), exact=False)
    with pytest.raises(ConfigError):
        check_general(SdmmConfig(1, 1, 1, 3, 1, 1, 2, 3))
    check_csa(SdmmConfig(1, 1, 1, 3, 1, 1, 1, 5))
    with pytest.raises(ConfigError):
        check_csa(SdmmConfig(1, 1, 1, 3, 1, 1, 1, 3))
    assert min_field_size("csa", 3, 1) == 5
    assert min_field_size("general", 3, 2) == 5


def test_csa_points_defaults():
    assert csa_points(5, 2, 1) == ((1,), (1, 2))
    assert csa_points(11, 4, 2) == ((1, 2), (1, 2, 3, 4))
    with pytest.raises(ConfigError):
        csa_points(3, 3, 1)


def test_csa_share_hand_example():
    # q=5, S=1, X_A=1, X_B=0, f_1=1, alphas (2, 3), A=2, B=3, Z=1
    f = PrimeField(5)
    sh = csa_share(scalar_batch(f, [2], [3]), scalar_noise(f, [[1]], [[]]), [1], [2, 3], f)
    # beta = 3, 4: A shares 2+3=0, 2+4=1; B shares 3/3=1, 3/4=2
    assert [int(sh.a_shares[n][0][0, 0]) for n in range(2)] == [0, 1]
    assert [int(sh.b_shares[n][0][0, 0]) for n in range(2)] == [1, 2]
    delta = [int(sh.a_shares[n][0][0, 0]) * int(sh.b_shares[n][0][0, 0]) % 5 for n in range(2)]
    assert delta == [0, 2]


def test_general_share_hand_example():
    # q=5, S=1, X=1, points (1, 2): share = a*A + a^2*Z
    f = PrimeField(5)
    sh = general_share(scalar_batch(f, [3], [4]), scalar_noise(f, [[2]], [[1]]), [1, 2], f)
    assert [int(sh.a_shares[n][0][0, 0]) for n in range(2)] == [(3 + 2) % 5, (6 + 8) % 5]
    assert [int(sh.b_shares[n][0][0, 0]) for n in range(2)] == [(4 + 1) % 5, (8 + 4) % 5]


def test_general_share_rejects_bad_points():
    f = PrimeField(5)
    batch, noise = scalar_batch(f, [1], [1]), scalar_noise(f, [[1]], [[1]])
    with pytest.raises(ConfigError):
        general_share(batch, noise, [0, 1], f)
    with pytest.raises(ConfigError):
        general_share(batch, noise, [1, 1], f)
    with pytest.raises(ConfigError):
        general_share(batch, noise, [1], f)


def test_csa_share_rejects_collision():
    f = PrimeField(5)
    with pytest.raises(ConfigError):
        csa_share(scalar_batch(f, [1], [1]), scalar_noise(f, [[1]], [[]]), [1], [4, 2], f)


def test_noise_streams_are_independent_of_order():
    f = PrimeField(101)
    full = NoiseBatch.generate(f, 3, 2, 1, (2, 2), (2, 2), seed=9)
    small = NoiseBatch.generate(f, 1, 1, 0, (2, 2), (2, 2), seed=9)
    assert np.array_equal(full.z_mats[0][0], small.z_mats[0][0])
    other = NoiseBatch.generate(f, 3, 2, 1, (2, 2), (2, 2), seed=10)
    assert not np.array_equal(full.z_mats[2][1], other.z_mats[2][1])


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["general", "csa"]), st.integers(1, 3), st.integers(0, 2), st.integers(0, 2),
       st.integers(0, 10 ** 6))
def test_reconstruct_from_all_shares(scheme, S, X_A, X_B, seed):
    q = 101
    f = PrimeField(q)
    N = S + (X_A + X_B if scheme == "csa" else max(X_A, X_B))
    config = SdmmConfig(2, 3, 2, N, X_A, X_B, S, q)
    batch = SecretBatch.random(config, seed)
    noise = NoiseBatch.for_config(config, seed)
    if scheme == "csa":
        fc, al = csa_points(q, N, S)
        sh = csa_share(batch, noise, fc, al, f)
    else:
        sh = general_share(batch, noise, general_points(N), f)
    for s in range(S):
        assert np.array_equal(sh.reconstruct(s, "A"), batch.a_mats[s])
        assert np.array_equal(sh.reconstruct(s, "B"), batch.b_mats[s])


def test_reconstruct_unknown_scheme():
    with pytest.raises(ConfigError):
        reconstruct_from_shares(PrimeField(5), [np.zeros((1, 1))], [1], "rs", s=1, S=1, x_level=0)


def test_secret_batch_shape_check():
    config = SdmmConfig(2, 2, 2, 3, 1, 1, 1, 11)
    batch = SecretBatch.random(config, 0)
    batch.check_shapes(config)
    with pytest.raises(ConfigError):
        batch.check_shapes(SdmmConfig(2, 3, 2, 3, 1, 1, 1, 11))
