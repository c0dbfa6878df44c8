import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srpm.channels import (
    BASE_PHASE_POLICIES,
    ChannelSampler,
    CorrelationSpec,
    LosSpec,
    build_los_channel,
    complex_normal,
    exponential_correlation,
    hermitian_sqrt,
    load_complex_matrix,
    sample_channel_set,
    sample_kronecker_rayleigh,
    save_complex_matrix,
    steering_vector,
)
from srpm.config import SystemConfig
from srpm.errors import ConfigError, CorrelationError, DimensionError, FramingError


def rng_of(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_exponential_correlation_structure():
    r = exponential_correlation(5, 0.6)
    assert r.shape == (5, 5)
    assert np.allclose(np.diag(r), 1.0)
    assert np.allclose(r, r.T.conj())
    for i in range(5):
        for j in range(5):
            assert r[i, j] == pytest.approx(0.6 ** abs(i - j))
    # positive semidefinite for |rho| < 1
    assert np.min(np.linalg.eigvalsh(r)) > 0.0


def test_exponential_correlation_identity_at_zero():
    assert np.array_equal(exponential_correlation(4, 0.0), np.eye(4))


@pytest.mark.parametrize("rho", [-0.5, -1.01, 1.0, 2.0])
def test_exponential_correlation_rejects_bad_rho(rho):
    with pytest.raises(CorrelationError):
        exponential_correlation(4, rho)


@given(st.floats(0.0, 0.95), st.integers(2, 12))
@settings(max_examples=40, deadline=None)
def test_exponential_correlation_psd(rho, size):
    r = exponential_correlation(size, rho)
    assert np.min(np.linalg.eigvalsh(r)) >= -1e-12


def test_hermitian_sqrt_roundtrip():
    rng = rng_of(1)
    a = complex_normal(rng, (6, 6))
    mat = a @ a.conj().T
    root = hermitian_sqrt(mat)
    assert np.allclose(root @ root.conj().T, mat, atol=1e-10)


def test_hermitian_sqrt_rejects_indefinite():
    with pytest.raises(CorrelationError):
        hermitian_sqrt(np.diag([1.0, -0.5]))


@given(st.integers(1, 32), st.floats(-math.pi / 2, math.pi / 2))
@settings(max_examples=50, deadline=None)
def test_steering_vector_unit_modulus(size, angle):
    a = steering_vector(size, angle)
    assert a.shape == (size,)
    assert np.allclose(np.abs(a), 1.0)
    assert a[0] == pytest.approx(1.0)


def test_los_spec_random_angles_in_range():
    spec = LosSpec.random(6, rng_of(3))
    assert spec.n_paths == 6
    assert np.all(np.abs(spec.aoa) <= math.pi / 2)
    assert np.all(np.abs(spec.aod) <= math.pi / 2)


def test_los_channel_energy_scaling():
    # E||G||_F^2 = n * n_t so the per-element power is one regardless of
    # size; checked by Monte Carlo over the path gains
    n, n_t = 24, 6
    rng = rng_of(7)
    spec = LosSpec.random(4, rng)
    total = 0.0
    draws = 4000
    for _ in range(draws):
        g = build_los_channel(spec, n, n_t, rng)
        total += float(np.sum(np.abs(g) ** 2))
    mean = total / draws
    assert mean == pytest.approx(n * n_t, rel=0.05)


def test_los_channel_rank_bounded_by_paths():
    rng = rng_of(11)
    spec = LosSpec.random(3, rng)
    g = build_los_channel(spec, 16, 8, rng)
    s = np.linalg.svd(g, compute_uv=False)
    assert np.sum(s > 1e-9 * s[0]) <= 3


def test_kronecker_sampler_matches_target_covariance():
    rows, cols, beta = 3, 4, 1.7
    r_row = exponential_correlation(rows, 0.7)
    r_col = exponential_correlation(cols, 0.4)
    rng = rng_of(5)
    draws = 12000
    acc = np.zeros((rows * cols, rows * cols), dtype=np.complex128)
    for _ in range(draws):
        h = sample_kronecker_rayleigh(rows, cols, r_row, r_col, beta, rng)
        v = h.reshape(-1, order="F")
        acc += np.outer(v, v.conj())
    emp = acc / draws
    target = beta * np.kron(r_col.T, r_row)
    assert np.linalg.norm(emp - target) / np.linalg.norm(target) < 0.06


def test_complex_normal_moments():
    rng = rng_of(9)
    z = complex_normal(rng, (20000,))
    assert np.mean(z.real) == pytest.approx(0.0, abs=0.02)
    assert np.var(z.real) + np.var(z.imag) == pytest.approx(1.0, rel=0.05)


@pytest.fixture
def small_config():
    return SystemConfig(n=12, n_t=4, n_r=3, l=2)


def test_sampler_shapes_and_static_reuse(small_config):
    corr = CorrelationSpec(0.3, 0.2, 0.5)
    los = LosSpec.random(4, rng_of(2))
    sampler = ChannelSampler(small_config, corr, los, "uniform_random", rng_of(3))
    h_d, h_r = sampler.sample_batch(rng_of(4), 5)
    assert h_d.shape == (5, small_config.n_r, small_config.n_t)
    assert h_r.shape == (5, small_config.n_r, small_config.n)
    h_d2, h_r2 = sampler.sample_batch(rng_of(4), 5)
    assert np.array_equal(h_d, h_d2) and np.array_equal(h_r, h_r2)
    chans = sampler.sample(rng_of(4))
    assert chans.h_d.shape == (small_config.n_r, small_config.n_t)
    assert chans.static is sampler.static
    assert chans.g.shape == (small_config.n, small_config.n_t)


def test_sampler_base_phase_policies(small_config):
    los = LosSpec.random(4, rng_of(2))
    for policy in BASE_PHASE_POLICIES:
        sampler = ChannelSampler(
            small_config,
            CorrelationSpec(0, 0, 0),
            los,
            policy,
            rng_of(5),
        )
        phases = sampler.static.base_phases
        assert phases.shape == (small_config.n,)
        if policy == "zero":
            assert np.all(phases == 0.0)
        else:
            assert np.all((phases >= 0.0) & (phases < 2 * math.pi))


def test_sampler_rejects_unknown_policy(small_config):
    los = LosSpec.random(4, rng_of(2))
    with pytest.raises(ConfigError):
        ChannelSampler(
            small_config, CorrelationSpec(0, 0, 0), los, "tilted", rng_of(5)
        )


def test_sampler_checks_supplied_g_shape(small_config):
    los = LosSpec.random(4, rng_of(2))
    bad = np.ones((3, 3), dtype=np.complex128)
    with pytest.raises(DimensionError):
        ChannelSampler(
            small_config, CorrelationSpec(0, 0, 0), los, "zero", rng_of(5), g=bad
        )


def test_fading_marginals_follow_betas(small_config):
    los = LosSpec.random(4, rng_of(2))
    sampler = ChannelSampler(
        small_config,
        CorrelationSpec(0, 0, 0),
        los,
        "zero",
        rng_of(6),
        beta_d=0.5,
        beta_r=2.0,
    )
    h_d, h_r = sampler.sample_batch(rng_of(8), 4000)
    assert np.mean(np.abs(h_d) ** 2) == pytest.approx(0.5, rel=0.05)
    assert np.mean(np.abs(h_r) ** 2) == pytest.approx(2.0, rel=0.05)


def test_receive_side_correlation_shows_up_in_rows(small_config):
    rho = 0.8
    los = LosSpec.random(4, rng_of(2))
    sampler = ChannelSampler(
        small_config,
        CorrelationSpec(0.0, 0.0, rho),
        los,
        "zero",
        rng_of(7),
    )
    h_d, _ = sampler.sample_batch(rng_of(9), 20000)
    # adjacent receive antennas of the direct link correlate with rho
    prod = np.mean(h_d[:, 0, :] * h_d[:, 1, :].conj())
    assert prod.real == pytest.approx(rho, abs=0.05)


def test_sample_channel_set_one_shot(small_config):
    los = LosSpec.random(4, rng_of(2))
    chans = sample_channel_set(
        small_config, CorrelationSpec(0, 0, 0), los, "zero", rng_of(3)
    )
    assert chans.h_d.shape == (small_config.n_r, small_config.n_t)
    assert chans.h_r.shape == (small_config.n_r, small_config.n)


def test_matrix_dump_roundtrip(tmp_path):
    rng = rng_of(12)
    mat = complex_normal(rng, (5, 3))
    path = tmp_path / "mat.bin"
    save_complex_matrix(path, mat)
    back = load_complex_matrix(path)
    assert back.dtype == np.complex128
    assert np.array_equal(back, mat)


def test_matrix_dump_rejects_bad_magic(tmp_path):
    path = tmp_path / "mat.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 24)
    with pytest.raises(FramingError):
        load_complex_matrix(path)


def test_matrix_dump_rejects_truncated_payload(tmp_path):
    rng = rng_of(13)
    mat = complex_normal(rng, (4, 4))
    path = tmp_path / "mat.bin"
    save_complex_matrix(path, mat)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FramingError):
        load_complex_matrix(path)
