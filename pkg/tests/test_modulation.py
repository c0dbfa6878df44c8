import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srpm.channels import ChannelSampler, CorrelationSpec, LosSpec
from srpm.config import SystemConfig
from srpm.errors import ConfigError, DimensionError, FramingError
from srpm.modulation import (
    TransmitAlphabet,
    assemble_equivalent_batch,
    assemble_equivalent_channel,
    baseline_phase_matrix,
    bits_per_use,
    build_constellation,
    build_phase_matrix,
    build_ris_codebook,
    canonical_offsets,
    element_multipliers,
    equivalent_x,
    gray_code,
    gray_decode,
    hamming_bits,
    map_bits_to_symbols,
    pair_to_bits,
    synthesize_received,
    transmit_alphabet,
)


def rng_of(seed=0):
    return np.random.Generator(np.random.Philox(seed))


@given(st.integers(0, 2**16))
@settings(max_examples=60, deadline=None)
def test_gray_code_bijective(value):
    assert gray_decode(gray_code(value)) == value


def test_gray_code_adjacent_differ_in_one_bit():
    for v in range(63):
        diff = gray_code(v) ^ gray_code(v + 1)
        assert bin(diff).count("1") == 1


@pytest.mark.parametrize("kind,m", [("psk", 2), ("psk", 4), ("psk", 8),
                                    ("qam", 4), ("qam", 16)])
def test_constellation_unit_power_and_gray_labels(kind, m):
    c = build_constellation(kind, m)
    assert c.size == m
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)
    assert sorted(c.labels.tolist()) == list(range(m))


def test_bpsk_is_real_antipodal():
    c = build_constellation("psk", 2)
    assert set(np.round(c.points, 12).tolist()) == {1.0 + 0j, -1.0 + 0j}


def test_psk_gray_neighbours():
    c = build_constellation("psk", 8)
    order = np.argsort(np.angle(c.points) % (2 * math.pi))
    ring = c.labels[order]
    for a, b in zip(ring, np.roll(ring, -1)):
        assert bin(int(a) ^ int(b)).count("1") == 1


def test_constellation_rejects_bad_size():
    with pytest.raises(ConfigError):
        build_constellation("psk", 3)
    with pytest.raises(ConfigError):
        build_constellation("dither", 4)


def test_canonical_offsets_order():
    assert list(canonical_offsets(1)) == [0, 1, -1]
    assert list(canonical_offsets(2)) == [0, 1, -1, 2, -2]


def test_codebook_sizes_full_vs_bit():
    cfg = SystemConfig()
    full = build_ris_codebook(cfg, full=True)
    bit = build_ris_codebook(cfg)
    assert full.size == (2 * cfg.k + 1) ** cfg.l == 9
    assert bit.size == 1 << bit.n_bits == 4
    assert bit.n_bits == cfg.l * int(math.log2(2 * cfg.k + 1) // 1)
    assert full.product_form and bit.product_form


def test_bit_codebook_uses_smallest_offsets():
    cfg = SystemConfig(k=2, l=1)
    bit = build_ris_codebook(cfg)
    # 2K+1 = 5 offsets, subset of 4 smallest magnitudes: 0, 1, -1, 2
    assert bit.size == 4
    used = set(np.round(np.angle(bit.multipliers[:, 0]) / cfg.delta_theta).astype(int).tolist())
    assert used == {0, 1, -1, 2}


def test_full_codebook_label_aliasing():
    cfg = SystemConfig()
    full = build_ris_codebook(cfg, full=True)
    bit = build_ris_codebook(cfg)
    assert full.n_bits == bit.n_bits
    # every full label is a valid bit-alphabet label
    assert set(full.labels.tolist()) <= set(range(1 << bit.n_bits))


def test_unit_modulus_multipliers():
    cfg = SystemConfig()
    for full in (True, False):
        cb = build_ris_codebook(cfg, full=full)
        assert np.allclose(np.abs(cb.multipliers), 1.0)


def test_pbf_codebook_is_identity_pattern():
    cfg = SystemConfig(scheme="pbf")
    cb = build_ris_codebook(cfg)
    assert cb.size == 1
    assert cb.n_bits == 0
    assert np.allclose(cb.multipliers, 1.0)


def test_pbit_codebook_on_off():
    cfg = SystemConfig(scheme="pbit")
    cb = build_ris_codebook(cfg)
    assert cb.size == 4
    vals = set(np.unique(cb.multipliers).tolist())
    assert vals == {0.0 + 0j, 1.0 + 0j}
    # label bits equal the per-surface on/off pattern, surface 0 is the MSB
    for row, label in zip(cb.multipliers, cb.labels):
        pattern = (int(label) >> 1 & 1, int(label) & 1)
        assert tuple(int(v.real) for v in row) == pattern


@pytest.mark.parametrize("scheme,expected", [("rpm", 1), ("qrm", 1)])
def test_combination_codebooks(scheme, expected):
    cfg = SystemConfig(scheme=scheme, scheme_p=1)
    cb = build_ris_codebook(cfg)
    assert cb.n_bits == expected
    assert not cb.product_form
    fill = 1j if scheme == "qrm" else 0.0
    for row in cb.multipliers:
        marked = [v for v in row if not np.isclose(v, 1.0)]
        assert len(marked) == 1
        assert np.isclose(marked[0], fill)


def test_bits_per_use_defaults():
    cfg = SystemConfig()
    # one BPSK stream plus one bit per sub-surface
    assert bits_per_use(cfg) == 3


def test_alphabet_sizes_and_labels():
    cfg = SystemConfig()
    bit = transmit_alphabet(cfg)
    full = transmit_alphabet(cfg, full=True)
    assert bit.size == 8 and bit.n_bits == 3
    assert full.size == 18
    assert sorted(bit.labels_int.tolist()) == list(range(8))
    assert bit.x_cols.shape == ((cfg.l + 1) * cfg.n_s, 8)
    assert bit.labels_bits.shape == (8, 3)


@given(st.integers(0, 7))
@settings(max_examples=16, deadline=None)
def test_bit_mapping_roundtrip(index):
    cfg = SystemConfig()
    alphabet = transmit_alphabet(cfg)
    pair = alphabet.pair(index)
    bits = pair_to_bits(pair)
    assert alphabet.index_of_bits(bits) == index
    again = map_bits_to_symbols(bits, cfg)
    assert np.array_equal(again.bits, bits)
    assert np.allclose(again.s, pair.s)
    assert np.allclose(again.multipliers, pair.multipliers)


def test_index_of_bits_rejects_wrong_length():
    alphabet = transmit_alphabet(SystemConfig())
    with pytest.raises(FramingError):
        alphabet.index_of_bits(np.zeros(5, dtype=np.uint8))


def test_full_alphabet_not_bit_addressable():
    alphabet = transmit_alphabet(SystemConfig(), full=True)
    with pytest.raises(FramingError):
        alphabet.index_of_bits(np.zeros(3, dtype=np.uint8))


def test_equivalent_x_kron_layout():
    alphabet = transmit_alphabet(SystemConfig())
    pair = alphabet.pair(5)
    x = equivalent_x(pair)
    expected = np.kron(np.concatenate([pair.multipliers, [1.0]]), pair.s)
    assert np.array_equal(x, expected)
    assert np.allclose(alphabet.x_cols[:, 5], x)


def test_element_multipliers_repeat_blocks():
    cfg = SystemConfig(n=8, l=2)
    out = element_multipliers(np.array([1j, -1.0]), cfg)
    assert np.array_equal(out, np.array([1j] * 4 + [-1.0] * 4))
    with pytest.raises(DimensionError):
        element_multipliers(np.array([1.0]), cfg)


def test_phase_matrix_is_diagonal():
    cfg = SystemConfig(n=8, l=2)
    alphabet = transmit_alphabet(cfg)
    pair = alphabet.pair(3)
    mat = build_phase_matrix(pair, cfg)
    assert mat.shape == (8, 8)
    assert np.array_equal(np.diag(np.diag(mat)), mat)


def small_channels(cfg, seed=0):
    los = LosSpec.random(3, rng_of(seed))
    sampler = ChannelSampler(
        cfg, CorrelationSpec(0.2, 0.3, 0.4), los, "uniform_random", rng_of(seed + 1)
    )
    return sampler.sample(rng_of(seed + 2))


def test_equivalent_channel_matches_direct_synthesis():
    cfg = SystemConfig(n=12, n_t=4, n_r=3, l=2)
    chans = small_channels(cfg)
    w = np.ones((4, 1), dtype=np.complex128) / 2.0
    h_eq = assemble_equivalent_channel(chans, w, cfg)
    alphabet = transmit_alphabet(cfg, full=True)
    for idx in range(alphabet.size):
        pair = alphabet.pair(idx)
        direct = synthesize_received(pair, chans, w, cfg, include_noise=False)
        via_eq = math.sqrt(cfg.power) * h_eq.matrix @ equivalent_x(pair)
        assert np.allclose(direct, via_eq, rtol=1e-12, atol=1e-12)


def test_synthesize_received_reduces_to_textbook_form():
    # y = sqrt(P) (H_d + H_r Theta_b Xi G) W s, assembled from raw parts
    cfg = SystemConfig(n=12, n_t=4, n_r=3, l=2)
    chans = small_channels(cfg, seed=5)
    w = np.ones((4, 1), dtype=np.complex128) / 2.0
    alphabet = transmit_alphabet(cfg)
    pair = alphabet.pair(6)
    theta_b = np.diag(np.exp(1j * chans.base_phases))
    xi = build_phase_matrix(pair, cfg)
    cascade = chans.h_d + chans.h_r @ theta_b @ xi @ chans.g
    expected = math.sqrt(cfg.power) * cascade @ (w @ pair.s)
    got = synthesize_received(pair, chans, w, cfg, include_noise=False)
    assert np.allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_synthesize_received_noise_statistics():
    cfg = SystemConfig(n=12, n_t=4, n_r=3, l=2, sigma2=2.0)
    chans = small_channels(cfg, seed=6)
    w = np.ones((4, 1), dtype=np.complex128) / 2.0
    alphabet = transmit_alphabet(cfg)
    pair = alphabet.pair(0)
    clean = synthesize_received(pair, chans, w, cfg, include_noise=False)
    rng = rng_of(20)
    noise = np.array(
        [synthesize_received(pair, chans, w, cfg, rng=rng) - clean for _ in range(4000)]
    )
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(cfg.sigma2, rel=0.05)


def test_assemble_equivalent_batch_matches_single():
    cfg = SystemConfig(n=12, n_t=4, n_r=3, l=2)
    los = LosSpec.random(3, rng_of(1))
    sampler = ChannelSampler(
        cfg, CorrelationSpec(0, 0, 0), los, "zero", rng_of(2)
    )
    h_d, h_r = sampler.sample_batch(rng_of(3), 4)
    w = np.ones((4, 1), dtype=np.complex128) / 2.0
    batch = assemble_equivalent_batch(h_d, h_r, sampler.static, w, cfg)
    assert batch.shape == (4, cfg.n_r, (cfg.l + 1) * cfg.n_s)
    for i in range(4):
        from srpm.channels import ChannelSet

        chans = ChannelSet(h_d=h_d[i], h_r=h_r[i], static=sampler.static)
        single = assemble_equivalent_channel(chans, w, cfg)
        assert np.allclose(batch[i], single.matrix, rtol=1e-13, atol=1e-14)


def test_precoder_power_validated():
    cfg = SystemConfig(n=12, n_t=4, n_r=3, l=2)
    chans = small_channels(cfg, seed=8)
    alphabet = transmit_alphabet(cfg)
    bad = np.ones((4, 1), dtype=np.complex128)  # power 4, not 1
    with pytest.raises(ConfigError):
        synthesize_received(alphabet.pair(0), chans, bad, cfg, include_noise=False)
    wrong_shape = np.ones((3, 1), dtype=np.complex128) / math.sqrt(3)
    with pytest.raises(DimensionError):
        synthesize_received(
            alphabet.pair(0), chans, wrong_shape, cfg, include_noise=False
        )


def test_baseline_phase_matrix_schemes():
    cfg = SystemConfig(n=8, l=2)
    chans = small_channels(cfg, seed=9)
    ident = baseline_phase_matrix("pbf", None, chans, cfg)
    assert np.allclose(ident, np.eye(cfg.n))
    pattern = baseline_phase_matrix("pbit", np.array([1, 0]), chans, cfg)
    diag = np.diag(pattern)
    assert np.array_equal(diag[:4], np.ones(4)) and np.array_equal(diag[4:], np.zeros(4))


def test_hamming_bits_counts():
    a = np.array([0, 1, 1, 0], dtype=np.uint8)
    b = np.array([1, 1, 0, 0], dtype=np.uint8)
    assert hamming_bits(a, b) == 2
    assert hamming_bits(a, a) == 0
