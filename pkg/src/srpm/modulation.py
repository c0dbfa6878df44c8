"""Modulation layer: constellations, reflection codebooks, bit mapping, the
received-signal synthesis and its compact equivalent-channel form.

A transmitted message is a pair (s, v): constellation symbols on the spatial
streams plus one reflection multiplier per sub-surface. For the phase-offset
scheme the multiplier of surface l is exp(j*k_l*delta_theta) with k_l drawn
from {-k..k}; baseline schemes use on/off or quarter-turn patterns instead.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet, StaticChannel, complex_normal
from .config import SystemConfig
from .errors import ConfigError, DimensionError, FramingError


def gray_code(index: int) -> int:
    return index ^ (index >> 1)


def gray_decode(code: int) -> int:
    index = 0
    while code:
        index ^= code
        code >>= 1
    return index


def _int_to_bits(value: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1)
    return ((value >> shifts) & 1).astype(np.uint8)


def _bits_to_int(bits: np.ndarray) -> int:
    value = 0
    for b in np.asarray(bits).ravel():
        value = (value << 1) | int(b)
    return value


def hamming_bits(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))


# ---------------------------------------------------------------------------
# constellations


@dataclass(frozen=True)
class Constellation:
    """Unit-mean-power constellation with Gray bit labels.

    points[j] is the j-th point in layout order and labels[j] its bit label;
    by_label[label] gives the point carrying that label.
    """

    kind: str
    points: np.ndarray
    labels: np.ndarray
    bits: int

    @property
    def size(self) -> int:
        return self.points.size

    @functools.cached_property
    def by_label(self) -> np.ndarray:
        out = np.empty(self.size, dtype=np.complex128)
        out[self.labels] = self.points
        return out

    def nearest_index(self, value: complex) -> int:
        return int(np.argmin(np.abs(self.points - value)))


@functools.lru_cache(maxsize=None)
def build_constellation(kind: str, m: int) -> Constellation:
    """PSK or rectangular QAM of order m (power of two), average power one.

    PSK places point j at angle 2*pi*j/m (plus pi/m for m > 2) with Gray
    label gray(j). QAM uses a 2^ceil(b/2) x 2^floor(b/2) grid of odd integer
    coordinates, Gray-labeled per axis, scaled to unit mean power.
    """
    if m < 2 or (m & (m - 1)) != 0:
        raise ConfigError(f"constellation order must be a power of two >= 2, got {m}")
    bits = m.bit_length() - 1
    if kind == "psk":
        offset = 0.0 if m == 2 else math.pi / m
        j = np.arange(m)
        points = np.exp(1j * (2 * np.pi * j / m + offset))
        if m == 2:
            points = points.real.astype(np.complex128)  # exact {+1, -1}
        labels = np.array([gray_code(int(x)) for x in j])
        return Constellation(kind, points, labels, bits)
    if kind == "qam":
        i_bits = (bits + 1) // 2
        q_bits = bits // 2
        n_i, n_q = 1 << i_bits, 1 << q_bits
        i_levels = 2 * np.arange(n_i) - (n_i - 1)
        q_levels = 2 * np.arange(n_q) - (n_q - 1)
        points = []
        labels = []
        for a, b in itertools.product(range(n_i), range(n_q)):
            points.append(i_levels[a] + 1j * q_levels[b])
            labels.append((gray_code(a) << q_bits) | gray_code(b))
        points = np.asarray(points, dtype=np.complex128)
        scale = math.sqrt(np.mean(np.abs(points) ** 2))
        return Constellation(kind, points / scale, np.asarray(labels), bits)
    raise ConfigError(f"unknown constellation kind {kind!r}")


# ---------------------------------------------------------------------------
# reflection codebooks


def canonical_offsets(k: int) -> list[int]:
    """Offset indices ordered by magnitude: 0, +1, -1, ..., +k, -k."""
    out = [0]
    for i in range(1, k + 1):
        out.extend((i, -i))
    return out


@dataclass(frozen=True)
class RisCodebook:
    """Alphabet of joint per-sub-surface reflection multipliers.

    multipliers[v, l] is the coefficient surface l applies for codeword v;
    labels[v] carries the codeword's n_bits bit label (labels alias when the
    alphabet exceeds 2**n_bits, which only the analysis path enumerates).
    Product-form codebooks additionally expose the per-surface candidate set
    used by layered tree search.
    """

    scheme: str
    multipliers: np.ndarray
    labels: np.ndarray
    n_bits: int
    offsets: np.ndarray | None = None
    product_form: bool = False
    surface_multipliers: np.ndarray | None = None
    surface_labels: np.ndarray | None = None
    surface_offsets: np.ndarray | None = None
    surface_bits: int = 0

    @property
    def size(self) -> int:
        return self.multipliers.shape[0]


def _srpm_surface_sets(config: SystemConfig) -> tuple[list[int], int]:
    order = canonical_offsets(config.k)
    bits = int(math.floor(math.log2(len(order)))) if len(order) > 1 else 0
    return order, bits


def _srpm_surface_label(k_index: int, order: list[int], bits: int) -> int:
    subset = order[: 1 << bits]
    if k_index in subset:
        return gray_code(subset.index(k_index))
    return (k_index + (len(order) - 1) // 2) % (1 << bits)


def _srpm_codebook(config: SystemConfig, full: bool) -> RisCodebook:
    order, bits = _srpm_surface_sets(config)
    subset = order[: 1 << bits]
    surface_mults = np.exp(1j * np.asarray(subset) * config.delta_theta)
    surface_labels = np.asarray([gray_code(i) for i in range(len(subset))])
    l = config.l
    if full:
        ks = list(itertools.product(order, repeat=l))
    else:
        # enumerate by ascending label so codeword index == label value
        per_surface_by_label = [None] * len(subset)
        for idx, k_index in enumerate(subset):
            per_surface_by_label[gray_code(idx)] = k_index
        ks = list(itertools.product(per_surface_by_label, repeat=l))
    offsets = np.asarray(ks, dtype=np.int64).reshape(len(ks), l)
    mults = np.exp(1j * offsets * config.delta_theta)
    labels = np.zeros(len(ks), dtype=np.int64)
    for row, k_tuple in enumerate(ks):
        value = 0
        for k_index in k_tuple:
            value = (value << bits) | _srpm_surface_label(k_index, order, bits)
        labels[row] = value
    # reorder surface candidates by label for deterministic tree enumeration
    by_label = np.argsort(surface_labels, kind="stable")
    return RisCodebook(
        scheme="srpm",
        multipliers=mults,
        labels=labels,
        n_bits=l * bits,
        offsets=offsets,
        product_form=True,
        surface_multipliers=surface_mults[by_label],
        surface_labels=surface_labels[by_label],
        surface_offsets=np.asarray(subset)[by_label],
        surface_bits=bits,
    )


def _pbf_codebook(config: SystemConfig) -> RisCodebook:
    l = config.l
    return RisCodebook(
        scheme="pbf",
        multipliers=np.ones((1, l), dtype=np.complex128),
        labels=np.zeros(1, dtype=np.int64),
        n_bits=0,
        product_form=True,
        surface_multipliers=np.ones(1, dtype=np.complex128),
        surface_labels=np.zeros(1, dtype=np.int64),
        surface_bits=0,
    )


def _pbit_codebook(config: SystemConfig) -> RisCodebook:
    l = config.l
    patterns = np.arange(1 << l)
    mults = np.zeros((patterns.size, l), dtype=np.complex128)
    for row, pattern in enumerate(patterns):
        for j in range(l):
            mults[row, j] = (pattern >> (l - 1 - j)) & 1
    return RisCodebook(
        scheme="pbit",
        multipliers=mults,
        labels=patterns.astype(np.int64),
        n_bits=l,
        product_form=True,
        surface_multipliers=np.asarray([0.0, 1.0], dtype=np.complex128),
        surface_labels=np.asarray([0, 1]),
        surface_bits=1,
    )


def _combination_codebook(
    scheme: str, config: SystemConfig, active_value: complex, full: bool
) -> RisCodebook:
    l, p = config.l, config.scheme_p
    combos = list(itertools.combinations(range(l), p))
    bits = int(math.floor(math.log2(len(combos))))
    if not full:
        combos = combos[: 1 << bits]
    mults = np.ones((len(combos), l), dtype=np.complex128)
    for row, combo in enumerate(combos):
        for j in combo:
            mults[row, j] = active_value
    labels = np.arange(len(combos), dtype=np.int64) % (1 << bits)
    return RisCodebook(
        scheme=scheme,
        multipliers=mults,
        labels=labels,
        n_bits=bits,
        product_form=False,
    )


def build_ris_codebook(config: SystemConfig, full: bool = False) -> RisCodebook:
    """Reflection alphabet for the configured scheme.

    full=False yields the bit-addressable transmit alphabet (2**n_bits
    codewords, index == label); full=True the complete alphabet the
    analytical sums run over.
    """
    scheme = config.scheme
    if scheme == "srpm":
        return _srpm_codebook(config, full)
    if scheme == "pbf":
        return _pbf_codebook(config)
    if scheme == "pbit":
        return _pbit_codebook(config)
    if scheme == "rpm":
        return _combination_codebook("rpm", config, 0.0, full)
    if scheme == "qrm":
        return _combination_codebook("qrm", config, 1j, full)
    raise ConfigError(f"unknown scheme {scheme!r}")


def bits_per_use(config: SystemConfig) -> int:
    """Information bits carried per channel use (stream bits + pattern bits)."""
    return config.n_s * config.bits_per_stream_symbol + build_ris_codebook(config).n_bits


# ---------------------------------------------------------------------------
# symbols and the transmit alphabet


@dataclass(frozen=True)
class SymbolPair:
    """One joint message: stream symbols plus per-surface multipliers."""

    s: np.ndarray
    s_labels: np.ndarray
    multipliers: np.ndarray
    k: np.ndarray | None
    ris_label: int
    bits: np.ndarray


class TransmitAlphabet:
    """Enumerated candidate set: every (s, v) with its equivalent-form column.

    Candidates are ordered lexicographically by their concatenated bit label
    (stream bits first, then pattern bits), so index == label value for the
    bit-addressable alphabet.
    """

    def __init__(
        self,
        config: SystemConfig,
        constellation: Constellation,
        codebook: RisCodebook,
    ) -> None:
        self.config = config
        self.constellation = constellation
        self.codebook = codebook
        n_s, l = config.n_s, config.l
        bits_s = constellation.bits
        m = constellation.size
        n_s_cand = m**n_s
        v_count = codebook.size
        self.size = n_s_cand * v_count
        self.n_bits = n_s * bits_s + codebook.n_bits
        s_vectors = np.empty((n_s_cand, n_s), dtype=np.complex128)
        s_label_rows = np.empty((n_s_cand, n_s), dtype=np.int64)
        for s_int in range(n_s_cand):
            for stream in range(n_s):
                label = (s_int >> (bits_s * (n_s - 1 - stream))) & (m - 1)
                s_label_rows[s_int, stream] = label
                s_vectors[s_int, stream] = constellation.by_label[label]
        self._s_vectors = s_vectors
        self._s_label_rows = s_label_rows
        s_idx = np.repeat(np.arange(n_s_cand), v_count)
        v_idx = np.tile(np.arange(v_count), n_s_cand)
        self.s_indices = s_idx
        self.ris_indices = v_idx
        # column = kron([multipliers, 1], s)
        mults_ext = np.concatenate(
            [codebook.multipliers, np.ones((v_count, 1))], axis=1
        )
        cols = mults_ext[v_idx][:, :, None] * s_vectors[s_idx][:, None, :]
        self.x_cols = cols.reshape(self.size, (l + 1) * n_s).T.copy()
        self.labels_int = (
            s_idx.astype(np.int64) << codebook.n_bits
        ) | codebook.labels[v_idx]
        shifts = np.arange(self.n_bits - 1, -1, -1)
        self.labels_bits = (
            (self.labels_int[:, None] >> shifts[None, :]) & 1
        ).astype(np.uint8)

    def pair(self, index: int) -> SymbolPair:
        s_int = int(self.s_indices[index])
        v_idx = int(self.ris_indices[index])
        cb = self.codebook
        return SymbolPair(
            s=self._s_vectors[s_int].copy(),
            s_labels=self._s_label_rows[s_int].copy(),
            multipliers=cb.multipliers[v_idx].copy(),
            k=None if cb.offsets is None else cb.offsets[v_idx].copy(),
            ris_label=int(cb.labels[v_idx]),
            bits=self.labels_bits[index].copy(),
        )

    def index_of_bits(self, bits: np.ndarray) -> int:
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size != self.n_bits:
            raise FramingError(
                f"expected {self.n_bits} bits, got {bits.size}"
            )
        value = _bits_to_int(bits)
        if self.size != 1 << self.n_bits:
            raise FramingError(
                "bit addressing is only defined for the bit-addressable alphabet"
            )
        return value


@functools.lru_cache(maxsize=None)
def transmit_alphabet(config: SystemConfig, full: bool = False) -> TransmitAlphabet:
    constellation = build_constellation(config.constellation, config.m)
    codebook = build_ris_codebook(config, full=full)
    return TransmitAlphabet(config, constellation, codebook)


def map_bits_to_symbols(
    bits: np.ndarray,
    config: SystemConfig,
    constellation: Constellation | None = None,
) -> SymbolPair:
    """Bits -> SymbolPair over the bit-addressable alphabet.

    The first n_s*log2(m) bits pick the stream symbols (Gray labels), each
    following group the pattern of one sub-surface in order.
    """
    if constellation is None:
        alphabet = transmit_alphabet(config)
    else:
        alphabet = TransmitAlphabet(
            config, constellation, build_ris_codebook(config)
        )
    return alphabet.pair(alphabet.index_of_bits(bits))


def pair_to_bits(pair: SymbolPair) -> np.ndarray:
    return pair.bits.copy()


# ---------------------------------------------------------------------------
# reflection patterns applied to the surface


def element_multipliers(multipliers: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Expand per-surface multipliers to the full element diagonal."""
    multipliers = np.asarray(multipliers)
    if multipliers.shape != (config.l,):
        raise DimensionError(
            f"expected {config.l} per-surface multipliers, got shape "
            f"{multipliers.shape}"
        )
    return np.repeat(multipliers, config.elements_per_surface)


def build_phase_matrix(pair: SymbolPair, config: SystemConfig) -> np.ndarray:
    """Diagonal reflection-pattern matrix for one message."""
    return np.diag(element_multipliers(pair.multipliers, config))


def baseline_phase_matrix(
    scheme: str,
    pattern_bits: np.ndarray,
    channels: ChannelSet | None,
    config: SystemConfig,
) -> np.ndarray:
    """Reflection matrix a baseline scheme applies for a bit pattern.

    channels is accepted for signature stability; the patterns here do not
    adapt to the realization (alignment lives in the base phases).
    """
    cfg = config if config.scheme == scheme else _with_scheme(config, scheme)
    codebook = build_ris_codebook(cfg)
    if pattern_bits is None:
        pattern_bits = ()
    bits = np.asarray(pattern_bits, dtype=np.uint8).ravel()
    if bits.size != codebook.n_bits:
        raise FramingError(
            f"scheme {scheme!r} expects {codebook.n_bits} pattern bits, "
            f"got {bits.size}"
        )
    row = _bits_to_int(bits) if codebook.n_bits else 0
    return np.diag(element_multipliers(codebook.multipliers[row], cfg))


def _with_scheme(config: SystemConfig, scheme: str) -> SystemConfig:
    import dataclasses

    return dataclasses.replace(config, scheme=scheme)


# ---------------------------------------------------------------------------
# received signal and its equivalent form


def _check_precoder(w: np.ndarray, config: SystemConfig) -> np.ndarray:
    w = np.asarray(w, dtype=np.complex128)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape != (config.n_t, config.n_s):
        raise DimensionError(
            f"precoder must have shape ({config.n_t}, {config.n_s}), got {w.shape}"
        )
    power = float(np.sum(np.abs(w) ** 2))
    if abs(power - 1.0) > 1e-9:
        raise ConfigError(
            f"precoder power trace(W W^H) must equal 1 within 1e-9, got {power!r}"
        )
    return w


def synthesize_received(
    pair: SymbolPair,
    channels: ChannelSet,
    w: np.ndarray,
    config: SystemConfig,
    rng: np.random.Generator | None = None,
    include_noise: bool = True,
) -> np.ndarray:
    """One received vector sqrt(P)*(H_d + H_r diag(e^{j theta_b}) Xi G) W s + z."""
    w = _check_precoder(w, config)
    refl = element_multipliers(pair.multipliers, config) * np.exp(
        1j * channels.base_phases
    )
    ws = w @ pair.s
    y = np.sqrt(config.power) * (
        channels.h_d @ ws + channels.h_r @ (refl * (channels.g @ ws))
    )
    if include_noise and config.sigma2 > 0.0:
        if rng is None:
            raise ConfigError("rng is required when noise is enabled")
        y = y + np.sqrt(config.sigma2) * complex_normal(rng, y.shape)
    return y


@dataclass(frozen=True)
class EquivalentChannel:
    """Compact form: y = sqrt(P) * matrix @ kron([v, 1], s) + z.

    Column blocks 1..l hold the per-surface cascade seen through the
    precoder, the final block the direct link.
    """

    matrix: np.ndarray
    config: SystemConfig


def equivalent_x(pair: SymbolPair) -> np.ndarray:
    """Stacked transmit vector kron([multipliers, 1], s)."""
    ext = np.concatenate([pair.multipliers, np.ones(1)])
    return np.kron(ext, pair.s)


def assemble_equivalent_channel(
    channels: ChannelSet, w: np.ndarray, config: SystemConfig
) -> EquivalentChannel:
    w = _check_precoder(w, config)
    matrix = _equivalent_batch(
        channels.h_d[None], channels.h_r[None], channels.static, w, config
    )[0]
    return EquivalentChannel(matrix=matrix, config=config)


def _equivalent_batch(
    h_d: np.ndarray,
    h_r: np.ndarray,
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
) -> np.ndarray:
    """Equivalent-channel matrices for a batch of fading draws."""
    n_s, l = config.n_s, config.l
    group = config.elements_per_surface
    gw = static.g @ w  # (n, n_s)
    gw_phased = np.exp(1j * static.base_phases)[:, None] * gw
    batch = h_d.shape[0]
    out = np.empty((batch, config.n_r, (l + 1) * n_s), dtype=np.complex128)
    for j in range(l):
        sel = slice(j * group, (j + 1) * group)
        out[:, :, j * n_s : (j + 1) * n_s] = h_r[:, :, sel] @ gw_phased[sel]
    out[:, :, l * n_s :] = h_d @ w
    return out


def assemble_equivalent_batch(
    h_d: np.ndarray,
    h_r: np.ndarray,
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
) -> np.ndarray:
    """Batch variant of :func:`assemble_equivalent_channel` (returns arrays)."""
    w = _check_precoder(w, config)
    return _equivalent_batch(h_d, h_r, static, w, config)
