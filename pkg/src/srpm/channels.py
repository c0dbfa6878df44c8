"""Channel generation: correlated Rayleigh fading, the static reflect-path
geometry matrix, base reflection phases, and binary serialization.

The direct and reflected links are Kronecker-correlated Rayleigh draws; the
transmitter-to-surface matrix G is a finite sum of steering outer products
held fixed for a whole experiment along with the base phases.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .errors import ConfigError, CorrelationError, DimensionError, FramingError

MATRIX_DUMP_MAGIC = b"SRPMMAT1"
BASE_PHASE_POLICIES = ("zero", "uniform_random", "pbf_aligned")


def exponential_correlation(size: int, rho: float) -> np.ndarray:
    """Real symmetric correlation matrix with entries rho**|i-j|.

    rho = 0 gives the identity. Valid for 0 <= rho < 1 (PSD by construction).
    """
    if size < 1:
        raise DimensionError(f"correlation size must be >= 1, got {size}")
    if not 0.0 <= rho < 1.0:
        raise CorrelationError(f"rho must lie in [0, 1), got {rho}")
    idx = np.arange(size)
    return rho ** np.abs(idx[:, None] - idx[None, :]) if rho else np.eye(size)


@dataclass(frozen=True)
class CorrelationSpec:
    """Per-side spatial correlation, exponential model (0 = uncorrelated)."""

    rho_bs: float = 0.0
    rho_ris: float = 0.0
    rho_user: float = 0.0

    def bs_matrix(self, n_t: int) -> np.ndarray:
        return exponential_correlation(n_t, self.rho_bs)

    def ris_matrix(self, n: int) -> np.ndarray:
        return exponential_correlation(n, self.rho_ris)

    def user_matrix(self, n_r: int) -> np.ndarray:
        return exponential_correlation(n_r, self.rho_user)

    @property
    def uncorrelated(self) -> bool:
        return self.rho_bs == 0.0 and self.rho_ris == 0.0 and self.rho_user == 0.0


def hermitian_sqrt(mat: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Small negative eigenvalues (roundoff) are clamped to zero; a matrix that
    is not Hermitian within rtol * ||mat|| is rejected.
    """
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}")
    scale = np.linalg.norm(mat)
    if np.linalg.norm(mat - mat.conj().T) > rtol * max(scale, 1.0):
        raise CorrelationError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(mat)
    if w.size and w[0] < -rtol * max(scale, 1.0):
        raise CorrelationError(f"matrix has negative eigenvalue {w[0]:.3e}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def steering_vector(size: int, angle: float, d_over_lambda: float = 0.5) -> np.ndarray:
    """Uniform linear array response, element m = exp(j*2*pi*d/lambda*m*sin(angle))."""
    if size < 1:
        raise DimensionError(f"steering vector size must be >= 1, got {size}")
    m = np.arange(size)
    return np.exp(2j * np.pi * d_over_lambda * m * np.sin(angle))


@dataclass(frozen=True)
class LosSpec:
    """Geometry of the static transmitter-to-surface link.

    aoa/aod hold one arrival/departure angle per path. gains, when given,
    pin the per-path complex amplitudes; otherwise they are drawn
    CN(0, 10**(-kappa_db/10)) at build time.
    """

    aoa: tuple[float, ...]
    aod: tuple[float, ...]
    kappa_db: float = 0.0
    d_over_lambda: float = 0.5
    gains: tuple[complex, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.aoa) != len(self.aod) or not self.aoa:
            raise ConfigError(
                "aoa and aod must be equal-length non-empty angle tuples"
            )
        if self.gains is not None and len(self.gains) != len(self.aoa):
            raise ConfigError("gains must match the number of paths")

    @property
    def n_paths(self) -> int:
        return len(self.aoa)

    @classmethod
    def random(
        cls,
        n_paths: int,
        rng: np.random.Generator,
        kappa_db: float = 0.0,
        d_over_lambda: float = 0.5,
    ) -> "LosSpec":
        """Draw arrival/departure angles uniformly over (-pi/2, pi/2)."""
        if n_paths < 1:
            raise ConfigError(f"n_paths must be >= 1, got {n_paths}")
        aoa = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
        aod = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
        return cls(tuple(aoa), tuple(aod), kappa_db, d_over_lambda)


def build_los_channel(
    spec: LosSpec, n: int, n_t: int, rng: np.random.Generator
) -> np.ndarray:
    """Static reflect-path geometry matrix G of shape (n, n_t).

    G = sqrt(n*n_t/n_paths) * sum_i gain_i * a_n(aoa_i) a_nt(aod_i)^H with
    unit-norm array responses, so E||G||_F^2 = n*n_t at kappa_db = 0.
    """
    n_p = spec.n_paths
    a_r = np.column_stack(
        [steering_vector(n, ang, spec.d_over_lambda) for ang in spec.aoa]
    ) / np.sqrt(n)
    a_t = np.column_stack(
        [steering_vector(n_t, ang, spec.d_over_lambda) for ang in spec.aod]
    ) / np.sqrt(n_t)
    if spec.gains is not None:
        gains = np.asarray(spec.gains, dtype=np.complex128)
    else:
        scale = 10.0 ** (-spec.kappa_db / 20.0)
        gains = scale * (
            rng.standard_normal(n_p) + 1j * rng.standard_normal(n_p)
        ) / np.sqrt(2.0)
    return np.sqrt(n * n_t / n_p) * ((a_r * gains) @ a_t.conj().T)


def complex_normal(
    rng: np.random.Generator, shape: tuple[int, ...]
) -> np.ndarray:
    """i.i.d. CN(0, 1) array."""
    return (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ) / np.sqrt(2.0)


def sample_kronecker_rayleigh(
    rows: int,
    cols: int,
    r_row: np.ndarray,
    r_col: np.ndarray,
    beta: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One Kronecker-correlated Rayleigh draw sqrt(beta) * R_row^{1/2} Hw R_col^{1/2}."""
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    r_row = np.asarray(r_row)
    r_col = np.asarray(r_col)
    if r_row.shape != (rows, rows) or r_col.shape != (cols, cols):
        raise DimensionError(
            f"correlation shapes {r_row.shape}, {r_col.shape} do not match "
            f"({rows}, {cols})"
        )
    h_w = complex_normal(rng, (rows, cols))
    if beta == 0.0:
        return np.zeros((rows, cols), dtype=np.complex128)
    return np.sqrt(beta) * (hermitian_sqrt(r_row) @ h_w @ hermitian_sqrt(r_col))


@dataclass(frozen=True)
class StaticChannel:
    """Per-experiment fixed quantities: geometry, base phases, correlations."""

    g: np.ndarray
    base_phases: np.ndarray
    r_b: np.ndarray
    r_r: np.ndarray
    r_u: np.ndarray
    beta_d: float = 1.0
    beta_r: float = 1.0

    @property
    def uncorrelated(self) -> bool:
        return (
            np.array_equal(self.r_b, np.eye(self.r_b.shape[0]))
            and np.array_equal(self.r_r, np.eye(self.r_r.shape[0]))
            and np.array_equal(self.r_u, np.eye(self.r_u.shape[0]))
        )


@dataclass(frozen=True)
class ChannelSet:
    """One fading realization plus the static quantities it was drawn under."""

    h_d: np.ndarray
    h_r: np.ndarray
    static: StaticChannel

    @property
    def g(self) -> np.ndarray:
        return self.static.g

    @property
    def base_phases(self) -> np.ndarray:
        return self.static.base_phases

    @property
    def beta_d(self) -> float:
        return self.static.beta_d

    @property
    def beta_r(self) -> float:
        return self.static.beta_r


class ChannelSampler:
    """Draws fading realizations under one fixed static setup.

    The geometry matrix and base phases are drawn once at construction and
    shared (the same array objects) by every ChannelSet this sampler emits;
    only h_d and h_r are redrawn per call.
    """

    def __init__(
        self,
        config: SystemConfig,
        corr: CorrelationSpec,
        los: LosSpec,
        base_phase_policy: str,
        rng: np.random.Generator,
        beta_d: float = 1.0,
        beta_r: float = 1.0,
        g: np.ndarray | None = None,
    ) -> None:
        if base_phase_policy not in BASE_PHASE_POLICIES:
            raise ConfigError(
                f"base_phase_policy must be one of {BASE_PHASE_POLICIES}, "
                f"got {base_phase_policy!r}"
            )
        self.config = config
        self.corr = corr
        if g is None:
            g = build_los_channel(los, config.n, config.n_t, rng)
        else:
            g = np.asarray(g, dtype=np.complex128)
            if g.shape != (config.n, config.n_t):
                raise DimensionError(
                    f"geometry matrix must have shape ({config.n}, {config.n_t}), "
                    f"got {g.shape}"
                )
        r_b = corr.bs_matrix(config.n_t)
        r_r = corr.ris_matrix(config.n)
        r_u = corr.user_matrix(config.n_r)
        self._sqrt_r_b = None if corr.rho_bs == 0.0 else hermitian_sqrt(r_b)
        self._sqrt_r_r = None if corr.rho_ris == 0.0 else hermitian_sqrt(r_r)
        self._sqrt_r_u = None if corr.rho_user == 0.0 else hermitian_sqrt(r_u)
        base_phases = self._draw_base_phases(base_phase_policy, g, rng, beta_r)
        self.static = StaticChannel(
            g=g,
            base_phases=base_phases,
            r_b=r_b,
            r_r=r_r,
            r_u=r_u,
            beta_d=beta_d,
            beta_r=beta_r,
        )

    def _draw_base_phases(
        self,
        policy: str,
        g: np.ndarray,
        rng: np.random.Generator,
        beta_r: float,
    ) -> np.ndarray:
        n = self.config.n
        if policy == "zero":
            return np.zeros(n)
        if policy == "uniform_random":
            return rng.uniform(0.0, 2 * np.pi, n)
        # pbf_aligned: rotate each element's reference cascade (first receive
        # antenna, uniform reference precoder) onto the positive real axis,
        # using one fading draw taken at static-setup time.
        h_ref = self._draw_h_r(rng, 1, beta_r)[0]
        w_ref = np.ones(self.config.n_t) / np.sqrt(self.config.n_t)
        cascade = h_ref[0] * (g @ w_ref)
        return np.mod(-np.angle(cascade), 2 * np.pi)

    def _draw_h_d(
        self, rng: np.random.Generator, count: int, beta_d: float
    ) -> np.ndarray:
        cfg = self.config
        h_w = complex_normal(rng, (count, cfg.n_r, cfg.n_t))
        if self._sqrt_r_u is not None:
            h_w = self._sqrt_r_u @ h_w
        if self._sqrt_r_b is not None:
            h_w = h_w @ self._sqrt_r_b
        return np.sqrt(beta_d) * h_w

    def _draw_h_r(
        self, rng: np.random.Generator, count: int, beta_r: float
    ) -> np.ndarray:
        cfg = self.config
        h_w = complex_normal(rng, (count, cfg.n_r, cfg.n))
        if self._sqrt_r_u is not None:
            h_w = self._sqrt_r_u @ h_w
        if self._sqrt_r_r is not None:
            h_w = h_w @ self._sqrt_r_r
        return np.sqrt(beta_r) * h_w

    def sample_batch(
        self, rng: np.random.Generator, count: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Draw `count` fading realizations, shapes (count, n_r, n_t) and (count, n_r, n)."""
        st = self.static
        return (
            self._draw_h_d(rng, count, st.beta_d),
            self._draw_h_r(rng, count, st.beta_r),
        )

    def sample(self, rng: np.random.Generator) -> ChannelSet:
        h_d, h_r = self.sample_batch(rng, 1)
        return ChannelSet(h_d=h_d[0], h_r=h_r[0], static=self.static)


def sample_channel_set(
    config: SystemConfig,
    corr: CorrelationSpec,
    los: LosSpec,
    base_phase_policy: str,
    rng: np.random.Generator,
    beta_d: float = 1.0,
    beta_r: float = 1.0,
) -> ChannelSet:
    """One-shot draw of a full channel set (static parts included)."""
    sampler = ChannelSampler(
        config, corr, los, base_phase_policy, rng, beta_d=beta_d, beta_r=beta_r
    )
    return sampler.sample(rng)


def save_complex_matrix(path, mat: np.ndarray) -> None:
    """Write a complex matrix as little-endian float64 interleaved re/im,
    row-major, behind a 16-byte header {magic, rows, cols}."""
    mat = np.ascontiguousarray(np.asarray(mat, dtype=np.complex128))
    if mat.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {mat.shape}")
    rows, cols = mat.shape
    header = struct.pack("<8sII", MATRIX_DUMP_MAGIC, rows, cols)
    interleaved = np.empty((rows, cols, 2), dtype="<f8")
    interleaved[..., 0] = mat.real
    interleaved[..., 1] = mat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def load_complex_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`save_complex_matrix`."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise FramingError("matrix dump shorter than its 16-byte header")
        magic, rows, cols = struct.unpack("<8sII", header)
        if magic != MATRIX_DUMP_MAGIC:
            raise FramingError(f"bad matrix dump magic {magic!r}")
        payload = fh.read()
    expected = rows * cols * 16
    if len(payload) != expected:
        raise FramingError(
            f"matrix dump payload has {len(payload)} bytes, expected {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f8").reshape(rows, cols, 2)
    return (flat[..., 0] + 1j * flat[..., 1]).astype(np.complex128)
