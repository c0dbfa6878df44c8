"""Analytical error-rate and capacity evaluation.

For messages x, x_hat the noiseless receive-side difference is a zero-mean
complex Gaussian vector whose covariance factors as kappa(x, x_hat) * R_rx:
a scalar pairwise energy times the receive correlation. Averaged pairwise
error probabilities therefore reduce to the MGF of a correlated chi-square,
and the bit error union bound to a weighted sum of such terms over ordered
message pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .channels import StaticChannel
from .config import SystemConfig
from .errors import ConfigError, DegenerateInputError, DomainError
from .modulation import (
    SymbolPair,
    _check_precoder,
    element_multipliers,
    hamming_bits,
    transmit_alphabet,
)


def q_function(x) -> np.ndarray | float:
    """Gaussian tail probability Q(x)."""
    return 0.5 * special.erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


@dataclass(frozen=True)
class QBoundSpec:
    """Exponential upper bound Q(x) <= sum_i a_i * exp(-b_i * x^2).

    two_term uses the tight fixed pair (1/12, 1/2), (1/4, 2/3). exponential
    partitions the tail integral at angles theta_1 < ... < theta_q = pi/2
    (uniform by default) giving a_i = (theta_i - theta_{i-1})/pi and
    b_i = 1/(2 sin^2 theta_i); one term recovers the Chernoff bound.
    """

    kind: str
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.a) != len(self.b) or not self.a:
            raise ConfigError("coefficient lists must be nonempty and equal length")
        if any(v <= 0 for v in self.a) or any(v <= 0 for v in self.b):
            raise ConfigError("bound coefficients must be positive")

    @classmethod
    def two_term(cls) -> "QBoundSpec":
        return cls("two_term", (1.0 / 12.0, 1.0 / 4.0), (1.0 / 2.0, 2.0 / 3.0))

    @classmethod
    def exponential(
        cls, terms: int, angles: tuple[float, ...] | None = None
    ) -> "QBoundSpec":
        if terms < 1:
            raise ConfigError(f"terms must be >= 1, got {terms}")
        if angles is None:
            angles = tuple((i + 1) * math.pi / (2 * terms) for i in range(terms))
        if len(angles) != terms:
            raise ConfigError("angle count must match terms")
        prev = 0.0
        for theta in angles:
            if theta <= prev:
                raise ConfigError("angles must be strictly increasing from 0")
            prev = theta
        if abs(angles[-1] - math.pi / 2) > 1e-12:
            raise ConfigError("last angle must be pi/2 to cover the tail integral")
        a = []
        b = []
        prev = 0.0
        for theta in angles:
            a.append((theta - prev) / math.pi)
            b.append(1.0 / (2.0 * math.sin(theta) ** 2))
            prev = theta
        return cls("exponential", tuple(a), tuple(b))

    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.a), np.asarray(self.b)

    def evaluate(self, x) -> np.ndarray | float:
        x2 = np.square(np.asarray(x, dtype=np.float64))
        a, b = self.coefficients()
        return np.einsum("i,i...->...", a, np.exp(-b[:, None] * x2[None, ...]))


def q_two_term(x) -> np.ndarray | float:
    return QBoundSpec.two_term().evaluate(x)


def q_exp_bound(x, terms: int | QBoundSpec) -> np.ndarray | float:
    spec = terms if isinstance(terms, QBoundSpec) else QBoundSpec.exponential(terms)
    return spec.evaluate(x)


# ---------------------------------------------------------------------------
# single-pair statistics


@dataclass(frozen=True)
class PairwiseContext:
    """Receive-side difference statistics for one ordered message pair.

    eigenvalues are those of the difference covariance; sigma_d2 is the
    common per-antenna variance when the receive side is uncorrelated (None
    otherwise); error_bits counts label bits the confusion flips.
    """

    eigenvalues: np.ndarray
    sigma_d2: float | None
    error_bits: int
    cov: np.ndarray


def pairwise_energy(
    pair: SymbolPair,
    pair_hat: SymbolPair,
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
) -> float:
    """Scalar kappa with difference covariance kappa * R_rx.

    Direct part: beta_d * ||R_b^{1/2} W (s - s_hat)||^2. Reflected part:
    beta_r * u^H R_r u with u_n = e^{j theta_n} [ (G W s)_n xi_{l(n)} -
    (G W s_hat)_n xi_hat_{l(n)} ].
    """
    w = _check_precoder(w, config)
    ds = pair.s - pair_hat.s
    direct = float(np.real(ds.conj() @ (w.conj().T @ static.r_b @ w) @ ds))
    phase = np.exp(1j * static.base_phases)
    xi = element_multipliers(pair.multipliers, config)
    xi_hat = element_multipliers(pair_hat.multipliers, config)
    gws = static.g @ (w @ pair.s)
    gws_hat = static.g @ (w @ pair_hat.s)
    u = phase * (gws * xi - gws_hat * xi_hat)
    reflected = float(np.real(u.conj() @ static.r_r @ u))
    return static.beta_d * max(direct, 0.0) + static.beta_r * max(reflected, 0.0)


def delta_covariance(
    pair: SymbolPair,
    pair_hat: SymbolPair,
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
) -> PairwiseContext:
    """Difference covariance and spectrum for one ordered message pair."""
    kappa = pairwise_energy(pair, pair_hat, static, w, config)
    cov = kappa * static.r_u
    mu = np.clip(np.linalg.eigvalsh(static.r_u), 0.0, None)
    sigma_d2 = kappa if static.uncorrelated else None
    return PairwiseContext(
        eigenvalues=kappa * mu,
        sigma_d2=sigma_d2,
        error_bits=hamming_bits(pair.bits, pair_hat.bits),
        cov=cov,
    )


def mgf_lambda(ctx, t: float) -> float:
    """MGF of the squared difference norm at argument t.

    Accepts a PairwiseContext (using the (1 - sigma_d2 t)^{-n_r} shortcut
    when the receive side is uncorrelated) or a bare eigenvalue array; the
    general form is prod_j (1 - lambda_j t)^{-1}.
    """
    if isinstance(ctx, PairwiseContext):
        if ctx.sigma_d2 is not None:
            n_r = ctx.eigenvalues.size
            factor = 1.0 - ctx.sigma_d2 * t
            if factor <= 0.0:
                raise DomainError(
                    f"MGF argument {t} reaches the dominant-eigenvalue pole"
                )
            return float(factor**-n_r)
        eigenvalues = ctx.eigenvalues
    else:
        eigenvalues = ctx
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    factors = 1.0 - eigenvalues * t
    if np.any(factors <= 0.0):
        raise DomainError(
            f"MGF argument {t} reaches the dominant-eigenvalue pole"
        )
    return float(np.prod(1.0 / factors))


def cpep(distance2: float, power: float, sigma2: float) -> float:
    """Pairwise error probability conditioned on the squared distance."""
    if sigma2 <= 0.0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    if distance2 < 0.0:
        raise DomainError(f"squared distance must be >= 0, got {distance2}")
    return float(q_function(math.sqrt(power * distance2 / (2.0 * sigma2))))


def apep(
    ctx: PairwiseContext,
    power: float,
    sigma2: float,
    qspec: QBoundSpec | None = None,
) -> float:
    """Fading-averaged pairwise error probability upper bound."""
    if sigma2 <= 0.0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    qspec = qspec or QBoundSpec.two_term()
    a, b = qspec.coefficients()
    total = 0.0
    for a_i, b_i in zip(a, b):
        total += a_i * mgf_lambda(ctx, -b_i * power / (2.0 * sigma2))
    return total


# ---------------------------------------------------------------------------
# whole-alphabet tables


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    exact: bool
    n_eval: int
    stderr: float


@dataclass(frozen=True)
class PairwiseTable:
    """Pairwise energies and bit weights over ordered message pairs.

    Exact tables enumerate every ordered pair x != x_hat; sampled tables hold
    a uniform subsample and report estimates with a standard error. mu holds
    the receive-correlation eigenvalues shared by all pairs.
    """

    kappas: np.ndarray
    err_bits: np.ndarray
    mu: np.ndarray
    n_r: int
    rate_bits: int
    alphabet_size: int
    exact: bool
    total_pairs: int

    def _mgf_terms(self, t: float) -> np.ndarray:
        """Per-pair MGF at argument -t (t >= 0), vectorized."""
        factors = 1.0 + self.kappas[:, None] * (t * self.mu[None, :])
        return np.prod(1.0 / factors, axis=1)

    def union_bound(
        self, power: float, sigma2: float, qspec: QBoundSpec | None = None
    ) -> BoundEstimate:
        """Average bit error probability union bound at one operating point."""
        if sigma2 <= 0.0:
            raise DomainError(f"sigma2 must be positive, got {sigma2}")
        if power < 0.0:
            raise DomainError(f"power must be >= 0, got {power}")
        qspec = qspec or QBoundSpec.two_term()
        a, b = qspec.coefficients()
        apep_vals = np.zeros(self.kappas.size)
        for a_i, b_i in zip(a, b):
            apep_vals += a_i * self._mgf_terms(b_i * power / (2.0 * sigma2))
        weighted = self.err_bits * apep_vals
        if self.exact:
            value = float(weighted.sum()) / (self.rate_bits * self.alphabet_size)
            return BoundEstimate(value, True, int(self.kappas.size), 0.0)
        n = self.kappas.size
        scale = (self.alphabet_size - 1) / self.rate_bits
        value = scale * float(weighted.mean())
        stderr = scale * float(weighted.std(ddof=1)) / math.sqrt(n)
        return BoundEstimate(value, False, int(n), stderr)

    def capacity(self, power: float, sigma2: float) -> float:
        """Discrete-input mutual information lower bound, bits per use.

        2*log2(S) - log2(S + sum over ordered pairs of the pairwise MGF),
        clamped to [0, log2 S]; increases from 0 to log2 S across SNR.
        """
        if sigma2 <= 0.0:
            raise DomainError(f"sigma2 must be positive, got {sigma2}")
        mgfs = self._mgf_terms(power / (2.0 * sigma2))
        if self.exact:
            pair_sum = float(mgfs.sum())
        else:
            pair_sum = self.total_pairs * float(mgfs.mean())
        s = self.alphabet_size
        value = 2.0 * math.log2(s) - math.log2(s + pair_sum)
        return float(min(max(value, 0.0), math.log2(s)))


def build_pairwise_table(
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
    full: bool = True,
    pair_cap: int = 2**20,
    pair_samples: int = 2**18,
    rng: np.random.Generator | None = None,
) -> PairwiseTable:
    """Pairwise energy table over the message alphabet.

    full=True runs over the complete alphabet the analytical sums are defined
    on; full=False restricts to the bit-addressable transmit subset. When the
    number of ordered pairs exceeds pair_cap, a uniform sample of
    pair_samples pairs is drawn instead (rng required).
    """
    w = _check_precoder(w, config)
    alphabet = transmit_alphabet(config, full=full)
    size = alphabet.size
    n_s, l = config.n_s, config.l
    group = config.elements_per_surface

    gw = static.g @ w  # (n, n_s)
    phased = np.exp(1j * static.base_phases)[:, None] * gw
    blocks = [phased[j * group : (j + 1) * group] for j in range(l)]
    t_full = np.empty((l * n_s, l * n_s), dtype=np.complex128)
    for a in range(l):
        sel_a = slice(a * group, (a + 1) * group)
        for b in range(l):
            sel_b = slice(b * group, (b + 1) * group)
            t_full[a * n_s : (a + 1) * n_s, b * n_s : (b + 1) * n_s] = (
                blocks[a].conj().T @ static.r_r[sel_a, sel_b] @ blocks[b]
            )
    q_b = w.conj().T @ static.r_b @ w  # (n_s, n_s)
    mu = np.clip(np.linalg.eigvalsh(static.r_u), 0.0, None)

    s_all = alphabet.x_cols[l * n_s :, :].T  # (size, n_s), the direct block
    mults = alphabet.codebook.multipliers[alphabet.ris_indices]  # (size, l)
    d_flat = (mults[:, :, None] * s_all[:, None, :]).reshape(size, l * n_s)
    bits = alphabet.labels_bits

    total_pairs = size * (size - 1)
    if total_pairs <= pair_cap:
        f_mat = d_flat.conj() @ t_full @ d_flat.T
        g_mat = s_all.conj() @ q_b @ s_all.T
        f_diag = np.real(np.diag(f_mat))
        g_diag = np.real(np.diag(g_mat))
        kappa_u = f_diag[:, None] + f_diag[None, :] - 2.0 * np.real(f_mat)
        kappa_d = g_diag[:, None] + g_diag[None, :] - 2.0 * np.real(g_mat)
        kappas = static.beta_d * kappa_d + static.beta_r * kappa_u
        err = np.sum(bits[:, None, :] != bits[None, :, :], axis=2)
        mask = ~np.eye(size, dtype=bool)
        return PairwiseTable(
            kappas=np.clip(kappas[mask], 0.0, None),
            err_bits=err[mask].astype(np.float64),
            mu=mu,
            n_r=config.n_r,
            rate_bits=alphabet.n_bits,
            alphabet_size=size,
            exact=True,
            total_pairs=total_pairs,
        )

    if rng is None:
        raise ConfigError(
            f"{total_pairs} ordered pairs exceed pair_cap={pair_cap}; "
            "sampling needs an rng"
        )
    p = rng.integers(0, size, pair_samples)
    q = rng.integers(0, size - 1, pair_samples)
    q = np.where(q >= p, q + 1, q)
    dd = d_flat[p] - d_flat[q]
    kappa_u = np.real(np.einsum("ij,jk,ik->i", dd.conj(), t_full, dd))
    ds = s_all[p] - s_all[q]
    kappa_d = np.real(np.einsum("ij,jk,ik->i", ds.conj(), q_b, ds))
    kappas = static.beta_d * kappa_d + static.beta_r * kappa_u
    err = np.sum(bits[p] != bits[q], axis=1)
    return PairwiseTable(
        kappas=np.clip(kappas, 0.0, None),
        err_bits=err.astype(np.float64),
        mu=mu,
        n_r=config.n_r,
        rate_bits=alphabet.n_bits,
        alphabet_size=size,
        exact=False,
        total_pairs=total_pairs,
    )


def aber_union_bound(
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
    power: float,
    sigma2: float,
    qspec: QBoundSpec | None = None,
    alphabet: str = "full",
    detailed: bool = False,
    pair_cap: int = 2**20,
    pair_samples: int = 2**18,
    rng: np.random.Generator | None = None,
):
    """Average bit error rate union bound at one operating point.

    alphabet picks the message set the pairwise sum runs over: "full" is the
    complete alphabet, "bit" the bit-addressable subset a transmitter
    actually sends. detailed=True returns the BoundEstimate instead of the
    bare value.
    """
    if alphabet not in ("full", "bit"):
        raise ConfigError(f"alphabet must be 'full' or 'bit', got {alphabet!r}")
    table = build_pairwise_table(
        static,
        w,
        config,
        full=(alphabet == "full"),
        pair_cap=pair_cap,
        pair_samples=pair_samples,
        rng=rng,
    )
    estimate = table.union_bound(power, sigma2, qspec)
    return estimate if detailed else estimate.value


def dcmc_capacity(
    static: StaticChannel,
    w: np.ndarray,
    config: SystemConfig,
    power: float,
    sigma2: float,
    alphabet: str = "full",
    pair_cap: int = 2**20,
    pair_samples: int = 2**18,
    rng: np.random.Generator | None = None,
) -> float:
    """Discrete-input mutual information lower bound at one operating point."""
    if alphabet not in ("full", "bit"):
        raise ConfigError(f"alphabet must be 'full' or 'bit', got {alphabet!r}")
    table = build_pairwise_table(
        static,
        w,
        config,
        full=(alphabet == "full"),
        pair_cap=pair_cap,
        pair_samples=pair_samples,
        rng=rng,
    )
    return table.capacity(power, sigma2)


def diversity_slope(
    snr_db: np.ndarray,
    aber: np.ndarray,
    window: tuple[float, float] = (1e-6, 1e-3),
) -> float:
    """Diversity order from the high-SNR decade slope of an error curve.

    Fits log10(aber) against snr_db over points whose rate falls inside
    window and returns -10 * slope; needs at least two such points.
    """
    snr_db = np.asarray(snr_db, dtype=np.float64)
    aber = np.asarray(aber, dtype=np.float64)
    if snr_db.shape != aber.shape:
        raise DegenerateInputError("snr_db and aber must have matching shapes")
    lo, hi = window
    keep = (aber > 0.0) & (aber >= lo) & (aber <= hi)
    if np.count_nonzero(keep) < 2:
        raise DegenerateInputError(
            f"need at least two points with aber in [{lo}, {hi}]"
        )
    slope = np.polyfit(snr_db[keep], np.log10(aber[keep]), 1)[0]
    return float(-10.0 * slope)
