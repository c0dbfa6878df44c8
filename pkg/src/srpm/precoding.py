"""Transmit precoder optimization for single-stream operation.

Over uncorrelated fading every pairwise energy is affine in the transmit
covariance W: m_p(W) = direct_p + beta_r * sum_l f2[p, l] * tr(B_l W) with
B_l built from the rows of the static forward link that feed sub-surface l.
The bit error union bound (and the capacity pair sum) is then convex in W on
the unit-trace PSD set, and a Frank-Wolfe iteration with exact line search
and a monotone rank-one snap solves the relaxation; the beamformer is the
principal eigenvector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import QBoundSpec
from .channels import StaticChannel
from .config import SystemConfig
from .errors import ConfigError, DegenerateInputError
from .modulation import transmit_alphabet

WEIGHTINGS = ("aber", "capacity")


@dataclass(frozen=True)
class SolverParams:
    max_iters: int = 5000
    rel_tol: float = 1e-8
    gap_tol: float = 1e-7
    line_search_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ("rel_tol", "gap_tol", "line_search_tol"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class PairwiseMatrixSet:
    """Affine pairwise-energy model m_p(W) = direct_p + beta_r * f2[p] . t(W).

    blocks[l] is the Hermitian quadratic form whose trace against W gives
    t_l(W); f2[p, l] the squared per-surface message difference for ordered
    pair p; direct the W-independent part (unit-trace constraint absorbs the
    direct link); err_bits the label bits each confusion flips.
    """

    blocks: np.ndarray
    f2: np.ndarray
    direct: np.ndarray
    err_bits: np.ndarray
    beta_r: float
    n_r: int
    rate_bits: int
    alphabet_size: int

    @property
    def n_t(self) -> int:
        return self.blocks.shape[1]

    def trace_terms(self, w: np.ndarray) -> np.ndarray:
        """t_l = tr(B_l W) for a covariance, or w^H B_l w for a beamformer."""
        w = np.asarray(w, dtype=np.complex128)
        if w.ndim == 1:
            return np.real(np.einsum("i,lij,j->l", w.conj(), self.blocks, w))
        return np.real(np.einsum("lij,ji->l", self.blocks, w))

    def energies(self, trace_terms: np.ndarray) -> np.ndarray:
        return self.direct + self.beta_r * (self.f2 @ trace_terms)

    def pair_matrix(self, index: int) -> np.ndarray:
        """Explicit Hermitian PSD quadratic form of ordered pair `index`."""
        return self.beta_r * np.einsum("l,lij->ij", self.f2[index], self.blocks)


def build_pairwise_matrices(
    static: StaticChannel, config: SystemConfig, full: bool = True
) -> PairwiseMatrixSet:
    """Pairwise-energy model for the precoder objective.

    Single-stream only, and the affine decomposition requires uncorrelated
    fading on both sides of each hop.
    """
    if config.n_s != 1:
        raise ConfigError("precoder optimization covers single-stream operation")
    if not static.uncorrelated:
        raise ConfigError(
            "precoder optimization assumes uncorrelated fading; drop the "
            "correlation model or optimize numerically on the general bound"
        )
    alphabet = transmit_alphabet(config, full=full)
    size = alphabet.size
    l = config.l
    group = config.elements_per_surface
    blocks = np.empty((l, config.n_t, config.n_t), dtype=np.complex128)
    for j in range(l):
        sub = static.g[j * group : (j + 1) * group]
        b = sub.conj().T @ sub
        blocks[j] = 0.5 * (b + b.conj().T)
    s_all = alphabet.x_cols[l:, :].ravel()  # single stream: (size,)
    mults = alphabet.codebook.multipliers[alphabet.ris_indices]  # (size, l)
    d_vals = mults * s_all[:, None]  # (size, l)
    mask = ~np.eye(size, dtype=bool)
    f2 = np.abs(d_vals[:, None, :] - d_vals[None, :, :]) ** 2
    ds2 = np.abs(s_all[:, None] - s_all[None, :]) ** 2
    bits = alphabet.labels_bits
    err = np.sum(bits[:, None, :] != bits[None, :, :], axis=2)
    return PairwiseMatrixSet(
        blocks=blocks,
        f2=f2[mask].reshape(-1, l),
        direct=static.beta_d * ds2[mask],
        err_bits=err[mask].astype(np.float64),
        beta_r=static.beta_r,
        n_r=config.n_r,
        rate_bits=alphabet.n_bits,
        alphabet_size=size,
    )


def _objective_terms(
    mset: PairwiseMatrixSet,
    energies: np.ndarray,
    power: float,
    sigma2: float,
    weighting: str,
    qspec: QBoundSpec,
) -> float:
    if weighting == "aber":
        a, b = qspec.coefficients()
        total = 0.0
        for a_i, b_i in zip(a, b):
            c_i = b_i * power / (2.0 * sigma2)
            total += a_i * float(
                mset.err_bits @ (1.0 + c_i * energies) ** (-mset.n_r)
            )
        return total / (mset.rate_bits * mset.alphabet_size)
    c = power / (2.0 * sigma2)
    return float(np.sum((1.0 + c * energies) ** (-mset.n_r)))


def _pair_weights(
    mset: PairwiseMatrixSet,
    energies: np.ndarray,
    power: float,
    sigma2: float,
    weighting: str,
    qspec: QBoundSpec,
) -> np.ndarray:
    """Positive weights u_p with -grad f = beta_r sum_l (u . f2[:, l]) B_l."""
    if weighting == "aber":
        a, b = qspec.coefficients()
        u = np.zeros_like(energies)
        for a_i, b_i in zip(a, b):
            c_i = b_i * power / (2.0 * sigma2)
            u += a_i * mset.n_r * c_i * (1.0 + c_i * energies) ** (-mset.n_r - 1)
        return u * mset.err_bits / (mset.rate_bits * mset.alphabet_size)
    c = power / (2.0 * sigma2)
    return mset.n_r * c * (1.0 + c * energies) ** (-mset.n_r - 1)


def precoding_objective(
    mset: PairwiseMatrixSet,
    w: np.ndarray,
    power: float,
    sigma2: float,
    weighting: str = "aber",
    qspec: QBoundSpec | None = None,
) -> float:
    """Objective value for a beamformer (vector) or covariance (matrix).

    "aber" evaluates the bit error union bound; "capacity" the pairwise MGF
    sum whose decrease raises the mutual information lower bound.
    """
    if weighting not in WEIGHTINGS:
        raise ConfigError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    if sigma2 <= 0.0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2}")
    qspec = qspec or QBoundSpec.two_term()
    energies = mset.energies(mset.trace_terms(w))
    return _objective_terms(mset, energies, power, sigma2, weighting, qspec)


@dataclass(frozen=True)
class SdrSolution:
    w_matrix: np.ndarray
    w: np.ndarray
    objective: float
    extracted_objective: float
    rank_one_ratio: float
    iterations: int
    converged: bool
    objective_constant: bool


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v)))
    phase = v[pivot] / abs(v[pivot]) if abs(v[pivot]) > 0 else 1.0
    return v / phase


def _principal_eigvec(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    vals, vecs = np.linalg.eigh(matrix)
    return _normalize_phase(vecs[:, -1]), float(vals[-1])


def solve_sdr(
    mset: PairwiseMatrixSet,
    power: float,
    sigma2: float,
    weighting: str = "aber",
    qspec: QBoundSpec | None = None,
    params: SolverParams | None = None,
) -> SdrSolution:
    """Minimize the pairwise objective over unit-trace PSD covariances.

    Frank-Wolfe with exact bisection line search; after every step the
    iterate snaps to its principal rank-one projection whenever that does
    not increase the objective, so the returned covariance is rank one in
    all non-degenerate problems. converged reflects reaching the gap or
    relative-decrease tolerance before the iteration cap.
    """
    if weighting not in WEIGHTINGS:
        raise ConfigError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    if sigma2 <= 0.0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2}")
    if power < 0.0:
        raise ConfigError(f"power must be >= 0, got {power}")
    qspec = qspec or QBoundSpec.two_term()
    params = params or SolverParams()
    n_t = mset.n_t

    def objective_of(w_any) -> float:
        energies = mset.energies(mset.trace_terms(w_any))
        return _objective_terms(mset, energies, power, sigma2, weighting, qspec)

    constant = (
        mset.f2.size == 0
        or power == 0.0
        or mset.beta_r * float(np.max(mset.f2)) == 0.0
    )
    if constant:
        w = np.zeros(n_t, dtype=np.complex128)
        w[0] = 1.0
        value = objective_of(w)
        return SdrSolution(
            w_matrix=np.outer(w, w.conj()),
            w=w,
            objective=value,
            extracted_objective=value,
            rank_one_ratio=1.0,
            iterations=0,
            converged=True,
            objective_constant=True,
        )

    w_mat = np.eye(n_t, dtype=np.complex128) / n_t
    f_cur = objective_of(w_mat)
    converged = False
    iterations = 0
    for k in range(params.max_iters):
        iterations = k + 1
        # monotone rank-one snap
        v1, _ = _principal_eigvec(w_mat)
        f_snap = objective_of(v1)
        if f_snap <= f_cur:
            w_mat = np.outer(v1, v1.conj())
            f_cur = f_snap

        tb = mset.trace_terms(w_mat)
        energies = mset.energies(tb)
        u = _pair_weights(mset, energies, power, sigma2, weighting, qspec)
        gamma_l = u @ mset.f2  # (l,)
        big_gamma = mset.beta_r * np.einsum("l,lij->ij", gamma_l, mset.blocks)
        big_gamma = 0.5 * (big_gamma + big_gamma.conj().T)
        v, top = _principal_eigvec(big_gamma)
        gap = top - float(np.real(np.einsum("ij,ji->", big_gamma, w_mat)))
        # the duality gap bounds f(W) - f*; test it against the objective's
        # own scale so high-power runs (tiny objectives) still iterate
        if gap <= params.gap_tol * max(abs(f_cur), 1e-300):
            converged = True
            break

        tb_v = mset.trace_terms(v)
        delta_m = mset.beta_r * (mset.f2 @ (tb_v - tb))

        def phi_prime(eta: float) -> float:
            m_eta = energies + eta * delta_m
            u_eta = _pair_weights(mset, m_eta, power, sigma2, weighting, qspec)
            return -float(u_eta @ delta_m)

        if phi_prime(0.0) >= 0.0:
            eta = 2.0 / (k + 2.0)  # fp safety net; gap > 0 should preclude this
        elif phi_prime(1.0) <= 0.0:
            eta = 1.0
        else:
            lo, hi = 0.0, 1.0
            while hi - lo > params.line_search_tol:
                mid = 0.5 * (lo + hi)
                if phi_prime(mid) < 0.0:
                    lo = mid
                else:
                    hi = mid
            eta = 0.5 * (lo + hi)

        w_mat = (1.0 - eta) * w_mat + eta * np.outer(v, v.conj())
        w_mat = 0.5 * (w_mat + w_mat.conj().T)
        f_new = objective_of(w_mat)
        decrease = f_cur - f_new
        f_cur = f_new
        if decrease <= params.rel_tol * max(abs(f_cur), 1e-300):
            converged = True
            break

    v1, top = _principal_eigvec(w_mat)
    f_snap = objective_of(v1)
    if f_snap <= f_cur:
        w_mat = np.outer(v1, v1.conj())
        f_cur = f_snap
        top = 1.0
    ratio = top / float(np.real(np.trace(w_mat)))
    return SdrSolution(
        w_matrix=w_mat,
        w=v1,
        objective=f_cur,
        extracted_objective=f_snap,
        rank_one_ratio=float(ratio),
        iterations=iterations,
        converged=converged,
        objective_constant=False,
    )


def keyhole_closed_form(b: np.ndarray) -> np.ndarray:
    """Optimal beamformer for a rank-one forward link a b^H.

    Every pairwise energy grows with |b^H w|^2, so the unit-norm maximizer
    b/||b|| is optimal for any weighting and SNR simultaneously.
    """
    b = np.asarray(b, dtype=np.complex128).ravel()
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        raise DegenerateInputError("transmit steering vector is zero")
    return b / norm
