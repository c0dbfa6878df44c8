"""Detectors over the equivalent channel form.

ml_detect enumerates the transmittable alphabet; sd_layered_detect prunes the
same search as a two-stage tree (stream symbols first, then one level per
sub-surface) inside a shrinking radius; linear_detect applies ZF/MMSE
equalization with hard decisions.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .config import SystemConfig
from .errors import (
    ComplexityError,
    ConfigError,
    DimensionError,
    RadiusExhaustedError,
    SingularChannelError,
)
from .modulation import (
    EquivalentChannel,
    SymbolPair,
    TransmitAlphabet,
    assemble_equivalent_channel,
    transmit_alphabet,
)

ML_ALPHABET_CAP = 2**24
SD_RADIUS_EPS = 1e-12


@dataclass(frozen=True)
class SdParams:
    """Tree-search controls.

    initial_radius "babai" seeds the radius with the inflated MMSE
    hard-decision residual (doubling on exhaustion); "infinite" disables the
    initial cap. pruning "shrink" tightens the radius to the best leaf found
    so far, "fixed" keeps the initial one. child_order "metric" visits
    children by ascending partial metric; "random" reproduces an unordered
    enumeration and needs an rng.
    """

    initial_radius: str = "babai"
    inflation: float = 1.2
    max_restarts: int = 8
    pruning: str = "shrink"
    child_order: str = "metric"

    def __post_init__(self) -> None:
        if self.initial_radius not in ("babai", "infinite"):
            raise ConfigError(f"bad initial_radius {self.initial_radius!r}")
        if self.inflation <= 1.0:
            raise ConfigError(f"inflation must exceed 1, got {self.inflation}")
        if self.max_restarts < 1:
            raise ConfigError(f"max_restarts must be >= 1, got {self.max_restarts}")
        if self.pruning not in ("shrink", "fixed"):
            raise ConfigError(f"bad pruning {self.pruning!r}")
        if self.child_order not in ("metric", "random"):
            raise ConfigError(f"bad child_order {self.child_order!r}")


@dataclass
class DetectionResult:
    pair: SymbolPair
    metric: float
    visited_nodes: int
    wall_time: float


def _matrix_of(h_eq, config: SystemConfig, w: np.ndarray | None) -> np.ndarray:
    """Equivalent-channel matrix from any accepted channel description."""
    if isinstance(h_eq, EquivalentChannel):
        return h_eq.matrix
    if isinstance(h_eq, ChannelSet):
        if w is None:
            raise ConfigError("raw channels need the precoder to detect against")
        return assemble_equivalent_channel(h_eq, w, config).matrix
    return np.asarray(h_eq, dtype=np.complex128)


def bit_alphabet_size(config: SystemConfig) -> int:
    """Size of the transmittable alphabet without materializing it."""
    alphabet = transmit_alphabet(config)
    return alphabet.size


def ml_detect(
    y: np.ndarray,
    h_eq,
    config: SystemConfig,
    alphabet: TransmitAlphabet | None = None,
    cap: int = ML_ALPHABET_CAP,
    w: np.ndarray | None = None,
) -> DetectionResult:
    """Exhaustive search over the transmittable alphabet.

    h_eq may be an EquivalentChannel, a bare matrix, or a raw ChannelSet
    (then w is required). Ties resolve to the lexicographically smallest bit
    label: candidates are enumerated in label order and argmin returns the
    first minimum.
    """
    start = time.perf_counter()
    if alphabet is None:
        alphabet = transmit_alphabet(config)
    if alphabet.size > cap:
        raise ComplexityError(
            f"alphabet size {alphabet.size} exceeds cap {cap}"
        )
    matrix = _matrix_of(h_eq, config, w)
    resid = np.abs(
        y[:, None] - np.sqrt(config.power) * (matrix @ alphabet.x_cols)
    )
    metrics = np.sum(resid * resid, axis=0)
    idx = int(np.argmin(metrics))
    return DetectionResult(
        pair=alphabet.pair(idx),
        metric=float(metrics[idx]),
        visited_nodes=alphabet.size,
        wall_time=time.perf_counter() - start,
    )


def ml_indices_batch(
    ys: np.ndarray,
    h_eqs: np.ndarray,
    x_cols: np.ndarray,
    power: float,
) -> np.ndarray:
    """Vectorized ML decisions for a batch: returns candidate indices."""
    z = np.einsum("bij,jc->bic", h_eqs, x_cols)
    diff = ys[:, :, None] - np.sqrt(power) * z
    metrics = np.sum(diff.real**2 + diff.imag**2, axis=1)
    return np.argmin(metrics, axis=1)


def qr_reduce(
    matrix: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Thin QR split of the search metric.

    Returns (R, y_bar, offset) with ||y - sqrt(P) H x||^2 =
    ||y_bar - sqrt(P) R x||^2 + offset; requires more receive rows than
    columns so the left null space absorbs the offset.
    """
    matrix = np.asarray(matrix)
    n_rows, n_cols = matrix.shape
    if n_rows <= n_cols:
        raise DimensionError(
            f"receive dimension {n_rows} must exceed the stacked symbol "
            f"dimension {n_cols} for tree search"
        )
    q, r = np.linalg.qr(matrix, mode="reduced")
    y_bar = q.conj().T @ y
    offset = float(
        max(np.sum(np.abs(y) ** 2) - np.sum(np.abs(y_bar) ** 2), 0.0)
    )
    return r, y_bar, offset


def _order_children(
    costs: np.ndarray, order: str, rng: np.random.Generator | None
) -> np.ndarray:
    if order == "metric":
        return np.argsort(costs, kind="stable")
    if rng is None:
        raise ConfigError("child_order='random' requires an rng")
    return rng.permutation(costs.size)


def sd_layered_detect(
    y: np.ndarray,
    h_eq,
    config: SystemConfig,
    params: SdParams | None = None,
    alphabet: TransmitAlphabet | None = None,
    rng: np.random.Generator | None = None,
    trace: list | None = None,
    w: np.ndarray | None = None,
) -> DetectionResult:
    """Layered tree search equivalent to ML over the same alphabet.

    Stream symbols are decided on the bottom rows of R one at a time, then
    each sub-surface multiplier closes a group of n_s rows at once. Falls
    back to ml_detect (with a warning) when the receive dimension is too
    small or the alphabet has no per-surface product structure.

    visited_nodes counts tree nodes accepted by the radius test; trace, when
    given, receives (depth, accumulated_metric) per accepted node.
    """
    start = time.perf_counter()
    params = params or SdParams()
    if alphabet is None:
        alphabet = transmit_alphabet(config)
    codebook = alphabet.codebook
    if not codebook.product_form or alphabet.size != 1 << alphabet.n_bits:
        warnings.warn(
            "alphabet is not a bit-addressable product set; falling back to ML",
            stacklevel=2,
        )
        return ml_detect(y, h_eq, config, alphabet=alphabet, w=w)
    matrix = _matrix_of(h_eq, config, w)
    try:
        r_mat, y_bar, offset = qr_reduce(matrix, y)
    except DimensionError:
        warnings.warn(
            "receive dimension too small for tree search; falling back to ML",
            stacklevel=2,
        )
        return ml_detect(y, h_eq, config, alphabet=alphabet, w=w)

    n_s, l = config.n_s, config.l
    sqrt_p = np.sqrt(config.power)
    constellation = alphabet.constellation
    pts = constellation.points
    pt_labels = constellation.labels
    surf_mults = codebook.surface_multipliers
    surf_labels = codebook.surface_labels
    surf_bits = codebook.surface_bits
    bits_s = constellation.bits

    scale = 1.0 + float(np.sum(np.abs(y) ** 2))
    if params.initial_radius == "infinite":
        budget = np.inf
    else:
        babai = linear_detect(y, matrix, config, kind="mmse", alphabet=alphabet)
        # inflate the reduced-coordinate residual; the projection offset is
        # common to every leaf and must not widen the tree budget
        budget = params.inflation * max(babai.metric - offset, 0.0)
        budget += SD_RADIUS_EPS * scale

    best: dict = {}
    restarts = 0
    while True:
        visited = 0
        best.clear()

        def limit() -> float:
            if params.pruning == "shrink" and "total" in best:
                return min(budget, best["total"])
            return budget

        s_values = np.zeros(n_s, dtype=np.complex128)
        s_label_acc = np.zeros(n_s, dtype=np.int64)
        v_label_acc = np.zeros(l, dtype=np.int64)
        v_mult_acc = np.zeros(l, dtype=np.complex128)
        x_vec = np.zeros((l + 1) * n_s, dtype=np.complex128)

        def visit_stream(stream: int, acc: float) -> None:
            nonlocal visited
            row = l * n_s + stream
            partial = y_bar[row] - sqrt_p * (
                r_mat[row, row + 1 :] @ x_vec[row + 1 :]
            )
            costs = np.abs(partial - sqrt_p * r_mat[row, row] * pts) ** 2
            for child in _order_children(costs, params.child_order, rng):
                new_acc = acc + float(costs[child])
                if new_acc > limit():
                    if params.child_order == "metric":
                        break  # children are cost-sorted, the rest only grow
                    continue
                visited += 1
                if trace is not None:
                    trace.append((n_s - stream, new_acc))
                s_values[stream] = pts[child]
                s_label_acc[stream] = pt_labels[child]
                x_vec[row] = pts[child]
                if stream > 0:
                    visit_stream(stream - 1, new_acc)
                else:
                    visit_surface(l - 1, new_acc)

        def visit_surface(surface: int, acc: float) -> None:
            nonlocal visited
            rows = slice(surface * n_s, (surface + 1) * n_s)
            row_idx = np.arange(surface * n_s, (surface + 1) * n_s)
            known = r_mat[rows, (surface + 1) * n_s :] @ x_vec[(surface + 1) * n_s :]
            q_within = np.array(
                [
                    r_mat[i, i : (surface + 1) * n_s] @ s_values[i - surface * n_s :]
                    for i in row_idx
                ]
            )
            resid = (
                y_bar[rows][None, :]
                - sqrt_p * (known[None, :] + surf_mults[:, None] * q_within[None, :])
            )
            costs = np.sum(resid.real**2 + resid.imag**2, axis=1)
            depth_here = n_s + (l - surface)
            for child in _order_children(costs, params.child_order, rng):
                new_acc = acc + float(costs[child])
                if new_acc > limit():
                    if params.child_order == "metric":
                        break
                    continue
                visited += 1
                if trace is not None:
                    trace.append((depth_here, new_acc))
                v_label_acc[surface] = surf_labels[child]
                v_mult_acc[surface] = surf_mults[child]
                x_vec[rows] = surf_mults[child] * s_values
                if surface > 0:
                    visit_surface(surface - 1, new_acc)
                else:
                    close_leaf(new_acc)

        def close_leaf(total: float) -> None:
            s_int = 0
            for label in s_label_acc:
                s_int = (s_int << bits_s) | int(label)
            v_int = 0
            for label in v_label_acc:
                v_int = (v_int << surf_bits) | int(label)
            bits_int = (s_int << codebook.n_bits) | v_int
            if (
                "total" not in best
                or total < best["total"]
                or (total == best["total"] and bits_int < best["bits"])
            ):
                best["total"] = total
                best["bits"] = bits_int

        visit_stream(n_s - 1, 0.0)
        if "total" in best:
            break
        restarts += 1
        if restarts > params.max_restarts:
            raise RadiusExhaustedError(
                f"no leaf within radius after {params.max_restarts} restarts"
            )
        budget = max(budget, SD_RADIUS_EPS * scale) * 2.0

    return DetectionResult(
        pair=alphabet.pair(best["bits"]),
        metric=best["total"] + offset,
        visited_nodes=visited,
        wall_time=time.perf_counter() - start,
    )


def _soft_estimate(
    ys: np.ndarray, h_eqs: np.ndarray, config: SystemConfig, kind: str
) -> np.ndarray:
    """Batched soft symbol estimate x_hat, shape (batch, columns)."""
    if config.power <= 0.0:
        raise ConfigError("linear detection requires power > 0")
    sqrt_p = np.sqrt(config.power)
    if kind == "zf":
        u, s, vh = np.linalg.svd(h_eqs, full_matrices=False)
        s_max = s[..., 0]
        if np.any(s[..., -1] < 1e-12 * s_max):
            raise SingularChannelError("channel matrix is rank deficient for ZF")
        proj = np.einsum("bij,bi->bj", u.conj(), ys)
        return np.einsum("bji,bj->bi", vh.conj(), proj / s) / sqrt_p
    if kind == "mmse":
        gram = np.einsum("bij,bik->bjk", h_eqs.conj(), h_eqs)
        n_cols = gram.shape[-1]
        gram = gram + (config.sigma2 / config.power) * np.eye(n_cols)
        rhs = np.einsum("bij,bi->bj", h_eqs.conj(), ys)
        try:
            return np.linalg.solve(gram, rhs[..., None])[..., 0] / sqrt_p
        except np.linalg.LinAlgError as exc:
            raise SingularChannelError(
                "regularized Gram matrix is singular"
            ) from exc
    raise ConfigError(f"unknown linear detector kind {kind!r}")


def linear_indices_batch(
    ys: np.ndarray,
    h_eqs: np.ndarray,
    config: SystemConfig,
    kind: str,
    alphabet: TransmitAlphabet,
) -> np.ndarray:
    """Batched ZF/MMSE hard decisions: returns candidate indices."""
    codebook = alphabet.codebook
    if alphabet.size != 1 << alphabet.n_bits:
        raise ConfigError("linear detection needs the bit-addressable alphabet")
    soft = _soft_estimate(ys, h_eqs, config, kind)
    n_s, l = config.n_s, config.l
    constellation = alphabet.constellation
    s_soft = soft[:, l * n_s :]
    dist = np.abs(s_soft[:, :, None] - constellation.points[None, None, :])
    s_choice = np.argmin(dist, axis=2)
    s_points = constellation.points[s_choice]
    s_labels = constellation.labels[s_choice]
    bits_s = constellation.bits
    s_int = np.zeros(soft.shape[0], dtype=np.int64)
    for stream in range(n_s):
        s_int = (s_int << bits_s) | s_labels[:, stream]
    blocks = soft[:, : l * n_s].reshape(-1, l, n_s)
    est = np.mean(blocks / s_points[:, None, :], axis=2)
    vdist = np.sum(
        np.abs(est[:, None, :] - codebook.multipliers[None, :, :]) ** 2, axis=2
    )
    v_choice = np.argmin(vdist, axis=1)
    return (s_int << codebook.n_bits) | codebook.labels[v_choice]


def linear_detect(
    y: np.ndarray,
    h_eq,
    config: SystemConfig,
    kind: str = "zf",
    alphabet: TransmitAlphabet | None = None,
    w: np.ndarray | None = None,
) -> DetectionResult:
    """ZF or MMSE equalization with per-stream and per-surface hard decisions."""
    start = time.perf_counter()
    if alphabet is None:
        alphabet = transmit_alphabet(config)
    matrix = _matrix_of(h_eq, config, w)
    idx = int(
        linear_indices_batch(y[None], matrix[None], config, kind, alphabet)[0]
    )
    pair = alphabet.pair(idx)
    resid = y - np.sqrt(config.power) * (matrix @ alphabet.x_cols[:, idx])
    return DetectionResult(
        pair=pair,
        metric=float(np.sum(np.abs(resid) ** 2)),
        visited_nodes=1,
        wall_time=time.perf_counter() - start,
    )
