"""Experiment orchestration: Monte Carlo and analytical sweeps, detector
benchmarking, reproducible RNG streams, and CSV/JSON emission.

Every random quantity comes from a counter-based stream addressed by
(seed, domain, lane, point, block), so results are independent of execution
order and thread count; trials advance in fixed-size blocks that form the
atomic reproducibility unit.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

import tomli

from .analysis import PairwiseTable, QBoundSpec, build_pairwise_table
from .channels import (
    ChannelSampler,
    CorrelationSpec,
    LosSpec,
    complex_normal,
)
from .config import SCHEMES, SystemConfig
from .detection import (
    SdParams,
    linear_indices_batch,
    ml_indices_batch,
    sd_layered_detect,
)
from .errors import ConfigError
from .modulation import assemble_equivalent_batch, transmit_alphabet
from .precoding import SdrSolution, build_pairwise_matrices, solve_sdr

SCHEMA_VERSION = 1
SWEEP_HEADER = "# srpm-sweep-v1"
BENCH_HEADER = "# srpm-bench-v1"
CSV_COLUMNS = (
    "snr_db",
    "mc_aber",
    "mc_aber_stderr",
    "analytical_aber",
    "analytical_capacity",
    "mean_visited_nodes",
    "mean_detect_us",
    "trials",
    "bit_errors",
)
TRIAL_BLOCK = 1024

# stream domains; never renumber, reproducibility depends on them
DOMAIN_ANGLES = 1
DOMAIN_STATIC = 2
DOMAIN_CHANNEL = 3
DOMAIN_DATA = 4
DOMAIN_NOISE = 5
DOMAIN_PAIRS = 6
DOMAIN_CAPACITY = 7

DETECTORS = ("ml", "sd", "zf", "mmse")
PRECODERS = ("uniform", "optimized")
Q_MODES = ("two_term", "exponential")
BOUND_ALPHABETS = ("auto", "full", "bit")
FORMATS = ("csv", "json")


def rng_stream(
    seed: int, domain: int, point: int = 0, block: int = 0, lane: int = 0
) -> np.random.Generator:
    """Independent deterministic stream for one (domain, lane, point, block)."""
    bits = np.random.Philox(key=[seed, domain], counter=[lane, point, block, 0])
    return np.random.Generator(bits)


@dataclass(frozen=True)
class ExperimentPlan:
    """Complete, validated description of one experiment run."""

    config: SystemConfig = field(default_factory=SystemConfig)
    snr_grid_db: tuple[float, ...] = tuple(float(v) for v in range(-10, 21, 2))
    trials_per_point: int = 100_000
    min_bit_errors: int = 200
    seed: int = 0
    detector: str = "ml"
    schemes: tuple[str, ...] | None = None
    rho_bs: float = 0.0
    rho_ris: float = 0.0
    rho_user: float = 0.0
    beta_d: float = 1.0
    beta_r: float = 1.0
    n_paths: int = 4
    kappa_db: float = 0.0
    d_over_lambda: float = 0.5
    base_phase_policy: str = "uniform_random"
    precoder: str = "uniform"
    precoder_weighting: str = "aber"
    precoder_snr_db: float = 10.0
    q_mode: str = "two_term"
    q_terms: int = 1
    bound_alphabet: str = "auto"
    pair_cap: int = 2**20
    pair_samples: int = 2**18
    capacity_g_draws: int = 1
    capacity_mc_trials: int = 1000
    sd_initial_radius: str = "babai"
    sd_inflation: float = 1.2
    sd_max_restarts: int = 8
    sd_pruning: str = "shrink"
    sd_child_order: str = "metric"
    threads: int = 1
    timing: bool = False
    out: str | None = None
    format: str | None = None

    def __post_init__(self) -> None:
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must not be empty")
        grid = tuple(float(v) for v in self.snr_grid_db)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("snr_grid_db must be strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.trials_per_point < 1:
            raise ConfigError(
                f"trials_per_point must be >= 1, got {self.trials_per_point}"
            )
        if self.min_bit_errors < 0:
            raise ConfigError(
                f"min_bit_errors must be >= 0, got {self.min_bit_errors}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit an unsigned 64-bit integer")
        if self.detector not in DETECTORS:
            raise ConfigError(
                f"detector must be one of {DETECTORS}, got {self.detector!r}"
            )
        if self.schemes is not None:
            schemes = tuple(self.schemes)
            if not schemes:
                raise ConfigError("schemes, when given, must not be empty")
            for s in schemes:
                if s not in SCHEMES:
                    raise ConfigError(f"unknown scheme {s!r} in schemes")
            object.__setattr__(self, "schemes", schemes)
        for name in ("beta_d", "beta_r"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if self.n_paths < 1:
            raise ConfigError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.precoder not in PRECODERS:
            raise ConfigError(
                f"precoder must be one of {PRECODERS}, got {self.precoder!r}"
            )
        if self.precoder_weighting not in ("aber", "capacity"):
            raise ConfigError(
                f"precoder_weighting must be 'aber' or 'capacity', "
                f"got {self.precoder_weighting!r}"
            )
        if self.q_mode not in Q_MODES:
            raise ConfigError(f"q_mode must be one of {Q_MODES}, got {self.q_mode!r}")
        if self.q_terms < 1:
            raise ConfigError(f"q_terms must be >= 1, got {self.q_terms}")
        if self.bound_alphabet not in BOUND_ALPHABETS:
            raise ConfigError(
                f"bound_alphabet must be one of {BOUND_ALPHABETS}, "
                f"got {self.bound_alphabet!r}"
            )
        if self.pair_cap < 1 or self.pair_samples < 2:
            raise ConfigError("pair_cap must be >= 1 and pair_samples >= 2")
        if self.capacity_g_draws < 1:
            raise ConfigError(
                f"capacity_g_draws must be >= 1, got {self.capacity_g_draws}"
            )
        if self.capacity_mc_trials < 0:
            raise ConfigError(
                f"capacity_mc_trials must be >= 0, got {self.capacity_mc_trials}"
            )
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(
                f"format must be one of {FORMATS}, got {self.format!r}"
            )
        # fail fast on bad tree-search settings
        self.sd_params()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        if not isinstance(data, dict):
            raise ConfigError(f"plan document must be a table, got {type(data).__name__}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known - {"system"}
        if unknown:
            raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
        kwargs: dict = {}
        for key, value in data.items():
            if key == "system":
                kwargs["config"] = SystemConfig.from_dict(value)
            elif key == "config":
                kwargs["config"] = (
                    value if isinstance(value, SystemConfig)
                    else SystemConfig.from_dict(value)
                )
            elif key in ("snr_grid_db", "schemes") and value is not None:
                kwargs[key] = tuple(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_dict(self) -> dict:
        """Plan echo for output provenance.

        Execution-only knobs (threads, out, format) are omitted: they cannot
        change any computed value, and dropping them keeps outputs
        byte-identical across worker counts and destinations.
        """
        data = dataclasses.asdict(self)
        data["snr_grid_db"] = list(self.snr_grid_db)
        if self.schemes is not None:
            data["schemes"] = list(self.schemes)
        for key in ("threads", "out", "format"):
            data.pop(key, None)
        return data

    def qspec(self) -> QBoundSpec:
        if self.q_mode == "two_term":
            return QBoundSpec.two_term()
        return QBoundSpec.exponential(self.q_terms)

    def sd_params(self) -> SdParams:
        return SdParams(
            initial_radius=self.sd_initial_radius,
            inflation=self.sd_inflation,
            max_restarts=self.sd_max_restarts,
            pruning=self.sd_pruning,
            child_order=self.sd_child_order,
        )

    def scheme_list(self) -> tuple[str, ...]:
        return self.schemes if self.schemes is not None else (self.config.scheme,)

    def scheme_config(self, scheme: str) -> SystemConfig:
        if scheme == self.config.scheme:
            return self.config
        return dataclasses.replace(self.config, scheme=scheme)


def parse_config(source) -> ExperimentPlan:
    """Build a plan from a TOML or JSON document (path or raw text).

    A string that names an existing file is read from disk; anything else is
    treated as document text. JSON is recognized by a leading '{' (or a
    .json suffix for files); everything else parses as TOML.
    """
    text = None
    name = "<inline>"
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        name = os.fspath(source)
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {name}: {exc}") from exc
    elif isinstance(source, os.PathLike):
        raise ConfigError(f"config file not found: {os.fspath(source)}")
    else:
        text = str(source)
        if "\n" not in text and text.strip().endswith((".toml", ".json")):
            raise ConfigError(f"config file not found: {text}")
    stripped = text.lstrip()
    is_json = name.endswith(".json") or stripped.startswith("{")
    if is_json:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{name}: JSON parse error at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from exc
    else:
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{name}: TOML parse error: {exc}") from exc
    return ExperimentPlan.from_dict(data)


# ---------------------------------------------------------------------------
# static setup


def uniform_precoder(config: SystemConfig) -> np.ndarray:
    """Unit-power precoder spreading power evenly (orthogonal DFT beams)."""
    n_t, n_s = config.n_t, config.n_s
    grid = np.arange(n_t)[:, None] * np.arange(n_s)[None, :]
    w = np.exp(2j * np.pi * grid / n_t)
    return w / math.sqrt(n_t * n_s)


@dataclass(frozen=True)
class StaticSetup:
    """Everything held fixed across the fading draws of one scheme run."""

    sampler: ChannelSampler
    w: np.ndarray
    sdr: SdrSolution | None

    @property
    def static(self):
        return self.sampler.static


def build_static_setup(
    plan: ExperimentPlan,
    config: SystemConfig | None = None,
    g: np.ndarray | None = None,
    draw: int = 0,
) -> StaticSetup:
    """Fix geometry, base phases, and the precoder for one run.

    The path angles and gains come from seed-addressed streams that do not
    depend on the array sizes, so runs differing only in n share the same
    propagation geometry (scaling comparisons stay paired). draw indexes
    independent geometry realizations for ergodic averaging.
    """
    config = config or plan.config
    corr = CorrelationSpec(plan.rho_bs, plan.rho_ris, plan.rho_user)
    los = LosSpec.random(
        plan.n_paths,
        rng_stream(plan.seed, DOMAIN_ANGLES, point=draw),
        kappa_db=plan.kappa_db,
        d_over_lambda=plan.d_over_lambda,
    )
    sampler = ChannelSampler(
        config,
        corr,
        los,
        plan.base_phase_policy,
        rng_stream(plan.seed, DOMAIN_STATIC, point=draw),
        beta_d=plan.beta_d,
        beta_r=plan.beta_r,
        g=g,
    )
    sdr = None
    if plan.precoder == "optimized":
        mset = build_pairwise_matrices(sampler.static, config, full=True)
        power = config.sigma2 * 10.0 ** (plan.precoder_snr_db / 10.0)
        sdr = solve_sdr(
            mset,
            power,
            config.sigma2,
            weighting=plan.precoder_weighting,
            qspec=plan.qspec(),
        )
        w = sdr.w.reshape(config.n_t, 1)
    else:
        w = uniform_precoder(config)
    return StaticSetup(sampler=sampler, w=w, sdr=sdr)


# ---------------------------------------------------------------------------
# result containers


@dataclass
class SweepRow:
    scheme: str
    snr_db: float
    mc_aber: float | None = None
    mc_aber_stderr: float | None = None
    analytical_aber: float | None = None
    analytical_capacity: float | None = None
    mc_capacity_proxy: float | None = None
    mean_visited_nodes: float | None = None
    mean_detect_us: float | None = None
    trials: int | None = None
    bit_errors: int | None = None
    detector: str | None = None


@dataclass
class SweepResult:
    kind: str
    plan: ExperimentPlan
    rows: list[SweepRow]
    extras: dict = field(default_factory=dict)

    def by_scheme(self, scheme: str) -> list[SweepRow]:
        return [r for r in self.rows if r.scheme == scheme]


def _block_sizes(total: int) -> list[int]:
    sizes = [TRIAL_BLOCK] * (total // TRIAL_BLOCK)
    if total % TRIAL_BLOCK:
        sizes.append(total % TRIAL_BLOCK)
    return sizes


def _resolve_bound_alphabet(plan: ExperimentPlan, monte_carlo: bool) -> str:
    if plan.bound_alphabet != "auto":
        return plan.bound_alphabet
    return "bit" if monte_carlo else "full"


# ---------------------------------------------------------------------------
# ABER sweep


def _simulate_block(
    plan: ExperimentPlan,
    config: SystemConfig,
    setup: StaticSetup,
    alphabet,
    power: float,
    point: int,
    block: int,
    size: int,
    lane: int,
) -> tuple[int, float, float, int, int]:
    """One trial block: returns (trials, sum_e, sum_e2, bit_errors, visited)."""
    channel_rng = rng_stream(plan.seed, DOMAIN_CHANNEL, point, block, lane)
    data_rng = rng_stream(plan.seed, DOMAIN_DATA, point, block, lane)
    noise_rng = rng_stream(plan.seed, DOMAIN_NOISE, point, block, lane)
    h_d, h_r = setup.sampler.sample_batch(channel_rng, size)
    h_eqs = assemble_equivalent_batch(h_d, h_r, setup.static, setup.w, config)
    tx = data_rng.integers(0, alphabet.size, size)
    signals = np.einsum("bic,cb->bi", h_eqs, alphabet.x_cols[:, tx])
    ys = math.sqrt(power) * signals
    if config.sigma2 > 0.0:
        ys = ys + math.sqrt(config.sigma2) * complex_normal(noise_rng, ys.shape)
    run_config = dataclasses.replace(config, power=power)
    visited = 0
    if plan.detector == "ml":
        rx = ml_indices_batch(ys, h_eqs, alphabet.x_cols, power)
        visited = alphabet.size * size
    elif plan.detector in ("zf", "mmse"):
        rx = linear_indices_batch(ys, h_eqs, run_config, plan.detector, alphabet)
        visited = size
    else:
        rx = np.empty(size, dtype=np.int64)
        params = plan.sd_params()
        for i in range(size):
            result = sd_layered_detect(
                ys[i], h_eqs[i], run_config, params=params, alphabet=alphabet
            )
            rx[i] = alphabet.index_of_bits(result.pair.bits)
            visited += result.visited_nodes
    err = np.sum(alphabet.labels_bits[tx] != alphabet.labels_bits[rx], axis=1)
    err = err.astype(np.float64)
    return (
        size,
        float(err.sum()),
        float((err * err).sum()),
        int(err.sum()),
        visited,
    )


def _run_point_blocks(plan: ExperimentPlan, job, sizes: list[int]):
    """Execute blocks in order with early stopping after any block.

    job(block_index, size) -> block result; yields (block_index, result) in
    block order regardless of thread count.
    """
    if plan.threads == 1:
        for idx, size in enumerate(sizes):
            yield idx, job(idx, size)
        return
    with ThreadPoolExecutor(max_workers=plan.threads) as pool:
        for start in range(0, len(sizes), plan.threads):
            window = range(start, min(start + plan.threads, len(sizes)))
            futures = [pool.submit(job, idx, sizes[idx]) for idx in window]
            for idx, fut in zip(window, futures):
                yield idx, fut.result()


def run_aber_sweep(plan: ExperimentPlan, monte_carlo: bool = True) -> SweepResult:
    """Bit error rate sweep: Monte Carlo counts plus the analytical companion.

    monte_carlo=False skips the simulation and emits analytical curves only.
    """
    rows: list[SweepRow] = []
    extras: dict = {"schemes": {}}
    qspec = plan.qspec()
    alphabet_mode = _resolve_bound_alphabet(plan, monte_carlo)
    for lane, scheme in enumerate(plan.scheme_list()):
        config = plan.scheme_config(scheme)
        setup = build_static_setup(plan, config)
        alphabet = transmit_alphabet(config)
        table = build_pairwise_table(
            setup.static,
            setup.w,
            config,
            full=(alphabet_mode == "full"),
            pair_cap=plan.pair_cap,
            pair_samples=plan.pair_samples,
            rng=rng_stream(plan.seed, DOMAIN_PAIRS, lane=lane),
        )
        scheme_extra = {
            "bound_alphabet": alphabet_mode,
            "rate_bits": alphabet.n_bits,
        }
        if setup.sdr is not None:
            scheme_extra["sdr"] = {
                "objective": setup.sdr.objective,
                "rank_one_ratio": setup.sdr.rank_one_ratio,
                "iterations": setup.sdr.iterations,
                "converged": setup.sdr.converged,
            }
        extras["schemes"][scheme] = scheme_extra
        for point, snr_db in enumerate(plan.snr_grid_db):
            power = config.sigma2 * 10.0 ** (snr_db / 10.0)
            estimate = table.union_bound(power, config.sigma2, qspec)
            row = SweepRow(
                scheme=scheme,
                snr_db=snr_db,
                analytical_aber=estimate.value,
                detector=plan.detector,
            )
            if monte_carlo:
                sizes = _block_sizes(plan.trials_per_point)
                trials = 0
                sum_e = 0.0
                sum_e2 = 0.0
                bit_errors = 0
                visited = 0

                def job(block: int, size: int, _point=point):
                    return _simulate_block(
                        plan, config, setup, alphabet, power,
                        _point, block, size, lane,
                    )

                for _, block_result in _run_point_blocks(plan, job, sizes):
                    b_trials, b_sum, b_sum2, b_errs, b_visited = block_result
                    trials += b_trials
                    sum_e += b_sum
                    sum_e2 += b_sum2
                    bit_errors += b_errs
                    visited += b_visited
                    if plan.min_bit_errors and bit_errors >= plan.min_bit_errors:
                        break
                r_bits = alphabet.n_bits
                mean_e = sum_e / trials
                var_e = max(sum_e2 / trials - mean_e * mean_e, 0.0)
                row.mc_aber = mean_e / r_bits
                row.mc_aber_stderr = math.sqrt(var_e / trials) / r_bits
                row.trials = trials
                row.bit_errors = bit_errors
                row.mean_visited_nodes = visited / trials
            rows.append(row)
    return SweepResult(kind="aber", plan=plan, rows=rows, extras=extras)


def analyze_aber(plan: ExperimentPlan) -> SweepResult:
    """Analytical-only variant of :func:`run_aber_sweep`."""
    return run_aber_sweep(plan, monte_carlo=False)


# ---------------------------------------------------------------------------
# capacity sweep


def _capacity_mc_block(
    plan: ExperimentPlan,
    config: SystemConfig,
    setup: StaticSetup,
    alphabet,
    power: float,
    point: int,
    block: int,
    size: int,
    lane: int,
) -> tuple[int, float]:
    """Mutual-information samples for one block: returns (trials, sum_bits)."""
    channel_rng = rng_stream(plan.seed, DOMAIN_CAPACITY, point, block, lane)
    data_rng = rng_stream(plan.seed, DOMAIN_DATA, point, block, lane + 2**32)
    noise_rng = rng_stream(plan.seed, DOMAIN_NOISE, point, block, lane + 2**32)
    h_d, h_r = setup.sampler.sample_batch(channel_rng, size)
    h_eqs = assemble_equivalent_batch(h_d, h_r, setup.static, setup.w, config)
    tx = data_rng.integers(0, alphabet.size, size)
    signals = np.einsum("bic,cb->bi", h_eqs, alphabet.x_cols[:, tx])
    ys = math.sqrt(power) * signals
    sigma2 = config.sigma2
    if sigma2 > 0.0:
        ys = ys + math.sqrt(sigma2) * complex_normal(noise_rng, ys.shape)
    cand = np.einsum("bic,cs->bis", h_eqs, alphabet.x_cols)
    diff = ys[:, :, None] - math.sqrt(power) * cand
    d2 = np.sum(diff.real**2 + diff.imag**2, axis=1)
    lse = logsumexp(-d2 / sigma2, axis=1)
    z2 = d2[np.arange(size), tx]
    info = math.log2(alphabet.size) - (lse + z2 / sigma2) / math.log(2.0)
    return size, float(np.sum(info))


def run_capacity_sweep(plan: ExperimentPlan, monte_carlo: bool = True) -> SweepResult:
    """Discrete-input capacity sweep with a passive-beamforming baseline.

    Analytical curves average dcmc_capacity over capacity_g_draws geometry
    draws; monte_carlo adds a mutual-information estimate per point over the
    full message alphabet (carried in mc_capacity_proxy / JSON, not CSV).
    """
    schemes = list(plan.scheme_list())
    if "pbf" not in schemes:
        schemes.append("pbf")
    rows: list[SweepRow] = []
    extras: dict = {"schemes": {}}
    mc_trials = plan.capacity_mc_trials if monte_carlo else 0
    for lane, scheme in enumerate(schemes):
        config = plan.scheme_config(scheme)
        draws = []
        for draw in range(plan.capacity_g_draws):
            setup = build_static_setup(plan, config, draw=draw)
            table = build_pairwise_table(
                setup.static,
                setup.w,
                config,
                full=True,
                pair_cap=plan.pair_cap,
                pair_samples=plan.pair_samples,
                rng=rng_stream(plan.seed, DOMAIN_PAIRS, point=draw, lane=lane),
            )
            draws.append((setup, table))
        alphabet = transmit_alphabet(config, full=True)
        extras["schemes"][scheme] = {
            "alphabet_size": alphabet.size,
            "capacity_limit_bits": math.log2(alphabet.size),
        }
        for point, snr_db in enumerate(plan.snr_grid_db):
            power = config.sigma2 * 10.0 ** (snr_db / 10.0)
            cap = float(
                np.mean([t.capacity(power, config.sigma2) for _, t in draws])
            )
            row = SweepRow(scheme=scheme, snr_db=snr_db, analytical_capacity=cap)
            if mc_trials > 0:
                total = 0
                info_sum = 0.0
                for draw, (setup, _) in enumerate(draws):
                    sizes = _block_sizes(mc_trials)

                    def job(block, size, _setup=setup, _point=point, _draw=draw):
                        return _capacity_mc_block(
                            plan, config, _setup, alphabet, power,
                            _point, block, size, (lane << 20) | _draw,
                        )

                    for _, (b_trials, b_info) in _run_point_blocks(
                        plan, job, sizes
                    ):
                        total += b_trials
                        info_sum += b_info
                proxy = info_sum / total
                cap_limit = math.log2(alphabet.size)
                row.mc_capacity_proxy = float(min(max(proxy, 0.0), cap_limit))
                row.trials = total
            rows.append(row)
    return SweepResult(kind="capacity", plan=plan, rows=rows, extras=extras)


def analyze_capacity(plan: ExperimentPlan) -> SweepResult:
    """Analytical-only variant of :func:`run_capacity_sweep`."""
    return run_capacity_sweep(plan, monte_carlo=False)


# ---------------------------------------------------------------------------
# detector benchmark


def bench_detectors(plan: ExperimentPlan) -> SweepResult:
    """Visited-node and timing comparison of exhaustive vs tree search.

    Both detectors see identical trials. The complexity exponent xi_hat is
    log(mean visited) / log(full alphabet size).
    """
    config = plan.config
    setup = build_static_setup(plan, config)
    alphabet = transmit_alphabet(config)
    full_size = transmit_alphabet(config, full=True).size
    params = plan.sd_params()
    rows: list[SweepRow] = []
    extras: dict = {"xi_hat": {}, "full_alphabet_size": full_size}
    for detector in ("ml", "sd"):
        xi_curve = []
        for point, snr_db in enumerate(plan.snr_grid_db):
            power = config.sigma2 * 10.0 ** (snr_db / 10.0)
            run_config = dataclasses.replace(config, power=power)
            sizes = _block_sizes(plan.trials_per_point)
            trials = 0
            visited = 0
            elapsed = 0.0
            for block, size in enumerate(sizes):
                channel_rng = rng_stream(plan.seed, DOMAIN_CHANNEL, point, block)
                data_rng = rng_stream(plan.seed, DOMAIN_DATA, point, block)
                noise_rng = rng_stream(plan.seed, DOMAIN_NOISE, point, block)
                h_d, h_r = setup.sampler.sample_batch(channel_rng, size)
                h_eqs = assemble_equivalent_batch(
                    h_d, h_r, setup.static, setup.w, config
                )
                tx = data_rng.integers(0, alphabet.size, size)
                signals = np.einsum("bic,cb->bi", h_eqs, alphabet.x_cols[:, tx])
                ys = math.sqrt(power) * signals
                if config.sigma2 > 0.0:
                    ys = ys + math.sqrt(config.sigma2) * complex_normal(
                        noise_rng, ys.shape
                    )
                if detector == "ml":
                    t0 = time.perf_counter()
                    ml_indices_batch(ys, h_eqs, alphabet.x_cols, power)
                    elapsed += time.perf_counter() - t0
                    visited += alphabet.size * size
                else:
                    for i in range(size):
                        result = sd_layered_detect(
                            ys[i],
                            h_eqs[i],
                            run_config,
                            params=params,
                            alphabet=alphabet,
                        )
                        visited += result.visited_nodes
                        elapsed += result.wall_time
                trials += size
            mean_visited = visited / trials
            xi_hat = math.log(mean_visited) / math.log(full_size)
            xi_curve.append(xi_hat)
            row = SweepRow(
                scheme=config.scheme,
                snr_db=snr_db,
                mean_visited_nodes=mean_visited,
                trials=trials,
                detector=detector,
            )
            if plan.timing:
                row.mean_detect_us = 1e6 * elapsed / trials
            rows.append(row)
        extras["xi_hat"][detector] = xi_curve
    return SweepResult(kind="bench", plan=plan, rows=rows, extras=extras)


# ---------------------------------------------------------------------------
# emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def sweep_to_csv(result: SweepResult) -> str:
    """Stable versioned CSV: one row per (group, SNR point)."""
    header = BENCH_HEADER if result.kind == "bench" else SWEEP_HEADER
    lines = [
        header,
        f"# schema_version: {SCHEMA_VERSION}",
        f"# kind: {result.kind}",
        f"# seed: {result.plan.seed}",
        ",".join(CSV_COLUMNS),
    ]
    group_key = None
    for row in result.rows:
        key = (row.scheme, row.detector)
        if key != group_key:
            group_key = key
            lines.append(f"# scheme: {row.scheme}")
            if result.kind == "bench":
                lines.append(f"# detector: {row.detector}")
                xi = result.extras.get("xi_hat", {}).get(row.detector)
                if xi is not None:
                    lines.append(
                        "# xi_hat: " + " ".join(repr(v) for v in xi)
                    )
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    row.snr_db,
                    row.mc_aber,
                    row.mc_aber_stderr,
                    row.analytical_aber,
                    row.analytical_capacity,
                    row.mean_visited_nodes,
                    row.mean_detect_us,
                    row.trials,
                    row.bit_errors,
                )
            )
        )
    return "\n".join(lines) + "\n"


def sweep_to_json(result: SweepResult) -> str:
    """Full results with the plan echoed for provenance."""
    rows = []
    for r in result.rows:
        row = dataclasses.asdict(r)
        if r.analytical_aber is not None:
            # the union bound is not a probability at low SNR; CSV keeps the
            # raw value (fixed schema), the usable copy lives here
            row["analytical_aber_clamped"] = min(r.analytical_aber, 0.5)
        rows.append(row)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": result.kind,
        "plan": result.plan.to_dict(),
        "rows": rows,
        "extras": result.extras,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_sweep(result: SweepResult, path: str, fmt: str | None = None) -> None:
    """Serialize to path; format inferred from the suffix unless given."""
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {fmt!r}")
    text = sweep_to_csv(result) if fmt == "csv" else sweep_to_json(result)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write output {path}: {exc}") from exc
