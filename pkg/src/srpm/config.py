"""System configuration shared by every module.

A :class:`SystemConfig` pins the physical and modulation dimensions of one
link: surface size, antenna counts, sub-surface count, streams, constellation
order and the phase-offset alphabet. Instances are frozen; sweeps derive
per-point variants with :func:`dataclasses.replace`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import ConfigError

SCHEMES = ("srpm", "pbf", "pbit", "rpm", "qrm")
CONSTELLATION_KINDS = ("psk", "qam")


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and (value & (value - 1)) == 0


@dataclass(frozen=True)
class SystemConfig:
    """Link dimensions and modulation parameters.

    Attributes:
        n: number of reflecting elements.
        n_t: transmit antennas.
        n_r: receive antennas.
        l: sub-surfaces (element groups of n // l).
        n_s: spatial streams.
        m: constellation order per stream (power of two).
        k: phase-offset index bound; offsets run over {-k..k}.
        delta_theta: phase-offset quantum in radians, in (0, pi].
        power: transmit power (linear).
        sigma2: receiver noise variance (linear); 0 selects the noiseless path.
        scheme: reflection modulation scheme, one of SCHEMES.
        scheme_p: pattern count parameter for "rpm"/"qrm" (surfaces toggled).
        constellation: "psk" or "qam" (rectangular).
        phase_bits: optional quantizer resolution b; when set, delta_theta must
            be an integer multiple of pi / 2**(b-1) and k <= 2**(b-1).
    """

    n: int = 128
    n_t: int = 8
    n_r: int = 4
    l: int = 2
    n_s: int = 1
    m: int = 2
    k: int = 1
    delta_theta: float = math.pi / 2
    power: float = 1.0
    sigma2: float = 1.0
    scheme: str = "srpm"
    scheme_p: int = 1
    constellation: str = "qam"
    phase_bits: int | None = None

    def __post_init__(self) -> None:
        for name in ("n", "n_t", "n_r", "l", "n_s", "m"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.k, int) or self.k < 0:
            raise ConfigError(f"k must be a non-negative integer, got {self.k!r}")
        if self.n % self.l != 0:
            raise ConfigError(
                f"n must be divisible by l: n={self.n}, l={self.l}"
            )
        if not _is_power_of_two(self.m) or self.m < 2:
            raise ConfigError(f"m must be a power of two >= 2, got {self.m}")
        if not 0.0 < self.delta_theta <= math.pi + 1e-12:
            raise ConfigError(
                f"delta_theta must lie in (0, pi], got {self.delta_theta}"
            )
        if self.power < 0:
            raise ConfigError(f"power must be >= 0, got {self.power}")
        if self.sigma2 < 0:
            raise ConfigError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.scheme not in SCHEMES:
            raise ConfigError(
                f"scheme must be one of {SCHEMES}, got {self.scheme!r}"
            )
        if self.scheme in ("rpm", "qrm") and not 0 < self.scheme_p < self.l:
            raise ConfigError(
                f"scheme_p must satisfy 0 < p < l for {self.scheme}, got "
                f"p={self.scheme_p}, l={self.l}"
            )
        if self.constellation not in CONSTELLATION_KINDS:
            raise ConfigError(
                f"constellation must be one of {CONSTELLATION_KINDS}, "
                f"got {self.constellation!r}"
            )
        if self.phase_bits is not None:
            b = self.phase_bits
            if not isinstance(b, int) or b < 1:
                raise ConfigError(f"phase_bits must be a positive integer, got {b!r}")
            quantum = math.pi / 2 ** (b - 1)
            ratio = self.delta_theta / quantum
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError(
                    "delta_theta must be a positive integer multiple of "
                    f"pi/2**(phase_bits-1) = {quantum:.6g}, got {self.delta_theta}"
                )
            if self.k > 2 ** (b - 1):
                raise ConfigError(
                    f"k must not exceed 2**(phase_bits-1) = {2 ** (b - 1)}, got {self.k}"
                )

    @property
    def elements_per_surface(self) -> int:
        return self.n // self.l

    @property
    def bits_per_stream_symbol(self) -> int:
        return self.m.bit_length() - 1

    @property
    def offsets_per_surface(self) -> int:
        return 2 * self.k + 1

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemConfig":
        """Build from a plain mapping; unknown keys are rejected."""
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(
                f"unknown config keys: {sorted(unknown)}; valid keys: {sorted(known)}"
            )
        return cls(**doc)
