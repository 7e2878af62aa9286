"""Configuration records for the parabolic-equation solver."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigurationError

C0 = 299_792_458.0


class GroundKind(str, enum.Enum):
    PEC = "PEC"
    LOSSY = "LossyDielectric"


@dataclass(frozen=True)
class GroundModel:
    """Electrical description of the ground (and of terrain facets).

    Complex permittivities are expressed for the ``exp(-j*omega*t)`` time
    convention implied by the marching multiplier, i.e. ``eps_r*(1 + j*tan_delta)``.
    """

    kind: GroundKind = GroundKind.PEC
    eps_r: float = 1.0
    tan_delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GroundKind(self.kind))
        if self.kind is GroundKind.LOSSY:
            if not self.eps_r > 1.0:
                raise ConfigurationError(f"eps_r must exceed 1, got {self.eps_r}")
            if self.tan_delta < 0.0:
                raise ConfigurationError(f"tan_delta must be >= 0, got {self.tan_delta}")

    @classmethod
    def pec(cls) -> GroundModel:
        return cls(GroundKind.PEC)

    @classmethod
    def lossy(cls, eps_r: float = 4.5, tan_delta: float = 0.07) -> GroundModel:
        return cls(GroundKind.LOSSY, eps_r, tan_delta)

    @property
    def is_pec(self) -> bool:
        return self.kind is GroundKind.PEC

    @property
    def relative_permittivity(self) -> complex:
        return self.eps_r * (1.0 + 1j * self.tan_delta)

    @property
    def refractive_index(self) -> complex:
        return np.sqrt(complex(self.relative_permittivity))

    def facet_reflection(self) -> complex:
        """Normal-incidence reflection coefficient used at vertical terrain facets."""
        if self.is_pec:
            return -1.0 + 0.0j
        n = self.refractive_index
        # sign chosen so the PEC limit (|n| -> inf) gives -1
        return complex((1.0 - n) / (1.0 + n))


@dataclass(frozen=True)
class AntennaConfig:
    tx_height_m: float
    rx_height_m: float
    elevation_deg: float
    beamwidth_deg: float
    frequency_hz: float

    def __post_init__(self):
        if not self.tx_height_m > 0:
            raise ConfigurationError(f"tx_height_m must be > 0, got {self.tx_height_m}")
        if not self.rx_height_m > 0:
            raise ConfigurationError(f"rx_height_m must be > 0, got {self.rx_height_m}")
        if not 0.0 < self.beamwidth_deg < 90.0:
            raise ConfigurationError(f"beamwidth_deg must lie in (0, 90), got {self.beamwidth_deg}")
        if not abs(self.elevation_deg) < 45.0:
            raise ConfigurationError(f"|elevation_deg| must be < 45, got {self.elevation_deg}")
        if not self.frequency_hz > 0:
            raise ConfigurationError(f"frequency_hz must be > 0, got {self.frequency_hz}")

    def replace(self, **changes) -> AntennaConfig:
        return replace(self, **changes)


def _next_pow2(n: int) -> int:
    return 1 << max(0, math.ceil(math.log2(max(n, 1))))


@dataclass(frozen=True)
class PweConfig:
    """Grid and physics settings of a two-way PE run.

    ``max_height_m / delta_height_m`` is rounded *up* to the next power of two,
    so the actual domain height ``n_height * delta_height_m`` may exceed the
    requested one.
    """

    delta_range_m: float = 50.0
    delta_height_m: float = 0.5
    max_height_m: float = 512.0
    frequency_hz: float = 435e6
    total_range_m: float = 5000.0
    ground: GroundModel = field(default_factory=GroundModel.pec)
    absorber_fraction: float = 0.25
    max_reflections: int = 1
    near_field_steps: int = 10

    def __post_init__(self):
        for name in ("delta_range_m", "delta_height_m", "max_height_m", "frequency_hz", "total_range_m"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 < self.absorber_fraction < 0.5:
            raise ConfigurationError(f"absorber_fraction must lie in (0, 0.5), got {self.absorber_fraction}")
        if self.max_reflections < 0:
            raise ConfigurationError("max_reflections must be >= 0")
        if self.near_field_steps < 0:
            raise ConfigurationError("near_field_steps must be >= 0")
        if self.n_range < 1:
            raise ConfigurationError("total_range_m must cover at least one range step")

    @property
    def n_height(self) -> int:
        return _next_pow2(int(math.ceil(self.max_height_m / self.delta_height_m - 1e-9)))

    @property
    def domain_height_m(self) -> float:
        return self.n_height * self.delta_height_m

    @property
    def n_range(self) -> int:
        return int(round(self.total_range_m / self.delta_range_m))

    @property
    def k0(self) -> float:
        return 2.0 * math.pi * self.frequency_hz / C0

    @property
    def wavelength(self) -> float:
        return C0 / self.frequency_hz

    @property
    def heights(self) -> np.ndarray:
        return np.arange(self.n_height) * self.delta_height_m

    @property
    def ranges(self) -> np.ndarray:
        return np.arange(self.n_range + 1) * self.delta_range_m

    @property
    def n_absorber(self) -> int:
        return int(round(self.absorber_fraction * self.n_height))

    def replace(self, **changes) -> PweConfig:
        return replace(self, **changes)
