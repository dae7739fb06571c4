"""Uniform linear array geometry and the spherical-wavefront channel model."""

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ncbf.errors import ConfigError

SPEED_OF_LIGHT = 2.998e8  # m/s


class Region(enum.IntEnum):
    REACTIVE = 0
    RADIATIVE = 1
    FAR = 2


@dataclass(frozen=True)
class ArrayConfig:
    """A ULA of `num_elements` isotropic elements along the y-axis.

    Element n sits at y = (n - (N-1)/2) * d, x = 0, so the array is centered
    on the origin and its broadside is the +x axis.
    """

    num_elements: int
    element_spacing: float
    carrier_frequency: float

    def __post_init__(self):
        violations = self.violations()
        if violations:
            raise ConfigError(violations)

    def violations(self) -> list[str]:
        found = []
        if self.num_elements < 2:
            found.append(f"num_elements must be >= 2, got {self.num_elements}")
        if not self.element_spacing > 0:
            found.append(f"element_spacing must be > 0, got {self.element_spacing}")
        if not self.carrier_frequency > 0:
            found.append(
                f"carrier_frequency must be > 0, got {self.carrier_frequency}"
            )
        return found

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def propagation_constant(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def aperture(self) -> float:
        return (self.num_elements - 1) * self.element_spacing

    @cached_property
    def element_positions(self) -> np.ndarray:
        """(N, 2) array of (x, y) element coordinates in meters."""
        n = np.arange(self.num_elements, dtype=np.float64)
        y = (n - (self.num_elements - 1) / 2) * self.element_spacing
        return np.column_stack([np.zeros_like(y), y])


@dataclass(frozen=True)
class UserLocation:
    """In-plane polar location: boresight angle (rad, from +x toward +y) and
    range (m, from the array center)."""

    angle: float
    range: float

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError(f"range must be > 0, got {self.range}")
        if not -math.pi / 2 < self.angle < math.pi / 2:
            raise ValueError(f"angle must lie in (-pi/2, pi/2), got {self.angle}")

    @classmethod
    def from_degrees(cls, angle_deg: float, range_m: float) -> "UserLocation":
        return cls(math.radians(angle_deg), range_m)

    @property
    def angle_deg(self) -> float:
        return math.degrees(self.angle)

    @property
    def direction_cosine(self) -> float:
        return math.sin(self.angle)

    def cartesian(self) -> tuple[float, float]:
        return self.range * math.cos(self.angle), self.range * math.sin(self.angle)

    def __repr__(self):
        return f"<UserLocation {self.angle_deg:.2f}deg {self.range:.3f}m>"


def rayleigh_distance(config: ArrayConfig) -> float:
    return 2 * config.aperture**2 / config.wavelength


def fresnel_distance(config: ArrayConfig) -> float:
    return (config.aperture**4 / (8 * config.wavelength)) ** (1 / 3)


def classify_region(config: ArrayConfig, r: float) -> Region:
    if r < fresnel_distance(config):
        return Region.REACTIVE
    if r < rayleigh_distance(config):
        return Region.RADIATIVE
    return Region.FAR


def element_distances(config: ArrayConfig, loc: UserLocation) -> np.ndarray:
    x, y = loc.cartesian()
    pos = config.element_positions
    return np.hypot(x - pos[:, 0], y - pos[:, 1])


def channel_vector(config: ArrayConfig, loc: UserLocation) -> np.ndarray:
    """Near-field LoS array response h(p) for isotropic elements.

    Entry n is lambda / (4 pi r_n) * exp(j beta r_n).
    """
    r_n = element_distances(config, loc)
    amplitude = config.wavelength / (4 * np.pi * r_n)
    return amplitude * np.exp(1j * config.propagation_constant * r_n)


def channel_matrix(config: ArrayConfig, locations) -> np.ndarray:
    """Stack channel vectors as columns, shape (N, K)."""
    return np.column_stack([channel_vector(config, loc) for loc in locations])


def steering_vector(config: ArrayConfig, u: float) -> np.ndarray:
    """Planar-wavefront steering vector at direction cosine u, unit entries."""
    y = config.element_positions[:, 1]
    return np.exp(-1j * config.propagation_constant * y * u)


def channel_correlation(
    config: ArrayConfig, loc_a: UserLocation, loc_b: UserLocation
) -> float:
    h_a = channel_vector(config, loc_a)
    h_b = channel_vector(config, loc_b)
    return vector_correlation(h_a, h_b)


def vector_correlation(h_a: np.ndarray, h_b: np.ndarray) -> float:
    """|h_a^H h_b| / (||h_a|| ||h_b||), clipped to [0, 1]."""
    num = abs(np.vdot(h_a, h_b))
    den = np.linalg.norm(h_a) * np.linalg.norm(h_b)
    return float(min(num / den, 1.0))
