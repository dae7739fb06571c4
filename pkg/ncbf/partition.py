"""Correlation-based partition of the coverage area into polar sectors.

Angular edges are the orthogonal direction-cosine samples of the array,
radial edges are rings spaced so adjacent rings keep a target channel
correlation. Sectors are numbered column by column (ascending angle), and
inside a column from the outermost ring inwards.
"""

import enum
import functools
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.integrate
import scipy.optimize

from ncbf._compat import StrEnum
from ncbf.array import ArrayConfig, UserLocation
from ncbf.errors import ConfigError, EmptyGrid, NoRoot, OutOfCoverage

BETA_BRACKET = (1e-6, 20.0)
BETA_TOLERANCE = 1e-6


class RadialLaw(StrEnum):
    COSINE = "cosine"  # r_s = N^2 d^2 cos(psi) / (2 lambda beta s)
    FRESNEL = "fresnel"  # r_s = N^2 d^2 cos^2(psi) / (2 lambda beta^2 s)


@dataclass(frozen=True)
class PartitionSpec:
    r_min: float
    r_max: float
    psi_min: float
    psi_max: float
    correlation_target: float = 0.7
    beta_delta: float | None = None
    radial_law: RadialLaw = RadialLaw.COSINE

    def __post_init__(self):
        violations = self.violations()
        if violations:
            raise ConfigError(violations)

    def violations(self) -> list[str]:
        found = []
        if not 0 < self.r_min < self.r_max:
            found.append(
                f"coverage range must satisfy 0 < r_min < r_max, got "
                f"[{self.r_min}, {self.r_max}]"
            )
        if not -math.pi / 2 < self.psi_min < self.psi_max < math.pi / 2:
            found.append(
                f"coverage angles must satisfy -90 < psi_min < psi_max < 90 deg, "
                f"got [{math.degrees(self.psi_min):.3f}, "
                f"{math.degrees(self.psi_max):.3f}]"
            )
        if not 0 < self.correlation_target < 1:
            found.append(
                f"correlation_target must lie in (0, 1), got "
                f"{self.correlation_target}"
            )
        if self.beta_delta is not None and not self.beta_delta > 0:
            found.append(f"beta_delta must be > 0, got {self.beta_delta}")
        return found

    @property
    def beta(self) -> float:
        if self.beta_delta is not None:
            return self.beta_delta
        return beta_from_correlation(self.correlation_target)

    def contains(self, loc: UserLocation) -> bool:
        return (
            self.psi_min <= loc.angle <= self.psi_max
            and self.r_min <= loc.range <= self.r_max
        )


@dataclass(frozen=True)
class Sector:
    id: int
    column: int
    psi_lo: float
    psi_hi: float
    r_lo: float
    r_hi: float

    @property
    def center(self) -> UserLocation:
        return UserLocation(
            (self.psi_lo + self.psi_hi) / 2, (self.r_lo + self.r_hi) / 2
        )


@dataclass(frozen=True, eq=False)
class SectorGrid:
    spec: PartitionSpec
    beta: float
    angle_edges: np.ndarray  # ascending boresight angles, radians
    radial_edges: tuple[np.ndarray, ...]  # per column, strictly decreasing
    sectors: tuple[Sector, ...]

    @property
    def num_sectors(self) -> int:
        return len(self.sectors)

    @property
    def num_columns(self) -> int:
        return len(self.radial_edges)

    @property
    def direction_cosines(self) -> np.ndarray:
        return np.sin(self.angle_edges)

    def column_offset(self, column: int) -> int:
        return sum(len(edges) - 1 for edges in self.radial_edges[:column])

    def to_table(self) -> str:
        lines = [
            f"# M_C = {self.num_sectors}, beta_delta = {self.beta:.6f}, "
            f"law = {self.spec.radial_law}",
            f"{'sector':>6}  {'psi_lo[deg]':>11}  {'psi_hi[deg]':>11}  "
            f"{'r_lo[m]':>8}  {'r_hi[m]':>8}",
        ]
        for s in self.sectors:
            lines.append(
                f"{s.id:>6}  {math.degrees(s.psi_lo):>11.4f}  "
                f"{math.degrees(s.psi_hi):>11.4f}  {s.r_lo:>8.4f}  {s.r_hi:>8.4f}"
            )
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        spec = self.spec
        return {
            "spec": {
                "r_min": spec.r_min,
                "r_max": spec.r_max,
                "psi_min": spec.psi_min,
                "psi_max": spec.psi_max,
                "correlation_target": spec.correlation_target,
                "beta_delta": spec.beta_delta,
                "radial_law": str(spec.radial_law),
            },
            "beta": self.beta,
            "angle_edges": self.angle_edges.tolist(),
            "radial_edges": [edges.tolist() for edges in self.radial_edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SectorGrid":
        raw = dict(data["spec"])
        raw["radial_law"] = RadialLaw(raw["radial_law"])
        spec = PartitionSpec(**raw)
        angle_edges = np.asarray(data["angle_edges"], dtype=np.float64)
        radial_edges = tuple(
            np.asarray(edges, dtype=np.float64) for edges in data["radial_edges"]
        )
        return cls(
            spec=spec,
            beta=float(data["beta"]),
            angle_edges=angle_edges,
            radial_edges=radial_edges,
            sectors=_enumerate_sectors(angle_edges, radial_edges),
        )


def fresnel_integrals(x: float) -> tuple[float, float]:
    """C(x), S(x) with the pi/2 kernel, by adaptive quadrature."""
    c, _ = scipy.integrate.quad(_fresnel_cos, 0.0, x, limit=500)
    s, _ = scipy.integrate.quad(_fresnel_sin, 0.0, x, limit=500)
    return c, s


def _fresnel_cos(t):
    return math.cos(math.pi * t * t / 2)


def _fresnel_sin(t):
    return math.sin(math.pi * t * t / 2)


def fresnel_correlation(beta: float) -> float:
    """g(beta) = |C(beta) + j S(beta)| / beta, the Fresnel-approximation
    correlation between adjacent radial samples."""
    c, s = fresnel_integrals(beta)
    return math.hypot(c, s) / beta


@functools.lru_cache(maxsize=64)
def beta_from_correlation(rho: float) -> float:
    lo, hi = BETA_BRACKET
    if not 0 < rho < 1:
        raise NoRoot(f"correlation target must lie in (0, 1), got {rho}")
    f_lo = fresnel_correlation(lo) - rho
    f_hi = fresnel_correlation(hi) - rho
    if f_lo * f_hi > 0:
        raise NoRoot(
            f"correlation {rho} is outside g(beta) on [{lo}, {hi}] "
            f"(g spans [{f_hi + rho:.4f}, {f_lo + rho:.6f}])"
        )
    beta = scipy.optimize.bisect(
        lambda b: fresnel_correlation(b) - rho, lo, hi, xtol=1e-12, maxiter=200
    )
    residual = abs(fresnel_correlation(beta) - rho)
    if residual >= BETA_TOLERANCE:
        raise NoRoot(f"bisection stalled at beta={beta}, residual {residual:.2e}")
    logging.debug(f"beta_delta({rho}) = {beta:.6f}")
    return beta


def predicted_adjacent_correlation(
    beta_delta: float, psi: float, law: RadialLaw = RadialLaw.COSINE
) -> float:
    """Fresnel-approximation correlation between adjacent rings at angle psi."""
    if law == RadialLaw.FRESNEL:
        return fresnel_correlation(beta_delta)
    return fresnel_correlation(math.sqrt(beta_delta * math.cos(psi)))


def angular_samples(config: ArrayConfig) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal angular grid: direction cosines u_n = (2n - N + 1) / N and
    the matching boresight angles arcsin(u_n)."""
    n = np.arange(config.num_elements)
    u = (2 * n - config.num_elements + 1) / config.num_elements
    return u, np.arcsin(u)


def first_ring(
    config: ArrayConfig, beta_delta: float, psi: float, law: RadialLaw
) -> float:
    n2d2 = (config.num_elements * config.element_spacing) ** 2
    if law == RadialLaw.FRESNEL:
        return n2d2 * math.cos(psi) ** 2 / (2 * config.wavelength * beta_delta**2)
    return n2d2 * math.cos(psi) / (2 * config.wavelength * beta_delta)


def radial_samples(
    config: ArrayConfig,
    beta_delta: float,
    psi: float,
    r_min: float,
    r_max: float,
    law: RadialLaw = RadialLaw.COSINE,
) -> np.ndarray:
    """Rings r_s = r_1 / s, s = 1, 2, ..., that fall inside [r_min, r_max],
    in decreasing order."""
    r1 = first_ring(config, beta_delta, psi, law)
    s_first = max(1, math.floor(r1 / r_max))
    s_last = math.ceil(r1 / r_min) + 1
    rings = [r1 / s for s in range(s_first, s_last + 1)]
    return np.array([r for r in rings if r_min <= r <= r_max], dtype=np.float64)


def _enumerate_sectors(angle_edges, radial_edges) -> tuple[Sector, ...]:
    sectors = []
    for column, edges in enumerate(radial_edges):
        for ring in range(len(edges) - 1):
            sectors.append(
                Sector(
                    id=len(sectors),
                    column=column,
                    psi_lo=float(angle_edges[column]),
                    psi_hi=float(angle_edges[column + 1]),
                    r_lo=float(edges[ring + 1]),
                    r_hi=float(edges[ring]),
                )
            )
    return tuple(sectors)


def build_grid(spec: PartitionSpec, config: ArrayConfig) -> SectorGrid:
    beta = spec.beta
    u, psi = angular_samples(config)
    inside = (u > math.sin(spec.psi_min)) & (u < math.sin(spec.psi_max))
    angle_edges = np.concatenate([[spec.psi_min], psi[inside], [spec.psi_max]])

    radial_edges = []
    for lo, hi in zip(angle_edges[:-1], angle_edges[1:]):
        rings = radial_samples(
            config, beta, (lo + hi) / 2, spec.r_min, spec.r_max, spec.radial_law
        )
        rings = rings[(rings > spec.r_min) & (rings < spec.r_max)]
        radial_edges.append(np.concatenate([[spec.r_max], rings, [spec.r_min]]))

    sectors = _enumerate_sectors(angle_edges, radial_edges)
    if not sectors:
        raise EmptyGrid("partition produced no sectors")
    logging.debug(
        f"Partitioned coverage into M_C={len(sectors)} sectors "
        f"({len(radial_edges)} angular columns, beta_delta={beta:.4f})"
    )
    return SectorGrid(
        spec=spec,
        beta=beta,
        angle_edges=angle_edges,
        radial_edges=tuple(radial_edges),
        sectors=sectors,
    )


def locate(grid: SectorGrid, loc: UserLocation) -> int:
    """Sector id containing `loc`.

    Intervals are closed below and open above in both angle and range; the
    outer coverage edges belong to the last column and the outermost ring.
    On an interior angular edge this picks the column with the larger sector
    ids. On a ring edge it picks the outer ring, which carries the smaller
    sector id, not the larger one: ids run from the outermost ring inwards.
    """
    if not grid.spec.contains(loc):
        raise OutOfCoverage(f"{loc!r} lies outside the coverage area")
    column = int(np.searchsorted(grid.angle_edges, loc.angle, side="right")) - 1
    column = min(column, grid.num_columns - 1)
    ascending = grid.radial_edges[column][::-1]
    num_rings = len(ascending) - 1
    idx = int(np.searchsorted(ascending, loc.range, side="right")) - 1
    idx = min(idx, num_rings - 1)
    return grid.column_offset(column) + (num_rings - 1 - idx)


def calibrate_beta_delta(
    spec: PartitionSpec, config: ArrayConfig, target_sectors: int, iterations=80
) -> tuple[float, int]:
    """Find beta_delta whose grid has M_C closest to `target_sectors`.

    M_C is non-increasing in beta_delta, so the search bisects on the count.
    Returns (beta_delta, achieved M_C).
    """

    def count(beta):
        return build_grid(replace(spec, beta_delta=beta), config).num_sectors

    lo, hi = 1e-3, 50.0
    candidates = [(lo, count(lo)), (hi, count(hi))]
    best = min(candidates, key=lambda p: abs(p[1] - target_sectors))
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        m = count(mid)
        if abs(m - target_sectors) < abs(best[1] - target_sectors):
            best = (mid, m)
        if m == target_sectors:
            break
        if m > target_sectors:
            lo = mid
        else:
            hi = mid
    logging.info(
        f"Calibrated beta_delta={best[0]:.6f} for M_C target {target_sectors}, "
        f"achieved {best[1]}"
    )
    return best
