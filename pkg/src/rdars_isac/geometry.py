"""Coordinate frames, surface element layout and planar-wave phases.

Local frame of the surface: z is the boresight normal, azimuth rotates
toward +x and elevation toward +y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 3.7e9
UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, v) -> "Position3D":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class AzEl:
    """Azimuth/elevation pair in radians, both within [-pi/2, pi/2]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        half = math.pi / 2 + 1e-12
        if not (abs(self.azimuth) <= half and abs(self.elevation) <= half):
            raise ValueError(f"angles outside the front half-space: {self}")

    @classmethod
    def from_degrees(cls, az_deg: float, el_deg: float) -> "AzEl":
        return cls(math.radians(az_deg), math.radians(el_deg))

    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.azimuth), math.degrees(self.elevation)


@dataclass(frozen=True)
class RdarsPose:
    origin: Position3D = Position3D(0.0, 0.0, 0.0)
    rotation: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0.0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be proper (det = +1)")
        object.__setattr__(self, "rotation", tuple(tuple(float(v) for v in row) for row in r))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    def to_local(self, p) -> np.ndarray:
        """World point -> local-frame coordinates."""
        p = p.as_array() if isinstance(p, Position3D) else np.asarray(p, dtype=float)
        return self.matrix.T @ (p - self.origin.as_array())

    def to_world(self, v) -> np.ndarray:
        return self.origin.as_array() + self.matrix @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class ArrayGeometry:
    """Regular rows x cols panel in the local xy-plane, centred on the origin.

    Element n sits at row n // cols (along +y) and column n % cols (along +x).
    """

    rows: int = 16
    cols: int = 16
    spacing: float = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ / 2

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @cached_property
    def element_positions(self) -> np.ndarray:
        n = np.arange(self.size)
        row, col = np.divmod(n, self.cols)
        pos = np.zeros((self.size, 3))
        pos[:, 0] = (col - (self.cols - 1) / 2) * self.spacing
        pos[:, 1] = (row - (self.rows - 1) / 2) * self.spacing
        pos.setflags(write=False)
        return pos

    def corners(self) -> frozenset[int]:
        last = self.size - 1
        return frozenset({0, self.cols - 1, last - self.cols + 1, last})


def wavelength(carrier_hz: float) -> float:
    if not carrier_hz > 0:
        raise ValueError(f"carrier frequency must be positive, got {carrier_hz}")
    return SPEED_OF_LIGHT / carrier_hz


def direction_unit_vector(angles: AzEl) -> np.ndarray:
    az, el = angles.azimuth, angles.elevation
    return np.array([math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)])


def direction_unit_vectors(az, el) -> np.ndarray:
    """Vectorised form of :func:`direction_unit_vector`; returns shape (..., 3)."""
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    return np.stack([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)], axis=-1)


def azel_from_vector(u) -> AzEl:
    """Inverse of :func:`direction_unit_vector` for vectors with z >= 0."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    return AzEl(math.atan2(u[0], u[2]), math.asin(max(-1.0, min(1.0, u[1]))))


def _check_unit(v, name="direction") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector, norm={np.linalg.norm(v)!r}")
    return v


def steering_phase(element_pos, direction, lam: float):
    """Planar-wave phase (2*pi/lam) * (p . u), not wrapped.

    ``element_pos`` may be a single 3-vector or an (N, 3) array.
    """
    u = _check_unit(direction)
    if not lam > 0:
        raise ValueError("wavelength must be positive")
    phase = (2 * np.pi / lam) * (np.asarray(element_pos, dtype=float) @ u)
    return float(phase) if np.ndim(phase) == 0 else phase


def angle_between(dir_a, dir_b) -> float:
    a = _check_unit(dir_a, "dir_a")
    b = _check_unit(dir_b, "dir_b")
    # clamp absorbs rounding just outside [-1, 1]
    return math.acos(max(-1.0, min(1.0, float(a @ b))))
