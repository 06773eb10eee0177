"""Array and user geometry: UPA element lattice, wave vectors, one-ring spreads."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.constants import speed_of_light


class GeometryError(ValueError):
    """Raised when a geometric quantity is outside its domain."""


class Orientation(str, Enum):
    """Mounting of the planar array.

    - HORIZONTAL: array plane parallel to the ground, boresight pointing down (HAPS)
    - VERTICAL: array plane perpendicular to the ground, boresight horizontal (mast)
    """

    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


# Columns are the local x, y, z axes expressed in the ground frame
# (x east, y north, z up). Both are proper rotations.
_LOCAL_AXES: dict[Orientation, NDArray[np.float64]] = {
    Orientation.HORIZONTAL: np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    ),
    Orientation.VERTICAL: np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0],
            [0.0, 1.0, 0.0],
        ]
    ),
}


def rotation_matrix(orientation: Orientation) -> NDArray[np.float64]:
    """Local-to-ground rotation for an array orientation."""
    return _LOCAL_AXES[Orientation(orientation)].copy()


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array with M_H x M_V elements.

    Spacings are in wavelengths, the wavelength in meters.
    """

    m_h: int
    m_v: int
    d_h: float = 0.5
    d_v: float = 0.5
    orientation: Orientation = Orientation.HORIZONTAL
    wavelength: float = speed_of_light / 2.5e9

    def __post_init__(self) -> None:
        if self.m_h < 1 or self.m_v < 1:
            raise GeometryError(f"Array needs at least one element, got {self.m_h}x{self.m_v}")
        if self.d_h <= 0 or self.d_v <= 0:
            raise GeometryError(f"Element spacing must be positive, got ({self.d_h}, {self.d_v})")
        if self.wavelength <= 0:
            raise GeometryError(f"Wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    @property
    def n_elements(self) -> int:
        """Total number of elements M."""
        return self.m_h * self.m_v

    @classmethod
    def for_elements(
        cls,
        n_elements: int,
        carrier_freq: float,
        orientation: Orientation = Orientation.HORIZONTAL,
        d_h: float = 0.5,
        d_v: float = 0.5,
    ) -> ArrayGeometry:
        """Most square M_H x M_V layout with M_H >= M_V for a given element count."""
        if n_elements < 1:
            raise GeometryError(f"Array needs at least one element, got {n_elements}")
        if carrier_freq <= 0:
            raise GeometryError(f"Carrier frequency must be positive, got {carrier_freq}")
        m_v = max(d for d in range(1, math.isqrt(n_elements) + 1) if n_elements % d == 0)
        return cls(
            m_h=n_elements // m_v,
            m_v=m_v,
            d_h=d_h,
            d_v=d_v,
            orientation=orientation,
            wavelength=speed_of_light / carrier_freq,
        )


def element_position(geom: ArrayGeometry, m: int) -> NDArray[np.float64]:
    """Position of the m-th element (1-based) in the array's local frame, meters."""
    if not 1 <= m <= geom.n_elements:
        raise GeometryError(f"Element index {m} outside [1, {geom.n_elements}]")
    i = (m - 1) % geom.m_h
    j = (m - 1) // geom.m_h
    return np.array([i * geom.d_h * geom.wavelength, j * geom.d_v * geom.wavelength, 0.0])


def element_positions(geom: ArrayGeometry) -> NDArray[np.float64]:
    """All element positions in the local frame, shape (M, 3), ordered by m."""
    idx = np.arange(geom.n_elements)
    positions = np.zeros((geom.n_elements, 3))
    positions[:, 0] = (idx % geom.m_h) * geom.d_h * geom.wavelength
    positions[:, 1] = (idx // geom.m_h) * geom.d_v * geom.wavelength
    return positions


def wave_vector(azimuth: ArrayLike, elevation: ArrayLike, wavelength: float) -> NDArray[np.float64]:
    """Wave vector k(phi, theta) in rad/m; broadcasts over angle arrays, last axis is xyz."""
    if wavelength <= 0:
        raise GeometryError(f"Wavelength must be positive, got {wavelength}")
    phi = np.asarray(azimuth, dtype=float)
    theta = np.asarray(elevation, dtype=float)
    direction = np.stack(
        np.broadcast_arrays(
            np.cos(theta) * np.cos(phi),
            np.cos(theta) * np.sin(phi),
            np.sin(theta),
        ),
        axis=-1,
    )
    return (2.0 * np.pi / wavelength) * direction


def local_angles(
    orientation: Orientation, azimuth: ArrayLike, elevation: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Map ground-frame angles of the array-to-user direction into local (phi, theta).

    Ground elevation is measured downward from the horizon, so the direction
    towards a user below the array is (cos e cos a, cos e sin a, -sin e).
    For a horizontal array the local elevation equals the ground elevation and
    the local azimuth is mirrored.
    """
    a = np.asarray(azimuth, dtype=float)
    e = np.asarray(elevation, dtype=float)
    ground = np.stack(
        np.broadcast_arrays(np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), -np.sin(e)),
        axis=-1,
    )
    local = ground @ rotation_matrix(orientation)
    phi = np.arctan2(local[..., 1], local[..., 0])
    theta = np.arcsin(np.clip(local[..., 2], -1.0, 1.0))
    return phi, theta


@dataclass(frozen=True)
class UserPlacement:
    """Ground-frame position of one user relative to the platform.

    Angles are those of the platform-to-user direction: azimuth in (-pi, pi],
    elevation above the user's horizon in (0, pi/2].
    """

    azimuth: float
    elevation: float
    distance: float
    horizontal_distance: float
    platform_height: float
    ring_radius: float

    def __post_init__(self) -> None:
        if self.distance <= 0:
            raise GeometryError(f"Slant distance must be positive, got {self.distance}")
        if self.platform_height <= 0:
            raise GeometryError(f"Platform height must be positive, got {self.platform_height}")
        if not 0 < self.ring_radius < self.horizontal_distance:
            raise GeometryError(
                f"Ring radius {self.ring_radius} m must lie in (0, {self.horizontal_distance}) m"
            )
        if not 0 < self.elevation <= math.pi / 2:
            raise GeometryError(f"Elevation {self.elevation} rad outside (0, pi/2]")
        if not -math.pi < self.azimuth <= math.pi:
            raise GeometryError(f"Azimuth {self.azimuth} rad outside (-pi, pi]")


def place_user(x: float, y: float, platform_height: float, ring_radius: float) -> UserPlacement:
    """Placement of a ground user at (x, y) meters from the point below the platform."""
    horizontal = math.hypot(x, y)
    azimuth = math.atan2(y, x)
    if azimuth <= -math.pi:
        azimuth = math.pi
    return UserPlacement(
        azimuth=azimuth,
        elevation=math.atan2(platform_height, horizontal),
        distance=math.hypot(horizontal, platform_height),
        horizontal_distance=horizontal,
        platform_height=platform_height,
        ring_radius=ring_radius,
    )


def one_ring_spreads(p: UserPlacement) -> tuple[float, float, float]:
    """Angular spreads of the local scattering ring seen from the platform.

    Returns (delta_phi, delta_theta, theta_center) in radians.
    """
    d, r, h = p.horizontal_distance, p.ring_radius, p.platform_height
    if d <= r:
        raise GeometryError(f"Horizontal distance {d} m must exceed ring radius {r} m")
    delta_phi = math.atan(r / d)
    theta_min = math.atan(h / (d + r))
    theta_max = math.atan(h / (d - r))
    return delta_phi, (theta_max - theta_min) / 2, (theta_max + theta_min) / 2
