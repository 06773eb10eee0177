"""Channel statistics and correlated Rician / Rayleigh channel synthesis."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.constants import speed_of_light
from scipy.linalg import eigh
from scipy.special import roots_legendre

from .geometry import (
    ArrayGeometry,
    UserPlacement,
    element_positions,
    local_angles,
    one_ring_spreads,
    wave_vector,
)

DEFAULT_QUAD_NODES = 30

# Negative eigenvalues down to this fraction of trace(R)/M are quadrature noise
PSD_CLAMP_FRACTION = 1e-8

_FSPL_CONSTANT_DB = 20.0 * math.log10(4.0 * math.pi / speed_of_light)


class ChannelError(ValueError):
    """Raised for invalid channel-model inputs."""


class DegenerateSpreadError(ChannelError):
    """Raised when an angular spread is zero and the ring integral has no area."""


class CovarianceNotPSDError(ChannelError):
    """Raised when a covariance has an eigenvalue below the clamp threshold."""

    def __init__(self, message: str, min_eigenvalue: float, threshold: float) -> None:
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.threshold = threshold


@dataclass(frozen=True)
class PathLossParams:
    """Large-scale fading and LoS-probability parameters."""

    carrier_freq: float = 2.5e9
    sigma_sf_los: float = 1.0  # dB
    sigma_sf_nlos: float = 20.0  # dB
    kappa: float = 9.61
    omega: float = 0.16
    exponent: float = 2.0  # 2.0 is free space

    def __post_init__(self) -> None:
        if self.carrier_freq <= 0:
            raise ChannelError(f"Carrier frequency must be positive, got {self.carrier_freq}")
        if self.sigma_sf_los < 0 or self.sigma_sf_nlos < 0:
            raise ChannelError("Shadow-fading standard deviations must be non-negative")
        if self.exponent <= 0:
            raise ChannelError(f"Path-loss exponent must be positive, got {self.exponent}")


@dataclass(frozen=True)
class ChannelStats:
    """First and second order statistics of one user's channel row."""

    los_mean: NDArray[np.complex128]
    covariance: NDArray[np.complex128]
    beta_los: float
    beta_nlos: float
    has_los: bool
    p_los: float

    @property
    def n_elements(self) -> int:
        return int(self.los_mean.shape[0])

    @property
    def mean_vector(self) -> NDArray[np.complex128]:
        """Mean actually used for sampling: h_bar on LoS, zero otherwise."""
        if self.has_los:
            return self.los_mean
        return np.zeros_like(self.los_mean)

    @property
    def mean_power(self) -> float:
        """E||h||^2 = ||mean||^2 + tr(R)."""
        mean = self.mean_vector
        return float(np.vdot(mean, mean).real + np.trace(self.covariance).real)


@dataclass(frozen=True)
class ChannelRealization:
    """Sampled N_r x M channel matrix of one user."""

    matrix: NDArray[np.complex128]

    @property
    def n_rx(self) -> int:
        return int(self.matrix.shape[0])


def path_loss_db(
    distance: float, freq: float, shadow_draw: float = 0.0, exponent: float = 2.0
) -> float:
    """Close-in path loss in dB; exponent 2 gives free space plus shadowing."""
    if distance <= 0:
        raise ChannelError(f"Distance must be positive, got {distance}")
    if freq <= 0:
        raise ChannelError(f"Frequency must be positive, got {freq}")
    return (
        10.0 * exponent * math.log10(distance)
        + 20.0 * math.log10(freq)
        + _FSPL_CONSTANT_DB
        + shadow_draw
    )


def db_to_gain(loss_db: float) -> float:
    """Linear channel power gain for a loss in dB."""
    return float(10.0 ** (-loss_db / 10.0))


def los_probability(elevation: float, kappa: float, omega: float) -> float:
    """Air-to-ground LoS probability; elevation in degrees."""
    exponent = -omega * (elevation - kappa)
    if exponent > 700.0:
        return 0.0
    return 1.0 / (1.0 + kappa * math.exp(exponent))


def los_steering(
    geom: ArrayGeometry, azimuth: float, elevation: float, beta_los: float
) -> NDArray[np.complex128]:
    """LoS channel response for local-frame angles (radians)."""
    if beta_los < 0:
        raise ChannelError(f"LoS gain must be non-negative, got {beta_los}")
    k = wave_vector(azimuth, elevation, geom.wavelength)
    phases = element_positions(geom) @ k
    return math.sqrt(beta_los) * np.exp(1j * phases)


def one_ring_covariance(
    geom: ArrayGeometry,
    spreads: tuple[float, float, float],
    azimuth_center: float,
    beta_nlos: float,
    quad_nodes: int = DEFAULT_QUAD_NODES,
) -> NDArray[np.complex128]:
    """Spatial covariance of the local scattering ring (3D one-ring model).

    The angular box is taken in the ground frame around the user's azimuth and
    the ring's centre elevation; each quadrature direction is rotated into the
    array's local frame before it meets the element positions.
    """
    delta_phi, delta_theta, theta_center = spreads
    if delta_phi <= 0 or delta_theta <= 0:
        raise DegenerateSpreadError(
            f"Angular spreads must be positive, got ({delta_phi}, {delta_theta})"
        )
    if quad_nodes < 2:
        raise ChannelError(f"Need at least 2 quadrature nodes per axis, got {quad_nodes}")

    nodes, weights = roots_legendre(quad_nodes)
    phi = azimuth_center + delta_phi * nodes
    theta = theta_center + delta_theta * nodes
    phi_grid, theta_grid = np.meshgrid(phi, theta, indexing="ij")
    w = np.outer(weights, weights).ravel()

    local_phi, local_theta = local_angles(geom.orientation, phi_grid.ravel(), theta_grid.ravel())
    k = wave_vector(local_phi, local_theta, geom.wavelength)
    steering = np.exp(1j * (k @ element_positions(geom).T))  # (nodes^2, M)

    # Weights of the tensor rule sum to 4, hence beta/4
    cov = (steering.T * w) @ steering.conj() * (beta_nlos / 4.0)
    return _hermitian_from_upper(cov)


def rank_one_covariance(
    geom: ArrayGeometry, azimuth_center: float, theta_center: float, beta_nlos: float
) -> NDArray[np.complex128]:
    """Zero-spread limit of the one-ring covariance: beta * a a^H."""
    local_phi, local_theta = local_angles(geom.orientation, azimuth_center, theta_center)
    a = los_steering(geom, float(local_phi), float(local_theta), 1.0)
    return _hermitian_from_upper(beta_nlos * np.outer(a, a.conj()))


def _hermitian_from_upper(cov: NDArray[np.complex128]) -> NDArray[np.complex128]:
    upper = np.triu(cov, 1)
    out = upper + upper.conj().T
    out[np.diag_indices_from(out)] = cov.diagonal().real
    return out


def covariance_sqrt(cov: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Hermitian square root U D^1/2 U^H with quadrature-noise eigenvalues clamped."""
    n = cov.shape[0]
    eigvals, eigvecs = eigh(cov)
    threshold = PSD_CLAMP_FRACTION * max(float(np.trace(cov).real), 0.0) / n
    if eigvals.min() < -threshold:
        raise CovarianceNotPSDError(
            f"Covariance not PSD: eigenvalue {eigvals.min():.3e} below -{threshold:.3e}",
            min_eigenvalue=float(eigvals.min()),
            threshold=threshold,
        )
    root = np.sqrt(np.clip(eigvals, 0.0, None))
    return (eigvecs * root) @ eigvecs.conj().T


def sample_channel(
    stats: ChannelStats, n_rx: int, rng_seed: int | np.random.SeedSequence
) -> ChannelRealization:
    """Draw N_r independent rows h = mean + R^1/2 e (Karhunen-Loeve expansion)."""
    if n_rx < 1:
        raise ChannelError(f"Need at least one receive antenna, got {n_rx}")
    rng = np.random.default_rng(rng_seed)
    m = stats.n_elements
    white = (rng.standard_normal((n_rx, m)) + 1j * rng.standard_normal((n_rx, m))) / math.sqrt(2)
    rows = stats.mean_vector + white @ covariance_sqrt(stats.covariance).T
    return ChannelRealization(matrix=rows)


def build_channel_stats(
    geom: ArrayGeometry,
    placement: UserPlacement,
    params: PathLossParams,
    rng: np.random.Generator,
    allow_los: bool = True,
    quad_nodes: int = DEFAULT_QUAD_NODES,
    shadowing: bool = True,
) -> ChannelStats:
    """Channel statistics for one user and one Monte Carlo trial.

    Draw order is fixed (LoS shadowing, NLoS shadowing, LoS indicator) so that
    a given generator state always yields the same statistics.
    """
    f_los = rng.normal(0.0, params.sigma_sf_los)
    f_nlos = rng.normal(0.0, params.sigma_sf_nlos)
    los_draw = rng.random()
    if not shadowing:
        f_los = f_nlos = 0.0

    beta_los = db_to_gain(
        path_loss_db(placement.distance, params.carrier_freq, f_los, params.exponent)
    )
    beta_nlos = db_to_gain(
        path_loss_db(placement.distance, params.carrier_freq, f_nlos, params.exponent)
    )
    p_los = (
        los_probability(math.degrees(placement.elevation), params.kappa, params.omega)
        if allow_los
        else 0.0
    )

    local_phi, local_theta = local_angles(geom.orientation, placement.azimuth, placement.elevation)
    los_mean = los_steering(geom, float(local_phi), float(local_theta), beta_los)

    spreads = one_ring_spreads(placement)
    try:
        cov = one_ring_covariance(geom, spreads, placement.azimuth, beta_nlos, quad_nodes)
    except DegenerateSpreadError:
        cov = rank_one_covariance(geom, placement.azimuth, spreads[2], beta_nlos)

    return ChannelStats(
        los_mean=los_mean,
        covariance=cov,
        beta_los=beta_los,
        beta_nlos=beta_nlos,
        has_los=bool(los_draw < p_los),
        p_los=p_los,
    )


def _interleave(values: NDArray[np.complex128]) -> list[float]:
    flat = np.ascontiguousarray(values).ravel()
    return np.column_stack([flat.real, flat.imag]).ravel().tolist()


def dump_channel_stats(stats: ChannelStats, path: Path, fmt: str = "json") -> Path:
    """Write channel statistics for debugging (layout in docs/FORMATS.md)."""
    header = {
        "n_elements": stats.n_elements,
        "beta_los": stats.beta_los,
        "beta_nlos": stats.beta_nlos,
        "has_los": stats.has_los,
        "p_los": stats.p_los,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {
            **header,
            "los_mean": _interleave(stats.los_mean),
            "covariance": _interleave(stats.covariance),
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
    elif fmt == "binary":
        body = np.concatenate(
            [np.asarray(_interleave(stats.los_mean)), np.asarray(_interleave(stats.covariance))]
        ).astype("<f8")
        with open(path, "wb") as f:
            f.write(json.dumps(header).encode("utf-8") + b"\n")
            f.write(body.tobytes())
    else:
        raise ChannelError(f"Unknown dump format: {fmt}")
    return path
