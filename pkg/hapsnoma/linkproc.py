"""Precoding, inter-cluster nulling detection, in-cluster ordering and NOMA rates.

Cluster indices are 0-based and cluster m is served by precoder column m.
Ranks inside a cluster are 1-based, rank 1 being the strongest user.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import null_space

# Projection norm below this fraction of ||h_m|| counts as no usable signal
DEGENERATE_TOL = 1e-12
# Largest |v^H H p_k|^2 to another cluster, as a fraction of the served gain
LEAKAGE_TOL = 1e-18


class DetectionConfigError(ValueError):
    """Raised when the receiver has too few antennas to null other clusters."""

    def __init__(self, message: str, n_rx: int, n_tx: int) -> None:
        super().__init__(message)
        self.n_rx = n_rx
        self.n_tx = n_tx


class DegenerateChannelError(ValueError):
    """Raised when the served column lies in the span of the nulled ones."""

    def __init__(self, message: str, cluster: int) -> None:
        super().__init__(message)
        self.cluster = cluster


@dataclass(frozen=True)
class EffectiveLink:
    """Post-detection scalar link of one user."""

    detection: NDArray[np.complex128]
    eff_gain: float
    cluster: int
    user: int
    rank_in_cluster: int = 0


def precoder(n_tx: int) -> NDArray[np.complex128]:
    """Identity precoder I_M."""
    if n_tx < 1:
        raise ValueError(f"Precoder needs at least one antenna, got {n_tx}")
    return np.eye(n_tx, dtype=np.complex128)


def detection_vector(channel: NDArray[np.complex128], m: int) -> NDArray[np.complex128]:
    """Unit vector nulling every precoded column except m, maximizing |v^H H p_m|."""
    n_rx, n_tx = channel.shape
    if n_rx < n_tx:
        raise DetectionConfigError(
            f"Need N_r >= M to null other clusters, got N_r={n_rx}, M={n_tx}",
            n_rx=n_rx,
            n_tx=n_tx,
        )
    if not 0 <= m < n_tx:
        raise ValueError(f"Cluster index {m} outside [0, {n_tx})")

    effective = channel @ precoder(n_tx)
    served = effective[:, m]
    others = np.delete(effective, m, axis=1)
    if others.shape[1] == 0:
        projection = served
    else:
        # v^H H p_k = 0  <=>  v in null(others^H)
        basis = null_space(others.conj().T)
        projection = basis @ (basis.conj().T @ served)

    norm = float(np.linalg.norm(projection))
    if norm <= DEGENERATE_TOL * float(np.linalg.norm(served)) or norm == 0.0:
        raise DegenerateChannelError(
            f"Cluster {m} column lies in the span of the other clusters", cluster=m
        )
    v = projection / norm

    if others.shape[1]:
        gain = float(abs(np.vdot(v, served))) ** 2
        leakage = float(np.max(np.abs(v.conj() @ others))) ** 2
        if leakage > LEAKAGE_TOL * gain:
            raise DegenerateChannelError(
                f"Cluster {m} leaks {leakage / gain:.3g} of its gain into other clusters",
                cluster=m,
            )
    return v


def effective_gain(
    channel: NDArray[np.complex128], detection: NDArray[np.complex128], m: int
) -> float:
    """gamma = |v^H H p_m|^2."""
    p_m = precoder(channel.shape[1])[:, m]
    return float(abs(np.vdot(detection, channel @ p_m)) ** 2)


def build_link(channel: NDArray[np.complex128], cluster: int, user: int) -> EffectiveLink:
    """Detection vector and effective gain for one user; rank is set by order_cluster."""
    v = detection_vector(channel, cluster)
    return EffectiveLink(
        detection=v, eff_gain=effective_gain(channel, v, cluster), cluster=cluster, user=user
    )


def order_cluster(links: Sequence[EffectiveLink]) -> list[EffectiveLink]:
    """Sort by descending effective gain (ties by user index) and assign ranks 1..L."""
    if not links:
        raise ValueError("Cannot order an empty cluster")
    ordered = sorted(links, key=lambda link: (-link.eff_gain, link.user))
    return [replace(link, rank_in_cluster=rank) for rank, link in enumerate(ordered, start=1)]


def user_rate(omega: ArrayLike, eff_gain_l: float, rho: float, rank: int) -> float:
    """Rate of the user at ``rank`` in bps/Hz; stronger users (lower ranks) interfere."""
    fractions = np.asarray(omega, dtype=float)
    interference = float(fractions[: rank - 1].sum())
    snr = rho * eff_gain_l
    return math.log2(1.0 + snr * float(fractions[rank - 1]) / (1.0 + snr * interference))


def cluster_rates(omega: ArrayLike, gains: ArrayLike, rho: float) -> NDArray[np.float64]:
    """Rates of every user of one cluster, ordered by rank."""
    g = np.asarray(gains, dtype=float)
    return np.array([user_rate(omega, float(g[r - 1]), rho, r) for r in range(1, len(g) + 1)])
