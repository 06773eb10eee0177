"""Correlation-based NOMA user clustering on LoS channel vectors."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class ClusteringError(ValueError):
    """Raised for zero or mismatched channel vectors."""


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of user indices into NOMA clusters.

    The first member of each cluster is its head (the strongest user by ||h||).
    """

    clusters: list[list[int]]
    threshold: float
    max_per_cluster: int

    @property
    def n_users(self) -> int:
        return sum(len(c) for c in self.clusters)

    def cluster_of(self, user: int) -> int:
        for idx, members in enumerate(self.clusters):
            if user in members:
                return idx
        raise KeyError(user)


def correlation_coefficient(h_i: NDArray[np.complex128], h_j: NDArray[np.complex128]) -> float:
    """|h_i^H h_j| / (||h_i|| ||h_j||), clipped to [0, 1]."""
    a = np.asarray(h_i)
    b = np.asarray(h_j)
    if a.shape != b.shape:
        raise ClusteringError(f"Vector shapes differ: {a.shape} vs {b.shape}")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0:
        raise ClusteringError("Correlation of a zero vector is undefined")
    return float(min(abs(np.vdot(a, b)) / norm, 1.0))


def cluster_users(
    los_channels: Sequence[NDArray[np.complex128]],
    corr_threshold: float,
    max_per_cluster: int,
    max_clusters: int | None = None,
) -> ClusterAssignment:
    """Greedy head-based clustering.

    Users are visited by descending ||h|| (ties by index). A user joins the first
    non-full cluster whose head correlates at least ``corr_threshold`` with it.
    Otherwise it founds a cluster, unless ``max_clusters`` are already open; then
    it joins the non-full cluster whose head correlates best. If every cluster
    is full a new one is opened regardless of the budget.
    """
    if not los_channels:
        raise ClusteringError("Need at least one user to cluster")
    if max_per_cluster < 1:
        raise ClusteringError(f"max_per_cluster must be >= 1, got {max_per_cluster}")

    norms = [float(np.linalg.norm(h)) for h in los_channels]
    order = sorted(range(len(los_channels)), key=lambda u: (-norms[u], u))

    clusters: list[list[int]] = []
    for user in order:
        h = los_channels[user]
        open_clusters = [c for c in clusters if len(c) < max_per_cluster]
        scores = [correlation_coefficient(los_channels[c[0]], h) for c in open_clusters]

        target = next(
            (c for c, s in zip(open_clusters, scores, strict=True) if s >= corr_threshold),
            None,
        )
        if target is None and open_clusters and max_clusters is not None:
            if len(clusters) >= max_clusters:
                # Leftover: best head among non-full clusters, first wins ties
                target = open_clusters[int(np.argmax(scores))]

        if target is None:
            clusters.append([user])
        else:
            target.append(user)

    return ClusterAssignment(
        clusters=clusters, threshold=corr_threshold, max_per_cluster=max_per_cluster
    )
