"""Two-stage NOMA power allocation under QoS, SIC and total-power constraints.

Stage one gives every user the smallest fraction of P_max that meets its rate
target and the SIC gap, walking each cluster from its strongest user down.
Stage two spends the leftover budget on cluster heads, lifting the clusters
with the lowest fraction level first until levels meet, and keeps the
followers feasible after every raise.

Fractions are shares of P_max. Noise is normalized to one, so rho = P_max / sigma^2
and a received-power gap P_tol becomes P_tol * rho / P_max.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .linkproc import cluster_rates

# Absolute slack for constraint checks
CHECK_TOL = 1e-9

# Level search bracket expansion past the highest baseline level
_MAX_BRACKET_DOUBLINGS = 200


class InfeasibleAllocationError(Exception):
    """Raised when QoS and SIC minima cost more than the power budget."""

    def __init__(self, message: str, p_required: float, p_budget: float) -> None:
        super().__init__(message)
        self.p_required = p_required
        self.p_budget = p_budget


@dataclass(frozen=True)
class AllocationProblem:
    """One power-allocation instance: M clusters of L users, gains ordered per cluster."""

    gains: NDArray[np.float64]
    rho: float
    p_max: float
    p_budget: float
    p_tol: float
    qos_rates: NDArray[np.float64]

    def __post_init__(self) -> None:
        gains = np.atleast_2d(np.asarray(self.gains, dtype=float))
        qos = np.broadcast_to(np.asarray(self.qos_rates, dtype=float), gains.shape).copy()
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "qos_rates", qos)

        if np.any(gains <= 0) or not np.all(np.isfinite(gains)):
            raise ValueError("All effective gains must be positive and finite")
        if np.any(np.diff(gains, axis=1) > 0):
            raise ValueError("Gains must be nonincreasing within each cluster")
        if np.any(qos < 0):
            raise ValueError("QoS rates must be non-negative")
        if self.rho <= 0 or self.p_max <= 0 or self.p_budget <= 0:
            raise ValueError("rho, p_max and p_budget must be positive")
        if self.p_tol < 0:
            raise ValueError(f"p_tol must be non-negative, got {self.p_tol}")

    @property
    def n_clusters(self) -> int:
        return int(self.gains.shape[0])

    @property
    def users_per_cluster(self) -> int:
        return int(self.gains.shape[1])


@dataclass(frozen=True)
class PowerAllocation:
    """Fractions Omega (shares of P_max) with budget bookkeeping."""

    omega: NDArray[np.float64]
    omega_min: NDArray[np.float64]
    p_required: float
    p_residual: float
    rates: NDArray[np.float64] = field(repr=False)

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())


def min_qos_coeff(prior_omegas: ArrayLike, gain_l: float, rho: float, r_qos: float) -> float:
    """Smallest fraction that reaches ``r_qos`` under interference from the priors."""
    interference = float(np.sum(prior_omegas))
    return (2.0**r_qos - 1.0) * (interference + 1.0 / (rho * gain_l))


def min_sic_coeff(
    prior_omegas: ArrayLike, gain_prev: float, rho: float, p_tol: float, p_max: float
) -> float:
    """Smallest fraction keeping the SIC power gap P_tol at the previous user."""
    p_tol_norm = p_tol * rho / p_max
    return float(np.sum(prior_omegas)) + p_tol_norm / (rho * gain_prev)


def _cascade(problem: AllocationProblem, m: int, head: float) -> NDArray[np.float64]:
    """Cluster fractions for a given head fraction, followers at their minima."""
    gains = problem.gains[m]
    omega = np.zeros_like(gains)
    omega[0] = head
    for j in range(1, len(gains)):
        prior = omega[:j]
        omega[j] = max(
            min_qos_coeff(prior, gains[j], problem.rho, problem.qos_rates[m, j]),
            min_sic_coeff(prior, gains[j - 1], problem.rho, problem.p_tol, problem.p_max),
        )
    return omega


def _rates(problem: AllocationProblem, omega: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.vstack(
        [cluster_rates(omega[m], problem.gains[m], problem.rho) for m in range(problem.n_clusters)]
    )


def primary_allocation(problem: AllocationProblem) -> PowerAllocation:
    """Baseline Omega_min; raises InfeasibleAllocationError if it exceeds the budget."""
    omega_min = np.vstack(
        [
            _cascade(
                problem,
                m,
                min_qos_coeff([], problem.gains[m, 0], problem.rho, problem.qos_rates[m, 0]),
            )
            for m in range(problem.n_clusters)
        ]
    )
    p_required = problem.p_max * float(omega_min.sum())
    if p_required > problem.p_budget:
        raise InfeasibleAllocationError(
            f"Required power {p_required:.6g} W exceeds budget {problem.p_budget:.6g} W",
            p_required=p_required,
            p_budget=problem.p_budget,
        )
    return PowerAllocation(
        omega=omega_min,
        omega_min=omega_min.copy(),
        p_required=p_required,
        p_residual=problem.p_budget - p_required,
        rates=_rates(problem, omega_min),
    )


def fraction_level(rates: Sequence[float], gain_head: float, rho: float, p_max: float) -> float:
    """P_max * 2^(sum of cluster rates) / (rho * gamma_head)."""
    return p_max * 2.0 ** float(np.sum(rates)) / (rho * gain_head)


def _log_level(problem: AllocationProblem, m: int, omega_row: NDArray[np.float64]) -> float:
    """log2 of the fraction level, safe for large rate sums."""
    rate_sum = float(cluster_rates(omega_row, problem.gains[m], problem.rho).sum())
    return rate_sum + math.log2(problem.p_max / (problem.rho * problem.gains[m, 0]))


def _head_for_level(
    problem: AllocationProblem, m: int, base_head: float, log_target: float
) -> float:
    """Head fraction that lifts cluster m to the target level, never below the baseline."""

    def gap(head: float) -> float:
        return _log_level(problem, m, _cascade(problem, m, head)) - log_target

    if gap(base_head) >= 0:
        return base_head
    # The head's own rate alone reaches the target here; follower rates only add
    snr_head = problem.rho * problem.gains[m, 0]
    exponent = log_target + math.log2(snr_head / problem.p_max)
    hi = (2.0**exponent - 1.0) / snr_head
    if hi <= base_head or gap(hi) <= 0:
        return max(hi, base_head)
    return float(brentq(gap, base_head, hi, xtol=1e-15))


class _Waterline:
    """Total spend as a function of a common (log) fraction level."""

    def __init__(self, problem: AllocationProblem, baseline: PowerAllocation) -> None:
        self.problem = problem
        self.base_heads = baseline.omega_min[:, 0].copy()

    def omega(self, log_target: float) -> NDArray[np.float64]:
        p = self.problem
        return np.vstack(
            [
                _cascade(p, m, _head_for_level(p, m, float(self.base_heads[m]), log_target))
                for m in range(p.n_clusters)
            ]
        )

    def spend(self, log_target: float) -> float:
        return self.problem.p_max * float(self.omega(log_target).sum())


def residual_allocation(problem: AllocationProblem, baseline: PowerAllocation) -> PowerAllocation:
    """Distribute P_t - P_req over cluster heads by equalizing fraction levels.

    Clusters are visited in ascending level order. The lowest ones are raised to
    the next level while the budget lasts; the step that would overrun it is
    solved for the exact level that spends the whole budget. Past the highest
    baseline level all clusters are raised together.
    """
    if baseline.p_required > problem.p_budget:
        raise InfeasibleAllocationError(
            "Baseline allocation already exceeds the budget",
            p_required=baseline.p_required,
            p_budget=problem.p_budget,
        )
    if problem.p_budget - baseline.p_required <= 0:
        return baseline

    line = _Waterline(problem, baseline)
    levels = sorted(
        _log_level(problem, m, baseline.omega_min[m]) for m in range(problem.n_clusters)
    )

    def overshoot(log_target: float) -> float:
        return line.spend(log_target) - problem.p_budget

    target: float | None = None
    for lower, upper in zip(levels, levels[1:], strict=False):
        if overshoot(upper) <= 0:
            continue
        target = float(brentq(overshoot, lower, upper, xtol=1e-13))
        break

    if target is None:
        lower = levels[-1]
        step = 1.0
        upper = lower + step
        for _ in range(_MAX_BRACKET_DOUBLINGS):
            if overshoot(upper) >= 0:
                break
            lower, step = upper, step * 2.0
            upper = lower + step
        target = float(brentq(overshoot, lower, upper, xtol=1e-13))

    omega = line.omega(target)
    spent = problem.p_max * float(omega.sum())
    if spent > problem.p_budget:
        # Root lands a hair above the budget; trim heads proportionally
        excess = (spent - problem.p_budget) / problem.p_max
        raised = omega[:, 0] - baseline.omega_min[:, 0]
        if raised.sum() > 0:
            omega = np.vstack(
                [
                    _cascade(
                        problem,
                        m,
                        max(
                            float(omega[m, 0] - excess * raised[m] / raised.sum()),
                            float(baseline.omega_min[m, 0]),
                        ),
                    )
                    for m in range(problem.n_clusters)
                ]
            )
            spent = problem.p_max * float(omega.sum())

    return PowerAllocation(
        omega=omega,
        omega_min=baseline.omega_min.copy(),
        p_required=baseline.p_required,
        p_residual=problem.p_budget - spent,
        rates=_rates(problem, omega),
    )


def allocate_power(problem: AllocationProblem) -> PowerAllocation:
    """Primary then residual allocation."""
    return residual_allocation(problem, primary_allocation(problem))


def check_allocation(
    problem: AllocationProblem, allocation: PowerAllocation, tol: float = CHECK_TOL
) -> list[str]:
    """Violated constraints of an allocation; empty when it is feasible."""
    violations: list[str] = []
    omega = allocation.omega

    if np.any(omega < 0):
        violations.append("negative power fraction")

    spent = problem.p_max * float(omega.sum())
    if spent > problem.p_budget + tol:
        violations.append(f"budget exceeded: {spent:.12g} W > {problem.p_budget:.12g} W")

    rates = _rates(problem, omega)
    short = rates < problem.qos_rates - tol
    for m, j in zip(*np.nonzero(short), strict=True):
        violations.append(
            f"QoS: cluster {m} rank {j + 1} rate {rates[m, j]:.12g} < {problem.qos_rates[m, j]:.12g}"
        )

    for m in range(problem.n_clusters):
        for j in range(1, problem.users_per_cluster):
            gap = omega[m, j] - omega[m, :j].sum()
            needed = problem.p_tol / (problem.p_max * problem.gains[m, j - 1])
            if gap < needed * (1.0 - tol) - 1e-15:
                received_gap = problem.p_max * gap * problem.gains[m, j - 1]
                violations.append(
                    f"SIC: cluster {m} rank {j + 1} gap {received_gap:.6g} W "
                    f"< P_tol {problem.p_tol:.6g} W"
                )
    return violations
