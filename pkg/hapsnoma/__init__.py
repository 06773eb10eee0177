"""
hapsnoma - Link-level simulator for HAPS MIMO-NOMA downlinks.

Correlated Rician channels from planar-array geometry, correlation-based user
clustering, inter-cluster nulling and QoS/SIC-constrained power allocation.

Heavy modules (numpy/scipy) are imported on use so the CLI banner shows first:

    from hapsnoma.experiments import Scenario, run_sum_rate_sweep
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
