"""Correlation spectra, spectral changepoints and sector portfolio rules for asset return panels."""

from ._core import (
    Error,
    algo1_security_selection,
    algo2_sector_allocation,
    changepoints,
    cluster,
    eigen_spectrum,
    mjw_distance,
    mp_bounds,
    mp_density,
    periodogram,
    reference_edge_check,
    rolling_correlation,
    run_pipeline,
    time_varying_rmt,
    wasserstein_1d,
    whittle_loglik,
)

__all__ = [
    "Error",
    "algo1_security_selection",
    "algo2_sector_allocation",
    "changepoints",
    "cluster",
    "eigen_spectrum",
    "mjw_distance",
    "mp_bounds",
    "mp_density",
    "periodogram",
    "reference_edge_check",
    "rolling_correlation",
    "run_pipeline",
    "time_varying_rmt",
    "wasserstein_1d",
    "whittle_loglik",
]
