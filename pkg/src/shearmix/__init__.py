"""Numerical laboratory for randomly shifted alternating shear flows on the 2-torus.

The package has three layers:

* Lagrangian dynamics: exact one-period maps of the alternating shear flow,
  their Jacobian / projective / two-point chains (:mod:`shearmix.flow`), and
  the diffusive versions driven by Brownian noise or Gaussian kicks
  (:mod:`shearmix.sde`).
* Eulerian dynamics: a spectrally exact advection-diffusion solver with the
  norms needed for decay and mixing-time measurements
  (:mod:`shearmix.spectral`).
* Certification: Monte Carlo drift certificates, minorization estimates,
  Ulam discretization of the pair-separation chain with weighted
  total-variation contraction, and pathwise correlation-decay estimators
  (:mod:`shearmix.harris`, :mod:`shearmix.ulam`, :mod:`shearmix.correlation`).

Experiment orchestration and the command line live in
:mod:`shearmix.experiments` and :mod:`shearmix.cli`.
"""

from .torus import RngStream, displacement, dist, dist_linf, wrap, wrapped_gaussian
from .flow import (
    ShearSchedule,
    double_step,
    gronwall_constants,
    jacobian_step,
    lyapunov_exponent,
    projective_step,
    shear_step,
    two_point_step,
)
from .sde import SdeConfig, pulsed_step, sde_unit_step, two_point_sde_step
from .spectral import (
    NormSeries,
    ScalarField,
    advect_shear_exact,
    decay_run,
    diffuse_exact,
    mixing_time,
    norms,
    period_step,
)
from .harris import (
    DriftReport,
    LyapunovParams,
    SeparationBox,
    drift_certificate,
    drift_ratio,
    lyapunov_V,
    minorization_estimate,
)
from .ulam import (
    UlamChain,
    contraction_factor,
    difference_chain_validation,
    rho_beta_distance,
    ulam_build,
)
from .correlation import CorrelationReport, correlation_decay, dkappa_moments

__version__ = "0.1.0"

__all__ = [
    "RngStream",
    "wrap",
    "displacement",
    "dist",
    "dist_linf",
    "wrapped_gaussian",
    "ShearSchedule",
    "shear_step",
    "double_step",
    "jacobian_step",
    "two_point_step",
    "projective_step",
    "lyapunov_exponent",
    "gronwall_constants",
    "SdeConfig",
    "sde_unit_step",
    "pulsed_step",
    "two_point_sde_step",
    "ScalarField",
    "NormSeries",
    "advect_shear_exact",
    "diffuse_exact",
    "period_step",
    "norms",
    "decay_run",
    "mixing_time",
    "LyapunovParams",
    "DriftReport",
    "SeparationBox",
    "lyapunov_V",
    "drift_ratio",
    "drift_certificate",
    "minorization_estimate",
    "UlamChain",
    "ulam_build",
    "rho_beta_distance",
    "contraction_factor",
    "difference_chain_validation",
    "CorrelationReport",
    "correlation_decay",
    "dkappa_moments",
    "__version__",
]
