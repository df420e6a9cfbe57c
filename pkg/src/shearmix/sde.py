"""Diffusive Lagrangian dynamics: shear-plus-noise steps and pulsed kicks.

The particle dynamics during one unit shear interval is

    dX = sign * A * g(X_cross - zeta) dt + sqrt(2*kappa) dW,

with additive Brownian noise.  The cross coordinate (the one the shear does
not move) is therefore an exact Brownian motion; it is sampled exactly on a
substep grid, and only the drift integral of the sheared coordinate needs
quadrature (midpoint rule).  This semi-exact splitting replaces plain
Euler-Maruyama: there is no discretization error in the noise, and the
kappa = 0 limit reduces bit-exactly to the deterministic shear map.

The default drift sign is ``"paper_minus"``: particles move along -u, the
backward-characteristic convention that pairs with the advection-diffusion
propagator.  Because the phase shifts are uniform, flipping the sign equals
shifting zeta by half a period, so all mixing statistics are invariant in
law under ``drift_sign="plus"``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import profile_wave, shear_step
from .torus import RngStream, wrap

__all__ = [
    "SdeConfig",
    "sde_unit_step",
    "pulsed_step",
    "two_point_sde_step",
    "separation_sde_period",
    "sde_unit_step_from_path",
    "coupled_pair_unit_step_lifted",
]


@dataclass
class SdeConfig:
    """Diffusivity and integration resolution for the unit-interval SDE.

    ``substeps`` is the quadrature resolution of the drift integral per unit
    time; the Brownian increments themselves are exact at any resolution.
    """

    kappa: float
    substeps: int = 32
    drift_sign: str = "paper_minus"

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("SdeConfig: kappa must be >= 0")
        if self.substeps < 1:
            raise ValueError("SdeConfig: substeps must be >= 1")
        if self.drift_sign not in ("paper_minus", "plus"):
            raise ValueError("SdeConfig: drift_sign must be 'paper_minus' or 'plus'")

    @property
    def signed(self):
        return -1.0 if self.drift_sign == "paper_minus" else 1.0


def _axis_indices(axis):
    if axis == "horizontal":
        return 0, 1  # sheared coordinate, cross coordinate
    if axis == "vertical":
        return 1, 0
    raise ValueError(f"unknown axis {axis!r}")


def sde_unit_step(x, zeta, axis, amplitude, cfg, rng, profile="sine"):
    """Integrate one unit time of shear plus additive noise.

    With ``kappa = 0`` this returns exactly ``shear_step`` at the signed
    amplitude.  Vectorized over leading axes of ``x``.
    """
    s_amp = cfg.signed * amplitude
    if cfg.kappa == 0.0:
        return shear_step(x, zeta, axis, s_amp, profile)
    gen = rng.generator if isinstance(rng, RngStream) else rng
    x = np.asarray(x, dtype=float)
    i_shear, i_cross = _axis_indices(axis)
    c = x[..., i_cross]
    m = cfg.substeps
    dt = 1.0 / m
    sq = np.sqrt(2.0 * cfg.kappa)
    half_sd = np.sqrt(0.5 * dt)
    w = np.zeros_like(c)
    integral = np.zeros_like(c)
    for _ in range(m):
        w = w + half_sd * gen.standard_normal(c.shape)
        integral += profile_wave(c + sq * w - zeta, profile)
        w = w + half_sd * gen.standard_normal(c.shape)
    out = np.array(x, copy=True)
    out[..., i_shear] = (
        x[..., i_shear] + s_amp * dt * integral + sq * gen.standard_normal(c.shape)
    )
    out[..., i_cross] = c + sq * w
    return wrap(out)


def pulsed_step(x, zeta_even, zeta_odd, amplitude, kappa, rng, profile="sine"):
    """One period of the pulsed diffusion: shear, kick, shear, kick.

    Each kick is an independent periodized Gaussian with per-coordinate
    variance ``kappa``.  With ``kappa = 0`` this is exactly
    :func:`shearmix.flow.double_step`.
    """
    if kappa < 0:
        raise ValueError("pulsed_step: kappa must be >= 0")
    gen = rng.generator if isinstance(rng, RngStream) else rng
    x = shear_step(x, zeta_even, "horizontal", amplitude, profile)
    if kappa > 0:
        x = wrap(x + np.sqrt(kappa) * gen.standard_normal(np.shape(x)))
    x = shear_step(x, zeta_odd, "vertical", amplitude, profile)
    if kappa > 0:
        x = wrap(x + np.sqrt(kappa) * gen.standard_normal(np.shape(x)))
    return x


def two_point_sde_step(x, y, zeta_even, zeta_odd, amplitude, cfg, rng, profile="sine"):
    """One period of the two-point chain driven by a common Brownian path.

    The SDE noise is additive, so the stochastic flow applies identical
    increments to every initial condition; here both points of the pair
    share the path (the increments cancel in the pair separation), while
    separate calls use independent paths.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.all(x == y, axis=-1)):
        raise ValueError("two_point_sde_step: coincident points are not a valid state")
    if cfg.kappa == 0.0:
        s_amp = cfg.signed * amplitude
        from .flow import double_step

        return (
            double_step(x, zeta_even, zeta_odd, s_amp, profile),
            double_step(y, zeta_even, zeta_odd, s_amp, profile),
        )
    gen = rng.generator if isinstance(rng, RngStream) else rng
    # stack the pair so the common noise broadcasts across the leading axis
    pair = np.stack([x, y])
    noise_shape = x[..., 0].shape
    for axis, zeta in (("horizontal", zeta_even), ("vertical", zeta_odd)):
        pair = _unit_step_common_noise(
            pair, zeta, axis, amplitude, cfg, gen, noise_shape, profile
        )
    return pair[0], pair[1]


def _unit_step_common_noise(states, zeta, axis, amplitude, cfg, gen, noise_shape, profile):
    # states: (k, ..., 2); noise drawn at noise_shape broadcasts across the
    # leading stacking axis, realizing the common-path coupling.
    i_shear, i_cross = _axis_indices(axis)
    c = states[..., i_cross]
    m = cfg.substeps
    dt = 1.0 / m
    sq = np.sqrt(2.0 * cfg.kappa)
    half_sd = np.sqrt(0.5 * dt)
    w = np.zeros(noise_shape)
    integral = np.zeros_like(c)
    for _ in range(m):
        w = w + half_sd * gen.standard_normal(noise_shape)
        integral += profile_wave(c + sq * w - zeta, profile)
        w = w + half_sd * gen.standard_normal(noise_shape)
    out = np.array(states, copy=True)
    out[..., i_shear] = (
        states[..., i_shear]
        + cfg.signed * amplitude * dt * integral
        + sq * gen.standard_normal(noise_shape)
    )
    out[..., i_cross] = c + sq * w
    return wrap(out)


def separation_sde_period(x, s, zeta_even, zeta_odd, amplitude, cfg, rng, profile="sine"):
    """One period of (base point, separation) under the common-noise SDE.

    Algebraically identical to :func:`two_point_sde_step` followed by
    re-measuring the displacement, but the drift difference is accumulated
    with the cancellation-free profile difference, so it stays accurate for
    separations near machine epsilon.  With ``cfg.kappa == 0`` it matches
    :func:`shearmix.flow.separation_double_step` at the signed amplitude.
    """
    from .flow import _profile_difference, separation_double_step
    from .torus import displacement

    s_amp = cfg.signed * amplitude
    if cfg.kappa == 0.0:
        return separation_double_step(x, s, zeta_even, zeta_odd, s_amp, profile)
    gen = rng.generator if isinstance(rng, RngStream) else rng
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    m = cfg.substeps
    dt = 1.0 / m
    sq = np.sqrt(2.0 * cfg.kappa)
    half_sd = np.sqrt(0.5 * dt)
    xw = np.array(x, copy=True)
    sw = np.array(s, copy=True)
    for axis, zeta in (("horizontal", zeta_even), ("vertical", zeta_odd)):
        i_shear, i_cross = _axis_indices(axis)
        c = xw[..., i_cross]
        w = np.zeros_like(c)
        i_base = np.zeros_like(c)
        i_diff = np.zeros_like(c)
        for _ in range(m):
            w = w + half_sd * gen.standard_normal(c.shape)
            arg = c + sq * w - zeta
            i_base += profile_wave(arg, profile)
            i_diff += _profile_difference(arg, sw[..., i_cross], profile)
            w = w + half_sd * gen.standard_normal(c.shape)
        xw[..., i_shear] += s_amp * dt * i_base + sq * gen.standard_normal(c.shape)
        sw[..., i_shear] += s_amp * dt * i_diff
        xw[..., i_cross] = c + sq * w
    return wrap(xw), displacement(np.zeros_like(sw), sw)


def sde_unit_step_from_path(x, zeta, axis, amplitude, kappa, substeps, bm_cross, w_shear_end, drift_sign="paper_minus", profile="sine", wrap_output=True):
    """Unit step driven by a pre-drawn Brownian path (for coupling studies).

    ``bm_cross`` holds standard-BM values of the cross coordinate at times
    ``j / (2*substeps)`` for ``j = 0 .. 2*substeps`` (leading axis), and
    ``w_shear_end`` the standard normal W(1) of the sheared coordinate, both
    broadcastable against the leading shape of ``x``.  Feeding the same path
    at different ``kappa`` or a refined/coarsened grid couples the
    integrations pathwise.
    """
    x = np.asarray(x, dtype=float)
    if bm_cross.shape[0] != 2 * substeps + 1:
        raise ValueError("bm_cross must be sampled at 2*substeps + 1 grid times")
    i_shear, i_cross = _axis_indices(axis)
    c = x[..., i_cross]
    sq = np.sqrt(2.0 * kappa)
    mids = bm_cross[1::2]
    integral = np.mean(profile_wave(c + sq * mids - zeta, profile), axis=0)
    sign = -1.0 if drift_sign == "paper_minus" else 1.0
    out = np.array(x, copy=True)
    out[..., i_shear] = x[..., i_shear] + sign * amplitude * integral + sq * w_shear_end
    out[..., i_cross] = c + sq * bm_cross[-1]
    return wrap(out) if wrap_output else out


def coupled_pair_unit_step_lifted(x, y, zeta, axis, amplitude, kappa, substeps, rng, drift_sign="paper_minus", profile="sine"):
    """Advance a lifted pair under the kappa-flow and the 0-flow on one path.

    Works on R^2 lifts (no wrapping), so separations can be compared across
    the two flows directly.  Both points and both flows share the shift and
    the Brownian path; returns the four endpoints and the discrete running
    maximum of |W| over the substep grid (Euclidean norm of the standard
    2-d path).
    """
    gen = rng.generator if isinstance(rng, RngStream) else rng
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = x[..., 0].shape
    n_grid = 2 * substeps + 1
    incr = np.sqrt(1.0 / (2 * substeps)) * gen.standard_normal((n_grid - 1,) + shape + (2,))
    bm = np.concatenate([np.zeros((1,) + shape + (2,)), np.cumsum(incr, axis=0)])
    w_star = np.max(np.sqrt(np.sum(bm * bm, axis=-1)), axis=0)
    bm_cross = bm[..., 1] if axis == "horizontal" else bm[..., 0]
    w_shear_end = bm[-1, ..., 0] if axis == "horizontal" else bm[-1, ..., 1]
    kw = dict(drift_sign=drift_sign, profile=profile, wrap_output=False)
    x_k = sde_unit_step_from_path(x, zeta, axis, amplitude, kappa, substeps, bm_cross, w_shear_end, **kw)
    y_k = sde_unit_step_from_path(y, zeta, axis, amplitude, kappa, substeps, bm_cross, w_shear_end, **kw)
    x_0 = sde_unit_step_from_path(x, zeta, axis, amplitude, 0.0, substeps, bm_cross, w_shear_end, **kw)
    y_0 = sde_unit_step_from_path(y, zeta, axis, amplitude, 0.0, substeps, bm_cross, w_shear_end, **kw)
    return {"x_kappa": x_k, "y_kappa": y_k, "x_zero": x_0, "y_zero": y_0, "w_star": w_star}
