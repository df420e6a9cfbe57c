"""Monte Carlo certification of drift and minorization for the pair chain.

The Lyapunov function is ``V(x, y) = min(dist_linf(x, y), s_star)**(-p)``:
it blows up like the inverse separation near the diagonal and is extended
by the constant ``s_star**(-p)`` outside, which keeps it continuous and
bounded away from the diagonal.  A drift certificate estimates the worst
one-period contraction ratio ``E[V after] / V`` over a grid of separations
inside the blow-up zone, with the additive constant measured outside it;
a minorization estimate lower-bounds the probability that the chain enters
a target separation region from a set of starts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .flow import separation_double_step, two_point_step
from .sde import SdeConfig, separation_sde_period, two_point_sde_step
from .torus import RngStream, dist_linf, displacement, wrap

__all__ = [
    "LyapunovParams",
    "DriftGrid",
    "DriftReport",
    "SeparationBox",
    "lyapunov_V",
    "lyapunov_V_sep",
    "drift_ratio",
    "drift_certificate",
    "minorization_estimate",
    "wilson_lower",
]

_Z95 = 1.959963984540054


@dataclass
class LyapunovParams:
    """Exponent and blow-up radius of the pair Lyapunov function."""

    p: float = 0.2
    s_star: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.p <= 0.25:
            raise ValueError("LyapunovParams: p must lie in (0, 1/4]")
        if not 0.0 < self.s_star < 0.5:
            raise ValueError("LyapunovParams: s_star must lie in (0, 1/2)")

    @property
    def floor(self):
        """Minimum value of V (attained outside the blow-up zone); > 1."""
        return self.s_star**-self.p


def lyapunov_V_sep(sep, params):
    """V evaluated on separation vectors, shape (..., 2)."""
    d = np.max(np.abs(np.asarray(sep, dtype=float)), axis=-1)
    if np.any(d == 0):
        raise ValueError("lyapunov_V: coincident points (separation 0) are invalid")
    return np.minimum(d, params.s_star) ** -params.p


def lyapunov_V(x, y, params):
    """V(x, y) = min(dist_linf(x, y), s_star)**(-p); infinite on the diagonal."""
    return lyapunov_V_sep(displacement(x, y), params)


def _advance_separation(x, sep, amplitude, kappa, n_shift_samples, gen, profile, substeps, drift_sign, l):
    # Pair chain in (base point, separation) coordinates.  The separation
    # update uses cancellation-free profile differences, which keeps the
    # drift statistics meaningful down to separations of a few machine
    # epsilons where subtracting two advanced positions would round to
    # coincident floats.
    shape = (n_shift_samples,)
    xs = np.broadcast_to(np.asarray(x, float), shape + (2,)).copy()
    ss = np.broadcast_to(np.asarray(sep, float), shape + (2,)).copy()
    cfg = SdeConfig(kappa=kappa, substeps=substeps, drift_sign=drift_sign)
    for _ in range(l):
        ze = gen.uniform(size=shape)
        zo = gen.uniform(size=shape)
        if kappa == 0.0:
            xs, ss = separation_double_step(xs, ss, ze, zo, amplitude, profile)
        else:
            xs, ss = separation_sde_period(xs, ss, ze, zo, amplitude, cfg, gen, profile)
    return ss


def drift_ratio(x, y, amplitude, params, kappa, n_shift_samples, rng, profile="sine", substeps=32, drift_sign="paper_minus", l=1):
    """Monte Carlo drift ratio E[V(pair after l periods)] / V(pair).

    Shifts (and, for kappa > 0, the common Brownian path) are drawn i.i.d.
    per sample.  Returns ``{"ratio", "ci"}`` with a 95% normal CI on the
    ratio.
    """
    if n_shift_samples < 2:
        raise ValueError("drift_ratio: need at least 2 shift samples")
    gen = rng.generator if isinstance(rng, RngStream) else rng
    sep0 = displacement(np.asarray(x, float), np.asarray(y, float))
    v0 = float(lyapunov_V_sep(sep0, params))
    ss = _advance_separation(
        np.asarray(x, float), sep0, amplitude, kappa,
        n_shift_samples, gen, profile, substeps, drift_sign, l,
    )
    v1 = lyapunov_V_sep(ss, params)
    ratio = float(np.mean(v1)) / v0
    ci = _Z95 * float(np.std(v1, ddof=1)) / np.sqrt(n_shift_samples) / v0
    return {"ratio": ratio, "ci": ci}


@dataclass
class DriftGrid:
    """Separation grid for the certificate.

    Separations are log-spaced radii (down to ten machine separations by
    default) times a uniform fan of directions; base points cycle through
    ``n_base`` representative positions, which translation covariance makes
    statistically equivalent.
    """

    n_sep: int = 12
    n_dir: int = 8
    n_base: int = 4
    sep_min: float = 10 * np.finfo(float).eps

    def cells(self, s_star):
        radii = np.geomspace(self.sep_min, 0.999 * s_star, self.n_sep)
        angles = (np.arange(self.n_dir) + 0.5) * 2.0 * np.pi / self.n_dir
        return [(r, th) for r in radii for th in angles]

    def base_points(self):
        # low-discrepancy-ish fixed offsets; any choice works by covariance
        g = 0.6180339887498949
        return wrap(np.stack([np.arange(1, self.n_base + 1) * g,
                              np.arange(1, self.n_base + 1) * g * g], axis=-1))


@dataclass
class DriftReport:
    """Outcome of a drift certificate.

    ``passed`` holds iff ``beta_hat + beta_ci < 1``: the worst-cell upper
    confidence bound certifies contraction of V inside the blow-up zone.
    ``K_hat`` is the measured additive constant (max of E[V after] over
    separations at or beyond s_star).
    """

    beta_hat: float
    beta_ci: float
    worst_cell: dict
    kappa: float
    K_hat: float
    K_ci: float
    amplitude: float
    p: float
    s_star: float
    l: int = 1
    n_shift_samples: int = 0

    @property
    def passed(self):
        return self.beta_hat + self.beta_ci < 1.0

    def to_json(self, path=None):
        payload = asdict(self)
        payload["passed"] = self.passed
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def drift_certificate(amplitude, params, kappa, grid, n_shift_samples, rng, profile="sine", substeps=32, drift_sign="paper_minus", l=1):
    """Certify the V-drift of the pair chain over a separation grid.

    For every (radius, direction) cell inside the blow-up zone the drift
    ratio is estimated with ``n_shift_samples`` shift draws split across the
    grid's base points; the report carries the worst cell by upper
    confidence bound.  The additive constant is measured on a coarse ring
    of separations at and beyond ``s_star``.
    """
    gen = rng.generator if isinstance(rng, RngStream) else rng
    bases = grid.base_points()
    per_base = max(2, n_shift_samples // grid.n_base)
    worst = None
    for r, th in grid.cells(params.s_star):
        sep = np.array([r * np.cos(th), r * np.sin(th)])
        samples = []
        for b in bases:
            ss = _advance_separation(
                b, sep, amplitude, kappa, per_base, gen,
                profile, substeps, drift_sign, l,
            )
            samples.append(lyapunov_V_sep(ss, params))
        v1 = np.concatenate(samples)
        v0 = float(lyapunov_V_sep(sep[None, :], params)[0])
        ratio = float(np.mean(v1)) / v0
        ci = _Z95 * float(np.std(v1, ddof=1)) / np.sqrt(v1.size) / v0
        if worst is None or ratio + ci > worst[0] + worst[1]:
            worst = (ratio, ci, {"sep_radius": float(r), "sep_angle": float(th)})

    # additive constant outside the blow-up zone
    k_hat, k_ci = 0.0, 0.0
    radii = np.linspace(params.s_star, 0.45, 5)
    angles = (np.arange(4) + 0.5) * np.pi / 2.0
    for r in radii:
        for th in angles:
            sep = np.array([r * np.cos(th), r * np.sin(th)])
            ss = _advance_separation(
                bases[0], sep, amplitude, kappa, per_base, gen,
                profile, substeps, drift_sign, l,
            )
            v1 = lyapunov_V_sep(ss, params)
            m = float(np.mean(v1))
            if m > k_hat:
                k_hat = m
                k_ci = _Z95 * float(np.std(v1, ddof=1)) / np.sqrt(v1.size)
    return DriftReport(
        beta_hat=worst[0], beta_ci=worst[1], worst_cell=worst[2], kappa=kappa,
        K_hat=k_hat, K_ci=k_ci, amplitude=amplitude, p=params.p,
        s_star=params.s_star, l=l, n_shift_samples=n_shift_samples,
    )


@dataclass
class SeparationBox:
    """A max-norm annulus in separation space: linf_min <= |s|_inf <= linf_max."""

    linf_min: float = 0.0
    linf_max: float = 0.5

    @property
    def empty(self):
        return self.linf_min > min(self.linf_max, 0.5)

    def contains(self, sep):
        d = np.max(np.abs(np.asarray(sep, dtype=float)), axis=-1)
        return (d >= self.linf_min) & (d <= self.linf_max)


def wilson_lower(successes, n, z=_Z95):
    """Wilson score lower confidence bound for a binomial proportion."""
    if n == 0:
        return 0.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half)


def minorization_estimate(amplitude, start_set, l, target_box, kappa, n_samples, rng, profile="sine", substeps=32, drift_sign="paper_minus"):
    """Empirical minorization of the l-period pair chain on a target region.

    For each start pair, estimates the probability that the chain's
    separation lands in ``target_box`` after ``l`` periods.  Returns the
    minimum over starts (point estimate and Wilson lower bound) plus the
    per-start table; a start with zero hits pins ``alpha_hat`` to 0 and is
    reported as the offender.
    """
    if l < 1:
        raise ValueError("minorization_estimate: l must be >= 1")
    gen = rng.generator if isinstance(rng, RngStream) else rng
    if target_box.empty:
        return {"alpha_hat": 0.0, "alpha_wilson_lower": 0.0, "per_start": [], "worst_start": None}
    per_start = []
    for x0, y0 in start_set:
        sep0 = displacement(np.asarray(x0, float), np.asarray(y0, float))
        ss = _advance_separation(
            np.asarray(x0, float), sep0, amplitude, kappa,
            n_samples, gen, profile, substeps, drift_sign, l,
        )
        hits = int(np.sum(target_box.contains(ss)))
        per_start.append({
            "start": (list(map(float, x0)), list(map(float, y0))),
            "p_hat": hits / n_samples,
            "wilson_lower": wilson_lower(hits, n_samples),
            "hits": hits,
        })
    worst = min(per_start, key=lambda rec: rec["p_hat"])
    return {
        "alpha_hat": worst["p_hat"],
        "alpha_wilson_lower": worst["wilson_lower"],
        "per_start": per_start,
        "worst_start": worst["start"],
    }
