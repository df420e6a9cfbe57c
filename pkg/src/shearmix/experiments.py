"""Experiment orchestration: sweeps, scaling fits, reports and manifests.

Every runner takes an :class:`ExperimentConfig`, executes a deterministic
set of runs (parallelizable across independent (kappa, seed) pairs without
changing any output), and returns plain serializable results.  The CLI
wraps these runners, writes CSV/JSON artifacts and drops a ``manifest.json``
with the full configuration next to them, so any output can be reproduced
byte-for-byte from its manifest.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .correlation import correlation_decay, dkappa_moments, pathwise_prefactor
from .flow import ShearSchedule, lyapunov_exponent
from .harris import DriftGrid, LyapunovParams, drift_certificate
from .spectral import ScalarField, decay_run, mixing_time, norms
from .torus import RngStream
from .ulam import contraction_factor, difference_chain_validation, ulam_build

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "MixingCurve",
    "heat_mixing_time",
    "affine_fit",
    "run_mixing_sweep",
    "run_ed_verify",
    "run_smoothing_scaling",
    "run_drift_cert",
    "run_ulam_gap",
    "run_exponent",
    "run_correlations",
    "run_simulate",
]

EXPERIMENTS = (
    "ed_verify",
    "mixing_sweep",
    "drift_cert",
    "ulam_gap",
    "exponent",
    "correlations",
    "smoothing_scaling",
    "simulate",
)


class ConfigError(ValueError):
    """Raised when an experiment configuration fails validation."""


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run.

    Only the fields an experiment consumes need to be meaningful; the whole
    config is embedded in the manifest either way.  Seeds are always
    explicit; there is no fallback to OS entropy anywhere.
    """

    experiment: str
    amplitude: float = 0.5
    profile: str = "sine"
    kappa_list: list = field(default_factory=list)
    grid_n: int = 256
    seeds: list = field(default_factory=lambda: [0])
    epsilon: float = 0.1
    n_max: int = 300
    split_substeps: int = 4
    sde_substeps: int = 32
    n_shift_samples: int = 10_000
    m_bins: int = 32
    samples_per_bin: int = 10_000
    n_samples: int = 1_000_000
    n_particles: int = 50_000
    n_realizations: int = 30
    n_steps: int = 1000
    n_periods: int = 20
    modes: list = field(default_factory=lambda: [[1, 0], [0, 1], [1, 1]])
    corr_n_max: int = 24
    alpha: float = 1.0
    gamma: float = 0.0
    q_list: list = field(default_factory=lambda: [1.0, 2.0])
    amplitudes: list = field(default_factory=lambda: [2.0, 5.0, 10.0, 20.0])
    p: float = 0.2
    s_star: float = 0.1
    beta_weight: float = 1.0
    sigma: float = 0.0
    initial: str = "gaussian"
    drift_l: int = 1
    threads: int = 1

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.kappa_list:
            ks = list(self.kappa_list)
            if any(k <= 0 for k in ks):
                raise ConfigError("kappa_list entries must be strictly positive")
            if sorted(ks, reverse=True) != ks:
                raise ConfigError("kappa_list must be sorted descending")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty explicit list")
        if self.profile not in ("sine", "piecewise_linear"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        needs_kappa = self.experiment in ("mixing_sweep", "ed_verify", "smoothing_scaling", "correlations")
        if needs_kappa and not self.kappa_list:
            raise ConfigError(f"{self.experiment} requires a non-empty kappa_list")
        return self

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in raw:
            raise ConfigError("config must name an experiment")
        return cls(**raw).validate()


@dataclass
class MixingCurve:
    """Mixing times versus diffusivity, with the log-law fit and baseline."""

    kappa_list: list
    t_mix: list
    t_heat: list
    excluded: list
    fit: dict

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("kappa,t_mix,t_heat,excluded\n")
            for i, k in enumerate(self.kappa_list):
                fh.write(f"{k!r},{self.t_mix[i]!r},{self.t_heat[i]!r},{int(k in self.excluded)}\n")


def _pool_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def affine_fit(x, y):
    """Least-squares fit y = a + b x with R^2 and residuals."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 2:
        raise ValueError("affine_fit: need at least two points")
    b, a = np.polyfit(x, y, 1)
    pred = a + b * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"a": float(a), "b": float(b), "r2": r2, "residuals": (y - pred).tolist()}


def heat_mixing_time(kappa, epsilon, sigma, max_periods=100_000, k_max=128):
    """Closed-form uniform mixing time of pure diffusion (in periods).

    For a periodized Gaussian source the worst-point density gap after n
    periods is the positive mode sum ``sum_{k != 0} exp(-(2 pi^2 sigma^2 +
    8 pi^2 kappa n)|k|^2)``; this returns its first crossing below epsilon.
    """
    ks = np.arange(-k_max, k_max + 1)
    k2 = (ks[:, None] ** 2 + ks[None, :] ** 2).ravel()
    k2 = k2[k2 > 0]
    for n in range(1, max_periods + 1):
        gap = float(np.sum(np.exp(-(2.0 * np.pi**2 * sigma**2 + 8.0 * np.pi**2 * kappa * n) * k2)))
        if gap < epsilon:
            return n
    return -1


def run_mixing_sweep(cfg):
    """Mixing times across kappa with the affine-in-log(1/kappa) fit.

    Per kappa the mixing time is averaged over the seeds; runs flagged as
    under-resolved are excluded from the fit and listed.  The heat-only
    baseline is evaluated in closed form at the same source width.  The
    largest kappa is excluded when its mixing time is at most 2 periods
    (integer-period quantization dominates there).
    """
    if cfg.experiment != "mixing_sweep":
        raise ConfigError("run_mixing_sweep requires experiment = mixing_sweep")
    kappas = list(cfg.kappa_list)

    def one(item):
        kappa, seed = item
        sched = ShearSchedule(cfg.amplitude, cfg.profile, RngStream(seed))
        return mixing_time(
            kappa, sched, cfg.epsilon, n_max=cfg.n_max, n=cfg.grid_n,
            split_substeps=cfg.split_substeps,
        )

    jobs = [(kappa, seed) for kappa in kappas for seed in cfg.seeds]
    results = _pool_map(one, jobs, cfg.threads)
    t_mix, t_heat, excluded = [], [], []
    for i, kappa in enumerate(kappas):
        runs = results[i * len(cfg.seeds):(i + 1) * len(cfg.seeds)]
        mixed = [r["t_mix"] for r in runs if r["t_mix"] > 0]
        t = float(np.mean(mixed)) if mixed else -1.0
        t_mix.append(t)
        sigma = runs[0]["sigma"]
        t_heat.append(heat_mixing_time(kappa, cfg.epsilon, sigma))
        if any(r["warning"] for r in runs) or not mixed:
            excluded.append(kappa)
    if t_mix and t_mix[0] <= 2 and kappas[0] not in excluded:
        excluded.append(kappas[0])
    keep = [i for i, k in enumerate(kappas) if k not in excluded]
    fit = {}
    if len(keep) >= 4:
        fit = affine_fit(np.log(1.0 / np.array(kappas)[keep]), np.array(t_mix)[keep])
    return MixingCurve(kappa_list=kappas, t_mix=t_mix, t_heat=t_heat, excluded=excluded, fit=fit)


def run_ed_verify(cfg):
    """Pathwise dissipation prefactors and their moments across kappa.

    Per (seed, kappa) realization the scalar field starts as a normalized
    narrow Gaussian, evolves for ``n_periods``, and the prefactor is the
    max over periods of ``|rho_t - mean|_inf * exp(gamma t) * kappa^(d/2 +
    alpha) / |rho_0 - mean|_L1`` (d = 2).  The decay rate gamma comes from
    the config (a prior correlations fit); non-decaying runs are excluded
    with a diagnostic.
    """
    if cfg.experiment != "ed_verify":
        raise ConfigError("run_ed_verify requires experiment = ed_verify")
    gamma = cfg.gamma
    if gamma <= 0:
        raise ConfigError("ed_verify needs a positive gamma (from a correlations run)")

    def one(item):
        kappa, seed = item
        n = cfg.grid_n
        sigma = cfg.sigma if cfg.sigma > 0 else max(2.0 / n, float(np.sqrt(kappa)))
        rho0 = ScalarField.gaussian(n, (0.5, 0.5), sigma)
        sched = ShearSchedule(cfg.amplitude, cfg.profile, RngStream(seed))
        series = decay_run(rho0, sched, kappa, cfg.n_periods, cfg.split_substeps, alpha_list=())
        linf = np.array(series.linf)
        l1_0 = series.l1[0]
        if linf[-1] >= linf[0]:
            return {"kappa": kappa, "seed": seed, "d_hat": None, "excluded": "no decay"}
        t = np.array(series.times)
        d_hat = float(np.max(linf * np.exp(gamma * t)) * kappa ** (1.0 + cfg.alpha) / l1_0)
        return {"kappa": kappa, "seed": seed, "d_hat": d_hat, "excluded": None,
                "warning": series.warning}

    jobs = [(kappa, seed) for kappa in cfg.kappa_list for seed in cfg.seeds]
    rows = _pool_map(one, jobs, cfg.threads)
    moments = {}
    for kappa in cfg.kappa_list:
        vals = [r["d_hat"] for r in rows if r["kappa"] == kappa and r["d_hat"] is not None]
        if len(vals) >= 2:
            arr = np.array(vals)
            moments[kappa] = {
                "q1": float(np.mean(arr)),
                "q2": float(np.mean(arr**2)),
                "se_q1": float(np.std(arr, ddof=1) / np.sqrt(arr.size)),
                "se_q2": float(np.std(arr**2, ddof=1) / np.sqrt(arr.size)),
                "n": arr.size,
            }
    flags = []
    ms = [moments[k]["q2"] for k in moments]
    ses = [moments[k]["se_q2"] for k in moments]
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            se = float(np.hypot(ses[i], ses[j]))
            if se > 0 and abs(ms[i] - ms[j]) > 2 * se:
                flags.append("q2 moment shows a kappa trend beyond 2 standard errors")
    return {"rows": rows, "moments": moments, "gamma": gamma, "alpha": cfg.alpha, "flags": flags}


def run_smoothing_scaling(cfg):
    """Fit of the kappa-exponent of the one-unit-time L1 -> H^alpha gain.

    For narrow-Gaussian data the ratio ``|rho(1) - mean|_{H^alpha} /
    |rho_0 - mean|_{L1}`` scales like ``kappa^(-(2 alpha + d)/4)``; the
    fitted exponent is compared against that reference.
    """
    if cfg.experiment != "smoothing_scaling":
        raise ConfigError("run_smoothing_scaling requires experiment = smoothing_scaling")

    def one(kappa):
        n = cfg.grid_n
        sigma = cfg.sigma if cfg.sigma > 0 else 2.0 / n
        rho0 = ScalarField.gaussian(n, (0.5, 0.5), sigma)
        sched = ShearSchedule(cfg.amplitude, cfg.profile, RngStream(cfg.seeds[0]))
        zeta = float(sched.shifts(1)[0, 0])
        from .spectral import _unit_interval_values

        vals = _unit_interval_values(
            rho0.values, zeta, "horizontal", kappa, cfg.amplitude, cfg.profile,
            cfg.split_substeps, "strang",
        )
        out = norms(ScalarField(vals), (cfg.alpha,))
        base = norms(rho0, ())
        return out["sobolev"][cfg.alpha] / base["l1"]

    ratios = _pool_map(one, list(cfg.kappa_list), cfg.threads)
    fit = affine_fit(np.log(np.array(cfg.kappa_list)), np.log(np.array(ratios)))
    reference = -(2.0 * cfg.alpha + 2.0) / 4.0
    return {
        "kappa_list": list(cfg.kappa_list),
        "ratios": [float(r) for r in ratios],
        "exponent": fit["b"],
        "r2": fit["r2"],
        "reference_exponent": reference,
    }


def run_drift_cert(cfg):
    """Drift certificates over an amplitude search list and kappa values.

    Records every report plus the selected working amplitude: the smallest
    amplitude in the search list that passes at the first kappa (0 unless
    configured otherwise), i.e. the weakest stirring the certificate can
    vouch for.
    """
    if cfg.experiment != "drift_cert":
        raise ConfigError("run_drift_cert requires experiment = drift_cert")
    params = LyapunovParams(p=cfg.p, s_star=cfg.s_star)
    grid = DriftGrid()
    kappas = list(cfg.kappa_list) if cfg.kappa_list else [0.0]

    def one(item):
        idx, a, kappa = item
        rep = drift_certificate(
            a, params, kappa, grid, cfg.n_shift_samples,
            RngStream(cfg.seeds[0]).substream(idx),
            cfg.profile, cfg.sde_substeps, l=cfg.drift_l,
        )
        return rep

    jobs = [(i, a, k) for i, (a, k) in enumerate((a, k) for a in cfg.amplitudes for k in kappas)]
    reports = _pool_map(one, jobs, cfg.threads)
    star = None
    for rep in reports:
        if rep.kappa == kappas[0] and rep.passed and (star is None or rep.amplitude < star):
            star = rep.amplitude
    return {"reports": reports, "a_star": star}


def run_ulam_gap(cfg):
    """Separation-chain Ulam matrices, spectral gaps and TV contraction."""
    if cfg.experiment != "ulam_gap":
        raise ConfigError("run_ulam_gap requires experiment = ulam_gap")
    params = LyapunovParams(p=cfg.p, s_star=cfg.s_star)
    kappas = list(cfg.kappa_list) if cfg.kappa_list else [0.0]

    def one(item):
        idx, kappa = item
        chain = ulam_build(
            cfg.amplitude, params, kappa, cfg.m_bins, cfg.samples_per_bin,
            RngStream(cfg.seeds[0]).substream(idx),
            cfg.profile, cfg.sde_substeps,
        )
        cf = contraction_factor(chain, params, cfg.beta_weight, l=cfg.drift_l,
                                rng=RngStream(cfg.seeds[0]).substream(999))
        return {"kappa": kappa, **{k: v for k, v in cf.items()},
                "row_sum_max_dev": chain.summary()["row_sum_max_dev"]}

    rows = _pool_map(one, list(enumerate(kappas)), cfg.threads)
    gaps = [r["spectral_gap"] for r in rows]
    rel_spread = (max(gaps) - min(gaps)) / max(gaps) if max(gaps) > 0 else np.inf
    return {"rows": rows, "gap_rel_spread": float(rel_spread)}


def run_exponent(cfg):
    """Top Lyapunov exponent of the period map (per amplitude)."""
    if cfg.experiment != "exponent":
        raise ConfigError("run_exponent requires experiment = exponent")

    def one(item):
        idx, a = item
        est = lyapunov_exponent(a, cfg.profile, cfg.n_steps, max(10, cfg.n_realizations),
                                RngStream(cfg.seeds[0]).substream(idx))
        return {"amplitude": a, "estimate": est["estimate"], "ci95": est["ci95"]}

    return {"rows": _pool_map(one, list(enumerate(cfg.amplitudes)), cfg.threads)}


def run_correlations(cfg):
    """Correlation decay, pathwise prefactors and their moments per kappa."""
    if cfg.experiment != "correlations":
        raise ConfigError("run_correlations requires experiment = correlations")
    modes = [tuple(m) for m in cfg.modes]
    mom = dkappa_moments(
        cfg.q_list, list(cfg.kappa_list), cfg.n_realizations,
        RngStream(cfg.seeds[0]).substream(501), cfg.amplitude, modes,
        n_max=cfg.corr_n_max, n_particles=cfg.n_particles,
        profile=cfg.profile, substeps=cfg.sde_substeps,
    )
    reports = mom.pop("reports")
    return {"reports": reports, "moments": mom}


def run_simulate(cfg):
    """One decay run: evolve an initial field and collect the norm series."""
    if cfg.experiment != "simulate":
        raise ConfigError("run_simulate requires experiment = simulate")
    n = cfg.grid_n
    kappa = cfg.kappa_list[0] if cfg.kappa_list else 0.0
    if cfg.initial == "gaussian":
        sigma = cfg.sigma if cfg.sigma > 0 else max(2.0 / n, float(np.sqrt(kappa)))
        rho0 = ScalarField.gaussian(n, (0.5, 0.5), sigma)
    elif cfg.initial == "sine_x1":
        rho0 = ScalarField.from_function(n, lambda x1, x2: np.sin(2 * np.pi * x1))
    elif cfg.initial == "random_smooth":
        gen = RngStream(cfg.seeds[0]).substream(77).generator
        coeff = np.zeros((n, n), dtype=complex)
        for _ in range(16):
            k1, k2 = gen.integers(-6, 7, size=2)
            if (k1, k2) == (0, 0):
                continue
            amp = gen.normal() + 1j * gen.normal()
            coeff[k1 % n, k2 % n] += amp
            coeff[-k1 % n, -k2 % n] += np.conj(amp)
        rho0 = ScalarField(np.real(np.fft.ifft2(coeff * n * n)))
    else:
        raise ConfigError(f"unknown initial condition {cfg.initial!r}")
    sched = ShearSchedule(cfg.amplitude, cfg.profile, RngStream(cfg.seeds[0]))
    series = decay_run(rho0, sched, kappa, cfg.n_periods, cfg.split_substeps,
                       alpha_list=(cfg.alpha, -cfg.alpha))
    return {"series": series, "rho0": rho0, "kappa": kappa}
