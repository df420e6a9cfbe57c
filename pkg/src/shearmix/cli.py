"""Command line entry point.

Every subcommand reads a JSON config (or a previously written manifest),
runs one experiment, writes its CSV/JSON artifacts into ``--out`` and drops
a ``manifest.json`` with the full configuration, artifact version, wall
time and any warnings.  Outputs are deterministic functions of the config
and seeds; rerunning a manifest reproduces every artifact byte-for-byte
(the manifest itself records the new wall time).

Exit codes: 0 success (warnings listed in the manifest), 1 runtime
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

from . import __version__
from .experiments import (
    ConfigError,
    ExperimentConfig,
    run_correlations,
    run_drift_cert,
    run_ed_verify,
    run_exponent,
    run_mixing_sweep,
    run_simulate,
    run_smoothing_scaling,
    run_ulam_gap,
)
from .spectral import save_field

_SUBCOMMANDS = {
    "simulate": "simulate",
    "mixing-sweep": "mixing_sweep",
    "ed-verify": "ed_verify",
    "drift-cert": "drift_cert",
    "ulam-gap": "ulam_gap",
    "exponent": "exponent",
    "correlations": "correlations",
    "smoothing": "smoothing_scaling",
}


def _load_config(path, experiment):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        raw = json.load(fh)
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]  # accept a manifest as the config
    raw.setdefault("experiment", experiment)
    if raw["experiment"] != experiment:
        raise ConfigError(
            f"config names experiment {raw['experiment']!r} but the "
            f"subcommand expects {experiment!r}"
        )
    unknown = set(raw) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**raw).validate()


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_outputs(experiment, result, out_dir, cfg):
    written = []
    warnings = []

    def path(name):
        written.append(name)
        return os.path.join(out_dir, name)

    if experiment == "mixing_sweep":
        result.to_csv(path("t_mix.csv"))
        _json_dump({"fit": result.fit, "excluded": result.excluded}, path("fit.json"))
        if result.excluded:
            warnings.append(f"kappa values excluded from the fit: {result.excluded}")
    elif experiment == "ed_verify":
        with open(path("dhat.csv"), "w") as fh:
            fh.write("kappa,seed,d_hat,excluded\n")
            for r in result["rows"]:
                fh.write(f"{r['kappa']!r},{r['seed']},{'' if r['d_hat'] is None else repr(r['d_hat'])},{r['excluded'] or ''}\n")
        _json_dump({k: v for k, v in result.items() if k != "rows"}, path("moments.json"))
        warnings.extend(result["flags"])
    elif experiment == "smoothing_scaling":
        with open(path("smoothing.csv"), "w") as fh:
            fh.write("kappa,ratio\n")
            for k, r in zip(result["kappa_list"], result["ratios"]):
                fh.write(f"{k!r},{r!r}\n")
        _json_dump({k: v for k, v in result.items() if k not in ("kappa_list", "ratios")},
                   path("fit.json"))
    elif experiment == "drift_cert":
        payload = {
            "a_star": result["a_star"],
            "reports": [dict(asdict(r), passed=r.passed) for r in result["reports"]],
        }
        _json_dump(payload, path("drift_cert.json"))
        if result["a_star"] is None:
            warnings.append("no amplitude in the search list passed the certificate")
    elif experiment == "ulam_gap":
        _json_dump(result, path("ulam_gap.json"))
        for row in result["rows"]:
            if not row["converged"]:
                warnings.append(f"power iteration did not settle at kappa={row['kappa']}")
    elif experiment == "exponent":
        _json_dump(result, path("lyapunov.json"))
    elif experiment == "correlations":
        payload = {"per_kappa": {}, "moments": result["moments"]}
        for kappa, rep in result["reports"].items():
            payload["per_kappa"][repr(kappa)] = {
                "gamma_hat": rep.gamma_hat,
                "zeta_exp": rep.zeta_exp,
                "gamma_per_realization": rep.gamma_per_realization.tolist(),
                "d_kappa_hat": rep.d_kappa_hat.tolist(),
                "flags": rep.flags,
            }
            warnings.extend(rep.flags)
        _json_dump(payload, path("correlations.json"))
    elif experiment == "simulate":
        series = result["series"]
        series.to_csv(path("norms.csv"))
        save_field(result["rho0"], os.path.join(out_dir, "field_initial"),
                   time=0.0, kappa=result["kappa"], seed=cfg.seeds[0])
        written.extend(["field_initial.bin", "field_initial.json"])
        if series.warning:
            warnings.append("grid is coarser than the diffusive cutoff rule")
    return written, warnings


_RUNNERS = {
    "simulate": run_simulate,
    "mixing_sweep": run_mixing_sweep,
    "ed_verify": run_ed_verify,
    "drift_cert": run_drift_cert,
    "ulam_gap": run_ulam_gap,
    "exponent": run_exponent,
    "correlations": run_correlations,
    "smoothing_scaling": run_smoothing_scaling,
}


def cli_main(argv=None):
    parser = argparse.ArgumentParser(
        prog="shearmix",
        description="Numerical experiments for randomly shifted alternating shear flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (or manifest) path")
        p.add_argument("--seed", type=int, default=None, help="override: run a single seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads across runs")
    args = parser.parse_args(argv)

    experiment = _SUBCOMMANDS[args.command]
    try:
        cfg = _load_config(args.config, experiment)
        if args.seed is not None:
            cfg.seeds = [args.seed]
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.validate()
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    try:
        result = _RUNNERS[experiment](cfg)
        written, warnings = _write_outputs(experiment, result, args.out, cfg)
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "artifact_version": __version__,
        "experiment": experiment,
        "config": asdict(cfg),
        "wall_time_s": time.time() - t0,
        "warnings": warnings,
        "outputs": written,
    }
    _json_dump(manifest, os.path.join(args.out, "manifest.json"))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
