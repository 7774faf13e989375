"""Command-line runner: scenario config in, CSV and JSON reports out.

Usage::

    szegolab dims          --preset cp1-s1-12 --out runs/dims
    szegolab asymptotics   --config scenario.yaml --haar phi
    szegolab immersion     --preset cp2-t2 --threads 1
    szegolab reduction-scan --preset cp2-t2

Exit status is 0 when every check passes, 1 when a numerical check fails and
2 for usage, configuration or construction errors.  Every output directory
receives ``resolved_config.yaml`` and ``summary.json``.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__
from .asymptotics import R2_GATE, convergence_report, profile_report
from .hardy import CACHE_ENV, isotype_basis, isotype_dimension_by_characters
from .immersion import isometry_report, laplacian_report, minimality_oracle, target_eigenvalue
from .presets import PRESETS, ConfigError, ScenarioConfig, parse_config, preset
from .reduction import (LocusSolverError, NotFreeError, locus_point, splitting_residuals,
                        transversality_margin)

SCHEMA_VERSION = 1
EXPONENT_TOL = 0.05
MINIMALITY_TOL = 0.2

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["schema_version"] + header)
        for row in rows:
            w.writerow([SCHEMA_VERSION] + [_fmt(v) for v in row])


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write_outputs(out_dir: str, cfg: ScenarioConfig, command: str, summary: dict) -> None:
    with open(os.path.join(out_dir, "resolved_config.yaml"), "w") as fh:
        yaml.safe_dump(_jsonify(cfg.resolved()), fh, sort_keys=True)
    payload = {"schema_version": SCHEMA_VERSION, "command": command, "scenario": cfg.name,
               "package_version": __version__, **summary}
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# setup shared by the subcommands


def _setup(cfg: ScenarioConfig):
    try:
        action = cfg.build_action()
        nu = cfg.build_weight(action)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot construct the scenario: {exc}") from exc
    return action, nu


def _first_locus_point(cfg, action, nu):
    errors = []
    for seed in cfg.seed_points(action.model):
        try:
            return locus_point(action, nu, seed, require_free=cfg.require_free)
        except (LocusSolverError, NotFreeError) as exc:
            errors.append(str(exc))
    raise LocusSolverError("no seed produced a locus point: " + "; ".join(errors))


def _basis_factory(action, nu):
    cache = {}

    def factory(k):
        if k not in cache:
            cache[k] = isotype_basis(action, nu, k)
        return cache[k]

    return factory


# --------------------------------------------------------------------------
# subcommands


def run_dims(cfg: ScenarioConfig, out_dir: str) -> int:
    ks = cfg.dims_k_grid if cfg.dims_k_grid is not None else cfg.k_grid
    if not ks:
        raise UsageError("k grid is empty")
    action, nu = _setup(cfg)
    rows, all_ok = [], True
    for k in ks:
        enum = isotype_basis(action, nu, k).dimension
        char = isotype_dimension_by_characters(action, nu, k)
        ok = abs(char - round(char)) < 1e-6 and int(round(char)) == enum
        all_ok &= ok
        rows.append([k, enum, char, ok])
    write_csv(os.path.join(out_dir, "dims.csv"), ["k", "enumeration", "characters", "match"], rows)
    _write_outputs(out_dir, cfg, "dims", {"all_match": all_ok, "n_rows": len(rows)})
    return EXIT_OK if all_ok else EXIT_CHECK


def run_asymptotics(cfg: ScenarioConfig, out_dir: str) -> int:
    if not cfg.k_grid:
        raise UsageError("k grid is empty")
    action, nu = _setup(cfg)
    data = _first_locus_point(cfg, action, nu)
    factory = _basis_factory(action, nu)
    rep = convergence_report(factory, data, k_grid=cfg.k_grid, haar=cfg.haar)
    rows = [[k, o.real, o.imag, p.real, p.imag, abs(o / p)]
            for k, o, p in zip(rep.k_grid, rep.observed, rep.predicted)]
    write_csv(os.path.join(out_dir, "asymptotics.csv"),
              ["k", "observed_re", "observed_im", "predicted_re", "predicted_im", "ratio_abs"], rows)
    summary = {
        "point": data.point, "varsigma": data.varsigma, "psi": data.psi_value,
        "alpha_fit": rep.fitted_exponent, "alpha_target": rep.target_exponent,
        "beta_fit": rep.fitted_log_constant, "beta_target": rep.target_log_constant,
        "beta_pinned": rep.pinned_log_constant, "beta_relative_error": rep.constant_relative_error,
        "remainder_rate": rep.remainder_rate, "r_squared": rep.r_squared, "haar": rep.haar,
    }
    prof = cfg.profile_vectors()
    if prof is not None:
        pr = profile_report(factory, data, prof[0], prof[1], cfg.k_grid)
        write_csv(os.path.join(out_dir, "profile.csv"), ["k", "ratio_re", "ratio_im", "error"],
                  [[k, q.real, q.imag, e] for k, q, e in zip(pr.k_grid, pr.ratios, pr.errors)])
        summary["profile"] = {"rate": pr.rate, "r_squared": pr.r_squared, "decreasing": pr.decreasing,
                              "target": pr.target}
    ok = rep.exponent_error <= EXPONENT_TOL and rep.r_squared >= R2_GATE
    summary["alpha_gate"] = ok
    _write_outputs(out_dir, cfg, "asymptotics", summary)
    return EXIT_OK if ok else EXIT_CHECK


def run_immersion(cfg: ScenarioConfig, out_dir: str) -> int:
    if len(cfg.k_grid) < 4:
        raise UsageError("immersion needs a k grid with at least 4 entries")
    action, nu = _setup(cfg)
    data = _first_locus_point(cfg, action, nu)
    factory = _basis_factory(action, nu)
    iso = isometry_report(data, factory, cfg.k_grid)
    lap = laplacian_report(data, factory, cfg.k_grid)
    rows = [[k, dev, sv, r.eigen_estimate, r.residual_norm]
            for k, dev, sv, r in zip(iso.k_grid, iso.deviations, iso.min_singular_values, lap)]
    write_csv(os.path.join(out_dir, "immersion.csv"),
              ["k", "metric_deviation", "min_singular_value", "eigen_estimate", "residual"], rows)
    m = -target_eigenvalue(data)
    # deviations at rounding level count as an exact isometry
    exact = max(iso.deviations) < 1e-10
    verdicts = {
        "immersion": iso.k_star != -1,
        "isometry": "exact" if exact else ("decreasing" if iso.strictly_decreasing else "not-decreasing"),
        "minimality": minimality_oracle(m, lap[-1].eigen_estimate, MINIMALITY_TOL),
    }
    summary = {"verdicts": verdicts, "target_eigenvalue": -m, "eigen_estimates": [r.eigen_estimate for r in lap],
               "residuals": [r.residual_norm for r in lap], **iso.summary()}
    _write_outputs(out_dir, cfg, "immersion", summary)
    ok = verdicts["immersion"] and verdicts["isometry"] != "not-decreasing" and verdicts["minimality"]
    return EXIT_OK if ok else EXIT_CHECK


def run_reduction_scan(cfg: ScenarioConfig, out_dir: str) -> int:
    action, nu = _setup(cfg)
    rows, failures, margins = [], [], []
    n = action.model.n_coords
    for i, seed in enumerate(cfg.seed_points(action.model)):
        try:
            data = locus_point(action, nu, seed, require_free=cfg.require_free)
        except (LocusSolverError, NotFreeError) as exc:
            failures.append({"seed": i, "error": str(exc)})
            continue
        res = splitting_residuals(data)
        margin = transversality_margin(data)
        margins.append(margin)
        coords = [c for z in data.point for c in (z.real, z.imag)]
        rows.append([i, *coords, data.varsigma, data.psi_value, margin, data.cone_residual,
                     res["splitting_condition"], float(np.linalg.cond(data.horizontal_frame)), data.free])
    header = ["seed"] + [f"{p}{j}" for j in range(n) for p in ("x_re", "x_im")] + [
        "varsigma", "psi", "margin", "cone_residual", "splitting_condition", "horizontal_condition", "free"]
    write_csv(os.path.join(out_dir, "reduction_scan.csv"), header, rows)
    ok = bool(rows) and not failures and all(m > 0 for m in margins)
    _write_outputs(out_dir, cfg, "reduction-scan", {"n_points": len(rows), "failures": failures,
                                                     "all_transverse": ok})
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "dims": run_dims,
    "asymptotics": run_asymptotics,
    "immersion": run_immersion,
    "reduction-scan": run_reduction_scan,
}


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="szegolab", description="Equivariant Szegő kernel experiments.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=sorted(COMMANDS))
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="YAML scenario file")
    src.add_argument("--preset", metavar="NAME", help="one of: " + ", ".join(sorted(PRESETS)))
    p.add_argument("--out", metavar="DIR", help="output directory (default: config 'outputs' or szegolab-out/<name>/<command>)")
    p.add_argument("--threads", type=int, metavar="N", help="cap BLAS/OpenMP threads")
    p.add_argument("--haar", choices=("prob", "phi"), help="override the Haar normalization convention")
    p.epilog = f"Set {CACHE_ENV} to a directory to cache isotype bases."
    return p


def load_config(args) -> ScenarioConfig:
    if args.preset:
        cfg = preset(args.preset)
    else:
        try:
            with open(args.config) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a YAML mapping")
        cfg = parse_config(raw)
    if args.haar:
        cfg.conventions["haar"] = "probability" if args.haar == "prob" else "phi"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("szegolab: error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args)
        out_dir = args.out or cfg.outputs or os.path.join("szegolab-out", cfg.name, args.command)
        os.makedirs(out_dir, exist_ok=True)
        limits = threadpool_limits(args.threads) if args.threads else contextlib.nullcontext()
        t0 = time.perf_counter()
        with limits:
            code = COMMANDS[args.command](cfg, out_dir)
    except (ConfigError, UsageError) as exc:
        print(f"szegolab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LocusSolverError, NotFreeError) as exc:
        print(f"szegolab: locus error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    status = "ok" if code == EXIT_OK else "check failed"
    print(f"szegolab {args.command} [{cfg.name}]: {status} ({time.perf_counter() - t0:.1f}s) -> {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
