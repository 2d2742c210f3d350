"""Command-line entry point.

Verbs:

* ``run``    -- execute an experiment from a YAML config, write reports
* ``fit``    -- fit a convergence exponent from a rate CSV
* ``check``  -- run the inequality/invariant suites
* ``oracle`` -- brute-force transport solver on small instances

Exit codes: 0 success, 1 invariant violation, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from vvlab.harness import ConfigError, ExperimentConfig, apply_override, emit_report, run_experiment

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _parse_overrides(extra: list[str]) -> list[tuple[str, str]]:
    """Flags of the form ``--grid.n 256`` mirror config paths."""
    out = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unrecognized argument {tok!r} (expected --path.to.key value)")
        if "=" in tok:
            path, raw = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for override {tok!r}")
            path, raw = tok[2:], extra[i + 1]
            i += 2
        out.append((path, raw))
    return out


def cmd_run(args, extra) -> int:
    with open(args.config, encoding="utf-8") as fh:
        tree = yaml.safe_load(fh) or {}
    for path, raw in _parse_overrides(extra):
        apply_override(tree, path, raw)
    cfg = ExperimentConfig.from_nested(tree)
    outdir = Path(args.output or cfg.output_dir) / f"{cfg.name}-seed{cfg.seed}"
    series = run_experiment(cfg)
    summary = emit_report(series, cfg, outdir)
    print(f"report written to {outdir}")
    for t, fit in sorted(series.fits.items()):
        print(f"  t={t:g}: exponent {fit.exponent:.3f} "
              f"[{fit.ci_low:.3f}, {fit.ci_high:.3f}] (R^2={fit.r_squared:.4f})")
    if summary["invariant_violations"]:
        for msg in summary["invariant_violations"]:
            print(f"invariant violation: {msg}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_fit(args, extra) -> int:
    from vvlab.ratefit import fit_rate

    rows = []
    with open(args.csv, encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append((float(rec["nu"]), float(rec["t"]), float(rec[args.column])))
    times = sorted({t for _, t, _ in rows})
    if args.time is not None:
        times = [t for t in times if abs(t - args.time) < 1e-12]
        if not times:
            raise ConfigError(f"no rows at t={args.time}")
    result = {}
    for t in times:
        sub = [(nu, e) for nu, tt, e in rows if tt == t]
        fit = fit_rate([s[0] for s in sub], [s[1] for s in sub], transformed=args.transformed)
        result[repr(t)] = {
            "exponent": fit.exponent,
            "ci": [fit.ci_low, fit.ci_high],
            "r_squared": fit.r_squared,
        }
        print(f"t={t:g}: exponent {fit.exponent:.4f} [{fit.ci_low:.4f}, {fit.ci_high:.4f}]")
    if args.json:
        Path(args.json).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_check(args, extra) -> int:
    """Seeded random-instance inequality suites (ordering, domination, duality)."""
    from vvlab.checks import run_inequality_suites

    report = run_inequality_suites(n_instances=args.instances, rng_seed=args.seed)
    for name, passed, total in report.lines:
        print(f"{name}: {passed}/{total} passed")
    if not report.ok:
        for msg in report.failures[:20]:
            print(f"FAIL: {msg}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_oracle(args, extra) -> int:
    from vvlab.transport import DiscreteMeasure, wasserstein_brute_force, wasserstein_exact

    if args.instance:
        spec = json.loads(Path(args.instance).read_text())
        mu = DiscreteMeasure(np.array(spec["mu"]["points"]), np.array(spec["mu"]["weights"]),
                             spec["length"])
        nu = DiscreteMeasure(np.array(spec["nu"]["points"]), np.array(spec["nu"]["weights"]),
                             spec["length"])
    else:
        rng = np.random.default_rng(args.seed)
        pts = rng.uniform(0, 1, size=(2, args.atoms, 2))
        w = np.full(args.atoms, 1.0 / args.atoms)
        mu = DiscreteMeasure(pts[0], w, 1.0)
        nu = DiscreteMeasure(pts[1], w, 1.0)
    brute = wasserstein_brute_force(mu, nu, p=args.p)
    exact, _ = wasserstein_exact(mu, nu, p=args.p)
    print(f"brute force W{args.p} = {brute!r}")
    print(f"exact LP    W{args.p} = {exact!r}")
    if abs(brute - exact) > 1e-10 * max(brute, 1.0):
        print("MISMATCH between oracle and solver", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vvlab", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a YAML config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output", help="override the config output directory")

    p_fit = sub.add_parser("fit", help="fit exponents from a rate CSV")
    p_fit.add_argument("csv")
    p_fit.add_argument("--column", default="err_l2_velocity")
    p_fit.add_argument("--time", type=float)
    p_fit.add_argument("--transformed", action="store_true",
                       help="fit against log(nu/|log nu|)")
    p_fit.add_argument("--json", help="also write the fits to this JSON file")

    p_check = sub.add_parser("check", help="run the invariant suites")
    p_check.add_argument("--instances", type=int, default=200)
    p_check.add_argument("--seed", type=int, default=0)

    p_oracle = sub.add_parser("oracle", help="brute-force transport on small instances")
    p_oracle.add_argument("--instance", help="JSON instance file")
    p_oracle.add_argument("--atoms", type=int, default=6)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--p", type=int, default=2, choices=(1, 2))

    args, extra = parser.parse_known_args(argv)
    handlers = {"run": cmd_run, "fit": cmd_fit, "check": cmd_check, "oracle": cmd_oracle}
    try:
        return handlers[args.verb](args, extra)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, yaml.YAMLError, KeyError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
