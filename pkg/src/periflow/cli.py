"""Batch command-line front end.

Subcommands:
  poiseuille  channel-profile solve: per-harmonic profiles, pressure signal,
              profile-norm table
  solve       full periodic solve: trajectory CSV, diagnostics ledger,
              run manifest
  resonance   period sweep around the oscillator's natural period, coupled
              vs decoupled outcome table

Exit codes: 0 success, 2 diagnostic gate failure, 3 configuration error,
4 solver non-convergence.  Outputs are deterministic for a fixed config and
seed and every file records the configuration hash.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .config import load_config, reference_config
from .errors import ConfigError, NoConvergence, PeriflowError, StageError

EXIT_OK = 0
EXIT_GATE = 2
EXIT_CONFIG = 3
EXIT_NO_CONVERGENCE = 4


def _fmt(x):
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(config, extra):
    data = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "config": config.to_json_dict(),
    }
    data.update(extra)
    return data


def cmd_poiseuille(config, out_dir):
    from .womersley import chi_norm_report, solve_poiseuille

    phi = config.build_flowrate()
    flow = solve_poiseuille(phi, config.params, n_nodes=config.profile_nodes)

    header = ["x2"]
    cols = [flow.x2]
    for k in flow.harmonics:
        header += [f"chi{k}_re", f"chi{k}_im"]
        chi = flow.chi[k]
        cols += [np.real(chi), np.imag(chi)]
    _write_csv(os.path.join(out_dir, "profile.csv"), header, zip(*cols))

    _write_json(
        os.path.join(out_dir, "pressure_signal.json"),
        flow.pressure_factor_signal.to_json_dict(),
    )

    rows = chi_norm_report(flow)
    _write_csv(
        os.path.join(out_dir, "profile_norms.csv"),
        ["order", "wk_w22", "ck_w12", "wk1_l2", "phi_norm"],
        [(r.order, r.wk_w22, r.ck_w12, r.wk1_l2, r.phi_norm) for r in rows],
    )
    _write_json(
        os.path.join(out_dir, "manifest.json"),
        _manifest(config, {"command": "poiseuille", "harmonics": list(flow.harmonics)}),
    )
    return EXIT_OK


def cmd_solve(config, out_dir):
    from .solver import galerkin_solve

    result = galerkin_solve(config)
    traj = result.trajectory
    n = traj.states.shape[1] - 1

    header = ["t"] + [f"a{i+1}" for i in range(n)] + ["z", "zdot"]
    rows = np.column_stack([traj.times, traj.states, traj.derivs[:, -1]])
    _write_csv(os.path.join(out_dir, "trajectory.csv"), header, rows)

    ledger = {
        "report": {
            "iterations": result.report["iterations"],
            "residual": result.report["residual"],
            "periodicity_defect": result.report["periodicity_defect"],
            "converged": result.report["converged"],
            "smallness": result.report["smallness"],
            "c_q": result.report["c_q"],
        },
        "diagnostics": result.diagnostics,
        "warnings": list(result.warnings),
    }
    _write_json(os.path.join(out_dir, "ledger.json"), ledger)

    gates_ok = all(row["pass"] for row in result.diagnostics["rows"])
    _write_json(
        os.path.join(out_dir, "manifest.json"),
        _manifest(
            config,
            {
                "command": "solve",
                "gates_green": bool(gates_ok and not result.warnings),
                "warnings": list(result.warnings),
                "check_ids": [row["check_id"] for row in result.diagnostics["rows"]],
            },
        ),
    )
    return EXIT_OK if gates_ok else EXIT_GATE


def cmd_resonance(config, out_dir):
    from .diagnostics import resonance_probe
    from .solver import FixedPointConfig, assemble_from_config

    if not config.resonance_factors:
        raise ConfigError("'solver.resonance_factors' must not be empty")
    t_nat = config.params.natural_period
    rows = []
    for factor in config.resonance_factors:
        period = factor * t_nat
        sub = config.with_period(period)
        parts = assemble_from_config(sub)
        probe = resonance_probe(
            parts["system"],
            FixedPointConfig(
                damping=config.damping,
                tol=config.fixed_point_tol,
                max_iter=config.max_iter,
                n_steps=config.n_steps,
            ),
        )
        coupled = probe["coupled"]
        rows.append(
            (
                factor,
                period,
                1.0 if coupled.get("converged") else 0.0,
                coupled.get("sup_E", math.nan),
                1.0 if probe["decoupled"].get("singular") else 0.0,
            )
        )
    _write_csv(
        os.path.join(out_dir, "resonance.csv"),
        ["period_factor", "period", "coupled_converged", "sup_E", "decoupled_singular"],
        rows,
    )
    _write_json(
        os.path.join(out_dir, "manifest.json"),
        _manifest(
            config,
            {"command": "resonance", "natural_period": t_nat},
        ),
    )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="periflow",
        description="Periodic channel-flow / oscillating-body solver",
    )
    parser.add_argument("--config", help="YAML configuration file (default: built-in reference setup)")
    parser.add_argument("--out", help="output directory (default: from config)")
    parser.add_argument("--threads", type=int, help="worker thread cap")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument(
        "--warn-only",
        action="store_true",
        help="downgrade data-smallness gate failures to warnings",
    )
    parser.add_argument(
        "command", choices=["poiseuille", "solve", "resonance"], help="what to run"
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    try:
        config = load_config(args.config) if args.config else reference_config()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.warn_only:
            overrides["warn_only"] = True
        if overrides:
            config = dataclasses.replace(config, **overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or config.output_dir
    os.makedirs(out_dir, exist_ok=True)

    handler = {
        "poiseuille": cmd_poiseuille,
        "solve": cmd_solve,
        "resonance": cmd_resonance,
    }[args.command]
    try:
        return handler(config, out_dir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except StageError as exc:
        if isinstance(exc.original, NoConvergence):
            print(f"solver did not converge: {exc}", file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except PeriflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
