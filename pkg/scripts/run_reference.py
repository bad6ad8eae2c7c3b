#!/usr/bin/env python3
"""Run the reference periodic solve and print the diagnostics ledger.

Writes the same artifacts as `periflow solve` (trajectory CSV, ledger JSON,
manifest) into the chosen output directory.
"""

import argparse
import sys

from periflow.cli import cmd_solve
from periflow.config import load_config, reference_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="YAML config (default: reference setup)")
    parser.add_argument("--out", default="out/reference", help="output directory")
    args = parser.parse_args()

    config = load_config(args.config) if args.config else reference_config()
    import os

    os.makedirs(args.out, exist_ok=True)
    code = cmd_solve(config, args.out)

    import json

    ledger = json.load(open(os.path.join(args.out, "ledger.json")))
    print(f"config hash: {config.config_hash()}")
    rep = ledger["report"]
    print(
        f"converged in {rep['iterations']} iterations, "
        f"residual {rep['residual']:.3e}"
    )
    print(f"{'check':34s} {'lhs':>12s} {'rhs':>12s}  result")
    for row in ledger["diagnostics"]["rows"]:
        status = "pass" if row["pass"] else "FAIL"
        print(f"{row['check_id']:34s} {row['lhs']:12.4e} {row['rhs']:12.4e}  {status}")
    series = ledger["diagnostics"]["series"]
    print(
        f"sup E = {series['E_max']:.6f}, sup G = {series['G_max']:.6f}, "
        f"delta = {series['delta']:.4f}"
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
