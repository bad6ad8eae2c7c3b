#!/usr/bin/env python3
"""Sweep the driving period around the oscillator's natural period.

At every period the coupled fluid-oscillator solve converges with bounded
energy, while the decoupled undamped oscillator is singular exactly at its
natural period.  Writes `resonance.csv` via the same handler as the CLI.
"""

import argparse
import os
import sys

from periflow.cli import cmd_resonance
from periflow.config import load_config, reference_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="YAML config (default: reference setup)")
    parser.add_argument("--out", default="out/resonance", help="output directory")
    args = parser.parse_args()

    config = load_config(args.config) if args.config else reference_config()
    os.makedirs(args.out, exist_ok=True)
    code = cmd_resonance(config, args.out)

    with open(os.path.join(args.out, "resonance.csv")) as fh:
        print(fh.read().rstrip())
    return code


if __name__ == "__main__":
    sys.exit(main())
