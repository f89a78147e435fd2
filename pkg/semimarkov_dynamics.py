#!/usr/bin/env python3
"""
Semi-Markov Quantum Dynamics
Local (TCL) and non-local (NZ) master equations driven by renewal processes

Usage:
    python semimarkov_dynamics.py curves --config run.json          # renewal curves as CSV
    python semimarkov_dynamics.py solve --route nz --config run.json
    python semimarkov_dynamics.py figure2 --n-list 1,2,3,4 --out fig2.csv
    python semimarkov_dynamics.py validate --config run.json
    python semimarkov_dynamics.py --help
"""

import sys
from pathlib import Path

# Make the core package importable when run from another directory
sys.path.insert(0, str(Path(__file__).parent))

from core.cli import main


if __name__ == "__main__":
    try:
        exit_code = main()
        sys.exit(exit_code)
    except Exception as e:
        print(f"Fatal error: {e}", file=sys.stderr)
        sys.exit(1)
