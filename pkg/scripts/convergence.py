"""Refinement ladder for a scenario file (default: scenarios/reference.yaml)."""
import argparse
from pathlib import Path

from renewal_sir.cli_io import convergence_table, load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", nargs="?", default=ROOT / "scenarios" / "reference.yaml")
    parser.add_argument("--levels", type=int, default=3)
    parser.add_argument("--reference-factor", type=int, default=4)
    args = parser.parse_args()
    rows = convergence_table(load_config(args.scenario), args.levels, args.reference_factor)
    print(f"{'cells':>6} {'L1 error':>12} {'ratio':>7} {'order':>6}")
    for r in rows:
        ratio = f"{r['ratio']:7.3f} {r['order']:6.2f}" if "ratio" in r else ""
        print(f"{r['cells_per_unit_age']:>6} {r['error']:12.4e} {ratio}")


if __name__ == "__main__":
    main()
