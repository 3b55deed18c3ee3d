"""Write the curve files behind the four figure panels.

Each panel is one `solve` call over theta in {0.25, 1, 4, 16}; the output
directory gets fig1a.csv, fig1b.csv, fig2a.csv and fig2b.csv with JSON sidecars.
"""
import argparse
import sys

from imitation_portfolio import cli

PANELS = {
    "fig1a": ["--case", "1"],
    "fig1b": ["--case", "1", "--alpha1", "0.4", "--alpha2", "0.2"],
    "fig2a": ["--case", "2"],
    "fig2b": ["--case", "2", "--alpha1", "0.4", "--alpha2", "0.2"],
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--grid", default="2001")
    args = ap.parse_args()
    status = 0
    for name, extra in PANELS.items():
        code = cli.main(["solve", "--theta", "0.25,1,4,16", *extra, "--grid", args.grid,
                         "--out-dir", args.out_dir, "-o", f"{name}.csv"])
        print(f"{name}: exit {code}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
