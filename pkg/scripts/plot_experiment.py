"""Plot a CSV written by ``ctbn experiment``.

    python3 scripts/plot_experiment.py results/error_vs_samples.csv -o fig.png

Needs matplotlib (``pip install artifact[plot]``); the library itself does not.
"""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# x column, y column, column that splits the curves, log axes
LAYOUTS = {
    ("burn_in", "n_samples", "relative_error"): ("n_samples", "relative_error", "burn_in", True),
    ("evidence", "burn_in", "relative_error", "log_likelihood"):
        ("burn_in", "relative_error", "evidence", False),
    ("alpha", "burn_in", "relative_error"): ("burn_in", "relative_error", "alpha", False),
    ("N", "burn_in", "relative_error", "seconds_per_sweep"):
        ("burn_in", "relative_error", "N", False),
    ("iteration", "component", "mean_transitions", "mean_blanket_intervals",
     "expected_transitions"): ("iteration", "mean_transitions", "component", False),
}


def read(path):
    with open(path) as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    return rows[0], rows[1:]


def main(argv=None):
    ap = argparse.ArgumentParser(description="plot an experiment CSV")
    ap.add_argument("csv")
    ap.add_argument("-o", "--output", default="experiment.png")
    args = ap.parse_args(argv)
    cols, rows = read(args.csv)
    try:
        x, y, split, loglog = LAYOUTS[tuple(cols)]
    except KeyError:
        raise SystemExit(f"unrecognised columns {cols}")
    ix, iy, isplit = cols.index(x), cols.index(y), cols.index(split)
    curves = defaultdict(list)
    for r in rows:
        curves[r[isplit]].append((float(r[ix]), float(r[iy])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in curves.items():
        pts.sort()
        ax.plot(*zip(*pts), marker="o", label=f"{split}={label}")
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
