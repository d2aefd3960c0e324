"""Plot relative gradient norm against iteration for one or more trace CSV files.

Usage::

    python scripts/plot_traces.py out/trace_newton.csv out/trace_rcg.csv -o convergence.png
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    iters, relgrad = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            iters.append(int(row["iter"]))
            relgrad.append(float(row["relgrad"]))
    return iters, relgrad


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("traces", nargs="+", help="trace CSV files")
    parser.add_argument("-o", "--output", default="traces.png")
    args = parser.parse_args(argv)

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.traces:
        it, g = load(path)
        ax.semilogy(it, [max(v, 1e-17) for v in g], marker=".", label=Path(path).stem)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative gradient norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
