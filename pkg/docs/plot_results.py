"""Plot CSV tables produced by the langevin-gf command line.

The CLI deliberately never renders figures; it writes deterministic CSV
files and leaves presentation to scripts like this one.  Usage:

    python docs/plot_results.py results/linear_weak_order/weak_order.csv
    python docs/plot_results.py results/linear_ergodic/ergodic.csv

A weak_order.csv gets a log-log error plot with the fitted slopes from the
footer rows; an ergodic.csv gets running averages per initial value with the
quadrature reference as a horizontal line.  Figures are saved next to the
input file as PNG.
"""

from __future__ import annotations

import csv
import sys
from collections import defaultdict
from pathlib import Path

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print(
        "matplotlib is not installed; install it to render figures "
        "(the CSV files are complete without it)",
        file=sys.stderr,
    )
    sys.exit(1)


def read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def plot_weak_order(path: Path) -> Path:
    header, rows = read_rows(path)
    assert header[0] == "h", f"not a weak-order table: {path}"
    data = [row for row in rows if len(row) == 5]
    footer = {row[0]: float(row[1]) for row in rows if len(row) == 3}
    by_psi: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for h, psi, error, _, pipeline in data:
        if pipeline != "mc-censored":
            by_psi[psi].append((float(h), float(error)))
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for psi, points in by_psi.items():
        points.sort()
        hs = [p[0] for p in points]
        errors = [p[1] for p in points]
        slope = footer.get(psi)
        label = f"{psi} (slope {slope:.2f})" if slope is not None else psi
        ax.loglog(hs, errors, "o-", label=label)
    ref_h = sorted({p[0] for pts in by_psi.values() for p in pts})
    scale = min(e for pts in by_psi.values() for _, e in pts) / ref_h[0] ** 2
    ax.loglog(ref_h, [scale * h**2 for h in ref_h], "k--", alpha=0.5, label="h^2")
    ax.set_xlabel("step size h")
    ax.set_ylabel("weak error")
    ax.legend()
    fig.tight_layout()
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=150)
    return out


def plot_ergodic(path: Path) -> Path:
    header, rows = read_rows(path)
    assert header[0] == "t", f"not an ergodic table: {path}"
    psis = sorted({row[2] for row in rows})
    fig, axes = plt.subplots(1, len(psis), figsize=(4.0 * len(psis), 3.5), squeeze=False)
    for ax, psi in zip(axes[0], psis):
        subset = [row for row in rows if row[2] == psi]
        labels = sorted({row[1] for row in subset})
        for label in labels:
            series = [(float(r[0]), float(r[3])) for r in subset if r[1] == label]
            series.sort()
            ax.plot([s[0] for s in series], [s[1] for s in series], label=label)
        ax.axhline(float(subset[0][4]), color="k", linestyle="--", alpha=0.6)
        ax.set_title(psi)
        ax.set_xlabel("t")
    axes[0][0].set_ylabel("running average")
    axes[0][-1].legend(fontsize="small")
    fig.tight_layout()
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=150)
    return out


def main(argv: list[str]) -> int:
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    path = Path(argv[1])
    header, _ = read_rows(path)
    if header[0] == "h":
        out = plot_weak_order(path)
    elif header[0] == "t" and header[1] == "initial_label":
        out = plot_ergodic(path)
    else:
        print(f"no plot rule for a table with columns {header}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
