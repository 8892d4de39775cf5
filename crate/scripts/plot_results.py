#!/usr/bin/env python3
"""Plot the CSV artifacts produced by the `ashc` CLI.

Usage: python3 scripts/plot_results.py [OUT_DIR]

Reads whichever of sim_hier.csv, sim_mrel.csv, scan_bound_*.csv exist in
OUT_DIR (default: out/) and writes PNGs next to them. Optional helper
only; the toolkit itself has no plotting dependency.
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                cols[name].append(float(value))
    return cols


def plot_sim(path, with_w):
    d = read_csv(path)
    rows = 3 if with_w else 2
    fig, axes = plt.subplots(rows, 1, figsize=(9, 3 * rows), sharex=True)
    axes[0].plot(d["t"], d["y"], "b-", label="y (plant)")
    axes[0].plot(d["t"], d["psi"], "r--", label="psi (abstraction)")
    axes[0].set_ylabel("output [V]")
    axes[0].legend(loc="best")
    axes[1].plot(d["t"], d["e_y"], "k-")
    axes[1].set_ylabel("e_y = psi - y [V]")
    if with_w:
        axes[2].semilogy(d["t"], [max(w, 1e-18) for w in d["W"]], "g-")
        axes[2].set_ylabel("W(xi, x)")
    axes[-1].set_xlabel("t [s]")
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    print(f"wrote {out}")

    fig, axes = plt.subplots(2, 1, figsize=(9, 5), sharex=True)
    axes[0].plot(d["t"], d["u"], "b-")
    axes[0].set_ylabel("u (duty)")
    axes[0].set_ylim(-0.05, 1.05)
    axes[1].plot(d["t"], d["v"], "r-")
    axes[1].set_ylabel("v (abstract input)")
    axes[1].set_xlabel("t [s]")
    out = path.with_name(path.stem + "_inputs.png")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    print(f"wrote {out}")


def plot_scan(path):
    d = read_csv(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(d["xi"], d["vartheta_norm"], "b-")
    ax.set_xlabel("xi")
    ax.set_ylabel("||vartheta(xi)||")
    ax.set_title(path.stem)
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)
    print(f"wrote {out}")


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    if not out_dir.is_dir():
        sys.exit(f"no such directory: {out_dir}")
    found = False
    hier = out_dir / "sim_hier.csv"
    if hier.exists():
        plot_sim(hier, with_w=True)
        found = True
    mrel = out_dir / "sim_mrel.csv"
    if mrel.exists():
        plot_sim(mrel, with_w=False)
        found = True
    for scan in sorted(out_dir.glob("scan_bound_*.csv")):
        plot_scan(scan)
        found = True
    if not found:
        sys.exit(f"no plottable CSV files in {out_dir}")


if __name__ == "__main__":
    main()
