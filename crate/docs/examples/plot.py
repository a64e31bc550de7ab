#!/usr/bin/env python3
"""Quick figures from polarlab CSV output.

Usage: plot.py <sweep.csv | density.csv | trajectory.csv | points.csv> [out.png]

Picks the plot type from the header line.
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_sweep(df, ax):
    for n, group in df.groupby("n"):
        ax.errorbar(group["tau"], group["p_hat"], yerr=group["ci95"],
                    marker="o", ms=3, capsize=2, label=f"n = {n}")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel("polarization probability")
    ax.legend()


def plot_density(df, ax):
    for t, group in df.groupby("t"):
        ax.plot(group["x"], group["f"], label=f"t = {t:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("f")
    ax.legend()


def plot_trajectory(df, ax):
    for _, group in df.groupby("agent"):
        ax.plot(group["t"], group["opinion"], lw=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel("opinion")


def plot_points(df, ax):
    last = df[df["round"] == df["round"].max()]
    ax.scatter(last["x1"], last.get("x2", 0.0 * last["x1"]), s=6)
    ax.set_aspect("equal")
    ax.set_title(f"round {df['round'].max()}")


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"
    df = pd.read_csv(path)
    fig, ax = plt.subplots(figsize=(5, 4), dpi=150)
    columns = set(df.columns)
    if {"tau", "p_hat"} <= columns:
        plot_sweep(df, ax)
    elif {"x", "f"} <= columns:
        plot_density(df, ax)
    elif {"agent", "opinion"} <= columns:
        plot_trajectory(df, ax)
    elif "x1" in columns:
        plot_points(df, ax)
    else:
        sys.exit(f"unrecognized columns: {sorted(columns)}")
    fig.tight_layout()
    fig.savefig(out)
    print(out)


if __name__ == "__main__":
    main()
