#!/usr/bin/env python3
"""Plot the CSV outputs of a qphase run directory (map, vqad, dmrg, tebd)."""

import argparse
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_map(run, ax):
    for path in sorted(glob.glob(os.path.join(run, "loss_round*.csv"))):
        df = pd.read_csv(path)
        axis = df.columns[0]
        ax.semilogy(df[axis], df["loss"], marker="o", label=os.path.basename(path)[:-4])
    b = os.path.join(run, "boundary_round0.csv")
    if os.path.exists(b):
        for x in pd.read_csv(b).iloc[:, 0]:
            ax.axvline(x, color="k", ls="--", lw=0.8)
    ax.set_ylabel("reconstruction loss")
    ax.legend()


def plot_vqad(run, ax):
    df = pd.read_csv(os.path.join(run, "cost_profile.csv"))
    axis = df.columns[0]
    ax.plot(df[axis], df["cost"], marker="o", label="exact")
    if "noisy_mean" in df:
        ax.errorbar(df[axis], df["noisy_mean"], yerr=df["noisy_stderr"], fmt="s", label="noisy")
    ax.set_ylabel("Hamming cost")
    ax.legend()


def plot_profile(run, ax):
    df = pd.read_csv(os.path.join(run, "entropy.csv"))
    ax.plot(df.iloc[:, 0], df.iloc[:, -1], marker=".")
    ax.set_xlabel(df.columns[0])
    ax.set_ylabel(df.columns[-1])


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("run", help="output directory of a qphase run")
    p.add_argument("-o", "--output", default=None, help="image path (default: <run>/plot.png)")
    a = p.parse_args()
    fig, ax = plt.subplots(figsize=(6, 4))
    if glob.glob(os.path.join(a.run, "loss_round*.csv")):
        plot_map(a.run, ax)
    elif os.path.exists(os.path.join(a.run, "cost_profile.csv")):
        plot_vqad(a.run, ax)
    elif os.path.exists(os.path.join(a.run, "entropy.csv")):
        plot_profile(a.run, ax)
    else:
        raise SystemExit("nothing to plot in " + a.run)
    fig.tight_layout()
    out = a.output or os.path.join(a.run, "plot.png")
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    main()
