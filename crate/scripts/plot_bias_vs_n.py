"""Plot bias against sample size from a `plr simulate` bias_vs_n.csv."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="bias_vs_n.csv written by plr simulate")
    parser.add_argument("--out", default="bias_vs_n.png")
    args = parser.parse_args()

    df = pd.read_csv(args.csv)
    quantities = list(dict.fromkeys(df["quantity"]))
    fig, axes = plt.subplots(1, len(quantities), figsize=(4 * len(quantities), 3.5), squeeze=False)
    for ax, quantity in zip(axes[0], quantities):
        sub = df[df["quantity"] == quantity]
        for estimator, g in sub.groupby("estimator", sort=False):
            g = g.sort_values("n")
            ax.plot(g["n"], g["bias"], marker="o", label=estimator)
        ax.axhline(0.0, color="grey", linewidth=0.8)
        ax.set_xscale("log")
        ax.set_xticks(sorted(sub["n"].unique()))
        ax.get_xaxis().set_major_formatter(matplotlib.ticker.ScalarFormatter())
        ax.set_xlabel("n")
        ax.set_title(quantity)
    axes[0][0].set_ylabel("bias")
    axes[0][-1].legend(fontsize="small")
    fig.suptitle(f"setting {df['setting'].iloc[0]}")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
