#!/usr/bin/env python3
"""Plot series_*.csv files written by `husimi_cli simulate`.

    plot_series.py OUTPUT_DIR [--observable total] [--save fig.png]
"""
import argparse
import glob
import os

import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("directory")
    ap.add_argument("--observable", default="total")
    ap.add_argument("--save")
    args = ap.parse_args()

    files = sorted(glob.glob(os.path.join(args.directory, "series_eps*.csv")))
    if not files:
        raise SystemExit("no series files in " + args.directory)
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for path in files:
        df = pd.read_csv(path)
        df = df[df.observable == args.observable]
        label = os.path.basename(path)[len("series_"):-len(".csv")]
        top.plot(df.time, df.value, label=label)
        if "error" in df:
            bottom.semilogy(df.time, df.error.abs(), label=label)
    top.set_ylabel(args.observable)
    bottom.set_ylabel("|error|")
    bottom.set_xlabel("time")
    top.legend(fontsize="small")
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
