#!/usr/bin/env python3
"""Figure renderer for workbench CSV artifacts.

Three figure kinds, all driven purely by CSV content:
  timeseries — per-strategy mean d_B vs Jt with a shaded ±1 std band
  heatmap    — site-occupation expectations over Jt for one trajectory,
               with dashed vertical lines at measurement events
  histogram  — grouped success-probability bars per repetition budget

Usage: render.py --kind {timeseries|heatmap|histogram} --in <csv...> --out <png>
"""
import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


class RenderError(ValueError):
    """Bad or missing input content."""


def _load(paths, required_columns):
    frames = []
    for path in paths:
        frame = pd.read_csv(path)
        missing = required_columns - set(frame.columns)
        if missing:
            raise RenderError(f"{path}: missing columns {sorted(missing)}")
        if frame.empty:
            raise RenderError(f"{path}: no data rows")
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def render_timeseries(paths, out, threshold=0.99):
    data = _load(paths, {"strategy", "Jt", "mean_dB", "std_dB"})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for strategy, group in data.groupby("strategy", sort=False):
        group = group.sort_values("Jt")
        jt = group["Jt"].to_numpy()
        mean = group["mean_dB"].to_numpy()
        std = group["std_dB"].to_numpy()
        (line,) = ax.plot(jt, mean, label=strategy)
        ax.fill_between(jt, mean - std, mean + std, alpha=0.25,
                        color=line.get_color())
        hits = np.flatnonzero(mean >= threshold)
        if hits.size:
            ax.axvline(jt[hits[0]], linestyle="--", linewidth=0.8,
                       color=line.get_color(), alpha=0.7)
    ax.axhline(threshold, linestyle=":", linewidth=0.8, color="gray")
    ax.set_xlabel("Jt")
    ax.set_ylabel(r"$d_B$")
    ax.set_ylim(top=1.05)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def render_heatmap(paths, out):
    data = _load(
        paths,
        {"trajectory_id", "Jt", "event", "occupations", "d_B"},
    )
    traj_id = data["trajectory_id"].iloc[0]
    traj = data[data["trajectory_id"] == traj_id]
    grid = traj[traj["event"] == "grid"].sort_values("Jt")
    if grid.empty:
        raise RenderError("no grid rows for the first trajectory")
    occupations = np.array(
        [[float(x) for x in occ.split(";")] for occ in grid["occupations"]]
    )
    jt = grid["Jt"].to_numpy()
    fig, ax = plt.subplots(figsize=(7, 3.5))
    mesh = ax.pcolormesh(
        jt,
        np.arange(occupations.shape[1]),
        occupations.T,
        shading="nearest",
        cmap="viridis",
    )
    for t in traj.loc[traj["event"] == "measure", "Jt"]:
        ax.axvline(t, linestyle="--", linewidth=0.9, color="white")
    fig.colorbar(mesh, ax=ax, label=r"$\langle n_i \rangle$")
    ax.set_xlabel("Jt")
    ax.set_ylabel("site")
    ax.set_yticks(np.arange(occupations.shape[1]))
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def render_histogram(paths, out):
    data = _load(paths, {"strategy", "repetitions", "outcome_label", "probability"})
    summary = data[data["outcome_label"].isin(["target", "initial", "rest"])]
    if summary.empty:
        raise RenderError("no target/initial/rest summary rows")
    strategies = list(dict.fromkeys(summary["strategy"]))
    reps = sorted(summary["repetitions"].unique())
    labels = ["target", "initial", "rest"]
    fig, axes = plt.subplots(
        1, len(strategies), figsize=(3.2 * len(strategies), 3.6),
        sharey=True, squeeze=False,
    )
    width = 0.8 / len(labels)
    for ax, strategy in zip(axes[0], strategies):
        block = summary[summary["strategy"] == strategy]
        for j, label in enumerate(labels):
            values = [
                float(
                    block[(block["repetitions"] == r)
                          & (block["outcome_label"] == label)]["probability"].iloc[0]
                )
                for r in reps
            ]
            ax.bar(np.arange(len(reps)) + j * width, values, width, label=label)
        ax.set_xticks(np.arange(len(reps)) + width)
        ax.set_xticklabels([str(r) for r in reps])
        ax.set_xlabel("repetitions")
        ax.set_title(strategy)
        ax.set_ylim(0, 1.05)
    axes[0][0].set_ylabel("probability")
    axes[0][-1].legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--kind", required=True, choices=("timeseries", "heatmap", "histogram")
    )
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument(
        "--threshold", type=float, default=0.99,
        help="convergence threshold line for timeseries figures",
    )
    args = parser.parse_args(argv)
    try:
        if args.kind == "timeseries":
            render_timeseries(args.inputs, args.out, args.threshold)
        elif args.kind == "heatmap":
            render_heatmap(args.inputs, args.out)
        else:
            render_histogram(args.inputs, args.out)
    except (RenderError, FileNotFoundError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
