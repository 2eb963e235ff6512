#!/usr/bin/env python3
"""Figures from spg CSV output.

    python scripts/plot.py training runs/nav-quick -o training.png
    python scripts/plot.py sweep runs/nav-sweep/sweep.csv -o frontier.png
    python scripts/plot.py trajectories traj.csv --checkpoint runs/nav-quick/seed-0/checkpoint.json -o traj.png

Returns are divided by the number of logged states (T + 1).
"""

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def run_horizon(run_dir: Path, default: int) -> int:
    for ck in sorted(run_dir.glob("seed-*/checkpoint*.json")):
        return json.loads(ck.read_text())["env"]["horizon"]
    return default


def training(args):
    run = Path(args.path)
    seeds = sorted(run.glob("seed-*/metrics.csv"))
    if not seeds:
        raise SystemExit(f"no seed-*/metrics.csv under {run}")
    steps = run_horizon(run, args.horizon) + 1
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    curves = {"avg_return": [], "avg_safety": [], "lambda": []}
    for path in seeds:
        m = pd.read_csv(path)
        for key in curves:
            curves[key].append(m[key].to_numpy())
    n = min(len(c) for c in curves["lambda"])
    episode = np.arange(n)
    for ax, (key, label) in zip(axes, [("avg_return", "time-average return / step"), ("avg_safety", "time-average safety"), ("lambda", "lambda")]):
        data = np.stack([c[:n] for c in curves[key]])
        if key == "avg_return":
            data = data / steps
        mean, std = data.mean(0), data.std(0)
        ax.plot(episode, mean)
        ax.fill_between(episode, mean - std, mean + std, alpha=0.3)
        ax.set_xlabel("episode")
        ax.set_ylabel(label)
    axes[1].axhline(1 - args.delta, color="k", ls="--", lw=0.8)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


def sweep(args):
    s = pd.read_csv(args.path)
    steps = args.horizon + 1
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    colors = {"cumulative-shaped": "tab:blue"}
    for method, rows in s.groupby("method", sort=False):
        c = colors.get(method, "tab:red")
        ax.scatter(rows.eval_safety, rows.eval_return / steps, s=8, color=c, alpha=0.4)
        means = rows.groupby("weight").mean(numeric_only=True)
        ax.scatter(means.eval_safety, means.eval_return / steps, s=40, color=c, label=method)
        if method == "cumulative-shaped":
            ax.scatter(means.eval_safety, means.bound_upper / steps, marker="^", s=40, color=c, label="upper bound")
    ax.set_xlabel("safety")
    ax.set_ylabel("evaluation return / step")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


def draw_obstacles(ax, env):
    for ob in env["obstacles"]:
        if ob["kind"] == "circle":
            ax.add_patch(plt.Circle(ob["center"], ob["radius"], color="0.6"))
        else:
            (x0, y0), (x1, y1) = ob["min"], ob["max"]
            ax.add_patch(plt.Rectangle((x0, y0), x1 - x0, y1 - y0, color="0.6"))
    ax.plot(*env["goal"], marker="*", ms=14, color="gold", mec="k")


def trajectories(args):
    t = pd.read_csv(args.path)
    fig, ax = plt.subplots(figsize=(5, 5))
    if args.checkpoint:
        draw_obstacles(ax, json.loads(Path(args.checkpoint).read_text())["env"])
    for (start, _), rows in t.groupby(["start", "rollout"]):
        ax.plot(rows.x, rows.y, color=f"C{start}", lw=1)
    ax.set_xlim(0, 10)
    ax.set_ylim(0, 10)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="cmd", required=True)
    for name, fn in [("training", training), ("sweep", sweep), ("trajectories", trajectories)]:
        q = sub.add_parser(name)
        q.add_argument("path")
        q.add_argument("-o", "--output", default=f"{name}.png")
        q.add_argument("--horizon", type=int, default=20)
        q.set_defaults(fn=fn)
        if name == "training":
            q.add_argument("--delta", type=float, default=0.05)
        if name == "trajectories":
            q.add_argument("--checkpoint")
    args = p.parse_args()
    args.fn(args)


if __name__ == "__main__":
    main()
