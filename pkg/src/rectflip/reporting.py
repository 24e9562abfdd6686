"""Render a finished run directory into figures and a CSV summary.

Consumes the artifacts `attack` wrote (report.json plus trace/*.json) and
produces, next to them: figures/objective_traces.png with the per-image
best-objective curves, figures/queries.png with per-image query usage, and
summary.csv with one row per image.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _load_run(run_dir: Path) -> tuple[dict, list[dict]]:
    report_path = run_dir / "report.json"
    if not report_path.is_file():
        raise FileNotFoundError(f"no report.json under {run_dir}")
    report = json.loads(report_path.read_text())
    traces = []
    trace_dir = run_dir / "trace"
    if trace_dir.is_dir():
        for path in sorted(trace_dir.glob("*.json")):
            traces.append(json.loads(path.read_text()))
    return report, traces


def render_run_report(run_dir: Path) -> list[Path]:
    """Write figures + summary.csv for a run directory; returns paths written."""
    report, traces = _load_run(run_dir)
    fig_dir = run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    written: list[Path] = []

    if traces:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for t in traces:
            qs = [p[0] for p in t["trace"]]
            vals = [p[1] for p in t["trace"]]
            ax.plot(qs, vals, linewidth=1.0, alpha=0.7, label=t["name"])
        ax.set_xlabel("query")
        ax.set_ylabel("best objective")
        ax.set_title("Objective descent per image")
        if len(traces) <= 12:
            ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        path = fig_dir / "objective_traces.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    rows = [r for r in report.get("images", []) if "error" not in r]
    if rows:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        names = [r["name"] for r in rows]
        queries = [r["queries_used"] for r in rows]
        colors = [
            "tab:green" if r.get("succeeded") else "tab:red" for r in rows
        ]
        ax.bar(range(len(rows)), queries, color=colors)
        aq = report.get("metrics", {}).get("AQ")
        if aq is not None:
            ax.axhline(aq, color="black", linestyle="--", linewidth=1.0)
            ax.annotate(
                f"AQ = {aq:.1f}",
                xy=(0.99, aq),
                xycoords=("axes fraction", "data"),
                ha="right",
                va="bottom",
                fontsize=8,
            )
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(names, rotation=75, fontsize=6)
        ax.set_ylabel("queries used")
        ax.set_title("Query usage (green = attack succeeded)")
        fig.tight_layout()
        path = fig_dir / "queries.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    csv_path = run_dir / "summary.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["name", "succeeded", "queries_used", "best_objective", "linf", "error"]
        )
        for r in report.get("images", []):
            writer.writerow(
                [
                    r.get("name", ""),
                    r.get("succeeded", ""),
                    r.get("queries_used", ""),
                    r.get("best_objective", ""),
                    r.get("linf", ""),
                    r.get("error", ""),
                ]
            )
    written.append(csv_path)
    return written
