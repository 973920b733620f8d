# analysis/report.py
"""CSV and plot emission for experiment tables."""

import logging
import os
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from analysis.bench import RESULT_COLUMNS, summarize  # noqa: E402

logger = logging.getLogger(__name__)

PLOT_METRICS = ("overflow_ratio", "congestion", "wall_time")

METRIC_LABELS = {
    "overflow_ratio": "Overflow / total demand",
    "overflow_sum": "Overflow sum",
    "congestion": "Congestion",
    "wall_time": "Computing time (s)",
    "lp_solves": "LP solves",
}

FLOAT_FORMAT = "%.10g"


def _check_table(table: pd.DataFrame) -> None:
    if table.empty:
        raise ValueError("cannot report an empty result table")
    missing = [c for c in RESULT_COLUMNS if c not in table.columns]
    if missing:
        raise ValueError(f"result table lacks columns: {', '.join(missing)}")


def plot_metric(summary: pd.DataFrame, metric: str, path: str, title: str = "") -> bool:
    """
    Group mean per algorithm with a shaded 95% band. Returns False (and
    writes nothing) when no algorithm has a finite mean for the metric.
    """
    mean_col, ci_col = f"{metric}_mean", f"{metric}_ci"
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    drawn = 0
    try:
        for algorithm, rows in summary.groupby("algorithm", sort=True):
            rows = rows.sort_values("group_value", kind="stable")
            rows = rows[rows[mean_col].notna()]
            if rows.empty:
                continue
            x = rows["group_value"].to_numpy(dtype=float)
            y = rows[mean_col].to_numpy(dtype=float)
            ci = rows[ci_col].fillna(0.0).to_numpy(dtype=float)
            line, = ax.plot(x, y, marker="o", label=str(algorithm))
            ax.fill_between(x, y - ci, y + ci, color=line.get_color(), alpha=0.2, linewidth=0)
            drawn += 1
        if not drawn:
            return False
        labels = summary.drop_duplicates("group_value").sort_values("group_value")
        ax.set_xticks(labels["group_value"].to_numpy(dtype=float))
        ax.set_xticklabels(labels["group"].astype(str), rotation=30 if len(labels) > 6 else 0)
        ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        ax.set_xlabel("group")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata={"Software": None})
        return True
    finally:
        plt.close(fig)


def emit_report(table: pd.DataFrame, out_dir: str, name: Optional[str] = None,
                metrics: Sequence[str] = PLOT_METRICS) -> Dict[str, str]:
    """
    Write ``<name>_results.csv``, ``<name>_summary.csv`` and one
    ``<name>_<metric>.png`` per plotted metric into ``out_dir``.

    Returns the written paths keyed by "results", "summary" and metric name.
    """
    _check_table(table)
    name = name or str(table["experiment"].iloc[0])
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory is not writable: {out_dir}")

    written: Dict[str, str] = {}
    results_path = os.path.join(out_dir, f"{name}_results.csv")
    table.to_csv(results_path, index=False, float_format=FLOAT_FORMAT, columns=RESULT_COLUMNS)
    written["results"] = results_path

    summary = summarize(table)
    summary_path = os.path.join(out_dir, f"{name}_summary.csv")
    summary.to_csv(summary_path, index=False, float_format=FLOAT_FORMAT)
    written["summary"] = summary_path

    for metric in metrics:
        path = os.path.join(out_dir, f"{name}_{metric}.png")
        if plot_metric(summary, metric, path, title=name):
            written[metric] = path
        else:
            logger.info("no data to plot for %s", metric)
    return written


def format_summary(summary: pd.DataFrame, metrics: Sequence[str] = ("overflow_ratio", "congestion")
                   ) -> List[str]:
    """Plain text lines for the console, one per (group, algorithm)."""
    lines = []
    for _, row in summary.iterrows():
        parts = [f"{row['group']:>10}", f"{row['algorithm']:<13}", f"n={int(row['runs'])}"]
        for metric in metrics:
            mean, ci = row[f"{metric}_mean"], row[f"{metric}_ci"]
            ci_text = "" if pd.isna(ci) else f" ± {ci:.4g}"
            parts.append(f"{metric}={mean:.4g}{ci_text}")
        lines.append("  ".join(parts))
    return lines
