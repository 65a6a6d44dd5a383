"""Figure rendering for violation reports.

Figures are written next to the JSON report so a check run leaves a
self-contained audit trail: a per-constraint violation bar chart and a
histogram of the per-row violated fraction.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import MetricsReport  # noqa: E402


def save_violation_figures(report: MetricsReport, matrix: np.ndarray,
                           report_path: str | Path) -> list[Path]:
    """Render figures for a violation matrix next to ``report_path``.

    Returns the written file paths (empty when there is nothing to plot).
    """
    base = Path(report_path)
    stem = base.with_suffix("")
    written: list[Path] = []
    if report.n_constraints == 0 or report.n_rows == 0:
        return written

    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * report.n_constraints), 3.2))
    counts = report.per_constraint_violation_counts
    ax.bar(range(len(counts)), counts, color="#c44e52")
    ax.set_xlabel("constraint index")
    ax.set_ylabel("violating rows")
    ax.set_title(f"violations per constraint (CVC {report.cvc:.1f}%)")
    ax.set_xticks(range(len(counts)))
    fig.tight_layout()
    path = Path(f"{stem}_constraints.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    fractions = matrix.sum(axis=1) / report.n_constraints
    ax.hist(fractions, bins=min(20, max(5, report.n_constraints + 1)),
            range=(0.0, 1.0), color="#4c72b0")
    ax.set_xlabel("fraction of constraints violated")
    ax.set_ylabel("rows")
    ax.set_title(f"per-row violations (CVR {report.cvr:.1f}%)")
    fig.tight_layout()
    path = Path(f"{stem}_rows.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
