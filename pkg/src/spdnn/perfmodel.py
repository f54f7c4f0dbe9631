"""Power-law execution-time model: t = (n_ops / n1) ** beta.

n1 is the number of operations processed in one second. Fitting is ordinary
least squares in log10-log10 space; the 2019 submission coefficients are kept
as fixed reference constants for report overlays.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

TIME_FLOOR = 1e-6  # below timer resolution; such records are dropped before fitting


@dataclasses.dataclass(frozen=True)
class TimingRecord:
    n_ops: int
    t_dnn: float
    label: str = ""

    def __post_init__(self):
        if self.n_ops < 1:
            raise ValueError(f"n_ops must be >= 1, got {self.n_ops}")
        if self.t_dnn <= 0:
            raise ValueError(f"t_dnn must be positive, got {self.t_dnn}")


@dataclasses.dataclass(frozen=True)
class PowerLawFit:
    n1: float
    beta: float
    r_squared: float
    n_points: int

    def __post_init__(self):
        if self.n1 <= 0:
            raise ValueError("n1 must be positive")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")


class ReferenceModel(NamedTuple):
    submission: str
    max_nc: float
    n1: float
    beta: float


def reference_table():
    """2019 submission model coefficients (fixed constants, largest-scale fits)."""
    return [
        ReferenceModel("Bisson-Nvidia-2019", 4.0e9, 1e13, float(Fraction(4, 5))),
        ReferenceModel("Davis-TAMU-2019", 4.0e9, 1e11, 1.0),
        ReferenceModel("Ellis-Sandia-2019", 4.0e9, 1.5e11, 1.0),
        ReferenceModel("Wang-UCDavis-2019", 1.0e9, 2e11, 1.0),
        ReferenceModel("Wang-PingAn-2019", 1.0e9, 2e11, 1.1),
        ReferenceModel("Mofrad-UPitt-2019", 4.0e9, 5e10, 1.0),
    ]


def fit_power_law(records):
    """OLS in log-log space: slope = beta, intercept = -beta * log10(n1)."""
    usable = [r for r in records if r.t_dnn >= TIME_FLOOR]
    if len(usable) < 2:
        raise ValueError(f"need >= 2 records above the {TIME_FLOOR:g} s floor, "
                         f"got {len(usable)}")
    x = np.log10([r.n_ops for r in usable])
    y = np.log10([r.t_dnn for r in usable])
    if np.all(x == x[0]):
        raise ValueError("degenerate design: all records share the same n_ops")
    beta, intercept = np.polyfit(x, y, 1)
    if beta == 0:
        raise ValueError("degenerate fit: zero slope, n1 is undefined")
    n1 = 10.0 ** (-intercept / beta)
    resid = y - (beta * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else 1.0 - np.sum(resid**2) / ss_tot
    return PowerLawFit(n1=float(n1), beta=float(beta), r_squared=float(r2),
                       n_points=len(usable))


def predict(fit, n_ops):
    """Model execution time at a given operation count."""
    if np.any(np.asarray(n_ops) < 1):
        raise ValueError("n_ops must be >= 1")
    return (np.asarray(n_ops, dtype=np.float64) / fit.n1) ** fit.beta


def read_results_jsonl(path):
    """Load TimingRecords from the engine's JSON-lines result file."""
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                records.append(TimingRecord(n_ops=int(rec["n_ops"]),
                                            t_dnn=float(rec["t_dnn_seconds"]),
                                            label=str(rec.get("label", ""))))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad result record: {exc}") from None
    return records


def _line_points(fit_like_n1, beta, lo, hi, n=64):
    grid = np.logspace(np.log10(lo), np.log10(hi), n)
    return grid, (grid / fit_like_n1) ** beta


def emit_report(fit, records, references, out_dir):
    """Write summary, per-record CSV, plot-data TSVs, and a log-log figure.

    Returns a dict of the paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    ops = np.array([r.n_ops for r in records], dtype=np.float64)
    lo, hi = (ops.min(), ops.max()) if len(records) else (fit.n1 / 10, fit.n1 * 10)
    if lo == hi:
        lo, hi = lo / 2, hi * 2

    summary = out_dir / "summary.txt"
    with open(summary, "w") as f:
        f.write("Power-law time model fit: t = (n_ops / n1) ** beta\n")
        f.write(f"  n1       = {fit.n1:.6e} ops/s\n")
        f.write(f"  beta     = {fit.beta:.6f}\n")
        f.write(f"  r^2      = {fit.r_squared:.6f} (log-log)\n")
        f.write(f"  points   = {fit.n_points}\n\n")
        if references:
            f.write("Reference models (2019 submissions):\n")
            for ref in references:
                f.write(f"  {ref.submission:<24} max_nc={ref.max_nc:.1e}  "
                        f"n1={ref.n1:.1e}  beta={ref.beta:g}\n")
    paths["summary"] = summary

    fit_csv = out_dir / "fit.csv"
    with open(fit_csv, "w", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["n_ops", "t_measured", "t_fit", "rate"])
        for r in records:
            t_fit = float(predict(fit, r.n_ops))
            writer.writerow([r.n_ops, repr(float(r.t_dnn)), repr(t_fit),
                             repr(float(r.n_ops / r.t_dnn))])
    paths["csv"] = fit_csv

    grid, t_line = _line_points(fit.n1, fit.beta, lo, hi)
    fit_tsv = out_dir / "model_fit.tsv"
    with open(fit_tsv, "w", newline="\n") as f:
        f.writelines(f"{float(g)!r}\t{float(t)!r}\n" for g, t in zip(grid, t_line))
    paths["fit_line"] = fit_tsv
    for ref in references:
        grid, t_line = _line_points(ref.n1, ref.beta, lo, hi)
        ref_tsv = out_dir / f"ref_{ref.submission}.tsv"
        with open(ref_tsv, "w", newline="\n") as f:
            f.writelines(f"{float(g)!r}\t{float(t)!r}\n" for g, t in zip(grid, t_line))
        paths[f"ref_{ref.submission}"] = ref_tsv

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if len(records):
        ax.loglog(ops, [r.t_dnn for r in records], "o", ms=5, label="measured")
    grid = np.logspace(np.log10(lo), np.log10(hi), 64)
    ax.loglog(grid, predict(fit, grid), "-", lw=2,
              label=f"fit: n1={fit.n1:.2e}, beta={fit.beta:.2f}")
    for ref in references:
        ax.loglog(grid, (grid / ref.n1) ** ref.beta, "--", lw=1, alpha=0.7,
                  label=ref.submission)
    ax.set_xlabel("DNN operations")
    ax.set_ylabel("execution time (s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    figure = out_dir / "model_fit.png"
    fig.savefig(figure, dpi=150)
    plt.close(fig)
    paths["figure"] = figure
    return paths
