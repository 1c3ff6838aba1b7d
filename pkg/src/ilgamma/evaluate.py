"""Error metrics in ln(gamma_inf) and gamma_inf space, per-family absolute
percentage error summaries, and parity-plot data export."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import SOLUTE_FAMILIES, DataRecord

BAND = 0.5


@dataclass
class SpaceMetrics:
    mae: float
    rmse: float
    r2: float


@dataclass
class FamilySummary:
    count: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers_over_100: int


@dataclass
class MetricReport:
    n: int
    ln: SpaceMetrics
    gamma: SpaceMetrics
    mape: float
    families: dict[str, FamilySummary] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("", "ln gamma_inf", "gamma_inf"),
            ("MAE", f"{self.ln.mae:.4f}", f"{self.gamma.mae:.4f}"),
            ("RMSE", f"{self.ln.rmse:.4f}", f"{self.gamma.rmse:.4f}"),
            ("R2", f"{self.ln.r2:.4f}", f"{self.gamma.r2:.4f}"),
            ("MAPE %", "", f"{self.mape:.2f}"),
            ("n", str(self.n), ""),
        ]
        lines = [f"{a:<8}{b:>14}{c:>14}" for a, b, c in rows]
        if self.families:
            lines.append("")
            lines.append(f"{'family':<18}{'n':>6}{'median':>9}{'q1':>9}{'q3':>9}{'>100%':>7}")
            for name, s in self.families.items():
                lines.append(
                    f"{name:<18}{s.count:>6}{s.median:>9.2f}{s.q1:>9.2f}{s.q3:>9.2f}"
                    f"{s.outliers_over_100:>7}"
                )
        return "\n".join(lines)


def _pair(predictions, targets) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    if p.size == 0:
        raise ValueError("metrics need at least one sample")
    return p, t


def space_metrics(predictions, targets) -> SpaceMetrics:
    p, t = _pair(predictions, targets)
    e = p - t
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined: targets have zero variance")
    return SpaceMetrics(
        mae=float(np.mean(np.abs(e))),
        rmse=float(np.sqrt(np.mean(e * e))),
        r2=1.0 - float(np.sum(e * e)) / ss_tot,
    )


def ape(pred_ln, target_ln) -> np.ndarray:
    """Absolute percentage error of gamma_inf = exp(ln gamma_inf)."""
    p, t = _pair(pred_ln, target_ln)
    gamma_t = np.exp(t)
    assert np.all(gamma_t > 1e-12), "gamma_inf targets must be positive"
    return 100.0 * np.abs(np.exp(p) - gamma_t) / gamma_t


def metrics(pred_ln, target_ln) -> MetricReport:
    """MAE, RMSE and R^2 in both spaces plus MAPE in gamma_inf space."""
    p, t = _pair(pred_ln, target_ln)
    return MetricReport(
        n=int(p.size),
        ln=space_metrics(p, t),
        gamma=space_metrics(np.exp(p), np.exp(t)),
        mape=float(np.mean(ape(p, t))),
    )


def summarize(values: Sequence[float]) -> FamilySummary:
    """Median, quartiles and 1.5 IQR whiskers clipped to the data."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, median, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return FamilySummary(
        count=int(v.size),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers_over_100=int(np.sum(v > 100.0)),
    )


def per_family_ape(
    pred_ln, records: Sequence[DataRecord], families: Sequence[str] = SOLUTE_FAMILIES
) -> dict[str, FamilySummary]:
    """APE distribution per solute family, in the order of ``families``."""
    errors = ape(pred_ln, [r.ln_gamma for r in records])
    known = set(families)
    groups: dict[str, list[float]] = {}
    for err, record in zip(errors, records):
        if record.solute_family not in known:
            raise ValueError(f"unknown solute family {record.solute_family!r}")
        groups.setdefault(record.solute_family, []).append(float(err))
    return {name: summarize(groups[name]) for name in families if name in groups}


def full_report(pred_ln, records: Sequence[DataRecord]) -> MetricReport:
    report = metrics(pred_ln, [r.ln_gamma for r in records])
    report.families = per_family_ape(pred_ln, records)
    return report


@dataclass
class ParityCounts:
    inside: int
    outside: int

    @property
    def total(self) -> int:
        return self.inside + self.outside


def band_counts(pred_ln, target_ln, band: float = BAND) -> ParityCounts:
    p, t = _pair(pred_ln, target_ln)
    inside = int(np.sum(np.abs(p - t) <= band))
    return ParityCounts(inside, int(p.size) - inside)


def export_parity(
    pred_ln,
    target_ln,
    path: str | Path,
    families: Sequence[str] | None = None,
    band: float = BAND,
    plot_path: str | Path | None = None,
) -> ParityCounts:
    """Write ``target,prediction,family`` rows; optionally render an SVG/PDF/PNG."""
    p, t = _pair(pred_ln, target_ln)
    fams = list(families) if families is not None else [""] * p.size
    if len(fams) != p.size:
        raise ValueError("one family label per sample is required")
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["target_ln_gamma", "predicted_ln_gamma", "solute_family"])
            for a, b, f in zip(t, p, fams):
                writer.writerow([repr(float(a)), repr(float(b)), f])
    except OSError as exc:
        raise OSError(f"cannot write parity data to {path}: {exc.strerror}") from None
    counts = band_counts(p, t, band)
    if plot_path is not None:
        render_parity(p, t, plot_path, band)
    return counts


def render_parity(pred_ln, target_ln, path: str | Path, band: float = BAND) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    p, t = _pair(pred_ln, target_ln)
    lo = math.floor(min(p.min(), t.min())) - 0.5
    hi = math.ceil(max(p.max(), t.max())) + 0.5
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(t, p, s=6, alpha=0.6)
    ax.plot([lo, hi], [lo, hi], color="black", lw=0.8)
    for shift in (-band, band):
        ax.plot([lo, hi], [lo + shift, hi + shift], color="red", lw=0.8)
    ax.set_xlim(lo, hi)
    ax.set_ylim(lo, hi)
    ax.set_xlabel("experimental ln gamma_inf")
    ax.set_ylabel("predicted ln gamma_inf")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
