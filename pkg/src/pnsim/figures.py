"""Figure rendering for analytic curves and session reports.

Uses the Agg backend so rendering works without a display; every function
writes PNG files next to the delimited report output and returns the paths.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import leak_analytics, spns_leak
from .config import RunConfig
from .photon_stats import PhotonPmf, loss_db_from_transmittance
from .reports import ReferenceRow
from .session import SessionReport


def leak_vs_loss_figure(
    pmf: PhotonPmf, path: str | Path, mark_db: float | None = None
) -> Path:
    """Leak fraction as a function of channel loss for one source.

    Draws both receiver assumptions and the deep-loss asymptote; mark_db
    highlights the configured operating point.
    """
    loss_db = np.linspace(0.0, 30.0, 121)
    etas = 10.0 ** (-loss_db / 10.0)
    threshold = [spns_leak(pmf, e, "threshold") for e in etas]
    pnr = [spns_leak(pmf, e, "pnr") for e in etas]
    asymptote = leak_analytics(pmf, etas[-1]).asymptotic

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(loss_db, threshold, label="threshold receiver")
    ax.plot(loss_db, pnr, label="number-resolving receiver")
    ax.axhline(asymptote, color="gray", linestyle="--", linewidth=1,
               label=f"deep-loss limit {asymptote:.3f}")
    if mark_db is not None:
        ax.axvline(mark_db, color="black", linestyle=":", linewidth=1)
    ax.set_xlabel("channel loss (dB)")
    ax.set_ylabel("fraction of detected bits held by Eve")
    ax.set_title("multi-photon leak vs channel loss")
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def yield_consistency_figure(report: SessionReport, path: str | Path) -> Path:
    """Observed vs expected yield per intensity with the test band."""
    stats = report.per_intensity
    x = np.arange(len(stats))
    expected = np.array([s.expected_yield for s in stats])
    observed = np.array([s.observed_yield for s in stats])
    critical = report.consistency.z_critical
    band = np.array(
        [
            critical * math.sqrt(s.expected_yield * (1 - s.expected_yield) / s.pulses)
            if s.pulses
            else 0.0
            for s in stats
        ]
    )

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.errorbar(x, expected, yerr=band, fmt="_", color="gray", capsize=6,
                label=f"expected (±{critical:g} sigma)")
    ax.plot(x, observed, "o", color="tab:blue", label="observed")
    for xi, s in zip(x, stats):
        if s.z is not None:
            ax.annotate(f"z={s.z:+.2f}", (xi, s.observed_yield),
                        textcoords="offset points", xytext=(8, 4), fontsize=8)
    ax.set_xticks(x)
    ax.set_xticklabels([f"{s.mean:g}" for s in stats])
    ax.set_xlabel("intensity (mean photon number)")
    ax.set_ylabel("yield")
    ax.set_yscale("log")
    verdict = "consistent" if report.consistency.passed else "INCONSISTENT"
    ax.set_title(f"per-intensity yields: {verdict} with honest channel")
    ax.legend(fontsize=9)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def reference_figure(rows: list[ReferenceRow], path: str | Path) -> Path:
    """Grouped bars: published vs recomputed vs simulated leak fractions."""
    x = np.arange(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    ax.bar(x - width, [r.published_percent / 100 for r in rows], width,
           label="published", color="lightgray", edgecolor="gray")
    ax.bar(x, [r.analytic for r in rows], width, label="closed form",
           color="tab:blue")
    simulated = [r.simulated if r.simulated is not None else 0.0 for r in rows]
    errs = [r.sigma if r.sigma is not None else 0.0 for r in rows]
    ax.bar(x + width, simulated, width, yerr=errs, capsize=4,
           label="simulated", color="tab:orange")
    ax.set_xticks(x)
    ax.set_xticklabels([r.label.replace(", ", "\n") for r in rows], fontsize=8)
    ax.set_ylabel("fraction of detected bits held by Eve")
    ax.set_title("published leak fractions, recomputed and simulated")
    ax.legend(fontsize=9)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(report: SessionReport, stem: str | Path) -> list[Path]:
    """Write the standard figure set for a simulated session."""
    stem = Path(stem)
    mark = loss_db_from_transmittance(report.config.channel)
    return [
        yield_consistency_figure(report, stem.with_name(stem.name + "_yields.png")),
        leak_vs_loss_figure(
            report.config.scheme.mixture_pmf(),
            stem.with_name(stem.name + "_leak_curve.png"),
            mark_db=mark,
        ),
    ]


def render_analytic_figures(config: RunConfig, stem: str | Path) -> list[Path]:
    stem = Path(stem)
    mark = loss_db_from_transmittance(config.channel)
    return [
        leak_vs_loss_figure(
            config.scheme.mixture_pmf(),
            stem.with_name(stem.name + "_leak_curve.png"),
            mark_db=mark,
        )
    ]


def render_reference_figures(rows: list[ReferenceRow], stem: str | Path) -> list[Path]:
    stem = Path(stem)
    return [reference_figure(rows, stem.with_name(stem.name + "_comparison.png"))]
