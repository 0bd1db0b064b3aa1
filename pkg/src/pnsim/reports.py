"""Report rendering: per-intensity tables, JSON summaries, reference comparisons.

All numeric formatting is fixed so that identical sessions produce
byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .analytics import DecoyScheme, leak_analytics, naive_pns_leak, summarize
from .config import RunConfig
from .engine import AttackStrategy
from .errors import InvalidParameterError
from .photon_stats import (
    loss_db_from_transmittance,
    poisson_pmf,
    transmittance_from_db,
)
from .session import SessionConfig, SessionReport, leak_accounting, run_session

CSV_COLUMNS = (
    "intensity",
    "pulses",
    "detections",
    "yield",
    "expected_yield",
    "z",
    "sifted",
    "errors",
    "qber",
    "eve_known",
    "leak_fraction",
)

REFERENCE_COLUMNS = (
    "label",
    "mean",
    "transmittance",
    "loss_db",
    "analytic",
    "published_percent",
    "simulated",
    "sigma",
    "trials",
)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def intensity_rows(report: SessionReport) -> list[dict[str, Any]]:
    """Per-intensity statistics keyed by the fixed CSV column names."""
    rows = []
    for stat in report.per_intensity:
        rows.append(
            {
                "intensity": stat.mean,
                "pulses": stat.pulses,
                "detections": stat.detections,
                "yield": stat.observed_yield,
                "expected_yield": stat.expected_yield,
                "z": stat.z,
                "sifted": stat.sifted,
                "errors": stat.errors,
                "qber": stat.qber,
                "eve_known": stat.eve_known,
                "leak_fraction": stat.leak_fraction,
            }
        )
    return rows


def _csv_text(columns: tuple[str, ...], rows: list[dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buffer.getvalue()


def render_intensity_csv(report: SessionReport) -> str:
    return _csv_text(CSV_COLUMNS, intensity_rows(report))


def render_json(report: SessionReport) -> dict[str, Any]:
    """Full session summary as a JSON-compatible dictionary."""
    config = report.config
    account = leak_accounting(report)
    return {
        "config": {
            "source": {
                "intensities": [
                    {"mean": m, "weight": w} for m, w in config.scheme.intensities
                ]
            },
            "transmittance": config.channel.eta,
            "loss_db": loss_db_from_transmittance(config.channel),
            "detector": config.detector.value,
            "attack": _attack_dict(config.attack),
            "pulses": config.pulses,
            "seed": config.seed,
            "z_critical": config.z_critical,
            "workers": config.workers,
        },
        "totals": {
            "pulses": report.pulses,
            "detections": report.detections,
            "sifted": report.sifted,
            "errors": report.errors,
            "qber": report.qber,
            "eve_known": report.eve_known,
            "leak_fraction": report.leak_fraction,
        },
        "per_intensity": intensity_rows(report),
        "consistency": {
            "passed": report.consistency.passed,
            "z_scores": list(report.consistency.z_scores),
            "z_critical": report.consistency.z_critical,
        },
        "analytics": dataclasses.asdict(report.analytics),
        "leak_accounting": {
            "empirical": account.empirical,
            "analytic": account.analytic,
            "sigma": account.sigma,
            "sifted": account.sifted,
        },
        "elapsed_seconds": report.elapsed_seconds,
    }


def _attack_dict(attack: AttackStrategy) -> dict[str, Any]:
    out: dict[str, Any] = {"variant": attack.variant.value}
    if attack.detector_assumption is not None:
        out["detector_assumption"] = attack.detector_assumption.value
    if attack.intercept_fraction:
        out["intercept_fraction"] = attack.intercept_fraction
    if attack.deletion_policy is not None:
        out["deletion"] = {
            "delete_prob": [float(x) for x in attack.deletion_policy.delete_prob[1:]],
            "forward_eta": attack.deletion_policy.forward_eta,
            "residual": attack.deletion_policy.residual,
        }
    return out


def _table(columns: tuple[str, ...], rows: list[dict[str, Any]]) -> list[str]:
    cells = [[_fmt(row[c]) for c in columns] for row in rows]
    widths = [
        max(len(c), *(len(r[i]) for r in cells)) if cells else len(c)
        for i, c in enumerate(columns)
    ]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    for row in cells:
        lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return lines


def render_table(report: SessionReport) -> str:
    """Human-readable session summary."""
    lines = _table(CSV_COLUMNS, intensity_rows(report))
    lines.append("")
    lines.append(
        f"pulses {report.pulses}  detections {report.detections}  "
        f"sifted {report.sifted}  errors {report.errors}"
    )
    lines.append(
        f"qber {_fmt(report.qber) or 'n/a'}  "
        f"leak_fraction {_fmt(report.leak_fraction) or 'n/a'}"
    )
    verdict = "PASS" if report.consistency.passed else "FAIL"
    zs = ", ".join(_fmt(z) or "n/a" for z in report.consistency.z_scores)
    lines.append(
        f"decoy consistency {verdict} (|z| < {_fmt(report.consistency.z_critical)}): "
        f"z = {zs}"
    )
    account = leak_accounting(report)
    if account.empirical is not None:
        lines.append(
            f"leak vs closed form: simulated {_fmt(account.empirical)}  "
            f"analytic {_fmt(account.analytic)}  sigma {_fmt(account.sigma)}"
        )
    a = report.analytics
    lines.append(
        f"analytics: naive {_fmt(a.naive_leak)}  threshold {_fmt(a.leak_threshold)}  "
        f"pnr {_fmt(a.leak_pnr)}  deep-loss {_fmt(a.asymptotic)}  "
        f"compromise_eta {_fmt(a.compromise_eta)}"
    )
    lines.append(f"elapsed {report.elapsed_seconds:.2f} s")
    return "\n".join(lines) + "\n"


ANALYTIC_COLUMNS = (
    "intensity",
    "weight",
    "p0",
    "p1",
    "pm",
    "expected_yield",
    "naive_leak",
    "leak_threshold",
    "leak_pnr",
    "asymptotic",
)


def analytic_rows(config: RunConfig) -> list[dict[str, Any]]:
    """Closed-form quantities per intensity at the configured channel."""
    rows = []
    eta = config.channel.eta
    for (mean, weight), pmf in zip(config.scheme.intensities, config.scheme.pmfs):
        p0, p1, pm = summarize(pmf)
        a = leak_analytics(pmf, eta)
        rows.append(
            {
                "intensity": mean,
                "weight": weight,
                "p0": p0,
                "p1": p1,
                "pm": pm,
                "expected_yield": a.detected_total,
                "naive_leak": a.naive_leak,
                "leak_threshold": a.leak_threshold,
                "leak_pnr": a.leak_pnr,
                "asymptotic": a.asymptotic,
            }
        )
    return rows


def render_analytic_json(config: RunConfig) -> dict[str, Any]:
    mixture = leak_analytics(config.scheme.mixture_pmf(), config.channel.eta)
    return {
        "transmittance": config.channel.eta,
        "loss_db": loss_db_from_transmittance(config.channel),
        "mixture": dataclasses.asdict(mixture),
        "compromise_loss_db": (
            loss_db_from_transmittance(mixture.compromise_eta)
            if mixture.compromise_eta > 0.0
            else None
        ),
        "per_intensity": analytic_rows(config),
    }


def render_analytic_csv(config: RunConfig) -> str:
    return _csv_text(ANALYTIC_COLUMNS, analytic_rows(config))


def render_analytic_table(config: RunConfig) -> str:
    lines = _table(ANALYTIC_COLUMNS, analytic_rows(config))
    mixture = leak_analytics(config.scheme.mixture_pmf(), config.channel.eta)
    lines.append("")
    lines.append(
        f"channel: transmittance {_fmt(config.channel.eta)} "
        f"({_fmt(loss_db_from_transmittance(config.channel))} dB)"
    )
    lines.append(
        f"mixture: naive {_fmt(mixture.naive_leak)}  "
        f"threshold {_fmt(mixture.leak_threshold)}  pnr {_fmt(mixture.leak_pnr)}  "
        f"deep-loss {_fmt(mixture.asymptotic)}"
    )
    compromise_db = (
        f"{_fmt(loss_db_from_transmittance(mixture.compromise_eta))} dB"
        if mixture.compromise_eta > 0.0
        else "unreachable"
    )
    lines.append(
        f"single-photon-free regime below transmittance "
        f"{_fmt(mixture.compromise_eta)} ({compromise_db})"
    )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReferenceRow:
    """One published leak fraction next to its recomputation."""

    label: str
    mean: float
    transmittance: float
    loss_db: float | None
    analytic: float
    published_percent: int
    simulated: float | None
    sigma: float | None
    trials: int


def build_reference_table(
    trials: int = 10**6, seed: int = 7, workers: int = 1
) -> list[ReferenceRow]:
    """Recompute the published leak fractions and confirm them by simulation.

    Four operating points: a lossless link where splitting alone sets the
    leak, two fielded-system loss budgets (4 dB and 10 dB), and the
    deep-loss limit, simulated at 0.001 transmittance since the limit
    itself yields no detections.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials!r}")
    mean_p06 = -math.log(0.6)
    cases = [
        ("lossless link, mean 0.5", 0.5, 1.0, None, 23),
        ("4 dB link, vacuum 0.6", mean_p06, transmittance_from_db(4.0).eta, 4.0, 33),
        ("10 dB link, vacuum 0.6", mean_p06, transmittance_from_db(10.0).eta, 10.0, 38),
        ("deep loss, vacuum 0.6", mean_p06, 1e-3, 30.0, 40),
    ]
    rows = []
    for i, (label, mean, eta, loss_db, published) in enumerate(cases):
        pmf = poisson_pmf(mean)
        if label.startswith("deep"):
            analytic = leak_analytics(pmf, eta).asymptotic
        elif eta == 1.0:
            _, p1, pm = summarize(pmf)
            analytic = naive_pns_leak(p1, pm)
        else:
            analytic = leak_analytics(pmf, eta).leak_threshold
        report = run_session(
            SessionConfig(
                scheme=DecoyScheme.poisson([(mean, 1.0)]),
                channel=eta,
                detector="threshold",
                attack=AttackStrategy.spns("threshold"),
                pulses=trials,
                seed=seed + i,
                workers=workers,
            )
        )
        account = leak_accounting(report)
        rows.append(
            ReferenceRow(
                label=label,
                mean=mean,
                transmittance=eta,
                loss_db=loss_db,
                analytic=analytic,
                published_percent=published,
                simulated=account.empirical,
                sigma=account.sigma,
                trials=trials,
            )
        )
    return rows


def reference_rows(rows: list[ReferenceRow]) -> list[dict[str, Any]]:
    return [
        {
            "label": r.label,
            "mean": r.mean,
            "transmittance": r.transmittance,
            "loss_db": r.loss_db,
            "analytic": r.analytic,
            "published_percent": r.published_percent,
            "simulated": r.simulated,
            "sigma": r.sigma,
            "trials": r.trials,
        }
        for r in rows
    ]


def render_reference_csv(rows: list[ReferenceRow]) -> str:
    return _csv_text(REFERENCE_COLUMNS, reference_rows(rows))


def render_reference_json(rows: list[ReferenceRow]) -> dict[str, Any]:
    return {"reference": reference_rows(rows)}


def render_reference_table(rows: list[ReferenceRow]) -> str:
    lines = _table(REFERENCE_COLUMNS, reference_rows(rows))
    lines.append("")
    lines.append(
        "analytic leak fractions for the published operating points, with "
        "Monte Carlo confirmation"
    )
    return "\n".join(lines) + "\n"


def write_text(text: str, path: str | Path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
