"""Session-level protocol simulation: yields, sifting, and consistency checks.

A session sends a fixed number of pulses through one channel configuration,
keeps per-intensity tallies, and then asks the question a decoy-state
analysis would ask: are the observed yields statistically consistent with
an honest lossy channel, and how much of the sifted key does Eve hold?
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .analytics import DecoyScheme, LeakAnalytics, detected_fraction, leak_analytics
from .engine import AttackStrategy, DetectorModel, iter_trial_batches
from .errors import InvalidParameterError
from .photon_stats import Transmittance, as_transmittance
from .stats import two_sided_alpha, two_sided_critical_z

log = logging.getLogger(__name__)

DEFAULT_Z_CRITICAL = 4.0


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to run and judge one simulated session."""

    scheme: DecoyScheme
    channel: Transmittance
    detector: DetectorModel
    attack: AttackStrategy
    pulses: int
    seed: int
    z_critical: float = DEFAULT_Z_CRITICAL
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "channel", as_transmittance(self.channel))
        object.__setattr__(self, "detector", DetectorModel(self.detector))
        if self.pulses < 1:
            raise InvalidParameterError(f"pulses must be >= 1, got {self.pulses!r}")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be >= 0, got {self.seed!r}")
        if self.z_critical <= 0.0:
            raise InvalidParameterError(
                f"z_critical must be > 0, got {self.z_critical!r}"
            )
        if self.workers < 1:
            raise InvalidParameterError(f"workers must be >= 1, got {self.workers!r}")


@dataclass(frozen=True)
class IntensityStats:
    """Observed and expected statistics for one intensity setting.

    qber and leak_fraction are None when no bits were sifted at this
    intensity; that is a reportable outcome, not an error.
    """

    index: int
    mean: float
    weight: float
    pulses: int
    detections: int
    observed_yield: float
    expected_yield: float
    z: float | None
    sifted: int
    errors: int
    qber: float | None
    eve_known: int
    leak_fraction: float | None


class ConsistencyResult(NamedTuple):
    """Outcome of the per-intensity yield test against honest expectations."""

    passed: bool
    z_scores: tuple[float | None, ...]
    z_critical: float


class LeakAccount(NamedTuple):
    """Empirical sifted-key leak next to its closed-form prediction."""

    empirical: float | None
    analytic: float
    sigma: float | None
    sifted: int


@dataclass(frozen=True)
class SessionReport:
    """Aggregated result of one session."""

    config: SessionConfig
    per_intensity: tuple[IntensityStats, ...]
    pulses: int
    detections: int
    sifted: int
    errors: int
    eve_known: int
    qber: float | None
    leak_fraction: float | None
    consistency: ConsistencyResult
    analytics: LeakAnalytics
    elapsed_seconds: float


def run_session(config: SessionConfig) -> SessionReport:
    """Simulate one session and aggregate it into a report.

    Pulses are streamed in chunks, so memory stays flat regardless of
    session length.
    """
    start = time.perf_counter()
    k = len(config.scheme.intensities)
    sent = np.zeros(k, dtype=np.int64)
    detections = np.zeros(k, dtype=np.int64)
    sifted = np.zeros(k, dtype=np.int64)
    errors = np.zeros(k, dtype=np.int64)
    eve_known = np.zeros(k, dtype=np.int64)
    for batch in iter_trial_batches(
        config.scheme,
        config.channel,
        config.detector,
        config.attack,
        config.pulses,
        config.seed,
        config.workers,
    ):
        idx = batch.intensity_index
        sent += np.bincount(idx, minlength=k)
        detected = batch.bob_registered >= 1
        detections += np.bincount(idx[detected], minlength=k)
        s = batch.sifted
        sifted += np.bincount(idx[s], minlength=k)
        errors += np.bincount(idx[s & batch.bit_error], minlength=k)
        eve_known += np.bincount(idx[s & batch.eve_knows_bit], minlength=k)
    elapsed = time.perf_counter() - start

    eta = config.channel.eta
    per_intensity = []
    for i, (mean, weight) in enumerate(config.scheme.intensities):
        expected = detected_fraction(config.scheme.pmfs[i], eta).total
        n_i, d_i, s_i = int(sent[i]), int(detections[i]), int(sifted[i])
        per_intensity.append(
            IntensityStats(
                index=i,
                mean=mean,
                weight=weight,
                pulses=n_i,
                detections=d_i,
                observed_yield=d_i / n_i if n_i else math.nan,
                expected_yield=expected,
                z=_yield_z(d_i, n_i, expected),
                sifted=s_i,
                errors=int(errors[i]),
                qber=int(errors[i]) / s_i if s_i else None,
                eve_known=int(eve_known[i]),
                leak_fraction=int(eve_known[i]) / s_i if s_i else None,
            )
        )
    per_intensity = tuple(per_intensity)

    sifted_total = int(sifted.sum())
    errors_total = int(errors.sum())
    eve_total = int(eve_known.sum())
    return SessionReport(
        config=config,
        per_intensity=per_intensity,
        pulses=int(sent.sum()),
        detections=int(detections.sum()),
        sifted=sifted_total,
        errors=errors_total,
        eve_known=eve_total,
        qber=errors_total / sifted_total if sifted_total else None,
        leak_fraction=eve_total / sifted_total if sifted_total else None,
        consistency=_consistency(per_intensity, config.z_critical, False),
        analytics=leak_analytics(config.scheme.mixture_pmf(), eta),
        elapsed_seconds=elapsed,
    )


def _yield_z(detections: int, pulses: int, expected: float) -> float | None:
    if pulses == 0:
        return None
    sigma = math.sqrt(expected * (1.0 - expected) / pulses)
    if sigma == 0.0:
        return None
    return (detections / pulses - expected) / sigma


def _consistency(
    per_intensity: Sequence[IntensityStats], critical: float, bonferroni: bool
) -> ConsistencyResult:
    usable = [s for s in per_intensity if s.z is not None]
    if bonferroni and usable:
        critical = two_sided_critical_z(two_sided_alpha(critical) / len(usable))
    z_scores = []
    for stat in per_intensity:
        if stat.z is None:
            log.warning(
                "intensity %g sent no pulses; skipped in consistency test", stat.mean
            )
        z_scores.append(stat.z)
    passed = all(abs(z) < critical for z in z_scores if z is not None)
    return ConsistencyResult(
        passed=passed, z_scores=tuple(z_scores), z_critical=critical
    )


def decoy_consistency_test(
    report: SessionReport,
    z_critical: float | None = None,
    bonferroni: bool = False,
) -> ConsistencyResult:
    """Check per-intensity yields against the honest-channel expectation.

    Each intensity contributes z = (observed - expected) / sigma with the
    binomial sigma of the expected yield.  The session passes when every
    usable |z| stays below the critical value.  Intensities that sent no
    pulses are skipped with a warning.  bonferroni widens the critical
    value so the family-wise false-alarm rate matches the single-test
    one; by default each intensity is tested at the raw threshold.
    """
    critical = report.config.z_critical if z_critical is None else float(z_critical)
    if critical <= 0.0:
        raise InvalidParameterError(f"z_critical must be > 0, got {z_critical!r}")
    return _consistency(report.per_intensity, critical, bonferroni)


def leak_accounting(report: SessionReport) -> LeakAccount:
    """Compare the sifted-key leak against its closed-form prediction.

    The analytic value is the mixture leak for the session's source and
    channel under the session's attack assumptions; sigma is the binomial
    standard error of the empirical fraction at the analytic rate.
    """
    attack = report.config.attack
    detector = attack.detector_assumption or report.config.detector
    analytic = report.analytics.leak_threshold
    if detector is DetectorModel.PNR:
        analytic = report.analytics.leak_pnr
    if report.sifted == 0:
        return LeakAccount(empirical=None, analytic=analytic, sigma=None, sifted=0)
    sigma = math.sqrt(analytic * (1.0 - analytic) / report.sifted)
    return LeakAccount(
        empirical=report.eve_known / report.sifted,
        analytic=analytic,
        sigma=sigma,
        sifted=report.sifted,
    )
