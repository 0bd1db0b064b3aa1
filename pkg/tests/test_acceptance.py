"""End-to-end acceptance checks for the attack calculator and simulator.

Each check records one PASS/FAIL line carrying the measured value and the
required range, then asserts the same condition.  The lines are printed
inline and again in a summary section after the run, so the verdicts stay
visible under pytest's output capture.
"""

import math
import time

import numpy as np
import pytest

from pnsim.analytics import (
    DecoyScheme,
    asymptotic_leak,
    detected_fraction,
    naive_pns_leak,
    pnr_eve_numerator,
    spns_leak,
)
from pnsim.engine import AttackStrategy, run_trials
from pnsim.photon_stats import (
    compound_thinned_pmf,
    point_mass,
    poisson_pmf,
    summarize,
    transmittance_from_db,
)
from pnsim.session import SessionConfig, run_session
from pnsim.stats import chi_square_gof

import conftest
import oracles

MEAN_P06 = -math.log(0.6)
ETA_4DB = transmittance_from_db(4.0).eta
ETA_10DB = transmittance_from_db(10.0).eta
LEAK_10DB = 0.3845447655519826  # closed form for the 10 dB operating point

SCHEME3 = [(0.5, 0.7), (0.1, 0.2), (0.002, 0.1)]
WORKERS = 4

MU_GRID = [0.05, 0.2875, 0.525, 0.7625, 1.0]
ETA_GRID = [0.01, 0.2325, 0.455, 0.6775, 0.9]


def _verdict(ok: bool, name: str, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


def _session(scheme_pairs, eta, attack, pulses, seed):
    return run_session(
        SessionConfig(
            scheme=DecoyScheme.poisson(scheme_pairs),
            channel=eta,
            detector="threshold",
            attack=attack,
            pulses=pulses,
            seed=seed,
            workers=WORKERS,
        )
    )


def test_naive_leak_at_mean_half():
    """Single-photon-to-multi-photon ratio at mean 0.5, evaluated fast."""
    naive_pns_leak(*summarize(poisson_pmf(0.5))[1:])  # warm up
    start = time.perf_counter()
    _, p1, pm = summarize(poisson_pmf(0.5))
    value = naive_pns_leak(p1, pm)
    elapsed = time.perf_counter() - start
    ok = abs(value - 0.2292) <= 0.001 and elapsed < 1e-3
    _verdict(
        ok,
        "naive-leak-mean-0.5",
        f"measured {value:.6f}, expected 0.2292 +/- 0.001, {elapsed * 1e6:.0f} us",
    )
    assert abs(value - 0.2292) <= 0.001
    assert elapsed < 1e-3


def test_detected_leak_at_4db():
    value = spns_leak(poisson_pmf(MEAN_P06), ETA_4DB, "threshold")
    ok = abs(value - 0.337) <= 0.002
    _verdict(ok, "leak-4dB-threshold", f"measured {value:.6f}, expected 0.337 +/- 0.002")
    assert ok


def test_detected_leak_at_10db():
    value = spns_leak(poisson_pmf(MEAN_P06), ETA_10DB, "threshold")
    ok = abs(value - 0.384) <= 0.002
    _verdict(ok, "leak-10dB-threshold", f"measured {value:.6f}, expected 0.384 +/- 0.002")
    assert ok


def test_deep_loss_limit():
    pmf = poisson_pmf(MEAN_P06)
    limit = asymptotic_leak(pmf)
    at_tiny_eta = spns_leak(pmf, 1e-6, "threshold")
    gap = abs(at_tiny_eta - limit)
    ok = abs(limit - 0.400) <= 0.001 and gap <= 1e-4
    _verdict(
        ok,
        "deep-loss-limit",
        f"limit {limit:.6f} (expected 0.400 +/- 0.001), "
        f"leak at transmittance 1e-6 differs by {gap:.2e} (allowed 1e-4)",
    )
    assert abs(limit - 0.400) <= 0.001
    assert gap <= 1e-4


def test_simulation_matches_closed_form():
    """A million-pulse run lands within 4 standard errors of the formula."""
    start = time.perf_counter()
    report = _session(
        [(0.5108, 1.0)], 0.1, AttackStrategy.spns("threshold"), 10**6, seed=500
    )
    elapsed = time.perf_counter() - start
    se = math.sqrt(LEAK_10DB * (1.0 - LEAK_10DB) / report.sifted)
    deviation = abs(report.leak_fraction - LEAK_10DB)
    ok = deviation < 4 * se and elapsed < 10.0
    _verdict(
        ok,
        "simulated-leak-vs-closed-form",
        f"measured {report.leak_fraction:.6f}, expected {LEAK_10DB:.6f} "
        f"+/- {4 * se:.6f} (4 se), {elapsed:.1f} s",
    )
    assert deviation < 4 * se
    assert elapsed < 10.0


def test_attack_introduces_no_errors():
    report = _session(SCHEME3, 0.1, AttackStrategy.spns("threshold"), 10**7, seed=6)
    ok = report.errors == 0
    _verdict(
        ok,
        "zero-qber",
        f"measured {report.errors} bit errors over 10^7 pulses "
        f"({report.sifted} sifted), expected exactly 0",
    )
    assert report.errors == 0


def test_attack_evades_decoy_yield_test():
    """Regenerating attacker passes the per-intensity yield check that
    catches the blocking attacker, across 20 seeded sessions each."""
    seeds = range(1000, 1020)
    spns_passed = 0
    blocker_failed = 0
    for seed in seeds:
        spns = _session(SCHEME3, 0.1, AttackStrategy.spns("threshold"), 10**7, seed)
        spns_passed += spns.consistency.passed
        blocked = _session(SCHEME3, 0.1, AttackStrategy.original_pns(), 10**7, seed)
        blocker_failed += not blocked.consistency.passed
    need = math.ceil(0.99 * len(seeds))
    ok = spns_passed >= need and blocker_failed == len(seeds)
    _verdict(
        ok,
        "decoy-evasion",
        f"regenerating attack passed {spns_passed}/20 (need >= {need}), "
        f"blocking attack failed {blocker_failed}/20 (need 20)",
    )
    assert spns_passed >= need
    assert blocker_failed == len(seeds)


def test_regenerated_counts_match_honest_statistics():
    """Bob's photon-count histogram under the counting-aware attack is
    statistically indistinguishable from the honest thinned channel."""
    pmf = poisson_pmf(MEAN_P06)
    expected = compound_thinned_pmf(pmf, ETA_4DB)
    out = run_trials(
        pmf, ETA_4DB, "pnr", AttackStrategy.spns("pnr"), 10**6, seed=800, workers=WORKERS
    )
    counts = np.bincount(out.bob_registered, minlength=expected.size)
    got = chi_square_gof(counts, expected)
    ok = got.pvalue >= 0.001
    _verdict(
        ok,
        "count-histogram-indistinguishable",
        f"chi-square p = {got.pvalue:.3f} over {got.bins} bins, need >= 0.001",
    )
    assert got.pvalue >= 0.001


def test_closed_forms_match_series_oracle():
    """Detection and leak building blocks agree with brute-force series
    summation across a 5x5 grid of source means and transmittances."""
    worst = 0.0
    for mu in MU_GRID:
        pmf = poisson_pmf(mu)
        for eta in ETA_GRID:
            got = detected_fraction(pmf, eta)
            worst = max(worst, abs(got.total - oracles.detected_total(mu, eta)))
            worst = max(
                worst, abs(got.from_multi - oracles.detected_from_multi(mu, eta))
            )
            worst = max(
                worst, abs(pnr_eve_numerator(pmf, eta) - oracles.pnr_numerator(mu, eta))
            )
    ok = worst <= 1e-10
    _verdict(
        ok,
        "series-oracle-agreement",
        f"max |difference| {worst:.2e} over 5x5 grid, allowed 1e-10",
    )
    assert worst <= 1e-10


def test_intercept_resend_error_rate():
    """Full interception of single-photon pulses reproduces the exact
    enumeration: QBER 1/4 on the sifted key."""
    exact_qber, exact_known = oracles.intercept_resend_sifted()
    assert float(exact_qber) == 0.25
    assert float(exact_known) == 0.5
    out = run_trials(
        point_mass(1),
        1.0,
        "threshold",
        AttackStrategy(variant="none", intercept_fraction=1.0),
        10**6,
        seed=900,
        workers=WORKERS,
    )
    sifted = out.sifted
    qber = float(out.bit_error[sifted].mean())
    sigma = math.sqrt(0.25 * 0.75 / sifted.sum())
    deviation = abs(qber - float(exact_qber))
    ok = deviation < 4 * sigma
    _verdict(
        ok,
        "intercept-resend-qber",
        f"measured {qber:.5f}, expected 0.25 +/- {4 * sigma:.5f} (4 sigma)",
    )
    assert deviation < 4 * sigma
