"""Closed-form attack analytics for multi-photon leakage.

Everything here is deterministic arithmetic over truncated photon-number
distributions: the fraction of key material an eavesdropper can hold after
splitting multi-photon pulses, the detection statistics Bob would see, and
the deletion schedule an eavesdropper needs to keep per-intensity yields
consistent with an honest lossy channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    DegenerateSourceError,
    InvalidParameterError,
    UndefinedPosteriorError,
)
from .photon_stats import (
    DEFAULT_TAIL_TOLERANCE,
    PhotonPmf,
    RandomStream,
    Transmittance,
    as_transmittance,
    poisson_pmf,
    summarize,
)


class Intensity(NamedTuple):
    """One decoy setting: mean photon number and emission probability."""

    mean: float
    weight: float


@dataclass(frozen=True)
class DecoyScheme:
    """A mixture of source intensities with their emission weights.

    intensities[i] gives the label mean and weight alpha_i of setting i;
    pmfs[i] is the matching photon-number distribution.  Weights must sum
    to one and means must be distinct, otherwise the settings would be
    indistinguishable in yield statistics.
    """

    intensities: tuple[Intensity, ...]
    pmfs: tuple[PhotonPmf, ...]

    def __post_init__(self) -> None:
        if not self.intensities:
            raise InvalidParameterError("scheme needs at least one intensity")
        if len(self.intensities) != len(self.pmfs):
            raise InvalidParameterError("intensities and pmfs must align")
        entries = tuple(Intensity(float(m), float(w)) for m, w in self.intensities)
        for mean, weight in entries:
            if not math.isfinite(mean) or mean <= 0.0:
                raise InvalidParameterError(f"intensity mean must be > 0, got {mean!r}")
            if not math.isfinite(weight) or weight <= 0.0:
                raise InvalidParameterError(
                    f"intensity weight must be > 0, got {weight!r}"
                )
        means = [m for m, _ in entries]
        if len(set(means)) != len(means):
            raise InvalidParameterError(f"intensity means must be distinct: {means}")
        total = math.fsum(w for _, w in entries)
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"intensity weights sum to {total!r}, not 1")
        object.__setattr__(self, "intensities", entries)
        object.__setattr__(self, "pmfs", tuple(self.pmfs))

    @classmethod
    def poisson(
        cls,
        settings: Iterable[tuple[float, float]],
        tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    ) -> "DecoyScheme":
        """Build a scheme of Poisson sources from (mean, weight) pairs."""
        pairs = [(float(m), float(w)) for m, w in settings]
        pmfs = tuple(poisson_pmf(m, tail_tolerance) for m, _ in pairs)
        return cls(tuple(Intensity(m, w) for m, w in pairs), pmfs)

    @property
    def means(self) -> np.ndarray:
        return np.array([i.mean for i in self.intensities])

    @property
    def weights(self) -> np.ndarray:
        return np.array([i.weight for i in self.intensities])

    def mixture_pmf(self) -> PhotonPmf:
        """Weight-averaged photon-number distribution of the whole source."""
        if len(self.pmfs) == 1:
            return self.pmfs[0]
        size = max(p.n_max for p in self.pmfs) + 1
        probs = np.zeros(size)
        tail = 0.0
        for (_, weight), pmf in zip(self.intensities, self.pmfs):
            probs[: pmf.n_max + 1] += weight * pmf.probs
            tail += weight * pmf.tail_mass
        tolerance = max(p.tail_tolerance for p in self.pmfs)
        return PhotonPmf(probs=probs, tail_mass=tail, tail_tolerance=tolerance)


class DetectedFraction(NamedTuple):
    """Per-pulse detection probability split by photon number.

    total is p1 * eta plus the multi-photon part; from_multi is the
    probability that a pulse with n >= 2 photons delivers at least one
    photon, sum of p_n * (1 - (1 - eta)^n) over n >= 2.  Vacuum never
    fires since detectors here are noiseless.
    """

    total: float
    from_multi: float


class CompromiseThreshold(NamedTuple):
    """Channel transmittance below which splitting covers all detections.

    eta_star is min(1, pm / p1); total is True when no transmittance in
    (0, 1] escapes, i.e. the multi-photon mass already dominates.
    """

    eta_star: float
    total: bool


def naive_pns_leak(p1: float, pm: float) -> float:
    """Leak fraction when every multi-photon pulse is split and delivered.

    Equals pm / (p1 + pm): with a lossless forwarding channel all single
    and multi-photon pulses arrive, and Eve holds a copy of every
    multi-photon bit.
    """
    if not (math.isfinite(p1) and math.isfinite(pm)) or p1 < 0.0 or pm < 0.0:
        raise InvalidParameterError(f"p1 and pm must be >= 0, got {p1!r}, {pm!r}")
    if p1 + pm == 0.0:
        raise DegenerateSourceError("source emits neither single nor multi photons")
    return pm / (p1 + pm)


def detected_fraction(pmf: PhotonPmf, eta: Transmittance | float) -> DetectedFraction:
    """Detection probability of an honest lossy channel, split by origin."""
    e = as_transmittance(eta).eta
    loss = 1.0 - e
    terms = [
        float(pmf.probs[n]) * (1.0 - loss**n) for n in range(2, pmf.n_max + 1)
    ]
    from_multi = math.fsum(terms)
    p1 = float(pmf.probs[1]) if pmf.n_max >= 1 else 0.0
    return DetectedFraction(total=p1 * e + from_multi, from_multi=from_multi)


def pnr_eve_numerator(pmf: PhotonPmf, eta: Transmittance | float) -> float:
    """Detected multi-photon mass on which Eve can keep a photon unnoticed.

    Against a photon-number-resolving receiver Eve must forward every
    surviving photon, so she only holds one when at least one photon was
    lost: from_multi minus the all-survive mass sum of p_n * eta^n.
    """
    e = as_transmittance(eta).eta
    all_survive = math.fsum(
        float(pmf.probs[n]) * e**n for n in range(2, pmf.n_max + 1)
    )
    return detected_fraction(pmf, e).from_multi - all_survive


def spns_leak(
    pmf: PhotonPmf, eta: Transmittance | float, detector: str = "threshold"
) -> float:
    """Fraction of detected bits Eve holds while mimicking channel loss.

    The attack regenerates the channel's binomial loss, so Bob's yield
    and error rate match the honest channel exactly.  Against threshold
    detectors every detected multi-photon pulse leaks; against
    photon-number-resolving detectors only those with at least one
    photon lost do.
    """
    kind = getattr(detector, "value", detector)
    if kind not in ("threshold", "pnr"):
        raise InvalidParameterError(f"unknown detector model: {detector!r}")
    e = as_transmittance(eta).eta
    total, from_multi = detected_fraction(pmf, e)
    if total == 0.0:
        raise DegenerateSourceError("no detections at this transmittance")
    numerator = from_multi if kind == "threshold" else pnr_eve_numerator(pmf, e)
    return numerator / total


def asymptotic_leak(pmf: PhotonPmf) -> float:
    """Deep-loss limit of the leak fraction.

    As eta tends to zero each detection traces back to one surviving
    photon, so intensities weight by photon count: the limit is
    sum(n * p_n, n >= 2) / (p1 + sum(n * p_n, n >= 2)).  For a Poisson
    source this equals 1 - p0.
    """
    p1 = float(pmf.probs[1]) if pmf.n_max >= 1 else 0.0
    multi_weighted = math.fsum(
        n * float(pmf.probs[n]) for n in range(2, pmf.n_max + 1)
    )
    if p1 + multi_weighted == 0.0:
        raise DegenerateSourceError("source emits neither single nor multi photons")
    return multi_weighted / (p1 + multi_weighted)


def compromise_threshold(pmf: PhotonPmf) -> CompromiseThreshold:
    """Transmittance at which multi-photon detections can cover all of Bob's.

    Below eta_star the eavesdropper needs no single-photon pulses at all:
    blocking every single still leaves enough multi-photon detections to
    reproduce the expected yield.
    """
    p0, p1, pm = summarize(pmf)
    del p0
    if p1 + pm == 0.0:
        raise DegenerateSourceError("source emits neither single nor multi photons")
    if p1 == 0.0 or pm >= p1:
        return CompromiseThreshold(eta_star=1.0, total=True)
    return CompromiseThreshold(eta_star=pm / p1, total=False)


@dataclass(frozen=True)
class LeakAnalytics:
    """All closed-form leak quantities for one source and channel."""

    naive_leak: float
    detected_total: float
    detected_from_multi: float
    pnr_numerator: float
    leak_threshold: float
    leak_pnr: float
    asymptotic: float
    compromise_eta: float
    compromise_total: bool


def leak_analytics(pmf: PhotonPmf, eta: Transmittance | float) -> LeakAnalytics:
    """Evaluate every closed-form quantity at one (source, channel) point."""
    e = as_transmittance(eta).eta
    _, p1, pm = summarize(pmf)
    total, from_multi = detected_fraction(pmf, e)
    threshold = compromise_threshold(pmf)
    return LeakAnalytics(
        naive_leak=naive_pns_leak(p1, pm),
        detected_total=total,
        detected_from_multi=from_multi,
        pnr_numerator=pnr_eve_numerator(pmf, e),
        leak_threshold=spns_leak(pmf, e, "threshold"),
        leak_pnr=spns_leak(pmf, e, "pnr"),
        asymptotic=asymptotic_leak(pmf),
        compromise_eta=threshold.eta_star,
        compromise_total=threshold.total,
    )


def decoy_posterior(scheme: DecoyScheme, n: int) -> np.ndarray:
    """Probability of each intensity setting given an emitted photon number.

    Entry i is weight_i * p_n(i) normalised over the scheme.  Photon
    numbers beyond an intensity's truncated support contribute zero mass
    there.
    """
    if int(n) != n or n < 0:
        raise InvalidParameterError(f"photon number must be an integer >= 0, got {n!r}")
    n = int(n)
    joint = np.array(
        [
            weight * (float(pmf.probs[n]) if n <= pmf.n_max else 0.0)
            for (_, weight), pmf in zip(scheme.intensities, scheme.pmfs)
        ]
    )
    total = joint.sum()
    if total <= 0.0:
        raise UndefinedPosteriorError(
            f"no intensity in the scheme can emit n={n} photons"
        )
    return joint / total


@dataclass(frozen=True, eq=False)
class DeletionPolicy:
    """Photon-number-dependent deletion schedule for yield mimicry.

    delete_prob[n] is the probability of dropping a pulse that emitted n
    photons; entries beyond the table mean keep always.  forward_eta is
    the transmittance of the eavesdropper's regeneration channel applied
    to kept pulses (1.0 means lossless delivery of one photon).
    achieved_yields are the per-intensity detection probabilities under
    the policy, residual their worst absolute miss of target_yields.
    """

    delete_prob: np.ndarray
    forward_eta: float
    target_yields: np.ndarray
    achieved_yields: np.ndarray
    residual: float
    tolerance: float = 1e-9

    def __post_init__(self) -> None:
        table = np.asarray(self.delete_prob, dtype=float).copy()
        if table.ndim != 1 or table.size == 0:
            raise InvalidParameterError("delete_prob must be a non-empty 1-d array")
        if np.any(~np.isfinite(table)) or np.any((table < 0.0) | (table > 1.0)):
            raise InvalidParameterError("delete_prob entries must lie in [0, 1]")
        if not 0.0 < self.forward_eta <= 1.0:
            raise InvalidParameterError(
                f"forward_eta must be in (0, 1], got {self.forward_eta!r}"
            )
        table.setflags(write=False)
        object.__setattr__(self, "delete_prob", table)
        targets = np.asarray(self.target_yields, dtype=float).copy()
        targets.setflags(write=False)
        object.__setattr__(self, "target_yields", targets)
        achieved = np.asarray(self.achieved_yields, dtype=float).copy()
        achieved.setflags(write=False)
        object.__setattr__(self, "achieved_yields", achieved)

    @property
    def feasible(self) -> bool:
        return self.residual <= self.tolerance

    def prob(self, n: int) -> float:
        """Deletion probability for an n-photon emission."""
        if n < 0:
            raise InvalidParameterError(f"photon number must be >= 0, got {n!r}")
        return float(self.delete_prob[n]) if n < self.delete_prob.size else 0.0


def _line_minimum(
    values: np.ndarray,
    slopes: np.ndarray,
    t_lo: float,
    t_hi: float,
) -> tuple[float, float]:
    """Exact minimiser of max_i |values_i - slopes_i * t| over [t_lo, t_hi].

    The objective is convex piecewise linear, so the minimum sits at an
    interval end, a root of one term, or a crossing of two terms; all are
    enumerated directly.
    """
    candidates = [t_lo, t_hi]
    for c, s in zip(values, slopes):
        if s != 0.0:
            candidates.append(c / s)
    k = len(values)
    for i in range(k):
        for j in range(i + 1, k):
            for sign in (1.0, -1.0):
                denom = slopes[i] - sign * slopes[j]
                if denom != 0.0:
                    candidates.append((values[i] - sign * values[j]) / denom)
    best_t, best_val = t_lo, math.inf
    for t in candidates:
        t = min(max(t, t_lo), t_hi)
        val = float(np.max(np.abs(values - slopes * t)))
        # Ties break toward the smaller step so deletion stays minimal.
        if val < best_val - 1e-18 or (val <= best_val + 1e-18 and abs(t) < abs(best_t)):
            best_t, best_val = t, val
    return best_t, best_val


def solve_deletion_policy(
    scheme: DecoyScheme,
    eta: Transmittance | float,
    target_yields: Iterable[float] | None = None,
    *,
    forward_eta: float | None = None,
    max_photon: int = 8,
    tolerance: float = 1e-9,
) -> DeletionPolicy:
    """Find deletion probabilities that reproduce per-intensity yields.

    Minimises the worst absolute yield error over all intensities, with
    delete_prob bounded to [0, 1] for n = 1 .. max_photon and zero
    beyond.  target_yields defaults to the honest lossy-channel yields at
    eta.  forward_eta defaults to lossless forwarding, the regime where
    an exact match is typically possible.  The returned policy carries
    the residual; feasible is True when it is within tolerance.
    """
    e = as_transmittance(eta).eta
    fwd = 1.0 if forward_eta is None else float(forward_eta)
    if not 0.0 < fwd <= 1.0:
        raise InvalidParameterError(f"forward_eta must be in (0, 1], got {forward_eta!r}")
    if max_photon < 1:
        raise InvalidParameterError(f"max_photon must be >= 1, got {max_photon!r}")
    if target_yields is None:
        targets = np.array(
            [detected_fraction(pmf, e).total for pmf in scheme.pmfs]
        )
    else:
        targets = np.asarray(list(target_yields), dtype=float)
        if targets.shape != (len(scheme.pmfs),):
            raise InvalidParameterError(
                f"expected {len(scheme.pmfs)} target yields, got {targets.shape}"
            )

    k = min(max_photon, max(pmf.n_max for pmf in scheme.pmfs))
    k = max(k, 1)
    # Yield of intensity i is affine in the table: base_i - coeff_i @ d.
    coeff = np.zeros((len(scheme.pmfs), k))
    base = np.zeros(len(scheme.pmfs))
    for i, pmf in enumerate(scheme.pmfs):
        deliver = 1.0 - (1.0 - fwd) ** np.arange(pmf.n_max + 1)
        base[i] = math.fsum((pmf.probs[1:] * deliver[1:]).tolist())
        upto = min(k, pmf.n_max)
        coeff[i, :upto] = pmf.probs[1 : upto + 1] * deliver[1 : upto + 1]
    gap = base - targets

    def objective(d: np.ndarray) -> float:
        return float(np.max(np.abs(gap - coeff @ d)))

    # Coordinate moves alone can stall at non-optimal points of a minimax
    # objective, so the search set also carries pairwise diagonals and a
    # deterministic batch of random directions per round.
    fixed_dirs = [np.eye(k)[i] for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            for sign in (1.0, -1.0):
                vec = np.zeros(k)
                vec[i], vec[j] = 1.0, sign
                fixed_dirs.append(vec / math.sqrt(2.0))

    def refine(d: np.ndarray) -> tuple[np.ndarray, float]:
        d = d.copy()
        val = objective(d)
        rng = RandomStream(seed=902245, stream_index=0).generator()
        stalled = 0
        for _ in range(300):
            improved = False
            extra = rng.standard_normal((4 * k, k))
            extra /= np.linalg.norm(extra, axis=1, keepdims=True)
            for vec in list(fixed_dirs) + list(extra):
                with np.errstate(divide="ignore", invalid="ignore"):
                    lo = np.where(vec > 0, -d / vec, (1.0 - d) / vec)
                    hi = np.where(vec > 0, (1.0 - d) / vec, -d / vec)
                lo = float(np.max(np.where(vec == 0.0, -math.inf, lo)))
                hi = float(np.min(np.where(vec == 0.0, math.inf, hi)))
                if not lo < hi:
                    continue
                t, new_val = _line_minimum(gap - coeff @ d, coeff @ vec, lo, hi)
                if new_val < val - 1e-16:
                    d = np.clip(d + t * vec, 0.0, 1.0)
                    val = new_val
                    improved = True
            if val <= tolerance * 1e-3:
                break
            stalled = 0 if improved else stalled + 1
            if stalled >= 3:
                break
        return d, val

    least_squares = np.clip(
        np.linalg.lstsq(coeff, gap, rcond=None)[0], 0.0, 1.0
    )
    starts = [
        np.zeros(k),
        np.ones(k),
        np.clip((1.0 - e) ** np.arange(1, k + 1), 0.0, 1.0),
        least_squares,
    ]
    best_d, best_val = None, math.inf
    for start in starts:
        d, val = refine(start)
        if val < best_val or (
            val <= best_val + 1e-15
            and best_d is not None
            and d.sum() < best_d.sum()
        ):
            best_d, best_val = d, val

    table = np.concatenate([[0.0], best_d])
    achieved = base - coeff @ best_d
    return DeletionPolicy(
        delete_prob=table,
        forward_eta=fwd,
        target_yields=targets,
        achieved_yields=achieved,
        residual=best_val,
        tolerance=tolerance,
    )
