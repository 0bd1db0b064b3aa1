"""Photon-number distributions, channel transmittance, and reproducible sampling.

The emission model is a classical mixture over Fock-diagonal states: a pulse
carries n photons with probability p_n.  A lossy channel acts on such a pulse
as independent Bernoulli survival per photon, which is binomial thinning of
the photon-number distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError

DEFAULT_TAIL_TOLERANCE = 1e-12

# Hard ceiling on truncation length; a mean large enough to hit this is far
# outside the weak-pulse regime this package models.
_MAX_SUPPORT = 4096


@dataclass(frozen=True)
class Transmittance:
    """Single-pass survival probability of one photon, in (0, 1]."""

    eta: float

    def __post_init__(self) -> None:
        eta = float(self.eta)
        if not math.isfinite(eta) or not 0.0 < eta <= 1.0:
            raise InvalidParameterError(
                f"transmittance must be in (0, 1], got {self.eta!r}"
            )
        object.__setattr__(self, "eta", eta)


def as_transmittance(eta: Transmittance | float) -> Transmittance:
    """Coerce a plain float to Transmittance, validating its range."""
    if isinstance(eta, Transmittance):
        return eta
    return Transmittance(float(eta))


def transmittance_from_db(loss_db: float) -> Transmittance:
    """Convert a channel loss in dB to a linear transmittance.

    0 dB maps to 1.0; each 10 dB divides the transmittance by ten.
    Negative loss (gain) is rejected.
    """
    loss = float(loss_db)
    if not math.isfinite(loss) or loss < 0.0:
        raise InvalidParameterError(f"loss_db must be finite and >= 0, got {loss_db!r}")
    return Transmittance(10.0 ** (-loss / 10.0))


def loss_db_from_transmittance(eta: Transmittance | float) -> float:
    """Inverse of transmittance_from_db."""
    return -10.0 * math.log10(as_transmittance(eta).eta)


@dataclass(frozen=True, eq=False)
class PhotonPmf:
    """Truncated photon-number distribution.

    probs[n] is the probability of emitting exactly n photons for
    n = 0 .. n_max.  tail_mass is the probability of every n beyond the
    truncation and is guaranteed to stay below tail_tolerance, so series
    over the support are exact to that tolerance.  poisson_mean records
    the generating mean when the pmf came from a Poisson source; it is
    None for arbitrary distributions.
    """

    probs: np.ndarray
    tail_mass: float
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    poisson_mean: float | None = field(default=None)

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float).copy()
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidParameterError("probs must be a non-empty 1-d array")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0.0):
            raise InvalidParameterError("probs must be finite and non-negative")
        tail = float(self.tail_mass)
        if not 0.0 <= tail < 1.0:
            raise InvalidParameterError(f"tail_mass must be in [0, 1), got {tail!r}")
        if tail > self.tail_tolerance:
            raise InvalidParameterError(
                f"tail_mass {tail:.3e} exceeds tolerance {self.tail_tolerance:.3e}"
            )
        total = math.fsum(probs.tolist()) + tail
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", tail)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @property
    def expected_n(self) -> float:
        """Mean photon number over the truncated support."""
        return float(np.arange(self.probs.size) @ self.probs)

    def __repr__(self) -> str:
        return (
            f"PhotonPmf(n_max={self.n_max}, tail_mass={self.tail_mass:.2e}, "
            f"poisson_mean={self.poisson_mean})"
        )


class SourceSummary(NamedTuple):
    """(p0, p1, pm) split of a photon-number distribution.

    pm is the total multi-photon probability, the sum of p_n for n >= 2.
    """

    p0: float
    p1: float
    pm: float


def poisson_pmf(
    mean: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
) -> PhotonPmf:
    """Poisson photon-number distribution truncated to negligible tail.

    The support is extended until the remaining upper-tail mass drops
    below tail_tolerance.  Terms are the exact Poisson probabilities
    (no renormalisation); the leftover mass is recorded as tail_mass.
    """
    mu = float(mean)
    if not math.isfinite(mu) or mu <= 0.0:
        raise InvalidParameterError(f"mean must be finite and > 0, got {mean!r}")
    if not 0.0 < tail_tolerance <= 1e-6:
        raise InvalidParameterError(
            f"tail_tolerance must be in (0, 1e-6], got {tail_tolerance!r}"
        )
    terms = [math.exp(-mu)]
    while 1.0 - math.fsum(terms) > tail_tolerance:
        n = len(terms)
        if n >= _MAX_SUPPORT:
            raise InvalidParameterError(
                f"mean {mu} needs support beyond {_MAX_SUPPORT} terms"
            )
        terms.append(terms[-1] * mu / n)
    tail = max(0.0, 1.0 - math.fsum(terms))
    return PhotonPmf(
        probs=np.array(terms),
        tail_mass=tail,
        tail_tolerance=tail_tolerance,
        poisson_mean=mu,
    )


def point_mass(n: int) -> PhotonPmf:
    """Distribution that emits exactly n photons every pulse."""
    if int(n) != n or n < 0:
        raise InvalidParameterError(f"photon number must be an integer >= 0, got {n!r}")
    probs = np.zeros(int(n) + 1)
    probs[int(n)] = 1.0
    return PhotonPmf(probs=probs, tail_mass=0.0)


def summarize(pmf: PhotonPmf) -> SourceSummary:
    """Split a distribution into vacuum, single, and multi-photon mass.

    The truncation tail counts toward the multi-photon term, since every
    truncated n is >= 2 for any realistically truncated source.
    """
    p0 = float(pmf.probs[0])
    p1 = float(pmf.probs[1]) if pmf.n_max >= 1 else 0.0
    pm = float(math.fsum(pmf.probs[2:].tolist()) + pmf.tail_mass)
    return SourceSummary(p0, p1, pm)


def binomial_thin_pmf(n: int, eta: Transmittance | float) -> np.ndarray:
    """Distribution of survivors when n photons each pass with probability eta.

    Returns an array of length n + 1 whose entry l is C(n, l) eta^l (1-eta)^(n-l).
    """
    if int(n) != n or n < 0:
        raise InvalidParameterError(f"photon number must be an integer >= 0, got {n!r}")
    p = as_transmittance(eta).eta
    n = int(n)
    out = np.empty(n + 1)
    for l in range(n + 1):
        out[l] = math.comb(n, l) * p**l * (1.0 - p) ** (n - l)
    return out


def compound_thinned_pmf(pmf: PhotonPmf, eta: Transmittance | float) -> np.ndarray:
    """Detected-count distribution after thinning a mixed source.

    Entry l is the probability that l photons survive the channel,
    marginalised over the emission distribution.
    """
    p = as_transmittance(eta).eta
    out = np.zeros(pmf.n_max + 1)
    for n in range(pmf.n_max + 1):
        if pmf.probs[n] > 0.0:
            out[: n + 1] += pmf.probs[n] * binomial_thin_pmf(n, p)
    return out


class RandomStream:
    """Counter-based random stream addressed by (seed, stream_index).

    Streams with distinct indices under the same seed are statistically
    independent, and a given (seed, stream_index) pair always reproduces
    the identical draw sequence.  Backed by Philox with the stream index
    placed in the high counter word, so per-stream draws never collide.
    """

    def __init__(self, seed: int, stream_index: int = 0) -> None:
        if seed < 0 or stream_index < 0:
            raise InvalidParameterError("seed and stream_index must be >= 0")
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        self._generator: np.random.Generator | None = None

    def generator(self) -> np.random.Generator:
        """Live generator for this stream; draws advance its state."""
        if self._generator is None:
            bitgen = np.random.Philox(
                key=self.seed, counter=[0, 0, 0, self.stream_index]
            )
            self._generator = np.random.Generator(bitgen)
        return self._generator

    def reset(self) -> None:
        """Restart the sequence from the beginning of the stream."""
        self._generator = None

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_index={self.stream_index})"


def sample_photon_number(pmf: PhotonPmf, stream: RandomStream) -> int:
    """Draw one photon number by inversion of the cumulative distribution.

    The truncation tail is collapsed onto n_max, an error below the
    distribution's tail tolerance.
    """
    u = stream.generator().random()
    acc = 0.0
    for n in range(pmf.n_max + 1):
        acc += pmf.probs[n]
        if u < acc:
            return n
    return pmf.n_max


def sample_binomial(n: int, eta: Transmittance | float, stream: RandomStream) -> int:
    """Count survivors of n independent Bernoulli(eta) trials."""
    if int(n) != n or n < 0:
        raise InvalidParameterError(f"photon number must be an integer >= 0, got {n!r}")
    p = as_transmittance(eta).eta
    if n == 0:
        return 0
    draws = stream.generator().random(int(n))
    return int(np.count_nonzero(draws < p))
