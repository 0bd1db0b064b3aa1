"""Monte Carlo pulse engine for decoy-state BB84 under channel attacks.

Each trial emits one pulse: an intensity is drawn from the scheme, a photon
number from that intensity's distribution, then the channel (honest loss or
an eavesdropper strategy) decides how many photons reach Bob and what Eve
retains.  Basis choices, sifting, and bit errors follow standard BB84 with
uniform random bases.

Trials are simulated in fixed-size chunks; chunk c draws from the counter
substream (seed, c), and every random variable a chunk may need is drawn in
one fixed order regardless of attack settings.  Results are therefore
bit-identical for a given seed no matter how many workers run, and
independent of which strategy branch consumes which draw.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .analytics import DecoyScheme, DeletionPolicy
from .errors import InvalidParameterError
from .photon_stats import (
    PhotonPmf,
    RandomStream,
    Transmittance,
    as_transmittance,
    sample_binomial,
)

CHUNK_SIZE = 1 << 16


class DetectorModel(str, Enum):
    """Receiver capability: click/no-click, or full photon-number readout."""

    THRESHOLD = "threshold"
    PNR = "pnr"


class AttackVariant(str, Enum):
    NONE = "none"
    ORIGINAL_PNS = "original_pns"
    SPNS = "spns"
    BAYES_DELETE = "bayes_delete"


@dataclass(frozen=True)
class AttackStrategy:
    """What the channel adversary does with each pulse.

    none            honest lossy channel, nobody listens.
    original_pns    block vacuum and singles, keep one photon of every
                    multi-photon pulse and forward the rest losslessly.
    spns            keep a photon only when the channel's own loss already
                    hides it: the forwarded count reproduces binomial
                    thinning exactly, so yields and error rates match an
                    honest channel.  Needs detector_assumption to decide
                    whether surplus photons can be swallowed (threshold)
                    or must be forwarded (pnr).
    bayes_delete    drop pulses with photon-number-dependent probability
                    per deletion_policy, forward kept pulses through a
                    regeneration channel of transmittance forward_eta.

    intercept_fraction overlays intercept-resend on detected pulses where
    Eve holds no photon: she measures in a random basis and resends.
    """

    variant: AttackVariant = AttackVariant.NONE
    detector_assumption: DetectorModel | None = None
    intercept_fraction: float = 0.0
    deletion_policy: DeletionPolicy | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", AttackVariant(self.variant))
        if self.detector_assumption is not None:
            object.__setattr__(
                self, "detector_assumption", DetectorModel(self.detector_assumption)
            )
        f = float(self.intercept_fraction)
        if not 0.0 <= f <= 1.0:
            raise InvalidParameterError(
                f"intercept_fraction must be in [0, 1], got {self.intercept_fraction!r}"
            )
        object.__setattr__(self, "intercept_fraction", f)
        if self.variant is AttackVariant.SPNS and self.detector_assumption is None:
            raise InvalidParameterError(
                "spns needs detector_assumption: the keep rule depends on it"
            )
        if self.variant is AttackVariant.BAYES_DELETE and self.deletion_policy is None:
            raise InvalidParameterError("bayes_delete needs a deletion_policy")
        if self.variant is not AttackVariant.BAYES_DELETE and self.deletion_policy is not None:
            raise InvalidParameterError(
                f"deletion_policy is only meaningful for bayes_delete, not {self.variant.value}"
            )

    @classmethod
    def none(cls) -> "AttackStrategy":
        return cls(variant=AttackVariant.NONE)

    @classmethod
    def original_pns(cls, intercept_fraction: float = 0.0) -> "AttackStrategy":
        return cls(
            variant=AttackVariant.ORIGINAL_PNS, intercept_fraction=intercept_fraction
        )

    @classmethod
    def spns(
        cls,
        detector_assumption: DetectorModel | str,
        intercept_fraction: float = 0.0,
    ) -> "AttackStrategy":
        return cls(
            variant=AttackVariant.SPNS,
            detector_assumption=DetectorModel(detector_assumption),
            intercept_fraction=intercept_fraction,
        )

    @classmethod
    def bayes_delete(
        cls,
        deletion_policy: DeletionPolicy,
        detector_assumption: DetectorModel | str | None = None,
        intercept_fraction: float = 0.0,
    ) -> "AttackStrategy":
        assumption = None if detector_assumption is None else DetectorModel(detector_assumption)
        return cls(
            variant=AttackVariant.BAYES_DELETE,
            detector_assumption=assumption,
            intercept_fraction=intercept_fraction,
            deletion_policy=deletion_policy,
        )


@dataclass(frozen=True)
class PulseOutcome:
    """Complete record of one pulse, from emission to sifting."""

    intensity_index: int
    emitted_n: int
    forwarded_l: int
    bob_registered: int
    alice_basis: int
    alice_bit: int
    bob_basis: int
    bob_bit: int
    sifted: bool
    bit_error: bool
    eve_holds_photon: bool
    eve_intercepted: bool
    eve_knows_bit: bool


_FIELDS = (
    ("intensity_index", np.int16),
    ("emitted_n", np.int16),
    ("forwarded_l", np.int16),
    ("bob_registered", np.int16),
    ("alice_basis", np.int8),
    ("alice_bit", np.int8),
    ("bob_basis", np.int8),
    ("bob_bit", np.int8),
    ("sifted", np.bool_),
    ("bit_error", np.bool_),
    ("eve_holds_photon", np.bool_),
    ("eve_intercepted", np.bool_),
    ("eve_knows_bit", np.bool_),
)


@dataclass(eq=False)
class PulseOutcomes:
    """Column batch of pulse records; bob_bit is -1 where Bob saw nothing."""

    intensity_index: np.ndarray
    emitted_n: np.ndarray
    forwarded_l: np.ndarray
    bob_registered: np.ndarray
    alice_basis: np.ndarray
    alice_bit: np.ndarray
    bob_basis: np.ndarray
    bob_bit: np.ndarray
    sifted: np.ndarray
    bit_error: np.ndarray
    eve_holds_photon: np.ndarray
    eve_intercepted: np.ndarray
    eve_knows_bit: np.ndarray

    def __len__(self) -> int:
        return self.intensity_index.size

    def __getitem__(self, i: int) -> PulseOutcome:
        return PulseOutcome(
            **{name: getattr(self, name)[i].item() for name, _ in _FIELDS}
        )

    def __iter__(self) -> Iterator[PulseOutcome]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def concatenate(cls, batches: "list[PulseOutcomes]") -> "PulseOutcomes":
        if not batches:
            raise InvalidParameterError("nothing to concatenate")
        return cls(
            **{
                name: np.concatenate([getattr(b, name) for b in batches])
                for name, _ in _FIELDS
            }
        )


def apply_none(n: int, eta: Transmittance | float, stream: RandomStream) -> int:
    """Honest channel: forwarded count is binomial thinning of n."""
    return sample_binomial(n, eta, stream)


def apply_original_pns(n: int) -> tuple[int, bool]:
    """Classic splitting: block n <= 1, keep one photon of n >= 2.

    The remaining n - 1 photons travel a lossless substitute channel, so
    the forwarded count is deterministic.
    """
    if n >= 2:
        return n - 1, True
    return 0, False


def apply_spns(
    n: int,
    eta: Transmittance | float,
    detector_assumption: DetectorModel | str,
    stream: RandomStream,
) -> tuple[int, bool]:
    """Splitting disguised as loss: re-create the channel's thinning.

    Draws the number of survivors an honest channel would deliver.  With
    a threshold receiver Eve forwards at most one of them and keeps the
    rest of any multi-photon pulse.  With a photon-number-resolving
    receiver she must forward the full survivor count and only profits
    when at least one photon of a multi-photon pulse was lost.
    """
    assumption = DetectorModel(detector_assumption)
    survivors = sample_binomial(n, eta, stream)
    if assumption is DetectorModel.THRESHOLD:
        return min(survivors, 1), n >= 2
    return survivors, n >= 2 and survivors <= n - 1


def apply_bayes_delete(
    n: int,
    policy: DeletionPolicy,
    stream: RandomStream,
    detector_assumption: DetectorModel | str = DetectorModel.THRESHOLD,
) -> tuple[int, bool, bool]:
    """Deletion stage in front of split-and-regenerate forwarding.

    With probability policy.prob(n) the pulse is dropped outright.
    Surviving pulses pass a regeneration channel of transmittance
    policy.forward_eta and then follow the same keep rule as apply_spns.
    Returns (forwarded, eve_holds, deleted).
    """
    if stream.generator().random() < policy.prob(n):
        return 0, False, True
    forwarded, eve_holds = apply_spns(
        n, policy.forward_eta, detector_assumption, stream
    )
    return forwarded, eve_holds, False


def apply_intercept_resend(
    outcome: PulseOutcome, fraction: float, stream: RandomStream
) -> PulseOutcome:
    """Overlay intercept-resend on a formed outcome.

    Only detected pulses where Eve holds no photon are eligible; each is
    intercepted with the given probability.  Eve measures in a random
    basis and resends her result, so Bob's bit is re-derived against the
    resent state.  Matching bases leak the bit to Eve; mismatched ones
    randomise Bob's sifted bit, the source of the induced error rate.
    """
    if not 0.0 <= fraction <= 1.0:
        raise InvalidParameterError(f"fraction must be in [0, 1], got {fraction!r}")
    g = stream.generator()
    eligible = outcome.bob_registered >= 1 and not outcome.eve_holds_photon
    if not eligible or g.random() >= fraction:
        return outcome
    eve_basis = int(g.integers(0, 2))
    eve_result = outcome.alice_bit if eve_basis == outcome.alice_basis else int(
        g.integers(0, 2)
    )
    bob_bit = eve_result if outcome.bob_basis == eve_basis else int(g.integers(0, 2))
    bit_error = outcome.sifted and bob_bit != outcome.alice_bit
    return PulseOutcome(
        intensity_index=outcome.intensity_index,
        emitted_n=outcome.emitted_n,
        forwarded_l=outcome.forwarded_l,
        bob_registered=outcome.bob_registered,
        alice_basis=outcome.alice_basis,
        alice_bit=outcome.alice_bit,
        bob_basis=outcome.bob_basis,
        bob_bit=bob_bit,
        sifted=outcome.sifted,
        bit_error=bit_error,
        eve_holds_photon=outcome.eve_holds_photon,
        eve_intercepted=True,
        eve_knows_bit=outcome.eve_knows_bit
        or eve_basis == outcome.alice_basis,
    )


def _as_groups(
    source: PhotonPmf | DecoyScheme,
) -> tuple[np.ndarray, tuple[PhotonPmf, ...]]:
    if isinstance(source, PhotonPmf):
        return np.array([1.0]), (source,)
    if isinstance(source, DecoyScheme):
        return source.weights, source.pmfs
    raise InvalidParameterError(f"source must be PhotonPmf or DecoyScheme, got {source!r}")


def _simulate_chunk(
    weight_cum: np.ndarray,
    pmf_cums: list[np.ndarray],
    eta: float,
    detector: DetectorModel,
    attack: AttackStrategy,
    delete_table: np.ndarray,
    seed: int,
    chunk_index: int,
    size: int,
) -> PulseOutcomes:
    """Simulate one chunk on its own substream with a fixed draw layout.

    The layout below never varies with the attack, so identical seeds
    give identical pulses whichever strategy or worker count is used.
    """
    g = RandomStream(seed, chunk_index).generator()
    m = size
    u_intensity = g.random(m)
    u_photon = g.random(m)
    alice_basis = g.integers(0, 2, size=m, dtype=np.int8)
    alice_bit = g.integers(0, 2, size=m, dtype=np.int8)
    bob_basis = g.integers(0, 2, size=m, dtype=np.int8)
    u_delete = g.random(m)
    u_intercept = g.random(m)
    eve_basis = g.integers(0, 2, size=m, dtype=np.int8)
    eve_coin = g.integers(0, 2, size=m, dtype=np.int8)
    bob_coin = g.integers(0, 2, size=m, dtype=np.int8)

    idx = np.searchsorted(weight_cum, u_intensity, side="right")
    idx = np.minimum(idx, len(pmf_cums) - 1).astype(np.int16)
    n = np.zeros(m, dtype=np.int16)
    for gi, cum in enumerate(pmf_cums):
        mask = idx == gi
        if mask.any():
            drawn = np.searchsorted(cum, u_photon[mask], side="right")
            n[mask] = np.minimum(drawn, cum.size - 1)

    # One survival matrix serves both the honest channel and any
    # regeneration channel; only the comparison probability differs.
    max_n = int(n.max(initial=0))
    if max_n > 0:
        u_survival = g.random((m, max_n))
        in_pulse = np.arange(max_n, dtype=np.int16)[None, :] < n[:, None]

        def survivors(p: float) -> np.ndarray:
            return ((u_survival < p) & in_pulse).sum(axis=1).astype(np.int16)

    else:

        def survivors(p: float) -> np.ndarray:
            return np.zeros(m, dtype=np.int16)

    variant = attack.variant
    multi = n >= 2
    assumption = attack.detector_assumption or detector
    if variant is AttackVariant.NONE:
        forwarded = survivors(eta)
        eve_holds = np.zeros(m, dtype=bool)
    elif variant is AttackVariant.ORIGINAL_PNS:
        forwarded = np.where(multi, n - 1, 0).astype(np.int16)
        eve_holds = multi.copy()
    elif variant is AttackVariant.SPNS:
        drawn = survivors(eta)
        if assumption is DetectorModel.THRESHOLD:
            forwarded = np.minimum(drawn, 1)
            eve_holds = multi.copy()
        else:
            forwarded = drawn
            eve_holds = multi & (drawn <= n - 1)
    else:  # AttackVariant.BAYES_DELETE
        policy = attack.deletion_policy
        assert policy is not None
        deleted = u_delete < delete_table[np.minimum(n, delete_table.size - 1)]
        drawn = survivors(policy.forward_eta)
        if assumption is DetectorModel.THRESHOLD:
            forwarded = np.where(deleted, 0, np.minimum(drawn, 1)).astype(np.int16)
            eve_holds = multi & ~deleted
        else:
            forwarded = np.where(deleted, 0, drawn).astype(np.int16)
            eve_holds = multi & (drawn <= n - 1) & ~deleted

    detected = forwarded >= 1
    registered = (
        forwarded if detector is DetectorModel.PNR else np.minimum(forwarded, 1)
    ).astype(np.int16)

    fraction = attack.intercept_fraction
    if fraction > 0.0:
        intercepted = detected & ~eve_holds & (u_intercept < fraction)
    else:
        intercepted = np.zeros(m, dtype=bool)
    resent_bit = np.where(eve_basis == alice_basis, alice_bit, eve_coin)
    encoded_basis = np.where(intercepted, eve_basis, alice_basis).astype(np.int8)
    encoded_bit = np.where(intercepted, resent_bit, alice_bit).astype(np.int8)

    bob_bit = np.where(
        detected,
        np.where(bob_basis == encoded_basis, encoded_bit, bob_coin),
        np.int8(-1),
    ).astype(np.int8)
    sifted = detected & (alice_basis == bob_basis)
    bit_error = sifted & (bob_bit != alice_bit)
    eve_knows = eve_holds | (intercepted & (eve_basis == alice_basis))

    return PulseOutcomes(
        intensity_index=idx,
        emitted_n=n,
        forwarded_l=forwarded,
        bob_registered=registered,
        alice_basis=alice_basis,
        alice_bit=alice_bit,
        bob_basis=bob_basis,
        bob_bit=bob_bit,
        sifted=sifted,
        bit_error=bit_error,
        eve_holds_photon=eve_holds,
        eve_intercepted=intercepted,
        eve_knows_bit=eve_knows,
    )


def iter_trial_batches(
    source: PhotonPmf | DecoyScheme,
    channel: Transmittance | float,
    detector: DetectorModel | str,
    attack: AttackStrategy,
    trials: int,
    seed: int,
    workers: int = 1,
) -> Iterator[PulseOutcomes]:
    """Yield chunks of simulated pulses in deterministic order.

    Chunk boundaries and contents depend only on (trials, seed); workers
    only sets how many chunks are simulated concurrently.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials!r}")
    if workers < 1:
        raise InvalidParameterError(f"workers must be >= 1, got {workers!r}")
    eta = as_transmittance(channel).eta
    detector = DetectorModel(detector)
    weights, pmfs = _as_groups(source)
    weight_cum = np.cumsum(weights)
    pmf_cums = [np.cumsum(pmf.probs) for pmf in pmfs]
    if attack.deletion_policy is not None:
        table = attack.deletion_policy.delete_prob
        width = max(table.size, max(pmf.n_max for pmf in pmfs) + 1)
        delete_table = np.zeros(width)
        delete_table[: table.size] = table
    else:
        delete_table = np.zeros(1)

    n_chunks = (trials + CHUNK_SIZE - 1) // CHUNK_SIZE

    def chunk(i: int) -> PulseOutcomes:
        size = min(CHUNK_SIZE, trials - i * CHUNK_SIZE)
        return _simulate_chunk(
            weight_cum, pmf_cums, eta, detector, attack, delete_table, seed, i, size
        )

    if workers == 1:
        for i in range(n_chunks):
            yield chunk(i)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        window = workers + 2
        pending = {
            i: pool.submit(chunk, i) for i in range(min(window, n_chunks))
        }
        for i in range(n_chunks):
            batch = pending.pop(i).result()
            nxt = i + window
            if nxt < n_chunks:
                pending[nxt] = pool.submit(chunk, nxt)
            yield batch


def run_trials(
    source: PhotonPmf | DecoyScheme,
    channel: Transmittance | float,
    detector: DetectorModel | str,
    attack: AttackStrategy,
    trials: int,
    seed: int,
    workers: int = 1,
) -> PulseOutcomes:
    """Simulate trials pulses and return them as one batch."""
    return PulseOutcomes.concatenate(
        list(
            iter_trial_batches(source, channel, detector, attack, trials, seed, workers)
        )
    )
