"""JSON run-configuration parsing with strict validation.

The schema is flat and small; every check reports the dotted path of the
offending field.  Unknown fields are rejected rather than ignored so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .analytics import (
    DecoyScheme,
    DeletionPolicy,
    detected_fraction,
    solve_deletion_policy,
)
from .engine import AttackStrategy, AttackVariant, DetectorModel
from .errors import ConfigError, PnsimError
from .photon_stats import (
    DEFAULT_TAIL_TOLERANCE,
    Transmittance,
    loss_db_from_transmittance,
    transmittance_from_db,
)
from .session import DEFAULT_Z_CRITICAL, SessionConfig

DEFAULT_PULSES = 10**6
DEFAULT_SEED = 1

_TOP_FIELDS = {
    "source",
    "loss_db",
    "transmittance",
    "detector",
    "attack",
    "pulses",
    "seed",
    "z_critical",
    "tail_tolerance",
    "workers",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters ready to build a session from."""

    scheme: DecoyScheme
    channel: Transmittance
    loss_db: float | None
    detector: DetectorModel
    attack: AttackStrategy
    pulses: int
    seed: int
    z_critical: float
    tail_tolerance: float
    workers: int

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            scheme=self.scheme,
            channel=self.channel,
            detector=self.detector,
            attack=self.attack,
            pulses=self.pulses,
            seed=self.seed,
            z_critical=self.z_critical,
            workers=self.workers,
        )

    def override(self, **changes: Any) -> "RunConfig":
        """Copy with selected fields replaced (CLI flag overrides)."""
        for key in changes:
            if key not in {"pulses", "seed", "workers"}:
                raise ConfigError(f"cannot override field {key!r}")
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        """Canonical JSON-compatible echo of this configuration."""
        out: dict[str, Any] = {
            "source": {
                "intensities": [
                    {"mean": mean, "weight": weight}
                    for mean, weight in self.scheme.intensities
                ]
            }
        }
        if self.loss_db is not None:
            out["loss_db"] = self.loss_db
        else:
            out["transmittance"] = self.channel.eta
        attack: dict[str, Any] = {"variant": self.attack.variant.value}
        if self.attack.detector_assumption is not None:
            attack["detector_assumption"] = self.attack.detector_assumption.value
        if self.attack.intercept_fraction:
            attack["intercept_fraction"] = self.attack.intercept_fraction
        if self.attack.deletion_policy is not None:
            policy = self.attack.deletion_policy
            attack["deletion"] = {
                "delete_prob": [float(x) for x in policy.delete_prob[1:]],
                "forward_eta": policy.forward_eta,
            }
        out.update(
            detector=self.detector.value,
            attack=attack,
            pulses=self.pulses,
            seed=self.seed,
            z_critical=self.z_critical,
            tail_tolerance=self.tail_tolerance,
            workers=self.workers,
        )
        return out


def _reject_unknown(obj: Mapping[str, Any], allowed: set[str], path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown field {path}{name!r}")


def _number(obj: Mapping[str, Any], key: str, path: str, default: float | None = None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"missing required field {path}{key!r}")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}{key} must be finite, got {value!r}")
    return float(value)


def _integer(obj: Mapping[str, Any], key: str, path: str, default: int | None = None) -> int:
    if key not in obj:
        if default is None:
            raise ConfigError(f"missing required field {path}{key!r}")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}{key} must be an integer, got {value!r}")
    return value


def _parse_source(obj: Any, tail_tolerance: float) -> DecoyScheme:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"source must be an object, got {obj!r}")
    _reject_unknown(obj, {"poisson_mean", "intensities"}, "source.")
    has_mean = "poisson_mean" in obj
    has_list = "intensities" in obj
    if has_mean == has_list:
        raise ConfigError(
            "source needs exactly one of 'poisson_mean' or 'intensities'"
        )
    try:
        if has_mean:
            mean = _number(obj, "poisson_mean", "source.")
            return DecoyScheme.poisson([(mean, 1.0)], tail_tolerance)
        entries = obj["intensities"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("source.intensities must be a non-empty list")
        pairs = []
        for i, entry in enumerate(entries):
            path = f"source.intensities[{i}]."
            if not isinstance(entry, Mapping):
                raise ConfigError(f"{path[:-1]} must be an object, got {entry!r}")
            _reject_unknown(entry, {"mean", "weight"}, path)
            pairs.append((_number(entry, "mean", path), _number(entry, "weight", path)))
        return DecoyScheme.poisson(pairs, tail_tolerance)
    except ConfigError:
        raise
    except PnsimError as exc:
        raise ConfigError(f"source: {exc}") from exc


def _parse_attack(
    obj: Any,
    detector: DetectorModel,
    scheme: DecoyScheme,
    channel: Transmittance,
) -> AttackStrategy:
    if isinstance(obj, str):
        obj = {"variant": obj}
    if not isinstance(obj, Mapping):
        raise ConfigError(f"attack must be a string or object, got {obj!r}")
    _reject_unknown(
        obj,
        {"variant", "detector_assumption", "intercept_fraction", "deletion"},
        "attack.",
    )
    variant_name = obj.get("variant", "none")
    try:
        variant = AttackVariant(variant_name)
    except ValueError:
        choices = ", ".join(v.value for v in AttackVariant)
        raise ConfigError(
            f"attack.variant must be one of {choices}, got {variant_name!r}"
        ) from None
    assumption: DetectorModel | None = None
    if "detector_assumption" in obj:
        try:
            assumption = DetectorModel(obj["detector_assumption"])
        except ValueError:
            raise ConfigError(
                f"attack.detector_assumption must be 'threshold' or 'pnr', "
                f"got {obj['detector_assumption']!r}"
            ) from None
    elif variant in (AttackVariant.SPNS, AttackVariant.BAYES_DELETE):
        # The eavesdropper is assumed to know Bob's equipment.
        assumption = detector
    fraction = _number(obj, "intercept_fraction", "attack.", default=0.0)

    policy = None
    if "deletion" in obj:
        if variant is not AttackVariant.BAYES_DELETE:
            raise ConfigError("attack.deletion requires variant 'bayes_delete'")
        policy = _parse_deletion(obj["deletion"], scheme, channel)
    elif variant is AttackVariant.BAYES_DELETE:
        policy = solve_deletion_policy(scheme, channel)

    try:
        return AttackStrategy(
            variant=variant,
            detector_assumption=assumption,
            intercept_fraction=fraction,
            deletion_policy=policy,
        )
    except PnsimError as exc:
        raise ConfigError(f"attack: {exc}") from exc


def _parse_deletion(obj: Any, scheme: DecoyScheme, channel: Transmittance):
    if not isinstance(obj, Mapping):
        raise ConfigError(f"attack.deletion must be an object, got {obj!r}")
    _reject_unknown(
        obj, {"delete_prob", "forward_eta", "max_photon"}, "attack.deletion."
    )
    fwd = _number(obj, "forward_eta", "attack.deletion.", default=1.0)
    try:
        if "delete_prob" in obj:
            probs = obj["delete_prob"]
            if not isinstance(probs, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in probs
            ):
                raise ConfigError(
                    "attack.deletion.delete_prob must be a list of numbers"
                )
            if "max_photon" in obj:
                raise ConfigError(
                    "attack.deletion.max_photon only applies when solving"
                )
            table = np.concatenate([[0.0], np.asarray(probs, dtype=float)])
            targets = np.array(
                [detected_fraction(pmf, channel.eta).total for pmf in scheme.pmfs]
            )
            achieved = _achieved(scheme, table, fwd)
            return DeletionPolicy(
                delete_prob=table,
                forward_eta=fwd,
                target_yields=targets,
                achieved_yields=achieved,
                residual=float(np.max(np.abs(achieved - targets))),
            )
        max_photon = _integer(obj, "max_photon", "attack.deletion.", default=8)
        return solve_deletion_policy(
            scheme, channel, forward_eta=fwd, max_photon=max_photon
        )
    except ConfigError:
        raise
    except PnsimError as exc:
        raise ConfigError(f"attack.deletion: {exc}") from exc


def _achieved(scheme: DecoyScheme, table: np.ndarray, fwd: float) -> np.ndarray:
    out = np.zeros(len(scheme.pmfs))
    for i, pmf in enumerate(scheme.pmfs):
        n = np.arange(pmf.n_max + 1)
        keep = 1.0 - np.concatenate(
            [table, np.zeros(max(0, pmf.n_max + 1 - table.size))]
        )[: pmf.n_max + 1]
        deliver = 1.0 - (1.0 - fwd) ** n
        out[i] = float(np.sum(pmf.probs * keep * deliver))
    return out


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a configuration mapping and build a RunConfig."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"configuration must be an object, got {data!r}")
    _reject_unknown(data, _TOP_FIELDS, "")

    tail = _number(data, "tail_tolerance", "", default=DEFAULT_TAIL_TOLERANCE)
    if "source" not in data:
        raise ConfigError("missing required field 'source'")
    scheme = _parse_source(data["source"], tail)

    has_db = "loss_db" in data
    has_eta = "transmittance" in data
    if has_db == has_eta:
        raise ConfigError("need exactly one of 'loss_db' or 'transmittance'")
    try:
        if has_db:
            loss_db: float | None = _number(data, "loss_db", "")
            channel = transmittance_from_db(loss_db)
        else:
            loss_db = None
            channel = Transmittance(_number(data, "transmittance", ""))
    except ConfigError:
        raise
    except PnsimError as exc:
        raise ConfigError(str(exc)) from exc

    detector_name = data.get("detector", DetectorModel.THRESHOLD.value)
    try:
        detector = DetectorModel(detector_name)
    except ValueError:
        raise ConfigError(
            f"detector must be 'threshold' or 'pnr', got {detector_name!r}"
        ) from None

    attack = _parse_attack(data.get("attack", "none"), detector, scheme, channel)

    pulses = _integer(data, "pulses", "", default=DEFAULT_PULSES)
    if pulses < 1:
        raise ConfigError(f"pulses must be >= 1, got {pulses}")
    seed = _integer(data, "seed", "", default=DEFAULT_SEED)
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    z_critical = _number(data, "z_critical", "", default=DEFAULT_Z_CRITICAL)
    if z_critical <= 0:
        raise ConfigError(f"z_critical must be > 0, got {z_critical}")
    workers = _integer(data, "workers", "", default=1)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if not 0.0 < tail <= 1e-6:
        raise ConfigError(f"tail_tolerance must be in (0, 1e-6], got {tail}")

    return RunConfig(
        scheme=scheme,
        channel=channel,
        loss_db=loss_db,
        detector=detector,
        attack=attack,
        pulses=pulses,
        seed=seed,
        z_critical=z_critical,
        tail_tolerance=tail,
        workers=workers,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)
