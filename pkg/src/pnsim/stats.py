"""Hypothesis-test helpers used by the session-level consistency checks."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .errors import InvalidParameterError


def binomial_z(successes: int, trials: int, p: float) -> float:
    """Normal-approximation z score of a binomial count against rate p."""
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials!r}")
    if not 0.0 < p < 1.0:
        raise InvalidParameterError(f"success probability must be in (0, 1), got {p!r}")
    if not 0 <= successes <= trials:
        raise InvalidParameterError(
            f"successes must lie in [0, {trials}], got {successes!r}"
        )
    sigma = math.sqrt(p * (1.0 - p) / trials)
    return (successes / trials - p) / sigma


class GofResult(NamedTuple):
    """Chi-square goodness-of-fit outcome after bin pooling."""

    statistic: float
    dof: int
    pvalue: float
    bins: int


def chi_square_gof(
    observed: Sequence[int],
    expected_probs: Sequence[float],
    min_expected: float = 5.0,
) -> GofResult:
    """Pearson chi-square test of counts against a reference distribution.

    expected_probs may sum to less than one; the remainder is assigned to
    the final bin.  Bins whose expected count falls below min_expected
    are pooled with a neighbour so the chi-square approximation holds.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    if obs.ndim != 1 or obs.shape != probs.shape or obs.size < 2:
        raise InvalidParameterError("observed and expected_probs must be 1-d and align")
    if np.any(obs < 0) or np.any(probs < 0):
        raise InvalidParameterError("counts and probabilities must be >= 0")
    total = obs.sum()
    if total < 1:
        raise InvalidParameterError("need at least one observation")
    probs = probs.copy()
    probs[-1] += max(0.0, 1.0 - probs.sum())
    expected = probs * total

    groups: list[list[float]] = [[o, e] for o, e in zip(obs, expected)]
    # Pool the sparse upper tail first, then any other undersized bin.
    while len(groups) > 1 and groups[-1][1] < min_expected:
        o, e = groups.pop()
        groups[-1][0] += o
        groups[-1][1] += e
    i = 0
    while i < len(groups):
        if groups[i][1] < min_expected and len(groups) > 1:
            j = i + 1 if i + 1 < len(groups) else i - 1
            groups[j][0] += groups[i][0]
            groups[j][1] += groups[i][1]
            groups.pop(i)
            i = 0
        else:
            i += 1

    if len(groups) < 2:
        return GofResult(statistic=0.0, dof=0, pvalue=1.0, bins=len(groups))
    statistic = math.fsum((o - e) ** 2 / e for o, e in groups)
    dof = len(groups) - 1
    pvalue = float(sps.chi2.sf(statistic, dof))
    return GofResult(statistic=statistic, dof=dof, pvalue=pvalue, bins=len(groups))


def two_sided_critical_z(alpha: float) -> float:
    """z magnitude whose two-sided normal tail probability equals alpha."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must be in (0, 1), got {alpha!r}")
    return float(sps.norm.ppf(1.0 - alpha / 2.0))


def two_sided_alpha(z: float) -> float:
    """Two-sided normal tail probability of a z magnitude."""
    return float(2.0 * sps.norm.sf(abs(z)))
