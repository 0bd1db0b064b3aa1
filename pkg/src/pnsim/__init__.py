"""Simulation and analytics of photon-number-splitting attacks on decoy-state BB84.

The package splits into layers: `photon_stats` holds source and channel
primitives, `analytics` the closed-form leak quantities, `engine` the
vectorised Monte Carlo pulse simulation, `session` the protocol-level
aggregation and consistency tests, and `config`/`reports`/`figures`/`cli`
the user-facing surface.
"""

from .analytics import (
    CompromiseThreshold,
    DecoyScheme,
    DeletionPolicy,
    DetectedFraction,
    Intensity,
    LeakAnalytics,
    asymptotic_leak,
    compromise_threshold,
    decoy_posterior,
    detected_fraction,
    leak_analytics,
    naive_pns_leak,
    pnr_eve_numerator,
    solve_deletion_policy,
    spns_leak,
)
from .config import RunConfig, load_config, parse_config
from .engine import (
    AttackStrategy,
    AttackVariant,
    DetectorModel,
    PulseOutcome,
    PulseOutcomes,
    apply_bayes_delete,
    apply_intercept_resend,
    apply_none,
    apply_original_pns,
    apply_spns,
    iter_trial_batches,
    run_trials,
)
from .errors import (
    ConfigError,
    DegenerateSourceError,
    InvalidParameterError,
    PnsimError,
    UndefinedPosteriorError,
)
from .photon_stats import (
    PhotonPmf,
    RandomStream,
    SourceSummary,
    Transmittance,
    binomial_thin_pmf,
    compound_thinned_pmf,
    loss_db_from_transmittance,
    point_mass,
    poisson_pmf,
    sample_binomial,
    sample_photon_number,
    summarize,
    transmittance_from_db,
)
from .session import (
    ConsistencyResult,
    IntensityStats,
    LeakAccount,
    SessionConfig,
    SessionReport,
    decoy_consistency_test,
    leak_accounting,
    run_session,
)

__version__ = "0.1.0"

__all__ = [
    "AttackStrategy",
    "AttackVariant",
    "CompromiseThreshold",
    "ConfigError",
    "ConsistencyResult",
    "DecoyScheme",
    "DegenerateSourceError",
    "DeletionPolicy",
    "DetectedFraction",
    "DetectorModel",
    "Intensity",
    "IntensityStats",
    "InvalidParameterError",
    "LeakAccount",
    "LeakAnalytics",
    "PhotonPmf",
    "PnsimError",
    "PulseOutcome",
    "PulseOutcomes",
    "RandomStream",
    "RunConfig",
    "SessionConfig",
    "SessionReport",
    "SourceSummary",
    "Transmittance",
    "UndefinedPosteriorError",
    "apply_bayes_delete",
    "apply_intercept_resend",
    "apply_none",
    "apply_original_pns",
    "apply_spns",
    "asymptotic_leak",
    "binomial_thin_pmf",
    "compound_thinned_pmf",
    "compromise_threshold",
    "decoy_consistency_test",
    "decoy_posterior",
    "detected_fraction",
    "iter_trial_batches",
    "leak_accounting",
    "leak_analytics",
    "load_config",
    "loss_db_from_transmittance",
    "naive_pns_leak",
    "parse_config",
    "pnr_eve_numerator",
    "point_mass",
    "poisson_pmf",
    "run_session",
    "run_trials",
    "sample_binomial",
    "sample_photon_number",
    "solve_deletion_policy",
    "spns_leak",
    "summarize",
    "transmittance_from_db",
    "__version__",
]
