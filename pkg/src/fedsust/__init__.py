"""Sustainability and trustworthiness scoring for federated-learning setups.

The package scores a federation configuration against a three-notion
sustainability rubric (grid carbon intensity, hardware efficiency,
federation complexity), simulates the orchestration loop deterministically
while estimating energy and CO2eq emissions, and aggregates the result with
externally supplied pillar scores into an overall trust score.
"""

__version__ = "0.1.0"

from .config import ConfigError, EnergyModel, FederationConfig, load_scenario
from .emissions import EmissionsLog, energy_to_co2, estimate_energy
from .fedsim import aggregate_model, run_federation, sample_clients
from .refdata import ReferenceDataError, ReferenceTables, power_performance
from .report import display_score, external_pillars, render_report
from .scoring import (
    MissingMetricError,
    NormalizationRule,
    ScoreError,
    ScoreNode,
    aggregate,
    normalize_linear_direct,
    normalize_linear_inverse,
    normalize_log_buckets,
    normalize_selection_rate,
    trust_score,
)
from .sustainability import (
    assess_carbon,
    assess_complexity,
    assess_hardware,
    build_sustainability_node,
)

__all__ = [
    "ConfigError",
    "EmissionsLog",
    "EnergyModel",
    "FederationConfig",
    "MissingMetricError",
    "NormalizationRule",
    "ReferenceDataError",
    "ReferenceTables",
    "ScoreError",
    "ScoreNode",
    "__version__",
    "aggregate",
    "aggregate_model",
    "assess_carbon",
    "assess_complexity",
    "assess_hardware",
    "build_sustainability_node",
    "display_score",
    "energy_to_co2",
    "estimate_energy",
    "external_pillars",
    "load_scenario",
    "normalize_linear_direct",
    "normalize_linear_inverse",
    "normalize_log_buckets",
    "normalize_selection_rate",
    "power_performance",
    "render_report",
    "run_federation",
    "sample_clients",
    "trust_score",
]
