"""The ten sustainability metrics computed from a scenario plus reference data.

Three notions make up the pillar:

* carbon intensity of the energy source -- client average and server grid
  intensity, each normalized inversely over [20, 795] gCO2eq/kWh;
* hardware efficiency -- client average and server performance per watt,
  normalized directly over [20, 1447] marks/W;
* federation complexity -- six raw configuration scalars (global rounds,
  clients, selection rate, local rounds, dataset size, model size).

The carbon and hardware assessments also expose a ``total`` (server value
plus client average) for reporting; scoring uses the two metrics normalized
separately, which is what the notion scores are built from.

Default weights: metrics weigh equally within a notion; the notions weigh
0.5 (carbon) / 0.25 (hardware) / 0.25 (complexity) within the pillar. All
weights can be replaced through a weight file (see
:func:`fedsust.scoring.apply_weights`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ConfigError, FederationConfig
from .refdata import GridIntensityTable, HardwareTable, LocationResolver
from .scoring import (
    CARBON_INTENSITY_RULE,
    COUNT_RULE,
    KIND_METRIC,
    KIND_NOTION,
    KIND_PILLAR,
    POWER_PERFORMANCE_RULE,
    SELECTION_RULE,
    SIZE_RULE,
    ScoreNode,
)

__all__ = [
    "CarbonIntensityAssessment",
    "ComplexityAssessment",
    "DEFAULT_NOTION_WEIGHTS",
    "HardwareAssessment",
    "PILLAR_ID",
    "assess_carbon",
    "assess_complexity",
    "assess_hardware",
    "build_sustainability_node",
]

PILLAR_ID = "sustainability"

DEFAULT_NOTION_WEIGHTS = {
    "carbon_intensity": 0.5,
    "hardware_efficiency": 0.25,
    "federation_complexity": 0.25,
}


@dataclass(frozen=True)
class CarbonIntensityAssessment:
    """Grid carbon intensity of the federation, gCO2eq/kWh."""

    client_avg: float
    server: float
    total: float


@dataclass(frozen=True)
class HardwareAssessment:
    """Performance per watt of the federation's processors, marks/W."""

    client_avg_pp: float
    server_pp: float
    total: float


@dataclass(frozen=True)
class ComplexityAssessment:
    """The six raw federation-complexity drivers."""

    global_rounds: int
    num_clients: int
    selection_rate: float
    avg_local_rounds: float
    avg_dataset_size: float
    model_size: float


def assess_carbon(
    config: FederationConfig,
    grid: GridIntensityTable,
    locations: LocationResolver | None = None,
) -> CarbonIntensityAssessment:
    """Share-weighted client grid intensity plus the server's grid intensity."""
    client_avg = math.fsum(
        share * grid.lookup_intensity(_resolve(loc, grid, locations))
        for share, loc in config.client_locations
    )
    server = grid.lookup_intensity(_resolve(config.server_location, grid, locations))
    return CarbonIntensityAssessment(client_avg=client_avg, server=server, total=server + client_avg)


def _resolve(location: str, grid: GridIntensityTable, locations: LocationResolver | None) -> str:
    if locations is None:
        return location
    return locations.resolve(location, grid)


def assess_hardware(config: FederationConfig, hardware: HardwareTable) -> HardwareAssessment:
    """Share-weighted client performance per watt plus the server's."""
    client_avg = math.fsum(
        share * hardware.lookup(model).power_performance
        for share, model in config.client_hardware
    )
    server = hardware.lookup(config.server_hardware).power_performance
    return HardwareAssessment(client_avg_pp=client_avg, server_pp=server, total=server + client_avg)


def assess_complexity(config: FederationConfig) -> ComplexityAssessment:
    """Copy the six complexity drivers out of the validated configuration."""
    if config.num_clients < 1:
        raise ConfigError("field 'num_clients' must be >= 1")
    if config.total_rounds < 1:
        raise ConfigError("field 'total_rounds' must be >= 1")
    if not 0.0 < config.selection_rate <= 1.0:
        raise ConfigError("field 'selection_rate' must lie in (0, 1]")
    if config.model_size < 1:
        raise ConfigError("field 'model_size' must be >= 1")
    return ComplexityAssessment(
        global_rounds=config.total_rounds,
        num_clients=config.num_clients,
        selection_rate=config.selection_rate,
        avg_local_rounds=float(config.local_rounds),
        avg_dataset_size=float(config.dataset_size),
        model_size=float(config.model_size),
    )


def build_sustainability_node(
    carbon: CarbonIntensityAssessment,
    hardware: HardwareAssessment,
    complexity: ComplexityAssessment,
) -> ScoreNode:
    """Assemble the pillar subtree with raw metric values filled in.

    Node ids are dot-paths under ``sustainability``; pass the result to
    :func:`fedsust.scoring.aggregate` to score it.
    """

    def metric(notion: str, leaf: str, rule, raw: float) -> ScoreNode:
        return ScoreNode(
            id=f"{PILLAR_ID}.{notion}.{leaf}",
            kind=KIND_METRIC,
            weight=0.0,  # set below
            rule=rule,
            raw=raw,
        )

    carbon_children = [
        metric("carbon_intensity", "client", CARBON_INTENSITY_RULE, carbon.client_avg),
        metric("carbon_intensity", "server", CARBON_INTENSITY_RULE, carbon.server),
    ]
    hardware_children = [
        metric("hardware_efficiency", "client", POWER_PERFORMANCE_RULE, hardware.client_avg_pp),
        metric("hardware_efficiency", "server", POWER_PERFORMANCE_RULE, hardware.server_pp),
    ]
    complexity_children = [
        metric("federation_complexity", "global_rounds", COUNT_RULE, complexity.global_rounds),
        metric("federation_complexity", "num_clients", COUNT_RULE, complexity.num_clients),
        metric("federation_complexity", "selection_rate", SELECTION_RULE, complexity.selection_rate),
        metric("federation_complexity", "local_rounds", COUNT_RULE, complexity.avg_local_rounds),
        metric("federation_complexity", "dataset_size", SIZE_RULE, complexity.avg_dataset_size),
        metric("federation_complexity", "model_size", SIZE_RULE, complexity.model_size),
    ]
    for group in (carbon_children, hardware_children, complexity_children):
        for child in group:
            child.weight = 1.0 / len(group)

    notions = [
        ScoreNode(
            id=f"{PILLAR_ID}.carbon_intensity",
            kind=KIND_NOTION,
            weight=DEFAULT_NOTION_WEIGHTS["carbon_intensity"],
            children=carbon_children,
        ),
        ScoreNode(
            id=f"{PILLAR_ID}.hardware_efficiency",
            kind=KIND_NOTION,
            weight=DEFAULT_NOTION_WEIGHTS["hardware_efficiency"],
            children=hardware_children,
        ),
        ScoreNode(
            id=f"{PILLAR_ID}.federation_complexity",
            kind=KIND_NOTION,
            weight=DEFAULT_NOTION_WEIGHTS["federation_complexity"],
            children=complexity_children,
        ),
    ]
    return ScoreNode(id=PILLAR_ID, kind=KIND_PILLAR, children=notions)
