"""Scenario configuration: schema, parsing, validation, derived quantities.

A scenario file is a UTF-8 JSON object whose keys mirror
:class:`FederationConfig`. Minimal example::

    {
      "name": "small-run",
      "num_clients": 5,
      "total_rounds": 10,
      "selection_rate": 0.2,
      "local_rounds": 1,
      "dataset_size": 100,
      "model_size": 98000,
      "client_hardware": "Intel Core i7-1250U",
      "client_locations": "AL",
      "server_hardware": "Intel Core i7-1250U",
      "server_location": "AL",
      "seed": 42
    }

``client_hardware`` / ``client_locations`` accept a single string, a list of
per-client strings, or a list of ``{"share": .., "model"/"location": ..}``
objects for large mixed fleets. Either ``selection_rate`` or ``sample_size``
must be present; when both are given they must agree to 1e-9. Optional keys:
``energy_model`` (see :class:`EnergyModel`), ``score_overrides`` (dot-path ->
score in [0, 1], pinning any scoring-tree node), ``num_label_classes``,
``statistics`` (pass-through evaluation fields echoed into the factsheet),
``description`` and ``notes``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

__all__ = [
    "ConfigError",
    "EnergyModel",
    "FederationConfig",
    "config_digest",
    "load_scenario",
    "parse_config",
]

SHARE_SUM_TOL = 1e-9
RATE_TOL = 1e-9
MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass(frozen=True)
class EnergyModel:
    """Knobs of the TDP-based energy estimator.

    ``cpu_utilization`` scales TDP during training and aggregation (1.0 is
    the conservative ceiling). ``idle_fraction`` is the TDP fraction drawn by
    the non-utilized remainder. ``comm_energy_per_byte`` prices model
    exchange in kWh/byte; 0 disables communication records. The two time
    coefficients turn workload into simulated seconds:
    training seconds = ``train_seconds_per_unit x local_rounds x dataset_size
    x (model_size / 1e6)`` per selected client and round, and aggregation
    seconds = ``agg_seconds_per_unit x sample_size x (model_size / 1e6)``
    per round.
    """

    cpu_utilization: float = 1.0
    comm_energy_per_byte: float = 0.0
    idle_fraction: float = 0.0
    train_seconds_per_unit: float = 1e-3
    agg_seconds_per_unit: float = 1e-4

    def __post_init__(self) -> None:
        _check_unit("energy_model.cpu_utilization", self.cpu_utilization)
        _check_unit("energy_model.idle_fraction", self.idle_fraction)
        if not math.isfinite(self.comm_energy_per_byte) or self.comm_energy_per_byte < 0:
            raise ConfigError("field 'energy_model.comm_energy_per_byte' must be >= 0")
        for name in ("train_seconds_per_unit", "agg_seconds_per_unit"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"field 'energy_model.{name}' must be >= 0")

    def effective_utilization(self) -> float:
        base = self.cpu_utilization
        return min(1.0, base + self.idle_fraction * (1.0 - base))


def _check_unit(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ConfigError(f"field {name!r} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class FederationConfig:
    """A complete federation scenario.

    ``client_hardware`` and ``client_locations`` are share-weighted mixes,
    each a tuple of ``(share, value)`` pairs with shares summing to 1.
    """

    name: str
    num_clients: int
    total_rounds: int
    local_rounds: int
    sample_size: int
    selection_rate: float
    dataset_size: int
    model_size: int
    client_hardware: tuple[tuple[float, str], ...]
    client_locations: tuple[tuple[float, str], ...]
    server_hardware: str
    server_location: str
    seed: int = 0
    energy_model: EnergyModel = field(default_factory=EnergyModel)
    score_overrides: dict[str, float] = field(default_factory=dict)
    num_label_classes: int = 10
    statistics: dict = field(default_factory=dict)
    description: str = ""


def load_scenario(path: str | Path) -> FederationConfig:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"scenario file {path} must contain a JSON object")
    return parse_config(data, default_name=path.stem)


def parse_config(data: dict, default_name: str = "scenario") -> FederationConfig:
    """Validate a scenario mapping and return the frozen config."""
    known = {
        "name", "description", "notes", "num_clients", "total_rounds", "local_rounds",
        "sample_size", "selection_rate", "dataset_size", "model_size",
        "client_hardware", "client_locations", "server_hardware", "server_location",
        "seed", "energy_model", "score_overrides", "num_label_classes", "statistics",
    }
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) in scenario: {', '.join(unknown)}")

    num_clients = _int_field(data, "num_clients", minimum=1)
    total_rounds = _int_field(data, "total_rounds", minimum=1)
    local_rounds = _int_field(data, "local_rounds", minimum=1)
    dataset_size = _int_field(data, "dataset_size", minimum=1)
    model_size = _int_field(data, "model_size", minimum=1)

    sample_size, selection_rate = _sampling_fields(data, num_clients)

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"field 'seed' must be an integer in [0, 2^64), got {seed!r}")

    num_label_classes = _int_field(data, "num_label_classes", minimum=1, default=10)

    energy_raw = data.get("energy_model", {})
    if not isinstance(energy_raw, dict):
        raise ConfigError("field 'energy_model' must be an object")
    try:
        energy = EnergyModel(**energy_raw)
    except TypeError as exc:
        raise ConfigError(f"field 'energy_model' has unknown sub-field: {exc}") from None

    overrides_raw = data.get("score_overrides", {})
    if not isinstance(overrides_raw, dict):
        raise ConfigError("field 'score_overrides' must be an object")
    score_overrides: dict[str, float] = {}
    for key, value in overrides_raw.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not math.isfinite(float(value)) or not 0.0 <= float(value) <= 1.0:
            raise ConfigError(f"field 'score_overrides.{key}' must lie in [0, 1], got {value!r}")
        score_overrides[str(key)] = float(value)

    statistics = data.get("statistics", {})
    if not isinstance(statistics, dict):
        raise ConfigError("field 'statistics' must be an object")

    return FederationConfig(
        name=str(data.get("name", default_name)),
        num_clients=num_clients,
        total_rounds=total_rounds,
        local_rounds=local_rounds,
        sample_size=sample_size,
        selection_rate=selection_rate,
        dataset_size=dataset_size,
        model_size=model_size,
        client_hardware=_parse_mix(data, "client_hardware", "model", num_clients),
        client_locations=_parse_mix(data, "client_locations", "location", num_clients),
        server_hardware=_str_field(data, "server_hardware"),
        server_location=_str_field(data, "server_location"),
        seed=seed,
        energy_model=energy,
        score_overrides=score_overrides,
        num_label_classes=num_label_classes,
        statistics=dict(statistics),
        description=str(data.get("description", "")),
    )


def _sampling_fields(data: dict, num_clients: int) -> tuple[int, float]:
    has_m = "sample_size" in data
    has_rate = "selection_rate" in data
    if not has_m and not has_rate:
        raise ConfigError("one of fields 'sample_size' or 'selection_rate' is required")
    if has_m:
        sample_size = _int_field(data, "sample_size", minimum=1)
        if sample_size > num_clients:
            raise ConfigError(
                f"field 'sample_size' ({sample_size}) exceeds 'num_clients' ({num_clients})"
            )
    if has_rate:
        rate = data["selection_rate"]
        if not isinstance(rate, (int, float)) or isinstance(rate, bool) or not math.isfinite(float(rate)):
            raise ConfigError(f"field 'selection_rate' must be a number, got {rate!r}")
        rate = float(rate)
        if not 0.0 < rate <= 1.0:
            raise ConfigError(f"field 'selection_rate' must lie in (0, 1], got {rate}")
    if has_m and has_rate:
        if abs(rate - sample_size / num_clients) > RATE_TOL:
            raise ConfigError(
                f"field 'selection_rate' ({rate}) disagrees with sample_size/num_clients "
                f"({sample_size}/{num_clients} = {sample_size / num_clients!r})"
            )
        return sample_size, rate
    if has_m:
        return sample_size, sample_size / num_clients
    # Only the rate was given: derive the per-round draw, keeping the
    # configured rate as the scored raw value even when it is not an exact
    # multiple of 1/num_clients.
    sample_size = min(num_clients, max(1, round(rate * num_clients)))
    return sample_size, rate


def _int_field(data: dict, name: str, minimum: int, default: int | None = None) -> int:
    if name not in data:
        if default is not None:
            return default
        raise ConfigError(f"field {name!r} is required")
    value = data[name]
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"field {name!r} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"field {name!r} must be >= {minimum}, got {value}")
    return value


def _str_field(data: dict, name: str) -> str:
    value = data.get(name)
    if not isinstance(value, str) or not value.strip():
        raise ConfigError(f"field {name!r} must be a non-empty string")
    return value.strip()


def _parse_mix(data: dict, name: str, value_key: str, num_clients: int) -> tuple[tuple[float, str], ...]:
    raw = data.get(name)
    if raw is None:
        raise ConfigError(f"field {name!r} is required")
    if isinstance(raw, str):
        return ((1.0, raw.strip()),)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"field {name!r} must be a string or a non-empty list")
    if all(isinstance(item, str) for item in raw):
        # Per-client list: group equal values, shares by population count.
        if len(raw) != num_clients:
            raise ConfigError(
                f"field {name!r} lists {len(raw)} clients but 'num_clients' is {num_clients}"
            )
        counts: dict[str, int] = {}
        for item in raw:
            counts[item.strip()] = counts.get(item.strip(), 0) + 1
        return tuple((count / num_clients, value) for value, count in counts.items())
    mix: list[tuple[float, str]] = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or value_key not in item or "share" not in item:
            raise ConfigError(
                f"field '{name}[{i}]' must be an object with 'share' and {value_key!r}"
            )
        share = item["share"]
        if not isinstance(share, (int, float)) or isinstance(share, bool) \
                or not math.isfinite(float(share)) or not 0.0 < float(share) <= 1.0:
            raise ConfigError(f"field '{name}[{i}].share' must lie in (0, 1], got {share!r}")
        value = item[value_key]
        if not isinstance(value, str) or not value.strip():
            raise ConfigError(f"field '{name}[{i}].{value_key}' must be a non-empty string")
        mix.append((float(share), value.strip()))
    total = math.fsum(share for share, _ in mix)
    if abs(total - 1.0) > SHARE_SUM_TOL:
        raise ConfigError(f"shares of field {name!r} sum to {total!r}, expected 1.0")
    return tuple(mix)


def config_digest(config: FederationConfig) -> str:
    """Stable SHA-256 digest of the validated configuration."""
    payload = asdict(config)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()
