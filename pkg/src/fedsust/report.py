"""FactSheet accumulation and canonical serialization of the trust report.

Reports are written in a canonical form -- sorted keys, two-space indent,
a trailing newline, scores rendered both as two-decimal display strings and
as full-precision ``*_raw`` floats -- so equal inputs always produce equal
bytes. Files are written atomically (temp file + rename), and no raw client
identifier ever appears in the output: clients and labels show up only under
per-run salted hashes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from . import __version__
from .config import FederationConfig, config_digest
from .fedsim import FederationState, hash_client_id, run_salt
from .scoring import KIND_METRIC, ScoreError, ScoreNode, trust_score

__all__ = [
    "EXTERNAL_PILLAR_IDS",
    "FactSheet",
    "FactSheetError",
    "build_trust_report",
    "display_score",
    "external_pillars",
    "load_pillar_fixture",
    "populate_factsheet",
    "render_report",
    "resolve_pillar_value",
    "write_atomic",
]

# The six pillars whose scores are produced outside this package and fed in.
EXTERNAL_PILLAR_IDS = (
    "accountability",
    "explainability",
    "fairness",
    "federation",
    "privacy",
    "robustness",
)

SELF_CONSISTENCY_TOL = 1e-9


class FactSheetError(ValueError):
    """A mandatory factsheet section is missing fields."""


def display_score(value: float) -> str:
    """Render a score for display: half-even rounding to two decimals.

    Rounding is display-only; aggregation always consumes full-precision
    values.
    """
    if not math.isfinite(value):
        raise ScoreError(f"cannot display non-finite score {value!r}")
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


def write_atomic(path: str | Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file and rename; never a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def external_pillars(scores: dict[str, float]) -> dict[str, float]:
    """Validate externally supplied pillar scores.

    Ids must come from :data:`EXTERNAL_PILLAR_IDS`; the computed
    sustainability pillar is merged in separately by the caller.
    """
    validated: dict[str, float] = {}
    for pillar, value in scores.items():
        if pillar not in EXTERNAL_PILLAR_IDS:
            raise ScoreError(
                f"unknown external pillar {pillar!r}; expected one of {', '.join(EXTERNAL_PILLAR_IDS)}"
            )
        value = float(value)
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise ScoreError(f"external pillar {pillar!r} score {value!r} outside [0, 1]")
        validated[pillar] = value
    return validated


def resolve_pillar_value(value, pillar: str) -> float:
    """Resolve a pillar fixture entry to a full-precision score.

    An entry is either a plain number or an object
    ``{"notions": {name: score}, "weights": {name: w}?}``; notion form is
    averaged (equal weights unless given) so the pillar keeps full precision
    instead of a pre-rounded number.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, dict) and "notions" in value:
        notions = value["notions"]
        if not isinstance(notions, dict) or not notions:
            raise ScoreError(f"pillar {pillar!r}: 'notions' must be a non-empty object")
        names = sorted(notions)
        weights_map = value.get("weights") or {}
        if weights_map:
            missing = sorted(set(names) - set(weights_map))
            if missing:
                raise ScoreError(f"pillar {pillar!r}: weights missing for {', '.join(missing)}")
            weights = [float(weights_map[n]) for n in names]
        else:
            weights = [1.0 / len(names)] * len(names)
        return trust_score([float(notions[n]) for n in names], weights)
    raise ScoreError(f"pillar {pillar!r}: expected a number or an object with 'notions'")


def load_pillar_fixture(path: str | Path) -> dict[str, float]:
    """Load an external-pillar file and resolve every entry to a score.

    Schema: ``{"pillars": {pillar-id: <number | {"notions": ...}>}}``. Extra
    top-level keys are allowed (description fields, reference values for
    other tooling) and ignored here.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScoreError(f"cannot read pillar file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScoreError(f"pillar file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "pillars" not in data or not isinstance(data["pillars"], dict):
        raise ScoreError(f"pillar file {path} must contain a 'pillars' object")
    resolved = {
        pillar: resolve_pillar_value(value, pillar) for pillar, value in data["pillars"].items()
    }
    return external_pillars(resolved)


@dataclass
class FactSheet:
    """Accountability record of one run, split by lifecycle stage."""

    pre_training: dict = field(default_factory=dict)
    during_training: dict = field(default_factory=dict)
    post_training: dict = field(default_factory=dict)

    MANDATORY = {
        "pre_training": (
            "num_clients", "total_rounds", "sample_size", "selection_rate",
            "client_locations", "server_location", "client_hardware", "server_hardware",
        ),
        "during_training": ("selection_counts", "class_distribution", "emissions_by_phase_g_raw"),
        "post_training": ("client_statistics",),
    }

    def completeness(self) -> tuple[float, list[str]]:
        """Fraction of mandatory fields populated, and the absent ones."""
        absent: list[str] = []
        total = 0
        for section, fields in self.MANDATORY.items():
            payload = getattr(self, section)
            for name in fields:
                total += 1
                if name not in payload or payload[name] in (None, {}, []):
                    absent.append(f"{section}.{name}")
        return (total - len(absent)) / total, absent

    def as_dict(self) -> dict:
        fraction, absent = self.completeness()
        return {
            "pre_training": self.pre_training,
            "during_training": self.during_training,
            "post_training": self.post_training,
            "completeness": {"fraction": fraction, "absent": absent},
        }


def populate_factsheet(
    config: FederationConfig,
    state: FederationState | None,
    statistics: dict | None = None,
    strict: bool = True,
) -> FactSheet:
    """Fill the three factsheet sections from their lifecycle stages.

    ``strict`` raises :class:`FactSheetError` listing every absent mandatory
    field; pass ``strict=False`` to get the partial sheet (its completeness
    section still names what is missing).
    """
    sheet = FactSheet()
    sheet.pre_training = {
        "name": config.name,
        "num_clients": config.num_clients,
        "total_rounds": config.total_rounds,
        "sample_size": config.sample_size,
        "selection_rate": config.selection_rate,
        "local_rounds": config.local_rounds,
        "dataset_size": config.dataset_size,
        "model_size": config.model_size,
        "client_locations": [{"share": s, "location": v} for s, v in config.client_locations],
        "server_location": config.server_location,
        "client_hardware": [{"share": s, "model": v} for s, v in config.client_hardware],
        "server_hardware": config.server_hardware,
        "seed": config.seed,
    }
    if state is not None:
        salt = run_salt(config.seed)
        sheet.during_training = {
            "rounds_completed": state.round,
            "selection_counts": {
                hash_client_id(salt, c): count for c, count in sorted(state.selection_counts.items())
            },
            "class_distribution": dict(sorted(state.class_distribution.items())),
            "emissions_by_phase_g_raw": state.emissions.co2eq_by(lambda r: r.phase),
        }
        sheet.post_training = {
            "client_statistics": {
                hash_client_id(salt, c): {
                    "participation_rate": stats.participation_rate,
                    "avg_training_time_s": stats.avg_training_time_s,
                    "dataset_size": stats.dataset_size,
                    "class_balance": stats.class_balance,
                }
                for c, stats in sorted(state.statistics.items())
            },
        }
    if statistics:
        sheet.post_training["evaluation"] = dict(statistics)
    if strict:
        _, absent = sheet.completeness()
        if absent:
            raise FactSheetError(f"factsheet incomplete; absent fields: {', '.join(absent)}")
    return sheet


def build_trust_report(
    config: FederationConfig,
    pillar_node: ScoreNode,
    externals: dict[str, float] | None = None,
    emissions_summary: dict | None = None,
    pillar_weights: dict[str, float] | None = None,
) -> dict:
    """Assemble the report mapping from a scored pillar tree.

    ``externals`` are validated external pillar scores; when present, the
    root trust score is the weighted mean over them plus the computed
    sustainability pillar (equal weights unless ``pillar_weights`` is given).
    Without them ``trust`` is ``null``: a single computed pillar is not
    presented as a federation-wide trust score.
    """
    metrics: dict[str, dict] = {}
    notions: dict[str, dict] = {}
    renormalized: list[str] = []
    for node in pillar_node.walk():
        if node.renormalized:
            renormalized.append(node.id)
        entry = {
            "score": None if node.score is None else display_score(node.score),
            "score_raw": node.score,
            "weight": node.weight,
            "overridden": node.overridden,
        }
        if node.kind == KIND_METRIC:
            entry["raw"] = node.raw
            computed = node.rule.apply(node.raw) if (node.rule and node.raw is not None) else None
            entry["computed_raw"] = computed
            metrics[node.id] = entry
        elif node.id != pillar_node.id:
            notions[node.id] = entry

    pillars: dict[str, dict] = {
        pillar_node.id: {
            "score": display_score(pillar_node.score),
            "score_raw": pillar_node.score,
            "source": "computed",
            "overridden": pillar_node.overridden,
        }
    }
    trust: dict | None = None
    if externals:
        for pillar, value in sorted(externals.items()):
            pillars[pillar] = {
                "score": display_score(value),
                "score_raw": value,
                "source": "external",
                "overridden": False,
            }
        ordered = sorted(pillars)
        if pillar_weights:
            missing = sorted(set(ordered) - set(pillar_weights))
            if missing:
                raise ScoreError(f"pillar weights missing for: {', '.join(missing)}")
            weights = [float(pillar_weights[p]) for p in ordered]
        else:
            weights = [1.0 / len(ordered)] * len(ordered)
        root = trust_score([pillars[p]["score_raw"] for p in ordered], weights)
        trust = {
            "score": display_score(root),
            "score_raw": root,
            "pillar_weights": dict(zip(ordered, weights)),
        }

    report = {
        "version": __version__,
        "config": {"name": config.name, "digest": config_digest(config)},
        "metrics": metrics,
        "notions": notions,
        "pillars": pillars,
        "trust": trust,
        "emissions": emissions_summary,
        "renormalized": sorted(renormalized),
        "partial": bool(renormalized),
    }
    _check_self_consistency(report)
    return report


def _check_self_consistency(report: dict) -> None:
    trust = report.get("trust")
    if not trust:
        return
    weights = trust["pillar_weights"]
    scores = [report["pillars"][p]["score_raw"] for p in sorted(weights)]
    recomputed = trust_score(scores, [weights[p] for p in sorted(weights)])
    if abs(recomputed - trust["score_raw"]) > SELF_CONSISTENCY_TOL:
        raise ScoreError(
            f"trust score {trust['score_raw']!r} does not match re-aggregation {recomputed!r}"
        )


def render_report(report: dict) -> bytes:
    """Canonical bytes of a report mapping: sorted keys, trailing newline."""
    return (json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def emissions_summary(state: FederationState) -> dict:
    """Emissions block of the trust report, full-precision values."""
    log = state.emissions
    return {
        "records": len(log),
        "total_energy_kwh_raw": log.total_energy_kwh(),
        "total_co2eq_g_raw": log.total_co2eq_g(),
        "co2eq_by_phase_g_raw": log.co2eq_by(lambda r: r.phase),
        "co2eq_by_role_g_raw": log.co2eq_by(lambda r: r.role),
    }
