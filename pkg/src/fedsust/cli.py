"""Command-line front door: validate, score, simulate, and compare scenarios.

Exit codes: 0 success, 1 configuration/validation failure, 2 reference-data
miss (unknown country, hardware model, or unresolvable location). Every
error prints a single machine-parsable line to stderr of the form
``error: <category>: <detail>`` with category ``validation``,
``reference-data`` or ``io``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, FederationConfig, load_scenario
from .fedsim import run_federation
from .refdata import ReferenceDataError, ReferenceTables
from .report import (
    FactSheetError,
    build_trust_report,
    display_score,
    emissions_summary,
    load_pillar_fixture,
    populate_factsheet,
    render_report,
    write_atomic,
)
from .scoring import (
    ScoreError,
    ScoreNode,
    aggregate,
    apply_weights,
    load_weight_config,
    trust_score,
)
from .sustainability import (
    PILLAR_ID,
    assess_carbon,
    assess_complexity,
    assess_hardware,
    build_sustainability_node,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_REFDATA = 2

_PILLAR_LEVEL_IDS = frozenset(
    ("sustainability", "privacy", "robustness", "fairness", "explainability", "accountability", "federation")
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ScoreError, FactSheetError) as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ReferenceDataError as exc:
        print(f"error: reference-data: {exc}", file=sys.stderr)
        return EXIT_REFDATA
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsust",
        description="Sustainability and trust scoring for federated-learning configurations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, multi_config: bool = False) -> None:
        if multi_config:
            p.add_argument("--config", action="append", required=True,
                           help="scenario file (give twice: first A, then B)")
        else:
            p.add_argument("--config", required=True, help="scenario file (JSON)")
        p.add_argument("--weights", help="weight file overriding tree and pillar weights (JSON)")
        p.add_argument("--pillars", action="append",
                       help="external pillar scores (JSON); repeatable for compare")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--allow-partial", action="store_true",
                       help="renormalize around missing metrics/pillars instead of failing")
        p.add_argument("--seed", type=int, help="override the scenario seed")

    p_validate = sub.add_parser("validate", help="check a scenario without writing outputs")
    common(p_validate)
    p_validate.set_defaults(handler=cmd_validate)

    p_score = sub.add_parser("score", help="score a scenario from configuration alone")
    common(p_score)
    p_score.set_defaults(handler=cmd_score)

    p_sim = sub.add_parser("simulate", help="run the federation loop and track emissions")
    common(p_sim)
    p_sim.add_argument("--workers", type=int, default=1,
                       help="threads for client phases within a round (default 1)")
    p_sim.set_defaults(handler=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="score two scenarios and rank them")
    common(p_cmp, multi_config=True)
    p_cmp.set_defaults(handler=cmd_compare)

    return parser


def _load_inputs(args, config_path: str):
    tables = ReferenceTables.load()
    config = load_scenario(config_path)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"field 'seed' must be an integer in [0, 2^64), got {args.seed}")
        config = _with_seed(config, args.seed)
    weights = load_weight_config(args.weights) if args.weights else {}
    tree_weights = {k: v for k, v in weights.items() if k not in _PILLAR_LEVEL_IDS}
    pillar_weights = {k: v for k, v in weights.items() if k in _PILLAR_LEVEL_IDS}
    return tables, config, tree_weights, pillar_weights


def _with_seed(config: FederationConfig, seed: int) -> FederationConfig:
    from dataclasses import replace

    return replace(config, seed=seed)


def _score_pillar(config, tables, tree_weights, allow_partial) -> ScoreNode:
    carbon = assess_carbon(config, tables.grid, tables.locations)
    hardware = assess_hardware(config, tables.hardware)
    complexity = assess_complexity(config)
    node = build_sustainability_node(carbon, hardware, complexity)
    known = {n.id for n in node.walk()}
    unknown = sorted(set(config.score_overrides) - known)
    if unknown:
        raise ConfigError(
            f"field 'score_overrides' names unknown node(s): {', '.join(unknown)}"
        )
    if tree_weights:
        unknown_weights = sorted(set(tree_weights) - known)
        if unknown_weights:
            raise ConfigError(
                f"weight file names unknown node(s): {', '.join(unknown_weights)}"
            )
        node = apply_weights(node, tree_weights)
    return aggregate(node, overrides=config.score_overrides, allow_partial=allow_partial)


def _externals(args, which: int = 0) -> dict[str, float] | None:
    if not args.pillars:
        return None
    paths = args.pillars
    path = paths[which] if which < len(paths) else paths[-1]
    return load_pillar_fixture(path)


def _trust_weights(
    pillar_weights: dict[str, float], pillar_ids, allow_partial: bool = False
) -> dict[str, float] | None:
    """Subset of the weight file's pillar weights for the pillars present.

    The subset must sum to 1; with ``allow_partial`` it is renormalized
    instead (covering weight files written for more pillars than supplied).
    """
    if not pillar_weights:
        return None
    missing = sorted(set(pillar_ids) - set(pillar_weights))
    if missing:
        raise ScoreError(f"weight file lacks pillar weights for: {', '.join(missing)}")
    subset = {p: pillar_weights[p] for p in pillar_ids}
    total = sum(subset.values())
    if abs(total - 1.0) > 1e-9:
        if not allow_partial:
            raise ScoreError(
                f"pillar weights for {', '.join(pillar_ids)} sum to {total!r}; "
                "pass --allow-partial to renormalize"
            )
        if total <= 0.0:
            raise ScoreError("pillar weights sum to zero; cannot renormalize")
        subset = {p: w / total for p, w in subset.items()}
    return subset


def cmd_validate(args) -> int:
    tables, config, tree_weights, _ = _load_inputs(args, args.config)
    _score_pillar(config, tables, tree_weights, args.allow_partial)
    if args.pillars:
        _externals(args)
    print(f"ok: scenario '{config.name}' is valid")
    return EXIT_OK


def cmd_score(args) -> int:
    tables, config, tree_weights, pillar_weights = _load_inputs(args, args.config)
    scored = _score_pillar(config, tables, tree_weights, args.allow_partial)
    externals = _externals(args)
    trust_w = None
    if externals:
        trust_w = _trust_weights(pillar_weights, sorted([*externals, PILLAR_ID]), args.allow_partial)
    report = build_trust_report(config, scored, externals, emissions_summary=None,
                                pillar_weights=trust_w)
    out = Path(args.out)
    write_atomic(out / "trust_report.json", render_report(report))
    print(f"sustainability: {report['pillars'][PILLAR_ID]['score']}")
    print(f"trust: {report['trust']['score'] if report['trust'] else 'n/a (no external pillars)'}")
    print(f"wrote: {out / 'trust_report.json'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    tables, config, tree_weights, pillar_weights = _load_inputs(args, args.config)
    if args.workers < 1:
        raise ConfigError(f"field 'workers' must be >= 1, got {args.workers}")
    scored = _score_pillar(config, tables, tree_weights, args.allow_partial)
    externals = _externals(args)
    trust_w = None
    if externals:
        trust_w = _trust_weights(pillar_weights, sorted([*externals, PILLAR_ID]), args.allow_partial)

    state = run_federation(config, tables, workers=args.workers)
    factsheet = populate_factsheet(config, state, config.statistics or None, strict=False)
    report = build_trust_report(
        config, scored, externals,
        emissions_summary=emissions_summary(state),
        pillar_weights=trust_w,
    )

    out = Path(args.out)
    write_atomic(out / "trust_report.json", render_report(report))
    write_atomic(out / "factsheet.json", render_report(factsheet.as_dict()))
    state.emissions.write_csv(out / "emissions.csv")
    print(f"sustainability: {report['pillars'][PILLAR_ID]['score']}")
    print(f"trust: {report['trust']['score'] if report['trust'] else 'n/a (no external pillars)'}")
    print(f"estimated emissions: {state.emissions.total_co2eq_g():.6g} gCO2eq "
          f"over {len(state.emissions)} records")
    print(f"wrote: {out / 'trust_report.json'}, {out / 'factsheet.json'}, {out / 'emissions.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.config) != 2:
        raise ConfigError(f"compare needs exactly two --config arguments, got {len(args.config)}")
    sides = []
    for i, config_path in enumerate(args.config):
        tables, config, tree_weights, pillar_weights = _load_inputs(args, config_path)
        scored = _score_pillar(config, tables, tree_weights, args.allow_partial)
        externals = _externals(args, which=i)
        if not externals:
            raise ConfigError("compare needs external pillar scores; pass --pillars")
        trust_w = _trust_weights(pillar_weights, sorted([*externals, PILLAR_ID]), args.allow_partial)
        report = build_trust_report(config, scored, externals, pillar_weights=trust_w)
        ext_ids = sorted(externals)
        trust_without = trust_score(
            [externals[p] for p in ext_ids], [1.0 / len(ext_ids)] * len(ext_ids)
        )
        sides.append({
            "name": config.name,
            "pillars": report["pillars"],
            "trust_with_sustainability": report["trust"],
            "trust_without_sustainability": {
                "score": display_score(trust_without),
                "score_raw": trust_without,
            },
        })

    a, b = sides
    pillar_ids = sorted(set(a["pillars"]) | set(b["pillars"]))
    deltas = {}
    for pillar in pillar_ids:
        sa = a["pillars"].get(pillar)
        sb = b["pillars"].get(pillar)
        deltas[pillar] = (
            None if sa is None or sb is None else sb["score_raw"] - sa["score_raw"]
        )
    raw_a = a["trust_with_sustainability"]["score_raw"]
    raw_b = b["trust_with_sustainability"]["score_raw"]
    winner = a["name"] if raw_a > raw_b else b["name"] if raw_b > raw_a else "tie"
    comparison = {
        "a": a,
        "b": b,
        "pillar_deltas_raw": deltas,
        "trust_delta_raw": raw_b - raw_a,
        "ranked_first": winner,
    }
    out = Path(args.out)
    write_atomic(out / "comparison.json", render_report(comparison))

    name_w = max(len(a["name"]), len(b["name"]), len("pillar"))
    print(f"{'pillar':<24} {a['name']:>{name_w}} {b['name']:>{name_w}}")
    for pillar in pillar_ids:
        da = a["pillars"].get(pillar)
        db = b["pillars"].get(pillar)
        print(f"{pillar:<24} {da['score'] if da else '-':>{name_w}} "
              f"{db['score'] if db else '-':>{name_w}}")
    print(f"{'trust (external only)':<24} {a['trust_without_sustainability']['score']:>{name_w}} "
          f"{b['trust_without_sustainability']['score']:>{name_w}}")
    print(f"{'trust (all pillars)':<24} {a['trust_with_sustainability']['score']:>{name_w}} "
          f"{b['trust_with_sustainability']['score']:>{name_w}}")
    print(f"ranked first: {winner}")
    print(f"wrote: {out / 'comparison.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
