"""Command-line entry point: search, bench, ingest, viz, world."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from retroplan.chem.canon import canonical_smiles
from retroplan.chem.complexity import smiles_complexity
from retroplan.harness.bench import BenchDeps, run_benchmark
from retroplan.harness.config import ConfigError, RunConfig, load_config
from retroplan.harness.dot import export_dot
from retroplan.harness.inventory import load_inventory
from retroplan.harness.metrics import compute_metrics, format_report
from retroplan.harness.records import write_run_log
from retroplan.harness.world import load_world, make_synthetic_world
from retroplan.mapping import identity
from retroplan.retrieval import build_index, load_route_db, read_jsonl, save_index
from retroplan.search import run
from retroplan.validate import load_reaction_db

log = logging.getLogger("retroplan")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

_SEARCH_FLAGS = {
    "c": float, "alpha": float, "d_max": int, "max_iterations": int,
    "rag_k": int, "failure_threshold": int, "seed": int,
}


def _add_run_options(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON configuration file")
    for name, typ in _SEARCH_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--inventory", help="building-block file, one SMILES per line")
    p.add_argument("--route-db", help="route database (JSONL) or saved index")
    p.add_argument("--reaction-db", help="reaction database (JSONL) used for validation")
    p.add_argument("--no-validate", action="store_true", help="skip reaction validation")
    p.add_argument("--generator", choices=["http", "replay", "grammar"], default="http")
    p.add_argument("--replay", help="recorded responses (JSONL) for offline replay")
    p.add_argument("--record", help="append live responses to this JSONL file")
    p.add_argument("--world", help="synthetic world directory (grammar generator)")
    p.add_argument("--quality", type=float, default=1.0, help="grammar generator quality q")
    p.add_argument("--routes-per-call", type=int, default=3)
    p.add_argument("--horizon", type=int, default=1, help="levels per grammar route (0 = full)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retroplan", description="AND-OR tree retrosynthesis planner")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="plan a route for one target")
    p.add_argument("target")
    _add_run_options(p)
    p.add_argument("--dot", help="write the final search tree as DOT")
    p.add_argument("--json", action="store_true", help="print the result as JSON")

    p = sub.add_parser("bench", help="run a target list and report metrics")
    p.add_argument("targets", nargs="?", help="file with one target per line (default: world targets)")
    _add_run_options(p)
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--thresholds", default=None, help="comma-separated budgets, e.g. 10,50,100")
    p.add_argument("--log", help="write the run log (JSONL) here")
    p.add_argument("--report-json", help="write the metrics report as JSON here")

    p = sub.add_parser("ingest", help="canonicalise databases and cache fingerprints")
    p.add_argument("--routes", help="route database (JSONL)")
    p.add_argument("--reactions", help="reaction database (JSONL)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("viz", help="search one target and export the tree as DOT")
    p.add_argument("target")
    _add_run_options(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("world", help="write a synthetic benchmark world")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--targets", type=int, default=50)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--min-depth", type=int, default=None)
    p.add_argument("--branching", type=int, default=2)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    overrides = {k: getattr(args, k) for k in _SEARCH_FLAGS if getattr(args, k, None) is not None}
    try:
        search = replace(cfg.search, **overrides)
        prompt = replace(cfg.prompt, rag_k=search.rag_k)
        if getattr(args, "temperature", None) is not None:
            prompt = replace(prompt, temperature=args.temperature)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = dict(cfg.data)
    for key in ("inventory", "route_db", "reaction_db"):
        if getattr(args, key, None):
            data[key] = getattr(args, key)
    par = getattr(args, "parallelism", None) or cfg.parallelism
    thresholds = cfg.thresholds
    if getattr(args, "thresholds", None):
        try:
            thresholds = tuple(sorted(int(x) for x in args.thresholds.split(",")))
        except ValueError:
            raise ConfigError(f"bad thresholds: {args.thresholds}") from None
    if par < 1:
        raise ConfigError("parallelism must be >= 1")
    return RunConfig(search, prompt, cfg.http, data, par, thresholds)


def build_deps(args, cfg: RunConfig) -> tuple[BenchDeps, list[str]]:
    """Services for a run plus the world's targets (empty outside grammar mode)."""
    if args.generator == "grammar":
        if not args.world:
            raise ConfigError("--generator grammar needs --world DIR")
        try:
            world = load_world(args.world, args.quality, args.routes_per_call, args.horizon or None)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load world: {exc}") from None
        validator = None if args.no_validate or not cfg.data.get("reaction_db") else world.reaction_db
        deps = BenchDeps(world.generator, world.inventory, world.route_index, validator,
                         world.scorer, identity, cfg.prompt, molecular_weight=None)
        return deps, world.targets

    from retroplan.generator.http import HttpGenerator, ResponseStore

    if not cfg.data.get("inventory"):
        raise ConfigError("an inventory file is required (--inventory or data.inventory)")
    try:
        inventory = load_inventory(cfg.data["inventory"])
        retriever = load_route_db(cfg.data["route_db"]) if cfg.data.get("route_db") else None
        validator = None
        if cfg.data.get("reaction_db") and not args.no_validate:
            validator = load_reaction_db(cfg.data["reaction_db"])
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    if args.generator == "replay" and not args.replay:
        raise ConfigError("--generator replay needs --replay FILE")
    replay = ResponseStore(args.replay) if args.replay else None
    record = ResponseStore(args.record) if args.record else None
    if args.generator == "http" and cfg.http.api_key() is None:
        log.warning("environment variable %s is not set; sending unauthenticated requests",
                    cfg.http.api_key_env)
    gen = HttpGenerator(cfg.http, replay=replay, record=record, offline=args.generator == "replay")
    return BenchDeps(gen, inventory, retriever, validator, smiles_complexity, canonical_smiles,
                     cfg.prompt), []


def _search(args, cfg: RunConfig):
    deps, _ = build_deps(args, cfg)
    try:
        res = run(args.target, deps.generator, retriever=deps.retriever, validator=deps.validator,
                  inventory=deps.inventory, config=cfg.search, scorer=deps.scorer,
                  canonicalizer=deps.canonicalizer, prompt_config=deps.prompt_config)
    except ValueError as exc:
        raise ConfigError(f"bad target: {exc}") from None
    return res


def cmd_search(args) -> int:
    cfg = resolve_config(args)
    res = _search(args, cfg)
    if args.dot:
        export_dot(res.tree, args.dot)
    route = res.solution or res.partial
    if args.json:
        print(json.dumps({
            "target": res.tree.target, "status": res.status.value,
            "iterations_used": res.iterations_used,
            "input_tokens": res.usage.input_tokens, "output_tokens": res.usage.output_tokens,
            "route": route.to_dict() if route else None,
        }, indent=2))
    else:
        print(f"{res.tree.target}: {res.status.value} after {res.iterations_used} iterations")
        if route is not None:
            for step in route.steps():
                print(f"  {step.product} <= {' + '.join(step.reactants)}")
    return EXIT_OK if res.solved else EXIT_PARTIAL


def cmd_viz(args) -> int:
    cfg = resolve_config(args)
    res = _search(args, cfg)
    export_dot(res.tree, args.out)
    print(f"wrote {args.out} ({len(res.tree.or_nodes)} molecules, {len(res.tree.and_nodes)} reactions)")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    deps, world_targets = build_deps(args, cfg)
    if args.targets:
        try:
            targets = [ln.split()[0] for ln in Path(args.targets).read_text().splitlines() if ln.strip()]
        except OSError as exc:
            raise ConfigError(str(exc)) from None
    else:
        targets = world_targets
    records = run_benchmark(targets, deps, cfg.search, cfg.parallelism)
    if args.log:
        write_run_log(args.log, records, cfg.to_dict())
    report = compute_metrics(records, cfg.thresholds)
    print(format_report(report))
    if args.report_json:
        Path(args.report_json).write_text(json.dumps(report.to_dict(), indent=2))
    return EXIT_PARTIAL if report.errors else EXIT_OK


def cmd_ingest(args) -> int:
    if not args.routes and not args.reactions:
        raise ConfigError("nothing to ingest: give --routes and/or --reactions")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    skipped = 0
    try:
        if args.routes:
            rows = list(read_jsonl(args.routes))
            index = build_index(r for r in rows if "_bad" not in r)
            bad = sum(1 for r in rows if "_bad" in r) + index.skipped
            save_index(index, out / "route_index.jsonl")
            print(f"routes: {len(index)} indexed, {bad} skipped")
            skipped += bad
        if args.reactions:
            db = load_reaction_db(args.reactions)
            with open(out / "reactions.jsonl", "w") as fh:
                for rec in db.records:
                    fh.write(json.dumps({"source_id": rec.source_id, "product": rec.product,
                                         "reactants": sorted(rec.reactants)}) + "\n")
            print(f"reactions: {len(db)} kept, {db.skipped} skipped")
            skipped += db.skipped
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    return EXIT_PARTIAL if skipped else EXIT_OK


def cmd_world(args) -> int:
    try:
        world = make_synthetic_world(args.seed, args.targets, args.depth, args.branching,
                                     min_depth=args.min_depth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    world.save(args.out_dir)
    print(f"wrote {len(world.targets)} targets, {len(world.inventory)} building blocks to {args.out_dir}")
    return EXIT_OK


COMMANDS = {"search": cmd_search, "bench": cmd_bench, "ingest": cmd_ingest, "viz": cmd_viz,
            "world": cmd_world}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
