"""
mbqc_crosscheck.cli
===================

Command line:

    plan         write an ExperimentPlan JSON
    run          execute a plan against a device registry
    self-verify  run two flows on one device and compare them
    report       recompute the report of a run from its stored counts
    plots        CSV tables and PNG figures of a report
    oracle       exact noiseless distribution of an instance file

Exit codes: 0 success, 2 invalid plan or input, 3 device failure,
4 verification data incomplete.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .analysis import emit_plots
from .devices import load_registry, registry_flows
from .errors import DeviceFailure, InsufficientShots, MissingDistributions, PlanInvalid, ValidationError
from .graphs import flow_by_name, load_graph
from .harness import (
    DEFAULT_INSTANCES,
    DEFAULT_SHOTS,
    DEFAULT_SUBSET,
    CrossCheckReport,
    ExperimentPlan,
    recompute_report,
    run_experiment,
    self_verify,
)
from .models import all_bitstrings
from .patterns import load_instance, rewrite_angles
from .simulator import mask_oracle, pattern_distribution
from .store import RunStore

logger = logging.getLogger("mbqc_crosscheck")

EXIT_OK, EXIT_PLAN, EXIT_DEVICE, EXIT_INCOMPLETE = 0, 2, 3, 4


def _parse_flows(items: Optional[Sequence[str]]) -> Dict[str, str]:
    flows = {}
    for item in items or ():
        device_id, sep, flow = item.partition("=")
        if not sep or not device_id or not flow:
            raise PlanInvalid(f"Ожидается устройство=поток, получено {item!r}.")
        flows[device_id] = flow
    return flows


def _apply_overrides(plan: ExperimentPlan, args: argparse.Namespace) -> ExperimentPlan:
    for attr, name in (("seed", "master_seed"), ("shots", "shots"), ("instances", "instance_count"),
                       ("subset", "comparison_subset"), ("graph", "graph")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(plan, name, value)
    flows = _parse_flows(getattr(args, "flow", None))
    if flows:
        plan.flows = flows
    if getattr(args, "reference", None):
        plan.reference_bits = {int(k): int(v) for k, v in (r.split("=", 1) for r in args.reference)}
    if getattr(args, "allow_same_width", False):
        plan.allow_same_width = True
    return plan


def _load_plan(args: argparse.Namespace) -> ExperimentPlan:
    plan = ExperimentPlan.load(args.plan) if getattr(args, "plan", None) else ExperimentPlan()
    return _apply_overrides(plan, args)


def _print_summary(report: CrossCheckReport) -> None:
    for pair in report.pairs:
        agg = pair["aggregate"]
        mark = "" if pair["in_table"] else "  (same width)"
        print(f"{pair['pair'][0]} vs {pair['pair'][1]}: ℓ² = {agg['formatted']}  n={agg['n']}{mark}")
    for device, entry in sorted(report.data.get("device_means", {}).items()):
        print(f"{device} [{entry['flow']}]: mean ℓ² = {entry['mean_l2']}  theory = {entry.get('theory_l2')}")


# -------------------- commands --------------------

def cmd_plan(args: argparse.Namespace) -> int:
    plan = _load_plan(args)
    if not plan.flows and args.devices:
        plan.flows = registry_flows(args.devices)
    plan.resolve()
    path = plan.save(args.out)
    print(f"План записан: {path}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    plan = _load_plan(args)
    devices = load_registry(args.devices)
    if not plan.flows:
        plan.flows = registry_flows(args.devices)
    chosen = [d for d in devices if d.device_id in plan.flows]
    missing = sorted(set(plan.flows) - {d.device_id for d in chosen})
    if missing:
        raise PlanInvalid(f"Устройства {missing} отсутствуют в реестре.")
    store = RunStore(args.out).init()
    report = run_experiment(plan, chosen, store=store, workers=args.workers)
    _print_summary(report)
    print(f"Отчёт: {store.report_path}")
    return EXIT_OK


def cmd_self_verify(args: argparse.Namespace) -> int:
    plan = _load_plan(args)
    devices = load_registry(args.devices)
    if args.device:
        matches = [d for d in devices if d.device_id == args.device]
        if not matches:
            raise PlanInvalid(f"Устройство {args.device!r} отсутствует в реестре.")
        device = matches[0]
    else:
        device = devices[0]
    store = RunStore(args.out).init()
    report = self_verify(plan, device, flows=args.flows, store=store, workers=args.workers)
    _print_summary(report)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    store = RunStore(args.out)
    report = recompute_report(store, workers=args.workers)
    _print_summary(report)
    if args.csv:
        for p in store.export_csv(args.csv):
            print(f"CSV: {p}")
    return EXIT_OK


def cmd_plots(args: argparse.Namespace) -> int:
    store = RunStore(args.out)
    paths = emit_plots(CrossCheckReport.load(store), args.to or store.root / "plots")
    for p in paths.all:
        print(p)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    graph, flows = load_graph(instance.graph)
    flow = flow_by_name(flows, instance.flow_id)
    dist = pattern_distribution(graph, flow, instance.angles)
    result = {
        "graph": graph.name,
        "flow": flow.name,
        "labels": list(dist.labels),
        "probs": dict(zip(all_bitstrings(dist.n_bits), (float(p) for p in dist.probs))),
    }
    if instance.bits is not None:
        rewritten = pattern_distribution(graph, flow, rewrite_angles(graph, flow, instance.angles, instance.bits))
        result["rewritten"] = dict(zip(all_bitstrings(rewritten.n_bits), (float(p) for p in rewritten.probs)))
        result["masks"] = mask_oracle(graph, flow, instance.angles, instance.bits)
    text = json.dumps(result, ensure_ascii=False, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


# -------------------- parser --------------------

def _add_plan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--plan", help="plan JSON to start from")
    p.add_argument("--graph", help="built-in graph name or graph file")
    p.add_argument("--flow", action="append", metavar="DEVICE=FLOW", help="flow of a device (repeatable)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--shots", type=int, help=f"shots per job (default {DEFAULT_SHOTS})")
    p.add_argument("--instances", type=int, help=f"instances (default {DEFAULT_INSTANCES})")
    p.add_argument("--subset", type=int, help=f"instances in the comparison subset (default {DEFAULT_SUBSET})")
    p.add_argument("--reference", action="append", metavar="VERTEX=BIT", help="reference bit override")
    p.add_argument("--allow-same-width", action="store_true", help="keep same-width pairs in the table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbqc-crosscheck", description="Cross-device verification of MBQC patterns.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="write an experiment plan")
    _add_plan_flags(p)
    p.add_argument("--devices", help="registry to take device flows from")
    p.add_argument("--out", default="plan.json", help="plan file to write")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run a plan")
    _add_plan_flags(p)
    p.add_argument("--devices", required=True, help="device registry JSON")
    p.add_argument("--out", default="run", help="run directory")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("self-verify", help="compare two flows on one device")
    _add_plan_flags(p)
    p.add_argument("--devices", required=True, help="device registry JSON")
    p.add_argument("--device", help="device id (default: first in the registry)")
    p.add_argument("--flows", nargs=2, metavar="FLOW", help="the two flows to compare")
    p.add_argument("--out", default="self-verify", help="run directory")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_self_verify)

    p = sub.add_parser("report", help="recompute the report from stored counts")
    p.add_argument("--out", default="run", help="run directory")
    p.add_argument("--csv", help="also export CSV tables to this folder")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plots", help="CSV and PNG artefacts of a report")
    p.add_argument("--out", default="run", help="run directory")
    p.add_argument("--to", help="output folder (default <run>/plots)")
    p.set_defaults(func=cmd_plots)

    p = sub.add_parser("oracle", help="exact distribution of an instance file")
    p.add_argument("instance", help="instance JSON")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PlanInvalid as exc:
        logger.error("plan invalid: %s", exc)
        print(exc, file=sys.stderr)
        return EXIT_PLAN
    except DeviceFailure as exc:
        logger.error("device failure: %s", exc)
        print(exc, file=sys.stderr)
        return EXIT_DEVICE
    except (MissingDistributions, InsufficientShots) as exc:
        logger.error("incomplete data: %s", exc)
        print(exc, file=sys.stderr)
        return EXIT_INCOMPLETE
    except ValidationError as exc:
        logger.error("invalid input: %s", exc)
        print(exc, file=sys.stderr)
        return EXIT_PLAN
