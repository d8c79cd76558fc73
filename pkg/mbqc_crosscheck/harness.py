"""
mbqc_crosscheck.harness
=======================

Experiment orchestration:
- ExperimentPlan: graph, flow per device, instance/shot counts, seeds
- job planning with per-job random fixes and angle rewrites
- concurrent dispatch to devices with per-job persistence
- CrossCheckReport: pairwise ℓ² estimates, device means, theory column,
  regression, sanity flags, sub-sampling curves

Every random choice derives from the master seed through
``numpy.random.SeedSequence`` keyed by instance, device and job, so the
report does not depend on dispatch order or concurrency.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .devices import Device, Job, LocalSimulatorDevice, ReplayDevice, VirtualDevice, check_device_id
from .errors import DegenerateInput, DeviceFailure, PlanInvalid, ValidationError
from .graphs import flow_by_name, load_graph, validate_flow
from .models import AngleSet, CountsTable, FlowSpec, OpenGraph, RelationSpec
from .patterns import (
    DEFAULT_GRID,
    compile_to_circuit,
    conditioned_angles,
    outcome_mask,
    random_bits,
    random_instance,
    relate_outcomes,
    rewrite_angles,
)
from .simulator import fix_distributions, pattern_distribution
from .store import RunStore
from .verifier import (
    SELF_MODES,
    build_conditioned_pvector,
    build_pvector,
    format_uncertainty,
    l2_collision,
    l2_exact,
    l2_versus_theory,
    sanity_classify,
    self_collision_estimate,
    subsample_analysis,
    total_least_squares,
)

logger = logging.getLogger(__name__)

DEFAULT_SHOTS = 10_000
DEFAULT_INSTANCES = 200
DEFAULT_SUBSET = 34
DEFAULT_JOBS = 4
DEFAULT_SUBSAMPLE_SIZES = (5, 10, 20, 34, 50, 100, 150, 200)
DEFAULT_SUBSAMPLE_TRIALS = 200

# SeedSequence tags
_INSTANCE, _JOB, _SUBSET, _SUBSAMPLE = 1, 2, 3, 4


def _crc(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def _f(x: Optional[float]) -> Optional[float]:
    return None if x is None or not math.isfinite(x) else float(x)


def _mean_err(values: Sequence[float], errors: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    n = len(values)
    errs = [e for e in errors if e is not None and math.isfinite(e)]
    return float(np.mean(values)), float(math.sqrt(sum(e * e for e in errs)) / n) if errs else None


# -------------------- plan --------------------

@dataclass
class ExperimentPlan:
    """
    What to run.

    ``flows`` maps every device id to the name of the flow it runs on
    ``graph`` (a built-in name or a graph file).
    """
    graph: str = "H6"
    flows: Dict[str, str] = field(default_factory=dict)
    instance_count: int = DEFAULT_INSTANCES
    comparison_subset: int = DEFAULT_SUBSET
    shots: int = DEFAULT_SHOTS
    grid: Tuple[float, ...] = DEFAULT_GRID
    master_seed: int = 0
    jobs_per_instance: int = DEFAULT_JOBS
    randomize: bool = True
    self_mode: str = "fixes"
    allow_same_width: bool = False
    reference_bits: Dict[int, int] = field(default_factory=dict)
    theory: bool = True
    subsample_sizes: Tuple[int, ...] = DEFAULT_SUBSAMPLE_SIZES
    subsample_trials: int = DEFAULT_SUBSAMPLE_TRIALS

    def __post_init__(self) -> None:
        self.flows = {str(k): str(v) for k, v in self.flows.items()}
        self.grid = tuple(float(a) for a in self.grid)
        self.reference_bits = {int(k): int(v) for k, v in self.reference_bits.items()}
        self.subsample_sizes = tuple(int(s) for s in self.subsample_sizes)

    def resolve(self) -> Tuple[OpenGraph, Dict[str, FlowSpec]]:
        """
        Load the graph and check every setting.

        Raises
        ------
        PlanInvalid
        """
        try:
            graph, flows = load_graph(self.graph)
        except ValidationError as exc:
            raise PlanInvalid(f"Граф плана недоступен: {exc}") from exc
        problems = []
        if len(self.flows) < 2:
            problems.append("нужно не меньше двух устройств")
        if self.instance_count < 1:
            problems.append("число экземпляров должно быть положительным")
        if not 1 <= self.comparison_subset <= self.instance_count:
            problems.append("подмножество сравнения должно лежать в 1..instance_count")
        if self.shots < 3:
            problems.append("нужно не меньше трёх запусков на задание")
        if self.jobs_per_instance < 2:
            problems.append("нужно не меньше двух заданий со случайной фиксацией")
        if not self.grid:
            problems.append("сетка углов пуста")
        if self.self_mode not in SELF_MODES:
            problems.append(f"неизвестный режим {self.self_mode!r}")
        for v, b in self.reference_bits.items():
            if v not in graph.vertices or b not in (0, 1):
                problems.append(f"некорректный опорный бит {v}={b}")

        by_device: Dict[str, FlowSpec] = {}
        for device_id, flow_name in sorted(self.flows.items()):
            try:
                check_device_id(device_id)
                flow = flow_by_name(flows, flow_name)
            except ValidationError as exc:
                problems.append(str(exc))
                continue
            if not validate_flow(graph, flow).valid:
                problems.append(f"поток {flow_name!r} некорректен для графа")
            by_device[device_id] = flow
        if problems:
            raise PlanInvalid("План некорректен: " + "; ".join(problems) + ".")
        return graph, by_device

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["grid"] = list(self.grid)
        d["reference_bits"] = {str(k): v for k, v in self.reference_bits.items()}
        d["subsample_sizes"] = list(self.subsample_sizes)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentPlan":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise PlanInvalid(f"Неизвестные поля плана: {sorted(unknown)}.")
        return cls(**dict(data))

    def save(self, path: str | Path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -------------------- jobs --------------------

@dataclass(frozen=True)
class JobSpec:
    """A job plus what the harness keeps to itself (fixes, output mask)."""
    job: Job
    device_id: str
    instance: int
    scope: Tuple[int, ...]
    index: int
    fixes: Mapping[int, int]
    mask: str
    labels: Tuple[int, ...]

    @property
    def is_reference(self) -> bool:
        return self.index < 0


@dataclass(frozen=True)
class PairSetup:
    device_a: str
    device_b: str
    relation: RelationSpec

    @property
    def same_width(self) -> bool:
        return len(self.relation.outputs_a) == len(self.relation.outputs_b)

    @property
    def key(self) -> str:
        return f"{self.device_a}|{self.device_b}"


def scope_label(scope: Sequence[int]) -> str:
    return ".".join(str(v) for v in scope)


def job_id(instance: int, device_id: str, scope: Sequence[int] = (), index: int = -1) -> str:
    if index < 0:
        return f"i{instance:04d}-{device_id}-ref"
    return f"i{instance:04d}-{device_id}-v{scope_label(scope)}-j{index:02d}"


def instance_angles(plan: ExperimentPlan, graph: OpenGraph, instance: int) -> AngleSet:
    return random_instance(graph, plan.grid, seed=np.random.SeedSequence([plan.master_seed, _INSTANCE, instance]))


def plan_pairs(plan: ExperimentPlan, graph: OpenGraph, flows: Mapping[str, FlowSpec]) -> List[PairSetup]:
    pairs = []
    for a, b in combinations(sorted(flows), 2):
        rel = relate_outcomes(graph, flows[a], flows[b])
        free = set(rel.reference_bits)
        ref = {v: bit for v, bit in plan.reference_bits.items() if v in free}
        if ref:
            rel = relate_outcomes(graph, flows[a], flows[b], reference_bits=ref)
        pairs.append(PairSetup(a, b, rel))
    return pairs


def _make_spec(
    plan: ExperimentPlan,
    graph: OpenGraph,
    flow: FlowSpec,
    angles: AngleSet,
    device_id: str,
    instance: int,
    scope: Tuple[int, ...],
    index: int,
) -> JobSpec:
    outputs = flow.outputs(graph)
    tag = [plan.master_seed, _JOB, instance, _crc(device_id), _crc(scope_label(scope)), index + 1]
    bits_seed, fix_seed, device_seed = np.random.SeedSequence(tag).generate_state(3)

    fixes: Dict[int, int] = {}
    if index >= 0:
        positions = [v for v in scope if v not in outputs]
        drawn = np.random.default_rng(int(fix_seed)).integers(0, 2, size=len(positions))
        fixes = {v: int(b) for v, b in zip(positions, drawn)}
    outside = {v: b for v, b in plan.reference_bits.items() if v not in outputs and v not in fixes and v not in scope}
    run_angles = conditioned_angles(angles, {**outside, **fixes})

    mask = "0" * len(outputs)
    if plan.randomize:
        bits = random_bits(graph, flow, seed=int(bits_seed))
        run_angles = rewrite_angles(graph, flow, run_angles, bits)
        mask = outcome_mask(graph, flow, bits)

    name = job_id(instance, device_id, scope, index)
    circuit = dataclasses.replace(compile_to_circuit(graph, flow, run_angles), ref=name)
    return JobSpec(
        job=Job(name, circuit, plan.shots, int(device_seed)),
        device_id=device_id,
        instance=instance,
        scope=scope,
        index=index,
        fixes=fixes,
        mask=mask,
        labels=outputs,
    )


def plan_jobs(
    plan: ExperimentPlan,
    graph: OpenGraph,
    flows: Mapping[str, FlowSpec],
    pairs: Sequence[PairSetup],
) -> List[JobSpec]:
    """One reference job per (instance, device) plus random-fix jobs per variable-set scope."""
    scopes: Dict[str, set] = {d: set() for d in flows}
    for p in pairs:
        scopes[p.device_a].add(p.relation.variable_set)
        scopes[p.device_b].add(p.relation.variable_set)
    specs = []
    for i in range(plan.instance_count):
        angles = instance_angles(plan, graph, i)
        for d in sorted(flows):
            specs.append(_make_spec(plan, graph, flows[d], angles, d, i, (), -1))
            for scope in sorted(scopes[d]):
                for j in range(plan.jobs_per_instance):
                    specs.append(_make_spec(plan, graph, flows[d], angles, d, i, scope, j))
    return specs


def _unmask(spec: JobSpec, raw: CountsTable) -> CountsTable:
    table = raw.relabel(spec.mask)
    return CountsTable(
        n_bits=table.n_bits,
        counts=table.counts,
        shots=table.shots,
        seed=raw.seed,
        device_id=spec.device_id,
        circuit_ref=spec.job.job_id,
        labels=spec.labels,
        fixes=spec.fixes,
    )


def dispatch(
    specs: Sequence[JobSpec],
    devices: Mapping[str, Device],
    workers: int = 1,
    store: Optional[RunStore] = None,
) -> Tuple[Dict[str, CountsTable], List[Dict[str, Any]]]:
    """
    Run every job; return unmasked tables by job id and audit records.

    Raises
    ------
    DeviceFailure
        From a strict device; remaining jobs are cancelled.
    """
    results: Dict[str, CountsTable] = {}
    audit: List[Dict[str, Any]] = []
    fatal: Optional[DeviceFailure] = None
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        futures = {pool.submit(devices[s.device_id].run, s.job): s for s in specs}
        for fut in as_completed(futures):
            spec = futures[fut]
            if fut.cancelled():
                continue
            try:
                raw = fut.result()
            except DeviceFailure as exc:
                if devices[spec.device_id].strict and not exc.audited:
                    fatal = exc
                    for other in futures:
                        other.cancel()
                    break
                audit.append({
                    "device_id": spec.device_id,
                    "job_id": spec.job.job_id,
                    "instance": spec.instance,
                    "error": str(exc),
                })
                continue
            if store is not None:
                store.save_counts(spec.device_id, spec.job.job_id, raw)
            results[spec.job.job_id] = _unmask(spec, raw)
    if fatal is not None:
        logger.error("device %s failed on %s", fatal.device_id, fatal.job_id)
        raise fatal
    audit.sort(key=lambda r: r["job_id"])
    return results, audit


# -------------------- report --------------------

@dataclass
class CrossCheckReport:
    """
    Result of a run.

    ``data`` is fully determined by the plan and the counts; ``meta``
    (timestamps, device descriptions) and ``exact`` (noisy-exact pair
    distances, local simulators only) are kept apart from it.
    """
    data: Dict[str, Any]
    meta: Dict[str, Any] = field(default_factory=dict)
    exact: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @property
    def pairs(self) -> List[Dict[str, Any]]:
        return self.data.get("pairs", [])

    def pair(self, device_a: str, device_b: str) -> Dict[str, Any]:
        for p in self.pairs:
            if set(p["pair"]) == {device_a, device_b}:
                return p
        raise KeyError(f"{device_a}|{device_b}")

    def pair_table(self) -> List[Dict[str, Any]]:
        """Pairs compared in the headline table (different output widths unless overridden)."""
        return [p for p in self.pairs if p["in_table"]]

    def save(self, store: RunStore) -> Path:
        path = store.save_report(self.data)
        store.save_meta(self.meta)
        if self.exact:
            (store.root / "exact.json").write_text(
                json.dumps(self.exact, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        return path

    @classmethod
    def load(cls, store: RunStore) -> "CrossCheckReport":
        return cls(data=store.load_report())


def _has_exact(device: Device) -> bool:
    if isinstance(device, VirtualDevice):
        return isinstance(device.inner, LocalSimulatorDevice)
    return isinstance(device, LocalSimulatorDevice)


def _device_noise(device: Device):
    inner = device.inner if isinstance(device, VirtualDevice) else device
    return inner.noise


def exact_pair_l2(
    plan: ExperimentPlan,
    graph: OpenGraph,
    pair: PairSetup,
    angles: AngleSet,
    noise_a: Any,
    noise_b: Any,
) -> float:
    """Exact ‖p_A - p_B‖² of two simulated devices on the full conditioned vectors."""
    rel = pair.relation
    vectors = []
    for side, noise in (("A", noise_a), ("B", noise_b)):
        flow = rel.flow_a if side == "A" else rel.flow_b
        outputs = rel.outputs(side)
        outside = {v: b for v, b in plan.reference_bits.items() if v not in rel.variable_set and v not in outputs}
        dists = fix_distributions(
            graph, flow, conditioned_angles(angles, outside), rel.fix_positions(side), noise
        )
        vectors.append(build_conditioned_pvector(dists, rel, side))
    return l2_exact(vectors[0], vectors[1]).value


def _ideal_distribution(plan: ExperimentPlan, graph: OpenGraph, flow: FlowSpec, angles: AngleSet):
    outputs = flow.outputs(graph)
    outside = {v: b for v, b in plan.reference_bits.items() if v not in outputs}
    return pattern_distribution(graph, flow, angles, outside)


def _scatter_points(
    pair: PairSetup,
    ref_a: CountsTable,
    ref_b: CountsTable,
) -> Tuple[List[Tuple[float, float]], List[float], List[float]]:
    rel = pair.relation
    scale = float(rel.scale)
    fa, fb = ref_a.frequencies(), ref_b.frequencies()
    pts, xe, ye = [], [], []
    for a, b in rel.pairs():
        x = float(fa[int(a, 2)])
        y = scale * float(fb[int(b, 2)])
        pts.append((x, y))
        xe.append(math.sqrt(max(x * (1 - x), 0.0) / ref_a.shots))
        yb = float(fb[int(b, 2)])
        ye.append(scale * math.sqrt(max(yb * (1 - yb), 0.0) / ref_b.shots))
    return pts, xe, ye


def comparison_subset(plan: ExperimentPlan, excluded: Sequence[int]) -> List[int]:
    """Seeded subset of instances entering the averages, excluded instances removed."""
    rng = np.random.default_rng(np.random.SeedSequence([plan.master_seed, _SUBSET]))
    chosen = rng.choice(plan.instance_count, size=plan.comparison_subset, replace=False)
    bad = set(excluded)
    return sorted(int(i) for i in chosen if int(i) not in bad)


def _assemble(
    plan: ExperimentPlan,
    graph: OpenGraph,
    flows: Mapping[str, FlowSpec],
    pairs: Sequence[PairSetup],
    devices: Mapping[str, Device],
    tables: Mapping[str, CountsTable],
    excluded: Sequence[int],
    audit: List[Dict[str, Any]],
) -> CrossCheckReport:
    included = [i for i in range(plan.instance_count) if i not in set(excluded)]
    subset = comparison_subset(plan, excluded)
    in_subset = set(subset)
    if len(subset) < plan.comparison_subset:
        logger.warning("comparison subset shrank to %d instance(s) after exclusions", len(subset))
    angles_by_instance = {i: instance_angles(plan, graph, i) for i in included}

    def jobs_of(d: str, i: int, scope: Tuple[int, ...]) -> List[CountsTable]:
        return [tables[job_id(i, d, scope, j)] for j in range(plan.jobs_per_instance)]

    exact: Dict[str, Dict[str, float]] = {}
    pair_rows = []
    for p in pairs:
        scope = p.relation.variable_set
        per_instance = []
        values, errors = [], []
        can_exact = _has_exact(devices[p.device_a]) and _has_exact(devices[p.device_b])
        for i in included:
            est = l2_collision(
                jobs_of(p.device_a, i, scope),
                jobs_of(p.device_b, i, scope),
                p.relation,
                self_mode=plan.self_mode,
                reference_a=tables[job_id(i, p.device_a)],
                reference_b=tables[job_id(i, p.device_b)],
            )
            row = est.to_dict()
            per_instance.append({
                "instance_id": i,
                "in_subset": i in in_subset,
                "l2": {"value": row["value"], "err": row["err"]},
                "components": row["components"],
            })
            if i in in_subset:
                values.append(est.value)
                errors.append(est.std_error)
            if can_exact:
                exact.setdefault(p.key, {})[str(i)] = exact_pair_l2(
                    plan, graph, p, angles_by_instance[i],
                    _device_noise(devices[p.device_a]), _device_noise(devices[p.device_b]),
                )
        mean, err = _mean_err(values, errors)

        points, xe, ye = [], [], []
        for i in subset:
            pts, a_err, b_err = _scatter_points(p, tables[job_id(i, p.device_a)], tables[job_id(i, p.device_b)])
            points += pts
            xe += a_err
            ye += b_err
        try:
            regression = total_least_squares(points, xe, ye).to_dict()
        except DegenerateInput as exc:
            regression = {"error": str(exc)}

        all_values = [r["l2"]["value"] for r in per_instance if r["l2"]["value"] is not None]
        sizes = [s for s in plan.subsample_sizes if s <= len(all_values)]
        if all_values and sizes:
            frame = subsample_analysis(
                all_values, sizes, plan.subsample_trials,
                seed=np.random.SeedSequence([plan.master_seed, _SUBSAMPLE, _crc(p.key)]),
            )
            subsample = [{k: (int(v) if k in ("size", "subsets") else _f(v)) for k, v in r.items()}
                         for r in frame.to_dict(orient="records")]
        else:
            subsample = []

        pair_rows.append({
            "pair": [p.device_a, p.device_b],
            "flows": [p.relation.flow_a.name, p.relation.flow_b.name],
            "relation": p.relation.to_dict(),
            "same_width": p.same_width,
            "in_table": (not p.same_width) or plan.allow_same_width,
            "per_instance": per_instance,
            "aggregate": {
                "mean_l2": _f(mean),
                "err": _f(err),
                "n": len(values),
                "formatted": format_uncertainty(mean, err) if mean is not None else None,
            },
            "regression": regression,
            "subsample": subsample,
        })

    device_means: Dict[str, Dict[str, Any]] = {}
    sanity: Dict[str, Dict[str, Any]] = {}
    distributions: Dict[str, Dict[str, Any]] = {}
    for d in sorted(flows):
        flow = flows[d]
        outputs = flow.outputs(graph)
        mine = [r for r in pair_rows if d in r["pair"] and r["aggregate"]["mean_l2"] is not None]
        m, e = _mean_err([r["aggregate"]["mean_l2"] for r in mine], [r["aggregate"]["err"] for r in mine])
        entry: Dict[str, Any] = {"flow": flow.name, "mean_l2": _f(m), "err": _f(e), "pairs": len(mine)}

        own = relate_outcomes(graph, flow, flow)
        flags: Dict[str, int] = {}
        pps, pp_errs, theory_vals, theory_errs = [], [], [], []
        distributions[d] = {}
        for i in included:
            ref = tables[job_id(i, d)]
            pp = self_collision_estimate(ref)
            flag = sanity_classify(pp.value, len(outputs), pp.std_error).value
            flags[flag] = flags.get(flag, 0) + 1
            if i not in in_subset:
                continue
            pps.append(pp.value)
            pp_errs.append(pp.std_error)
            ideal = _ideal_distribution(plan, graph, flow, angles_by_instance[i]) if plan.theory else None
            if ideal is not None:
                th = l2_versus_theory([ref], own, "A", build_pvector(ideal, own, "A"))
                theory_vals.append(th.value)
                theory_errs.append(th.std_error)
            distributions[d][str(i)] = {
                "labels": list(outputs),
                "shots": ref.shots,
                "empirical": [float(x) for x in ref.frequencies()],
                "ideal": [float(x) for x in ideal.probs] if ideal is not None else None,
            }
        if plan.theory:
            tm, te = _mean_err(theory_vals, theory_errs)
            entry.update({"theory_l2": _f(tm), "theory_err": _f(te), "theory_scalable": False})
        device_means[d] = entry
        pm, pe = _mean_err(pps, pp_errs)
        sanity[d] = {
            "n_outputs": len(outputs),
            "counts": dict(sorted(flags.items())),
            "mean_pp": _f(pm),
            "err": _f(pe),
            "flag": sanity_classify(pm, len(outputs), pe or 0.0).value if pm is not None else None,
        }

    data = {
        "graph": graph.name,
        "plan": plan.to_dict(),
        "devices": {d: {"flow": flows[d].name, "outputs": list(flows[d].outputs(graph))} for d in sorted(flows)},
        "pairs": pair_rows,
        "device_means": device_means,
        "sanity": sanity,
        "distributions": distributions,
        "excluded_instances": sorted(excluded),
        "comparison_instances": subset,
        "audit": audit,
        "version": __version__,
    }
    return CrossCheckReport(data=data, exact=exact)


def run_experiment(
    plan: ExperimentPlan,
    devices: Sequence[Device],
    store: Optional[RunStore] = None,
    workers: int = 1,
) -> CrossCheckReport:
    """
    Run ``plan`` on ``devices`` and build the cross-check report.

    Raises
    ------
    PlanInvalid
        Invalid plan, fewer than two devices, or devices without a flow.
    DeviceFailure
        From a strict device.
    """
    started = time.time()
    by_id = {d.device_id: d for d in devices}
    if len(by_id) < 2:
        raise PlanInvalid("Для перекрёстной проверки нужно не меньше двух устройств.")
    if set(by_id) != set(plan.flows):
        raise PlanInvalid(
            f"Устройства {sorted(by_id)} не совпадают с назначениями потоков {sorted(plan.flows)}."
        )
    graph, flows = plan.resolve()
    pairs = plan_pairs(plan, graph, flows)
    specs = plan_jobs(plan, graph, flows, pairs)
    logger.info("running %d job(s) on %d device(s), %d instance(s)", len(specs), len(by_id), plan.instance_count)

    if store is not None:
        store.save_plan(plan.to_dict())
    tables, audit = dispatch(specs, by_id, workers=workers, store=store)
    excluded = sorted({r["instance"] for r in audit})
    if excluded:
        logger.warning("excluding %d instance(s) after device failures", len(excluded))

    report = _assemble(plan, graph, flows, pairs, by_id, tables, excluded, audit)
    report.meta = {
        "started": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "finished": datetime.now(tz=timezone.utc).isoformat(),
        "seconds": round(time.time() - started, 3),
        "workers": workers,
        "jobs": len(specs),
        "devices": [by_id[d].describe() for d in sorted(by_id)],
    }
    if store is not None:
        report.save(store)
        store.save_audit(audit)
    logger.info("report ready: %d pair(s)", len(report.pairs))
    return report


def self_verify(
    plan: ExperimentPlan,
    device: Device,
    flows: Optional[Sequence[str]] = None,
    store: Optional[RunStore] = None,
    workers: int = 1,
) -> CrossCheckReport:
    """
    Run two flows of one graph on a single device and compare them.

    The device appears under two ids ``<id>@<flow>``; without ``flows`` the
    first two flows of the graph are used.
    """
    if flows is None:
        try:
            _, graph_flows = load_graph(plan.graph)
        except ValidationError as exc:
            raise PlanInvalid(f"Граф плана недоступен: {exc}") from exc
        flows = [f.name for f in graph_flows[:2]]
    if len(flows) != 2 or flows[0] == flows[1]:
        raise PlanInvalid("Для самопроверки нужны два разных потока.")
    virtual = [VirtualDevice(f"{device.device_id}@{name}", device) for name in flows]
    local_plan = dataclasses.replace(plan, flows={v.device_id: name for v, name in zip(virtual, flows)})
    return run_experiment(local_plan, virtual, store=store, workers=workers)


def replay_devices(plan: ExperimentPlan, store: RunStore) -> List[Device]:
    """Replay devices over the counts a previous run stored; audited jobs fail again."""
    failed: Dict[str, Dict[str, str]] = {}
    for record in store.load_audit():
        failed.setdefault(record["device_id"], {})[record["job_id"]] = record["error"]
    return [ReplayDevice(d, store.counts_dir(d), failed.get(d)) for d in sorted(plan.flows)]


def recompute_report(store: RunStore, workers: int = 1) -> CrossCheckReport:
    """Rebuild the report of a stored run from its plan and counts."""
    plan = ExperimentPlan.from_dict(store.load_plan())
    return run_experiment(plan, replay_devices(plan, store), store=store, workers=workers)
