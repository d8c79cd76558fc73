"""
mbqc_crosscheck.patterns
========================

Measurement patterns as circuits:
- compile (graph, flow, angles) to a J/CZ circuit on the all-zero branch
- rewrite angles with randomization bits (k on vertices, r on outputs)
- output masks and the relation between two flows of one graph
- seeded random instances on an angle grid, instance files
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import (
    BitsShapeMismatch,
    EmptyGrid,
    IncompatibleFlows,
    InvalidFlow,
    MissingAngle,
    ValidationError,
)
from .graphs import paths, validate_flow, measurement_rank
from .models import (
    AngleSet,
    Circuit,
    FlowSpec,
    Gate,
    OpenGraph,
    RandomizationBits,
    RelationSpec,
)

DEFAULT_GRID: Tuple[float, ...] = tuple(i * math.pi / 4 for i in range(8))


def _require_valid(graph: OpenGraph, flow: FlowSpec) -> None:
    report = validate_flow(graph, flow)
    if not report.valid:
        details = "; ".join(v.message for v in report.violations)
        raise InvalidFlow(f"Поток {flow.name!r} некорректен: {details}")


def compile_to_circuit(graph: OpenGraph, flow: FlowSpec, angles: AngleSet) -> Circuit:
    """
    Circuit of the all-zero branch of the pattern.

    Each flow path is a wire (sorted by output vertex id); every vertex on it
    contributes ``J(angle)``. A non-flow edge (u, w) becomes a CZ after the
    J gates of the predecessors of u and w and before the J gates of u and
    w. Ties are broken by the flow's measurement order. Every wire ends with
    a terminal ``M``.

    Raises
    ------
    InvalidFlow, MissingAngle
    """
    _require_valid(graph, flow)
    missing = [v for v in graph.vertices if v not in angles]
    if missing:
        raise MissingAngle(f"Нет углов для вершин {missing}.")

    wires = paths(graph, flow)
    wire_of = {v: i for i, chain in enumerate(wires) for v in chain}
    pred = {w: v for v, w in flow.successor.items()}
    rank = measurement_rank(graph, flow)

    dag = nx.DiGraph()
    for v in graph.vertices:
        dag.add_node(("J", v, 0))
        if v in pred:
            dag.add_edge(("J", pred[v], 0), ("J", v, 0))
    flow_edges = {(min(v, w), max(v, w)) for v, w in flow.successor.items()}
    for u, w in graph.edges:
        if (u, w) in flow_edges:
            continue
        cz = ("CZ", u, w)
        dag.add_node(cz)
        for x in (u, w):
            if x in pred:
                dag.add_edge(("J", pred[x], 0), cz)
            dag.add_edge(cz, ("J", x, 0))

    def key(node: Tuple[str, int, int]) -> Tuple[int, int, int, int]:
        kind, a, b = node
        if kind == "J":
            return (rank[a], 1, a, 0)
        return (min(rank[a], rank[b]), 0, a, b)

    try:
        schedule = list(nx.lexicographical_topological_sort(dag, key=key))
    except nx.NetworkXUnfeasible:
        raise InvalidFlow(f"Поток {flow.name!r} не задаёт порядок гейтов.") from None

    gates = []
    for kind, a, b in schedule:
        if kind == "J":
            gates.append(Gate("J", (wire_of[a],), angle=angles[a], vertex=a))
        else:
            gates.append(Gate("CZ", (wire_of[a], wire_of[b])))
    gates += [Gate("M", (i,), vertex=chain[-1]) for i, chain in enumerate(wires)]

    return Circuit(
        wires=tuple(range(len(wires))),
        gates=tuple(gates),
        wire_to_vertex={i: chain[-1] for i, chain in enumerate(wires)},
        ref=f"{graph.name}/{flow.name}",
    )


# -------------------- randomization --------------------

def _check_bits(graph: OpenGraph, flow: FlowSpec, bits: RandomizationBits) -> None:
    if set(bits.k) != set(graph.vertices):
        raise BitsShapeMismatch("Биты k должны быть заданы ровно на всех вершинах графа.")
    if set(bits.r) != set(flow.outputs(graph)):
        raise BitsShapeMismatch("Биты r должны быть заданы ровно на выходах потока.")


def rewrite_angles(graph: OpenGraph, flow: FlowSpec, angles: AngleSet, bits: RandomizationBits) -> AngleSet:
    """
    Apply the stabilizers ∏ K_v^{k_v} and the output masks r to an angle set.

    ``α̃_v = (-1)^{k_v} α_v + π (Σ_{u∈N(v)} k_u + r_v [v output]) mod 2π``

    Raises
    ------
    BitsShapeMismatch, MissingAngle
    """
    _check_bits(graph, flow, bits)
    outputs = set(flow.outputs(graph))
    result = {}
    for v in graph.vertices:
        if v not in angles:
            raise MissingAngle(f"Нет угла для вершины {v}.")
        flips = sum(bits.k[u] for u in graph.neighbors(v))
        if v in outputs:
            flips += bits.r[v]
        sign = -1.0 if bits.k[v] else 1.0
        result[v] = sign * angles[v] + math.pi * (flips % 2)
    return AngleSet(result)


def outcome_mask(graph: OpenGraph, flow: FlowSpec, bits: RandomizationBits) -> str:
    """
    XOR mask over the flow's outputs (ascending id) undoing a rewrite.

    Stabilizers leave every outcome label unchanged (the bra at v goes to
    angle -α_v, the bras on N(v) to α+π, the joint distribution is the
    same), so only r relabels outputs. :func:`mbqc_crosscheck.simulator.mask_oracle`
    checks this against brute force.
    """
    _check_bits(graph, flow, bits)
    return "".join(str(bits.r[v]) for v in flow.outputs(graph))


def compose_bits(b1: RandomizationBits, b2: RandomizationBits) -> RandomizationBits:
    """Bits of the rewrite equal to rewriting with ``b1`` then ``b2``."""
    if set(b1.k) != set(b2.k) or set(b1.r) != set(b2.r):
        raise BitsShapeMismatch("Нельзя объединить биты для разных графов или потоков.")
    return RandomizationBits(
        k={v: b1.k[v] ^ b2.k[v] for v in b1.k},
        r={v: b1.r[v] ^ b2.r[v] for v in b1.r},
    )


def random_bits(graph: OpenGraph, flow: FlowSpec, seed: Any = None) -> RandomizationBits:
    rng = np.random.default_rng(seed)
    k = rng.integers(0, 2, size=graph.n)
    outputs = flow.outputs(graph)
    r = rng.integers(0, 2, size=len(outputs))
    return RandomizationBits(
        k={v: int(b) for v, b in zip(graph.vertices, k)},
        r={v: int(b) for v, b in zip(outputs, r)},
    )


def conditioned_angles(angles: AngleSet, fixes: Mapping[int, int]) -> AngleSet:
    """Outcome 1 on a non-output vertex is outcome 0 at angle α + π."""
    shifted = dict(angles.angles)
    for v, bit in fixes.items():
        if v not in shifted:
            raise MissingAngle(f"Нет угла для вершины {v}.")
        if bit:
            shifted[v] += math.pi
    return AngleSet(shifted)


# -------------------- relations --------------------

def relate_outcomes(
    graph: OpenGraph,
    flow_a: FlowSpec,
    flow_b: FlowSpec,
    reference_bits: Optional[Mapping[int, int]] = None,
    bits: Optional[RandomizationBits] = None,
    graph_b: Optional[OpenGraph] = None,
) -> RelationSpec:
    """
    Relation between the outcome probabilities of two flows on one graph.

    ``scale = 2^(n_OB - n_OA)``; the variable set is the union of the output
    sets; positions outside the shared outputs carry ``reference_bits``
    (default 0). When ``bits`` is given, the mask undoes that rewrite of
    ``flow_b``.

    Raises
    ------
    IncompatibleFlows
        When the flows do not live on the same graph.
    InvalidFlow
    """
    if graph_b is not None and graph_b != graph:
        raise IncompatibleFlows("Потоки заданы на разных графах.")
    known = set(graph.vertices)
    for f in (flow_a, flow_b):
        used = set(f.successor) | set(f.successor.values()) | set(f.order)
        if not used <= known:
            raise IncompatibleFlows(f"Поток {f.name!r} ссылается на вершины другого графа.")
        _require_valid(graph, f)

    outs_a = flow_a.outputs(graph)
    outs_b = flow_b.outputs(graph)
    shared = tuple(sorted(set(outs_a) & set(outs_b)))
    variable = tuple(sorted(set(outs_a) | set(outs_b)))
    free = [v for v in variable if v not in shared]

    ref = {v: 0 for v in free}
    for v, b in (reference_bits or {}).items():
        if int(v) not in ref:
            raise ValidationError(f"Опорный бит задан для вершины {v}, не входящей в несовпадающие выходы.")
        if int(b) not in (0, 1):
            raise ValidationError("Опорные биты должны быть 0 или 1.")
        ref[int(v)] = int(b)

    mask = outcome_mask(graph, flow_b, bits) if bits is not None else ""
    return RelationSpec(
        graph_name=graph.name,
        flow_a=flow_a,
        flow_b=flow_b,
        outputs_a=outs_a,
        outputs_b=outs_b,
        shared_outputs=shared,
        variable_set=variable,
        scale=Fraction(2) ** (len(outs_b) - len(outs_a)),
        mask=mask,
        reference_bits=ref,
    )


def angles_for_side(relation: RelationSpec, side: str, angles: AngleSet) -> AngleSet:
    """Angles a side runs so that its fixed positions hold the reference bits."""
    return conditioned_angles(angles, relation.reference_fix(side))


# -------------------- instances --------------------

def random_instance(graph: OpenGraph, grid: Sequence[float] = DEFAULT_GRID, seed: Any = None) -> AngleSet:
    """
    One angle per vertex drawn uniformly from ``grid``.

    Raises
    ------
    EmptyGrid
    """
    grid = list(grid)
    if not grid:
        raise EmptyGrid("Сетка углов пуста.")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(grid), size=graph.n)
    return AngleSet({v: grid[int(i)] for v, i in zip(graph.vertices, picks)})


@dataclass(frozen=True)
class Instance:
    """One sampling instance as stored in instance files."""
    graph: str
    flow_id: str
    angles: AngleSet
    bits: Optional[RandomizationBits] = None
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        bits = self.bits.to_dict() if self.bits is not None else {"k": {}, "r": {}}
        return {
            "graph": self.graph,
            "flow_id": self.flow_id,
            "angles": self.angles.to_dict(),
            "k": bits["k"],
            "r": bits["r"],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Instance":
        k, r = data.get("k") or {}, data.get("r") or {}
        bits = RandomizationBits.from_dict({"k": k, "r": r}) if (k or r) else None
        return cls(
            graph=str(data["graph"]),
            flow_id=str(data["flow_id"]),
            angles=AngleSet.from_dict(data["angles"]),
            bits=bits,
            seed=data.get("seed"),
        )


def save_instance(instance: Instance, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(instance.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")
    return p


def load_instance(path: str | Path) -> Instance:
    try:
        return Instance.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except KeyError as exc:
        raise ValidationError(f"В файле экземпляра нет поля {exc}.") from None
