"""
mbqc_crosscheck.graphs
======================

Open graph states and their flows:
- construction and validation of open graphs
- causal-flow validation (violations are reported as data)
- the built-in graph library (H6, BOX_2x4, BOX_2x5) with two flows each
- rebuilding a graph and flow from a J/CZ circuit
- JSON graph files and stabilizer expectations of graph states

Graph storage, connectivity and isomorphism use networkx.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import TooManyWires, UnknownName, UnsupportedGate, ValidationError
from .models import AngleSet, Circuit, FlowSpec, OpenGraph

BUILTIN_NAMES = ("H6", "BOX_2x4", "BOX_2x5")
INPUT_CONVENTIONS = ("merged", "separate")
MAX_STATE_QUBITS = 12


def build_graph(
    vertices: Iterable[int],
    edges: Iterable[Sequence[int]],
    inputs: Iterable[int],
    outputs: Iterable[int],
    name: str = "",
) -> OpenGraph:
    """
    Build a validated open graph.

    Raises
    ------
    DuplicateEdge, SelfLoop, Disconnected, UnequalIOSize, UnknownVertex
    """
    return OpenGraph(
        vertices=tuple(vertices),
        edges=tuple(tuple(e) for e in edges),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        name=name,
    )


# -------------------- flow validation --------------------

@dataclass(frozen=True)
class FlowViolation:
    kind: str
    message: str


@dataclass(frozen=True)
class FlowReport:
    """Result of :func:`validate_flow`."""
    violations: Tuple[FlowViolation, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return sorted({v.kind for v in self.violations})

    def __bool__(self) -> bool:
        return self.valid


def validate_flow(graph: OpenGraph, flow: FlowSpec) -> FlowReport:
    """
    Check the causal-flow conditions of ``flow`` on ``graph``.

    Output vertices (no successor) count as measured after every non-output
    vertex. Each broken condition becomes one :class:`FlowViolation`; the
    function never raises.
    """
    out: List[FlowViolation] = []
    known = set(graph.vertices)

    for v, w in flow.successor.items():
        for x in (v, w):
            if x not in known:
                out.append(FlowViolation("unknown-vertex", f"vertex {x} is not in the graph"))
    for v in flow.order:
        if v not in known:
            out.append(FlowViolation("unknown-vertex", f"ordered vertex {v} is not in the graph"))
    if out:
        return FlowReport(tuple(out))

    for v, w in flow.successor.items():
        if not graph.has_edge(v, w):
            out.append(FlowViolation("non-neighbor", f"successor({v}) = {w} is not a neighbor of {v}"))

    preimages: Dict[int, List[int]] = {}
    for v, w in flow.successor.items():
        preimages.setdefault(w, []).append(v)
    for w, vs in sorted(preimages.items()):
        if len(vs) > 1:
            out.append(FlowViolation("non-injective", f"vertices {sorted(vs)} share successor {w}"))

    seen = set()
    for v in flow.order:
        if v in seen:
            out.append(FlowViolation("order-duplicate", f"vertex {v} appears twice in the order"))
        seen.add(v)
        if v not in flow.successor:
            out.append(FlowViolation("output-in-order", f"vertex {v} has no successor but is ordered"))
    for v in flow.successor:
        if v not in seen:
            out.append(FlowViolation("order-incomplete", f"non-output vertex {v} is missing from the order"))

    rank = measurement_rank(graph, flow)
    for v, w in flow.successor.items():
        if rank[v] >= rank[w]:
            out.append(FlowViolation("order-violation", f"{v} must be measured before its successor {w}"))
        for u in graph.neighbors(w):
            if u != v and rank[v] >= rank[u]:
                out.append(
                    FlowViolation("order-violation", f"{v} must be measured before {u}, a neighbor of {w}")
                )
    return FlowReport(tuple(out))


def measurement_rank(graph: OpenGraph, flow: FlowSpec) -> Dict[int, int]:
    """Measurement position of every vertex; outputs come last in ascending id order."""
    full = [v for v in flow.order if v in flow.successor]
    full += [v for v in sorted(graph.vertices) if v not in set(full) and v not in flow.successor]
    full += [v for v in sorted(graph.vertices) if v not in set(full)]
    rank: Dict[int, int] = {}
    for i, v in enumerate(full):
        rank.setdefault(v, i)
    return rank


def measurement_order(graph: OpenGraph, flow: FlowSpec) -> Tuple[int, ...]:
    """Non-outputs in flow order followed by outputs in ascending id order."""
    rank = measurement_rank(graph, flow)
    return tuple(sorted(graph.vertices, key=lambda v: rank[v]))


def paths(graph: OpenGraph, flow: FlowSpec) -> List[Tuple[int, ...]]:
    """
    Wires of a flow: vertex chains from each input to its output.

    Returns
    -------
    list of tuple
        One chain per input, sorted by the output vertex it ends on.
    """
    chains = []
    for start in flow.inputs(graph):
        chain = [start]
        while chain[-1] in flow.successor:
            nxt = flow.successor[chain[-1]]
            if nxt in chain:
                raise ValidationError(f"Поток содержит цикл через вершину {nxt}.")
            chain.append(nxt)
        chains.append(tuple(chain))
    return sorted(chains, key=lambda c: c[-1])


# -------------------- built-ins --------------------

def _h6() -> Tuple[OpenGraph, List[FlowSpec]]:
    # Labels follow the H-shaped drawing: left column 1-3-5, right 2-4-6, bar 3-4.
    flow_a = FlowSpec(successor={1: 3, 2: 4, 3: 5, 4: 6}, order=(1, 2, 3, 4), name="a")
    flow_b = FlowSpec(successor={1: 3, 3: 4, 4: 6}, order=(1, 3, 4), name="b")
    graph = build_graph(
        vertices=range(1, 7),
        edges=[(1, 3), (3, 5), (2, 4), (4, 6), (3, 4)],
        inputs=(1, 2),
        outputs=(5, 6),
        name="H6",
    )
    return graph, [flow_a, flow_b]


def _box(width: int) -> Tuple[OpenGraph, List[FlowSpec]]:
    """2 x ``width`` ladder: top row 1..width, bottom row width+1..2*width."""
    top = list(range(1, width + 1))
    bottom = [v + width for v in top]
    edges = [(v, v + 1) for v in top[:-1]] + [(v, v + 1) for v in bottom[:-1]]
    edges += [(v, v + width) for v in top]

    successor = {v: v + 1 for v in top[:-1]}
    successor.update({v: v + 1 for v in bottom[:-1]})
    order = [v for col in range(width - 1) for v in (top[col], bottom[col])]
    along_rows = FlowSpec(successor=successor, order=tuple(order), name="left-to-right")
    along_rungs = FlowSpec(successor={v: v + width for v in top}, order=tuple(top), name="top-to-bottom")

    graph = build_graph(
        vertices=top + bottom,
        edges=edges,
        inputs=(top[0], bottom[0]),
        outputs=(top[-1], bottom[-1]),
        name=f"BOX_2x{width}",
    )
    return graph, [along_rows, along_rungs]


def builtin_graph(name: str) -> Tuple[OpenGraph, List[FlowSpec]]:
    """
    Built-in graph with its two flows.

    H6 has flows ``a`` (outputs 5, 6) and ``b`` (outputs 2, 5, 6). The box
    clusters have ``left-to-right`` (2 outputs) and ``top-to-bottom``
    (``width`` outputs).

    Raises
    ------
    UnknownName
    """
    if name == "H6":
        return _h6()
    if name == "BOX_2x4":
        return _box(4)
    if name == "BOX_2x5":
        return _box(5)
    raise UnknownName(f"Неизвестный встроенный граф {name!r}.")


def flow_by_name(flows: Sequence[FlowSpec], name: str) -> FlowSpec:
    for f in flows:
        if f.name == name:
            return f
    raise UnknownName(f"Поток {name!r} не найден.")


# -------------------- circuits → graphs --------------------

def graph_from_circuit(circuit: Circuit, input_convention: str = "merged") -> Tuple[OpenGraph, FlowSpec]:
    """
    Rebuild the open graph and flow a J/CZ circuit was compiled from.

    With ``input_convention="merged"`` every J gate is a vertex and the first
    J vertex of a wire is its input, so |V| = M. With ``"separate"`` every
    wire starts with its own input vertex and each J gate adds the vertex it
    teleports to, so |V| = N + M. Wire edges join consecutive vertices; each
    CZ joins the vertices measured by the J gates that immediately follow it.
    Terminal ``M`` gates are ignored.

    Raises
    ------
    UnsupportedGate
        For gate kinds other than J, CZ and terminal M, and for a CZ with no
        J gate after it on one of its wires.
    """
    if input_convention not in INPUT_CONVENTIONS:
        raise UnknownName(f"Неизвестное соглашение о входах {input_convention!r}.")

    closed = set()
    for g in circuit.gates:
        if g.kind not in ("J", "CZ", "M"):
            raise UnsupportedGate(f"Гейт {g.kind!r} не поддерживается.")
        if g.kind == "M":
            closed.update(g.wires)
        elif closed.intersection(g.wires):
            raise UnsupportedGate("После измерения провода допускаются только измерения.")
        if g.kind == "CZ" and len(set(g.wires)) != 2:
            raise UnsupportedGate("CZ должен действовать на два разных провода.")

    separate = input_convention == "separate"
    next_id = 1
    current: Dict[int, Optional[int]] = {}
    chains: Dict[int, List[int]] = {w: [] for w in circuit.wires}
    if separate:
        for w in circuit.wires:
            current[w] = next_id
            chains[w].append(next_id)
            next_id += 1
    else:
        current = {w: None for w in circuit.wires}

    # Each J gate gets the id of the vertex it measures; CZs wait for them.
    pending: List[Tuple[int, int, int]] = []  # (gate index, wire a, wire b)
    j_vertex: Dict[int, int] = {}
    order: List[int] = []
    for idx, g in enumerate(circuit.gates):
        if g.kind != "J":
            if g.kind == "CZ":
                pending.append((idx, g.wires[0], g.wires[1]))
            continue
        (w,) = g.wires
        if separate:
            measured = current[w]
            new = next_id
            next_id += 1
            chains[w].append(new)
            current[w] = new
        else:
            measured = next_id
            next_id += 1
            chains[w].append(measured)
        j_vertex[idx] = measured
        order.append(measured)

    def next_measured(wire: int, after: int) -> int:
        for idx, g in enumerate(circuit.gates):
            if idx > after and g.kind == "J" and g.wires[0] == wire:
                return j_vertex[idx]
        raise UnsupportedGate("CZ без последующего гейта J на проводе не представим графом.")

    edges = set()
    successor: Dict[int, int] = {}
    for chain in chains.values():
        for v, w in zip(chain, chain[1:]):
            edges.add((v, w))
            successor[v] = w
    for idx, a, b in pending:
        u, w = next_measured(a, idx), next_measured(b, idx)
        edges.add((min(u, w), max(u, w)))

    vertices = [v for w in circuit.wires for v in chains[w]]
    if any(not chains[w] for w in circuit.wires):
        raise ValidationError("Каждый провод должен содержать хотя бы один гейт J.")
    inputs = [chains[w][0] for w in circuit.wires]
    outputs = [chains[w][-1] for w in circuit.wires]
    n_j = len(j_vertex)
    expected = n_j + len(circuit.wires) if separate else n_j
    if len(vertices) != expected:
        raise ValidationError("Нарушен учёт вершин графа схемы.")

    graph = build_graph(sorted(vertices), sorted(edges), inputs, outputs, name=circuit.ref)
    flow = FlowSpec(
        successor=successor,
        order=tuple(v for v in order if v in successor),
        name=f"{input_convention}-wires",
    )
    return graph, flow


def angles_from_circuit(circuit: Circuit) -> AngleSet:
    """Angles of the J gates keyed by the vertex ids of the ``merged`` convention."""
    angles = {}
    for g in circuit.gates:
        if g.kind == "J":
            angles[len(angles) + 1] = g.angle
    return AngleSet(angles)


def is_isomorphic(g1: OpenGraph, g2: OpenGraph) -> bool:
    """Structural isomorphism of the underlying simple graphs."""
    if g1.n != g2.n or len(g1.edges) != len(g2.edges):
        return False
    return nx.is_isomorphic(g1.to_networkx(), g2.to_networkx())


# -------------------- files --------------------

def load_graph(path_or_name: str | Path) -> Tuple[OpenGraph, List[FlowSpec]]:
    """
    Load a graph file or a built-in name.

    File format::

        {"vertices": [...], "edges": [[u, w], ...], "inputs": [...],
         "outputs": [...], "flows": {"name": {"successor": {...}, "order": [...]}}}
    """
    if str(path_or_name) in BUILTIN_NAMES:
        return builtin_graph(str(path_or_name))
    p = Path(path_or_name)
    if not p.exists():
        raise UnknownName(f"Граф {str(path_or_name)!r} не найден: нет ни встроенного, ни файла.")
    data = json.loads(p.read_text(encoding="utf-8"))
    graph = OpenGraph.from_dict(data, name=data.get("name", p.stem))
    flows = [FlowSpec.from_dict(f, name=n) for n, f in data.get("flows", {}).items()]
    return graph, flows


def save_graph(graph: OpenGraph, path: str | Path, flows: Sequence[FlowSpec] = ()) -> Path:
    data = graph.to_dict()
    data["name"] = graph.name
    if flows:
        data["flows"] = {f.name: {"successor": f.to_dict()["successor"], "order": list(f.order)} for f in flows}
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
    return p


# -------------------- stabilizers --------------------

def graph_state_vector(graph: OpenGraph) -> np.ndarray:
    """Dense graph state, one tensor axis per vertex in ``graph.vertices`` order."""
    n = graph.n
    if n > MAX_STATE_QUBITS:
        raise TooManyWires(f"Граф из {n} вершин слишком велик для плотного вектора состояния.")
    psi = np.full([2] * n, 2.0 ** (-n / 2), dtype=complex)
    axis = {v: i for i, v in enumerate(graph.vertices)}
    for u, w in graph.edges:
        idx = [slice(None)] * n
        idx[axis[u]] = 1
        idx[axis[w]] = 1
        psi[tuple(idx)] *= -1
    return psi


def graph_state_expectation(graph: OpenGraph, pauli: str) -> float:
    """
    ⟨G|P|G⟩ for a Pauli string over ``graph.vertices`` order.

    Every stabilizer generator X_v ∏ Z_N(v) gives +1; Pauli strings outside
    the stabilizer group give 0.
    """
    pauli = pauli.upper()
    if len(pauli) != graph.n or set(pauli) - set("IXYZ"):
        raise ValidationError(f"Строка Паули {pauli!r} не подходит для графа из {graph.n} вершин.")
    psi = graph_state_vector(graph)
    phi = psi.copy()
    for axis, op in enumerate(pauli):
        if op in "ZY":
            idx = [slice(None)] * graph.n
            idx[axis] = 1
            phi[tuple(idx)] *= -1
        if op in "XY":
            phi = np.flip(phi, axis=axis)
        if op == "Y":
            phi = phi * 1j
    return float(np.vdot(psi, phi).real)


def stabilizer_generator(graph: OpenGraph, v: int) -> str:
    """Pauli string of K_v = X_v ∏_{u∈N(v)} Z_u."""
    nbrs = set(graph.neighbors(v))
    return "".join("X" if u == v else ("Z" if u in nbrs else "I") for u in graph.vertices)
