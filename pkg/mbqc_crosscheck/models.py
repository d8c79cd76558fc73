"""
mbqc_crosscheck.models
======================

Value types shared by every module.

All types are frozen after construction and validate themselves in
``__post_init__``; each one converts to a JSON-serializable dict with
:meth:`to_dict` and back with ``from_dict``.

Bit strings are ``str`` of ``'0'``/``'1'``, big-endian over the declared
label order: the first character is the lowest-numbered output vertex.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from .errors import (
    Disconnected,
    DuplicateEdge,
    SelfLoop,
    ShapeMismatch,
    UnequalIOSize,
    UnknownName,
    UnknownVertex,
    ValidationError,
)

TWO_PI = 2.0 * math.pi
ANGLE_DIGITS = 12
NORM_TOL = 1e-10


def wrap_angle(value: float) -> float:
    """Map an angle onto [0, 2π)."""
    a = math.fmod(float(value), TWO_PI)
    if a < 0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


def angle_to_json(value: float) -> float:
    return float(f"{value:.{ANGLE_DIGITS}g}")


def bits_to_index(bits: str) -> int:
    return int(bits, 2) if bits else 0


def index_to_bits(index: int, n_bits: int) -> str:
    return format(index, f"0{n_bits}b") if n_bits else ""


def all_bitstrings(n_bits: int) -> List[str]:
    return [index_to_bits(i, n_bits) for i in range(2 ** n_bits)]


def xor_bits(a: str, b: str) -> str:
    if len(a) != len(b):
        raise ShapeMismatch("Битовые строки разной длины.")
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


def _int_keys(mapping: Mapping[Any, Any]) -> Dict[int, Any]:
    return {int(k): v for k, v in mapping.items()}


def _frozen_map(mapping: Mapping[Any, Any]) -> Mapping[int, Any]:
    return MappingProxyType(dict(sorted(_int_keys(mapping).items())))


# -------------------- graphs --------------------

@dataclass(frozen=True)
class OpenGraph:
    """
    Graph state with designated input and output vertices.

    Edges are stored as sorted pairs in ascending order. Vertex order is the
    order given at construction.
    """
    vertices: Tuple[int, ...]
    edges: Tuple[Tuple[int, int], ...]
    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]
    name: str = ""
    _adjacency: Optional[Mapping[int, Tuple[int, ...]]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        vertices = tuple(int(v) for v in self.vertices)
        if len(set(vertices)) != len(vertices):
            raise ValidationError("Вершины не должны повторяться.")
        if not vertices:
            raise ValidationError("Граф должен содержать хотя бы одну вершину.")
        known = set(vertices)

        seen = set()
        edges: List[Tuple[int, int]] = []
        for e in self.edges:
            u, w = int(e[0]), int(e[1])
            if u == w:
                raise SelfLoop(f"Петля на вершине {u}.")
            for x in (u, w):
                if x not in known:
                    raise UnknownVertex(f"Ребро ссылается на неизвестную вершину {x}.")
            key = (min(u, w), max(u, w))
            if key in seen:
                raise DuplicateEdge(f"Ребро {key} указано дважды.")
            seen.add(key)
            edges.append(key)

        inputs = tuple(int(v) for v in self.inputs)
        outputs = tuple(int(v) for v in self.outputs)
        for group, label in ((inputs, "входов"), (outputs, "выходов")):
            if len(set(group)) != len(group):
                raise ValidationError(f"Повтор в списке {label}.")
            for v in group:
                if v not in known:
                    raise UnknownVertex(f"Вершина {v} из списка {label} не объявлена.")
        if len(inputs) != len(outputs):
            raise UnequalIOSize("Число входов должно совпадать с числом выходов.")

        g = nx.Graph()
        g.add_nodes_from(vertices)
        g.add_edges_from(edges)
        if not nx.is_connected(g):
            raise Disconnected("Граф должен быть связным.")

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(
            self,
            "_adjacency",
            MappingProxyType({v: tuple(sorted(g.neighbors(v))) for v in vertices}),
        )

    @property
    def n(self) -> int:
        return len(self.vertices)

    def neighbors(self, v: int) -> Tuple[int, ...]:
        """Sorted neighbours of ``v``."""
        try:
            return self._adjacency[int(v)]
        except KeyError:
            raise UnknownVertex(f"Неизвестная вершина {v}.") from None

    def has_edge(self, u: int, w: int) -> bool:
        return int(w) in self._adjacency.get(int(u), ())

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": sorted(self.vertices),
            "edges": [list(e) for e in self.edges],
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], name: str = "") -> "OpenGraph":
        try:
            return cls(
                vertices=tuple(data["vertices"]),
                edges=tuple(tuple(e) for e in data["edges"]),
                inputs=tuple(data.get("inputs", ())),
                outputs=tuple(data.get("outputs", ())),
                name=str(data.get("name", name)),
            )
        except KeyError as exc:
            raise ValidationError(f"В описании графа нет поля {exc}.") from None


@dataclass(frozen=True)
class FlowSpec:
    """
    Successor map plus measurement order over the non-output vertices.

    Output vertices are those without a successor; input vertices are those
    that are nobody's successor.
    """
    successor: Mapping[int, int]
    order: Tuple[int, ...]
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "successor", _frozen_map({k: int(v) for k, v in self.successor.items()}))
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))

    def outputs(self, graph: OpenGraph) -> Tuple[int, ...]:
        return tuple(sorted(v for v in graph.vertices if v not in self.successor))

    def inputs(self, graph: OpenGraph) -> Tuple[int, ...]:
        images = set(self.successor.values())
        return tuple(sorted(v for v in graph.vertices if v not in images))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "successor": {str(k): v for k, v in self.successor.items()},
            "order": list(self.order),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], name: str = "") -> "FlowSpec":
        return cls(
            successor=_int_keys(data.get("successor", {})),
            order=tuple(data.get("order", ())),
            name=str(data.get("name", name)),
        )


# -------------------- patterns --------------------

@dataclass(frozen=True)
class AngleSet:
    """Measurement angle per vertex, stored in [0, 2π)."""
    angles: Mapping[int, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "angles", _frozen_map({k: wrap_angle(v) for k, v in self.angles.items()}))

    def __getitem__(self, v: int) -> float:
        return self.angles[int(v)]

    def __contains__(self, v: object) -> bool:
        return v in self.angles

    def vertices(self) -> Tuple[int, ...]:
        return tuple(self.angles)

    def isclose(self, other: "AngleSet", tol: float = 1e-12) -> bool:
        """Equality modulo 2π."""
        if set(self.angles) != set(other.angles):
            return False
        for v, a in self.angles.items():
            d = abs(a - other.angles[v])
            if min(d, TWO_PI - d) > tol:
                return False
        return True

    def to_dict(self) -> Dict[str, float]:
        return {str(v): angle_to_json(a) for v, a in self.angles.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AngleSet":
        return cls(angles={int(k): float(v) for k, v in data.items()})


@dataclass(frozen=True)
class RandomizationBits:
    """Stabilizer exponents ``k`` on all vertices and output masks ``r``."""
    k: Mapping[int, int]
    r: Mapping[int, int]

    def __post_init__(self) -> None:
        for label, bits in (("k", self.k), ("r", self.r)):
            for v, b in bits.items():
                if int(b) not in (0, 1):
                    raise ValidationError(f"Бит {label}[{v}] должен быть 0 или 1.")
        object.__setattr__(self, "k", _frozen_map({v: int(b) for v, b in self.k.items()}))
        object.__setattr__(self, "r", _frozen_map({v: int(b) for v, b in self.r.items()}))

    @classmethod
    def zeros(cls, vertices: Iterable[int], outputs: Iterable[int]) -> "RandomizationBits":
        return cls(k={v: 0 for v in vertices}, r={v: 0 for v in outputs})

    def is_zero(self) -> bool:
        return not any(self.k.values()) and not any(self.r.values())

    def to_dict(self) -> Dict[str, Dict[str, int]]:
        return {
            "k": {str(v): b for v, b in self.k.items()},
            "r": {str(v): b for v, b in self.r.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RandomizationBits":
        return cls(k=_int_keys(data.get("k", {})), r=_int_keys(data.get("r", {})))


GATE_KINDS = ("J", "CZ", "M")


@dataclass(frozen=True)
class Gate:
    """One circuit operation: ``J(angle)`` on a wire, ``CZ`` on two wires, or a terminal ``M``."""
    kind: str
    wires: Tuple[int, ...]
    angle: Optional[float] = None
    vertex: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.angle is not None:
            object.__setattr__(self, "angle", wrap_angle(self.angle))

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"kind": self.kind, "wires": list(self.wires)}
        if self.angle is not None:
            d["angle"] = angle_to_json(self.angle)
        if self.vertex is not None:
            d["vertex"] = self.vertex
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Gate":
        return cls(
            kind=str(data["kind"]),
            wires=tuple(data.get("wires", ())),
            angle=data.get("angle"),
            vertex=data.get("vertex"),
        )


@dataclass(frozen=True)
class Circuit:
    """
    Ordered gate list on named wires, starting from |+⟩ on every wire.

    ``wire_to_vertex`` maps each wire to the output vertex it carries; the
    wire order is the bit order of every distribution sampled from it.
    """
    wires: Tuple[int, ...]
    gates: Tuple[Gate, ...]
    wire_to_vertex: Mapping[int, int] = field(default_factory=dict)
    ref: str = ""

    def __post_init__(self) -> None:
        wires = tuple(int(w) for w in self.wires)
        object.__setattr__(self, "wires", wires)
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "wire_to_vertex", _frozen_map(self.wire_to_vertex))
        known = set(wires)
        for g in self.gates:
            for w in g.wires:
                if w not in known:
                    raise ValidationError(f"Гейт {g.kind} ссылается на необъявленный провод {w}.")

    @property
    def n_wires(self) -> int:
        return len(self.wires)

    def output_labels(self) -> Tuple[int, ...]:
        """Output vertex per wire, in wire order."""
        return tuple(self.wire_to_vertex.get(w, w) for w in self.wires)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ref": self.ref,
            "wires": list(self.wires),
            "gates": [g.to_dict() for g in self.gates],
            "wire_to_vertex": {str(w): v for w, v in self.wire_to_vertex.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Circuit":
        return cls(
            wires=tuple(data["wires"]),
            gates=tuple(Gate.from_dict(g) for g in data.get("gates", ())),
            wire_to_vertex=_int_keys(data.get("wire_to_vertex", {})),
            ref=str(data.get("ref", "")),
        )


@dataclass(frozen=True)
class RelationSpec:
    """
    How the outcome probabilities of two flows on one graph relate.

    For every assignment of the shared outputs, ``pairs()`` gives the
    A-string and the B-string with ``Pr_A(a) = scale * Pr_B(b)``. Positions
    outside a side's outputs carry ``reference_bits`` (an outcome 1 there is
    realised on the other side as a +π angle shift, see
    :func:`mbqc_crosscheck.patterns.conditioned_angles`).
    """
    graph_name: str
    flow_a: FlowSpec
    flow_b: FlowSpec
    outputs_a: Tuple[int, ...]
    outputs_b: Tuple[int, ...]
    shared_outputs: Tuple[int, ...]
    variable_set: Tuple[int, ...]
    scale: Fraction
    mask: str = ""
    reference_bits: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "reference_bits", _frozen_map(self.reference_bits))
        if not self.mask:
            object.__setattr__(self, "mask", "0" * len(self.outputs_b))
        if len(self.mask) != len(self.outputs_b):
            raise ShapeMismatch("Маска должна покрывать выходы второго потока.")

    @property
    def n_c(self) -> int:
        return len(self.shared_outputs)

    @property
    def n_v(self) -> int:
        return len(self.variable_set)

    def outputs(self, side: str) -> Tuple[int, ...]:
        if side == "A":
            return self.outputs_a
        if side == "B":
            return self.outputs_b
        raise UnknownName(f"Неизвестная сторона {side!r}, ожидается 'A' или 'B'.")

    def fix_positions(self, side: str) -> Tuple[int, ...]:
        """Variable positions that are not outputs of ``side``."""
        outs = set(self.outputs(side))
        return tuple(v for v in self.variable_set if v not in outs)

    def reference_fix(self, side: str) -> Dict[int, int]:
        return {v: int(self.reference_bits.get(v, 0)) for v in self.fix_positions(side)}

    def pairs(self) -> List[Tuple[str, str]]:
        """(A-string, B-string) per assignment of the shared outputs."""
        result = []
        for shared in all_bitstrings(self.n_c):
            values = dict(zip(self.shared_outputs, (int(c) for c in shared)))
            a = "".join(str(values.get(v, self.reference_bits.get(v, 0))) for v in self.outputs_a)
            b = "".join(str(values.get(v, self.reference_bits.get(v, 0))) for v in self.outputs_b)
            result.append((a, xor_bits(b, self.mask)))
        return result

    def to_dict(self) -> Dict[str, Any]:
        return {
            "graph": self.graph_name,
            "flow_a": self.flow_a.name,
            "flow_b": self.flow_b.name,
            "outputs_a": list(self.outputs_a),
            "outputs_b": list(self.outputs_b),
            "shared_outputs": list(self.shared_outputs),
            "variable_set": list(self.variable_set),
            "scale": str(self.scale),
            "mask": self.mask,
            "reference_bits": {str(v): b for v, b in self.reference_bits.items()},
        }


# -------------------- simulator --------------------

@dataclass(frozen=True)
class OutcomeDistribution:
    """Exact probability vector over ``2**n_bits`` big-endian bit strings."""
    n_bits: int
    probs: np.ndarray
    labels: Tuple[int, ...] = ()
    source: str = ""

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float).reshape(-1).copy()
        if probs.shape != (2 ** self.n_bits,):
            raise ShapeMismatch(f"Ожидалось {2 ** self.n_bits} вероятностей, получено {probs.size}.")
        if np.any(probs < -NORM_TOL) or np.any(probs > 1 + NORM_TOL):
            raise ValidationError("Вероятности должны лежать в [0, 1].")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValidationError(f"Сумма вероятностей {probs.sum():.12f} не равна 1.")
        probs = np.clip(probs, 0.0, 1.0)
        probs.setflags(write=False)
        labels = tuple(int(v) for v in self.labels)
        if labels and len(labels) != self.n_bits:
            raise ShapeMismatch("Число меток не совпадает с числом битов.")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)

    def prob(self, bits: str) -> float:
        if len(bits) != self.n_bits:
            raise ShapeMismatch(f"Ожидалась строка из {self.n_bits} битов.")
        return float(self.probs[bits_to_index(bits)])

    def purity(self) -> float:
        """Σ q²."""
        return float(np.dot(self.probs, self.probs))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bitstring": all_bitstrings(self.n_bits), "probability": self.probs})

    def to_csv(self, path: str | Path) -> Path:
        p = Path(path)
        self.to_frame().to_csv(p, index=False)
        return p

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_bits": self.n_bits,
            "labels": list(self.labels),
            "source": self.source,
            "probs": [float(x) for x in self.probs],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "OutcomeDistribution":
        return cls(
            n_bits=int(data["n_bits"]),
            probs=np.asarray(data["probs"], dtype=float),
            labels=tuple(data.get("labels", ())),
            source=str(data.get("source", "")),
        )


@dataclass(frozen=True)
class CountsTable:
    """
    Empirical counts of one job.

    ``fixes`` records the values the job fixed on variable positions outside
    its outputs; ``labels`` are the output vertices in bit order.
    """
    n_bits: int
    counts: Mapping[str, int]
    shots: int
    seed: Optional[int] = None
    device_id: str = ""
    circuit_ref: str = ""
    labels: Tuple[int, ...] = ()
    fixes: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        counts = {}
        for key, c in self.counts.items():
            key = str(key)
            if len(key) != self.n_bits or set(key) - {"0", "1"}:
                raise ShapeMismatch(f"Некорректная битовая строка {key!r}.")
            c = int(c)
            if c < 0:
                raise ValidationError("Число отсчётов не может быть отрицательным.")
            if c:
                counts[key] = c
        if sum(counts.values()) != int(self.shots):
            raise ValidationError("Сумма отсчётов не совпадает с числом запусков.")
        object.__setattr__(self, "counts", MappingProxyType(dict(sorted(counts.items()))))
        object.__setattr__(self, "shots", int(self.shots))
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        object.__setattr__(self, "fixes", _frozen_map(self.fixes))

    @classmethod
    def from_array(cls, counts: Sequence[int], n_bits: int, **kwargs: Any) -> "CountsTable":
        arr = np.asarray(counts, dtype=np.int64)
        table = {index_to_bits(i, n_bits): int(c) for i, c in enumerate(arr) if c}
        return cls(n_bits=n_bits, counts=table, shots=int(arr.sum()), **kwargs)

    def as_array(self) -> np.ndarray:
        arr = np.zeros(2 ** self.n_bits, dtype=np.int64)
        for key, c in self.counts.items():
            arr[bits_to_index(key)] = c
        return arr

    def frequencies(self) -> np.ndarray:
        return self.as_array() / float(self.shots)

    def relabel(self, mask: str) -> "CountsTable":
        """XOR every key with ``mask``."""
        return CountsTable(
            n_bits=self.n_bits,
            counts={xor_bits(k, mask): c for k, c in self.counts.items()},
            shots=self.shots,
            seed=self.seed,
            device_id=self.device_id,
            circuit_ref=self.circuit_ref,
            labels=self.labels,
            fixes=self.fixes,
        )

    def with_fixes(self, fixes: Mapping[int, int]) -> "CountsTable":
        return CountsTable(
            n_bits=self.n_bits,
            counts=self.counts,
            shots=self.shots,
            seed=self.seed,
            device_id=self.device_id,
            circuit_ref=self.circuit_ref,
            labels=self.labels,
            fixes=fixes,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "device_id": self.device_id,
            "circuit_ref": self.circuit_ref,
            "shots": self.shots,
            "seed": self.seed,
            "n_bits": self.n_bits,
            "labels": list(self.labels),
            "fixes": {str(v): b for v, b in self.fixes.items()},
            "counts": dict(self.counts),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CountsTable":
        counts = data.get("counts", {})
        n_bits = data.get("n_bits")
        if n_bits is None:
            n_bits = len(next(iter(counts))) if counts else 0
        shots = data.get("shots", sum(int(c) for c in counts.values()))
        return cls(
            n_bits=int(n_bits),
            counts=counts,
            shots=int(shots),
            seed=data.get("seed"),
            device_id=str(data.get("device_id", "")),
            circuit_ref=str(data.get("circuit_ref", "")),
            labels=tuple(data.get("labels", ())),
            fixes=_int_keys(data.get("fixes", {})),
        )

    def save(self, path: str | Path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
        return p

    @classmethod
    def load(cls, path: str | Path) -> "CountsTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# Readout error rates of the superconducting processors the presets are named
# after; the Rigetti entries are 1 - readout fidelity.
NOISE_PRESETS: Dict[str, Dict[str, Any]] = {
    "ideal": {"depolarizing_strength": 0.0, "readout_flip": (0.0,)},
    "ibmqx2": {"depolarizing_strength": 0.0, "readout_flip": (0.035, 0.015, 0.016)},
    "rigetti19q": {"depolarizing_strength": 0.0, "readout_flip": (0.03, 0.053, 0.079)},
    "depolarized": {"depolarizing_strength": 1.0, "readout_flip": (0.0,)},
}


@dataclass(frozen=True)
class NoiseModel:
    """
    Output-level noise: global depolarizing mix, then independent readout flips.

    ``readout_flip`` holds one probability per wire in wire order; a single
    entry applies to every wire.
    """
    depolarizing_strength: float = 0.0
    readout_flip: Tuple[float, ...] = (0.0,)
    seed: Optional[int] = None
    name: str = ""

    def __post_init__(self) -> None:
        flips = self.readout_flip
        if isinstance(flips, (int, float)):
            flips = (flips,)
        flips = tuple(float(f) for f in flips)
        if not flips:
            flips = (0.0,)
        lam = float(self.depolarizing_strength)
        for p in (lam,) + flips:
            if not 0.0 <= p <= 1.0:
                raise ValidationError("Вероятности шума должны лежать в [0, 1].")
        object.__setattr__(self, "readout_flip", flips)
        object.__setattr__(self, "depolarizing_strength", lam)

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(name="ideal")

    @classmethod
    def preset(cls, name: str, seed: Optional[int] = None) -> "NoiseModel":
        try:
            params = NOISE_PRESETS[name]
        except KeyError:
            raise UnknownName(f"Неизвестная модель шума {name!r}.") from None
        return cls(seed=seed, name=name, **params)

    def is_ideal(self) -> bool:
        return self.depolarizing_strength == 0.0 and not any(self.readout_flip)

    def flips_for(self, n_bits: int) -> np.ndarray:
        """Per-bit flip probabilities for an ``n_bits`` readout."""
        if len(self.readout_flip) == 1:
            return np.full(n_bits, self.readout_flip[0])
        if len(self.readout_flip) < n_bits:
            raise ShapeMismatch(
                f"Модель шума задаёт {len(self.readout_flip)} вероятностей считывания, нужно {n_bits}."
            )
        return np.asarray(self.readout_flip[:n_bits], dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "depolarizing_strength": self.depolarizing_strength,
            "readout_flip": list(self.readout_flip),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NoiseModel":
        if "preset" in data:
            base = cls.preset(str(data["preset"]), seed=data.get("seed"))
            return cls(
                depolarizing_strength=data.get("depolarizing_strength", base.depolarizing_strength),
                readout_flip=tuple(data.get("readout_flip", base.readout_flip)),
                seed=data.get("seed"),
                name=str(data.get("name", base.name)),
            )
        return cls(
            depolarizing_strength=float(data.get("depolarizing_strength", 0.0)),
            readout_flip=tuple(data.get("readout_flip", (0.0,))),
            seed=data.get("seed"),
            name=str(data.get("name", "")),
        )
