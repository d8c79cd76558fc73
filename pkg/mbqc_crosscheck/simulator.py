"""
mbqc_crosscheck.simulator
=========================

Dense statevector simulation of J/CZ circuits (|+⟩ on every wire, measured
in the computational basis), output-level noise and shot sampling.

Amplitudes live in a ``[2] * n`` tensor, one axis per wire in wire order, so
flattening gives big-endian bit strings.
"""

from __future__ import annotations

import math
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import InsufficientShots, TooManyWires, UnsupportedGate, ValidationError
from .models import (
    AngleSet,
    Circuit,
    CountsTable,
    FlowSpec,
    NoiseModel,
    OpenGraph,
    OutcomeDistribution,
    RandomizationBits,
    RelationSpec,
    all_bitstrings,
    bits_to_index,
)
from .patterns import angles_for_side, compile_to_circuit, conditioned_angles, rewrite_angles

MAX_WIRES = 12
_SQRT2_INV = 1 / math.sqrt(2)


def j_matrix(angle: float) -> np.ndarray:
    """J(α) = H·Rz(α) with Rz(α) = diag(1, e^{iα})."""
    phase = np.exp(1j * angle)
    return np.array([[1, phase], [1, -phase]], dtype=complex) * _SQRT2_INV


def _apply_single(psi: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    psi = np.tensordot(matrix, psi, axes=([1], [axis]))
    return np.moveaxis(psi, 0, axis)


def _apply_cz(psi: np.ndarray, a: int, b: int) -> np.ndarray:
    idx = [slice(None)] * psi.ndim
    idx[a], idx[b] = 1, 1
    psi[tuple(idx)] *= -1
    return psi


def statevector(circuit: Circuit) -> np.ndarray:
    """Final amplitudes as a flat vector of length ``2**n_wires``."""
    n = circuit.n_wires
    if n > MAX_WIRES:
        raise TooManyWires(f"Схема на {n} проводах превышает предел {MAX_WIRES}.")
    axis = {w: i for i, w in enumerate(circuit.wires)}
    psi = np.full([2] * n, 2.0 ** (-n / 2), dtype=complex)
    for g in circuit.gates:
        if g.kind == "J":
            psi = _apply_single(psi, j_matrix(g.angle or 0.0), axis[g.wires[0]])
        elif g.kind == "CZ":
            psi = _apply_cz(psi, axis[g.wires[0]], axis[g.wires[1]])
        elif g.kind == "M":
            continue
        else:
            raise UnsupportedGate(f"Гейт {g.kind!r} не поддерживается симулятором.")
    return psi.reshape(-1)


def exact_distribution(circuit: Circuit) -> OutcomeDistribution:
    """
    Computational-basis outcome probabilities of ``circuit``.

    Raises
    ------
    TooManyWires
    """
    probs = np.abs(statevector(circuit)) ** 2
    probs = probs / probs.sum()
    return OutcomeDistribution(
        n_bits=circuit.n_wires,
        probs=probs,
        labels=circuit.output_labels(),
        source=circuit.ref,
    )


def apply_noise(distribution: OutcomeDistribution, noise: Optional[NoiseModel]) -> OutcomeDistribution:
    """
    Depolarize, then flip bits independently.

    ``p ← (1-λ) p + λ u`` followed by a bit-flip channel per wire.
    """
    if noise is None or noise.is_ideal():
        return distribution
    n = distribution.n_bits
    lam = noise.depolarizing_strength
    p = (1.0 - lam) * np.asarray(distribution.probs) + lam / 2 ** n
    if n:
        p = p.reshape([2] * n)
        for axis, f in enumerate(noise.flips_for(n)):
            if f:
                p = (1.0 - f) * p + f * np.flip(p, axis=axis)
        p = p.reshape(-1)
    return OutcomeDistribution(
        n_bits=n,
        probs=p / p.sum(),
        labels=distribution.labels,
        source=distribution.source,
    )


def sample_distribution(
    distribution: OutcomeDistribution,
    shots: int,
    seed: Any = None,
    **meta: Any,
) -> CountsTable:
    """Multinomial draw of ``shots`` outcomes."""
    if shots < 1:
        raise InsufficientShots("Число запусков должно быть не меньше 1.")
    rng = np.random.default_rng(seed)
    p = np.asarray(distribution.probs, dtype=float)
    counts = rng.multinomial(int(shots), p / p.sum())
    meta.setdefault("labels", distribution.labels)
    meta.setdefault("circuit_ref", distribution.source)
    return CountsTable.from_array(
        counts,
        distribution.n_bits,
        seed=seed if isinstance(seed, int) else None,
        **meta,
    )


def sample(
    circuit: Circuit,
    shots: int,
    noise: Optional[NoiseModel] = None,
    seed: Any = None,
    device_id: str = "",
) -> CountsTable:
    """
    i.i.d. shots from the noisy output distribution of ``circuit``.

    The same circuit, noise and seed always give the same table.

    Raises
    ------
    TooManyWires, InsufficientShots
    """
    dist = apply_noise(exact_distribution(circuit), noise)
    return sample_distribution(dist, shots, seed=seed, device_id=device_id, circuit_ref=circuit.ref)


# -------------------- oracles --------------------

def pattern_distribution(
    graph: OpenGraph,
    flow: FlowSpec,
    angles: AngleSet,
    fixes: Optional[Mapping[int, int]] = None,
    noise: Optional[NoiseModel] = None,
) -> OutcomeDistribution:
    """Output distribution of the branch where ``fixes`` hold and every other non-output is 0."""
    if fixes:
        angles = conditioned_angles(angles, fixes)
    return apply_noise(exact_distribution(compile_to_circuit(graph, flow, angles)), noise)


def fix_distributions(
    graph: OpenGraph,
    flow: FlowSpec,
    angles: AngleSet,
    positions: Sequence[int],
    noise: Optional[NoiseModel] = None,
) -> Dict[str, OutcomeDistribution]:
    """One distribution per assignment of ``positions``, keyed by its bit string."""
    result = {}
    for bits in all_bitstrings(len(positions)):
        fixes = {v: int(b) for v, b in zip(positions, bits)}
        result[bits] = pattern_distribution(graph, flow, angles, fixes, noise)
    return result


def mask_oracle(
    graph: OpenGraph,
    flow: FlowSpec,
    angles: AngleSet,
    bits: RandomizationBits,
    tol: float = 1e-12,
) -> List[str]:
    """
    Every output mask m with ``Pr_original(b) = Pr_rewritten(b ⊕ m)`` for all b.

    Brute force over ``2**n_O`` masks on exact distributions.
    """
    base = pattern_distribution(graph, flow, angles).probs
    rewritten = pattern_distribution(graph, flow, rewrite_angles(graph, flow, angles, bits)).probs
    n = len(flow.outputs(graph))
    index = np.arange(2 ** n)
    found = []
    for mask in all_bitstrings(n):
        m = bits_to_index(mask)
        if np.max(np.abs(base - rewritten[index ^ m])) <= tol:
            found.append(mask)
    return found


def relation_residual(
    graph: OpenGraph,
    relation: RelationSpec,
    angles: AngleSet,
    bits: Optional[RandomizationBits] = None,
) -> float:
    """
    Largest ``|Pr_A(a) - scale * Pr_B(b)|`` over the relation's pairs.

    Side B runs the angles rewritten with ``bits`` when given; the relation's
    mask should then come from the same bits.
    """
    dist_a = pattern_distribution(graph, relation.flow_a, angles_for_side(relation, "A", angles))
    angles_b = angles_for_side(relation, "B", angles)
    if bits is not None:
        angles_b = rewrite_angles(graph, relation.flow_b, angles_b, bits)
    dist_b = pattern_distribution(graph, relation.flow_b, angles_b)
    scale = float(relation.scale)
    return max(abs(dist_a.prob(a) - scale * dist_b.prob(b)) for a, b in relation.pairs())


def calibrate_depolarizing(target_l2: float, pvectors: Sequence[np.ndarray]) -> float:
    """
    λ at which ``mean ‖p - ((1-λ) p + λ u)‖² = target_l2``.

    ``pvectors`` are ideal vectors in the comparison space; the depolarized
    side of a pair then sits at ``(1-λ) p + λ u`` whatever its flow.

    Raises
    ------
    ValidationError
        When the target is not reachable for λ in [0, 1].
    """
    vecs = [np.asarray(p, dtype=float) for p in pvectors]
    if not vecs:
        raise ValidationError("Нужен хотя бы один вектор вероятностей.")

    if target_l2 <= 0:
        return 0.0
    # ‖p - ((1-λ) p + λ u)‖² = λ² ‖p - u‖²
    base = float(np.mean([np.sum((p - 1.0 / p.size) ** 2) for p in vecs]))
    if base < target_l2:
        raise ValidationError("Целевое значение недостижимо даже при полной деполяризации.")
    return math.sqrt(target_l2 / base)
