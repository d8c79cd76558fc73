"""
mbqc_crosscheck.verifier
========================

Squared ℓ²-distance between devices:

``‖p1 - p2‖² = p1·p1 - 2 p1·p2 + p2·p2``

computed exactly from probability vectors or estimated from samples with
unbiased all-pairs collision counts. Also: sanity flags for collision
probabilities, total least-squares regression, the identity-product fidelity
bound and sub-sampling convergence tables.

Standard errors are jackknife estimates throughout (delete-one-job when a
side has several jobs, delete-one-shot otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    DegenerateInput,
    InsufficientShots,
    OutOfRangeExpectation,
    RelationMismatch,
    ShapeMismatch,
    SubsetTooLarge,
    ValidationError,
    VariableSetMismatch,
)
from .models import CountsTable, OutcomeDistribution, RelationSpec, all_bitstrings

NORM_TOL = 1e-10
SELF_MODES = ("fixes", "reference")


def _jackknife_se(replicates: Sequence[float]) -> float:
    r = np.asarray(replicates, dtype=float)
    n = r.size
    if n < 2:
        return float("nan")
    return float(math.sqrt((n - 1) / n * np.sum((r - r.mean()) ** 2)))


def _weighted_jackknife_se(replicates: np.ndarray, weights: np.ndarray) -> float:
    """Delete-one-shot jackknife where ``weights[i]`` shots share replicate ``i``."""
    n = float(weights.sum())
    if n < 2:
        return float("nan")
    mean = float(np.dot(weights, replicates)) / n
    return float(math.sqrt((n - 1) / n * np.dot(weights, (replicates - mean) ** 2)))


def _json_float(x: float) -> Optional[float]:
    return None if x is None or not math.isfinite(x) else float(x)


# -------------------- types --------------------

@dataclass(frozen=True)
class PVector:
    """Probability vector over the ``2**n_v`` strings of a variable set."""
    variable_set: Tuple[int, ...]
    probs: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float).reshape(-1).copy()
        if probs.shape != (2 ** len(self.variable_set),):
            raise ShapeMismatch("Длина вектора не соответствует набору переменных.")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ValidationError("Вектор вероятностей не нормирован.")
        probs.setflags(write=False)
        object.__setattr__(self, "variable_set", tuple(int(v) for v in self.variable_set))
        object.__setattr__(self, "probs", probs)

    @property
    def n_v(self) -> int:
        return len(self.variable_set)

    def dot(self, other: "PVector") -> float:
        if self.variable_set != other.variable_set:
            raise VariableSetMismatch("Векторы заданы на разных наборах переменных.")
        return float(np.dot(self.probs, other.probs))


@dataclass(frozen=True)
class CollisionEstimate:
    """One dot-product term with its provenance."""
    value: float
    std_error: float
    method: str
    samples: int = 0
    jobs: int = 0
    first_collision: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": _json_float(self.value),
            "err": _json_float(self.std_error),
            "method": self.method,
            "samples": self.samples,
            "jobs": self.jobs,
            "first_collision": self.first_collision,
        }


@dataclass(frozen=True)
class L2Estimate:
    """Squared ℓ²-distance assembled from its three dot-product terms."""
    c11: CollisionEstimate
    c12: CollisionEstimate
    c22: CollisionEstimate
    std_error: float
    scalable: bool = True

    @property
    def value(self) -> float:
        return self.c11.value - 2.0 * self.c12.value + self.c22.value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": _json_float(self.value),
            "err": _json_float(self.std_error),
            "scalable": self.scalable,
            "components": {
                "p1p1": self.c11.to_dict(),
                "p1p2": self.c12.to_dict(),
                "p2p2": self.c22.to_dict(),
            },
        }


@dataclass(frozen=True)
class RegressionResult:
    """Straight-line fit with jackknife covariance of (intercept, slope)."""
    slope: float
    intercept: float
    slope_std_error: float
    intercept_std_error: float
    covariance: np.ndarray
    abscissae: Tuple[float, ...] = ()
    prediction_band_halfwidths: Tuple[float, ...] = ()

    def band(self, x: float | np.ndarray) -> np.ndarray:
        """3-sigma half-width of the mean prediction at ``x``."""
        return _band(self.covariance, x)

    def predict(self, x: float | np.ndarray) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": _json_float(self.slope),
            "err": _json_float(self.slope_std_error),
            "intercept": _json_float(self.intercept),
            "intercept_err": _json_float(self.intercept_std_error),
        }


def _band(covariance: np.ndarray, x: float | np.ndarray) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    design = np.column_stack([np.ones_like(x), x])
    var = np.einsum("ij,jk,ik->i", design, covariance, design)
    return 3.0 * np.sqrt(np.clip(var, 0.0, None))


class SanityFlag(str, Enum):
    UNIFORM_SUSPECT = "uniform-suspect"
    PORTER_THOMAS_LIKE = "porter-thomas-like"
    OTHER = "other"


class FidelityBound(NamedTuple):
    alpha_id: float
    f_min: float
    bell_violation: bool


# -------------------- probability vectors --------------------

def _side_outputs(relation: RelationSpec, side: str) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    return relation.outputs(side), relation.fix_positions(side)


def _expand(q: np.ndarray, relation: RelationSpec, side: str) -> np.ndarray:
    """Output tensor with singleton axes at the fix positions, in variable-set order."""
    _, fix = _side_outputs(relation, side)
    axes = tuple(relation.variable_set.index(v) for v in fix)
    tensor = np.asarray(q, dtype=float).reshape([2] * (relation.n_v - len(fix)))
    return np.expand_dims(tensor, axes) if axes else tensor


def build_pvector(distribution: OutcomeDistribution, relation: RelationSpec, side: str) -> PVector:
    """
    Embed a side's output distribution uniformly over its fix positions.

    ``p(m) = 2^-(n_v - n_O) q(m restricted to the outputs)``

    Raises
    ------
    ShapeMismatch
    """
    outputs, fix = _side_outputs(relation, side)
    if distribution.n_bits != len(outputs):
        raise ShapeMismatch(
            f"Распределение на {distribution.n_bits} битах, а у стороны {side} {len(outputs)} выходов."
        )
    if distribution.labels and tuple(distribution.labels) != tuple(outputs):
        raise ShapeMismatch("Метки распределения не совпадают с выходами стороны.")
    tensor = _expand(np.asarray(distribution.probs), relation, side)
    full = np.broadcast_to(tensor, [2] * relation.n_v) * 2.0 ** (-len(fix))
    return PVector(relation.variable_set, full.reshape(-1), source=distribution.source)


def build_conditioned_pvector(
    distributions_by_fix: Mapping[str, OutcomeDistribution],
    relation: RelationSpec,
    side: str,
) -> PVector:
    """
    Exact vector from one distribution per assignment of the fix positions.

    ``p(m) = 2^-(n_v - n_O) q_f(m restricted to the outputs)`` with ``f`` the
    bits of ``m`` on the fix positions.

    Raises
    ------
    ShapeMismatch
        When an assignment is missing or a distribution has the wrong width.
    """
    outputs, fix = _side_outputs(relation, side)
    axis_of = {v: relation.variable_set.index(v) for v in fix}
    full = np.zeros([2] * relation.n_v)
    for f in all_bitstrings(len(fix)):
        if f not in distributions_by_fix:
            raise ShapeMismatch(f"Нет распределения для фиксации {f!r}.")
        dist = distributions_by_fix[f]
        if dist.n_bits != len(outputs):
            raise ShapeMismatch("Распределение не совпадает по ширине с выходами стороны.")
        idx: List[Any] = [slice(None)] * relation.n_v
        for v, bit in zip(fix, f):
            idx[axis_of[v]] = int(bit)
        full[tuple(idx)] = np.asarray(dist.probs).reshape([2] * len(outputs)) * 2.0 ** (-len(fix))
    return PVector(relation.variable_set, full.reshape(-1), source=f"conditioned/{side}")


def l2_exact(pvec1: PVector, pvec2: PVector) -> L2Estimate:
    """
    Exact ‖p1 - p2‖².

    Raises
    ------
    VariableSetMismatch
    """
    if pvec1.variable_set != pvec2.variable_set:
        raise VariableSetMismatch("Векторы заданы на разных наборах переменных.")
    exact = lambda v: CollisionEstimate(v, 0.0, "exact")  # noqa: E731
    return L2Estimate(
        c11=exact(pvec1.dot(pvec1)),
        c12=exact(pvec1.dot(pvec2)),
        c22=exact(pvec2.dot(pvec2)),
        std_error=0.0,
    )


# -------------------- collision estimators --------------------

def first_collision_index(counts: CountsTable, seed: Any = None) -> Optional[int]:
    """Number of draws, in a seeded random shot order, until a string repeats."""
    arr = counts.as_array()
    shots = np.repeat(np.arange(arr.size), arr)
    order = np.random.default_rng(seed).permutation(shots)
    seen = set()
    for i, s in enumerate(order, start=1):
        if s in seen:
            return i
        seen.add(s)
    return None


def self_collision_estimate(
    counts: CountsTable,
    n_variable: Optional[int] = None,
    seed: Any = 0,
) -> CollisionEstimate:
    """
    Unbiased estimate of p·p from one counts table.

    ``Σ_s c_s (c_s - 1) / (N (N - 1))`` over output strings, scaled by
    ``2^-(n_v - n_O)``. Relies on Σq² being the same for every fix of the
    non-output positions, which holds for ideal devices; see
    :func:`pooled_self_collision` for the estimate without that assumption.

    Raises
    ------
    InsufficientShots
    """
    n_shots = counts.shots
    if n_shots < 2:
        raise InsufficientShots("Для оценки совпадений нужно не меньше двух запусков.")
    scale = 2.0 ** (-((n_variable if n_variable is not None else counts.n_bits) - counts.n_bits))
    c = counts.as_array().astype(float)
    total = float(np.dot(c, c - 1.0))
    value = total / (n_shots * (n_shots - 1.0))

    if n_shots >= 3:
        present = c > 0
        replicates = (total - 2.0 * (c[present] - 1.0)) / ((n_shots - 1.0) * (n_shots - 2.0))
        err = _weighted_jackknife_se(replicates, c[present])
    else:
        err = float("nan")
    return CollisionEstimate(
        value=value * scale,
        std_error=err * scale,
        method="collision",
        samples=n_shots,
        jobs=1,
        first_collision=first_collision_index(counts, seed),
    )


def _pooled_terms(jobs: Sequence[CountsTable]) -> Tuple[np.ndarray, np.ndarray]:
    coll = np.array([float(np.dot(j.as_array(), j.as_array() - 1)) for j in jobs])
    pairs = np.array([float(j.shots) * (j.shots - 1) for j in jobs])
    return coll, pairs


def pooled_self_collision(jobs: Sequence[CountsTable], n_variable: int) -> CollisionEstimate:
    """
    Unbiased p·p from jobs with uniformly random fixes.

    Within-job collisions are pooled over jobs and scaled by
    ``2^-(n_v - n_O)``; the error is the delete-one-job jackknife.

    Raises
    ------
    InsufficientShots
    """
    jobs = list(jobs)
    if not jobs:
        raise InsufficientShots("Нет заданий для оценки.")
    if len(jobs) == 1:
        return self_collision_estimate(jobs[0], n_variable)
    coll, pairs = _pooled_terms(jobs)
    if pairs.sum() <= 0:
        raise InsufficientShots("Для оценки совпадений нужно не меньше двух запусков.")
    scale = 2.0 ** (-(n_variable - jobs[0].n_bits))
    value = coll.sum() / pairs.sum()
    replicates = [(coll.sum() - coll[j]) / (pairs.sum() - pairs[j]) for j in range(len(jobs))]
    return CollisionEstimate(
        value=float(value * scale),
        std_error=_jackknife_se(replicates) * scale,
        method="collision-pooled",
        samples=int(sum(j.shots for j in jobs)),
        jobs=len(jobs),
    )


def _check_job(job: CountsTable, relation: RelationSpec, side: str) -> None:
    outputs, fix = _side_outputs(relation, side)
    if job.labels and tuple(job.labels) != tuple(outputs):
        raise RelationMismatch(f"Выходы задания {job.circuit_ref!r} не совпадают со стороной {side}.")
    if job.n_bits != len(outputs):
        raise RelationMismatch(f"Задание {job.circuit_ref!r} имеет неверную ширину.")
    if set(job.fixes) != set(fix):
        raise RelationMismatch(f"Задание {job.circuit_ref!r} фиксирует не те позиции.")


def assemble_counts(job: CountsTable, relation: RelationSpec, side: str) -> np.ndarray:
    """Counts over the ``2**n_v`` variable strings: fix bits plus sampled bits."""
    _check_job(job, relation, side)
    outputs, fix = _side_outputs(relation, side)
    full = np.zeros([2] * relation.n_v, dtype=np.int64)
    idx: List[Any] = [slice(None)] * relation.n_v
    for v in fix:
        idx[relation.variable_set.index(v)] = int(job.fixes[v])
    full[tuple(idx)] = job.as_array().reshape([2] * len(outputs))
    return full.reshape(-1)


def _side_matrix(jobs: Sequence[CountsTable], relation: RelationSpec, side: str) -> np.ndarray:
    jobs = list(jobs)
    if not jobs:
        raise InsufficientShots(f"Нет заданий для стороны {side}.")
    return np.vstack([assemble_counts(j, relation, side) for j in jobs]).astype(float)


def _cross_side_se(counts: np.ndarray, other: np.ndarray) -> float:
    """Jackknife error of ``Σ a(m) b(m)`` from deleting one unit of ``counts``."""
    jobs, totals = counts, counts.sum(axis=1)
    if jobs.shape[0] >= 2:
        total = jobs.sum(axis=0)
        reps = [float(np.dot(total - jobs[j], other)) / (totals.sum() - totals[j]) for j in range(jobs.shape[0])]
        return _jackknife_se(reps)
    c = jobs[0]
    n = float(c.sum())
    if n < 2:
        return float("nan")
    theta = float(np.dot(c, other)) / n
    present = c > 0
    reps = (n * theta - other[present]) / (n - 1.0)
    return _weighted_jackknife_se(reps, c[present])


def cross_collision_estimate(
    jobs_a: Sequence[CountsTable],
    jobs_b: Sequence[CountsTable],
    relation: RelationSpec,
) -> CollisionEstimate:
    """
    Unbiased p1·p2 from cross-matching full variable strings.

    Every job fixes the positions outside its outputs to uniformly random
    bits (recorded in ``CountsTable.fixes``); fix bits and sampled bits form
    an ``n_v``-bit string. The estimate is the fraction of (A, B) string
    pairs that coincide.

    Raises
    ------
    InsufficientShots, RelationMismatch
    """
    a = _side_matrix(jobs_a, relation, "A")
    b = _side_matrix(jobs_b, relation, "B")
    na, nb = a.sum(), b.sum()
    if na < 1 or nb < 1:
        raise InsufficientShots("Для перекрёстной оценки нужны запуски на обеих сторонах.")
    fa, fb = a.sum(axis=0) / na, b.sum(axis=0) / nb
    value = float(np.dot(fa, fb))
    err = math.sqrt(_cross_side_se(a, fb) ** 2 + _cross_side_se(b, fa) ** 2)
    return CollisionEstimate(
        value=value,
        std_error=err,
        method="cross-collision",
        samples=int(na + nb),
        jobs=a.shape[0] + b.shape[0],
    )


def _combine_se(c11: CollisionEstimate, c12: CollisionEstimate, c22: CollisionEstimate) -> float:
    return math.sqrt(c11.std_error ** 2 + 4.0 * c12.std_error ** 2 + c22.std_error ** 2)


def l2_collision(
    jobs_a: Sequence[CountsTable],
    jobs_b: Sequence[CountsTable],
    relation: RelationSpec,
    self_mode: str = "fixes",
    reference_a: Optional[CountsTable] = None,
    reference_b: Optional[CountsTable] = None,
) -> L2Estimate:
    """
    Collision estimate of ‖p_A - p_B‖² with a joint delete-one-job jackknife.

    ``self_mode="fixes"`` pools within-job collisions of the random-fix jobs
    for the self terms; ``"reference"`` uses the reference-fix tables.
    """
    if self_mode not in SELF_MODES:
        raise ValidationError(f"Неизвестный режим {self_mode!r}.")
    n_v = relation.n_v
    jobs_a, jobs_b = list(jobs_a), list(jobs_b)
    c12 = cross_collision_estimate(jobs_a, jobs_b, relation)
    if self_mode == "fixes":
        c11 = pooled_self_collision(jobs_a, n_v)
        c22 = pooled_self_collision(jobs_b, n_v)
    else:
        if reference_a is None or reference_b is None:
            raise InsufficientShots("Для режима 'reference' нужны опорные задания обеих сторон.")
        c11 = self_collision_estimate(reference_a, n_v)
        c22 = self_collision_estimate(reference_b, n_v)

    if len(jobs_a) < 2 or len(jobs_b) < 2:
        return L2Estimate(c11, c12, c22, _combine_se(c11, c12, c22))

    a = _side_matrix(jobs_a, relation, "A")
    b = _side_matrix(jobs_b, relation, "B")
    fa, fb = a.sum(axis=0) / a.sum(), b.sum(axis=0) / b.sum()
    variance = 0.0
    for side, mat, other, self_est in (("A", a, fb, c11), ("B", b, fa, c22)):
        jobs = jobs_a if side == "A" else jobs_b
        coll, pairs = _pooled_terms(jobs)
        k = 2.0 ** (-(n_v - jobs[0].n_bits))
        total, totals = mat.sum(axis=0), mat.sum(axis=1)
        reps = []
        for j in range(mat.shape[0]):
            cross = float(np.dot(total - mat[j], other)) / (totals.sum() - totals[j])
            if self_mode == "fixes":
                self_val = k * (coll.sum() - coll[j]) / (pairs.sum() - pairs[j])
            else:
                self_val = self_est.value
            reps.append(self_val - 2.0 * cross)
        variance += _jackknife_se(reps) ** 2
    if self_mode == "reference":
        variance += c11.std_error ** 2 + c22.std_error ** 2
    return L2Estimate(c11, c12, c22, math.sqrt(variance))


def l2_versus_theory(
    jobs: Sequence[CountsTable],
    relation: RelationSpec,
    side: str,
    ideal: PVector,
) -> L2Estimate:
    """
    ‖p_device - p_ideal‖² with p_device·p_ideal as the sample mean of p_ideal.

    Needs the full ideal vector, so the result is flagged as not scalable.
    """
    if ideal.variable_set != relation.variable_set:
        raise VariableSetMismatch("Теоретический вектор задан на другом наборе переменных.")
    jobs = list(jobs)
    mat = _side_matrix(jobs, relation, side)
    p = np.asarray(ideal.probs)
    c11 = pooled_self_collision(jobs, relation.n_v)
    totals = mat.sum(axis=1)
    cross_value = float(mat.sum(axis=0) @ p) / totals.sum()
    c22 = CollisionEstimate(float(p @ p), 0.0, "exact")

    if len(jobs) >= 2:
        coll, pairs = _pooled_terms(jobs)
        k = 2.0 ** (-(relation.n_v - jobs[0].n_bits))
        total = mat.sum(axis=0)
        reps = []
        cross_reps = []
        for j in range(len(jobs)):
            cross = float((total - mat[j]) @ p) / (totals.sum() - totals[j])
            cross_reps.append(cross)
            reps.append(k * (coll.sum() - coll[j]) / (pairs.sum() - pairs[j]) - 2.0 * cross)
        se = _jackknife_se(reps)
        cross_se = _jackknife_se(cross_reps)
    else:
        cross_se = _cross_side_se(mat, p)
        se = math.sqrt(c11.std_error ** 2 + 4.0 * cross_se ** 2)
    c12 = CollisionEstimate(cross_value, cross_se, "sample-mean", samples=int(totals.sum()), jobs=len(jobs))
    return L2Estimate(c11, c12, c22, se, scalable=False)


# -------------------- checks and auxiliary formulas --------------------

def sanity_classify(pp_estimate: float, n_O: int, std_error: float = 0.0) -> SanityFlag:
    """
    Compare a collision probability with the uniform and Porter-Thomas values.

    Tolerance is three standard errors (at least 1e-9); when both values are
    within tolerance the closer one wins.
    """
    if pp_estimate < 0:
        raise ValidationError("Вероятность совпадения не может быть отрицательной.")
    tol = max(3.0 * (std_error if math.isfinite(std_error) else 0.0), 1e-9)
    uniform = 2.0 ** (-n_O)
    candidates = [
        (abs(pp_estimate - uniform), SanityFlag.UNIFORM_SUSPECT),
        (abs(pp_estimate - 2.0 * uniform), SanityFlag.PORTER_THOMAS_LIKE),
    ]
    hits = [c for c in candidates if c[0] <= tol]
    if not hits:
        return SanityFlag.OTHER
    return min(hits, key=lambda c: c[0])[1]


def _tls_fit(x: np.ndarray, y: np.ndarray, sx: float, sy: float) -> Tuple[float, float]:
    xs, ys = x / sx, y / sy
    z = np.column_stack([xs - xs.mean(), ys - ys.mean()])
    if np.allclose(z, 0.0, atol=1e-15):
        raise DegenerateInput("Все точки совпадают: прямая не определена.")
    _, s, vt = np.linalg.svd(z, full_matrices=False)
    if s.size > 1 and s[0] - s[1] <= 1e-12 * s[0]:
        raise DegenerateInput("Облако точек изотропно: направление прямой не определено.")
    a, b = vt[-1]
    if abs(b) <= 1e-12 * max(abs(a), 1.0):
        raise DegenerateInput("Прямая вертикальна: наклон не определён.")
    slope = -a / b * sy / sx
    return slope, float(y.mean() - slope * x.mean())


def _axis_scale(err: Optional[Sequence[float]], n: int) -> float:
    if err is None:
        return 1.0
    e = np.broadcast_to(np.asarray(err, dtype=float), (n,))
    rms = float(np.sqrt(np.mean(e ** 2)))
    return rms if rms > 0 else 1.0


def total_least_squares(
    points: Sequence[Tuple[float, float]],
    x_err: Optional[Sequence[float]] = None,
    y_err: Optional[Sequence[float]] = None,
    weighting: str = "axis-rms",
) -> RegressionResult:
    """
    Orthogonal-distance straight-line fit.

    With ``weighting="axis-rms"`` each axis is divided by the RMS of its
    per-point errors before the fit and the line is transformed back;
    ``"none"`` fits the raw coordinates. The covariance of
    (intercept, slope) is the delete-one-point jackknife; band half-widths
    are 3-sigma mean prediction intervals at each abscissa.

    Raises
    ------
    DegenerateInput
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise DegenerateInput("Для регрессии нужно не меньше трёх точек (x, y).")
    if weighting not in ("axis-rms", "none"):
        raise ValidationError(f"Неизвестная схема весов {weighting!r}.")
    x, y = pts[:, 0], pts[:, 1]
    n = x.size
    sx = _axis_scale(x_err, n) if weighting == "axis-rms" else 1.0
    sy = _axis_scale(y_err, n) if weighting == "axis-rms" else 1.0
    slope, intercept = _tls_fit(x, y, sx, sy)

    reps = []
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        keep[i] = False
        try:
            s_i, b_i = _tls_fit(x[keep], y[keep], sx, sy)
        except DegenerateInput:
            keep[i] = True
            continue
        keep[i] = True
        reps.append((b_i, s_i))
    if len(reps) >= 2:
        r = np.asarray(reps)
        m = len(reps)
        d = r - r.mean(axis=0)
        cov = (m - 1) / m * d.T @ d
    else:
        cov = np.full((2, 2), np.nan)

    return RegressionResult(
        slope=float(slope),
        intercept=float(intercept),
        slope_std_error=float(math.sqrt(cov[1, 1])) if np.isfinite(cov[1, 1]) else float("nan"),
        intercept_std_error=float(math.sqrt(cov[0, 0])) if np.isfinite(cov[0, 0]) else float("nan"),
        covariance=cov,
        abscissae=tuple(float(v) for v in x),
        prediction_band_halfwidths=tuple(float(h) for h in _band(cov, x)),
    )


def _check_expectations(values: Sequence[float], M: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size != M:
        raise ValidationError(f"Ожидалось {M} средних значений, получено {arr.size}.")
    if np.any(np.abs(arr) > 1.0 + 1e-12):
        raise OutOfRangeExpectation("Средние значения стабилизаторов должны лежать в [-1, 1].")
    return arr


def fidelity_lower_bound(
    stabilizer_expectations: Sequence[float],
    M: int,
    coefficients: Optional[Sequence[float]] = None,
) -> FidelityBound:
    """
    Identity-product fidelity bound.

    ``α_ID = Σ λ_i ⟨O_i⟩`` (λ_i = +1 by default), ``F_min = (α_ID - M + 4) / 4``,
    and a Bell-type violation when ``α_ID > M - 2``.

    Raises
    ------
    OutOfRangeExpectation
    """
    arr = _check_expectations(stabilizer_expectations, M)
    lam = np.ones(M) if coefficients is None else np.asarray(coefficients, dtype=float)
    if lam.size != M:
        raise ValidationError("Число коэффициентов не совпадает с M.")
    alpha = float(np.dot(lam, arr))
    return FidelityBound(alpha, (alpha - M + 4.0) / 4.0, alpha > M - 2)


def violation_significance(
    stabilizer_expectations: Sequence[float],
    errors: Sequence[float],
    M: int,
    coefficients: Optional[Sequence[float]] = None,
) -> Dict[str, float]:
    """Errors of α_ID and F_min and the violation margin ``(α_ID - (M-2)) / σ`` in sigmas."""
    bound = fidelity_lower_bound(stabilizer_expectations, M, coefficients)
    lam = np.ones(M) if coefficients is None else np.asarray(coefficients, dtype=float)
    err = np.broadcast_to(np.asarray(errors, dtype=float), (M,))
    alpha_err = float(math.sqrt(np.sum((lam * err) ** 2)))
    sigma = (bound.alpha_id - (M - 2)) / alpha_err if alpha_err > 0 else float("inf")
    return {"alpha_id_err": alpha_err, "f_min_err": alpha_err / 4.0, "violation_sigma": sigma}


def subsample_analysis(
    l2_values_per_instance: Sequence[float],
    subset_sizes: Sequence[int],
    trials: int = 1000,
    seed: Any = None,
) -> pd.DataFrame:
    """
    Mean and 1-sigma spread of subset means, per subset size.

    All subsets are enumerated when there are at most ``trials`` of them;
    otherwise ``trials`` random subsets are drawn.

    Returns
    -------
    pandas.DataFrame
        Columns ``size``, ``mean``, ``spread``, ``subsets``.

    Raises
    ------
    SubsetTooLarge
    """
    values = np.asarray(l2_values_per_instance, dtype=float)
    n = values.size
    rng = np.random.default_rng(seed)
    rows = []
    for size in subset_sizes:
        size = int(size)
        if size > n or size < 1:
            raise SubsetTooLarge(f"Размер подвыборки {size} вне диапазона 1..{n}.")
        if math.comb(n, size) <= trials:
            means = np.array([values[list(c)].mean() for c in combinations(range(n), size)])
        else:
            means = np.empty(trials)
            for t in range(trials):
                idx = np.sort(rng.choice(n, size=size, replace=False))
                means[t] = values[idx].mean()
        rows.append({"size": size, "mean": float(means.mean()), "spread": float(means.std()), "subsets": means.size})
    return pd.DataFrame(rows, columns=["size", "mean", "spread", "subsets"])


def format_uncertainty(value: float, err: Optional[float]) -> str:
    """Parenthesis notation: ``format_uncertainty(0.0331, 0.0012) == '0.033(1)'``."""
    if err is None or not math.isfinite(err) or err <= 0:
        return f"{value:.4g}"
    decimals = max(0, -int(math.floor(math.log10(err))))
    digit = int(round(err * 10 ** decimals))
    if digit >= 10 and decimals > 0:
        decimals -= 1
        digit = int(round(err * 10 ** decimals))
    return f"{value:.{decimals}f}({digit})"
