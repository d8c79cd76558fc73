"""
mbqc_crosscheck.errors
======================

Exception hierarchy.

Every input problem is a :class:`ValidationError` (a ``ValueError``) so that
callers can catch one family; device problems are runtime failures.
"""

from __future__ import annotations

from typing import Optional


class ValidationError(ValueError):
    """Raised when validation fails."""


# -------------------- graphs --------------------

class DuplicateEdge(ValidationError):
    """Same unordered edge given twice."""


class SelfLoop(ValidationError):
    """Edge (v, v)."""


class Disconnected(ValidationError):
    """Graph has more than one connected component."""


class UnequalIOSize(ValidationError):
    """|inputs| != |outputs|."""


class UnknownVertex(ValidationError):
    """Reference to a vertex that is not declared."""


class UnknownName(ValidationError):
    """Unknown built-in graph or flow name."""


class UnsupportedGate(ValidationError):
    """Gate kind other than J, CZ or a terminal measurement."""


# -------------------- patterns --------------------

class InvalidFlow(ValidationError):
    """Flow does not satisfy the causal-flow conditions."""


class MissingAngle(ValidationError):
    """Angle set does not cover every vertex."""


class BitsShapeMismatch(ValidationError):
    """Randomization bits do not match the graph/flow."""


class IncompatibleFlows(ValidationError):
    """Two flows do not belong to the same graph."""


class EmptyGrid(ValidationError):
    """Angle grid without entries."""


# -------------------- simulator --------------------

class TooManyWires(ValidationError):
    """Circuit wider than the statevector limit."""


# -------------------- verifier --------------------

class ShapeMismatch(ValidationError):
    """Array or bit-count does not have the expected shape."""


class VariableSetMismatch(ValidationError):
    """Probability vectors live on different variable sets."""


class InsufficientShots(ValidationError):
    """Too few samples for an unbiased estimate."""


class RelationMismatch(ValidationError):
    """Jobs do not fit the relation they are compared under."""


class OutOfRangeExpectation(ValidationError):
    """Stabilizer expectation outside [-1, 1]."""


class DegenerateInput(ValidationError):
    """Regression input does not determine a line."""


class SubsetTooLarge(ValidationError):
    """Sub-sample larger than the population."""


# -------------------- harness --------------------

class PlanInvalid(ValidationError):
    """Experiment plan is inconsistent."""


class MissingDistributions(ValidationError):
    """Report carries no persisted distributions to plot."""


class DeviceFailure(RuntimeError):
    """
    A device could not deliver counts for a job.

    ``audited`` marks a failure already recorded in a run's audit; it never
    aborts the run, whatever the device's strictness.
    """

    def __init__(
        self,
        message: str,
        device_id: str = "",
        job_id: Optional[str] = None,
        audited: bool = False,
    ) -> None:
        super().__init__(message)
        self.device_id = device_id
        self.job_id = job_id
        self.audited = audited
