from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List

from constants import (
    CHECK_COLUMNS,
    CONSTANT_COLUMNS,
    CONVERGENCE_COLUMNS,
    DECAY_COLUMNS,
    DISTANCE_COLUMNS,
    GROWTH_COLUMNS,
    ITERATION_COLUMNS,
    SWEEP_COLUMNS,
)
from utils import FloatRow, format_row

# --- Abstract Base Class --- #


class ReportRecord(ABC):
    """One row of a CSV report with a fixed column schema."""

    columns: List[str] = []

    @abstractmethod
    def values(self) -> list:
        """Row values in column order."""
        pass

    def to_row(self) -> FloatRow:
        return format_row(self.values())


# --- Concrete Records --- #


@dataclass
class CheckRow(ReportRecord):
    """A single asserted invariant: name, measured value, tolerance and verdict."""

    name: str
    value: float
    tolerance: float
    passed: bool

    columns = CHECK_COLUMNS

    def values(self) -> list:
        return [self.name, self.value, self.tolerance, bool(self.passed)]

    @classmethod
    def at_most(cls, name: str, value: float, tolerance: float) -> "CheckRow":
        return cls(name, float(value), float(tolerance), bool(value <= tolerance))

    @classmethod
    def at_least(cls, name: str, value: float, tolerance: float) -> "CheckRow":
        return cls(name, float(value), float(tolerance), bool(value >= tolerance))


@dataclass
class IterationRow(ReportRecord):
    iteration: int
    increment: float
    residual: float
    damping: float

    columns = ITERATION_COLUMNS

    def values(self) -> list:
        return [self.iteration, self.increment, self.residual, self.damping]


@dataclass
class DecayRow(ReportRecord):
    t: float
    y_plus: float
    y_minus: float
    dy_plus_fd: float
    edge_energy: float

    columns = DECAY_COLUMNS

    def values(self) -> list:
        return [self.t, self.y_plus, self.y_minus, self.dy_plus_fd, self.edge_energy]


@dataclass
class GrowthRow(ReportRecord):
    t: float
    slab_h1: float
    slab_l4: float
    cumulative_grad: float
    normalized: float

    columns = GROWTH_COLUMNS

    def values(self) -> list:
        return [self.t, self.slab_h1, self.slab_l4, self.cumulative_grad, self.normalized]


@dataclass
class ConstantRow(ReportRecord):
    name: str
    value: float
    provenance: str

    columns = CONSTANT_COLUMNS

    def values(self) -> list:
        return [self.name, self.value, self.provenance]


@dataclass
class SweepRow(ReportRecord):
    epsilon: float
    dist: float
    max_ratio: float
    certified: bool

    columns = SWEEP_COLUMNS

    def values(self) -> list:
        return [self.epsilon, self.dist, self.max_ratio, bool(self.certified)]


@dataclass
class ConvergenceRow(ReportRecord):
    h: float
    velocity_h1_error: float
    pressure_l2_error: float
    velocity_order: float
    pressure_order: float

    columns = CONVERGENCE_COLUMNS

    def values(self) -> list:
        return [
            self.h,
            self.velocity_h1_error,
            self.pressure_l2_error,
            self.velocity_order,
            self.pressure_order,
        ]


@dataclass
class DistanceRow(ReportRecord):
    start_a: str
    start_b: str
    h1_distance: float

    columns = DISTANCE_COLUMNS

    def values(self) -> list:
        return [self.start_a, self.start_b, self.h1_distance]
