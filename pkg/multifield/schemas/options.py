from pydantic import BaseModel, Field, ConfigDict, field_validator, model_validator
from typing import Optional, List
from enum import Enum


class StepRule(str, Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"

class FieldName(str, Enum):
    PLACEMENT = "x"
    ORDER = "nu"

class Side(str, Enum):
    LOWER = "lower"
    UPPER = "upper"

class BoundaryCondition(BaseModel):
    """Fixed nodal values of one field on one face of the body box"""
    field: FieldName
    axis: int = Field(..., ge=0)
    side: Side
    # None keeps the initial values on the face
    value: Optional[List[float]] = None

    model_config = ConfigDict(extra="forbid")

class SolveOptions(BaseModel):
    """Options of the static energy minimizer"""
    max_iterations: int = Field(2000, gt=0)
    step_rule: StepRule = StepRule.BACKTRACKING
    # first trial step as a fraction of the squared grid spacing
    step_size: float = Field(0.25, gt=0.0, lt=1.0)
    shrink: float = Field(0.5, gt=0.0, lt=1.0)
    sufficient_decrease: float = Field(1e-4, gt=0.0, lt=1.0)
    spectral_step: bool = True
    max_backtracks: Optional[int] = Field(None, gt=0)
    tolerance: float = Field(1e-6, gt=0.0)
    boundary_conditions: List[BoundaryCondition] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")

class IntegrateOptions(BaseModel):
    """Options of the Stormer-Verlet integrator"""
    dt: float = Field(..., gt=0.0)
    T: float = Field(..., gt=0.0)
    newton_tolerance: float = Field(1e-12, gt=0.0)
    newton_iterations: int = Field(25, gt=0)
    boundary_conditions: List[BoundaryCondition] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_step_count(self):
        if self.dt > self.T:
            raise ValueError(f"time step {self.dt} exceeds the horizon {self.T}")
        return self

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

class RefinementLevel(BaseModel):
    """One refinement level: grid spacing and optional time step"""
    h: float = Field(..., gt=0.0)
    dt: Optional[float] = Field(None, gt=0.0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("h")
    @classmethod
    def finite_spacing(cls, value: float) -> float:
        if value >= 1.0:
            raise ValueError("grid spacing must be below the unit body size")
        return value
