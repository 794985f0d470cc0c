from pydantic import BaseModel, Field, ConfigDict, field_validator, model_validator
from typing import Optional, List, Dict, Any, Union, Literal, Annotated
from enum import Enum

from multifield.schemas.options import SolveOptions, IntegrateOptions, RefinementLevel


class BodyConfig(BaseModel):
    """Box body with uniform density"""
    lower: List[float] = Field(..., min_length=1, max_length=3)
    upper: List[float] = Field(..., min_length=1, max_length=3)
    nodes: Union[int, List[int]] = 11
    rho0: float = Field(1.0, gt=0.0)
    gamma: Optional[List[List[float]]] = None
    transverse_measure: float = Field(1.0, gt=0.0)
    quadrature_rule: Optional[Literal["simpson", "trapezoid"]] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_extents(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("upper must exceed lower on every axis")
        if isinstance(self.nodes, list) and len(self.nodes) != len(self.lower):
            raise ValueError("nodes must give one count per axis")
        return self

class PresetConfig(BaseModel):
    """Named preset with parameter overrides"""
    preset: str = Field(..., min_length=1)
    parameters: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")

class InterfaceShape(str, Enum):
    PLANE = "plane"
    SPHERE = "sphere"

class InterfaceConfig(BaseModel):
    """Discontinuity surface and its energy"""
    shape: InterfaceShape
    point: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    normal: List[float] = Field(default_factory=lambda: [0.0, 0.0, 1.0])
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    radius: float = Field(1.0, gt=0.0)
    phi: PresetConfig = Field(default_factory=lambda: PresetConfig(preset="zero"))
    U: float = 0.0

    model_config = ConfigDict(extra="forbid")

class PlacementInit(BaseModel):
    """Initial placement x = A X + c"""
    matrix: Optional[List[List[float]]] = None
    shift: Optional[List[float]] = None

    model_config = ConfigDict(extra="forbid")

class OrderInit(BaseModel):
    """Initial order parameter"""
    kind: Literal["constant", "interpolate", "wave", "random"] = "constant"
    value: Optional[List[float]] = None
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    axis: int = Field(0, ge=0)
    amplitude: float = 0.05
    wavenumber: int = Field(1, ge=1)
    perturbation: float = Field(0.0, ge=0.0)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == "constant" and self.value is None:
            raise ValueError("a constant order parameter needs 'value'")
        if self.kind == "interpolate" and (self.lower is None or self.upper is None):
            raise ValueError("an interpolated order parameter needs 'lower' and 'upper'")
        return self

class InitialFields(BaseModel):
    placement: PlacementInit = Field(default_factory=PlacementInit)
    order: OrderInit = Field(default_factory=lambda: OrderInit(kind="constant", value=[0.0]))

    model_config = ConfigDict(extra="forbid")

class Acceptance(BaseModel):
    """Thresholds on task metrics; a missing metric fails its threshold"""
    max: Dict[str, float] = Field(default_factory=dict)
    min: Dict[str, float] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")

class TaskBase(BaseModel):
    name: Optional[str] = None
    acceptance: Acceptance = Field(default_factory=Acceptance)

    model_config = ConfigDict(extra="forbid")

class DistanceDemoTask(TaskBase):
    kind: Literal["distance-demo"]
    demo: Literal["cauchy-real-line", "cauchy-circle", "beam"]
    n_max: int = Field(8, ge=2)
    h: float = Field(1.0 / 200.0, gt=0.0)
    mode: Literal["raw", "bounded"] = "raw"
    lengths: List[float] = Field(default_factory=lambda: [10.0, 20.0, 40.0])

class MinimizeTask(TaskBase):
    kind: Literal["minimize"]
    initial: InitialFields = Field(default_factory=InitialFields)
    options: SolveOptions = Field(default_factory=SolveOptions)
    compare: Optional[Literal["great-circle"]] = None

class GeneratorConfig(BaseModel):
    """Noether generator: spatial translation c, or order shift xi of a group"""
    translation: Optional[List[float]] = None
    group: Optional[str] = None
    xi: Optional[List[float]] = None

    model_config = ConfigDict(extra="forbid")

class IntegrateTask(TaskBase):
    kind: Literal["integrate"]
    initial: InitialFields = Field(default_factory=InitialFields)
    options: IntegrateOptions
    generators: List[GeneratorConfig] = Field(default_factory=list)

class ResidualCheck(str, Enum):
    EL_ROUTES = "el-routes"
    ROTATIONAL_INVARIANCE = "rotational-invariance"
    MANUFACTURED = "manufactured"
    PHASE_BOUNDARY = "phase-boundary"
    SPHERE_TENSION = "sphere-tension"
    SURFACE_INVARIANCE = "surface-invariance"
    LEMMAS = "lemmas"
    COVARIANCE = "covariance"

class ResidualSuiteTask(TaskBase):
    kind: Literal["residual-suite"]
    checks: List[ResidualCheck] = Field(..., min_length=1)
    samples: int = Field(100, gt=0)
    cases: List[str] = Field(default_factory=lambda: ["bulk-smooth", "rigid-rotation"])
    case_parameters: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    perturbation: float = 1e-3

class RefinementTask(TaskBase):
    kind: Literal["refinement-study"]
    target: str
    levels: List[RefinementLevel] = Field(..., min_length=3)

Task = Annotated[
    Union[DistanceDemoTask, MinimizeTask, IntegrateTask, ResidualSuiteTask, RefinementTask],
    Field(discriminator="kind"),
]

class Scenario(BaseModel):
    """Scenario file: body, manifold, model, optional interface and a task list"""
    name: str = Field(..., min_length=1)
    description: str = ""
    seed: Optional[int] = Field(None, ge=0)
    body: BodyConfig = Field(default_factory=lambda: BodyConfig(lower=[0.0], upper=[1.0]))
    manifold: str = "R1"
    model: PresetConfig = Field(default_factory=lambda: PresetConfig(preset="quadratic"))
    interface: Optional[InterfaceConfig] = None
    tasks: List[Task] = Field(default_factory=list)
    output_dir: Optional[str] = None

    model_config = ConfigDict(extra="forbid")

    @field_validator("name")
    @classmethod
    def check_name(cls, value: str) -> str:
        if any(c in value for c in "/\\"):
            raise ValueError("scenario names must not contain path separators")
        return value
