# multifield/schemas/__init__.py
from .options import SolveOptions, IntegrateOptions, BoundaryCondition, RefinementLevel, StepRule
from .scenario import Scenario, InitialFields, PresetConfig, InterfaceConfig, ResidualCheck
from .reports import ScenarioSummary, TaskReport, TaskStatus, Series, RunMetadata
