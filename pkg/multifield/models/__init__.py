# multifield/models/__init__.py
from .manifolds import ManifoldModel, TangentVector
from .body import BodyGrid, PlacementField, OrderField, MotionState, Exhaustion
from .trajectory import Trajectory
from .lagrangian import LagrangianModel, GeneratorSet, Sources
from .interface import InterfaceModel, SurfaceEnergyModel, JumpRecord, PointJet, StatePair
