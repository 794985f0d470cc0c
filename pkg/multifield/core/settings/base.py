# multifield/core/settings/base.py
from pydantic_settings import BaseSettings
from pydantic import Field, field_validator, ConfigDict
import os
import logging
from pathlib import Path

# Get the environment - no need to load dotenv here, it's already loaded in __init__.py
ENV = os.getenv("ENV", "development").lower()

logger = logging.getLogger(__name__)

class BaseAppSettings(BaseSettings):
    # ------------------------------
    # ENVIRONMENT SETTINGS
    # ------------------------------
    ENV: str = Field(default=ENV, description="Current environment (development, testing, production)")

    @property
    def IS_TESTING(self) -> bool:
        return self.ENV == "testing"

    STRICT_VALIDATION: bool = Field(
        default=os.getenv("STRICT_VALIDATION", "True" if ENV != "development" else "False").lower() == "true",
        description="Raise on tolerance-based numerical validations instead of logging them"
    )

    def should_validate(self, validation_type: str = "all") -> bool:
        """Whether validations of the given kind must raise."""
        if validation_type == "always":
            return True
        return self.STRICT_VALIDATION

    # ------------------------------
    # LOGGING SETTINGS
    # ------------------------------
    LOG_LEVEL: str = Field(default=os.getenv("LOG_LEVEL", "INFO"), description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)")
    LOG_FORMAT: str = Field(default=os.getenv("LOG_FORMAT", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"), description="Log message format")

    # ------------------------------
    # DIFFERENTIATION SETTINGS
    # ------------------------------
    CHRISTOFFEL_STEP: float = Field(
        default=float(os.getenv("CHRISTOFFEL_STEP", "1e-5")),
        description="Relative central-difference step for Christoffel symbols"
    )
    PARTIALS_STEP: float = Field(
        default=float(os.getenv("PARTIALS_STEP", "1e-6")),
        description="Relative central-difference step for model partial derivatives"
    )
    CHART_MARGIN: float = Field(
        default=float(os.getenv("CHART_MARGIN", "1e-8")),
        description="Points closer than this to a singular chart locus are rejected"
    )

    # ------------------------------
    # GEODESIC SETTINGS
    # ------------------------------
    GEODESIC_MAX_ITERATIONS: int = Field(default=int(os.getenv("GEODESIC_MAX_ITERATIONS", "200")), description="Shooting iterations for the geodesic fallback")
    GEODESIC_TOLERANCE: float = Field(default=float(os.getenv("GEODESIC_TOLERANCE", "1e-10")), description="Endpoint mismatch accepted by geodesic shooting")

    # ------------------------------
    # TOLERANCES
    # ------------------------------
    SYMMETRY_TOLERANCE: float = Field(default=float(os.getenv("SYMMETRY_TOLERANCE", "1e-12")), description="Allowed asymmetry of outputs that must be symmetric")
    TRACE_TOLERANCE: float = Field(default=float(os.getenv("TRACE_TOLERANCE", "1e-6")), description="Relative extrapolation error accepted for one-sided traces")
    TRACE_STEP: float = Field(default=float(os.getenv("TRACE_STEP", "1e-4")), description="Finest offset h of the one-sided trace schedule (4h, 2h, h)")
    ON_SURFACE_TOLERANCE: float = Field(default=float(os.getenv("ON_SURFACE_TOLERANCE", "1e-9")), description="Level-set value accepted as 'on the surface'")
    INVARIANCE_TOLERANCE: float = Field(default=float(os.getenv("INVARIANCE_TOLERANCE", "1.0")), description="Coefficient c of the pass rule |deviation| <= c s^2 (1 + |L|)")
    COMPATIBILITY_TOLERANCE: float = Field(default=float(os.getenv("COMPATIBILITY_TOLERANCE", "1e-8")), description="Pass threshold for coherency / kinematic compatibility residuals")
    CONTINUITY_TOLERANCE: float = Field(default=float(os.getenv("CONTINUITY_TOLERANCE", "1e-8")), description="Allowed jump of the order parameter across a surface")
    ISOCHORIC_TOLERANCE: float = Field(default=float(os.getenv("ISOCHORIC_TOLERANCE", "1e-6")), description="Allowed |Div w| for relabeling generators")
    ROUNDING_FLOOR: float = Field(default=float(os.getenv("ROUNDING_FLOOR", "1e-13")), description="Residual norms below this are treated as rounding noise")

    # ------------------------------
    # QUADRATURE AND SURFACE STENCILS
    # ------------------------------
    QUADRATURE_RULE: str = Field(default=os.getenv("QUADRATURE_RULE", "simpson"), description="Nodal quadrature rule (simpson or trapezoid)")
    SURFACE_STEP: float = Field(default=float(os.getenv("SURFACE_STEP", "1e-3")), description="Step of tangent-frame surface differences")
    SURFACE_EXTRAPOLATE: bool = Field(
        default=os.getenv("SURFACE_EXTRAPOLATE", "True").lower() == "true",
        description="Richardson-extrapolate surface differences (fourth order) instead of the plain 5-point stencil"
    )

    @field_validator('QUADRATURE_RULE')
    @classmethod
    def validate_quadrature_rule(cls, v):
        if v.lower() not in ("simpson", "trapezoid"):
            raise ValueError(f"QUADRATURE_RULE must be 'simpson' or 'trapezoid', got {v!r}")
        return v.lower()

    # ------------------------------
    # ENGINE SETTINGS
    # ------------------------------
    INSTABILITY_FACTOR: float = Field(default=float(os.getenv("INSTABILITY_FACTOR", "10")), description="Energy growth factor treated as integrator blow-up")
    MAX_BACKTRACKS: int = Field(default=int(os.getenv("MAX_BACKTRACKS", "40")), description="Backtracking halvings before a stagnation error")

    # ------------------------------
    # OUTPUT SETTINGS
    # ------------------------------
    OUTPUT_DIR: str = Field(default=os.getenv("OUTPUT_DIR", "reports"), description="Default directory for scenario reports")
    RANDOM_SEED: int = Field(default=int(os.getenv("RANDOM_SEED", "0")), description="Seed used when a scenario does not declare one")
    FLOAT_FORMAT: str = Field(default=os.getenv("FLOAT_FORMAT", ".17g"), description="Format of floats in CSV output")

    # ------------------------------
    # PYDANTIC CONFIGURATION
    # ------------------------------
    # Only look in env directory
    @staticmethod
    def _find_env_file():
        env = os.getenv("ENV", "development")
        env_dir = Path(os.getenv("MULTIFIELD_ENV_DIR", "env"))
        paths = [
            env_dir / f".env.{env}",
            env_dir / ".env"
        ]

        for path in paths:
            if path.exists():
                return str(path)

        return None

    model_config = ConfigDict(
        env_file=_find_env_file(),
        env_file_encoding="utf-8",
        extra="ignore"
    )
