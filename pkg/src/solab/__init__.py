"""solab: a numerical laboratory for the level-set flow of O(3)-symmetric steady solitons."""

from importlib.metadata import PackageNotFoundError, version

__app_name__ = "solab"

try:
    __version__ = version(__app_name__)
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from solab.errors import (  # noqa: E402
    BarrierConstructionError,
    ConfigError,
    DirectionError,
    InsufficientDataError,
    ModelRejectionError,
    SchemaError,
    SingularityError,
    SolabError,
    StepSizeError,
    ValidationError,
)
from solab.levelset_flow import ErrorModel, FlowTrajectory, integrate  # noqa: E402
from solab.warped_geometry import RadialProfile  # noqa: E402

__all__ = [
    "__version__",
    "BarrierConstructionError",
    "ConfigError",
    "DirectionError",
    "ErrorModel",
    "FlowTrajectory",
    "InsufficientDataError",
    "ModelRejectionError",
    "RadialProfile",
    "SchemaError",
    "SingularityError",
    "SolabError",
    "StepSizeError",
    "ValidationError",
    "integrate",
]
