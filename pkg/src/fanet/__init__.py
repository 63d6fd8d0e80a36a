from fanet.config import (
    DataMode,
    Degradation,
    DegradationConfig,
    LossWeights,
    ModelName,
    NetConfig,
    RunConfig,
    Split,
    Stage,
    StagePlan,
)
from fanet.exceptions import FanError
from fanet._version import __version__

__all__ = [
    "DataMode",
    "Degradation",
    "DegradationConfig",
    "LossWeights",
    "ModelName",
    "NetConfig",
    "RunConfig",
    "Split",
    "Stage",
    "StagePlan",
    "FanError",
    "__version__",
]
