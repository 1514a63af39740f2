"""Online ResNet-based adaptive tracking control: network, control law, simulation."""

from .adaptation import LearningRate, SearchSpace, smooth_projection, update_law
from .control import AdaptiveController, ControllerKind, Gains, control_input, pseudoinverse
from .network import (
    BlockSpec,
    NetworkSpec,
    ParamVector,
    devectorize,
    param_count,
    resnet_forward,
    resnet_jacobian,
    vectorize,
)
from .simulate import SimConfig, TrajectoryLog, metrics, run_simulation

__version__ = "0.1.0"
