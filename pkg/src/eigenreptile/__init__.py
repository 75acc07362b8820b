"""Eigen-Reptile meta-learning: principal-direction meta-updates over inner-loop
trajectories, with introspective self-paced sample selection (ISPL)."""

from .estimator import EigenReptileClassifier, EigenReptileRegressor
from .ispl import ISPLConfig
from .linalg import principal_direction, sym_eigen
from .meta import MetaConfig, eigen_reptile_meta_update, outer_loop, reptile_update, task_direction
from .nn import Batch, NetworkSpec, OptimizerState
from .tasks import ClassificationConfig, ClassificationTaskSource, SineTaskSource

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ClassificationConfig",
    "ClassificationTaskSource",
    "EigenReptileClassifier",
    "EigenReptileRegressor",
    "ISPLConfig",
    "MetaConfig",
    "NetworkSpec",
    "OptimizerState",
    "SineTaskSource",
    "eigen_reptile_meta_update",
    "outer_loop",
    "principal_direction",
    "reptile_update",
    "sym_eigen",
    "task_direction",
]
