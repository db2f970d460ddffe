"""FusionSort: spectral-fusion semantic segmentation at desk scale.

A from-scratch float64 pipeline: reverse-mode autodiff core, PCA data
fusion of hyperspectral and RGB streams, a comprehensive attention block
(coordinate attention + selective state-space path + weighted fusion),
Dice/cross-entropy training, and a deterministic CLI.  Hot kernels run
through a compiled extension when available and a numpy fallback otherwise
(see fusionsort._kernels.BACKEND).
"""

from ._kernels import BACKEND
from .errors import (ConfigError, FormatError, FusionSortError, LabelError,
                     NumericsError, ShapeError)
from .formats import HyperCube, LabelMask
from .fusion import PcaModel, fit_pca, fuse, project_hyper3
from .gradcheck import grad_check
from .losses import LossWeights, combined_loss, cross_entropy_loss, dice_loss
from .metrics import SegmentationReport, confusion_matrix, evaluate
from .network import NetworkConfig, ablation_config, build_network
from .synthetic import generate_synthetic_dataset
from .tensor import GradTape, Parameter, Tensor
from .train import TrainConfig, evaluate_dataset, train_toy

__version__ = "1.0.0"

__all__ = [
    "BACKEND",
    "ConfigError", "FormatError", "FusionSortError", "LabelError",
    "NumericsError", "ShapeError",
    "HyperCube", "LabelMask",
    "PcaModel", "fit_pca", "fuse", "project_hyper3",
    "grad_check",
    "LossWeights", "combined_loss", "cross_entropy_loss", "dice_loss",
    "SegmentationReport", "confusion_matrix", "evaluate",
    "NetworkConfig", "ablation_config", "build_network",
    "generate_synthetic_dataset",
    "GradTape", "Parameter", "Tensor",
    "TrainConfig", "evaluate_dataset", "train_toy",
    "__version__",
]
