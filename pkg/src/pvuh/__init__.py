"""pvuh: human-centric point-cloud-video pipeline at desk scale.

Synthetic LiDAR human sequences with part and flow ground truth,
body-part patch masking, spatio-temporal masked-autoencoder
pretraining, and hierarchical-feature fine-tuning, on a self-contained
numpy reverse-mode kernel.
"""

__version__ = "0.1.0"

from . import geom, metrics, patchmask, synthgen, tensornet
from .data import PreparedDataset, prepare_dataset, split_dataset, subsample_fraction
from .train import TrainConfig, evaluate, finetune, pretrain

__all__ = [
    "geom", "metrics", "patchmask", "synthgen", "tensornet",
    "PreparedDataset", "prepare_dataset", "split_dataset", "subsample_fraction",
    "TrainConfig", "evaluate", "finetune", "pretrain",
    "__version__",
]
