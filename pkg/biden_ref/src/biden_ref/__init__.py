"""Toy-scale reference trainer for blind image decomposition.

Consumes datasets described by JSONL manifests and PNG trees, trains a
multi-branch encoder with per-component reconstruction heads against a
dual-output patch discriminator, and writes predictions in the scoring
harness's JSON-line format.
"""

from .data import (component_table, make_batch, read_manifest, split_holdout,
                   write_predictions)
from .losses import (FeaturePyramid, LossWeights, adversarial_term,
                     discriminator_loss, feature_distance, recon_term,
                     subset_bce, total_loss)
from .models import (Discriminator, DiscriminatorSpec, Generator,
                     GeneratorSpec, build_discriminator, build_generator,
                     count_parameters, generate, predict_sources)
from .train import TrainConfig, TrainResult, decay_factor, evaluate, train

__all__ = [
    "GeneratorSpec", "DiscriminatorSpec", "Generator", "Discriminator",
    "build_generator", "build_discriminator", "generate", "predict_sources",
    "count_parameters",
    "LossWeights", "FeaturePyramid", "adversarial_term", "feature_distance",
    "recon_term", "subset_bce", "total_loss", "discriminator_loss",
    "read_manifest", "component_table", "make_batch", "split_holdout",
    "write_predictions",
    "TrainConfig", "TrainResult", "decay_factor", "evaluate", "train",
]
