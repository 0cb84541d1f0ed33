"""certitrain: train small ReLU networks that provably satisfy
input/output correctness properties.

The pieces fit together like this: :mod:`certitrain.network` evaluates
networks on tapes, :mod:`certitrain.boxes` propagates sound interval
bounds through them, :mod:`certitrain.properties` scores how badly an
output (or a whole output box) violates a predicate,
:mod:`certitrain.regions` partitions property input boxes and refines
the worst pieces, and :mod:`certitrain.training` drives the summed
worst-case violation to exactly zero.  :mod:`certitrain.sampling`
cross-checks everything by brute force.
"""

from .boxes import Box, affine_box, bisect, forward_box, relu_box
from .errors import (CertitrainError, ConfigError, DivergenceError,
                     FileFormatError, RefinementError, ShapeError, TapeError)
from .network import (LayerSpec, Network, forward, forward_values,
                      load_network, random_network, save_network)
from .optim import AdamState, adam_step, sgd_step
from .properties import (And, Atom, CorrectnessProperty, Or, load_properties,
                         negate, satisfies, satisfies_batch, save_properties,
                         violation_distance, violation_distance_batch,
                         worst_case_distance)
from .regions import (Region, RegionSet, refine_topk, region_losses,
                      score_dimensions, verify_cover, write_split_log)
from .sampling import (BoundViolation, grid_worst_distance, read_dataset_csv,
                       sample_bound_violations, sample_labeled_dataset,
                       sample_satisfaction, write_dataset_csv)
from .tape import GradientBundle, Tape, backward
from .training import (Dataset, EpochStats, PlateauDecay, TrainConfig,
                       TrainReport, accuracy_loss, certify, train)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "And", "Atom", "BoundViolation", "Box", "CertitrainError",
    "ConfigError", "CorrectnessProperty", "Dataset", "DivergenceError",
    "EpochStats", "FileFormatError", "GradientBundle", "LayerSpec", "Network",
    "Or", "PlateauDecay", "RefinementError", "Region", "RegionSet",
    "ShapeError", "Tape", "TapeError", "TrainConfig", "TrainReport",
    "accuracy_loss", "adam_step", "affine_box", "backward", "bisect",
    "certify", "forward", "forward_box", "forward_values",
    "grid_worst_distance", "load_network", "load_properties", "negate",
    "random_network", "read_dataset_csv", "refine_topk", "region_losses",
    "relu_box", "sample_bound_violations", "sample_labeled_dataset",
    "sample_satisfaction", "satisfies", "satisfies_batch", "save_network",
    "save_properties", "score_dimensions", "sgd_step", "train",
    "verify_cover", "violation_distance", "violation_distance_batch",
    "worst_case_distance", "write_dataset_csv", "write_split_log",
]
