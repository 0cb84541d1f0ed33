"""The joint training loop: drive the summed worst-case violation distance
to exactly zero while keeping the accuracy loss under a bound.

Each epoch evaluates every region's worst-case distance and the dataset
cross-entropy, exits as certified when the former is exactly 0.0 and the
latter is within bounds, and otherwise takes one optimizer step on the
joint loss followed by one round of refinement.  The certified exit is
checked before any weight update, so an already-safe network returns
untouched.

The zero test on the correctness loss is an exact floating-point
comparison on purpose: every atom distance is a hard ``max(0, .)``, so
zero is reachable, and any tolerance would void the guarantee that a
certified result implies the property holds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .network import batch_tape
from .optim import AdamState, adam_step, sgd_step
from .regions import RegionSet, _split_region, refine_topk, region_losses
from .tape import GradientBundle, SoftmaxCrossEntropy, Tape, backward


@dataclass(frozen=True)
class Dataset:
    """Labeled classification samples: inputs (n, d), integer labels (n,)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.array(self.inputs, dtype=float))
        labels = np.atleast_1d(np.array(self.labels, dtype=int))
        if inputs.shape[0] != labels.shape[0]:
            raise ShapeError("inputs and labels must have the same length")
        if inputs.size and not np.isfinite(inputs).all():
            raise ShapeError("dataset inputs must be finite")
        if labels.size and labels.min() < 0:
            raise ShapeError("labels must be nonnegative class indices")
        inputs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.shape[0]

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=int))


@dataclass(frozen=True)
class PlateauDecay:
    """Halve-style decay after the joint loss stalls for ``patience`` epochs."""

    patience: int = 10
    factor: float = 0.5

    def __post_init__(self):
        if self.patience < 1 or not 0.0 < self.factor < 1.0:
            raise ConfigError("plateau decay needs patience >= 1 and factor in (0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    k: int = 200
    region_cap: int = 5000
    eps_accuracy: float = 0.1
    max_epochs: int = 100
    optimizer: str = "adam"
    lr_decay: PlateauDecay | None = PlateauDecay()
    seed: int = 0
    refine: bool = True
    correctness_weight: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.k <= 0:
            raise ConfigError("k must be positive")
        if self.region_cap <= 0:
            raise ConfigError("region cap must be positive")
        if self.eps_accuracy < 0:
            raise ConfigError("eps_accuracy must be nonnegative")
        if self.max_epochs <= 0:
            raise ConfigError("max_epochs must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.correctness_weight <= 0:
            raise ConfigError("correctness_weight must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss_correct: float
    loss_accuracy: float
    regions: int
    seconds: float


CERTIFIED = "certified"
BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class TrainReport:
    epochs: tuple[EpochStats, ...]
    outcome: str
    final_loss_correct: float
    final_loss_accuracy: float
    region_count: int
    split_count: int
    config: TrainConfig

    def __post_init__(self):
        certified = (self.final_loss_correct == 0.0
                     and self.final_loss_accuracy <= self.config.eps_accuracy)
        if (self.outcome == CERTIFIED) != certified:
            raise ConfigError("report outcome disagrees with its final losses")

    @property
    def certified(self):
        return self.outcome == CERTIFIED


def accuracy_loss(net, dataset):
    """Mean softmax cross entropy on a differentiable tape.

    An empty dataset scores 0.0 with an empty (non-differentiable) tape.
    """
    if len(dataset) == 0:
        return 0.0, Tape(net)
    if dataset.labels.max() >= net.output_dim:
        raise ShapeError("a label exceeds the network's output dimension")
    tape = batch_tape(net, dataset.inputs)
    node = tape.append(SoftmaxCrossEntropy(tape, tape.output_index, dataset.labels))
    tape.mark_loss(node)
    return tape.loss_value, tape


def _joint_gradient(net, evaluation, acc_tape, weight):
    grads = GradientBundle.for_network(net)
    for tape in evaluation.tapes:
        grads.add_params(backward(tape, weight))
    if acc_tape.loss_index is not None:
        grads.add_params(backward(acc_tape, 1.0))
    return grads


def train(net, region_set, dataset, cfg, on_epoch=None):
    """Run the refinement-guided training loop.

    Returns ``(network, region_set, report)``.  The report's outcome is
    ``certified`` only if the summed worst-case distance is exactly zero
    and the accuracy loss is within ``cfg.eps_accuracy``.
    """
    region_set.check_against(net)
    if len(dataset) and dataset.inputs.shape[1] != net.input_dim:
        raise ShapeError("dataset feature width does not match the network")

    adam_state = AdamState.for_network(net) if cfg.optimizer == "adam" else None
    lr = cfg.lr
    best_joint = np.inf
    stalled = 0
    rows = []
    splits_before = region_set.split_count

    def snapshot(epoch, loss_correct, loss_accuracy, regions, started):
        stats = EpochStats(epoch, loss_correct, loss_accuracy, regions,
                           time.perf_counter() - started)
        rows.append(stats)
        if on_epoch is not None:
            on_epoch(stats)

    def finish(outcome, loss_correct, loss_accuracy):
        return net, region_set, TrainReport(
            epochs=tuple(rows),
            outcome=outcome,
            final_loss_correct=loss_correct,
            final_loss_accuracy=loss_accuracy,
            region_count=len(region_set.regions),
            split_count=region_set.split_count - splits_before,
            config=cfg,
        )

    for epoch in range(cfg.max_epochs):
        started = time.perf_counter()
        regions_at_eval = len(region_set.regions)
        evaluation = region_losses(net, region_set, cfg.workers)
        loss_accuracy, acc_tape = accuracy_loss(net, dataset)
        if not (np.isfinite(evaluation.total) and np.isfinite(loss_accuracy)):
            raise DivergenceError(
                f"non-finite loss at epoch {epoch}: correctness={evaluation.total}, "
                f"accuracy={loss_accuracy}; the weights have diverged")
        if evaluation.total == 0.0 and loss_accuracy <= cfg.eps_accuracy:
            snapshot(epoch, evaluation.total, loss_accuracy, regions_at_eval, started)
            return finish(CERTIFIED, evaluation.total, loss_accuracy)

        # Refinement changes what the summed loss measures, so the plateau
        # baseline only compares epochs evaluated on the same partition.
        joint = cfg.correctness_weight * evaluation.total + loss_accuracy
        if cfg.lr_decay is not None:
            if joint < best_joint:
                best_joint = joint
                stalled = 0
            else:
                stalled += 1
                if stalled > cfg.lr_decay.patience:
                    lr *= cfg.lr_decay.factor
                    stalled = 0

        grads = _joint_gradient(net, evaluation, acc_tape, cfg.correctness_weight)
        if cfg.optimizer == "adam":
            net, adam_state = adam_step(adam_state, net, grads, lr)
        else:
            net = sgd_step(net, grads, lr)
        if cfg.refine:
            refined = refine_topk(net, region_set, cfg.k, cfg.region_cap)
            if len(refined.regions) != len(region_set.regions):
                best_joint = np.inf
                stalled = 0
            region_set = refined
        snapshot(epoch, evaluation.total, loss_accuracy, regions_at_eval, started)

    started = time.perf_counter()
    evaluation = region_losses(net, region_set, cfg.workers)
    loss_accuracy, _ = accuracy_loss(net, dataset)
    snapshot(cfg.max_epochs, evaluation.total, loss_accuracy,
             len(region_set.regions), started)
    if evaluation.total == 0.0 and loss_accuracy <= cfg.eps_accuracy:
        return finish(CERTIFIED, evaluation.total, loss_accuracy)
    return finish(BUDGET_EXHAUSTED, evaluation.total, loss_accuracy)


@dataclass(frozen=True)
class CertifyResult:
    certified: bool
    splits_used: int
    max_loss: float
    region_set: RegionSet


def certify(net, region_set, budget, workers=1):
    """Branch-and-bound certification without weight updates.

    Repeatedly bisects the worst region; certified iff the summed
    worst-case distance reaches exactly zero within ``budget`` splits.
    """
    if budget < 0:
        raise ConfigError("budget must be nonnegative")
    region_set.check_against(net)
    splits_used = 0
    while True:
        evaluation = region_losses(net, region_set, workers)
        if evaluation.total == 0.0:
            return CertifyResult(True, splits_used, 0.0, region_set)
        worst = int(np.argmax(evaluation.losses))
        if splits_used >= budget:
            return CertifyResult(False, splits_used,
                                 float(evaluation.losses[worst]), region_set)
        target = region_set.regions[worst]
        result = RegionSet(region_set.origins, list(region_set.regions),
                           list(region_set.splits), region_set.next_id)
        added = []
        if not _split_region(result, target, net, added):
            # point box with positive loss: a concrete counterexample region
            return CertifyResult(False, splits_used,
                                 float(evaluation.losses[worst]), region_set)
        result.regions = [r for i, r in enumerate(region_set.regions) if i != worst] + added
        region_set = result
        splits_used += 1
