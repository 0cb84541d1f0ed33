"""Partitions of property input boxes and their refinement.

A :class:`RegionSet` tracks, for each correctness property, the sub-boxes
that currently tile its input box.  Every region keeps the property's
output predicate verbatim, so proving all regions proves the property.

Refinement replaces the worst-scoring regions by their two halves along
the dimension with the largest ``|bound gradient| * width`` score, and
logs every split so the tiling can be reconstructed and audited exactly
(all splits happen at midpoints, so reassembly is exact in floats).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boxes import Box, bisect, box_tape
from .errors import RefinementError, ShapeError
from .properties import CorrectnessProperty, check_property_against, worst_case_distance
from .tape import backward


@dataclass
class Region:
    """One sub-box of a property's input, with cached evaluation results.

    ``revision`` records the network revision the cache was computed at;
    a mismatch means the cache is stale.
    """

    id: int
    parent_id: int | None
    origin: int
    box: Box
    predicate: object
    loss: float | None = None
    tape: object | None = None
    grad_lower: np.ndarray | None = None
    grad_upper: np.ndarray | None = None
    revision: int | None = None


@dataclass(frozen=True)
class SplitRecord:
    """One child created by a split; two records share a parent."""

    region_id: int
    parent_id: int
    dim: int
    midpoint: float


@dataclass
class RegionSet:
    origins: tuple[CorrectnessProperty, ...]
    regions: list[Region]
    splits: list[SplitRecord] = field(default_factory=list)
    next_id: int = 0

    @classmethod
    def from_properties(cls, props):
        props = tuple(props)
        if not props:
            return cls(props, [], [], 0)
        regions = [
            Region(id=index, parent_id=None, origin=index,
                   box=prop.input_box, predicate=prop.output)
            for index, prop in enumerate(props)
        ]
        return cls(props, regions, [], len(props))

    def check_against(self, net):
        for prop in self.origins:
            check_property_against(net, prop)

    @property
    def split_count(self):
        return len(self.splits) // 2


@dataclass(frozen=True)
class RegionEvaluation:
    losses: tuple[float, ...]
    total: float
    tapes: tuple


def _evaluate(region, net):
    tape = box_tape(net, region.box)
    loss = worst_case_distance(tape, region.predicate)
    region.loss = loss
    region.tape = tape
    region.grad_lower = None
    region.grad_upper = None
    region.revision = net.revision
    return region


def region_losses(net, region_set, workers=1):
    """Worst-case distance per region plus their sum, reusing caches that
    match the network's revision."""
    stale = [r for r in region_set.regions if r.revision != net.revision or r.tape is None]
    if stale:
        if workers > 1 and len(stale) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda r: _evaluate(r, net), stale))
        else:
            for region in stale:
                _evaluate(region, net)
    losses = tuple(region.loss for region in region_set.regions)
    total = 0.0
    for loss in losses:
        total += loss
    return RegionEvaluation(losses, total, tuple(r.tape for r in region_set.regions))


def score_dimensions(region, net):
    """Per-dimension split scores: (|d loss/d lower| + |d loss/d upper|)
    times the width; zero-width dimensions score -inf."""
    if region.revision != net.revision or region.tape is None:
        _evaluate(region, net)
    if region.grad_lower is None:
        bundle = backward(region.tape, 1.0)
        region.grad_lower = bundle.d_input_lower
        region.grad_upper = bundle.d_input_upper
    widths = region.box.widths
    scores = (np.abs(region.grad_lower) + np.abs(region.grad_upper)) * widths
    return np.where(widths > 0.0, scores, -np.inf)


def _split_region(region_set, region, net, regions_out):
    """Bisect one region along its best dimension; returns False if the
    region is a point box and cannot be split."""
    scores = score_dimensions(region, net)
    if not np.isfinite(scores).any():
        return False
    dim = int(np.argmax(scores))
    left_box, right_box = bisect(region.box, dim)
    midpoint = float(left_box.upper[dim])
    children = []
    for child_box in (left_box, right_box):
        child = Region(id=region_set.next_id, parent_id=region.id, origin=region.origin,
                       box=child_box, predicate=region.predicate)
        region_set.next_id += 1
        _evaluate(child, net)
        if child.loss > region.loss:
            raise RefinementError(
                f"child loss {child.loss} exceeds parent loss {region.loss}")
        region_set.splits.append(SplitRecord(child.id, region.id, dim, midpoint))
        children.append(child)
    regions_out.extend(children)
    return True


def refine_topk(net, region_set, k, cap):
    """Replace up to ``k`` of the worst positive-loss regions by their two
    bisection halves.  No-op when the region count has reached ``cap``.

    Caches stale against ``net`` are recomputed first, so both the top-k
    choice and the split dimensions reflect the current weights.
    """
    if k <= 0:
        raise ShapeError("k must be positive")
    if cap <= 0:
        raise ShapeError("region cap must be positive")
    if len(region_set.regions) >= cap:
        return region_set
    region_losses(net, region_set)
    order = sorted(range(len(region_set.regions)),
                   key=lambda i: (-region_set.regions[i].loss, i))

    result = RegionSet(region_set.origins, list(region_set.regions),
                       list(region_set.splits), region_set.next_id)
    kept = set(range(len(region_set.regions)))
    added = []
    split_count = 0
    for index in order:
        if split_count >= k or len(kept) + len(added) >= cap:
            break
        region = region_set.regions[index]
        if region.loss <= 0.0:
            break
        if _split_region(result, region, net, added):
            kept.discard(index)
            split_count += 1
    result.regions = [region_set.regions[i] for i in sorted(kept)] + added
    return result


def verify_cover(region_set):
    """Exactly reassemble every origin box from the leaf regions by
    undoing the split log; raises :class:`RefinementError` on any gap."""
    boxes = {region.id: (region.box, region.origin) for region in region_set.regions}
    for position in range(len(region_set.splits) - 2, -1, -2):
        left_rec = region_set.splits[position]
        right_rec = region_set.splits[position + 1]
        if left_rec.parent_id != right_rec.parent_id:
            raise RefinementError("split log children are not paired")
        if left_rec.region_id not in boxes or right_rec.region_id not in boxes:
            raise RefinementError("split log references a missing region")
        (left, origin) = boxes.pop(left_rec.region_id)
        (right, origin_r) = boxes.pop(right_rec.region_id)
        if origin != origin_r:
            raise RefinementError("siblings disagree on their origin property")
        dim = left_rec.dim
        if left.upper[dim] != right.lower[dim] or left.upper[dim] != left_rec.midpoint:
            raise RefinementError("siblings do not meet at the logged midpoint")
        others = [d for d in range(left.dim) if d != dim]
        for d in others:
            if left.lower[d] != right.lower[d] or left.upper[d] != right.upper[d]:
                raise RefinementError("siblings differ off the split dimension")
        merged = Box(left.lower, right.upper)
        boxes[left_rec.parent_id] = (merged, origin)
    remaining = {}
    for box, origin in boxes.values():
        if origin in remaining:
            raise RefinementError("origin reassembled into more than one box")
        remaining[origin] = box
    for index, prop in enumerate(region_set.origins):
        box = remaining.get(index)
        if box is None:
            raise RefinementError(f"origin {index} has no reassembled box")
        if not (np.array_equal(box.lower, prop.input_box.lower)
                and np.array_equal(box.upper, prop.input_box.upper)):
            raise RefinementError(f"origin {index} reassembles to a different box")
    return True


SPLIT_LOG_HEADER = "# split-log 1"


def write_split_log(region_set, path):
    """One line per created child region: id, parent id, dim, midpoint."""
    lines = [SPLIT_LOG_HEADER, "region_id,parent_id,dim,midpoint"]
    for record in region_set.splits:
        lines.append(f"{record.region_id},{record.parent_id},{record.dim},"
                     f"{record.midpoint!r}")
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
