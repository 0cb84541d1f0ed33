"""Output predicates over network outputs and their violation distances.

A predicate is a boolean combination of linear inequalities ``a . y <= b``
under negation, conjunction, and disjunction.  Negation is pushed onto
atoms at construction time: ``not (a . y <= b)`` becomes the strict atom
``-a . y < -b``, so the stored AST only has And/Or above atoms.

Two distance functions score how far an output is from satisfying a
predicate, both zero exactly when the (closed) predicate holds:

* :func:`violation_distance` scores a concrete output vector;
* :func:`worst_case_distance` scores the worst output inside a box, and is
  recorded on the box's tape so it can be differentiated.

Atom distances are Euclidean point-to-halfspace distances,
``max(0, a . y - b) / ||a||``.  Conjunction takes the max of child
distances and disjunction the min; under a box the min-of-maxes is an
upper bound on the true worst case, which keeps the zero-distance
guarantee while staying compositional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .boxes import Box
from .errors import FileFormatError, ShapeError
from .tape import HingeScale, ReduceMax, ReduceMin, SupGap

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Atom:
    """``a . y <= b``, or ``a . y < b`` when ``strict`` (from negation)."""

    a: np.ndarray
    b: float
    strict: bool = False

    def __eq__(self, other):
        return (isinstance(other, Atom)
                and self.strict == other.strict
                and self.b == other.b
                and np.array_equal(self.a, other.a))

    def __hash__(self):
        return hash((self.a.tobytes(), self.b, self.strict))

    def __post_init__(self):
        coeffs = np.array(self.a, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ShapeError("atom coefficients must be a non-empty vector")
        if not np.isfinite(coeffs).all() or not np.isfinite(self.b):
            raise ShapeError("atom coefficients must be finite")
        if not coeffs.any():
            raise ShapeError("atom coefficients must not all be zero")
        coeffs.setflags(write=False)
        object.__setattr__(self, "a", coeffs)
        object.__setattr__(self, "b", float(self.b))

    @property
    def norm(self):
        return float(np.linalg.norm(self.a))


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise ShapeError("conjunction needs at least one child")
        object.__setattr__(self, "children", children)


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise ShapeError("disjunction needs at least one child")
        object.__setattr__(self, "children", children)


def negate(atom):
    """Negate an atom: the complement halfspace with flipped strictness."""
    if not isinstance(atom, Atom):
        raise ShapeError("negation is only defined directly above atoms")
    return Atom(-atom.a, -atom.b, strict=not atom.strict)


@dataclass(frozen=True)
class CorrectnessProperty:
    """An input box paired with an output predicate the network must meet
    for every input in the box."""

    input_box: Box
    output: object = field()

    def __post_init__(self):
        if not isinstance(self.output, (Atom, And, Or)):
            raise ShapeError("output predicate must be an Atom/And/Or tree")


def atoms_of(predicate):
    if isinstance(predicate, Atom):
        yield predicate
    else:
        for child in predicate.children:
            yield from atoms_of(child)


def predicate_dim(predicate):
    dims = {atom.a.shape[0] for atom in atoms_of(predicate)}
    if len(dims) != 1:
        raise ShapeError("atoms disagree on output dimension")
    return dims.pop()


def satisfies(y, predicate):
    """Boolean evaluation of the predicate at a single output vector."""
    return bool(satisfies_batch(np.asarray(y, dtype=float)[None, :], predicate)[0])


def satisfies_batch(outputs, predicate):
    """Vectorized evaluation over an (n, e) matrix of outputs."""
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    if isinstance(predicate, Atom):
        values = outputs @ predicate.a
        return values < predicate.b if predicate.strict else values <= predicate.b
    results = [satisfies_batch(outputs, child) for child in predicate.children]
    if isinstance(predicate, And):
        return np.logical_and.reduce(results)
    return np.logical_or.reduce(results)


def violation_distance(y, predicate, margin=0.0):
    """Distance from one output vector to the predicate's satisfying set."""
    return float(violation_distance_batch(np.asarray(y, dtype=float)[None, :],
                                          predicate, margin)[0])


def violation_distance_batch(outputs, predicate, margin=0.0):
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    if isinstance(predicate, Atom):
        threshold = predicate.b - (margin if predicate.strict else 0.0)
        gaps = outputs @ predicate.a - threshold
        return np.maximum(gaps, 0.0) / predicate.norm
    results = [violation_distance_batch(outputs, child, margin)
               for child in predicate.children]
    if isinstance(predicate, And):
        return np.maximum.reduce(results)
    return np.minimum.reduce(results)


def worst_case_distance(tape, predicate, margin=0.0):
    """Worst violation distance over the tape's output box, on the tape.

    The tape must come from ``forward_box``.  Appends the distance
    computation, marks the resulting scalar as the tape's loss, and
    returns its value.
    """
    if tape.output_index is None:
        raise ShapeError("tape has no recorded output box")
    node = _distance_node(tape, tape.output_index, predicate, margin)
    tape.mark_loss(node)
    return tape.loss_value


def _distance_node(tape, box_node, predicate, margin):
    if isinstance(predicate, Atom):
        threshold = predicate.b - (margin if predicate.strict else 0.0)
        gap = tape.append(SupGap(tape, box_node, predicate.a, threshold))
        return tape.append(HingeScale(tape, gap, 1.0 / predicate.norm))
    children = [_distance_node(tape, box_node, child, margin)
                for child in predicate.children]
    if isinstance(predicate, And):
        return tape.append(ReduceMax(tape, children))
    return tape.append(ReduceMin(tape, children))


def check_property_against(net, prop):
    """Raise if a property's dimensions do not match the network."""
    if prop.input_box.dim != net.input_dim:
        raise ShapeError(
            f"property input box has dim {prop.input_box.dim}, "
            f"network expects {net.input_dim}")
    out_dim = predicate_dim(prop.output)
    if out_dim != net.output_dim:
        raise ShapeError(
            f"property atoms are over {out_dim} outputs, network has {net.output_dim}")


# --- JSON property files -------------------------------------------------

def _predicate_to_json(predicate):
    if isinstance(predicate, Atom):
        node = {"op": "atom", "a": [float(v) for v in predicate.a], "b": predicate.b}
        if predicate.strict:
            node["strict"] = True
        return node
    op = "and" if isinstance(predicate, And) else "or"
    return {"op": op, "children": [_predicate_to_json(c) for c in predicate.children]}


def _predicate_from_json(node, path):
    if not isinstance(node, dict) or "op" not in node:
        raise FileFormatError(path, "predicate node must be an object with an 'op' field")
    op = node["op"]
    if op == "atom":
        try:
            return Atom(np.array(node["a"], dtype=float), float(node["b"]),
                        strict=bool(node.get("strict", False)))
        except (KeyError, TypeError, ValueError, ShapeError) as exc:
            raise FileFormatError(path, f"bad atom: {exc}") from None
    if op == "not":
        child = node.get("child")
        if not (isinstance(child, dict) and child.get("op") == "atom"):
            raise FileFormatError(path, "'not' may only wrap an atom")
        return negate(_predicate_from_json(child, path))
    if op in ("and", "or"):
        raw = node.get("children")
        if not isinstance(raw, list) or not raw:
            raise FileFormatError(path, f"'{op}' needs a non-empty children list")
        children = tuple(_predicate_from_json(c, path) for c in raw)
        return And(children) if op == "and" else Or(children)
    raise FileFormatError(path, f"unknown predicate op {op!r}")


def _property_from_json(node, path):
    try:
        box = Box(np.array(node["input"]["lower"], dtype=float),
                  np.array(node["input"]["upper"], dtype=float))
    except (KeyError, TypeError, ValueError, ShapeError) as exc:
        raise FileFormatError(path, f"bad input box: {exc}") from None
    return CorrectnessProperty(box, _predicate_from_json(node.get("output"), path))


def load_properties(path):
    """Read a versioned JSON property file; returns a list of properties."""
    with open(path) as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FileFormatError(path, f"invalid JSON at column {exc.colno}: {exc.msg}",
                                  line=exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("version") != FORMAT_VERSION:
        raise FileFormatError(path, f"expected an object with version {FORMAT_VERSION}")
    raw = doc.get("properties")
    if not isinstance(raw, list) or not raw:
        raise FileFormatError(path, "'properties' must be a non-empty list")
    return [_property_from_json(node, path) for node in raw]


def save_properties(props, path):
    doc = {
        "version": FORMAT_VERSION,
        "properties": [
            {
                "input": {
                    "lower": [float(v) for v in prop.input_box.lower],
                    "upper": [float(v) for v in prop.input_box.upper],
                },
                "output": _predicate_to_json(prop.output),
            }
            for prop in props
        ],
    }
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")
