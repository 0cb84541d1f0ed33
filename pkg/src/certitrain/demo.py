"""Built-in example: a tiny radar-advisory network and its safety property.

The network maps an object's relative speed ``v`` (positive means
approaching) and angular position ``theta`` to scores for the actions
"report" and "ignore".  The property says every object in the front view
that is stationary or approaching must be reported: for ``v in [0, 5]``
and ``theta in [0.5, 2.5]`` the report score must beat the ignore score.

The initial weights violate the property (for example at ``v=4,
theta=1``), which makes this a good end-to-end exercise for the trainer.
"""

from __future__ import annotations

import numpy as np

from .boxes import Box
from .network import LayerSpec, Network
from .properties import And, Atom, CorrectnessProperty, negate


def monitor_network():
    return Network((
        LayerSpec(np.array([[1.0, 0.5], [1.0, -1.0]]), np.zeros(2), apply_relu=True),
        LayerSpec(np.array([[1.0, -1.0], [0.5, 1.0]]), np.zeros(2), apply_relu=False),
    ))


def monitor_box():
    return Box(np.array([0.0, 0.5]), np.array([5.0, 2.5]))


def report_beats_ignore():
    """Predicate: score_report > score_ignore, i.e. not(y1 - y2 <= 0)."""
    return negate(Atom(np.array([1.0, -1.0]), 0.0))


def monitor_property():
    return CorrectnessProperty(monitor_box(), report_beats_ignore())


def impossible_property():
    """The same box with an unsatisfiable predicate, for failure demos."""
    atom = Atom(np.array([1.0, -1.0]), 0.0)
    return CorrectnessProperty(monitor_box(), And((atom, negate(atom))))
