"""Goal-to-current object correspondence by descriptor distance.

Each goal object wants its L2-nearest current descriptor; when nearest
neighbors collide the assignment minimizing total matched distance wins
(which coincides with nearest-neighbor whenever that mapping is already a
bijection).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Correspondence:
    """pairs[k] = (goal_index, current_index); a bijection over 0..N-1."""

    pairs: tuple

    def __post_init__(self):
        goals = [g for g, _ in self.pairs]
        curs = [c for _, c in self.pairs]
        n = len(self.pairs)
        if sorted(goals) != list(range(n)) or sorted(curs) != list(range(n)):
            raise ValueError(f"correspondence is not a bijection: {self.pairs}")

    def current_for_goal(self, goal_index):
        for g, c in self.pairs:
            if g == goal_index:
                return c
        raise KeyError(goal_index)

    def goal_for_current(self, current_index):
        for g, c in self.pairs:
            if c == current_index:
                return g
        raise KeyError(current_index)


def match_objects(current_descriptors, goal_descriptors):
    """Minimum-total-L2 assignment of goal objects to current objects."""
    cur = np.asarray(current_descriptors, dtype=np.float64)
    goal = np.asarray(goal_descriptors, dtype=np.float64)
    if cur.ndim != 2 or goal.ndim != 2 or cur.shape != goal.shape:
        raise ValueError(
            f"expected equal-count descriptor matrices, got {cur.shape} and {goal.shape}")
    diff = goal[:, None, :] - cur[None, :, :]
    cost = np.sqrt((diff * diff).sum(axis=2))
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(sorted((int(g), int(c)) for g, c in zip(rows, cols)))
    return Correspondence(pairs=pairs)
