"""Fitness scoring: correlation for regression tasks, correct counts for
classification, with the numerical-stability policy applied in one place.

Individuals that produce non-finite predictions are pushed to the fitness
floor (regression) or have those cases counted wrong (classification); a
correlation whose variance terms vanish is flagged degenerate rather than
raising, and the caller maps the flag to the floor.
"""
from __future__ import annotations

import math

import numpy as np

from .interpreter import PreparedReads, eval_team_batch
from .sampling import TaskSpec

DEGENERATE_FITNESS = -1.0


def pearson(xs, ys) -> float | None:
    """Product-moment correlation, or None when degenerate.

    Sums are anchored at the first element so near-constant vectors do not
    cancel catastrophically; variance terms are clamped at zero before the
    square root, and zero variance or any non-finite input yields None.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("pearson needs two equal-length vectors")
    n = xs.size
    if n < 2:
        raise ValueError("pearson needs at least two points")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        return None
    with np.errstate(over="ignore", invalid="ignore"):
        dx = xs - xs[0]
        dy = ys - ys[0]
        sx = float(dx.sum())
        sy = float(dy.sum())
        vx = float(dx @ dx) - sx * sx / n
        vy = float(dy @ dy) - sy * sy / n
        cov = float(dx @ dy) - sx * sy / n
    if not (math.isfinite(vx) and math.isfinite(vy) and math.isfinite(cov)):
        return None  # moment sums overflowed: unresolved numerical problem
    vx = max(0.0, vx)
    vy = max(0.0, vy)
    if vx <= 0.0 or vy <= 0.0:
        return None
    r = cov / (math.sqrt(vx) * math.sqrt(vy))
    if not math.isfinite(r):
        return None
    return min(1.0, max(-1.0, r))


def regression_fitness(preds, targets) -> float:
    r = pearson(preds, targets)
    return DEGENERATE_FITNESS if r is None else r


def classification_fitness(preds, positives) -> float:
    """Number of correctly classified cases; prediction > 0 means positive.

    A non-finite prediction counts wrong whatever the class.
    """
    preds = np.asarray(preds, dtype=np.float64)
    pos = np.asarray(positives, dtype=bool)
    if preds.shape != pos.shape:
        raise ValueError("predictions and classes differ in length")
    finite = np.isfinite(preds)
    return float((finite & ((preds > 0.0) == pos)).sum())


def score(task: TaskSpec, preds, targets) -> float:
    if task.is_regression:
        return regression_fitness(preds, targets)
    return classification_fitness(preds, targets)


def fitness_of(individual, reads: PreparedReads, targets, task: TaskSpec, table) -> float:
    """Fitness of one team over an already-prepared read slice."""
    preds, _ = eval_team_batch(individual, reads, table)
    return score(task, preds, targets)
