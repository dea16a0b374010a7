"""Validation of saved teams on held-out reads and the reported statistics.

Regression reports the correlation with its large-sample standard error
(1 - r^2)/sqrt(n - 1); classification reports accuracy, the confusion
matrix, recall of the minority class and a 1-dof chi-squared of the
correct/incorrect split against the 50% chance line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fitness import pearson
from .interpreter import PreparedReads, eval_team_batch
from .sampling import TaskSpec


@dataclass
class ValidationReport:
    kind: str
    n: int
    # regression
    r: float | None = None
    r_se: float | None = None
    degenerate: bool = False
    # classification
    accuracy: float | None = None
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    minority_recall: float | None = None
    chi2: float | None = None

    def to_text(self) -> str:
        lines = [f"task               {self.kind}", f"n                  {self.n}"]
        if self.r is not None or self.degenerate:
            if self.degenerate:
                lines.append("correlation        degenerate (constant predictions)")
            else:
                lines.append(f"correlation r      {self.r:.6f}")
                lines.append(f"standard error     {self.r_se:.6f}")
        if self.accuracy is not None:
            lines += [
                f"accuracy           {self.accuracy:.4f}",
                f"confusion tp/fp    {self.tp}/{self.fp}",
                f"confusion tn/fn    {self.tn}/{self.fn}",
                f"minority recall    {self.minority_recall:.4f}",
                f"chi2 vs chance     {self.chi2:.2f} (1 dof)",
            ]
        return "\n".join(lines)

    def to_tsv_row(self, scan: str = "all") -> str:
        def fmt(v):
            return "" if v is None else repr(v)
        cells = [scan, self.kind, str(self.n), fmt(self.r), fmt(self.r_se),
                 str(int(self.degenerate)), fmt(self.accuracy),
                 str(self.tp), str(self.fp), str(self.tn), str(self.fn),
                 fmt(self.minority_recall), fmt(self.chi2)]
        return "\t".join(cells)


TSV_HEADER = ("scan\ttask\tn\tr\tr_se\tdegenerate\taccuracy\ttp\tfp\ttn\tfn"
              "\tminority_recall\tchi2")


def validate_predictions(preds: np.ndarray, targets: np.ndarray, task: TaskSpec) -> ValidationReport:
    n = int(np.asarray(preds).size)
    if n < 2:
        raise ValueError("validation needs at least two cases")
    if task.is_regression:
        r = pearson(preds, targets)
        if r is None:
            return ValidationReport(task.kind.value, n, degenerate=True)
        se = (1.0 - r * r) / math.sqrt(n - 1)
        return ValidationReport(task.kind.value, n, r=r, r_se=se)

    pos = np.asarray(targets, dtype=bool)
    preds = np.asarray(preds, dtype=np.float64)
    decided_pos = np.isfinite(preds) & (preds > 0.0)
    tp = int((decided_pos & pos).sum())
    fp = int((decided_pos & ~pos).sum())
    tn = int((~decided_pos & ~pos).sum())
    fn = int((~decided_pos & pos).sum())
    correct = tp + tn
    accuracy = correct / n
    minority_is_positive = pos.sum() <= (~pos).sum()
    if minority_is_positive:
        m_total, m_correct = tp + fn, tp
    else:
        m_total, m_correct = tn + fp, tn
    recall = m_correct / m_total if m_total else 0.0
    chi2 = (2.0 * correct - n) ** 2 / n  # observed (correct, wrong) vs (n/2, n/2)
    return ValidationReport(task.kind.value, n, accuracy=accuracy,
                            tp=tp, fp=fp, tn=tn, fn=fn,
                            minority_recall=recall, chi2=chi2)


def validate(individual, reads: PreparedReads, labels, task: TaskSpec, table) -> ValidationReport:
    """Score a team on uniformly drawn (unbinned) validation data."""
    preds, _ = eval_team_batch(individual, reads, table)
    return validate_predictions(preds, task.targets(labels), task)


def scan_id(read_id: str) -> str:
    """Scan identifier: the read id up to the first dot."""
    return read_id.split(".", 1)[0]


def scan_breakdown(individual, reads: PreparedReads, labels, task: TaskSpec, table,
                   ids: list[str]) -> list[tuple[str, ValidationReport]]:
    """Per-scan reports when the ids carry at least two scan groups."""
    preds, _ = eval_team_batch(individual, reads, table)
    targets = task.targets(labels)
    groups: dict[str, list[int]] = {}
    for i, rid in enumerate(ids):
        groups.setdefault(scan_id(rid), []).append(i)
    if len(groups) < 2:
        return []
    out = []
    for name in sorted(groups):
        idx = np.array(groups[name])
        if idx.size < 2:
            continue
        out.append((name, validate_predictions(preds[idx], targets[idx], task)))
    return out
