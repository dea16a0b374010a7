"""Training-bin construction and the per-generation sub-sampler.

Training data are partitioned into bins keyed on the value to predict; each
generation draws an equal number from every bin (capped at the bin size).
Draws cycle through a bin queue: the drawn group is reshuffled and requeued
at the tail, so an example used once cannot reappear for floor(bin/draw)
further generations and consecutive generations never share an example when
the bin is at least twice the draw.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .seqdata import LabelArrays


class ConfigError(ValueError):
    """The run configuration cannot be honoured by the data."""


class TaskKind(enum.Enum):
    E_VALUE = "evalue_regression"
    LENGTH = "length_regression"
    MATCH = "match_classify"
    REPEAT = "repeat_classify"

    @classmethod
    def parse(cls, text: str) -> "TaskKind":
        for kind in cls:
            if kind.value == text:
                return kind
        names = ", ".join(k.value for k in cls)
        raise ConfigError(f"unknown task {text!r}; expected one of: {names}")


REGRESSION_KINDS = (TaskKind.E_VALUE, TaskKind.LENGTH)


@dataclass(frozen=True)
class TaskSpec:
    """A prediction task: target extraction, bin plan and per-bin draw count."""

    kind: TaskKind
    draw: int

    @classmethod
    def for_kind(cls, kind: TaskKind | str, draw: int | None = None) -> "TaskSpec":
        if isinstance(kind, str):
            kind = TaskKind.parse(kind)
        default_draw = 35 if kind in REGRESSION_KINDS else 300
        return cls(kind, draw if draw is not None else default_draw)

    @property
    def is_regression(self) -> bool:
        return self.kind in REGRESSION_KINDS

    def targets(self, labels: LabelArrays) -> np.ndarray:
        if self.kind is TaskKind.E_VALUE:
            return labels.log10_e.astype(np.float64)
        if self.kind is TaskKind.LENGTH:
            return labels.best_len.astype(np.float64)
        if self.kind is TaskKind.MATCH:
            return labels.hq.copy()
        return labels.multi.copy()


@dataclass(frozen=True)
class Bin:
    name: str
    indices: np.ndarray

    @property
    def size(self) -> int:
        return int(self.indices.size)


def _length_bin(length: int) -> str:
    if length == 0:
        return "len_0"
    if length == 36:
        return "len_36"
    if 18 <= length <= 35:
        lo = 18 + 2 * ((length - 18) // 2)
        return f"len_{lo}_{lo + 1}"
    raise ConfigError(f"match length {length} falls outside the bin plan "
                      "(expected 0 or 18..36)")


def assign_bins(labels: LabelArrays, task: TaskSpec) -> list[Bin]:
    """Partition label indices into the task's bins.

    E-value bins are derived from the data (one per occupied integer part of
    log10(E), plus the no-match group); length bins follow the fixed plan
    {0}, {18-19}, ..., {34-35}, {36}; classification tasks use two bins.
    An empty required bin raises :class:`ConfigError` naming the bin.
    """
    n = labels.n
    if n == 0:
        raise ConfigError("no labels to bin")
    keys: list[str] = []
    if task.kind is TaskKind.E_VALUE:
        for i in range(n):
            if labels.best_len[i] == 0:
                keys.append("no_match")
            else:
                keys.append(f"e10_{math.floor(labels.log10_e[i])}")
    elif task.kind is TaskKind.LENGTH:
        keys = [_length_bin(int(v)) for v in labels.best_len]
    else:
        flags = labels.hq if task.kind is TaskKind.MATCH else labels.multi
        keys = ["positive" if f else "negative" for f in flags]

    grouped: dict[str, list[int]] = {}
    for i, k in enumerate(keys):
        grouped.setdefault(k, []).append(i)

    if task.kind is TaskKind.LENGTH:
        required = ["len_0"] + [f"len_{lo}_{lo + 1}" for lo in range(18, 35, 2)] + ["len_36"]
    elif task.kind in (TaskKind.MATCH, TaskKind.REPEAT):
        required = ["negative", "positive"]
    else:
        def _e_order(name: str):
            return (1, 0) if name == "no_match" else (0, int(name.split("_", 1)[1]))
        required = sorted(grouped, key=_e_order)
    missing = [name for name in required if name not in grouped]
    if missing:
        raise ConfigError(f"empty bin(s) {', '.join(missing)}: "
                          "the draw plan cannot be honoured")
    return [Bin(name, np.array(grouped[name], dtype=np.int64)) for name in required]


def sample_size(bins: list[Bin], draw: int) -> int:
    return sum(min(draw, b.size) for b in bins)


@dataclass
class BinnedSampler:
    """Per-bin cycling queues delivering each generation's training subset."""

    bins: list[Bin]
    draw: int
    rng: np.random.Generator
    _queues: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.bins:
            raise ConfigError("sampler needs at least one bin")
        if self.draw < 1:
            raise ConfigError("draw count must be positive")
        self._queues = [self.rng.permutation(b.indices) for b in self.bins]

    def next_sample(self) -> np.ndarray:
        """Indices for one generation: min(draw, bin size) from every bin."""
        parts = []
        for qi, queue in enumerate(self._queues):
            d = min(self.draw, queue.size)
            group = queue[:d]
            self._queues[qi] = np.concatenate([queue[d:], self.rng.permutation(group)])
            parts.append(group)
        return np.concatenate(parts)
