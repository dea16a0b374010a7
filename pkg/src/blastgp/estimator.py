"""Scikit-learn style front end: fit evolves a team, predict runs it.

``TeamRegressor`` targets the correlation tasks (log10 E value, match
length), ``TeamClassifier`` the sign-based ones (match exists, genome
repeats).  X is a list of DnaRecord or a ReadMatrix; y is the numeric target
(regression) or boolean class (classification).  Both estimators follow the
get_params/set_params contract, so clone and grid search compose.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .evolution import RunConfig, run_evolution
from .interpreter import eval_team_batch, prepare_reads
from .sampling import TaskKind
from .seqdata import LabelArrays, NO_MATCH_LOG10_E, ReadMatrix


def _as_matrix(X) -> ReadMatrix:
    if isinstance(X, ReadMatrix):
        return X
    return ReadMatrix.from_records(list(X))


def _labels_for_task(kind: TaskKind, y) -> LabelArrays:
    """Wrap a bare target vector in label arrays so the bin plans apply."""
    y = np.asarray(y)
    n = y.size
    if kind is TaskKind.E_VALUE:
        loge = y.astype(np.float64)
        sentinel = loge == NO_MATCH_LOG10_E
        blen = np.where(sentinel, 0, 36).astype(np.int32)
        return LabelArrays(loge, blen, loge < -5.0, np.zeros(n, dtype=bool))
    if kind is TaskKind.LENGTH:
        blen = y.astype(np.int32)
        loge = np.where(blen == 0, NO_MATCH_LOG10_E, 0.0)
        return LabelArrays(loge, blen, np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))
    flags = y.astype(bool)
    loge = np.where(flags, -6.0, 0.0)
    blen = np.full(n, 36, dtype=np.int32)
    if kind is TaskKind.MATCH:
        return LabelArrays(loge, blen, flags, np.zeros(n, dtype=bool))
    return LabelArrays(loge, blen, flags, flags)


class _TeamEstimator(BaseEstimator):
    """Shared fit/predict machinery; concrete classes pin the task family."""

    _REGRESSION: bool = True

    def _config(self) -> RunConfig:
        kind = TaskKind.parse(self.task)
        if self._REGRESSION and kind not in (TaskKind.E_VALUE, TaskKind.LENGTH):
            raise ValueError(f"{self.task!r} is not a regression task")
        if not self._REGRESSION and kind not in (TaskKind.MATCH, TaskKind.REPEAT):
            raise ValueError(f"{self.task!r} is not a classification task")
        return RunConfig(
            population_size=self.population_size,
            generations=self.generations,
            tournament_size=self.tournament_size,
            p_crossover=self.p_crossover,
            p_point=self.p_point,
            p_const_swap=self.p_const_swap,
            p_shrink=self.p_shrink,
            p_subtree=self.p_subtree,
            draw_per_bin=self.draw_per_bin,
            seed=self.seed,
            workers=self.workers,
            early_stop_fitness=self.early_stop_fitness,
            task=kind.value,
        )

    def fit(self, X, y):
        matrix = _as_matrix(X)
        labels = _labels_for_task(TaskKind.parse(self.task), np.asarray(y))
        if labels.n != matrix.n:
            raise ValueError("X and y differ in length")
        result = run_evolution(self._config(), prepare_reads(matrix), labels)
        self.best_individual_ = result.best_final
        self.constant_table_ = result.table
        self.history_ = result.history
        self.n_generations_ = len(result.history)
        if not self._REGRESSION:
            self.classes_ = np.array([False, True])
        return self

    def decision_function(self, X):
        if not hasattr(self, "best_individual_"):
            raise RuntimeError("estimator is not fitted")
        preds, _ = eval_team_batch(self.best_individual_, prepare_reads(_as_matrix(X)),
                                   self.constant_table_)
        return preds


class TeamRegressor(_TeamEstimator, RegressorMixin):
    """Evolves a team maximising Pearson correlation with the target."""

    _REGRESSION = True

    def __init__(self, task="evalue_regression", population_size=1000, generations=50,
                 tournament_size=4, p_crossover=0.50, p_point=0.225,
                 p_const_swap=0.225, p_shrink=0.025, p_subtree=0.025,
                 draw_per_bin=None, seed=0, workers=1, early_stop_fitness=None):
        self.task = task
        self.population_size = population_size
        self.generations = generations
        self.tournament_size = tournament_size
        self.p_crossover = p_crossover
        self.p_point = p_point
        self.p_const_swap = p_const_swap
        self.p_shrink = p_shrink
        self.p_subtree = p_subtree
        self.draw_per_bin = draw_per_bin
        self.seed = seed
        self.workers = workers
        self.early_stop_fitness = early_stop_fitness

    def predict(self, X):
        return self.decision_function(X)


class TeamClassifier(_TeamEstimator, ClassifierMixin):
    """Evolves a team classifying by the sign of its output."""

    _REGRESSION = False

    def __init__(self, task="match_classify", population_size=1000, generations=50,
                 tournament_size=4, p_crossover=0.50, p_point=0.225,
                 p_const_swap=0.225, p_shrink=0.025, p_subtree=0.025,
                 draw_per_bin=None, seed=0, workers=1, early_stop_fitness=None):
        self.task = task
        self.population_size = population_size
        self.generations = generations
        self.tournament_size = tournament_size
        self.p_crossover = p_crossover
        self.p_point = p_point
        self.p_const_swap = p_const_swap
        self.p_shrink = p_shrink
        self.p_subtree = p_subtree
        self.draw_per_bin = draw_per_bin
        self.seed = seed
        self.workers = workers
        self.early_stop_fitness = early_stop_fitness

    def predict(self, X):
        return self.decision_function(X) > 0.0
