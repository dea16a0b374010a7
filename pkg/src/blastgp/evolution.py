"""Generational panmictic evolution of three-tree teams.

The loop each generation: draw a fresh training subset, evaluate everyone on
it, record the best team (re-scored on the full training set), then breed a
complete replacement population by tournament selection plus the operator
mix.  All random draws for breeding come from one sequential stream, so the
history is identical whatever the evaluation parallelism; evaluation itself
is read-only over the population and fans out across worker threads (the
kernels release the GIL).
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .fitness import score
from .interpreter import PreparedReads, eval_team_batch
from .primitives import Catalog, Op, Role, arity, make_catalog
from .sampling import BinnedSampler, ConfigError, TaskSpec, assign_bins
from .trees import (ConstantTable, Individual, MAX_TREE_NODES, Tree,
                    build_constant_table, random_tree)

OPERATOR_NAMES = ("crossover", "point", "const_swap", "shrink", "subtree")


@dataclass
class RunConfig:
    """Evolution parameters; defaults follow the published configuration."""

    population_size: int = 10000
    generations: int = 100
    tournament_size: int = 4
    p_crossover: float = 0.50
    p_point: float = 0.225
    p_const_swap: float = 0.225
    p_shrink: float = 0.025
    p_subtree: float = 0.025
    max_tree_nodes: int = MAX_TREE_NODES
    init_depth_min: int = 2
    init_depth_max: int = 6
    subtree_depth: int = 4
    seed: int = 0
    task: str = "evalue_regression"
    draw_per_bin: int | None = None
    workers: int = 1
    mem_in_result: bool = True
    early_stop_fitness: float | None = None

    def operator_probs(self) -> tuple[float, ...]:
        return (self.p_crossover, self.p_point, self.p_const_swap,
                self.p_shrink, self.p_subtree)

    def validate(self) -> None:
        if abs(sum(self.operator_probs()) - 1.0) > 1e-9:
            raise ConfigError("operator probabilities must sum to 1")
        if min(self.operator_probs()) < 0:
            raise ConfigError("operator probabilities must be non-negative")
        for name in ("population_size", "generations", "tournament_size",
                     "max_tree_nodes", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not (2 <= self.init_depth_min <= self.init_depth_max <= 6):
            raise ConfigError("init depths must satisfy 2 <= min <= max <= 6")


_CONFIG_TYPES = {
    "population_size": int, "generations": int, "tournament_size": int,
    "p_crossover": float, "p_point": float, "p_const_swap": float,
    "p_shrink": float, "p_subtree": float, "max_tree_nodes": int,
    "init_depth_min": int, "init_depth_max": int, "subtree_depth": int,
    "seed": int, "task": str, "draw_per_bin": int, "workers": int,
    "mem_in_result": lambda v: v.lower() in ("1", "true", "yes"),
    "early_stop_fitness": float,
}


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read a flat key=value file into a RunConfig (unknown keys rejected)."""
    cfg = base or RunConfig()
    updates = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            updates[key] = _CONFIG_TYPES[key](value)
    return dc_replace(cfg, **updates)


def init_population(cfg: RunConfig, table: ConstantTable, rng: np.random.Generator,
                    catalog: Catalog) -> list[Individual]:
    """Ramped half-and-half initialisation, each tree drawn independently."""
    depths = np.arange(cfg.init_depth_min, cfg.init_depth_max + 1)
    pop = []
    for _ in range(cfg.population_size):
        trees = []
        for role in (Role.PREPASS0, Role.PREPASS1, Role.RESULT):
            depth = int(depths[rng.integers(0, depths.size)])
            method = "full" if rng.integers(0, 2) == 0 else "grow"
            trees.append(random_tree(role, method, depth, rng, len(table), catalog))
        pop.append(Individual(*trees))
    return pop


def tournament_select(fitnesses, sizes, k: int, rng: np.random.Generator) -> int:
    """Index of the tournament winner: best fitness, ties to the smallest team,
    remaining ties to the earliest draw."""
    n = len(fitnesses)
    best = int(rng.integers(0, n))
    for _ in range(k - 1):
        c = int(rng.integers(0, n))
        if fitnesses[c] > fitnesses[best] or (
                fitnesses[c] == fitnesses[best] and sizes[c] < sizes[best]):
            best = c
    return best


def _pick_role(rng) -> Role:
    return (Role.PREPASS0, Role.PREPASS1, Role.RESULT)[rng.integers(0, 3)]


def _splice(tree: Tree, start: int, end: int, code_piece, cidx_piece) -> Tree:
    code = np.concatenate([tree.code[:start], code_piece, tree.code[end:]])
    cidx = np.concatenate([tree.cidx[:start], cidx_piece, tree.cidx[end:]])
    return Tree(code, cidx, tree.role)


def subtree_crossover(mum: Individual, dad: Individual, rng, cfg: RunConfig) -> Individual:
    """Swap a random same-role subtree from dad into mum; oversize -> copy mum."""
    role = _pick_role(rng)
    mt, dt = mum.tree(role), dad.tree(role)
    i = int(rng.integers(0, mt.size))
    j = int(rng.integers(0, dt.size))
    je = int(dt.ends[j])
    child = _splice(mt, i, int(mt.ends[i]), dt.code[j:je], dt.cidx[j:je])
    if child.size > cfg.max_tree_nodes:
        return mum
    return mum.replace(role, child)


def point_mutation(parent: Individual, rng, cfg: RunConfig, table, catalog) -> Individual:
    """Replace one node with a role-legal primitive of the same arity."""
    role = _pick_role(rng)
    t = parent.tree(role)
    i = int(rng.integers(0, t.size))
    choices = catalog.same_arity_choices(int(t.code[i]), role)
    op = int(choices[rng.integers(0, len(choices))])
    code = t.code.copy()
    cidx = t.cidx.copy()
    code[i] = op
    cidx[i] = int(rng.integers(0, len(table))) if op == Op.CONST else -1
    return parent.replace(role, Tree(code, cidx, role))


def const_swap_mutation(parent: Individual, rng, cfg: RunConfig, table) -> Individual:
    """Re-point one constant leaf at a fresh table index (structure unchanged)."""
    role = _pick_role(rng)
    t = parent.tree(role)
    spots = np.flatnonzero(t.code == Op.CONST)
    if spots.size == 0:
        return parent
    i = int(spots[rng.integers(0, spots.size)])
    cidx = t.cidx.copy()
    cidx[i] = int(rng.integers(0, len(table)))
    return parent.replace(role, Tree(t.code.copy(), cidx, role))


def shrink_mutation(parent: Individual, rng, cfg: RunConfig) -> Individual:
    """Replace one function node's subtree with one of its argument subtrees."""
    role = _pick_role(rng)
    t = parent.tree(role)
    fns = np.flatnonzero(np.array([arity(op) for op in t.code]) > 0)
    if fns.size == 0:
        return parent
    i = int(fns[rng.integers(0, fns.size)])
    k = arity(int(t.code[i]))
    pick = int(rng.integers(0, k))
    s = i + 1
    for _ in range(pick):
        s = int(t.ends[s])
    e = int(t.ends[s])
    return parent.replace(role, _splice(t, i, int(t.ends[i]), t.code[s:e], t.cidx[s:e]))


def subtree_mutation(parent: Individual, rng, cfg: RunConfig, table, catalog) -> Individual:
    """Replace a random subtree with a fresh grow tree; oversize -> copy parent."""
    role = _pick_role(rng)
    t = parent.tree(role)
    i = int(rng.integers(0, t.size))
    fresh = random_tree(role, "grow", cfg.subtree_depth, rng, len(table), catalog)
    child = _splice(t, i, int(t.ends[i]), fresh.code, fresh.cidx)
    if child.size > cfg.max_tree_nodes:
        return parent
    return parent.replace(role, child)


def pick_operator(probs, rng) -> int:
    """Index into OPERATOR_NAMES drawn by the configured mix."""
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def breed(population, fitnesses, sizes, cfg: RunConfig, rng, table, catalog):
    """One full replacement generation (no elitism)."""
    probs = cfg.operator_probs()
    out = []
    k = cfg.tournament_size
    for _ in range(cfg.population_size):
        op = pick_operator(probs, rng)
        mum = population[tournament_select(fitnesses, sizes, k, rng)]
        if op == 0:
            dad = population[tournament_select(fitnesses, sizes, k, rng)]
            out.append(subtree_crossover(mum, dad, rng, cfg))
        elif op == 1:
            out.append(point_mutation(mum, rng, cfg, table, catalog))
        elif op == 2:
            out.append(const_swap_mutation(mum, rng, cfg, table))
        elif op == 3:
            out.append(shrink_mutation(mum, rng, cfg))
        else:
            out.append(subtree_mutation(mum, rng, cfg, table, catalog))
    return out


@dataclass
class GenerationRecord:
    generation: int
    sample_fitness: float
    train_fitness: float
    best_sizes: tuple[int, int, int]
    sample_digest: str

    @property
    def best_total(self) -> int:
        return sum(self.best_sizes)


@dataclass
class RunResult:
    history: list[GenerationRecord]
    best_gen10: Individual | None
    best_final: Individual
    table: ConstantTable
    sample_log: list[np.ndarray] = field(default_factory=list)

    def history_tsv(self) -> str:
        rows = ["generation\tsample_fitness\ttrain_fitness\tbest_nodes\tbest_tree_nodes\tsample_digest"]
        for rec in self.history:
            sizes = ",".join(str(s) for s in rec.best_sizes)
            rows.append(f"{rec.generation}\t{rec.sample_fitness!r}\t{rec.train_fitness!r}"
                        f"\t{rec.best_total}\t{sizes}\t{rec.sample_digest}")
        return "\n".join(rows) + "\n"

    def samples_tsv(self) -> str:
        rows = ["generation\tindices"]
        for gen, idx in enumerate(self.sample_log, start=1):
            rows.append(f"{gen}\t{','.join(str(i) for i in idx)}")
        return "\n".join(rows) + "\n"


def _digest(indices: np.ndarray) -> str:
    return hashlib.sha256(indices.astype(np.int64).tobytes()).hexdigest()[:12]


def _evaluate_all(population, reads: PreparedReads, targets, task, table, workers):
    def one(ind):
        preds, _ = eval_team_batch(ind, reads, table)
        return score(task, preds, targets)

    if workers <= 1:
        return [one(ind) for ind in population]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, population, chunksize=64))


def _best_index(fitnesses, sizes) -> int:
    best = 0
    for i in range(1, len(fitnesses)):
        if fitnesses[i] > fitnesses[best] or (
                fitnesses[i] == fitnesses[best] and sizes[i] < sizes[best]):
            best = i
    return best


def run_evolution(cfg: RunConfig, reads: PreparedReads, labels, *, log=None) -> RunResult:
    """Run the full loop; snapshots are kept at generation 10 and the end.

    ``labels`` is a LabelArrays; configuration problems (empty bins, bad
    operator mix) surface before generation 1.  With ``early_stop_fitness``
    set, the run ends once the best-of-generation team reaches that fitness
    on the full training set (best-so-far is monotone, so this cannot lower
    the reported maximum).
    """
    cfg.validate()
    task = TaskSpec.for_kind(cfg.task, cfg.draw_per_bin)
    catalog = make_catalog(cfg.mem_in_result)
    bins = assign_bins(labels, task)
    targets_full = task.targets(labels)

    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    init_rng, sample_rng, breed_rng = (np.random.default_rng(s) for s in seeds)
    table = build_constant_table(init_rng)
    population = init_population(cfg, table, init_rng, catalog)
    sampler = BinnedSampler(bins, task.draw, sample_rng)

    history: list[GenerationRecord] = []
    sample_log: list[np.ndarray] = []
    best_gen10 = None
    best_final = population[0]
    for gen in range(1, cfg.generations + 1):
        sample = sampler.next_sample()
        sample_log.append(sample)
        sample_reads = reads.subset(sample)
        sample_targets = targets_full[sample]
        fitnesses = _evaluate_all(population, sample_reads, sample_targets,
                                  task, table, cfg.workers)
        sizes = [ind.total_nodes for ind in population]
        b = _best_index(fitnesses, sizes)
        best = population[b]
        best_preds, _ = eval_team_batch(best, reads, table)
        train_fitness = score(task, best_preds, targets_full)
        history.append(GenerationRecord(gen, float(fitnesses[b]), float(train_fitness),
                                        best.tree_sizes(), _digest(sample)))
        if log is not None:
            log(history[-1])
        best_final = best
        if gen == 10:
            best_gen10 = best
        if cfg.early_stop_fitness is not None and train_fitness >= cfg.early_stop_fitness:
            break
        if gen < cfg.generations:
            population = breed(population, fitnesses, sizes, cfg, breed_rng, table, catalog)
    return RunResult(history, best_gen10, best_final, table, sample_log)
