"""Genetic-programming teams that predict alignment outcomes of short DNA reads.

A team is three prefix-encoded expression trees sharing a constant table:
two prepass trees scan the 36-base read and communicate through memory
cells, a result tree turns what they left behind into the prediction.
"""

from .estimator import TeamClassifier, TeamRegressor
from .evolution import RunConfig, run_evolution
from .fitness import fitness_of, pearson
from .interpreter import eval_individual, eval_team_batch, prepare_reads, throughput_bench
from .primitives import Op, Role
from .sampling import BinnedSampler, TaskKind, TaskSpec, assign_bins
from .seqdata import (BlastLabel, DnaRecord, HitSummary, QualityConfig, build_label,
                      iter_fastq, load_dataset, parse_hits, read_fastq, save_dataset,
                      write_fastq)
from .sexpr import from_sexpr, load_model, save_model, to_sexpr
from .stats import ValidationReport, validate
from .synth import OracleSpec, generate_synthetic
from .trees import ConstantTable, Individual, Tree, build_constant_table, random_tree

__version__ = "0.1.0"

__all__ = [
    "BinnedSampler", "BlastLabel", "ConstantTable", "DnaRecord", "HitSummary",
    "Individual", "Op", "OracleSpec", "QualityConfig", "Role", "RunConfig",
    "TaskKind", "TaskSpec", "TeamClassifier", "TeamRegressor", "Tree",
    "ValidationReport", "assign_bins", "build_constant_table", "build_label",
    "eval_individual", "eval_team_batch", "fitness_of", "from_sexpr",
    "generate_synthetic", "iter_fastq", "load_dataset", "load_model", "parse_hits",
    "pearson", "prepare_reads", "random_tree", "read_fastq", "run_evolution",
    "save_dataset", "save_model", "throughput_bench", "to_sexpr", "validate",
    "write_fastq", "__version__",
]
