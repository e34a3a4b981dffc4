"""Interpolated n-gram language models with LP-based weight selection."""

from ngramlp.corpus import Corpus, FoldPlan, Sentence, make_folds, read_corpus, split, tokenize
from ngramlp.ngram import NgramModel, ProbabilityMatrix, Vocabulary, mle_prob, probability_matrix, train
from ngramlp.mixture import PerplexityValue, WeightVector, mixture_prob, perplexity, two_param_weights
from ngramlp.grid import GridConfig, SearchResult, grid_search, random_search
from ngramlp.simplex import LinearProgram, SimplexSolution, solve
from ngramlp.optimize import (
    OptimizationResult,
    approximation_surface,
    build_model8_full,
    build_model8_reduced,
    optimize_exact,
    optimize_lp,
)
from ngramlp.experiment import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    generate_synthetic_corpus,
    run_experiment,
)

__all__ = [
    "Corpus", "FoldPlan", "Sentence", "make_folds", "read_corpus", "split", "tokenize",
    "NgramModel", "ProbabilityMatrix", "Vocabulary", "mle_prob", "probability_matrix", "train",
    "PerplexityValue", "WeightVector", "mixture_prob", "perplexity", "two_param_weights",
    "GridConfig", "SearchResult", "grid_search", "random_search",
    "LinearProgram", "SimplexSolution", "solve",
    "OptimizationResult", "approximation_surface", "build_model8_full", "build_model8_reduced",
    "optimize_exact", "optimize_lp",
    "ExperimentConfig", "ExperimentReport", "emit_report", "generate_synthetic_corpus", "run_experiment",
]

__version__ = "0.1.0"
