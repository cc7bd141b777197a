"""Submodular maximization with ground-set sparsification."""

__version__ = "0.1.0"

from ._parallel import get_threads, set_threads
from .errors import InputError, InvariantError, SubmodularityError
from .objectives import (
    FacilityLocationObjective,
    FeatureMatrix,
    FeatureSqrtObjective,
    GainContext,
    Objective,
    SimilarityMatrix,
    ctx_commit,
    ctx_gain,
    evaluate,
    make_explicit_objective,
    marginal_gain,
    open_gain_context,
)
from .maximizers import (
    SieveConfig,
    Solution,
    brute_force_max,
    double_greedy,
    greedy,
    lazy_greedy,
    sieve_streaming,
)
from .graph import (
    GlobalGains,
    GraphWeights,
    SparsificationInstance,
    compute_global_gains,
    conditional_edge_weight,
    divergence,
    divergence_all,
    edge_weight,
    exact_sparsifier_optimum,
    h_value,
)
from .sparsifier import (
    PruneTrace,
    SparsifierConfig,
    importance_sample,
    post_reduce,
    pre_prune,
    sparsify,
)
from .data import (
    Corpus,
    SynthConfig,
    generate_synthetic,
    ingest_corpus,
    load_feature_matrix,
    save_feature_matrix,
    tfidf_featurize,
)
from .evaluation import BenchmarkReport, relative_utility, rouge2, run_benchmark

__all__ = [name for name in dir() if not name.startswith("_")]
