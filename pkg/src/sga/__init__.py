"""Gradient-based structural attacks on graph node classifiers."""

from .attacks import (
    AttackConfig,
    Perturbation,
    budget_for,
    dice_attack,
    gradargmax_attack,
    random_attack,
    read_perturbations,
    run_strategy,
    sga_attack,
    structure_score,
    subgraph_gradient,
    targeted_loss,
    write_perturbations,
)
from .graph import (
    Graph,
    Split,
    apply_flips,
    bfs_within,
    flip_edge,
    generate_sbm,
    largest_connected_component,
    load_graph_bundle,
    random_split,
    row_normalize_features,
    save_graph_bundle,
)
from .harness import (
    AttackReport,
    ExperimentConfig,
    bench_attack,
    emit_report,
    evaluate_perturbations,
    load_report,
    run_experiment,
)
from .metrics import (
    AssortativityReport,
    DegreeMixing,
    UndefinedAssortativityError,
    assortativity,
    dac,
    degree_mixing,
)
from .models import (
    GcnModel,
    SurrogateModel,
    TrainConfig,
    classification_margin,
    load_model,
    normalized_propagate,
    predict,
    predict_full,
    predict_gcn,
    save_model,
    train_gcn,
    train_sgc,
    with_epsilon,
)
from .subgraph import (
    Subgraph,
    add_potential_edges,
    apply_flip_and_expand,
    extract_khop,
    predict_target,
)

__all__ = [
    "AssortativityReport",
    "AttackConfig",
    "AttackReport",
    "DegreeMixing",
    "ExperimentConfig",
    "GcnModel",
    "Graph",
    "Perturbation",
    "Split",
    "Subgraph",
    "SurrogateModel",
    "TrainConfig",
    "UndefinedAssortativityError",
    "add_potential_edges",
    "apply_flip_and_expand",
    "apply_flips",
    "assortativity",
    "bench_attack",
    "bfs_within",
    "budget_for",
    "classification_margin",
    "dac",
    "degree_mixing",
    "dice_attack",
    "emit_report",
    "evaluate_perturbations",
    "extract_khop",
    "flip_edge",
    "generate_sbm",
    "gradargmax_attack",
    "largest_connected_component",
    "load_graph_bundle",
    "load_model",
    "load_report",
    "normalized_propagate",
    "predict",
    "predict_full",
    "predict_gcn",
    "predict_target",
    "random_attack",
    "random_split",
    "read_perturbations",
    "row_normalize_features",
    "run_experiment",
    "run_strategy",
    "save_graph_bundle",
    "save_model",
    "sga_attack",
    "structure_score",
    "subgraph_gradient",
    "targeted_loss",
    "train_gcn",
    "train_sgc",
    "with_epsilon",
    "write_perturbations",
]

__version__ = "0.1.0"
