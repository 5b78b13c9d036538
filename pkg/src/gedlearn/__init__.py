"""Graph edit distance with learnable costs: exact solvers, a differentiable
soft-matching approximation, training loops, and interpretability exports."""

__version__ = "0.1.0"

from .graphs import (EPSILON_LABEL, Graph, GraphFormatError, PaddedPair, make_graph,
                     pad_pair, parse_graphs, random_edit, serialize_graphs, synth_random)
from .exact import (COST_CONFIGS, EditCostConfig, brute_force_ged, cost_config, exact_ged,
                    gen_pair_labels, ged_lower_bound, read_labels_csv, write_labels_csv)
from .autodiff import Adam, Tensor, backward, grad_check
from .assignment import (GSParams, eval_gs, gumbel_sinkhorn, hungarian, init_gs_params,
                         pretrain_gs, sinkhorn)
from .encoder import encode, init_encoder_params, level_distance, multiscale_distance
from .model import ModelParams, forward_learned, forward_unsupervised, init_model_params
from .training import (HeadParams, init_head_params, predict_head, sample_keys,
                       train_cost_learning, train_supervised_ged, train_unsupervised)
from .evalkit import grid_search_costs, rank_metrics, roc_auc, task_metrics
from .explain import export_heatmap, node_importance, pair_cost_map
from .checkpoint import load_arrays, save_arrays

__all__ = [
    "EPSILON_LABEL", "Graph", "GraphFormatError", "PaddedPair", "make_graph",
    "pad_pair", "parse_graphs", "random_edit", "serialize_graphs", "synth_random",
    "COST_CONFIGS", "EditCostConfig", "brute_force_ged", "cost_config", "exact_ged",
    "gen_pair_labels", "ged_lower_bound", "read_labels_csv", "write_labels_csv",
    "Adam", "Tensor", "backward", "grad_check",
    "GSParams", "eval_gs", "gumbel_sinkhorn", "hungarian", "init_gs_params",
    "pretrain_gs", "sinkhorn",
    "encode", "init_encoder_params", "level_distance", "multiscale_distance",
    "ModelParams", "forward_learned", "forward_unsupervised", "init_model_params",
    "HeadParams", "init_head_params", "predict_head", "sample_keys",
    "train_cost_learning", "train_supervised_ged", "train_unsupervised",
    "grid_search_costs", "rank_metrics", "roc_auc", "task_metrics",
    "export_heatmap", "node_importance", "pair_cost_map",
    "load_arrays", "save_arrays",
]
