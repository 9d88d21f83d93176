"""Locally differentially private graph embeddings.

Users perturb their own feature vectors with a bounded LDP mechanism before
anything leaves their device; the untrusted curator then spreads the noisy
features over the (public) graph with personalized-PageRank propagation.
Propagation is post-processing, so the whole pipeline spends exactly the
budget the perturbation spent.
"""

__version__ = "0.1.0"

from .analysis import (ErrorTrialReport, error_experiment, estimate_moments,
                       privacy_ratio_check, variance_curve)
from .benchmarks import (LINK_BENCHMARK, NODE_BENCHMARK, link_benchmark,
                         node_benchmark)
from .errors import ConfigError, FormatError, InputError, ParseError
from .estimators import FeaturePerturber, PPRPropagator, SoftmaxClassifier
from .evaluation import (EdgeSplit, Split, TrainParams, auc_score, erdos_renyi,
                         link_predict, sbm_generate, split_edges, split_nodes,
                         train_softmax)
from .features import (FeatureBounds, load_bounds, load_features, load_labels,
                       normalize, save_bounds, save_features)
from .graph import Graph, load_edge_list, save_edge_list
from .mechanisms import (KINDS, MechanismSpec, SquareWaveConstants,
                         hds_constant, hds_moments, hds_perturb,
                         laplace_perturb, laplace_scale, laplace_variance,
                         mechanism_constants, multibit_perturb,
                         multibit_plus_prob, multibit_variance,
                         perturb_matrix, perturb_per_node, piecewise_perturb,
                         piecewise_variance, sw_halfwidth, sw_mean_factor,
                         sw_mse, sw_pdf, sw_perturb, worst_case_variance)
from .propagation import (PropagationParams, PushStats, backward_push,
                          dense_ppr_oracle, series_terms)
from .rng import derive_seed, substream

__all__ = [name for name in dir() if not name.startswith("_")]
