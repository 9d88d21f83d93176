"""Scikit-learn style wrappers around the functional core.

FeaturePerturber and PPRPropagator are transformers, SoftmaxClassifier is a
classifier; all three follow the fit/transform/predict + get_params protocol
so the private embedding pipeline composes with sklearn pipelines and model
selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .evaluation import TrainParams, fit_softmax
from .graph import Graph
from .mechanisms import MechanismSpec, mechanism_constants, perturb_per_node
from .propagation import PropagationParams, backward_push


class FeaturePerturber(TransformerMixin, BaseEstimator):
    """Row-wise LDP perturbation of a normalized feature matrix.

    Parameters
    ----------
    mechanism : one of "hds", "laplace", "piecewise", "multibit", "none"
    epsilon : privacy budget (ignored by "none")
    k : number of sampled coordinates for the sampling mechanisms
    seed : master seed; row v draws from substream (seed, v)
    """

    def __init__(self, mechanism="hds", epsilon=1.0, k=1, seed=0):
        self.mechanism = mechanism
        self.epsilon = epsilon
        self.k = k
        self.seed = seed

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.spec_ = MechanismSpec(kind=self.mechanism, epsilon=self.epsilon,
                                   k=self.k)
        self.n_features_in_ = X.shape[1]
        self.constants_ = mechanism_constants(self.spec_, X.shape[1])
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X, dtype=np.float64)
        return perturb_per_node(X, self.spec_, self.seed)


class PPRPropagator(TransformerMixin, BaseEstimator):
    """Personalized-PageRank propagation over a fixed graph.

    The graph is a constructor parameter (it is public knowledge, not part of
    the private data flowing through transform).
    """

    def __init__(self, graph: Graph = None, alpha=0.2, r=0.5, r_max=1e-5,
                 n_threads=1):
        self.graph = graph
        self.alpha = alpha
        self.r = r
        self.r_max = r_max
        self.n_threads = n_threads

    def fit(self, X, y=None):
        if self.graph is None:
            raise ValueError("PPRPropagator requires a graph")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.graph.n:
            raise ValueError(f"X has {X.shape[0]} rows but the graph has "
                             f"{self.graph.n} nodes")
        self.params_ = PropagationParams(alpha=self.alpha, r=self.r,
                                         r_max=self.r_max)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return backward_push(self.graph, X, self.params_,
                             n_threads=self.n_threads)


class SoftmaxClassifier(ClassifierMixin, BaseEstimator):
    """Linear softmax head trained by full-batch gradient descent."""

    def __init__(self, step=0.1, iters=500, l2=1e-4):
        self.step = step
        self.iters = iters
        self.l2 = l2

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        hyper = TrainParams(step=self.step, iters=self.iters, l2=self.l2)
        self.model_ = fit_softmax(X, y_idx, hyper, n_classes=len(self.classes_))
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return self.model_.decision_function(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
