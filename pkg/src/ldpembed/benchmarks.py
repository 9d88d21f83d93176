"""Self-contained SBM benchmark protocols.

Two frozen desk-scale experiments compare all mechanisms end to end over
seeded repeat runs: node classification on the default block model, and link
prediction on a denser block model whose community structure makes links
predictable. The recorded reference numbers live in tests/golden/.
"""

from __future__ import annotations

from .evaluation import (TrainParams, link_predict, sbm_generate, split_edges,
                         split_nodes, train_softmax)
from .mechanisms import MechanismSpec, perturb_per_node
from .propagation import PropagationParams, backward_push
from .rng import derive_seed, substream

MECHANISMS = ("none", "hds", "laplace", "piecewise", "multibit")

NODE_BENCHMARK = {
    "sbm": {"n": 1000, "classes": 4, "p_in": 0.02, "p_out": 0.002, "d": 64,
            "shift": 0.5, "noise": 0.5, "dataset_seed": 0},
    "propagation": {"alpha": 0.01, "r": 0.0, "r_max": 1e-4},
    "epsilon": 1.0,
    "k": 1,
    "protocol_seed": 11,
    "runs": 10,
    "split": (0.5, 0.25, 0.25),
}

LINK_BENCHMARK = {
    "sbm": {"n": 800, "classes": 4, "p_in": 0.20, "p_out": 0.005, "d": 64,
            "shift": 0.5, "noise": 1.0, "dataset_seed": 0},
    "propagation": {"alpha": 0.03, "r": 0.5, "r_max": 1e-4},
    "epsilon": 1.0,
    "k": 1,
    "protocol_seed": 11,
    "runs": 10,
    "split": (0.85, 0.05, 0.10),
}


def _dataset(cfg):
    s = cfg["sbm"]
    return sbm_generate(s["n"], s["classes"], s["p_in"], s["p_out"], s["d"],
                        s["shift"], substream(s["dataset_seed"], 0),
                        noise=s["noise"])


def _spec(cfg, kind: str) -> MechanismSpec:
    if kind == "none":
        return MechanismSpec("none")
    return MechanismSpec(kind, cfg["epsilon"], cfg["k"])


def node_benchmark(cfg=NODE_BENCHMARK, hyper: TrainParams = TrainParams()):
    """Accuracy per mechanism over the seeded runs: {kind: [run values]}."""
    g, X, y = _dataset(cfg)
    params = PropagationParams(**cfg["propagation"])
    results: dict[str, list[float]] = {kind: [] for kind in MECHANISMS}
    for run in range(cfg["runs"]):
        run_seed = derive_seed(cfg["protocol_seed"], run)
        split = split_nodes(g.n, cfg["split"],
                            substream(derive_seed(run_seed, 1), 0),
                            seed=run_seed)
        for kind in MECHANISMS:
            noisy = perturb_per_node(X, _spec(cfg, kind), derive_seed(run_seed, 2))
            Z = backward_push(g, noisy, params)
            _, acc = train_softmax(Z, y, split, hyper)
            results[kind].append(acc)
    return results


def link_benchmark(cfg=LINK_BENCHMARK, hyper: TrainParams = TrainParams()):
    """AUC per mechanism over the seeded runs: {kind: [run values]}."""
    g, X, _ = _dataset(cfg)
    params = PropagationParams(**cfg["propagation"])
    results: dict[str, list[float]] = {kind: [] for kind in MECHANISMS}
    for run in range(cfg["runs"]):
        run_seed = derive_seed(cfg["protocol_seed"], run)
        es = split_edges(g, cfg["split"],
                         substream(derive_seed(run_seed, 1), 0), seed=run_seed)
        for kind in MECHANISMS:
            noisy = perturb_per_node(X, _spec(cfg, kind), derive_seed(run_seed, 2))
            Z = backward_push(es.train_graph, noisy, params)
            results[kind].append(link_predict(Z, es, hyper))
    return results


def win_count(values: dict, kind_a: str, kind_b: str) -> int:
    """Number of runs where kind_a's metric is at least kind_b's."""
    return sum(a >= b for a, b in zip(values[kind_a], values[kind_b]))
