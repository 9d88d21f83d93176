"""Batch command-line front end.

Subcommands: embed | eval-node | eval-link | verify | sbm-gen. Every output
artifact embeds the resolved configuration and seed; rerunning any command
with the same configuration and seed reproduces the artifacts byte for byte
(wall-clock timings therefore go to stdout, never into files).

Exit codes: 0 success, 1 verification assertion failure, 2 config/IO error.
The LDPEMBED_THREADS environment variable bounds propagation worker threads.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (error_experiment, moment_check, privacy_ratio_check,
                       sw_density_mass, variance_curve)
from .errors import ConfigError, InputError
from .evaluation import (TrainParams, erdos_renyi, link_predict, sbm_generate,
                         split_edges, split_nodes, top_class_filter,
                         train_softmax)
from .features import (FeatureBounds, load_bounds, load_features, load_labels,
                       normalize, save_features)
from .graph import load_edge_list, save_edge_list
from .mechanisms import (MechanismSpec, hds_moments, laplace_variance,
                         mechanism_constants, multibit_variance,
                         perturb_per_node, piecewise_variance)
from .propagation import PropagationParams, backward_push, dense_ppr_oracle, series_terms
from .rng import derive_seed, substream

VERIFY_SUITES = ("privacy", "moments", "variance-curve", "push", "error-scaling")


def _threads() -> int:
    raw = os.environ.get("LDPEMBED_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"LDPEMBED_THREADS must be an integer, got {raw!r}")


def _parse_epsilons(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.lower() in ("inf", "infinity"):
            out.append(math.inf)
            continue
        try:
            value = float(part)
        except ValueError:
            raise ConfigError(f"bad epsilon value {part!r}")
        if value <= 0:
            raise ConfigError(f"epsilon must be positive, got {part!r}")
        out.append(value)
    if not out:
        raise ConfigError("no epsilon values given")
    return out


def _parse_ratios(text: str, parts: int) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"bad ratio list {text!r}")
    if len(values) != parts:
        raise ConfigError(f"expected {parts} comma-separated ratios, got {text!r}")
    return values


def _spec_for(mechanism: str, epsilon: float, k: int) -> MechanismSpec:
    if math.isinf(epsilon) or mechanism == "none":
        return MechanismSpec(kind="none")
    return MechanismSpec(kind=mechanism, epsilon=epsilon, k=k)


def _require_files(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise ConfigError(f"input file does not exist: {p}")


def _write_meta(outdir: Path, command: str, config: dict, extra: dict | None = None) -> None:
    meta = {"tool": "ldpembed", "version": __version__, "command": command,
            "config": config}
    if extra:
        meta.update(extra)
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True,
                                                 default=repr) + "\n",
                                      encoding="utf-8")


def _config_header(config: dict) -> list[str]:
    return [f"# {key}={config[key]!r}" for key in sorted(config)]


def _load_normalized_features(args, config: dict) -> np.ndarray:
    X = load_features(args.features)
    if args.bounds:
        bounds = load_bounds(args.bounds)
        config["bounds_from_data"] = False
    else:
        bounds = FeatureBounds.from_data(X)
        config["bounds_from_data"] = True
    return normalize(X, bounds)


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------

def cmd_embed(args) -> int:
    _require_files(args.edges, args.features, args.bounds)
    epsilons = _parse_epsilons(args.epsilon)
    if len(epsilons) != 1:
        raise ConfigError("embed expects a single epsilon value")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    g = load_edge_list(args.edges)
    config = {"edges": str(args.edges), "features": str(args.features),
              "bounds": str(args.bounds) if args.bounds else None,
              "mechanism": args.mechanism, "epsilon": epsilons[0], "k": args.k,
              "alpha": args.alpha, "r": args.r, "r_max": args.rmax,
              "seed": args.seed, "threads": _threads()}
    Xn = _load_normalized_features(args, config)
    if Xn.shape[0] != g.n:
        raise ConfigError(f"feature matrix has {Xn.shape[0]} rows but the graph "
                          f"has {g.n} nodes")
    spec = _spec_for(args.mechanism, epsilons[0], args.k)
    params = PropagationParams(alpha=args.alpha, r=args.r, r_max=args.rmax)
    noisy = perturb_per_node(Xn, spec, args.seed)
    Z = backward_push(g, noisy, params, n_threads=_threads())
    save_features(Z, outdir / "embedding.bin")
    _write_meta(outdir, "embed", config,
                {"mechanism_constants": mechanism_constants(spec, Xn.shape[1]),
                 "shape": list(Z.shape)})
    print(f"embed: wrote {Z.shape[0]}x{Z.shape[1]} embedding to "
          f"{outdir / 'embedding.bin'} in {time.perf_counter() - started:.2f}s")
    return 0


# ---------------------------------------------------------------------------
# eval-node / eval-link
# ---------------------------------------------------------------------------

def _eval_common_config(args, epsilons) -> dict:
    return {"edges": str(args.edges), "features": str(args.features),
            "bounds": str(args.bounds) if args.bounds else None,
            "mechanism": args.mechanism, "epsilons": epsilons, "k": args.k,
            "alpha": args.alpha, "r": args.r, "r_max": args.rmax,
            "seed": args.seed, "repeat": args.repeat,
            "step": args.step, "iters": args.iters, "l2": args.l2,
            "threads": _threads()}


def _write_metrics(outdir: Path, config: dict, rows: list[dict], metric: str) -> None:
    lines = _config_header(config)
    lines.append("mechanism,epsilon,seed,metric,value")
    for row in rows:
        lines.append(f"{row['mechanism']},{row['epsilon']!r},{row['seed']},"
                     f"{metric},{row['value']!r}")
    (outdir / "metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = list(_config_header(config))
    by_eps: dict[float, list[float]] = {}
    for row in rows:
        by_eps.setdefault(row["epsilon"], []).append(row["value"])
    for eps, values in by_eps.items():
        arr = np.asarray(values)
        summary.append(f"{config['mechanism']} epsilon={eps!r} {metric}: "
                       f"mean={arr.mean():.4f} std={arr.std(ddof=0):.4f} "
                       f"runs={len(values)}")
    (outdir / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")


def cmd_eval_node(args) -> int:
    _require_files(args.edges, args.features, args.labels, args.bounds)
    if args.labels is None:
        raise ConfigError("eval-node requires a labels file")
    epsilons = _parse_epsilons(args.epsilon)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    g = load_edge_list(args.edges)
    config = _eval_common_config(args, epsilons)
    config["labels"] = str(args.labels)
    config["split"] = args.node_split
    Xn = _load_normalized_features(args, config)
    labels = load_labels(args.labels)
    if args.top_classes:
        mask, labels_kept = top_class_filter(labels, args.top_classes)
        config["top_classes"] = args.top_classes
        # nodes outside the kept classes stay in the graph (propagation uses
        # everyone) but are excluded from training and scoring
        keep_idx = np.flatnonzero(mask)
    else:
        labels_kept = labels
        keep_idx = np.arange(g.n)
    ratios = _parse_ratios(args.node_split, 3)
    hyper = TrainParams(step=args.step, iters=args.iters, l2=args.l2)
    params = PropagationParams(alpha=args.alpha, r=args.r, r_max=args.rmax)

    rows = []
    for run in range(args.repeat):
        run_seed = derive_seed(args.seed, run)
        split = split_nodes(keep_idx.size, ratios,
                            substream(derive_seed(run_seed, 1), 0), seed=run_seed)
        for eps in epsilons:
            spec = _spec_for(args.mechanism, eps, args.k)
            noisy = perturb_per_node(Xn, spec, derive_seed(run_seed, 2))
            Z = backward_push(g, noisy, params, n_threads=_threads())[keep_idx]
            _, accuracy = train_softmax(Z, labels_kept, split, hyper)
            rows.append({"mechanism": args.mechanism, "epsilon": eps,
                         "seed": run_seed, "value": accuracy})
    _write_metrics(outdir, config, rows, metric="accuracy")
    _write_meta(outdir, "eval-node", config, {"runs": len(rows)})
    print(f"eval-node: {len(rows)} runs in {time.perf_counter() - started:.2f}s, "
          f"results in {outdir}")
    return 0


def cmd_eval_link(args) -> int:
    _require_files(args.edges, args.features, args.bounds)
    epsilons = _parse_epsilons(args.epsilon)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    g = load_edge_list(args.edges)
    config = _eval_common_config(args, epsilons)
    config["split"] = args.edge_split
    Xn = _load_normalized_features(args, config)
    ratios = _parse_ratios(args.edge_split, 3)
    hyper = TrainParams(step=args.step, iters=args.iters, l2=args.l2)
    params = PropagationParams(alpha=args.alpha, r=args.r, r_max=args.rmax)

    rows = []
    for run in range(args.repeat):
        run_seed = derive_seed(args.seed, run)
        es = split_edges(g, ratios, substream(derive_seed(run_seed, 1), 0),
                         seed=run_seed)
        for eps in epsilons:
            spec = _spec_for(args.mechanism, eps, args.k)
            noisy = perturb_per_node(Xn, spec, derive_seed(run_seed, 2))
            Z = backward_push(es.train_graph, noisy, params, n_threads=_threads())
            auc = link_predict(Z, es, hyper)
            rows.append({"mechanism": args.mechanism, "epsilon": eps,
                         "seed": run_seed, "value": auc})
    _write_metrics(outdir, config, rows, metric="auc")
    _write_meta(outdir, "eval-link", config, {"runs": len(rows)})
    print(f"eval-link: {len(rows)} runs in {time.perf_counter() - started:.2f}s, "
          f"results in {outdir}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _emit(ok: bool, label: str, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    return ok


def _suite_privacy(args) -> bool:
    all_ok = True
    for eps in (0.01, 0.1, 1.0, 2.0, 5.0):
        bound = math.exp(eps) * (1.0 + 1e-12)
        ratio = privacy_ratio_check(eps, 201, 401, q_scale=args.q_scale)
        mass = sw_density_mass(eps, q_scale=args.q_scale)
        ok = ratio <= bound and abs(mass - 1.0) <= 1e-9
        all_ok &= _emit(ok, f"privacy eps={eps}",
                        f"max_ratio={ratio:.12g} bound={bound:.12g} "
                        f"density_mass={mass:.12g}")
    return all_ok


def _suite_moments(args) -> bool:
    n = args.samples
    checks = []
    for i, (x, eps, k, d) in enumerate([(0.0, 1.0, 1, 1), (1.0, 1.0, 1, 1),
                                        (0.5, 2.0, 2, 8), (-0.7, 0.5, 1, 4),
                                        (0.3, 4.0, 3, 6)]):
        mean, var = hds_moments(x, eps, k, d)
        checks.append((MechanismSpec("hds", eps, k), x, d, mean, var, 200 + i))
    checks.append((MechanismSpec("laplace", 1.0), 0.7, 1, 0.7,
                   laplace_variance(1.0, 1), 300))
    checks.append((MechanismSpec("piecewise", 1.0, 1), 0.5, 1, 0.5,
                   piecewise_variance(0.5, 1.0, 1, 1), 301))
    checks.append((MechanismSpec("multibit", 1.0, 1), 0.0, 1, 0.0,
                   multibit_variance(0.0, 1.0, 1, 1), 302))
    all_ok = True
    for spec, x, d, mean, var, seed in checks:
        res = moment_check(spec, x, d, n, derive_seed(args.seed, seed), mean, var)
        ok = res["mean_ok"] and res["variance_ok"]
        all_ok &= _emit(ok, f"moments {spec.kind} eps={spec.epsilon} k={spec.k} "
                            f"d={d} x={x}",
                        f"mean={res['mean']:.5f} (expect {mean:.5f}), "
                        f"var={res['variance']:.5f} (expect {var:.5f})")
    return all_ok


def _suite_variance_curve(args, outdir: Path | None) -> bool:
    curve = variance_curve(["hds", "laplace", "piecewise", "multibit"],
                           [0.5, 1.0, 2.0, 3.0, 4.0, 5.0])
    if outdir is not None:
        lines = [",".join(map(str, row)) for row in curve.csv_rows()]
        (outdir / "variance_curve.csv").write_text("\n".join(lines) + "\n",
                                                   encoding="utf-8")
    all_ok = True
    for item in curve.orderings:
        all_ok &= _emit(item["holds"],
                        f"variance-curve {item['comparison']} eps={item['epsilon']}",
                        "ordering holds" if item["holds"] else "ordering violated")
    return all_ok


def _suite_push(args) -> bool:
    all_ok = True
    rng = substream(derive_seed(args.seed, 400), 0)
    for trial in range(3):
        g = erdos_renyi(120, 0.05, rng)
        X = rng.uniform(-1, 1, size=(g.n, 6))
        for r in (0.0, 0.5, 1.0):
            params = PropagationParams(alpha=0.5, r=r, r_max=1e-8)
            approx = backward_push(g, X, params)
            exact = dense_ppr_oracle(g, X, 0.5, r, series_terms(0.5, 1e-14))
            err = float(np.abs(approx - exact).max())
            all_ok &= _emit(err <= 1e-5, f"push trial={trial} r={r}",
                            f"max_abs_err={err:.3e} (tol 1e-05)")
    return all_ok


def _suite_error_scaling(args) -> bool:
    rng = substream(derive_seed(args.seed, 500), 0)
    g = erdos_renyi(200, 0.05, rng)
    d = 128
    X = rng.uniform(-1, 1, size=(g.n, d))
    params = PropagationParams(alpha=0.2, r=0.5, r_max=1e-4)
    k = max(1, math.ceil(d / 100))
    eps = 1.0
    results = {}
    for kind in ("hds", "laplace", "piecewise", "multibit"):
        spec = MechanismSpec(kind, eps, k)
        report = error_experiment(g, X, spec, params, trials=10,
                                  seed=derive_seed(args.seed, 501))
        results[kind] = report.mean_error
    all_ok = True
    for other in ("laplace", "piecewise", "multibit"):
        ok = results["hds"] < results[other]
        all_ok &= _emit(ok, f"error-scaling hds<{other} eps={eps} d={d}",
                        f"hds={results['hds']:.4f} {other}={results[other]:.4f}")
    return all_ok


def cmd_verify(args) -> int:
    suites = args.suite or list(VERIFY_SUITES)
    outdir = None
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    ok = True
    if "privacy" in suites:
        ok &= _suite_privacy(args)
    if "moments" in suites:
        ok &= _suite_moments(args)
    if "variance-curve" in suites:
        ok &= _suite_variance_curve(args, outdir)
    if "push" in suites:
        ok &= _suite_push(args)
    if "error-scaling" in suites:
        ok &= _suite_error_scaling(args)
    print(f"verify: {'all checks passed' if ok else 'CHECKS FAILED'} in "
          f"{time.perf_counter() - started:.2f}s")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# sbm-gen
# ---------------------------------------------------------------------------

def cmd_sbm_gen(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    config = {"n": args.n, "classes": args.classes, "p_in": args.p_in,
              "p_out": args.p_out, "d": args.d, "shift": args.shift,
              "noise": args.noise, "seed": args.seed}
    g, X, labels = sbm_generate(args.n, args.classes, args.p_in, args.p_out,
                                args.d, args.shift, substream(args.seed, 0),
                                noise=args.noise)
    save_edge_list(g, outdir / "edges.txt")
    save_features(X, outdir / "features.bin")
    (outdir / "labels.txt").write_text(
        "\n".join(str(int(c)) for c in labels) + "\n", encoding="utf-8")
    _write_meta(outdir, "sbm-gen", config,
                {"edges": g.num_edges, "shape": list(X.shape)})
    print(f"sbm-gen: wrote {g.n} nodes / {g.num_edges} edges to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_pipeline_args(p: argparse.ArgumentParser, needs_labels: bool = False) -> None:
    p.add_argument("--edges", required=True, help="edge-list file")
    p.add_argument("--features", required=True, help="feature file (CSV or PGE1)")
    if needs_labels:
        p.add_argument("--labels", help="labels file (one class id per line)")
    p.add_argument("--bounds", help="sidecar bounds file; computed from the "
                                    "data (and flagged) when absent")
    p.add_argument("--mechanism", default="hds",
                   choices=["hds", "laplace", "piecewise", "multibit", "none"])
    p.add_argument("--epsilon", default="1.0",
                   help="privacy budget; 'inf' selects the identity mechanism; "
                        "eval commands accept a comma-separated sweep list")
    p.add_argument("--k", type=int, default=1, help="sampled coordinates")
    p.add_argument("--alpha", type=float, default=0.2, help="decay factor")
    p.add_argument("--r", type=float, default=0.5, help="convolution coefficient")
    p.add_argument("--rmax", type=float, default=1e-5, help="residue threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repeat", type=int, default=1, help="independent runs")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--l2", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpembed",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="perturb features and propagate")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval-node", help="node classification accuracy")
    _add_pipeline_args(p, needs_labels=True)
    _add_train_args(p)
    p.add_argument("--node-split", default="0.5,0.25,0.25",
                   help="train,val,test node ratios")
    p.add_argument("--top-classes", type=int, default=0,
                   help="restrict to the N most frequent classes (0 = all)")
    p.set_defaults(func=cmd_eval_node)

    p = sub.add_parser("eval-link", help="link prediction AUC")
    _add_pipeline_args(p)
    _add_train_args(p)
    p.add_argument("--edge-split", default="0.85,0.05,0.10",
                   help="train,val,test edge ratios")
    p.set_defaults(func=cmd_eval_link)

    p = sub.add_parser("verify", help="run the verification suites")
    p.add_argument("--suite", action="append", choices=list(VERIFY_SUITES),
                   help="suite to run (repeatable); default: all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=200_000,
                   help="Monte-Carlo samples for the moments suite")
    p.add_argument("--q-scale", type=float, default=1.0,
                   help="harness sensitivity hook: corrupt the out-of-band "
                        "density by this factor; any value != 1 must fail")
    p.add_argument("--out", help="directory for CSV reports")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sbm-gen", help="generate a stochastic block model dataset")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.02)
    p.add_argument("--p-out", type=float, default=0.002)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--shift", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sbm_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
