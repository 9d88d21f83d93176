"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria 7b and 7c are
expected to fail on this desk-scale configuration; the analysis lives in the
golden files' protocol notes and the test failure messages.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import ldpembed as L
from ldpembed.benchmarks import (LINK_BENCHMARK, NODE_BENCHMARK,
                                 link_benchmark, node_benchmark, win_count)
from ldpembed.cli import main as cli_main
from ldpembed.mechanisms import (hds_moments, laplace_variance,
                                 multibit_variance, piecewise_variance,
                                 worst_case_variance)
from ldpembed.rng import substream

GOLDEN = Path(__file__).parent / "golden"
N_MC = 200_000


def _report(tag: str, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


# ---------------------------------------------------------------------------
# 1. privacy bound
# ---------------------------------------------------------------------------

def test_criterion_1_privacy_bound():
    started = time.perf_counter()
    worst_slack = 0.0
    ok = True
    for eps in (0.01, 0.1, 1.0, 2.0, 5.0):
        ratio = L.privacy_ratio_check(eps, x_grid_size=201, c_grid_size=401)
        bound = math.exp(eps) * (1.0 + 1e-12)
        ok &= ratio <= bound
        worst_slack = max(worst_slack, ratio / math.exp(eps) - 1.0)
    elapsed = time.perf_counter() - started
    ok &= elapsed < 5.0
    assert _report("1 privacy bound", ok,
                   f"max ratio/e^eps - 1 = {worst_slack:.3e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 2. hds moments (Lemma 1 closed forms)
# ---------------------------------------------------------------------------

HDS_CONFIGS = [  # (x, eps, k, d), frozen draw of diverse configurations
    (0.0, 1.0, 1, 1),
    (0.9, 0.5, 1, 4),
    (-0.4, 2.0, 2, 8),
    (0.25, 3.0, 3, 5),
    (-0.85, 1.5, 4, 16),
]


def test_criterion_2_hds_moments():
    started = time.perf_counter()
    ok = True
    details = []
    for i, (x, eps, k, d) in enumerate(HDS_CONFIGS):
        mean, var = hds_moments(x, eps, k, d)
        emp_mean, emp_var = L.estimate_moments(
            L.MechanismSpec("hds", eps, k), x, d, N_MC, substream(200, i))
        mean_ok = abs(emp_mean - mean) <= 4.0 * math.sqrt(var / N_MC)
        var_ok = abs(emp_var - var) <= 0.05 * var
        ok &= mean_ok and var_ok
        details.append(f"cfg{i}:{'ok' if mean_ok and var_ok else 'BAD'}")
    elapsed = time.perf_counter() - started
    ok &= elapsed < 30.0
    assert _report("2 hds moments", ok, f"{' '.join(details)}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 3. baseline variances
# ---------------------------------------------------------------------------

def test_criterion_3_baseline_variances():
    started = time.perf_counter()
    ok = True
    details = []
    for i, eps in enumerate((1.0, 2.0)):
        _, v = L.estimate_moments(L.MechanismSpec("laplace", eps), 0.4, 1,
                                  N_MC, substream(300, i))
        expected = laplace_variance(eps, 1)
        assert expected == 8.0 / eps ** 2
        lap_ok = abs(v - expected) <= 0.05 * expected
        _, v = L.estimate_moments(L.MechanismSpec("piecewise", eps, 1), 0.4, 1,
                                  N_MC, substream(301, i))
        expected = piecewise_variance(0.4, eps, 1, 1)
        pm_ok = abs(v - expected) <= 0.05 * expected
        _, v = L.estimate_moments(L.MechanismSpec("multibit", eps, 1), 0.4, 1,
                                  N_MC, substream(302, i))
        expected = multibit_variance(0.4, eps, 1, 1)
        mb_ok = abs(v - expected) <= 0.05 * expected
        ok &= lap_ok and pm_ok and mb_ok
        details.append(f"eps={eps}: lap={lap_ok} pm={pm_ok} mb={mb_ok}")
    elapsed = time.perf_counter() - started
    ok &= elapsed < 30.0
    assert _report("3 baseline variances", ok,
                   f"{'; '.join(details)}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 4. worst-case variance orderings and goldens
# ---------------------------------------------------------------------------

def test_criterion_4_variance_curve_ordering():
    started = time.perf_counter()
    golden = json.loads((GOLDEN / "variance_curve.json").read_text())
    ok = True
    for key, recorded in golden.items():
        kind, eps = key.split("@")
        ok &= abs(worst_case_variance(kind, float(eps)) - recorded) <= 1e-9
    sw = {eps: worst_case_variance("hds", eps) for eps in (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)}
    for eps in (0.5, 1.0, 2.0, 3.0):
        ok &= sw[eps] < worst_case_variance("piecewise", eps)
    for eps in (0.5, 1.0, 2.0, 3.0, 4.0, 5.0):
        ok &= sw[eps] < worst_case_variance("laplace", eps)
        ok &= sw[eps] < worst_case_variance("multibit", eps)
    elapsed = time.perf_counter() - started
    ok &= elapsed < 5.0
    assert _report("4 variance-curve ordering", ok,
                   f"24 golden values + 16 orderings, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 5. push correctness
# ---------------------------------------------------------------------------

def test_criterion_5_push_correctness():
    started = time.perf_counter()
    rng = substream(500, 0)
    worst = 0.0
    for _ in range(20):
        g = L.erdos_renyi(int(rng.integers(40, 201)), 0.05, rng)
        X = rng.uniform(-1, 1, size=(g.n, 4))
        for r in (0.0, 0.5, 1.0):
            for alpha in (0.1, 0.5, 0.9):
                approx = L.backward_push(g, X, L.PropagationParams(alpha, r, 1e-8))
                exact = L.dense_ppr_oracle(g, X, alpha, r,
                                           L.series_terms(alpha, 1e-14))
                worst = max(worst, float(np.abs(approx - exact).max()))
    ok = worst <= 1e-5

    g2 = L.Graph.from_edges(2, [(0, 1)])
    Z = L.backward_push(g2, np.array([[1.0], [-1.0]]),
                        L.PropagationParams(0.5, 0.0, 1e-8))
    two_node_err = float(np.abs(Z - np.array([[1 / 3], [-1 / 3]])).max())
    ok &= two_node_err <= 1e-6
    elapsed = time.perf_counter() - started
    ok &= elapsed < 60.0
    assert _report("5 push correctness", ok,
                   f"max err vs oracle {worst:.2e}, two-node err "
                   f"{two_node_err:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 6. utility ordering (error experiment)
# ---------------------------------------------------------------------------

def test_criterion_6_utility_ordering():
    started = time.perf_counter()
    rng = substream(20, 0)
    g = L.erdos_renyi(500, 0.02, rng)
    X = rng.uniform(-1, 1, size=(500, 512))
    params = L.PropagationParams(alpha=0.2, r=0.5, r_max=1e-4)
    k = math.ceil(512 / 100)
    errors = {}
    for kind in ("hds", "laplace", "piecewise", "multibit"):
        rep = L.error_experiment(g, X, L.MechanismSpec(kind, 1.0, k), params,
                                 trials=10, seed=21)
        errors[kind] = rep.mean_error
    ok = all(errors["hds"] < errors[b] for b in ("laplace", "piecewise", "multibit"))

    ratios = {}
    for kind in ("hds", "piecewise"):
        per_d = {}
        for d in (64, 1024):
            Xd = substream(22, d).uniform(-1, 1, size=(500, d))
            kd = max(1, math.ceil(d / 100))
            rep = L.error_experiment(g, Xd, L.MechanismSpec(kind, 1.0, kd),
                                     params, trials=10, seed=23)
            per_d[d] = rep.mean_error
        ratios[kind] = per_d[1024] / per_d[64]
    ok &= ratios["hds"] < ratios["piecewise"]
    elapsed = time.perf_counter() - started
    ok &= elapsed < 300.0
    assert _report(
        "6 utility ordering", ok,
        f"errors at d=512: {{{', '.join(f'{k}={v:.3g}' for k, v in errors.items())}}}, "
        f"growth ratio hds={ratios['hds']:.2f} vs piecewise={ratios['piecewise']:.2f}, "
        f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 7 and 8. end-to-end SBM benchmarks
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def node_results():
    started = time.perf_counter()
    results = node_benchmark(NODE_BENCHMARK)
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0, f"node benchmark took {elapsed:.0f}s"
    return results


@pytest.fixture(scope="module")
def link_results():
    started = time.perf_counter()
    results = link_benchmark(LINK_BENCHMARK)
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0, f"link benchmark took {elapsed:.0f}s"
    return results


def test_criterion_7a_non_private_accuracy_floor(node_results):
    clean = float(np.mean(node_results["none"]))
    golden = json.loads((GOLDEN / "sbm_node.json").read_text())
    ok = clean >= 0.85 and abs(clean - golden["means"]["none"]) < 1e-9
    assert _report("7a non-private accuracy >= 0.85", ok,
                   f"mean accuracy {clean:.4f} (golden "
                   f"{golden['means']['none']:.4f})")


def test_criterion_7b_hds_within_10_points(node_results):
    clean = float(np.mean(node_results["none"]))
    hds = float(np.mean(node_results["hds"]))
    ok = hds >= clean - 0.10
    # Known-red at desk scale: the linear softmax head cannot close the gap
    # the paper's MLP closes on larger, denser graphs. The linear-model
    # information ceiling on these embeddings (softmax fit on every node,
    # test rows included) measures ~0.86-0.90, below the required
    # clean - 0.10 = ~0.89, so no honest training recipe can reach it.
    assert _report("7b hds within 10 points of non-private", ok,
                   f"hds {hds:.4f} vs non-private {clean:.4f} "
                   f"(gap {clean - hds:.3f}, allowed 0.100)")


def test_criterion_7c_hds_beats_baselines_per_run(node_results):
    wins = {b: win_count(node_results, "hds", b)
            for b in ("laplace", "piecewise", "multibit")}
    ok = all(w >= 8 for w in wins.values())
    # Known-red for the piecewise baseline: at matched (epsilon, k) the
    # calibrated piecewise report and the uncalibrated hds report have
    # near-identical per-coordinate signal-to-noise for |x| < 1, so accuracy
    # comparisons per run are coin flips (the hds advantage is in max-error
    # tails, criterion 6, not in scale-normalized accuracy).
    assert _report("7c hds >= each baseline in >= 8/10 runs", ok,
                   f"wins: {wins}")


def test_criterion_8_link_prediction(link_results):
    clean = float(np.mean(link_results["none"]))
    golden = json.loads((GOLDEN / "sbm_link.json").read_text())
    wins = {b: win_count(link_results, "hds", b)
            for b in ("laplace", "piecewise", "multibit")}
    ok = clean >= 0.85
    ok &= abs(clean - golden["means"]["none"]) < 1e-9
    ok &= all(w >= 8 for w in wins.values())
    assert _report("8 link prediction", ok,
                   f"non-private AUC {clean:.4f} (floor 0.85), hds AUC "
                   f"{float(np.mean(link_results['hds'])):.4f}, wins {wins}")


# ---------------------------------------------------------------------------
# 9. CLI determinism
# ---------------------------------------------------------------------------

def _tree_bytes(root: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


def test_criterion_9_cli_determinism(tmp_path):
    data = tmp_path / "data"
    gen = ["sbm-gen", "--n", "60", "--classes", "3", "--p-in", "0.25",
           "--p-out", "0.02", "--d", "6", "--shift", "0.7", "--seed", "13"]
    assert cli_main(gen + ["--out", str(data)]) == 0
    data2 = tmp_path / "data2"
    assert cli_main(gen + ["--out", str(data2)]) == 0
    ok = _tree_bytes(data) == _tree_bytes(data2)

    commands = {
        "embed": ["embed", "--edges", str(data / "edges.txt"),
                  "--features", str(data / "features.bin"),
                  "--mechanism", "hds", "--epsilon", "1", "--k", "2",
                  "--seed", "5"],
        "eval-node": ["eval-node", "--edges", str(data / "edges.txt"),
                      "--features", str(data / "features.bin"),
                      "--labels", str(data / "labels.txt"),
                      "--mechanism", "piecewise", "--epsilon", "1,inf",
                      "--repeat", "2", "--iters", "50", "--seed", "6"],
        "eval-link": ["eval-link", "--edges", str(data / "edges.txt"),
                      "--features", str(data / "features.bin"),
                      "--mechanism", "multibit", "--epsilon", "2",
                      "--repeat", "2", "--iters", "50", "--seed", "7"],
        "verify": ["verify", "--suite", "variance-curve"],
    }
    for name, args in commands.items():
        a, b = tmp_path / f"{name}-a", tmp_path / f"{name}-b"
        for out in (a, b):
            extra = ["--out", str(out)]
            assert cli_main(args + extra) in (0,)
        ok &= _tree_bytes(a) == _tree_bytes(b)
    assert _report("9 cli determinism", ok,
                   "sbm-gen, embed, eval-node, eval-link, verify all "
                   "byte-identical on rerun")
