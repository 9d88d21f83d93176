import math

import numpy as np
import pytest

from ldpembed import (InputError, MechanismSpec, PropagationParams,
                      erdos_renyi, error_experiment, estimate_moments,
                      privacy_ratio_check, variance_curve)
from ldpembed.analysis import moment_check, sw_density_mass
from ldpembed.mechanisms import (hds_moments, laplace_variance,
                                 worst_case_variance)
from ldpembed.rng import substream

MB_WORST_EPS1 = 4.682694376831169


# ---------------------------------------------------------------------------
# Monte-Carlo moments
# ---------------------------------------------------------------------------

def test_estimate_moments_hds_symmetric():
    spec = MechanismSpec("hds", 1.0, 1)
    mean, var = estimate_moments(spec, 0.0, 1, 200_000, substream(0, 0))
    _, expected_var = hds_moments(0.0, 1.0, 1, 1)
    assert abs(mean) < 4 * math.sqrt(expected_var / 200_000)


def test_estimate_moments_laplace_variance():
    spec = MechanismSpec("laplace", 1.0)
    _, var = estimate_moments(spec, 0.0, 1, 200_000, substream(1, 0))
    assert var == pytest.approx(laplace_variance(1.0, 1), rel=0.05)


def test_estimate_moments_multibit_worst_case():
    spec = MechanismSpec("multibit", 1.0, 1)
    _, var = estimate_moments(spec, 0.0, 1, 200_000, substream(2, 0))
    assert var == pytest.approx(MB_WORST_EPS1, rel=0.05)


def test_estimate_moments_requires_enough_samples():
    with pytest.raises(InputError):
        estimate_moments(MechanismSpec("hds", 1.0, 1), 0.0, 1, 100, substream(3, 0))


def test_moment_check_random_configs():
    rng = substream(4, 0)
    for i in range(5):
        d = int(rng.integers(1, 12))
        k = int(rng.integers(1, d + 1))
        eps = float(rng.uniform(0.3, 4.0))
        x = float(rng.uniform(-1, 1))
        mean, var = hds_moments(x, eps, k, d)
        res = moment_check(MechanismSpec("hds", eps, k), x, d, 200_000,
                           seed=1000 + i, expected_mean=mean, expected_var=var)
        assert res["mean_ok"], res
        assert res["variance_ok"], res


# ---------------------------------------------------------------------------
# privacy ratio
# ---------------------------------------------------------------------------

def test_privacy_ratio_attains_exp_eps():
    ratio = privacy_ratio_check(1.0, 201, 401)
    assert ratio <= math.e * (1 + 1e-12)
    assert ratio == pytest.approx(math.e, rel=1e-9)


def test_privacy_ratio_small_eps():
    assert privacy_ratio_check(0.01, 101, 201) <= math.exp(0.01) * (1 + 1e-12)


@pytest.mark.parametrize("eps", [0.01, 0.1, 1.0, 2.0, 5.0])
def test_privacy_ratio_never_exceeds_bound(eps):
    assert privacy_ratio_check(eps, 201, 401) <= math.exp(eps) * (1 + 1e-12)


def test_privacy_ratio_identical_inputs_is_one():
    # single x on the grid: every ratio is f(x,c)/f(x,c) = 1
    assert privacy_ratio_check(1.0, x_grid_size=1, c_grid_size=301) == 1.0


def test_density_mass_detects_corruption():
    for eps in (0.1, 1.0, 5.0):
        assert sw_density_mass(eps) == pytest.approx(1.0, abs=1e-12)
    assert abs(sw_density_mass(1.0, q_scale=1.1) - 1.0) > 1e-3


def test_corrupted_q_breaks_privacy_suite_invariants():
    eps = 1.0
    bound = math.exp(eps) * (1 + 1e-12)
    # shrinking q inflates the ratio past the bound
    assert privacy_ratio_check(eps, 101, 201, q_scale=1 / 1.1) > bound
    # inflating q passes the ratio check but breaks normalization, so the
    # suite checks both
    assert privacy_ratio_check(eps, 101, 201, q_scale=1.1) <= bound
    assert abs(sw_density_mass(eps, q_scale=1.1) - 1.0) > 1e-9


# ---------------------------------------------------------------------------
# variance curve
# ---------------------------------------------------------------------------

def test_variance_curve_orderings_and_laplace_column():
    curve = variance_curve(["hds", "laplace", "piecewise", "multibit"],
                           [0.5, 1.0, 2.0, 3.0, 4.0, 5.0])
    assert all(item["holds"] for item in curve.orderings)
    for row in curve.rows:
        if row["kind"] == "laplace":
            assert row["value"] == 8.0 / row["epsilon"] ** 2
    # spot values against the one-dimensional closed forms
    values = {(r["kind"], r["epsilon"]): r["value"] for r in curve.rows}
    assert values[("laplace", 1.0)] == 8.0
    assert values[("multibit", 1.0)] == pytest.approx(MB_WORST_EPS1, abs=1e-12)
    assert values[("hds", 1.0)] == pytest.approx(worst_case_variance("hds", 1.0))


def test_variance_curve_csv_shape():
    curve = variance_curve(["hds", "laplace"], [1.0, 2.0])
    rows = list(curve.csv_rows())
    assert rows[0] == ("kind", "epsilon", "worst_case_variance")
    assert len(rows) == 5


# ---------------------------------------------------------------------------
# error experiment
# ---------------------------------------------------------------------------

def _small_setup():
    rng = substream(5, 0)
    g = erdos_renyi(60, 0.08, rng)
    X = rng.uniform(-1, 1, size=(g.n, 16))
    params = PropagationParams(alpha=0.3, r=0.5, r_max=1e-6)
    return g, X, params


def test_error_experiment_identity_is_zero():
    g, X, params = _small_setup()
    report = error_experiment(g, X, MechanismSpec("none"), params,
                              trials=10, seed=7)
    assert report.mean_error == 0.0
    assert all(v == 0.0 for v in report.per_trial_mean)


def test_error_experiment_report_contents():
    g, X, params = _small_setup()
    spec = MechanismSpec("hds", 1.0, 2)
    report = error_experiment(g, X, spec, params, trials=10, seed=7)
    assert report.kind == "hds" and report.d == 16 and report.k == 2
    assert len(report.per_trial_mean) == 10
    assert report.mean_error > 0.0
    # quantiles are monotone in the confidence level
    assert report.quantiles[0.05] >= report.quantiles[0.1] >= 0.0
    rows = list(report.csv_rows())
    assert rows[0] == ("mechanism", "epsilon", "d", "k", "trial", "error")
    assert len(rows) == 11
    assert any(line.startswith("mean_error=") for line in report.kv_lines())


def test_error_experiment_reproducible():
    g, X, params = _small_setup()
    spec = MechanismSpec("piecewise", 1.0, 2)
    a = error_experiment(g, X, spec, params, trials=10, seed=42)
    b = error_experiment(g, X, spec, params, trials=10, seed=42)
    assert np.array_equal(a.per_trial_mean, b.per_trial_mean)
    assert a.mean_error == b.mean_error and a.quantiles == b.quantiles


def test_error_experiment_trials_precondition():
    g, X, params = _small_setup()
    with pytest.raises(InputError):
        error_experiment(g, X, MechanismSpec("hds", 1.0, 1), params,
                         trials=3, seed=0)


def test_error_experiment_hds_below_baselines_small():
    # desk-scale glimpse of the utility ordering; the full-size run lives in
    # the acceptance suite
    rng = substream(6, 0)
    g = erdos_renyi(120, 0.06, rng)
    X = rng.uniform(-1, 1, size=(g.n, 64))
    params = PropagationParams(alpha=0.2, r=0.5, r_max=1e-4)
    errors = {}
    for kind in ("hds", "laplace", "piecewise", "multibit"):
        report = error_experiment(g, X, MechanismSpec(kind, 1.0, 1), params,
                                  trials=10, seed=11)
        errors[kind] = report.mean_error
    assert errors["hds"] < errors["laplace"]
    assert errors["hds"] < errors["piecewise"]
    assert errors["hds"] < errors["multibit"]
