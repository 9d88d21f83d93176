"""Statistical verification harness.

Monte-Carlo moment estimates against the closed forms, an analytic
grid check of the privacy ratio bound, worst-case variance curves across
mechanisms, and the empirical embedding-error experiment that realizes the
predicted utility orderings at desk scale. Asymptotic error bounds are
exercised as orderings and growth-rate comparisons only; their hidden
constants are nobody's contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .graph import Graph
from .mechanisms import (MechanismSpec, SquareWaveConstants, perturb_matrix,
                         worst_case_variance)
from .propagation import PropagationParams, backward_push
from .rng import substream


def estimate_moments(spec: MechanismSpec, x: float, d: int, n_samples: int,
                     rng: np.random.Generator):
    """Monte-Carlo per-coordinate mean and variance of a mechanism's report
    at input value x (every coordinate of the probed vector equals x; the
    first coordinate is measured)."""
    if n_samples < 10_000:
        raise InputError(f"need at least 10000 samples, got {n_samples}")
    d = int(d)
    if d < 1:
        raise InputError(f"dimension must be at least 1, got {d}")
    X = np.full((n_samples, d), float(x))
    reports = perturb_matrix(X, spec, rng)[:, 0]
    return float(reports.mean()), float(reports.var(ddof=1))


def privacy_ratio_check(epsilon: float, x_grid_size: int = 201,
                        c_grid_size: int = 401, q_scale: float = 1.0) -> float:
    """Largest square-wave density ratio over a grid of input pairs and
    outputs; at most e^eps when the mechanism is implemented correctly.

    q_scale deliberately corrupts the out-of-band density and exists only so
    the verification harness can prove it would notice a broken mechanism.
    """
    consts = SquareWaveConstants.for_epsilon(epsilon)
    q = consts.q * q_scale
    xs = np.linspace(-1.0, 1.0, x_grid_size)
    cs = np.linspace(-consts.b - 1.0, 1.0 + consts.b, c_grid_size)
    density = np.where(np.abs(cs[None, :] - xs[:, None]) <= consts.b, consts.p, q)
    ratios = density.max(axis=0) / density.min(axis=0)
    return float(ratios.max())


def sw_density_mass(epsilon: float, q_scale: float = 1.0) -> float:
    """Total probability mass of the (possibly corrupted) square-wave
    density: 2*b*p + 2*q. Exactly 1 for the real mechanism."""
    consts = SquareWaveConstants.for_epsilon(epsilon)
    return 2.0 * consts.b * consts.p + 2.0 * consts.q * q_scale


@dataclass(frozen=True)
class VarianceCurve:
    """Worst-case variance table plus the pairwise ordering flags."""

    rows: list[dict]
    orderings: list[dict]

    def csv_rows(self):
        yield ("kind", "epsilon", "worst_case_variance")
        for row in self.rows:
            yield (row["kind"], repr(row["epsilon"]), repr(row["value"]))


# Ranges over which the square-wave curve is expected to stay below each
# competitor (it overtakes the piecewise mechanism between eps = 3 and 4).
SW_BELOW_PIECEWISE_EPS = (0.5, 1.0, 2.0, 3.0)
SW_BELOW_OTHERS_EPS = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)


def variance_curve(kinds, epsilons) -> VarianceCurve:
    """Worst-case per-coordinate noise variance per (kind, epsilon), d=k=1."""
    rows = []
    values: dict[tuple[str, float], float] = {}
    for kind in kinds:
        for eps in epsilons:
            v = worst_case_variance(kind, eps)
            values[(kind, float(eps))] = v
            rows.append({"kind": kind, "epsilon": float(eps), "value": v})

    orderings = []
    for other, eps_range in (("piecewise", SW_BELOW_PIECEWISE_EPS),
                             ("laplace", SW_BELOW_OTHERS_EPS),
                             ("multibit", SW_BELOW_OTHERS_EPS)):
        for eps in eps_range:
            a = values.get(("hds", eps))
            b = values.get((other, eps))
            if a is None or b is None:
                continue
            orderings.append({"comparison": f"hds<{other}", "epsilon": eps,
                              "holds": bool(a < b)})
    return VarianceCurve(rows=rows, orderings=orderings)


@dataclass(frozen=True)
class ErrorTrialReport:
    """Per-trial embedding-error statistics for one mechanism configuration.

    The error of a node is its largest per-dimension absolute deviation from
    the clean propagated embedding; per-trial values average over nodes, and
    the quantiles are taken over all trials x nodes.
    """

    kind: str
    epsilon: float
    d: int
    k: int
    trials: int
    seed: int
    per_trial_mean: np.ndarray
    mean_error: float
    quantiles: dict = field(default_factory=dict)

    def csv_rows(self):
        yield ("mechanism", "epsilon", "d", "k", "trial", "error")
        for t, err in enumerate(self.per_trial_mean):
            yield (self.kind, repr(self.epsilon), str(self.d), str(self.k),
                   str(t), repr(float(err)))

    def kv_lines(self):
        yield f"mechanism={self.kind}"
        yield f"private={self.kind != 'none'}"
        yield f"epsilon={self.epsilon!r}"
        yield f"d={self.d}"
        yield f"k={self.k}"
        yield f"trials={self.trials}"
        yield f"seed={self.seed}"
        yield f"mean_error={self.mean_error!r}"
        for delta in sorted(self.quantiles, reverse=True):
            yield f"quantile[1-{delta}]={self.quantiles[delta]!r}"


def error_experiment(g: Graph, X, spec: MechanismSpec,
                     params: PropagationParams, trials: int,
                     seed: int) -> ErrorTrialReport:
    """Perturb, propagate, and compare against the clean propagated
    embedding, `trials` times with per-trial substreams."""
    X = np.asarray(X, dtype=np.float64)
    if trials < 10:
        raise InputError(f"need at least 10 trials, got {trials}")
    clean = backward_push(g, X, params)
    n = X.shape[0]
    errors = np.empty((trials, n))
    for t in range(trials):
        noisy = perturb_matrix(X, spec, substream(seed, t))
        propagated = backward_push(g, noisy, params)
        errors[t] = np.abs(propagated - clean).max(axis=1)
    flat = errors.ravel()
    quantiles = {0.1: float(np.quantile(flat, 0.9)),
                 0.05: float(np.quantile(flat, 0.95))}
    return ErrorTrialReport(kind=spec.kind, epsilon=spec.epsilon, d=X.shape[1],
                            k=spec.k, trials=trials, seed=seed,
                            per_trial_mean=errors.mean(axis=1),
                            mean_error=float(errors.mean()),
                            quantiles=quantiles)


def moment_check(spec: MechanismSpec, x: float, d: int, n_samples: int,
                 seed: int, expected_mean: float, expected_var: float,
                 var_rtol: float = 0.05):
    """One Monte-Carlo moment comparison; returns a result dict with pass
    flags (mean within 4 sigma, variance within var_rtol relative)."""
    emp_mean, emp_var = estimate_moments(spec, x, d, n_samples,
                                         substream(seed, 0))
    sigma = math.sqrt(expected_var / n_samples)
    mean_ok = abs(emp_mean - expected_mean) <= 4.0 * sigma
    var_ok = abs(emp_var - expected_var) <= var_rtol * expected_var
    return {"kind": spec.kind, "epsilon": spec.epsilon, "k": spec.k, "d": d,
            "x": x, "mean": emp_mean, "expected_mean": expected_mean,
            "variance": emp_var, "expected_variance": expected_var,
            "mean_ok": bool(mean_ok), "variance_ok": bool(var_ok)}
