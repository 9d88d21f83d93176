"""Locally differentially private perturbation mechanisms.

Four numeric mechanisms over features normalized to [-1, 1]:

* square wave / hds: reports a value near the input with elevated uniform
  density p inside a band of half-width b around the true value, and uniform
  density q = p * exp(-eps) on the rest of [-b-1, 1+b]. The high-dimensional
  variant (hds) samples k of d coordinates, perturbs each at budget eps/k and
  encodes the remaining coordinates as exact zeros. Deliberately *not*
  debiased server-side: the output expectation is C*x with C < 1, which keeps
  the noise bounded and concentrated. C is exposed for callers that want to
  debias anyway.
* laplace: adds Laplace noise of scale 2d/eps to every coordinate (budget
  eps/d per coordinate by sequential composition). Unbiased, unbounded.
* piecewise: bounded mechanism on [-s, s] with an input-dependent
  high-probability interval; sampled coordinates are rescaled by d/k so the
  report is unbiased.
* multibit: each sampled coordinate collapses to one of {-1, +1}; the
  server-side calibration d(e^{eps/k}+1)/(k(e^{eps/k}-1)) makes it unbiased.

All samplers are vectorized over rows (users) and draw from the Generator
passed in; same generator state means bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .rng import substream

KINDS = ("laplace", "piecewise", "multibit", "hds", "none")

_SW_ALIASES = {"hds", "sw", "squarewave"}

# Below this budget the direct halfwidth formula subtracts nearly equal
# quantities (numerator and denominator are both ~eps^2/2); switch to the
# series expansion instead.
_SW_SERIES_CUTOFF = 1e-3


def _check_epsilon(epsilon) -> float:
    epsilon = float(epsilon)
    if not math.isfinite(epsilon) or epsilon <= 0:
        raise InputError(f"privacy budget must be a positive finite number, got {epsilon}")
    return epsilon


def _check_unit_range(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise InputError("input contains non-finite values")
    if (np.abs(x) > 1.0 + 1e-12).any():
        raise InputError("input values must lie in [-1, 1]")
    return np.clip(x, -1.0, 1.0)


def _check_k(k, d: int) -> int:
    k = int(k)
    if not 1 <= k <= d:
        raise InputError(f"sampling parameter k={k} must satisfy 1 <= k <= d={d}")
    return k


# ---------------------------------------------------------------------------
# square wave core (one-dimensional)
# ---------------------------------------------------------------------------

def sw_halfwidth(epsilon) -> float:
    """Half-width b of the high-probability band.

    b = (eps*e^eps - e^eps + 1) / (e^eps * (e^eps - eps - 1)); b -> 1 as
    eps -> 0 and b ~ eps*e^-eps as eps -> inf.
    """
    epsilon = _check_epsilon(epsilon)
    if epsilon < _SW_SERIES_CUTOFF:
        # numerator ~ eps^2 (1/2 + eps/3 + eps^2/8 + eps^3/30)
        # denominator ~ eps^2 (1/2 + 2 eps/3 + 11 eps^2/24 + 13 eps^3/60)
        e = epsilon
        num = 0.5 + e / 3.0 + e * e / 8.0 + e ** 3 / 30.0
        den = 0.5 + 2.0 * e / 3.0 + 11.0 * e * e / 24.0 + 13.0 * e ** 3 / 60.0
        return num / den
    exp_e = math.exp(epsilon)
    return (epsilon * exp_e - exp_e + 1.0) / (exp_e * (exp_e - epsilon - 1.0))


@dataclass(frozen=True)
class SquareWaveConstants:
    """Band half-width and the two density levels; p/q == e^eps and the
    density normalizes over [-b-1, 1+b] (2*b*p + 2*q == 1)."""

    b: float
    p: float
    q: float

    @classmethod
    def for_epsilon(cls, epsilon) -> "SquareWaveConstants":
        epsilon = _check_epsilon(epsilon)
        b = sw_halfwidth(epsilon)
        exp_e = math.exp(epsilon)
        q = 1.0 / (2.0 * b * exp_e + 2.0)
        return cls(b=b, p=exp_e * q, q=q)


def sw_pdf(x, c, epsilon):
    """Density of the square-wave output at c given true value x.

    p inside [x-b, x+b], q on the rest of [-b-1, 1+b], zero outside.
    Broadcasts over x and c.
    """
    x = _check_unit_range(x)
    consts = SquareWaveConstants.for_epsilon(epsilon)
    c = np.asarray(c, dtype=np.float64)
    in_band = np.abs(c - x) <= consts.b
    in_domain = (c >= -consts.b - 1.0) & (c <= 1.0 + consts.b)
    return np.where(in_band, consts.p, np.where(in_domain, consts.q, 0.0))


def sw_perturb(x, epsilon, rng: np.random.Generator):
    """Draw from the square-wave output density, elementwise over x.

    With probability b*e^eps/(b*e^eps + 1) the report is uniform on the band
    [x-b, x+b]; otherwise it is uniform on [-b-1, x-b) u (x+b, 1+b].
    """
    x = _check_unit_range(x)
    consts = SquareWaveConstants.for_epsilon(epsilon)
    b = consts.b
    exp_e = math.exp(_check_epsilon(epsilon))
    in_band_prob = b * exp_e / (b * exp_e + 1.0)

    pick = rng.random(x.shape)
    band_pos = rng.random(x.shape)
    tail_pos = rng.random(x.shape)

    in_band_val = (x - b) + 2.0 * b * band_pos
    # The two out-of-band pieces have lengths x+1 (left) and 1-x (right),
    # always 2 in total; sample a position along their concatenation.
    w = 2.0 * tail_pos
    left_len = x + 1.0
    out_band_val = np.where(w < left_len,
                            (-b - 1.0) + w,
                            (x + b) + (w - left_len))
    return np.where(pick < in_band_prob, in_band_val, out_band_val)


def sw_mean_factor(epsilon) -> float:
    """Expectation shrink factor of the one-dimensional square wave:
    E[report] = b(e^eps - 1)/(b e^eps + 1) * x."""
    consts = SquareWaveConstants.for_epsilon(epsilon)
    exp_e = math.exp(float(epsilon))
    return consts.b * (exp_e - 1.0) / (consts.b * exp_e + 1.0)


def sw_mse(x, epsilon):
    """Closed-form E[(report - x)^2] of the one-dimensional square wave,
    by piecewise integration of the two-level density:

        [ (1+b-x)^3 + (1+b+x)^3 + 2 b^3 (e^eps - 1) ] / (6 (b e^eps + 1))
    """
    x = _check_unit_range(x)
    b = sw_halfwidth(epsilon)
    exp_e = math.exp(float(epsilon))
    num = (1.0 + b - x) ** 3 + (1.0 + b + x) ** 3 + 2.0 * b ** 3 * (exp_e - 1.0)
    return num / (6.0 * (b * exp_e + 1.0))


# ---------------------------------------------------------------------------
# coordinate sampling shared by the high-dimensional mechanisms
# ---------------------------------------------------------------------------

def _sampled_mask(rng: np.random.Generator, rows: int, d: int, k: int) -> np.ndarray:
    """Boolean (rows, d) mask with exactly k True per row, uniform over
    k-subsets (rank statistics of iid uniforms)."""
    if k == d:
        return np.ones((rows, d), dtype=bool)
    u = rng.random((rows, d))
    idx = np.argpartition(u, k - 1, axis=1)[:, :k]
    mask = np.zeros((rows, d), dtype=bool)
    np.put_along_axis(mask, idx, True, axis=1)
    return mask


def _as_rows(x) -> tuple[np.ndarray, bool]:
    x = _check_unit_range(x)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise InputError(f"expected a vector or matrix of features, got ndim={x.ndim}")


# ---------------------------------------------------------------------------
# the four mechanisms
# ---------------------------------------------------------------------------

def hds_perturb(x, epsilon, k, rng: np.random.Generator):
    """High-dimensional square wave: perturb k sampled coordinates at budget
    eps/k, encode the rest as exact zeros. No server-side debiasing."""
    rows, squeeze = _as_rows(x)
    d = rows.shape[1]
    k = _check_k(k, d)
    epsilon = _check_epsilon(epsilon)
    mask = _sampled_mask(rng, rows.shape[0], d, k)
    noisy = sw_perturb(rows, epsilon / k, rng)
    out = np.where(mask, noisy, 0.0)
    return out[0] if squeeze else out


def hds_constant(epsilon, k, d) -> float:
    """Expectation factor C with E[report_j] = C * x_j:
    C = (k/d) * b (e^{eps/k} - 1) / (b e^{eps/k} + 1)."""
    k = _check_k(k, int(d))
    return (k / float(d)) * sw_mean_factor(_check_epsilon(epsilon) / k)


def hds_moments(x_j, epsilon, k, d):
    """Closed-form per-coordinate mean and variance of the hds report.

    mean = C * x_j
    var  = k (b^3 e^{eps/k} + 3b^2 + 3b + 1) / (3d (b e^{eps/k} + 1))
           + (C - C^2) x_j^2
    """
    x_j = _check_unit_range(x_j)
    epsilon = _check_epsilon(epsilon)
    d = int(d)
    k = _check_k(k, d)
    b = sw_halfwidth(epsilon / k)
    exp_e = math.exp(epsilon / k)
    c = hds_constant(epsilon, k, d)
    mean = c * x_j
    var = (k * (b ** 3 * exp_e + 3.0 * b ** 2 + 3.0 * b + 1.0)
           / (3.0 * d * (b * exp_e + 1.0))
           + (c - c * c) * x_j ** 2)
    return mean, var


def laplace_scale(epsilon, d) -> float:
    """Per-coordinate Laplace scale 2d/eps (budget eps/d per coordinate)."""
    return 2.0 * int(d) / _check_epsilon(epsilon)


def laplace_perturb(x, epsilon, rng: np.random.Generator):
    """Add Laplace(2d/eps) noise to every coordinate. Unbiased, unbounded."""
    x = _check_unit_range(x)
    d = x.shape[-1] if x.ndim else 1
    return x + rng.laplace(scale=laplace_scale(epsilon, d), size=x.shape)


def laplace_variance(epsilon, d) -> float:
    """Per-coordinate report variance 8 d^2 / eps^2."""
    return 8.0 * int(d) ** 2 / _check_epsilon(epsilon) ** 2


def piecewise_perturb(x, epsilon, k, rng: np.random.Generator):
    """Piecewise mechanism with coordinate sampling and d/k calibration.

    Per sampled coordinate at budget z = eps/k: output domain [-s, s] with
    s = (e^{z/2}+1)/(e^{z/2}-1); with probability e^{z/2}/(e^{z/2}+1) the
    report is uniform on [l(x), l(x)+s-1] where l(x) = (s+1)/2 x - (s-1)/2,
    otherwise uniform on the remaining two pieces (chosen proportionally to
    their lengths). Unsampled coordinates are zero; sampled reports are
    scaled by d/k so the result is unbiased.
    """
    rows, squeeze = _as_rows(x)
    d = rows.shape[1]
    k = _check_k(k, d)
    z = _check_epsilon(epsilon) / k
    exp_half = math.exp(z / 2.0)
    s = (exp_half + 1.0) / (exp_half - 1.0)
    in_prob = exp_half / (exp_half + 1.0)

    left = (s + 1.0) / 2.0 * rows - (s - 1.0) / 2.0
    right = left + s - 1.0

    pick = rng.random(rows.shape)
    band_pos = rng.random(rows.shape)
    tail_pos = rng.random(rows.shape)

    in_val = left + (s - 1.0) * band_pos
    # out-of-band pieces [-s, l) and (r, s] have lengths l+s and s-r; their
    # total is s+1 regardless of x, so a degenerate side just never gets hit
    w = (s + 1.0) * tail_pos
    left_len = left + s
    out_val = np.where(w < left_len, -s + w, right + (w - left_len))

    report = np.where(pick < in_prob, in_val, out_val)
    mask = _sampled_mask(rng, rows.shape[0], d, k)
    out = np.where(mask, (d / k) * report, 0.0)
    return out[0] if squeeze else out


def piecewise_variance(x, epsilon, k, d):
    """Closed-form per-coordinate variance of the calibrated piecewise report:
    d(e^{z/2}+3)/(3k(e^{z/2}-1)^2) + [d e^{z/2}/(k(e^{z/2}-1)) - 1] x^2
    with z = eps/k."""
    x = _check_unit_range(x)
    d = int(d)
    k = _check_k(k, d)
    z = _check_epsilon(epsilon) / k
    exp_half = math.exp(z / 2.0)
    first = d * (exp_half + 3.0) / (3.0 * k * (exp_half - 1.0) ** 2)
    second = (d * exp_half / (k * (exp_half - 1.0)) - 1.0) * x ** 2
    return first + second


def multibit_plus_prob(x, epsilon):
    """Probability that a sampled coordinate reports +1 (before calibration):
    1/(e^eps+1) + (x+1)/2 * (e^eps-1)/(e^eps+1)."""
    x = _check_unit_range(x)
    exp_e = math.exp(_check_epsilon(epsilon))
    return 1.0 / (exp_e + 1.0) + (x + 1.0) / 2.0 * (exp_e - 1.0) / (exp_e + 1.0)


def multibit_perturb(x, epsilon, k, rng: np.random.Generator):
    """Multi-bit mechanism: sampled coordinates collapse to +/-1 at budget
    eps/k, then scale by d(e^{eps/k}+1)/(k(e^{eps/k}-1)); unsampled are 0."""
    rows, squeeze = _as_rows(x)
    d = rows.shape[1]
    k = _check_k(k, d)
    z = _check_epsilon(epsilon) / k
    exp_e = math.exp(z)
    prob_plus = multibit_plus_prob(rows, z)
    bits = np.where(rng.random(rows.shape) < prob_plus, 1.0, -1.0)
    calibration = d * (exp_e + 1.0) / (k * (exp_e - 1.0))
    mask = _sampled_mask(rng, rows.shape[0], d, k)
    out = np.where(mask, calibration * bits, 0.0)
    return out[0] if squeeze else out


def multibit_variance(x, epsilon, k, d):
    """Closed-form per-coordinate variance of the calibrated multi-bit report:
    (d/k) ((e^{z}+1)/(e^{z}-1))^2 - x^2 with z = eps/k."""
    x = _check_unit_range(x)
    d = int(d)
    k = _check_k(k, d)
    exp_e = math.exp(_check_epsilon(epsilon) / k)
    return (d / k) * ((exp_e + 1.0) / (exp_e - 1.0)) ** 2 - x ** 2


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MechanismSpec:
    """Mechanism choice plus its privacy parameters.

    kind "none" is the identity passthrough used for eps = inf baselines; it
    provides no privacy and is flagged as such wherever it is reported.
    """

    kind: str
    epsilon: float = math.inf
    k: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown mechanism kind {self.kind!r}, expected one of {KINDS}")
        if self.kind != "none":
            _check_epsilon(self.epsilon)
        if int(self.k) < 1:
            raise InputError(f"sampling parameter k must be >= 1, got {self.k}")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "k", int(self.k))

    @property
    def private(self) -> bool:
        return self.kind != "none"


def perturb_matrix(X, spec: MechanismSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply a mechanism row-wise to an (n, d) feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("expected an (n, d) feature matrix")
    if spec.kind == "none":
        return X.copy()
    if spec.kind == "laplace":
        return laplace_perturb(X, spec.epsilon, rng)
    if spec.kind == "piecewise":
        return piecewise_perturb(X, spec.epsilon, spec.k, rng)
    if spec.kind == "multibit":
        return multibit_perturb(X, spec.epsilon, spec.k, rng)
    return hds_perturb(X, spec.epsilon, spec.k, rng)


def perturb_per_node(X, spec: MechanismSpec, seed: int) -> np.ndarray:
    """Apply a mechanism with one RNG substream per row (node id).

    Each user's report depends only on (seed, node id), so rows can be
    recomputed or parallelized in any order with identical results.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("expected an (n, d) feature matrix")
    if spec.kind == "none":
        return X.copy()
    out = np.empty_like(X)
    for v in range(X.shape[0]):
        out[v] = perturb_matrix(X[v:v + 1], spec, substream(seed, v))[0]
    return out


def mechanism_constants(spec: MechanismSpec, d: int) -> dict:
    """Derived constants of a configured mechanism, for run metadata."""
    if spec.kind == "none":
        return {"private": False}
    info: dict = {"private": True, "epsilon": spec.epsilon}
    if spec.kind == "laplace":
        info["scale"] = laplace_scale(spec.epsilon, d)
        return info
    info["k"] = spec.k
    z = spec.epsilon / spec.k
    if spec.kind == "hds":
        consts = SquareWaveConstants.for_epsilon(z)
        info.update(b=consts.b, p=consts.p, q=consts.q,
                    C=hds_constant(spec.epsilon, spec.k, d))
    elif spec.kind == "piecewise":
        exp_half = math.exp(z / 2.0)
        info["s"] = (exp_half + 1.0) / (exp_half - 1.0)
        info["calibration"] = d / spec.k
    elif spec.kind == "multibit":
        exp_e = math.exp(z)
        info["calibration"] = d * (exp_e + 1.0) / (spec.k * (exp_e - 1.0))
    return info


def worst_case_variance(kind: str, epsilon, grid_points: int = 1001) -> float:
    """Worst-case per-coordinate noise variance max_x E[(report - x)^2] in
    the one-dimensional setting (d = k = 1).

    Laplace is x-independent (8/eps^2); the bounded mechanisms are maximized
    over a grid of inputs. For the (biased) square wave the expectation is
    the closed-form mse; for the unbiased piecewise/multi-bit mechanisms it
    equals their variance.
    """
    epsilon = _check_epsilon(epsilon)
    if kind == "laplace":
        return 8.0 / epsilon ** 2
    xs = np.linspace(-1.0, 1.0, grid_points)
    if kind in _SW_ALIASES:
        return float(sw_mse(xs, epsilon).max())
    if kind == "piecewise":
        return float(piecewise_variance(xs, epsilon, 1, 1).max())
    if kind == "multibit":
        return float(multibit_variance(xs, epsilon, 1, 1).max())
    raise InputError(f"unknown mechanism kind {kind!r}")
