"""Non-parametric proportional-hazards GLM with censoring.

The conditional event intensity factorizes as g(w.x) * h(t) with
g = exp.  The cumulative baseline hazard H is tabulated non-parametrically
at the sorted training times through a closed-form update, alternating
with convex minimization over the coefficient vector until the loss
stabilizes.  Inference (interval probabilities, quantiles, sampling) runs
off the tabulated H by piecewise-linear lookup.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .datasets import Dataset, Standardization

__all__ = [
    "FitConfig",
    "NpGlmModel",
    "TimeEstimate",
    "link_g",
    "compute_H",
    "loss",
    "optimize_w",
    "fit",
    "interpolate_H",
    "ranged_probability",
    "quantile",
    "quantile_times",
    "predict_median",
    "sample_time",
]

# Linear predictors are clamped here before exponentiation; standardized
# features keep fits far from the boundary.
_CLAMP = 50.0


def link_g(z):
    """Covariate link exp(z), with z clamped to [-50, 50]."""
    return np.exp(np.clip(z, -_CLAMP, _CLAMP))


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the alternating fit."""

    threshold: float = 1e-4
    max_outer: int = 500
    inner_max_steps: int = 200
    inner_grad_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_outer < 1 or self.inner_max_steps < 1:
            raise ValueError("iteration limits must be >= 1")


class TimeEstimate(NamedTuple):
    """A predicted time; when the model's horizon was exceeded, ``time``
    is the last training time and only a lower bound."""

    time: float
    horizon_exceeded: bool


def augment(x: np.ndarray) -> np.ndarray:
    """Append the constant-1 bias column."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.hstack([x, np.ones((x.shape[0], 1))])


def resolve_ties(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Spread duplicate observed times by eps * rank, eps = 1e-9 * max(t).

    Groups of equal observed times are anchored at the group maximum and
    earlier members shifted down, so an observed time never moves past the
    censored samples recorded at the same value.  Censored times are left
    alone; they only carry risk-set mass.
    """
    t = np.asarray(t, dtype=float).copy()
    eps = 1e-9 * float(t.max()) if len(t) else 0.0
    observed = np.flatnonzero(np.asarray(y) == 1)
    if eps == 0.0 or observed.size < 2:
        return t
    values = t[observed]
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] != values[start]:
            m = i - start
            if m > 1:
                ranks = np.arange(m)
                t[observed[start:i]] = values[start] - eps * (m - 1 - ranks)
            start = i
    return t


def _prepared(dataset: Dataset):
    """Augmented design matrix plus tie-resolved times, order re-checked."""
    t = resolve_ties(dataset.t, dataset.y)
    if np.any(np.diff(t) < 0):
        raise ValueError("dataset must be sorted ascending by t")
    return augment(dataset.x), dataset.y.astype(float), t


def compute_H(w: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Per-sample cumulative hazard H(t_i) at fixed coefficients.

    H(t_i) = sum_{j<=i} y_j / sum_{k>=j} exp(w.x_k): one backward pass for
    the risk-set sums, one forward prefix sum.  Non-decreasing by
    construction.
    """
    xa, y, _ = _prepared(dataset)
    if y.sum() == 0:
        raise ValueError("all samples censored: H would be identically zero")
    e = link_g(xa @ np.asarray(w, dtype=float))
    risk = np.cumsum(e[::-1])[::-1]
    return np.cumsum(y / risk)


def loss(w: np.ndarray, H: np.ndarray, dataset: Dataset) -> float:
    """Negative log-likelihood with the piecewise-constant baseline hazard.

    h(t_i) is the slope of H over (t_{i-1}, t_i]; its log enters only at
    observed samples.
    """
    xa, y, t = _prepared(dataset)
    H = np.asarray(H, dtype=float)
    z = np.clip(xa @ np.asarray(w, dtype=float), -_CLAMP, _CLAMP)
    dH = np.diff(H, prepend=0.0)
    dt = np.diff(t, prepend=0.0)
    obs = y == 1
    if np.any(obs & ((dH <= 0) | (dt <= 0))):
        raise ValueError(
            "zero hazard increment at an observed event (tie resolution failed)"
        )
    log_h = np.zeros_like(H)
    log_h[obs] = np.log(dH[obs] / dt[obs])
    return float(np.sum(np.exp(z) * H - y * (z + log_h)))


def _w_objective(w, xa, y, H):
    z = np.clip(xa @ w, -_CLAMP, _CLAMP)
    e = np.exp(z)
    value = float(np.sum(e * H - y * z))
    grad = xa.T @ (e * H - y)
    return value, grad


def optimize_w(dataset: Dataset, H: np.ndarray, w_init: np.ndarray,
               config: FitConfig = FitConfig()) -> np.ndarray:
    """Minimize the coefficient part of the loss at fixed H (convex in w).

    Quasi-Newton descent, stopping when the gradient max-norm falls below
    the configured tolerance or the step limit is hit; deterministic given
    its inputs.
    """
    xa, y, _ = _prepared(dataset)
    H = np.asarray(H, dtype=float)
    res = minimize(
        _w_objective, np.asarray(w_init, dtype=float), args=(xa, y, H),
        jac=True, method="L-BFGS-B",
        options={
            "maxiter": config.inner_max_steps,
            "gtol": config.inner_grad_tol,
            "ftol": 1e-14,
        },
    )
    if not np.isfinite(res.fun):
        raise FloatingPointError(
            "non-finite objective while optimizing w; are the features standardized?"
        )
    return res.x


@dataclass
class NpGlmModel:
    """Fitted model: coefficients plus the tabulated cumulative hazard.

    ``w`` has d+1 entries, the last being the bias on an implicit constant
    feature.  ``event_times``/``H`` tabulate the cumulative hazard at the
    distinct (tie-resolved) training times.  Queries take raw-space
    feature vectors; the stored standardization is applied internally.
    """

    w: np.ndarray
    event_times: np.ndarray
    H: np.ndarray
    standardization: Standardization
    unit: str = ""
    loss_trace: list[float] = field(default_factory=list)
    converged: bool = True

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.event_times = np.asarray(self.event_times, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        if self.event_times.ndim != 1 or self.H.shape != self.event_times.shape:
            raise ValueError("event_times and H must be equal-length vectors")
        if len(self.event_times):
            if np.any(np.diff(self.event_times) <= 0):
                raise ValueError("event_times must be strictly increasing")
            if np.any(np.diff(self.H) < 0) or self.H[0] < 0:
                raise ValueError("H must be non-negative and non-decreasing")

    @property
    def d(self) -> int:
        return len(self.w) - 1

    @property
    def horizon(self) -> float:
        return float(self.event_times[-1])

    def score(self, x) -> np.ndarray:
        """Linear predictor w.x (+ bias) for raw-space feature rows."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return augment(self.standardization.apply(x)) @ self.w

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """Coefficients mapped back to raw feature space: (weights, bias)."""
        wf = self.w[:-1] / self.standardization.std
        bias = float(self.w[-1] - np.sum(self.w[:-1] * self.standardization.mean
                                         / self.standardization.std))
        return wf, bias

    def to_json(self) -> dict:
        return {
            "family": "npglm",
            "w": self.w.tolist(),
            "event_times": self.event_times.tolist(),
            "H": self.H.tolist(),
            "standardization": self.standardization.to_dict(),
            "unit": self.unit,
            "loss_trace": list(self.loss_trace),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NpGlmModel":
        return cls(
            w=np.asarray(doc["w"], dtype=float),
            event_times=np.asarray(doc["event_times"], dtype=float),
            H=np.asarray(doc["H"], dtype=float),
            standardization=Standardization.from_dict(doc["standardization"]),
            unit=doc.get("unit", ""),
            loss_trace=[float(v) for v in doc.get("loss_trace", [])],
            converged=bool(doc.get("converged", True)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "NpGlmModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _dedupe_knots(t: np.ndarray, H: np.ndarray):
    """Collapse duplicate times (censored ties) keeping the last H value."""
    keep = np.ones(len(t), dtype=bool)
    keep[:-1] = np.diff(t) > 0
    return t[keep], H[keep]


def fit(dataset: Dataset, config: FitConfig = FitConfig(), unit: str = "",
        standardize: bool = True) -> NpGlmModel:
    """Alternating fit: closed-form H update, then convex descent over w.

    Starts from seeded standard-normal coefficients and stops when the
    summed loss changes by less than the threshold, or at the iteration
    cap (returned with ``converged=False``).  The recorded loss trace is
    non-increasing.  A dataset without a recorded feature transform is
    standardized first (unless disabled).
    """
    if dataset.n_observed == 0:
        raise ValueError("cannot fit: dataset has no observed samples")
    if dataset.standardization is None and standardize and dataset.d > 0:
        stats = Standardization.fit(dataset.x)
        dataset = Dataset(x=stats.apply(dataset.x), y=dataset.y, t=dataset.t,
                          pairs=dataset.pairs, standardization=stats)
    rng = np.random.default_rng(config.seed)
    w = rng.standard_normal(dataset.d + 1)
    trace: list[float] = []
    prev = np.inf
    converged = False
    for _ in range(config.max_outer):
        H = compute_H(w, dataset)
        w = optimize_w(dataset, H, w_init=w, config=config)
        value = loss(w, H, dataset)
        if trace and value > trace[-1] + 1e-9 * max(1.0, abs(trace[-1])):
            raise FloatingPointError("loss increased across an outer iteration")
        trace.append(value)
        if abs(value - prev) < config.threshold:
            converged = True
            break
        prev = value
    _, _, t_spread = _prepared(dataset)
    knots_t, knots_H = _dedupe_knots(t_spread, H)
    stats = dataset.standardization or Standardization.identity(dataset.d)
    return NpGlmModel(
        w=w, event_times=knots_t, H=knots_H, standardization=stats,
        unit=unit, loss_trace=trace, converged=converged,
    )


def interpolate_H(model: NpGlmModel, t: float) -> float:
    """Piecewise-linear cumulative hazard through (0, 0) and the tabulated
    knots; clamped to H(t_N) beyond the training horizon."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return float(np.interp(t, np.concatenate(([0.0], model.event_times)),
                           np.concatenate(([0.0], model.H))))


def ranged_probability(model: NpGlmModel, x, t_a: float, t_b: float) -> float:
    """Probability that the event time falls in [t_a, t_b] given features x."""
    if not 0 <= t_a <= t_b:
        raise ValueError("need 0 <= t_a <= t_b")
    g = link_g(model.score(x))[0]
    p = np.exp(-g * interpolate_H(model, t_a)) - np.exp(-g * interpolate_H(model, t_b))
    return float(min(max(p, 0.0), 1.0))


def quantile_times(model: NpGlmModel, x, alpha: float):
    """Vectorized quantile over feature rows: (times, horizon_exceeded).

    Inverts the piecewise-linear cumulative hazard at target
    H* = -log(1-alpha)/g(w.x); rows whose target exceeds the tabulated
    range get the training horizon back as a lower bound, flagged.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    g = link_g(model.score(x))
    h_star = -np.log1p(-alpha) / g
    t_knots = np.concatenate(([0.0], model.event_times))
    h_knots = np.concatenate(([0.0], model.H))
    top = h_knots[-1]
    exceeded = h_star > top
    hs = np.where(exceeded, top, h_star)
    k = np.clip(np.searchsorted(h_knots, hs, side="right") - 1, 0, len(h_knots) - 2)
    denom = h_knots[k + 1] - h_knots[k]
    frac = np.where(denom > 0, (hs - h_knots[k]) / np.where(denom > 0, denom, 1.0), 1.0)
    times = t_knots[k] + frac * (t_knots[k + 1] - t_knots[k])
    return times, exceeded


def quantile(model: NpGlmModel, x, alpha: float) -> TimeEstimate:
    """Smallest t with P(T <= t | x) = alpha; alpha = 0.5 is the median."""
    times, exceeded = quantile_times(model, np.atleast_2d(np.asarray(x, dtype=float)), alpha)
    return TimeEstimate(float(times[0]), bool(exceeded[0]))


def predict_median(model: NpGlmModel, x) -> TimeEstimate:
    return quantile(model, x, 0.5)


def sample_time(model: NpGlmModel, x, rng: np.random.Generator) -> TimeEstimate:
    """Inverse-transform draw from the fitted time distribution at x.

    Returns the first tabulated time whose conditional survival falls at
    or below the uniform draw; draws surviving past the horizon come back
    flagged, with the horizon as a lower bound.
    """
    u = float(rng.uniform())
    g = link_g(model.score(x))[0]
    with np.errstate(divide="ignore"):
        h_star = -np.log(u) / g if u > 0 else np.inf
    h_knots = model.H
    if h_star > h_knots[-1]:
        return TimeEstimate(float(model.event_times[-1]), True)
    k = int(np.searchsorted(h_knots, h_star, side="left"))
    return TimeEstimate(float(model.event_times[k]), False)
