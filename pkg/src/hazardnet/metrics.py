"""Error and ranking metrics for predicted event times under censoring.

Point metrics compare predicted against true times over the observed
samples only; a censored true time is just a lower bound, so absolute
errors against it are not defined.  The concordance index keeps censored
samples as the later element of comparable pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["EvalReport", "point_metrics", "concordance_index", "evaluate"]


@dataclass
class EvalReport:
    mae: float
    mre: float
    rmse: float
    msle: float
    mdae: float
    acc_at: dict = field(default_factory=dict)
    ci: float | None = None

    def to_dict(self) -> dict:
        doc = {
            "mae": self.mae, "mre": self.mre, "rmse": self.rmse,
            "msle": self.msle, "mdae": self.mdae,
            "acc_at": {str(k): v for k, v in self.acc_at.items()},
        }
        if self.ci is not None:
            doc["ci"] = self.ci
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def flat_row(self) -> tuple[list[str], list[float]]:
        """Header and value lists for one CSV row (sweep aggregation)."""
        header = ["mae", "mre", "rmse", "msle", "mdae"]
        values = [self.mae, self.mre, self.rmse, self.msle, self.mdae]
        for thr in sorted(self.acc_at):
            header.append(f"acc@{thr:g}")
            values.append(self.acc_at[thr])
        if self.ci is not None:
            header.append("ci")
            values.append(self.ci)
        return header, values


def _check_lengths(t_true, y, t_pred):
    t_true = np.asarray(t_true, dtype=float)
    y = np.asarray(y)
    t_pred = np.asarray(t_pred, dtype=float)
    if not (len(t_true) == len(y) == len(t_pred)):
        raise ValueError("truth and prediction lengths differ")
    return t_true, y, t_pred


def point_metrics(t_true, y, t_pred, thresholds=()) -> EvalReport:
    """Observed-only error metrics; ACC counts errors strictly below each
    threshold.  MDAE of an even count is the mean of the middle two."""
    t_true, y, t_pred = _check_lengths(t_true, y, t_pred)
    obs = y == 1
    if not obs.any():
        raise ValueError("no observed samples to score")
    t, p = t_true[obs], t_pred[obs]
    err = np.abs(p - t)
    report = EvalReport(
        mae=float(err.mean()),
        mre=float((err / t).mean()),
        rmse=float(np.sqrt((err ** 2).mean())),
        msle=float(((np.log1p(p) - np.log1p(t)) ** 2).mean()),
        mdae=float(np.median(err)),
        acc_at={float(thr): float((err < thr).mean()) for thr in thresholds},
    )
    return report


def concordance_index(t_true, y, t_pred) -> float:
    """Harrell's pairwise concordance over comparable pairs.

    (i, j) is comparable when t_i < t_j and sample i is observed;
    concordant when pred_i < pred_j, with half credit for prediction
    ties.  Censored samples enter only as the later element.
    """
    t_true, y, t_pred = _check_lengths(t_true, y, t_pred)
    concordant = 0.0
    comparable = 0
    obs_idx = np.flatnonzero(np.asarray(y) == 1)
    for i in obs_idx:
        later = t_true > t_true[i]
        m = int(later.sum())
        if m == 0:
            continue
        comparable += m
        pj = t_pred[later]
        concordant += float((t_pred[i] < pj).sum()) + 0.5 * float((t_pred[i] == pj).sum())
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return concordant / comparable


def evaluate(t_true, y, t_pred, thresholds=()) -> EvalReport:
    """Point metrics plus the concordance index in one report."""
    report = point_metrics(t_true, y, t_pred, thresholds)
    report.ci = concordance_index(t_true, y, t_pred)
    return report
