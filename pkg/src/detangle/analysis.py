"""Correlation of metric scores against held-out generalization scores.

Pearson r with a two-sided t-test p-value. The p-value uses the regularized
incomplete beta function evaluated with a Lentz continued fraction, so the
package needs no stats dependency at runtime.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

_BETA_EPS = 3e-14
_BETA_FPMIN = 1e-300
_BETA_MAX_ITER = 300


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int
    t: float
    p: float
    p_floored: bool

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "r": self.r,
            "n": self.n,
            "t": self.t,
            "p": self.p,
            "p_floored": self.p_floored,
        }


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_FPMIN:
        d = _BETA_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ValidationError("incomplete beta continued fraction failed to converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValidationError("incomplete beta needs a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValidationError("incomplete beta needs x in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Symmetry switch keeps the continued fraction in its fast-converging zone.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided tail probability of Student's t with df degrees of freedom."""
    if df < 1:
        raise ValidationError("t-test needs at least 1 degree of freedom")
    if math.isinf(t):
        return 0.0
    return betainc_regularized(df / 2.0, 0.5, df / (df + t * t))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson correlation with a two-sided significance test.

    Needs n >= 3 finite points and nonzero variance on both sides. A perfect
    |r| = 1 fit has an infinite t statistic; its p is reported as the
    smallest positive normal float and flagged via p_floored.
    """
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.ndim != 1 or yv.ndim != 1:
        raise ValidationError("pearson expects two 1-d sequences")
    if xv.size != yv.size:
        raise ValidationError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < 3:
        raise ValidationError("pearson needs at least 3 points")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise ValidationError("pearson inputs must be finite")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("pearson is undefined for a zero-variance input")
    r = float(np.sum(dx * dy) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    n = int(xv.size)
    df = n - 2
    if abs(r) == 1.0:
        return CorrelationResult(
            r=r, n=n, t=math.inf if r > 0 else -math.inf, p=sys.float_info.min, p_floored=True
        )
    t = r * math.sqrt(df) / math.sqrt(1.0 - r * r)
    p = t_two_sided_p(t, df)
    floored = p < sys.float_info.min
    if floored:
        p = sys.float_info.min
    return CorrelationResult(r=r, n=n, t=t, p=p, p_floored=floored)


MEAN_ALL = "mean_all"
MEAN_SUBSET = "mean_subset"
PRODUCT_SUBSET = "product_subset"
BASELINE_AGGREGATES = (MEAN_ALL, MEAN_SUBSET, PRODUCT_SUBSET)

# The corrected metrics aggregate over the chosen factor subset; the older
# baseline metrics default to their usual mean over all factors but can be
# restricted the same way for a like-for-like comparison.
SUBSET_METRICS = ("snc", "nk")


def _per_factor_block(payload: dict, metric: str) -> dict:
    block = payload.get(metric)
    if block is None:
        raise ValidationError(f"metric payload has no {metric!r} block")
    return block["per_factor"]


def _aggregate_from_payload(
    payload: dict, metric: str, subset: Sequence[str] | None, mode: str
) -> float:
    """Combine one metric's per-factor scores into a single model score."""
    per_factor = _per_factor_block(payload, metric)
    if subset is None:
        names = list(per_factor)
    else:
        missing = [name for name in subset if name not in per_factor]
        if missing:
            raise ValidationError(f"metric payload lacks factors {missing} for {metric!r}")
        names = list(subset)
    values = [float(per_factor[name]) for name in names]
    if mode == "mean":
        return float(np.mean(values))
    if mode == "product":
        out = 1.0
        for v in values:
            out *= v
        return out
    raise ValidationError(f"unknown aggregation mode {mode!r}")


def _cg_score(payload: dict) -> float:
    if "joint_both" in payload:
        return float(payload["joint_both"]["adjusted"])
    if "runs" in payload:
        averages = payload["averages"]
        if len(averages) != 1:
            raise ValidationError(
                "suite payload holds several probe kinds; correlate one at a time"
            )
        (avg,) = averages.values()
        return float(avg["joint_both_adjusted"])
    raise ValidationError("not a generalization payload (no joint_both or runs)")


def correlate_metrics_with_cg(
    metric_payloads: Sequence[dict],
    cg_payloads: Sequence[dict],
    subset: Sequence[str],
    metrics: Sequence[str] = ("snc", "nk", "mig", "sap"),
    aggregate_mode: str = "product",
    baseline_aggregate: str = MEAN_ALL,
) -> dict:
    """Correlate per-model metric aggregates against held-out joint scores.

    Position i pairs metric_payloads[i] with cg_payloads[i] (one model per
    position). snc and nk combine their per-factor scores over `subset` with
    aggregate_mode; the remaining metrics use baseline_aggregate (mean over
    all factors, or mean/product over the subset). The target score is the
    chance-adjusted joint accuracy on the excluded combination.
    """
    if len(metric_payloads) != len(cg_payloads):
        raise ValidationError(
            f"got {len(metric_payloads)} metric payloads but {len(cg_payloads)} "
            "generalization payloads"
        )
    if not subset:
        raise ValidationError("correlate needs a nonempty factor subset")
    if baseline_aggregate not in BASELINE_AGGREGATES:
        raise ValidationError(
            f"baseline_aggregate must be one of {BASELINE_AGGREGATES}, "
            f"got {baseline_aggregate!r}"
        )
    y = [_cg_score(p) for p in cg_payloads]
    out: dict = {
        "schema_version": 1,
        "subset": list(subset),
        "aggregate_mode": aggregate_mode,
        "baseline_aggregate": baseline_aggregate,
        "n_models": len(metric_payloads),
        "generalization": y,
        "per_metric": {},
    }
    for metric in metrics:
        if metric in SUBSET_METRICS:
            x = [
                _aggregate_from_payload(p, metric, subset, aggregate_mode)
                for p in metric_payloads
            ]
        elif baseline_aggregate == MEAN_ALL:
            x = [_aggregate_from_payload(p, metric, None, "mean") for p in metric_payloads]
        elif baseline_aggregate == MEAN_SUBSET:
            x = [_aggregate_from_payload(p, metric, subset, "mean") for p in metric_payloads]
        else:
            x = [
                _aggregate_from_payload(p, metric, subset, "product") for p in metric_payloads
            ]
        result = pearson(x, y)
        out["per_metric"][metric] = {
            "values": x,
            "correlation": result.to_json_dict(),
        }
    return out


def render_correlation_table(payload: dict) -> str:
    lines = [
        f"models: {payload['n_models']}   subset: {', '.join(payload['subset'])}",
        f"{'metric':<8}{'r':>9}{'t':>10}{'p':>13}",
    ]
    for metric, block in payload["per_metric"].items():
        corr = block["correlation"]
        lines.append(
            f"{metric:<8}{corr['r']:9.4f}{corr['t']:10.4f}{corr['p']:13.3e}"
        )
    return "\n".join(lines) + "\n"
