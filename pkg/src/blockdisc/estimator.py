r"""
Within-block fixed-effects regression with household-clustered errors.

The model is

.. math:: y_i = \gamma_b + \theta T_i + \epsilon_{i,h}

and :math:`\theta` is estimated by demeaning :math:`y` and :math:`T` within
each block. The variance is the CR1 cluster-robust sandwich over households,

.. math::

    \widehat{V}(\hat\theta) = \frac{G}{G-1}\frac{N-1}{N-K}
        \frac{\sum_g \left(\sum_{i \in g} \tilde T_i \hat e_i\right)^2}
             {\left(\sum_i \tilde T_i^2\right)^2}

with :math:`K` the number of blocks plus one. Only blocks with treatment
variation count toward N, K and G. ``estimate_dense_oracle`` fits the same
model with explicit block dummies and exists to check ``estimate_fe``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from blockdisc.designs import window_subset
from blockdisc.errors import EstimationError

Z_95 = 1.959964
DENSE_MAX_UNITS = 10_000


class Outcome(enum.Enum):
    IN_PERSON = "in_person"
    SUBSTITUTION = "substitution"
    ANY = "any"

    @property
    def field(self) -> str:
        return f"outcome_{self.value}"


@dataclass(frozen=True)
class EffectEstimate:
    outcome: str
    theta_hat: float
    se: float
    ci_low: float
    ci_high: float
    n_units: int
    n_blocks: int
    n_households: int
    scope: str = "pooled"

    def to_dict(self) -> dict:
        return asdict(self)


def _make(outcome: Outcome, theta: float, se: float, n: int, k_blocks: int, g: int, scope: str
          ) -> EffectEstimate:
    return EffectEstimate(outcome.value, theta, se, theta - Z_95 * se, theta + Z_95 * se,
                          n, k_blocks, g, scope)


def _codes(values: Sequence) -> tuple[np.ndarray, list]:
    uniq = sorted(set(values))
    lookup = {u: i for i, u in enumerate(uniq)}
    return np.fromiter((lookup[v] for v in values), dtype=np.int64, count=len(values)), uniq


def _arrays(rows, outcome: Outcome):
    rows = list(rows)
    blocks, _ = _codes([r.block_id for r in rows])
    households, _ = _codes([r.household_key for r in rows])
    t = np.fromiter((1.0 if r.treatment else 0.0 for r in rows), dtype=float, count=len(rows))
    y = np.fromiter((getattr(r, outcome.field) for r in rows), dtype=float, count=len(rows))
    return blocks, households, t, y


def _fsum_by_block(block_vals: np.ndarray) -> float:
    # Block codes are assigned in sorted block-id order, so this reduction order is fixed.
    return math.fsum(block_vals.tolist())


def fe_core(block: np.ndarray, household: np.ndarray, t: np.ndarray, y: np.ndarray
            ) -> tuple[float, float, int, int, int]:
    """
    Array-level within estimator.

    ``block`` and ``household`` are integer codes; returns
    ``(theta, se, n_units, n_blocks, n_households)`` counting only blocks with
    treatment variation.
    """
    block = np.asarray(block, dtype=np.int64)
    household = np.asarray(household, dtype=np.int64)
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    nb = int(block.max()) + 1 if block.size else 0
    cnt = np.bincount(block, minlength=nb).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        tbar = np.bincount(block, weights=t, minlength=nb) / cnt
        ybar = np.bincount(block, weights=y, minlength=nb) / cnt
    tt = t - tbar[block]
    yt = y - ybar[block]
    sxx_b = np.bincount(block, weights=tt * tt, minlength=nb)
    sxy_b = np.bincount(block, weights=tt * yt, minlength=nb)
    tmin = np.full(nb, np.inf)
    tmax = np.full(nb, -np.inf)
    np.minimum.at(tmin, block, t)
    np.maximum.at(tmax, block, t)
    varied = tmax > tmin
    sxx = _fsum_by_block(sxx_b[varied])
    if not varied.any() or sxx <= 0.0:
        raise EstimationError("no within-block treatment variation", code="NO_VARIATION")
    theta = _fsum_by_block(sxy_b[varied]) / sxx

    use = varied[block]
    n = int(use.sum())
    k_blocks = int(varied.sum())
    hh_used, hh_codes = np.unique(household[use], return_inverse=True)
    g = int(hh_used.size)
    if g < 2:
        raise EstimationError(f"{g} household cluster(s)", code="TOO_FEW_CLUSTERS")
    resid = yt[use] - theta * tt[use]
    score = np.bincount(hh_codes, weights=tt[use] * resid, minlength=g)
    meat = math.fsum((score * score).tolist())
    k = k_blocks + 1
    if n - k <= 0:
        raise EstimationError(f"N={n} leaves no residual degrees of freedom for K={k}",
                              code="TOO_FEW_CLUSTERS")
    c = (g / (g - 1.0)) * ((n - 1.0) / (n - k))
    var = c * meat / (sxx * sxx)
    return theta, math.sqrt(max(var, 0.0)), n, k_blocks, g


def estimate_fe(rows, outcome: Outcome | str, scope: str = "pooled") -> EffectEstimate:
    """Within-block estimate of the treatment effect on one outcome."""
    outcome = Outcome(outcome)
    rows = list(rows)
    if not rows:
        raise EstimationError("no rows", code="NO_VARIATION")
    theta, se, n, kb, g = fe_core(*_arrays(rows, outcome))
    return _make(outcome, theta, se, n, kb, g, scope)


def estimate_dense_oracle(rows, outcome: Outcome | str, scope: str = "pooled") -> EffectEstimate:
    """
    Brute-force fit with a block-dummy design matrix.

    Solves least squares through an SVD of ``[D | T]`` and forms the full
    CR1 sandwich matrix; the treatment coefficient's entry is reported.
    """
    outcome = Outcome(outcome)
    rows = list(rows)
    if len(rows) > DENSE_MAX_UNITS:
        raise EstimationError(f"{len(rows)} rows exceeds dense limit {DENSE_MAX_UNITS}", code="TOO_LARGE")
    if not rows:
        raise EstimationError("no rows", code="SINGULAR")
    block, household, t, y = _arrays(rows, outcome)
    nb = int(block.max()) + 1
    n_all = len(rows)
    x = np.zeros((n_all, nb + 1))
    x[np.arange(n_all), block] = 1.0
    x[:, nb] = t

    u, s, vt = np.linalg.svd(x, full_matrices=False)
    tol = s.max() * max(x.shape) * np.finfo(float).eps
    if (s <= tol).any():
        raise EstimationError("design matrix is rank deficient", code="SINGULAR")
    beta = vt.T @ ((u.T @ y) / s)
    resid = y - x @ beta
    bread = (vt.T / s**2) @ vt  # (X'X)^-1

    # Counting rule shared with estimate_fe: blocks without treatment variation drop out.
    varied_blocks = {b for b in range(nb) if np.ptp(t[block == b]) > 0}
    use = np.array([b in varied_blocks for b in block])
    n = int(use.sum())
    k_blocks = len(varied_blocks)
    g = len(set(household[use].tolist()))
    if g < 2:
        raise EstimationError(f"{g} household cluster(s)", code="TOO_FEW_CLUSTERS")
    k = k_blocks + 1
    if n - k <= 0:
        raise EstimationError(f"N={n} leaves no residual degrees of freedom for K={k}",
                              code="TOO_FEW_CLUSTERS")

    meat = np.zeros((nb + 1, nb + 1))
    for h in np.unique(household):
        idx = household == h
        sg = x[idx].T @ resid[idx]
        meat += np.outer(sg, sg)
    c = (g / (g - 1.0)) * ((n - 1.0) / (n - k))
    vcov = c * bread @ meat @ bread
    theta = float(beta[nb])
    se = math.sqrt(max(float(vcov[nb, nb]), 0.0))
    return _make(outcome, theta, se, n, k_blocks, g, scope)


def estimate_all(rows, outcomes: Iterable[Outcome | str] = tuple(Outcome), by_state: bool = True,
                 windows: Optional[Sequence[float]] = None) -> list[EffectEstimate]:
    """
    Pooled, per-state and per-window estimates for each outcome.

    Scopes are labelled ``pooled``, the state code, or ``window>{t}``.
    Subsets where the model cannot be fit (no variation, one household) are
    skipped.
    """
    rows = list(rows)
    outcomes = [Outcome(o) for o in outcomes]
    subsets: list[tuple[str, list]] = [("pooled", rows)]
    if by_state:
        for st in sorted({r.state for r in rows}):
            subsets.append((st, [r for r in rows if r.state == st]))
    for w in windows or ():
        if w == -math.inf:
            continue
        subsets.append((f"window>{w:g}", window_subset(rows, w)))
    out = []
    for scope, subset in subsets:
        for o in outcomes:
            try:
                out.append(estimate_fe(subset, o, scope=scope))
            except EstimationError:
                continue
    return out


def estimates_table(estimates: Iterable[EffectEstimate]) -> str:
    """Flat CSV (scope, outcome, theta, ci_low, ci_high, n) for plotting."""
    lines = ["scope,outcome,theta,ci_low,ci_high,n"]
    for e in estimates:
        lines.append(f"{e.scope},{e.outcome},{e.theta_hat!r},{e.ci_low!r},{e.ci_high!r},{e.n_units}")
    return "\n".join(lines) + "\n"
