"""Balance statistics and descriptive summaries over design rows."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from blockdisc.designs import DesignKind, DesignRow, outcome_coding
from blockdisc.errors import DiagnosticsError
from blockdisc.estimator import EffectEstimate
from blockdisc.ingest import VoterRecord

GAP_BIN_MILES = 0.1
MISSING_CATEGORY = "(missing)"


@dataclass(frozen=True)
class BalanceEntry:
    """
    One treated-vs-control comparison.

    For ``kind="proportion"`` treated/control are category shares and
    abs_diff lies in [-1, 1]; for ``kind="mean"`` they are group means of a
    numeric covariate and abs_diff is the raw mean difference. pct_diff is
    None when the control value is zero.
    """

    characteristic: str
    category: str
    treated: float
    control: float
    pct_diff: Optional[float]
    abs_diff: float
    n_control: int
    kind: str = "proportion"

    def to_dict(self) -> dict:
        return asdict(self)


def pct_difference(p_t: float, p_c: float) -> Optional[float]:
    return None if p_c == 0 else (p_t - p_c) / p_c


def _split(rows: Iterable[DesignRow], voters: Mapping[str, VoterRecord]):
    treated, control = [], []
    for r in rows:
        (treated if r.treatment else control).append(voters[r.voter_id])
    return treated, control


def _proportion_entries(name: str, treated_labels: Sequence[str], control_labels: Sequence[str]
                        ) -> list[BalanceEntry]:
    ct, cc = Counter(treated_labels), Counter(control_labels)
    nt, nc = len(treated_labels), len(control_labels)
    out = []
    for cat in sorted(set(ct) | set(cc)):
        p_t = ct[cat] / nt if nt else 0.0
        p_c = cc[cat] / nc if nc else 0.0
        out.append(BalanceEntry(name, cat, p_t, p_c, pct_difference(p_t, p_c), p_t - p_c, cc[cat]))
    return out


def balance_table(rows: Iterable[DesignRow], voters: Mapping[str, VoterRecord]) -> list[BalanceEntry]:
    """
    Treated-vs-control shares for every (characteristic, category) pair.

    Categorical characteristics come from ``VoterRecord.demographics``;
    ``home_sale_price`` is summarised as group means.
    """
    treated, control = _split(rows, voters)
    names = sorted({k for v in treated + control for k in v.demographics})
    out: list[BalanceEntry] = []
    for name in names:
        out.extend(_proportion_entries(
            name,
            [v.demographics.get(name) or MISSING_CATEGORY for v in treated],
            [v.demographics.get(name) or MISSING_CATEGORY for v in control],
        ))
    prices_t = [v.home_sale_price for v in treated if v.home_sale_price is not None]
    prices_c = [v.home_sale_price for v in control if v.home_sale_price is not None]
    if prices_t and prices_c:
        m_t, m_c = fmean(prices_t), fmean(prices_c)
        out.append(BalanceEntry("home_sale_price", "mean", m_t, m_c, pct_difference(m_t, m_c),
                                m_t - m_c, len(prices_c), kind="mean"))
    return out


def historical_balance(rows: Iterable[DesignRow], voters: Mapping[str, VoterRecord],
                       design: DesignKind | str) -> list[BalanceEntry]:
    """
    Balance on 2012 voting behaviour.

    Only meaningful for the shock design, where 2012 precedes treatment; for
    the distance design 2012 is already treated and WRONG_DESIGN is raised.
    """
    if DesignKind(design) is not DesignKind.SHOCK:
        raise DiagnosticsError("2012 outcomes are post-treatment in the distance design",
                               code="WRONG_DESIGN")
    treated, control = _split(rows, voters)
    out = []
    for j, label in enumerate(("in_person", "substitution", "any")):
        p_t = fmean(outcome_coding(v.vote_2012)[j] for v in treated) if treated else 0.0
        p_c = fmean(outcome_coding(v.vote_2012)[j] for v in control) if control else 0.0
        n_c = sum(outcome_coding(v.vote_2012)[j] for v in control)
        out.append(BalanceEntry("vote_2012", label, p_t, p_c, pct_difference(p_t, p_c), p_t - p_c, n_c))
    return out


@dataclass(frozen=True)
class GapSummary:
    pairs: tuple[tuple[str, float, float], ...]  # (block_id, control mean, gap)
    bins: tuple[tuple[float, float, int], ...]   # (low, high, count)
    share_below_one_mile: float
    n_blocks_total: int

    def to_dict(self) -> dict:
        return {
            "pairs": [{"block_id": b, "control_mean": c, "gap": g} for b, c, g in self.pairs],
            "bins": [{"low": lo, "high": hi, "count": n} for lo, hi, n in self.bins],
            "share_below_one_mile": self.share_below_one_mile,
            "n_blocks_total": self.n_blocks_total,
        }


def _bin_index(gap: float) -> int:
    # Nudge so values sitting on an edge (0.3 -> 2.9999...) land in the upper bin.
    return math.floor(gap / GAP_BIN_MILES + 1e-9)


def gap_summary(rows: Iterable[DesignRow], sample_size: int = 1000, seed: int = 0) -> GapSummary:
    """Control-face mean distance and additional distance for a seeded block sample."""
    per_block: dict[str, list] = {}
    for r in rows:
        entry = per_block.setdefault(r.block_id, [None, r.distance_gap])
        if not r.treatment:
            entry[0] = r.face_avg_distance_2016
    if not per_block:
        raise DiagnosticsError("no design rows", code="EMPTY")
    ids = sorted(per_block)
    if len(ids) > sample_size:
        pick = np.random.default_rng(seed).choice(len(ids), size=sample_size, replace=False)
        ids = [ids[i] for i in sorted(pick.tolist())]
    pairs = tuple((b, float(per_block[b][0]), float(per_block[b][1])) for b in ids)
    counts = Counter(_bin_index(g) for _, _, g in pairs)
    lo, hi = min(counts), max(counts)
    bins = tuple((round(k * GAP_BIN_MILES, 10), round((k + 1) * GAP_BIN_MILES, 10), counts.get(k, 0))
                 for k in range(lo, hi + 1))
    share = sum(1 for _, _, g in pairs if g < 1.0) / len(pairs)
    return GapSummary(pairs, bins, share, len(per_block))


@dataclass(frozen=True)
class StateCovariateRow:
    state: str
    outcome: str
    covariate: Optional[float]
    theta: float
    ci_low: float
    ci_high: float
    flagged: bool

    def to_dict(self) -> dict:
        return asdict(self)


def substitution_by_state(estimates: Iterable[EffectEstimate], state_covariate: Mapping[str, float]
                          ) -> list[StateCovariateRow]:
    """
    Join per-state estimates with a state-level covariate (e.g. the 2012
    substitution share). States without a covariate are flagged and sorted
    last; the rest are sorted by covariate ascending.
    """
    out = []
    for e in estimates:
        if e.scope == "pooled" or e.scope.startswith("window"):
            continue
        cov = state_covariate.get(e.scope)
        out.append(StateCovariateRow(e.scope, e.outcome, None if cov is None else float(cov),
                                     e.theta_hat, e.ci_low, e.ci_high, cov is None))
    out.sort(key=lambda r: (r.flagged, r.covariate if r.covariate is not None else 0.0, r.state, r.outcome))
    return out


def max_abs_diff(entries: Iterable[BalanceEntry]) -> float:
    vals = [abs(e.abs_diff) for e in entries if e.kind == "proportion"]
    return max(vals) if vals else 0.0


def entries_table(entries: Iterable) -> str:
    """Flat CSV of any list of dataclass rows exposing ``to_dict``."""
    entries = list(entries)
    if not entries:
        return ""
    d0 = entries[0].to_dict()
    lines = [",".join(d0)]
    for e in entries:
        lines.append(",".join("" if v is None else str(v) for v in e.to_dict().values()))
    return "\n".join(lines) + "\n"

