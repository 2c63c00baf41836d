"""In-memory orchestration of a full analysis run, shared by the CLI and tests."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from blockdisc.assignment import MAX_ASSIGNMENT_MILES, Assignment, AssignmentReject, assign
from blockdisc.blocks import BLOCK_PAIR_MILES, Eligible, FilterLedger, run_filter_pipeline
from blockdisc.designs import (
    BASELINE_GAP_MILES, DEFAULT_WINDOWS, DesignKind, DesignRow, ShockTypeSummary, classify_shock_types,
    select_distance_design, select_shock_design,
)
from blockdisc.diagnostics import (
    BalanceEntry, GapSummary, StateCovariateRow, balance_table, gap_summary, historical_balance,
    substitution_by_state,
)
from blockdisc.errors import DiagnosticsError, ParamsError
from blockdisc.estimator import EffectEstimate, Outcome, estimate_all
from blockdisc.geocode import GeocoderClient, validate_places
from blockdisc.ingest import PollingPlace, VoterRecord


@dataclass(frozen=True)
class Thresholds:
    block_pair_miles: float = BLOCK_PAIR_MILES
    baseline_gap_miles: float = BASELINE_GAP_MILES
    assignment_max_miles: float = MAX_ASSIGNMENT_MILES
    baseline_strict: bool = True

    def __post_init__(self):
        for name in ("block_pair_miles", "baseline_gap_miles", "assignment_max_miles"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ParamsError(f"threshold {name}={v!r} must be a positive number")


@dataclass
class DesignResult:
    kind: DesignKind
    rows: list[DesignRow]
    drops: list[tuple[str, str]]
    estimates: list[EffectEstimate] = field(default_factory=list)
    balance: list[BalanceEntry] = field(default_factory=list)
    history: list[BalanceEntry] = field(default_factory=list)
    gaps: Optional[GapSummary] = None
    by_state: list[StateCovariateRow] = field(default_factory=list)


@dataclass
class RunResult:
    places: list[PollingPlace]
    place_decisions: list
    geocoder_unavailable: list[PollingPlace]
    assignments: dict[int, list[Assignment]]
    assignment_rejects: dict[int, list[AssignmentReject]]
    eligible: Eligible
    ledger: FilterLedger
    designs: dict[str, DesignResult]
    shock_types: ShockTypeSummary
    warnings: list[str]


def assign_years(voters_2012: Sequence[VoterRecord], voters_2016: Sequence[VoterRecord],
                 places: Sequence[PollingPlace], max_miles: float = MAX_ASSIGNMENT_MILES):
    out, rej = {}, {}
    for year, voters in ((2012, voters_2012), (2016, voters_2016)):
        out[year], rej[year] = assign(voters, places, year, max_miles=max_miles)
    return out, rej


def select_design(kind: DesignKind | str, eligible: Eligible, thresholds: Thresholds = Thresholds()):
    kind = DesignKind(kind)
    blocks16, _ = eligible.blocks(2016)
    a12 = eligible.assignments[2012].values()
    a16 = eligible.assignments[2016].values()
    voters = eligible.voters[2016]
    if kind is DesignKind.DISTANCE:
        return select_distance_design(blocks16, a12, a16, voters)
    return select_shock_design(blocks16, a12, a16, voters, baseline_gap_miles=thresholds.baseline_gap_miles,
                               baseline_strict=thresholds.baseline_strict)


def describe_design(result: DesignResult, voters: Mapping[str, VoterRecord],
                    windows: Sequence[float] = DEFAULT_WINDOWS,
                    state_covariate: Optional[Mapping[str, float]] = None, seed: int = 0) -> None:
    """Fill estimates and diagnostics for a design in place; empty designs stay empty."""
    if not result.rows:
        return
    result.estimates = estimate_all(result.rows, tuple(Outcome), by_state=True, windows=windows)
    result.balance = balance_table(result.rows, voters)
    if result.kind is DesignKind.SHOCK:
        result.history = historical_balance(result.rows, voters, result.kind)
    try:
        result.gaps = gap_summary(result.rows, seed=seed)
    except DiagnosticsError:
        result.gaps = None
    if state_covariate is not None:
        result.by_state = substitution_by_state(
            [e for e in result.estimates if e.outcome == Outcome.SUBSTITUTION.value], state_covariate)


def analyze(voters_2012: Sequence[VoterRecord], voters_2016: Sequence[VoterRecord],
            places: Sequence[PollingPlace], county_flags: Mapping = None,
            client: Optional[GeocoderClient] = None, thresholds: Thresholds = Thresholds(),
            windows: Sequence[float] = DEFAULT_WINDOWS,
            state_covariate: Optional[Mapping[str, float]] = None, seed: int = 0) -> RunResult:
    """
    Run every stage from parsed records to estimates and diagnostics.

    With ``client`` set, polling places are validated first and only accepted
    geocodes are used; without it the file coordinates are trusted.
    """
    warnings: list[str] = []
    decisions, unavailable = [], []
    places = list(places)
    if client is not None:
        places, decisions, unavailable = validate_places(places, client)
        if unavailable:
            warnings.append(f"geocoder unavailable for {len(unavailable)} polling place(s); "
                            "file coordinates kept")
    assigns, rejects = assign_years(voters_2012, voters_2016, places, thresholds.assignment_max_miles)
    eligible, ledger = run_filter_pipeline(voters_2012, voters_2016, assigns[2012], assigns[2016],
                                           county_flags or {}, block_pair_miles=thresholds.block_pair_miles)
    voters16 = eligible.voters[2016]
    designs = {}
    for kind in DesignKind:
        rows, drops = select_design(kind, eligible, thresholds)
        res = DesignResult(kind, rows, drops)
        if not rows:
            warnings.append(f"{kind.value} design selected no blocks")
        describe_design(res, voters16, windows, state_covariate, seed)
        designs[kind.value] = res

    registrants = Counter((v.state, v.county) for v in voters_2016)
    shock_types = classify_shock_types([p for p in places if p.election_year == 2012],
                                       [p for p in places if p.election_year == 2016], registrants)
    return RunResult(places, decisions, unavailable, assigns, rejects, eligible, ledger, designs,
                     shock_types, warnings)
