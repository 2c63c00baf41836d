"""Treatment/control selection for the relative-distance and shock designs."""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, fields
from statistics import fmean
from typing import Iterable, Mapping, Optional, Sequence

from blockdisc.assignment import Assignment, normalize_key
from blockdisc.blocks import Block
from blockdisc.ingest import PollingPlace, VoteMethod, VoterRecord

BASELINE_GAP_MILES = 0.25
TIE_MILES = 1e-9
DEFAULT_WINDOWS = (-math.inf, 0.0, 0.1, 0.25, 0.5, 1.0)

# Drop reasons.
NOT_IN_2012 = "NOT_IN_2012"
FACES_CHANGED = "FACES_CHANGED"
TIED_DISTANCE = "TIED_DISTANCE"
BOTH_CHANGED = "BOTH_CHANGED"
NEITHER_CHANGED = "NEITHER_CHANGED"
BASELINE_IMBALANCE = "BASELINE_IMBALANCE"
FACE_SPLIT_2012 = "FACE_SPLIT_2012"


class DesignKind(enum.Enum):
    DISTANCE = "distance"
    SHOCK = "shock"


class WindowMode(enum.Enum):
    SHOCK_GAP = "ShockGap"
    DISTANCE_GAP = "DistanceGap"


@dataclass(frozen=True)
class DesignRow:
    voter_id: str
    block_id: str
    household_key: str
    state: str
    treatment: bool
    outcome_in_person: int
    outcome_substitution: int
    outcome_any: int
    face_avg_distance_2016: float
    face_avg_distance_2012: float
    distance_gap: float


DESIGN_FIELDS = tuple(f.name for f in fields(DesignRow))


def outcome_coding(method: VoteMethod) -> tuple[int, int, int]:
    """(in_person, substitution, any) indicators for one recorded vote."""
    if method is VoteMethod.IN_PERSON:
        return 1, 0, 1
    if method in (VoteMethod.MAIL, VoteMethod.EARLY):
        return 0, 1, 1
    return 0, 0, 0


def _face_mean(ids: Sequence[str], assigns: Mapping[str, Assignment]) -> float:
    return fmean(assigns[i].distance for i in ids)


def _rows(block: Block, treated_place: str, voters: Mapping[str, VoterRecord],
          mean16: Mapping[str, float], mean12: Mapping[str, float], gap: float) -> list[DesignRow]:
    out = []
    bid = str(block.block_id)
    for place, ids in block.faces.items():
        for i in ids:
            v = voters[i]
            ip, sub, anyv = outcome_coding(v.vote_2016)
            out.append(DesignRow(
                voter_id=i, block_id=bid, household_key=v.household_key, state=v.state,
                treatment=place == treated_place, outcome_in_person=ip,
                outcome_substitution=sub, outcome_any=anyv,
                face_avg_distance_2016=mean16[place], face_avg_distance_2012=mean12[place],
                distance_gap=gap,
            ))
    return out


def select_distance_design(blocks_2016: Iterable[Block], assignments_2012: Iterable[Assignment],
                           assignments_2016: Iterable[Assignment], voters: Mapping[str, VoterRecord]
                           ) -> tuple[list[DesignRow], list[tuple[str, str]]]:
    """
    Farther face is treated, nearer face is control.

    Faces come from the 2016 blocks; a block is kept only if every member had
    the same place in 2012. Face means use 2016 distances. ``voters`` supplies
    household, state and vote history (the 2016 snapshot).
    """
    a12 = {a.voter_id: a for a in assignments_2012}
    a16 = {a.voter_id: a for a in assignments_2016}
    rows: list[DesignRow] = []
    drops: list[tuple[str, str]] = []
    for block in sorted(blocks_2016, key=lambda b: str(b.block_id)):
        bid = str(block.block_id)
        if any(i not in a12 for i in block.members):
            drops.append((bid, NOT_IN_2012))
            continue
        if any(a12[i].place_id != place for place, ids in block.faces.items() for i in ids):
            drops.append((bid, FACES_CHANGED))
            continue
        mean16 = {p: _face_mean(ids, a16) for p, ids in block.faces.items()}
        mean12 = {p: _face_mean(ids, a12) for p, ids in block.faces.items()}
        (p1, m1), (p2, m2) = mean16.items()
        if abs(m1 - m2) < TIE_MILES:
            drops.append((bid, TIED_DISTANCE))
            continue
        treated, control = (p1, p2) if m1 > m2 else (p2, p1)
        rows.extend(_rows(block, treated, voters, mean16, mean12, mean16[treated] - mean16[control]))
    return rows, drops


def _single_prior_place(block: Block, a12: Mapping[str, Assignment]) -> Optional[dict[str, str]]:
    out = {}
    for place, ids in block.faces.items():
        prev = {a12[i].place_id for i in ids}
        if len(prev) != 1:
            return None
        out[place] = prev.pop()
    return out


def select_shock_design(blocks_2016: Iterable[Block], assignments_2012: Iterable[Assignment],
                        assignments_2016: Iterable[Assignment], voters: Mapping[str, VoterRecord],
                        baseline_gap_miles: float = BASELINE_GAP_MILES, baseline_strict: bool = True
                        ) -> tuple[list[DesignRow], list[tuple[str, str]]]:
    """
    The face whose polling place changed between 2012 and 2016 is treated.

    Faces are the 2016 assignment groups; each face must have had a single
    2012 place. Exactly one face may change. In 2012 the faces must have
    shared one place or had mean distances closer than ``baseline_gap_miles``
    (``<=`` when ``baseline_strict`` is False). distance_gap is the treated
    face's mean distance to its new place minus that to its old place.
    """
    a12 = {a.voter_id: a for a in assignments_2012}
    a16 = {a.voter_id: a for a in assignments_2016}
    rows: list[DesignRow] = []
    drops: list[tuple[str, str]] = []
    for block in sorted(blocks_2016, key=lambda b: str(b.block_id)):
        bid = str(block.block_id)
        if any(i not in a12 for i in block.members):
            drops.append((bid, NOT_IN_2012))
            continue
        old_place = _single_prior_place(block, a12)
        if old_place is None:
            drops.append((bid, FACE_SPLIT_2012))
            continue
        changed = [p for p in block.faces if old_place[p] != p]
        if len(changed) == 2:
            drops.append((bid, BOTH_CHANGED))
            continue
        if not changed:
            drops.append((bid, NEITHER_CHANGED))
            continue
        treated = changed[0]
        control = next(p for p in block.faces if p != treated)
        mean16 = {p: _face_mean(ids, a16) for p, ids in block.faces.items()}
        mean12 = {p: _face_mean(ids, a12) for p, ids in block.faces.items()}
        if old_place[treated] != old_place[control]:
            diff = abs(mean12[treated] - mean12[control])
            ok = diff < baseline_gap_miles if baseline_strict else diff <= baseline_gap_miles
            if not ok:
                drops.append((bid, BASELINE_IMBALANCE))
                continue
        rows.extend(_rows(block, treated, voters, mean16, mean12, mean16[treated] - mean12[treated]))
    return rows, drops


def window_subset(rows: Iterable[DesignRow], threshold: float,
                  mode: WindowMode = WindowMode.DISTANCE_GAP) -> list[DesignRow]:
    """
    Keep whole blocks whose distance_gap exceeds ``threshold``.

    ``mode`` only documents which gap the rows carry; the rule is the same.
    """
    rows = list(rows)
    gap_of: dict[str, float] = {}
    for r in rows:
        gap_of.setdefault(r.block_id, r.distance_gap)
    keep = {b for b, g in gap_of.items() if g > threshold}
    return [r for r in rows if r.block_id in keep]


# --------------------------------------------------------------------------
# shock types
# --------------------------------------------------------------------------

REMOVED = "Removed"
ADDED = "Added"
SAME = "Same"


@dataclass(frozen=True)
class CountyShock:
    state: str
    county: str
    n_2012: int
    n_2016: int
    classification: str
    flagged: bool


@dataclass(frozen=True)
class ShockTypeSummary:
    counties: tuple[CountyShock, ...]
    pct_counties: Mapping[str, float]
    pct_registrants: Optional[Mapping[str, float]]

    def to_dict(self) -> dict:
        return {
            "counties": [asdict(c) for c in self.counties],
            "pct_counties": dict(self.pct_counties),
            "pct_registrants": None if self.pct_registrants is None else dict(self.pct_registrants),
        }


def classify_shock_types(places_2012: Iterable[PollingPlace], places_2016: Iterable[PollingPlace],
                         registrants: Optional[Mapping[tuple[str, str], int]] = None) -> ShockTypeSummary:
    """
    Classify counties by the change in the number of distinct precinct names.

    ``registrants`` maps (state, county) to a registrant count used for the
    registrant-share column; without it that column is None. Counties seen in
    only one year are compared against zero and flagged.
    """
    names: dict[int, dict[tuple[str, str], set[str]]] = {2012: defaultdict(set), 2016: defaultdict(set)}
    for year, places in ((2012, places_2012), (2016, places_2016)):
        for p in places:
            key = (p.state.upper(), normalize_key(p.county))
            names[year][key].add(normalize_key(p.precinct))
    counties = []
    for key in sorted(set(names[2012]) | set(names[2016])):
        n12, n16 = len(names[2012].get(key, ())), len(names[2016].get(key, ()))
        cls = REMOVED if n16 < n12 else ADDED if n16 > n12 else SAME
        counties.append(CountyShock(key[0], key[1], n12, n16, cls, n12 == 0 or n16 == 0))

    def shares(weights: Sequence[float]) -> dict[str, float]:
        total = math.fsum(weights)
        acc = Counter()
        for c, w in zip(counties, weights):
            acc[c.classification] += w
        return {k: (100.0 * acc[k] / total if total else 0.0) for k in (REMOVED, ADDED, SAME)}

    pct_c = shares([1.0] * len(counties))
    pct_r = None
    if registrants is not None:
        norm = {(s.upper(), normalize_key(c)): n for (s, c), n in registrants.items()}
        pct_r = shares([float(norm.get((c.state, c.county), 0)) for c in counties])
    return ShockTypeSummary(tuple(counties), pct_c, pct_r)


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_design(rows: Iterable[DesignRow], path_or_buf) -> None:
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DESIGN_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in DESIGN_FIELDS])
    finally:
        if own:
            fh.close()


def read_design(path_or_buf) -> list[DesignRow]:
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, newline="", encoding="utf-8") if own else path_or_buf
    try:
        out = []
        for d in csv.DictReader(fh):
            out.append(DesignRow(
                voter_id=d["voter_id"], block_id=d["block_id"], household_key=d["household_key"],
                state=d["state"], treatment=d["treatment"] == "1",
                outcome_in_person=int(d["outcome_in_person"]),
                outcome_substitution=int(d["outcome_substitution"]),
                outcome_any=int(d["outcome_any"]),
                face_avg_distance_2016=float(d["face_avg_distance_2016"]),
                face_avg_distance_2012=float(d["face_avg_distance_2012"]),
                distance_gap=float(d["distance_gap"]),
            ))
        return out
    finally:
        if own:
            fh.close()


def design_to_text(rows: Iterable[DesignRow]) -> str:
    buf = io.StringIO()
    write_design(rows, buf)
    return buf.getvalue()
