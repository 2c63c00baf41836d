"""Registrant to polling-place matching by (state, county, precinct)."""

from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from blockdisc.ingest import PollingPlace, VoterRecord
from blockdisc.spatial import distance_miles

NO_PLACE = "NO_PLACE"
AMBIGUOUS_PLACE = "AMBIGUOUS_PLACE"
MISSING_GEOCODE = "MISSING_GEOCODE"
TOO_FAR = "TOO_FAR"

MAX_ASSIGNMENT_MILES = 25.0


@dataclass(frozen=True)
class Assignment:
    voter_id: str
    election_year: int
    place_id: str
    distance: float


@dataclass(frozen=True)
class AssignmentReject:
    voter_id: str
    election_year: int
    reason: str


def normalize_key(text: str) -> str:
    """Trim, collapse internal whitespace, casefold."""
    return " ".join((text or "").split()).casefold()


def jurisdiction_key(state: str, county: str, precinct: str) -> tuple[str, str, str]:
    return normalize_key(state), normalize_key(county), normalize_key(precinct)


def assign(voters: Iterable[VoterRecord], places: Iterable[PollingPlace], year: int,
           max_miles: float = MAX_ASSIGNMENT_MILES
           ) -> tuple[list[Assignment], list[AssignmentReject]]:
    """
    Assign each voter to the unique polling place sharing its jurisdiction key.

    A distance of exactly ``max_miles`` is kept. Both outputs are sorted by
    voter_id, so input order does not matter.
    """
    index: dict[tuple, list[PollingPlace]] = defaultdict(list)
    for p in places:
        if p.election_year == year:
            index[jurisdiction_key(p.state, p.county, p.precinct)].append(p)

    assigned: list[Assignment] = []
    rejects: list[AssignmentReject] = []
    for v in sorted(voters, key=lambda v: v.voter_id):
        matches = index.get(jurisdiction_key(v.state, v.county, v.precinct), [])
        if not matches:
            rejects.append(AssignmentReject(v.voter_id, year, NO_PLACE))
            continue
        if len(matches) > 1:
            rejects.append(AssignmentReject(v.voter_id, year, AMBIGUOUS_PLACE))
            continue
        place = matches[0]
        if v.geocode is None or place.geocode is None:
            rejects.append(AssignmentReject(v.voter_id, year, MISSING_GEOCODE))
            continue
        d = distance_miles(v.geocode, place.geocode)
        if d > max_miles:
            rejects.append(AssignmentReject(v.voter_id, year, TOO_FAR))
            continue
        assigned.append(Assignment(v.voter_id, year, place.place_id, d))
    return assigned, rejects


def write_assignments(assignments: Sequence[Assignment], path_or_buf) -> None:
    """Columns voter_id, year, place_id, distance_miles (6 decimal places)."""
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["voter_id", "year", "place_id", "distance_miles"])
        for a in assignments:
            w.writerow([a.voter_id, a.election_year, a.place_id, f"{a.distance:.6f}"])
    finally:
        if own:
            fh.close()


def read_assignments(path_or_buf) -> list[Assignment]:
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, newline="", encoding="utf-8") if own else path_or_buf
    try:
        return [Assignment(r["voter_id"], int(r["year"]), r["place_id"], float(r["distance_miles"]))
                for r in csv.DictReader(fh)]
    finally:
        if own:
            fh.close()


def assignments_to_text(assignments: Sequence[Assignment]) -> str:
    buf = io.StringIO()
    write_assignments(assignments, buf)
    return buf.getvalue()
