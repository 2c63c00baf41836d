"""Block identifiers, the staged eligibility filters, and block faces."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from blockdisc.address import Address, render_address
from blockdisc.assignment import Assignment, normalize_key
from blockdisc.errors import BlockDiscError, PipelineError
from blockdisc.ingest import GeoPrecision, UspsCode, VoterRecord
from blockdisc.spatial import max_pairwise_miles

BLOCK_PAIR_MILES = 0.3

STAGE_INPUT = "Potential voters before filtering"
STAGES = (
    "Potential voters in valid voting jurisdictions (counties and polling places)",
    "Filter potential voters with valid address",
    "Filter potential voters with potential polling place assignment",
    "Filter to registered and plausible voters",
    "Filter to registrants who live on a block where all pairs of registrants live within .3 miles from one another",
    "Filter to registrants who live on the same block in 2012 as in 2016",
    "Filter to registrants in analysis",
)

RESIDENTIAL_USPS = frozenset({UspsCode.HIGH_RISE, UspsCode.BUILDING, UspsCode.APARTMENT, UspsCode.STREET_ADDRESS})

ONE_PLACE = "ONE_PLACE"
THREE_PLUS_PLACES = "THREE_PLUS_PLACES"
SMALL_FACE = "SMALL_FACE"


class ShortNumberError(BlockDiscError):
    code = "SHORT_NUMBER"


@dataclass(frozen=True, order=True)
class BlockId:
    truncated_number: str
    street_name: str
    street_type: str
    city: str
    state: str

    def __str__(self) -> str:
        parts = [self.truncated_number, self.street_name, self.street_type, self.city]
        parts = [p.replace(" ", "-") for p in parts if p]
        if self.state:
            parts.append(self.state.upper())
        return "-".join(parts)


def block_id(address: Address) -> BlockId:
    """Drop the final two digits of the street number: 123 -> "1", 2100 -> "21"."""
    num = address.street_number
    if not num.isdigit() or len(num) < 3:
        raise ShortNumberError(f"street number {num!r} must be all digits and at least 3 long")
    return BlockId(num[:-2], address.street_name, address.street_type, address.city, address.state.upper())


@dataclass(frozen=True)
class Block:
    block_id: BlockId
    members: frozenset[str]
    faces: Mapping[str, tuple[str, ...]]  # place_id -> sorted voter_ids

    def face_of(self, voter_id: str) -> str:
        for place, ids in self.faces.items():
            if voter_id in ids:
                return place
        raise KeyError(voter_id)


@dataclass(frozen=True)
class LedgerRow:
    stage: str
    n2012: int
    n2016: int


@dataclass(frozen=True)
class FilterLedger:
    rows: tuple[LedgerRow, ...]

    def to_records(self) -> list[dict]:
        return [{"stage": r.stage, "n2012": r.n2012, "n2016": r.n2016} for r in self.rows]

    def to_json(self) -> str:
        return json.dumps(self.to_records(), indent=2) + "\n"

    def to_table(self) -> str:
        width = max(len(r.stage) for r in self.rows)
        lines = [f"{'Filtering step':<{width}}  {'2012':>12}  {'2016':>12}"]
        lines.append("-" * (width + 28))
        for r in self.rows:
            lines.append(f"{r.stage:<{width}}  {r.n2012:>12,}  {r.n2016:>12,}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Eligible:
    """Registrants surviving every filter, with their per-year assignments."""

    voters: Mapping[int, Mapping[str, VoterRecord]]
    assignments: Mapping[int, Mapping[str, Assignment]]
    block_of: Mapping[str, BlockId]

    def blocks(self, year: int):
        return build_blocks(self.block_of, self.assignments[year].values(), year)


def _county_flagged(v: VoterRecord, county_flags: Mapping) -> bool:
    key = (normalize_key(v.state), normalize_key(v.county))
    return bool(county_flags.get(key, county_flags.get(normalize_key(v.county), False)))


def normalize_county_flags(flags: Mapping) -> dict:
    """Accept keys as ``county`` or ``(state, county)``; normalize both forms."""
    out = {}
    for k, v in flags.items():
        if isinstance(k, tuple):
            out[(normalize_key(k[0]), normalize_key(k[1]))] = bool(v)
        else:
            out[normalize_key(k)] = bool(v)
    return out


def _valid_address(v: VoterRecord) -> bool:
    return (
        v.address is not None
        and v.address.has_street
        and v.geocode is not None
        and v.current_address_matches_registration
        and v.geo_precision is GeoPrecision.STREET
        and v.usps_code in RESIDENTIAL_USPS
    )


def _index(voters: Iterable[VoterRecord], year: int) -> dict[str, VoterRecord]:
    out: dict[str, VoterRecord] = {}
    for v in voters:
        if v.voter_id in out:
            raise PipelineError(f"duplicate voter_id {v.voter_id!r} in {year}")
        out[v.voter_id] = v
    return out


def _index_assignments(assignments: Iterable[Assignment], voters: Mapping[str, VoterRecord],
                       year: int) -> dict[str, Assignment]:
    out: dict[str, Assignment] = {}
    for a in assignments:
        if a.voter_id not in voters:
            raise PipelineError(f"assignment for unknown voter_id {a.voter_id!r} in {year}")
        if a.voter_id in out:
            raise PipelineError(f"two assignments for voter_id {a.voter_id!r} in {year}")
        out[a.voter_id] = a
    return out


def _pairwise_ok(ids: Iterable[str], voters: Mapping[str, VoterRecord], max_miles: float
                 ) -> dict[BlockId, bool]:
    groups: dict[BlockId, list[tuple[float, float]]] = defaultdict(list)
    for vid in ids:
        v = voters[vid]
        groups[block_id(v.address)].append(v.geocode)
    return {b: max_pairwise_miles(pts) <= max_miles for b, pts in groups.items()}


def run_filter_pipeline(voters_2012: Iterable[VoterRecord], voters_2016: Iterable[VoterRecord],
                        assignments_2012: Iterable[Assignment], assignments_2016: Iterable[Assignment],
                        county_flags: Mapping, block_pair_miles: float = BLOCK_PAIR_MILES
                        ) -> tuple[Eligible, FilterLedger]:
    """
    Apply the seven eligibility stages in order and count survivors per year.

    ``county_flags`` marks counties that used vote centers in either
    election. The ledger's first row is the unfiltered input; each following
    row is the count remaining after one stage.
    """
    years = (2012, 2016)
    voters = {2012: _index(voters_2012, 2012), 2016: _index(voters_2016, 2016)}
    assigns = {
        2012: _index_assignments(assignments_2012, voters[2012], 2012),
        2016: _index_assignments(assignments_2016, voters[2016], 2016),
    }
    flags = normalize_county_flags(county_flags)
    counts: list[tuple[str, int, int]] = []
    alive = {y: sorted(voters[y]) for y in years}

    def record(stage: str):
        counts.append((stage, len(alive[2012]), len(alive[2016])))

    record(STAGE_INPUT)
    for y in years:
        alive[y] = [i for i in alive[y] if not _county_flagged(voters[y][i], flags)]
    record(STAGES[0])
    for y in years:
        alive[y] = [i for i in alive[y] if _valid_address(voters[y][i])]
    record(STAGES[1])
    for y in years:
        alive[y] = [i for i in alive[y] if i in assigns[y]]
    record(STAGES[2])
    for y in years:
        alive[y] = [i for i in alive[y] if voters[y][i].registered and not voters[y][i].deceased]
    record(STAGES[3])

    for y in years:
        keep = []
        for i in alive[y]:
            try:
                block_id(voters[y][i].address)
            except ShortNumberError:
                continue
            keep.append(i)
        ok = _pairwise_ok(keep, voters[y], block_pair_miles)
        alive[y] = [i for i in keep if ok[block_id(voters[y][i].address)]]
    record(STAGES[4])

    bid = {y: {i: block_id(voters[y][i].address) for i in alive[y]} for y in years}
    both = sorted(set(bid[2012]) & set(bid[2016]))
    same = [i for i in both if bid[2012][i] == bid[2016][i]]
    for y in years:
        alive[y] = same
    record(STAGES[5])

    bad_blocks: set[BlockId] = set()
    for y in years:
        by_addr: dict[tuple, set[str]] = defaultdict(set)
        for i in same:
            v = voters[y][i]
            place = assigns[y][i].place_id
            by_addr[(bid[y][i], "addr", render_address(v.address))].add(place)
            by_addr[(bid[y][i], "geo", v.geocode)].add(place)
        bad_blocks.update(k[0] for k, places in by_addr.items() if len(places) > 1)
    final = [i for i in same if bid[2016][i] not in bad_blocks]
    for y in years:
        alive[y] = final
    record(STAGES[6])

    eligible = Eligible(
        voters={y: {i: voters[y][i] for i in final} for y in years},
        assignments={y: {i: assigns[y][i] for i in final} for y in years},
        block_of={i: bid[2016][i] for i in final},
    )
    ledger = FilterLedger(tuple(LedgerRow(s, a, b) for s, a, b in counts))
    return eligible, ledger


def build_blocks(block_of: Mapping[str, BlockId], assignments: Iterable[Assignment], year: int,
                 min_face: int = 2) -> tuple[list[Block], list[tuple[BlockId, str]]]:
    """
    Group registrants into blocks and split each block into two faces by place.

    Blocks whose members use one place, or three or more, or whose smaller
    face has fewer than ``min_face`` members are returned as rejects.
    """
    by_block: dict[BlockId, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    for a in assignments:
        if a.election_year != year or a.voter_id not in block_of:
            continue
        by_block[block_of[a.voter_id]][a.place_id].append(a.voter_id)

    blocks: list[Block] = []
    rejects: list[tuple[BlockId, str]] = []
    for b in sorted(by_block, key=str):
        faces = by_block[b]
        if len(faces) == 1:
            rejects.append((b, ONE_PLACE))
        elif len(faces) > 2:
            rejects.append((b, THREE_PLUS_PLACES))
        elif min(len(m) for m in faces.values()) < min_face:
            rejects.append((b, SMALL_FACE))
        else:
            members = frozenset(i for m in faces.values() for i in m)
            blocks.append(Block(b, members, {p: tuple(sorted(faces[p])) for p in sorted(faces)}))
    return blocks, rejects


def ledger_from_json(text: str) -> FilterLedger:
    return FilterLedger(tuple(LedgerRow(d["stage"], int(d["n2012"]), int(d["n2016"])) for d in json.loads(text)))


__all__ = [
    "Block", "BlockId", "Eligible", "FilterLedger", "LedgerRow", "STAGES", "STAGE_INPUT",
    "block_id", "build_blocks", "run_filter_pipeline",
]
