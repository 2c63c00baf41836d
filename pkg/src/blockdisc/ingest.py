"""Voter-file and polling-place-file parsing.

Both parsers read UTF-8 delimited text (comma or tab, detected from the
header line) through a user-supplied column mapping, and return records plus
row-level rejects. Every data row ends up in exactly one of the two lists.
"""

from __future__ import annotations

import csv
import enum
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

from blockdisc.address import Address, make_address, parse_address, render_address
from blockdisc.errors import AddressError, BlockDiscError, InputError, SchemaError


class GeoPrecision(enum.Enum):
    STREET = "Street"
    EXTRAPOLATE = "Extrapolate"
    ZIPCODE = "ZipCode"
    OTHER = "Other"


class UspsCode(enum.Enum):
    HIGH_RISE = "HighRise"
    BUILDING = "Building"
    APARTMENT = "Apartment"
    STREET_ADDRESS = "StreetAddress"
    FIRM = "Firm"
    GENERAL_DELIVERY = "GeneralDelivery"
    PO_BOX = "POBox"
    RURAL_ROUTE = "RuralRoute"


class VoteMethod(enum.Enum):
    NONE = "None"
    IN_PERSON = "InPerson"
    MAIL = "Mail"
    EARLY = "Early"


# Reject reason codes.
FIELD_COUNT = "FIELD_COUNT"
MISSING_FIELD = "MISSING_FIELD"
ADDRESS_NONNUMERIC = "ADDRESS_NONNUMERIC"
UNPARSEABLE = "UNPARSEABLE"
BAD_VALUE = "BAD_VALUE"
BAD_COORDINATE = "BAD_COORDINATE"
DUPLICATE_KEY = "DUPLICATE_KEY"

DEFAULT_VOTE_CODES = {
    "": "None", "n": "None", "none": "None", "0": "None", "no": "None",
    "p": "InPerson", "i": "InPerson", "inperson": "InPerson", "in_person": "InPerson",
    "poll": "InPerson", "electionday": "InPerson",
    "m": "Mail", "a": "Mail", "mail": "Mail", "absentee": "Mail",
    "e": "Early", "early": "Early", "earlyinperson": "Early",
}

VOTER_FIELDS = (
    "voter_id", "street", "city", "state", "zip", "lat", "lon", "geo_precision",
    "usps_code", "address_match", "registered", "deceased", "precinct", "county",
    "household_key", "vote_2012", "vote_2016", "home_sale_price",
)
VOTER_REQUIRED = ("voter_id", "street", "city", "state", "precinct")

PLACE_FIELDS = (
    "place_id", "election_year", "street", "city", "state", "zip",
    "place_description", "precinct", "county", "lat", "lon",
)
PLACE_REQUIRED = ("place_id", "street", "city", "state", "precinct")

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass(frozen=True)
class FormatSpec:
    """
    Column mapping for one file layout.

    ``columns`` maps a record field name to the header it is read from.
    Optional fields that are left unmapped take documented defaults:
    registered=True, deceased=False, address_match=True,
    geo_precision=Other, usps_code=StreetAddress, household_key=the
    rendered street address, county="".
    """

    columns: Mapping[str, str]
    demographics: tuple[str, ...] = ()
    vote_codes: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_VOTE_CODES))
    default_year: Optional[int] = None

    @classmethod
    def voters(cls, demographics: Sequence[str] = (), **overrides) -> "FormatSpec":
        columns = {f: f for f in VOTER_FIELDS}
        columns.update(overrides)
        return cls(columns=columns, demographics=tuple(demographics))

    @classmethod
    def places(cls, default_year: int | None = None, **overrides) -> "FormatSpec":
        columns = {f: f for f in PLACE_FIELDS}
        columns.update(overrides)
        return cls(columns=columns, default_year=default_year)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FormatSpec":
        return cls(
            columns=dict(d["columns"]),
            demographics=tuple(d.get("demographics", ())),
            vote_codes={**DEFAULT_VOTE_CODES, **{k.lower(): v for k, v in d.get("vote_codes", {}).items()}},
            default_year=d.get("default_year"),
        )


@dataclass(frozen=True)
class Reject:
    row_number: int
    reason_code: str
    raw_line: str
    detail: str = ""


@dataclass(frozen=True)
class VoterRecord:
    voter_id: str
    address: Optional[Address]
    geocode: Optional[tuple[float, float]]
    geo_precision: GeoPrecision
    usps_code: UspsCode
    current_address_matches_registration: bool
    registered: bool
    deceased: bool
    precinct: str
    county: str
    state: str
    household_key: str
    vote_2012: VoteMethod = VoteMethod.NONE
    vote_2016: VoteMethod = VoteMethod.NONE
    demographics: Mapping[str, str] = field(default_factory=dict)
    home_sale_price: Optional[float] = None

    def to_dict(self) -> dict:
        a = self.address
        return {
            "voter_id": self.voter_id,
            "address": None if a is None else render_address(a),
            "geocode": None if self.geocode is None else list(self.geocode),
            "geo_precision": self.geo_precision.value,
            "usps_code": self.usps_code.value,
            "current_address_matches_registration": self.current_address_matches_registration,
            "registered": self.registered,
            "deceased": self.deceased,
            "precinct": self.precinct,
            "county": self.county,
            "state": self.state,
            "household_key": self.household_key,
            "vote_2012": self.vote_2012.value,
            "vote_2016": self.vote_2016.value,
            "demographics": dict(sorted(self.demographics.items())),
            "home_sale_price": self.home_sale_price,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "VoterRecord":
        return cls(
            voter_id=d["voter_id"],
            address=None if d["address"] is None else parse_address(d["address"]),
            geocode=None if d["geocode"] is None else (float(d["geocode"][0]), float(d["geocode"][1])),
            geo_precision=GeoPrecision(d["geo_precision"]),
            usps_code=UspsCode(d["usps_code"]),
            current_address_matches_registration=d["current_address_matches_registration"],
            registered=d["registered"],
            deceased=d["deceased"],
            precinct=d["precinct"],
            county=d["county"],
            state=d["state"],
            household_key=d["household_key"],
            vote_2012=VoteMethod(d["vote_2012"]),
            vote_2016=VoteMethod(d["vote_2016"]),
            demographics=dict(d.get("demographics") or {}),
            home_sale_price=d.get("home_sale_price"),
        )


@dataclass(frozen=True)
class PollingPlace:
    place_id: str
    election_year: int
    address: Address
    precinct: str
    county: str
    state: str
    place_description: Optional[str] = None
    geocode: Optional[tuple[float, float]] = None
    geocode_meta: Any = None  # GeocodeMetadata when produced by the geocode module

    def to_dict(self) -> dict:
        return {
            "place_id": self.place_id,
            "election_year": self.election_year,
            "address": render_address(self.address),
            "precinct": self.precinct,
            "county": self.county,
            "state": self.state,
            "place_description": self.place_description,
            "geocode": None if self.geocode is None else list(self.geocode),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PollingPlace":
        return cls(
            place_id=d["place_id"],
            election_year=int(d["election_year"]),
            address=parse_address(d["address"]),
            precinct=d["precinct"],
            county=d["county"],
            state=d["state"],
            place_description=d.get("place_description"),
            geocode=None if d.get("geocode") is None else (float(d["geocode"][0]), float(d["geocode"][1])),
        )


class _RowReject(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(code)
        self.code = code
        self.detail = detail


# --------------------------------------------------------------------------
# reading
# --------------------------------------------------------------------------

def _read_text(source) -> str:
    try:
        if isinstance(source, (bytes, bytearray)):
            data = bytes(source)
        elif isinstance(source, (str, os.PathLike)):
            with open(source, "rb") as fh:
                data = fh.read()
        else:
            data = source.read()
    except OSError as exc:
        raise InputError(f"cannot read {source!r}: {exc}") from exc
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise InputError(f"input is not UTF-8: {exc}") from exc


def detect_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _split_lines(text: str) -> tuple[list[str], str, list[tuple[int, str]]]:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError("missing header row")
    delim = detect_delimiter(lines[0])
    header = next(csv.reader([lines[0]], delimiter=delim))
    header = [h.strip() for h in header]
    # Trailing blank lines are formatting, not rows.
    while len(lines) > 1 and not lines[-1].strip():
        lines.pop()
    rows = [(i, line) for i, line in enumerate(lines[1:], start=1)]
    return header, delim, rows


def _resolve_columns(header: list[str], spec: FormatSpec, required: Sequence[str],
                     known: Sequence[str]) -> dict[str, int]:
    for f in required:
        if f not in spec.columns:
            raise SchemaError(f"required field {f!r} has no column mapping")
    index = {h: i for i, h in enumerate(header)}
    out = {}
    for fname, col in spec.columns.items():
        if fname not in known:
            raise SchemaError(f"unknown field {fname!r} in column mapping")
        if col not in index:
            raise SchemaError(f"mapped column {col!r} (field {fname!r}) not in header")
        out[fname] = index[col]
    for col in spec.demographics:
        if col not in index:
            raise SchemaError(f"demographic column {col!r} not in header")
    return out


def _chunks(seq: list, n: int) -> list[list]:
    size = max(1, -(-len(seq) // n))
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def _parse_rows(rows, convert, threads: int):
    """Convert rows, possibly in parallel chunks, preserving input order."""
    def work(chunk):
        out = []
        for rownum, line in chunk:
            try:
                out.append((rownum, line, convert(line), None))
            except _RowReject as rej:
                out.append((rownum, line, None, rej))
        return out

    if threads <= 1 or len(rows) < 2 * threads:
        return work(rows)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(work, _chunks(rows, threads)))
    return [r for part in parts for r in part]


def _cell(cells: list[str], cols: Mapping[str, int], name: str) -> str:
    i = cols.get(name)
    return "" if i is None else cells[i].strip()


def _req(cells, cols, name) -> str:
    v = _cell(cells, cols, name)
    if not v:
        raise _RowReject(MISSING_FIELD, name)
    return v


def _bool(cells, cols, name, default: bool) -> bool:
    if name not in cols:
        return default
    v = _cell(cells, cols, name).lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise _RowReject(BAD_VALUE, f"{name}={v!r}")


def _norm_key(v: str) -> str:
    return "".join(ch for ch in v.lower() if ch.isalnum())


_PRECISION_LOOKUP = {_norm_key(m.value): m for m in GeoPrecision} | {"zip": GeoPrecision.ZIPCODE}
_USPS_LOOKUP = {_norm_key(m.value): m for m in UspsCode} | {
    "h": UspsCode.HIGH_RISE, "b": UspsCode.BUILDING, "a": UspsCode.APARTMENT,
    "s": UspsCode.STREET_ADDRESS, "street": UspsCode.STREET_ADDRESS,
    "f": UspsCode.FIRM, "g": UspsCode.GENERAL_DELIVERY, "p": UspsCode.PO_BOX,
    "r": UspsCode.RURAL_ROUTE, "highway": UspsCode.RURAL_ROUTE,
}


def _enum(cells, cols, name, lookup, default):
    if name not in cols:
        return default
    v = _norm_key(_cell(cells, cols, name))
    if v not in lookup:
        raise _RowReject(BAD_VALUE, f"{name}={_cell(cells, cols, name)!r}")
    return lookup[v]


def _vote(cells, cols, name, codes: Mapping[str, str]) -> VoteMethod:
    if name not in cols:
        return VoteMethod.NONE
    raw = _cell(cells, cols, name)
    key = raw.lower()
    if key not in codes:
        key = _norm_key(raw)
    if key not in codes:
        raise _RowReject(BAD_VALUE, f"{name}={raw!r}")
    return VoteMethod(codes[key])


def _geocode(cells, cols) -> Optional[tuple[float, float]]:
    lat, lon = _cell(cells, cols, "lat"), _cell(cells, cols, "lon")
    if not lat and not lon:
        return None
    try:
        la, lo = float(lat), float(lon)
    except ValueError:
        raise _RowReject(BAD_COORDINATE, f"({lat!r}, {lon!r})") from None
    if not (-90.0 <= la <= 90.0 and -180.0 <= lo <= 180.0):
        raise _RowReject(BAD_COORDINATE, f"({la}, {lo})")
    return la, lo


def _address(cells, cols, allow_missing: bool) -> Optional[Address]:
    street = _cell(cells, cols, "street")
    if not street:
        if allow_missing:
            return None
        raise _RowReject(MISSING_FIELD, "street")
    try:
        return make_address(street, _cell(cells, cols, "city"), _cell(cells, cols, "state"),
                            _cell(cells, cols, "zip") or None)
    except AddressError as exc:
        raise _RowReject(exc.code, str(exc)) from None


def _reader(delim: str):
    def split(line: str) -> list[str]:
        return next(csv.reader([line], delimiter=delim))
    return split


def _dedupe(converted, key) -> tuple[list, list[Reject]]:
    records, rejects, seen = [], [], set()
    for rownum, line, rec, rej in converted:
        if rej is not None:
            rejects.append(Reject(rownum, rej.code, line, rej.detail))
            continue
        k = key(rec)
        if k in seen:
            rejects.append(Reject(rownum, DUPLICATE_KEY, line, repr(k)))
            continue
        seen.add(k)
        records.append(rec)
    return records, rejects


def parse_voter_file(source, format_spec: FormatSpec | None = None, threads: int = 1
                     ) -> tuple[list[VoterRecord], list[Reject]]:
    """
    Parse a voter file into VoterRecords and row-level Rejects.

    Without ``format_spec`` every header that names a known field is mapped
    to that field.

    A row with an empty street is kept with ``address=None`` (the filter
    pipeline drops it later and counts the loss); a row whose street number
    is not all digits is rejected with ADDRESS_NONNUMERIC.
    """
    header, delim, rows = _split_lines(_read_text(source))
    spec = format_spec or FormatSpec(columns={f: f for f in VOTER_FIELDS if f in header})
    cols = _resolve_columns(header, spec, VOTER_REQUIRED, VOTER_FIELDS)
    demo_idx = {c: header.index(c) for c in spec.demographics}
    split = _reader(delim)
    ncols = len(header)

    def convert(line: str) -> VoterRecord:
        cells = split(line)
        if len(cells) != ncols:
            raise _RowReject(FIELD_COUNT, f"{len(cells)} fields, expected {ncols}")
        voter_id = _req(cells, cols, "voter_id")
        state = _req(cells, cols, "state").upper()
        precinct = _req(cells, cols, "precinct")
        address = _address(cells, cols, allow_missing=True)
        price = _cell(cells, cols, "home_sale_price")
        try:
            price_val = float(price.replace("$", "").replace(",", "")) if price else None
        except ValueError:
            raise _RowReject(BAD_VALUE, f"home_sale_price={price!r}") from None
        household = _cell(cells, cols, "household_key")
        if not household:
            household = render_address(address) if address is not None else f"voter:{voter_id}"
        return VoterRecord(
            voter_id=voter_id,
            address=address,
            geocode=_geocode(cells, cols),
            geo_precision=_enum(cells, cols, "geo_precision", _PRECISION_LOOKUP, GeoPrecision.OTHER),
            usps_code=_enum(cells, cols, "usps_code", _USPS_LOOKUP, UspsCode.STREET_ADDRESS),
            current_address_matches_registration=_bool(cells, cols, "address_match", True),
            registered=_bool(cells, cols, "registered", True),
            deceased=_bool(cells, cols, "deceased", False),
            precinct=precinct,
            county=_cell(cells, cols, "county"),
            state=state,
            household_key=household,
            vote_2012=_vote(cells, cols, "vote_2012", spec.vote_codes),
            vote_2016=_vote(cells, cols, "vote_2016", spec.vote_codes),
            demographics={c: cells[i].strip() for c, i in demo_idx.items()},
            home_sale_price=price_val,
        )

    converted = _parse_rows(rows, convert, threads)
    return _dedupe(converted, key=lambda r: r.voter_id)


def parse_polling_place_file(source, format_spec: FormatSpec | None = None, threads: int = 1
                             ) -> tuple[list[PollingPlace], list[Reject]]:
    """Parse a polling-place file; (place_id, election_year) must be unique."""
    header, delim, rows = _split_lines(_read_text(source))
    spec = format_spec or FormatSpec(columns={f: f for f in PLACE_FIELDS if f in header})
    cols = _resolve_columns(header, spec, PLACE_REQUIRED, PLACE_FIELDS)
    if "election_year" not in cols and spec.default_year is None:
        raise SchemaError("no election_year column and no default_year")
    split = _reader(delim)
    ncols = len(header)

    def convert(line: str) -> PollingPlace:
        cells = split(line)
        if len(cells) != ncols:
            raise _RowReject(FIELD_COUNT, f"{len(cells)} fields, expected {ncols}")
        place_id = _req(cells, cols, "place_id")
        if "election_year" in cols:
            year_raw = _req(cells, cols, "election_year")
            if year_raw not in ("2012", "2016"):
                raise _RowReject(BAD_VALUE, f"election_year={year_raw!r}")
            year = int(year_raw)
        else:
            year = int(spec.default_year)
        _req(cells, cols, "city")
        state = _req(cells, cols, "state").upper()
        precinct = _req(cells, cols, "precinct")
        return PollingPlace(
            place_id=place_id,
            election_year=year,
            address=_address(cells, cols, allow_missing=False),
            precinct=precinct,
            county=_cell(cells, cols, "county"),
            state=state,
            place_description=_cell(cells, cols, "place_description") or None,
            geocode=_geocode(cells, cols),
        )

    converted = _parse_rows(rows, convert, threads)
    return _dedupe(converted, key=lambda p: (p.place_id, p.election_year))


def write_rejects(rejects: Iterable[Reject], path_or_buf, delimiter: str = ",") -> None:
    """Reject sidecar: columns row_number, reason_code, raw_line."""
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["row_number", "reason_code", "raw_line"])
        for r in rejects:
            w.writerow([r.row_number, r.reason_code, r.raw_line])
    finally:
        if own:
            fh.close()


def rejects_to_text(rejects: Iterable[Reject], delimiter: str = ",") -> str:
    buf = io.StringIO()
    write_rejects(rejects, buf, delimiter)
    return buf.getvalue()


__all__ = [
    "BlockDiscError", "FormatSpec", "GeoPrecision", "PollingPlace", "Reject", "UspsCode",
    "VoteMethod", "VoterRecord", "detect_delimiter", "parse_polling_place_file",
    "parse_voter_file", "write_rejects",
]
