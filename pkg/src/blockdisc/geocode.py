"""Geocode precision/accuracy checks and geocoder clients.

A location is first geocoded by its street address, which must be precise and
match the original street number, street name, city and state. Failing that,
the place description ("Local Elementary School, Doeville, TX") is geocoded
and only needs to be precise and land in the right city and state.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Protocol

from blockdisc.address import Address, parse_address, render_address
from blockdisc.errors import AddressError, GeocoderUnavailable


class LocationType(enum.Enum):
    ROOFTOP = "ROOFTOP"
    GEOMETRIC_CENTER = "GEOMETRIC_CENTER"
    RANGE_INTERPOLATED = "RANGE_INTERPOLATED"
    APPROXIMATE = "APPROXIMATE"


class Precision(enum.Enum):
    ACCEPT = "Accept"
    CONDITIONAL_ACCEPT = "ConditionalAccept"
    REJECT = "Reject"


class Scope(enum.Enum):
    FULL = "Full"
    CITY_STATE_ONLY = "CityStateOnly"


class Verdict(enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class Basis(enum.Enum):
    STREET_ADDRESS = "StreetAddress"
    PLACE_DESCRIPTION = "PlaceDescription"


# Only these tags make a geometric-center or range-interpolated result usable.
ACCEPTING_TAGS = frozenset({"establishment", "store", "local_government_office", "point_of_interest"})


def normalize_tag(tag: str) -> str:
    return "_".join(tag.strip().lower().replace("_", " ").split())


@dataclass(frozen=True)
class GeocodeMetadata:
    location_type: LocationType
    tags: frozenset[str]
    formatted_address: Address
    coordinates: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "location_type": self.location_type.value,
            "tags": sorted(self.tags),
            "formatted_address": render_address(self.formatted_address),
            "lat": self.coordinates[0],
            "lon": self.coordinates[1],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GeocodeMetadata":
        return cls(
            location_type=LocationType(d["location_type"]),
            tags=frozenset(d.get("tags", ())),
            formatted_address=parse_address(d["formatted_address"]),
            coordinates=(float(d["lat"]), float(d["lon"])),
        )


@dataclass(frozen=True)
class GeocodeDecision:
    verdict: Verdict
    basis: Optional[Basis]
    reason: str
    coordinates: Optional[tuple[float, float]] = None
    meta: Optional[GeocodeMetadata] = field(default=None, compare=False)


class GeocoderClient(Protocol):
    def geocode(self, query: str) -> GeocodeMetadata:
        """Return metadata for ``query`` or raise GeocoderUnavailable."""


def check_precision(meta: GeocodeMetadata) -> Precision:
    lt = meta.location_type
    if lt is LocationType.ROOFTOP:
        return Precision.ACCEPT
    if lt is LocationType.APPROXIMATE:
        return Precision.REJECT
    tags = {normalize_tag(t) for t in meta.tags}
    return Precision.CONDITIONAL_ACCEPT if tags & ACCEPTING_TAGS else Precision.REJECT


def _std(addr: Address) -> Address:
    # Round-trip through the parser so "1st"/"first", "st"/"street" compare equal
    # even for Address objects built by hand.
    try:
        return parse_address(render_address(addr)) if (addr.has_street or addr.city or addr.state) else addr
    except AddressError:
        return addr


def check_accuracy(original: Address, meta: GeocodeMetadata, scope: Scope) -> bool:
    """Compare standardized components; zip and street type never participate."""
    a, b = _std(original), _std(meta.formatted_address)
    if a.city != b.city or a.state.upper() != b.state.upper():
        return False
    if scope is Scope.CITY_STATE_ONLY:
        return True
    return a.street_number == b.street_number and a.street_name == b.street_name


def place_query(place_desc: str, addr: Address) -> str:
    parts = [place_desc.strip()]
    if addr.city:
        parts.append(addr.city)
    if addr.state:
        parts.append(addr.state)
    return ", ".join(parts)


def validate_location(street_addr: Address, place_desc: Optional[str],
                      client: GeocoderClient) -> GeocodeDecision:
    """
    Decide whether a location's geocode is usable.

    ``street_addr`` always supplies city and state; it is only geocoded as a
    street address when it carries a number or street name. Client failures
    propagate as GeocoderUnavailable instead of becoming a Reject.
    """
    if not street_addr.has_street and not place_desc:
        raise ValueError("need a street address or a place description")
    reason = "NO_STREET_ADDRESS"
    if street_addr.has_street:
        meta = client.geocode(render_address(street_addr))
        prec = check_precision(meta)
        if prec is Precision.REJECT:
            reason = "STREET_IMPRECISE"
        elif not check_accuracy(street_addr, meta, Scope.FULL):
            reason = "STREET_INACCURATE"
        else:
            return GeocodeDecision(Verdict.ACCEPT, Basis.STREET_ADDRESS, "OK", meta.coordinates, meta)
    if place_desc:
        meta = client.geocode(place_query(place_desc, street_addr))
        if check_precision(meta) is Precision.REJECT:
            reason = "PLACE_IMPRECISE"
        elif not check_accuracy(street_addr, meta, Scope.CITY_STATE_ONLY):
            reason = "PLACE_INACCURATE"
        else:
            return GeocodeDecision(Verdict.ACCEPT, Basis.PLACE_DESCRIPTION, "OK", meta.coordinates, meta)
    return GeocodeDecision(Verdict.REJECT, None, reason)


# --------------------------------------------------------------------------
# clients
# --------------------------------------------------------------------------

class StubGeocoder:
    """
    Deterministic stand-in for a web geocoder.

    In hash mode every query maps, via a seeded BLAKE2 digest, to a location
    type, tag set and coordinates; the formatted address echoes the query
    (parsed and standardized) so accuracy normally holds. In replay mode only
    recorded queries are answered and anything else raises
    GeocoderUnavailable.
    """

    _TYPES = (
        (0.70, LocationType.ROOFTOP),
        (0.80, LocationType.GEOMETRIC_CENTER),
        (0.90, LocationType.RANGE_INTERPOLATED),
        (1.01, LocationType.APPROXIMATE),
    )
    _TAGS = ("establishment", "premise", "school", "point_of_interest", "street_address")

    def __init__(self, seed: int = 0, replay: Optional[Mapping[str, GeocodeMetadata]] = None):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.replay = None if replay is None else dict(replay)

    @classmethod
    def from_replay_file(cls, path) -> "StubGeocoder":
        return cls(replay=load_replay(path))

    def _digest(self, query: str) -> bytes:
        return hashlib.blake2b(f"{self.seed}\x00{query}".encode("utf-8"), digest_size=32).digest()

    def geocode(self, query: str) -> GeocodeMetadata:
        if self.replay is not None:
            try:
                return self.replay[query]
            except KeyError:
                raise GeocoderUnavailable(f"no recorded result for {query!r}") from None
        d = self._digest(query)
        u = int.from_bytes(d[:8], "big") / 2.0**64
        loc = next(t for cut, t in self._TYPES if u < cut)
        tags = frozenset(t for i, t in enumerate(self._TAGS) if d[8 + i] < 80)
        lat = 25.0 + 24.0 * int.from_bytes(d[16:24], "big") / 2.0**64
        lon = -124.0 + 57.0 * int.from_bytes(d[24:32], "big") / 2.0**64
        try:
            formatted = parse_address(query)
        except AddressError:
            formatted = Address()
        return GeocodeMetadata(loc, tags, formatted, (lat, lon))


def stub_geocoder(seed: int = 0, replay_path=None) -> StubGeocoder:
    if replay_path is not None:
        return StubGeocoder.from_replay_file(replay_path)
    return StubGeocoder(seed)


def load_replay(path) -> dict[str, GeocodeMetadata]:
    """
    Read a JSON-lines replay fixture.

    Each line is an object ``{"query": str, "location_type": str,
    "tags": [str], "formatted_address": str, "lat": float, "lon": float}``.
    Blank lines are ignored.
    """
    out: dict[str, GeocodeMetadata] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            out[d["query"]] = GeocodeMetadata.from_dict(d)
    return out


def dump_replay(entries: Iterable[tuple[str, GeocodeMetadata]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query, meta in entries:
            fh.write(json.dumps({"query": query, **meta.to_dict()}, sort_keys=True) + "\n")


def validate_places(places, client: GeocoderClient):
    """
    Validate every polling place.

    Returns ``(updated_places, decisions, unavailable)``. Accepted places take
    the geocoder's coordinates; rejected ones lose their geocode so assignment
    reports MISSING_GEOCODE for their registrants. Places the client could not
    answer keep their file coordinates, lose nothing, and are listed in
    ``unavailable`` so infrastructure failures are not counted as data loss.
    """
    updated, decisions, unavailable = [], [], []
    for p in places:
        try:
            dec = validate_location(p.address, p.place_description, client)
        except GeocoderUnavailable:
            unavailable.append(p)
            updated.append(p)
            continue
        decisions.append((p, dec))
        if dec.verdict is Verdict.ACCEPT:
            updated.append(replace(p, geocode=dec.coordinates, geocode_meta=dec.meta))
        else:
            updated.append(replace(p, geocode=None, geocode_meta=None))
    return updated, decisions, unavailable
