"""Street address decomposition and standardization.

Addresses are reduced to number / name / type / city / state / zip with
lowercase tokens, long-form street types ("st" -> "street") and long-form
numeric street names ("1st" or a bare "1" -> "first"). The canonical
rendering produced by :func:`render_address` always re-parses to the same
:class:`Address`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from blockdisc.errors import AddressError

STREET_TYPES = {
    "st": "street", "str": "street", "street": "street",
    "ave": "avenue", "av": "avenue", "avn": "avenue", "avenue": "avenue",
    "rd": "road", "road": "road",
    "blvd": "boulevard", "boul": "boulevard", "boulevard": "boulevard",
    "dr": "drive", "drv": "drive", "drive": "drive",
    "ln": "lane", "lane": "lane",
    "ct": "court", "crt": "court", "court": "court",
    "pl": "place", "place": "place",
    "ter": "terrace", "terr": "terrace", "terrace": "terrace",
    "way": "way", "wy": "way",
    "pkwy": "parkway", "pky": "parkway", "parkway": "parkway",
    "hwy": "highway", "highway": "highway",
    "cir": "circle", "circ": "circle", "circle": "circle",
    "sq": "square", "square": "square",
    "trl": "trail", "trail": "trail",
    "pike": "pike", "pk": "pike",
    "aly": "alley", "alley": "alley",
    "row": "row",
    "walk": "walk",
    "loop": "loop",
    "run": "run",
    "xing": "crossing", "crossing": "crossing",
    "expy": "expressway", "expressway": "expressway",
    "fwy": "freeway", "freeway": "freeway",
    "tpke": "turnpike", "turnpike": "turnpike",
    "plz": "plaza", "plaza": "plaza",
    "cv": "cove", "cove": "cove",
    "pt": "point", "point": "point",
    "hts": "heights", "heights": "heights",
}

DIRECTIONALS = {
    "n": "north", "s": "south", "e": "east", "w": "west",
    "ne": "northeast", "nw": "northwest", "se": "southeast", "sw": "southwest",
}

_UNIT_MARKERS = {"apt", "unit", "ste", "suite", "lot", "rm", "room", "fl", "floor", "#"}

_ONES = ["", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
         "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
         "seventeen", "eighteen", "nineteen"]
_ONES_ORD = ["", "first", "second", "third", "fourth", "fifth", "sixth", "seventh",
             "eighth", "ninth", "tenth", "eleventh", "twelfth", "thirteenth",
             "fourteenth", "fifteenth", "sixteenth", "seventeenth", "eighteenth",
             "nineteenth"]
_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]
_TENS_ORD = ["", "", "twentieth", "thirtieth", "fortieth", "fiftieth", "sixtieth",
             "seventieth", "eightieth", "ninetieth"]

ORDINAL_RE = re.compile(r"^(\d+)(st|nd|rd|th)$")
_ZIP_RE = re.compile(r"^\d{5}(-?\d{4})?$")
_STATE_RE = re.compile(r"^[A-Za-z]{2}$")


def ordinal_words(n: int) -> str:
    """Long-form ordinal for 1..100, e.g. 21 -> "twenty first"."""
    if not 1 <= n <= 100:
        raise ValueError(f"ordinal table covers 1..100, got {n}")
    if n == 100:
        return "one hundredth"
    if n < 20:
        return _ONES_ORD[n]
    tens, ones = divmod(n, 10)
    if ones == 0:
        return _TENS_ORD[tens]
    return f"{_TENS[tens]} {_ONES_ORD[ones]}"


@dataclass(frozen=True)
class Address:
    street_number: str = ""
    street_name: str = ""
    street_type: str = ""
    city: str = ""
    state: str = ""
    zip: Optional[str] = None

    def __post_init__(self):
        if self.street_number and not self.street_number.isdigit():
            raise AddressError(f"street number {self.street_number!r}", code="ADDRESS_NONNUMERIC")

    @property
    def has_street(self) -> bool:
        return bool(self.street_number or self.street_name)

    @property
    def street_line(self) -> str:
        return " ".join(p for p in (self.street_number, self.street_name, self.street_type) if p)


def _clean(text: str) -> str:
    text = text.replace(".", " ").replace("\t", " ")
    return re.sub(r"\s+", " ", text).strip()


def _standardize_name_token(tok: str) -> list[str]:
    m = ORDINAL_RE.match(tok)
    if m and 1 <= int(m.group(1)) <= 100:
        return ordinal_words(int(m.group(1))).split()
    if tok.isdigit() and 1 <= int(tok) <= 100:
        return ordinal_words(int(tok)).split()
    if tok in DIRECTIONALS:
        return [DIRECTIONALS[tok]]
    return [tok]


def standardize_street_name(name: str) -> str:
    """Lowercase and expand ordinals/directionals in a street-name string."""
    out: list[str] = []
    for tok in _clean(name.lower().replace("-", " ")).split():
        out.extend(_standardize_name_token(tok))
    return " ".join(out)


def standardize_street_type(street_type: str) -> str:
    t = _clean(street_type.lower())
    return STREET_TYPES.get(t, t)


def standardize_city(city: str) -> str:
    return _clean(city.lower())


def parse_street(line: str) -> tuple[str, str, str]:
    """Split a street line ("123 N 1st Ave Apt 4") into (number, name, type)."""
    tokens = _clean(line.lower().replace(",", " ")).split()
    for i, tok in enumerate(tokens):
        if tok in _UNIT_MARKERS or tok.startswith("#"):
            tokens = tokens[:i]
            break
    number = ""
    if tokens and tokens[0][0].isdigit() and not ORDINAL_RE.match(tokens[0]):
        first = tokens[0]
        if not first.isdigit():
            raise AddressError(f"street number {first!r}", code="ADDRESS_NONNUMERIC")
        if len(tokens) > 1:
            number = first
            tokens = tokens[1:]
    street_type = ""
    if len(tokens) > 1 and tokens[-1] in STREET_TYPES:
        street_type = STREET_TYPES[tokens[-1]]
        tokens = tokens[:-1]
    name = standardize_street_name(" ".join(tokens))
    return number, name, street_type


def _split_state_zip(text: str) -> tuple[list[str], str, Optional[str]]:
    tokens = _clean(text).split()
    zip_code = None
    state = ""
    if tokens and _ZIP_RE.match(tokens[-1]):
        zip_code = tokens.pop().replace("-", "")
    if tokens and _STATE_RE.match(tokens[-1]):
        state = tokens.pop().upper()
    return tokens, state, zip_code


def parse_address(raw: str) -> Address:
    """
    Parse a one-line address such as ``"123 Main St, Milwaukee, WI 53202"``.

    Accepted shapes are ``street``, ``street, city STATE [zip]`` and
    ``street, city, STATE [zip]``. Raises AddressError (code UNPARSEABLE)
    when nothing usable remains, and code ADDRESS_NONNUMERIC for a street
    number such as ``12A``.
    """
    if raw is None or not raw.strip():
        raise AddressError("empty address")
    parts = [p.strip() for p in raw.split(",")]
    city = state = ""
    zip_code = None
    if len(parts) == 1:
        street = parts[0]
    elif len(parts) == 2:
        street = parts[0]
        rest, state, zip_code = _split_state_zip(parts[1])
        city = " ".join(rest)
    else:
        street = parts[0]
        city = parts[-2]
        rest, state, zip_code = _split_state_zip(parts[-1])
        if rest:
            raise AddressError(f"cannot read state from {parts[-1]!r}")
    number, name, street_type = parse_street(street)
    addr = Address(number, name, street_type, standardize_city(city), state, zip_code)
    if not (addr.has_street or addr.street_type or addr.city or addr.state):
        raise AddressError(f"no address components in {raw!r}")
    return addr


def make_address(street: str, city: str = "", state: str = "", zip_code: str | None = None) -> Address:
    """Build an Address from separately stored file columns."""
    number, name, street_type = parse_street(street or "")
    state = (state or "").strip().upper()
    if state and not _STATE_RE.match(state):
        raise AddressError(f"state {state!r} is not a 2-letter code")
    z = (zip_code or "").strip().replace("-", "") or None
    return Address(number, name, street_type, standardize_city(city or ""), state, z)


def render_address(addr: Address) -> str:
    """Canonical one-line rendering; ``parse_address`` inverts it exactly."""
    street = addr.street_line
    if not (addr.city or addr.state or addr.zip):
        return street
    tail = " ".join(p for p in (addr.state, addr.zip or "") if p)
    return f"{street}, {addr.city}, {tail}"
