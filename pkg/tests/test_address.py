import itertools

import pytest
from hypothesis import given, strategies as st

from blockdisc.address import (
    Address, make_address, ordinal_words, parse_address, parse_street, render_address,
    standardize_street_name,
)
from blockdisc.errors import AddressError

NUMBERS = ["123", "2000", "7", "45001"]
STREETS = ["Main St", "1st Ave", "N 3rd Street", "Martin Luther King Jr Blvd", "Oak", "21st Pl", "W. Elm Rd.",
          "Park Avenue Apt 4", "5 Ave", "Cedar Ct #12"]
TAILS = [", Milwaukee, WI", ", Des Moines, IA 50309", ", Doeville TX", "", ", Fort Wayne, in 46802-1234"]

CORPUS = [f"{n} {s}{t}" for n, s, t in itertools.product(NUMBERS, STREETS, TAILS)][:100]


def test_table_two_address():
    a = parse_address("123 Main St, Milwaukee, WI")
    assert a == Address("123", "main", "street", "milwaukee", "WI", None)


def test_ordinal_street_name_expanded():
    a = parse_address("1st Ave")
    assert (a.street_name, a.street_type) == ("first", "avenue")
    assert parse_address("400 21st St, Milwaukee, WI").street_name == "twenty first"
    assert parse_address("400 5 Ave, Milwaukee, WI").street_name == "fifth"


def test_directionals_and_units():
    a = parse_address("12 N. 3rd St. Apt 4B, Milwaukee, WI 53202")
    assert a == Address("12", "north third", "street", "milwaukee", "WI", "53202")


def test_nonnumeric_street_number():
    with pytest.raises(AddressError) as e:
        parse_address("12A Main St, Milwaukee, WI")
    assert e.value.code == "ADDRESS_NONNUMERIC"
    with pytest.raises(AddressError):
        Address("12A", "main")


@pytest.mark.parametrize("raw", ["", "   ", ",,"])
def test_unparseable(raw):
    with pytest.raises(AddressError) as e:
        parse_address(raw)
    assert e.value.code == "UNPARSEABLE"


def test_corpus_has_one_hundred_entries():
    assert len(CORPUS) == 100


@pytest.mark.parametrize("raw", CORPUS)
def test_round_trip_over_corpus(raw):
    a = parse_address(raw)
    assert parse_address(render_address(a)) == a
    assert render_address(parse_address(render_address(a))) == render_address(a)


def test_ordinal_words_table():
    assert [ordinal_words(n) for n in (1, 2, 3, 11, 12, 20, 21, 42, 99, 100)] == [
        "first", "second", "third", "eleventh", "twelfth", "twentieth", "twenty first", "forty second",
        "ninety ninth", "one hundredth"]
    with pytest.raises(ValueError):
        ordinal_words(0)


def test_parse_street_parts():
    assert parse_street("200 Main St") == ("200", "main", "street")
    assert parse_street("Broadway") == ("", "broadway", "")
    # A lone street-type word is a name, not a type.
    assert parse_street("Park") == ("", "park", "")
    assert standardize_street_name("SW 1st") == "southwest first"


def test_make_address_from_columns():
    assert make_address("200 Main St", "Milwaukee", "wi", "53202-0001") == Address(
        "200", "main", "street", "milwaukee", "WI", "532020001")
    with pytest.raises(AddressError):
        make_address("200 Main St", "Milwaukee", "Wisconsin")


words = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8).filter(
    lambda w: w not in ("apt", "unit", "ste", "suite", "lot", "rm", "room", "fl", "floor"))


@given(st.integers(1, 99999), st.lists(words, min_size=1, max_size=3),
       st.sampled_from(["st", "ave", "road", "blvd", ""]), st.lists(words, min_size=1, max_size=2),
       st.sampled_from(["WI", "IA", "NC"]), st.one_of(st.none(), st.from_regex(r"\d{5}", fullmatch=True)))
def test_round_trip_property(num, name, stype, city, state, zip_code):
    raw = f"{num} {' '.join(name)} {stype}".strip() + f", {' '.join(city)}, {state}" + (f" {zip_code}" if zip_code else "")
    a = parse_address(raw)
    assert parse_address(render_address(a)) == a
