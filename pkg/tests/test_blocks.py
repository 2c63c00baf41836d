import json
import os

import pytest
from hypothesis import given, settings, strategies as st

from blockdisc.address import parse_address
from blockdisc.assignment import Assignment
from blockdisc.blocks import (
    ONE_PLACE, SMALL_FACE, STAGE_INPUT, STAGES, THREE_PLUS_PLACES, ShortNumberError, block_id, build_blocks,
    ledger_from_json, run_filter_pipeline,
)
from blockdisc.errors import PipelineError
from blockdisc.ingest import FormatSpec, parse_polling_place_file, parse_voter_file
from blockdisc.workflow import assign_years

import popgen
from invariants import check_block_invariants


@pytest.mark.parametrize("raw, expected", [
    ("123 Main St, Milwaukee, WI", "1-main-street-milwaukee-WI"),
    ("2000 Third St, Milwaukee, WI", "20-third-street-milwaukee-WI"),
    ("125 Main St, Milwaukee, WI", "1-main-street-milwaukee-WI"),
    ("400 N 1st Ave, Des Moines, IA", "4-north-first-avenue-des-moines-IA"),
])
def test_block_id_examples(raw, expected):
    assert str(block_id(parse_address(raw))) == expected


@pytest.mark.parametrize("raw", ["80 Park Rd", "5 Main St, Milwaukee, WI", "Main St, Milwaukee, WI"])
def test_short_number(raw):
    with pytest.raises(ShortNumberError) as e:
        block_id(parse_address(raw))
    assert e.value.code == "SHORT_NUMBER"


def run_fixture(data_dir, threads=1):
    fmt = FormatSpec.voters(demographics=("gender", "age_group"))
    v12, _ = parse_voter_file(os.path.join(data_dir, "ledger_voters_2012.csv"), fmt, threads=threads)
    v16, _ = parse_voter_file(os.path.join(data_dir, "ledger_voters_2016.csv"), fmt, threads=threads)
    places, _ = parse_polling_place_file(os.path.join(data_dir, "ledger_places.csv"), threads=threads)
    a, _ = assign_years(v12, v16, places)
    return run_filter_pipeline(v12, v16, a[2012], a[2016], {("WI", "waukesha"): True})


def test_ledger_fixture_counts(data_dir):
    eligible, ledger = run_fixture(data_dir)
    assert [r.stage for r in ledger.rows] == [STAGE_INPUT, *STAGES]
    assert [(r.n2012, r.n2016) for r in ledger.rows] == [
        (40, 40), (36, 36), (30, 30), (27, 27), (25, 25), (20, 20), (12, 12), (10, 10)]
    assert sorted(eligible.voters[2016]) == [f"V{i}" for i in range(31, 41)]


@pytest.mark.parametrize("threads", [1, 2, 5])
def test_ledger_json_golden(data_dir, threads):
    _, ledger = run_fixture(data_dir, threads=threads)
    with open(os.path.join(data_dir, "ledger_golden.json"), encoding="utf-8") as fh:
        golden = fh.read()
    assert ledger.to_json() == golden
    assert ledger_from_json(golden) == ledger


def test_fixture_blocks_and_faces(data_dir):
    eligible, _ = run_fixture(data_dir)
    blocks, rejects = eligible.blocks(2016)
    assert rejects == []
    assert [str(b.block_id) for b in blocks] == ["1-main-street-milwaukee-WI", "2-oak-avenue-milwaukee-WI"]
    assert {p: len(ids) for p, ids in blocks[0].faces.items()} == {"PP-A": 3, "PP-B": 2}
    assert blocks[1].face_of("V39") == "PP-D"


def test_clean_population_has_constant_ledger():
    v12, v16, places = popgen.population(seed=3, n_blocks=4, spread_miles=0.05)
    v12 = [v for v in v12 if v.address == next(w for w in v16 if w.voter_id == v.voter_id).address]
    keep = {v.voter_id for v in v12}
    v16 = [v for v in v16 if v.voter_id in keep]
    a, _ = assign_years(v12, v16, places)
    _, ledger = run_filter_pipeline(v12, v16, a[2012], a[2016], {})
    counts = {(r.n2012, r.n2016) for r in ledger.rows}
    assert len(counts) == 1


def test_pipeline_rejects_inconsistent_ids():
    v12, v16, places = popgen.population(seed=1, n_blocks=2)
    a, _ = assign_years(v12, v16, places)
    with pytest.raises(PipelineError):
        run_filter_pipeline(v12 + v12[:1], v16, a[2012], a[2016], {})
    with pytest.raises(PipelineError):
        run_filter_pipeline(v12, v16, a[2012] + [Assignment("ghost", 2012, "PP0", 1.0)], a[2016], {})


def test_pair_distance_threshold_inclusive():
    v12, v16, places = popgen.population(seed=5, n_blocks=3, spread_miles=0.2)
    a, _ = assign_years(v12, v16, places)
    _, tight = run_filter_pipeline(v12, v16, a[2012], a[2016], {}, block_pair_miles=0.01)
    _, loose = run_filter_pipeline(v12, v16, a[2012], a[2016], {}, block_pair_miles=0.41)
    assert tight.rows[5].n2016 < loose.rows[5].n2016 == loose.rows[4].n2016


def _block_of(ids):
    return {i: block_id(parse_address("123 Main St, Milwaukee, WI")) for i in ids}


def test_build_blocks_examples():
    ids = ["a", "b", "c", "d", "e"]
    two = [Assignment(i, 2016, "PP-1" if i in "abc" else "PP-2", 0.1) for i in ids]
    blocks, rejects = build_blocks(_block_of(ids), two, 2016)
    assert len(blocks) == 1 and rejects == []
    assert blocks[0].faces == {"PP-1": ("a", "b", "c"), "PP-2": ("d", "e")}

    three = [Assignment(i, 2016, {"a": "PP-1", "b": "PP-1", "c": "PP-2", "d": "PP-2"}.get(i, "PP-3"), 0.1) for i in ids]
    assert build_blocks(_block_of(ids), three, 2016)[1][0][1] == THREE_PLUS_PLACES
    small = [Assignment(i, 2016, "PP-1" if i != "e" else "PP-2", 0.1) for i in ids]
    assert build_blocks(_block_of(ids), small, 2016)[1][0][1] == SMALL_FACE
    one = [Assignment(i, 2016, "PP-1", 0.1) for i in ids]
    assert build_blocks(_block_of(ids), one, 2016)[1][0][1] == ONE_PLACE
    # assignments from the other year are ignored
    assert build_blocks(_block_of(ids), two, 2012) == ([], [])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.3))
def test_emitted_blocks_satisfy_invariants(seed, spread):
    v12, v16, places = popgen.population(seed, spread_miles=spread)
    a, _ = assign_years(v12, v16, places)
    eligible, ledger = run_filter_pipeline(v12, v16, a[2012], a[2016], {})
    counts = [r.n2016 for r in ledger.rows]
    assert counts == sorted(counts, reverse=True)
    blocks, _ = eligible.blocks(2016)
    check_block_invariants(eligible, blocks)
    assert json.loads(ledger.to_json()) == ledger.to_records()
