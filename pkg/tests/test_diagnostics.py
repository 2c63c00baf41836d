import pytest
from hypothesis import given, settings, strategies as st

from blockdisc.designs import DesignKind, DesignRow
from blockdisc.diagnostics import (
    MISSING_CATEGORY, balance_table, entries_table, gap_summary, historical_balance, max_abs_diff,
    pct_difference, substitution_by_state,
)
from blockdisc.errors import DiagnosticsError
from blockdisc.estimator import EffectEstimate
from blockdisc.ingest import GeoPrecision, UspsCode, VoteMethod, VoterRecord


def voter(vid, demo=None, price=None, v12=VoteMethod.NONE):
    return VoterRecord(vid, None, None, GeoPrecision.STREET, UspsCode.STREET_ADDRESS, True, True, False,
                       "p", "c", "WI", vid, vote_2012=v12, demographics=demo or {}, home_sale_price=price)


def drow(vid, treat, block="B1", c_mean=0.2, gap=0.3):
    return DesignRow(vid, block, vid, "WI", treat, 0, 0, 0, c_mean + gap if treat else c_mean, 0.0, gap)


def test_pct_difference():
    assert pct_difference(0.131, 0.138) == pytest.approx(-0.0507, abs=5e-5)
    assert pct_difference(0.2, 0.0) is None


def test_balance_hand_counts():
    t = [voter("t1", {"gender": "F"}, 100.0), voter("t2", {"gender": "F"}, 200.0), voter("t3", {"gender": "X"})]
    c = [voter("c1", {"gender": "F"}, 150.0), voter("c2", {"gender": "M"}), voter("c3", {"gender": "M"}),
         voter("c4", {})]
    voters = {v.voter_id: v for v in t + c}
    rows = [drow(v.voter_id, True) for v in t] + [drow(v.voter_id, False) for v in c]
    got = {(e.characteristic, e.category): e for e in balance_table(rows, voters)}
    f = got["gender", "F"]
    assert (f.treated, f.control, f.n_control) == (pytest.approx(2 / 3), 0.25, 1)
    assert f.pct_diff == pytest.approx((2 / 3 - 0.25) / 0.25)
    x = got["gender", "X"]
    assert x.pct_diff is None and x.abs_diff == pytest.approx(1 / 3)
    assert got["gender", MISSING_CATEGORY].control == 0.25
    price = got["home_sale_price", "mean"]
    assert (price.treated, price.control, price.kind) == (150.0, 150.0, "mean")
    assert price.pct_diff == 0.0
    assert max_abs_diff(got.values()) == pytest.approx(0.5)


def test_identical_populations_balance_to_zero():
    demo = [{"race": r, "party": p} for r in ("asian", "white", "black") for p in "DR"]
    voters, rows = {}, []
    for treat in (True, False):
        for k, d in enumerate(demo):
            vid = f"{int(treat)}-{k}"
            voters[vid] = voter(vid, d, v12=VoteMethod.MAIL if k % 2 else VoteMethod.IN_PERSON)
            rows.append(drow(vid, treat))
    assert all(e.abs_diff == 0 and e.pct_diff == 0 for e in balance_table(rows, voters))
    assert all(e.abs_diff == 0 for e in historical_balance(rows, voters, DesignKind.SHOCK))


def test_historical_balance_hand_counts():
    methods_t = [VoteMethod.MAIL, VoteMethod.IN_PERSON, VoteMethod.NONE, VoteMethod.EARLY]
    methods_c = [VoteMethod.IN_PERSON, VoteMethod.IN_PERSON, VoteMethod.NONE, VoteMethod.MAIL, VoteMethod.NONE]
    voters = {f"t{i}": voter(f"t{i}", v12=m) for i, m in enumerate(methods_t)}
    voters.update({f"c{i}": voter(f"c{i}", v12=m) for i, m in enumerate(methods_c)})
    rows = [drow(k, k.startswith("t")) for k in voters]
    got = {e.category: e for e in historical_balance(rows, voters, "shock")}
    assert (got["in_person"].treated, got["in_person"].control) == (0.25, 0.4)
    assert (got["substitution"].treated, got["substitution"].control) == (0.5, 0.2)
    assert (got["any"].treated, got["any"].control) == (0.75, 0.6)
    assert got["substitution"].pct_diff == pytest.approx(1.5)
    assert got["in_person"].n_control == 2


def test_historical_balance_rejects_distance_design():
    with pytest.raises(DiagnosticsError) as ei:
        historical_balance([], {}, DesignKind.DISTANCE)
    assert ei.value.code == "WRONG_DESIGN"


def test_gap_summary_single_block():
    rows = [drow("a", True), drow("b", True), drow("c", False), drow("d", False)]
    g = gap_summary(rows)
    assert g.pairs == (("B1", 0.2, 0.3),)
    assert g.bins == ((0.3, 0.4, 1),)
    assert g.share_below_one_mile == 1.0 and g.n_blocks_total == 1


def test_gap_summary_empty():
    with pytest.raises(DiagnosticsError) as ei:
        gap_summary([])
    assert ei.value.code == "EMPTY"


def many_blocks(gaps):
    return [drow(f"{k}{t}", t, block=f"B{k:05d}", gap=g) for k, g in enumerate(gaps) for t in (True, False)]


def test_gap_summary_sampling():
    gaps = [0.05 + (k % 37) * 0.04 for k in range(2500)]
    rows = many_blocks(gaps)
    a, b = gap_summary(rows, seed=4), gap_summary(rows, seed=4)
    assert a == b
    assert len(a.pairs) == 1000 and a.n_blocks_total == 2500
    assert len({p[0] for p in a.pairs}) == 1000
    assert gap_summary(rows, seed=5).pairs != a.pairs
    assert sum(n for _, _, n in a.bins) == 1000


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.001, 4.0), min_size=1, max_size=60), st.integers(1, 80))
def test_gap_histogram_counts_sum_to_sample(gaps, size):
    g = gap_summary(many_blocks(gaps), sample_size=size)
    assert sum(n for _, _, n in g.bins) == len(g.pairs) == min(size, len(gaps))
    for _, _, gap in g.pairs:
        assert any(lo - 1e-9 <= gap < hi + 1e-9 for lo, hi, n in g.bins if n)
    assert g.share_below_one_mile == pytest.approx(sum(p[2] < 1 for p in g.pairs) / len(g.pairs))


def est(scope, theta=0.01, outcome="substitution"):
    return EffectEstimate(outcome, theta, 0.001, theta - 0.002, theta + 0.002, 10, 2, 8, scope)


def test_substitution_by_state():
    assert len(substitution_by_state([est("WI")], {"WI": 0.2})) == 1
    rows = substitution_by_state([est("pooled"), est("OH"), est("TX"), est("WI"), est("window>0.5"), est("NC")],
                                 {"OH": 0.3, "WI": 0.1, "NC": 0.2})
    assert [r.state for r in rows] == ["WI", "NC", "OH", "TX"]
    assert [r.flagged for r in rows] == [False, False, False, True]
    assert rows[-1].covariate is None


def test_entries_table():
    rows = substitution_by_state([est("WI")], {})
    text = entries_table(rows).splitlines()
    assert text[0] == "state,outcome,covariate,theta,ci_low,ci_high,flagged"
    assert text[1] == "WI,substitution,,0.01,0.008,0.012,True"
    assert entries_table([]) == ""
