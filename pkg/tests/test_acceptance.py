"""
Primary acceptance criteria. Each test records one PASS/FAIL line, listed
under "acceptance criteria" at the end of the pytest run.
"""

import json
import math
import os
import time

import numpy as np

from blockdisc.address import parse_address
from blockdisc.blocks import STAGE_INPUT, STAGES, run_filter_pipeline
from blockdisc.designs import DesignRow
from blockdisc.diagnostics import balance_table, max_abs_diff
from blockdisc.estimator import Outcome, estimate_dense_oracle, estimate_fe, fe_core
from blockdisc.geocode import GeocodeMetadata, LocationType, Verdict, validate_location
from blockdisc.ingest import FormatSpec, GeoPrecision, UspsCode, VoterRecord, parse_polling_place_file, parse_voter_file
from blockdisc.spatial import distance_miles
from blockdisc.synth import DEMOGRAPHICS, SynthParams, simulate_arrays
from blockdisc.workflow import assign_years

import geocode_table
import popgen
from invariants import check_block_invariants, check_design_invariants, check_windows_nested
from rowgen import random_rows, rng
from test_geocode import BASIS, FixedClient

OUTCOMES = (Outcome.IN_PERSON, Outcome.SUBSTITUTION, Outcome.ANY)
RECOVERY_SEEDS = range(200)
RECOVERY_BLOCKS = 5000


def test_estimator_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rows = random_rows(rng(10_000 + seed), max_blocks=50, max_units=10)
        for o in OUTCOMES:
            a, b = estimate_fe(rows, o), estimate_dense_oracle(rows, o)
            for x, y in ((a.theta_hat, b.theta_hat), (a.se, b.se)):
                worst = max(worst, abs(x - y) / max(abs(y), 1e-300) if y else abs(x))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10
    report("estimator oracle equivalence", ok, f"max rel diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


def _recovery(theta_ip, theta_sub, design, seeds):
    truth = {Outcome.IN_PERSON: theta_ip, Outcome.SUBSTITUTION: theta_sub, Outcome.ANY: theta_ip + theta_sub}
    covered = dict.fromkeys(OUTCOMES, 0)
    any_theta, any_se = [], []
    for seed in seeds:
        p = SynthParams(seed=seed, n_blocks=RECOVERY_BLOCKS, design=design,
                        theta_in_person=theta_ip, theta_substitution=theta_sub)
        a = simulate_arrays(p)
        t = a["treat"].astype(float)
        for o in OUTCOMES:
            theta, se, *_ = fe_core(a["block"], a["household"], t, a[o.value].astype(float))
            covered[o] += theta - 1.959964 * se <= truth[o] <= theta + 1.959964 * se
            if o is Outcome.ANY:
                any_theta.append(theta)
                any_se.append(se)
    n = len(seeds)
    return {o.value: c / n for o, c in covered.items()}, float(np.mean(any_theta)), float(np.mean(any_se)) / math.sqrt(n)


def _coverage_text(cov):
    return ", ".join(f"{k} {v:.1%}" for k, v in cov.items())


def test_distance_recovery(report):
    t0 = time.perf_counter()
    cov, mean_any, se_mean = _recovery(-0.016, 0.017, "distance", RECOVERY_SEEDS)
    elapsed = time.perf_counter() - t0
    # "pooled theta(any) within 3 SE of +0.001": mean over seeds against the SE of that mean
    any_ok = abs(mean_any - 0.001) <= 3 * se_mean
    ok = min(cov.values()) >= 0.90 and any_ok and elapsed < 120
    report("distance recovery", ok, f"coverage {_coverage_text(cov)}; mean theta(any) {mean_any:+.5f} "
           f"vs +0.001, 3 SE = {3 * se_mean:.5f}; {elapsed:.1f}s")
    assert ok


def test_shock_recovery(report):
    t0 = time.perf_counter()
    cov, _, _ = _recovery(-0.013, 0.008, "shock", RECOVERY_SEEDS)
    elapsed = time.perf_counter() - t0
    ok = min(cov.values()) >= 0.90 and elapsed < 120
    report("shock recovery", ok, f"coverage {_coverage_text(cov)}; {elapsed:.1f}s")
    assert ok


def test_recovery_coverage_long_run(report):
    # Supplementary: the same harness over 1000 seeds, to separate seed noise from SE bias.
    lines = []
    for design, ip, sub in (("distance", -0.016, 0.017), ("shock", -0.013, 0.008)):
        cov, _, _ = _recovery(ip, sub, design, range(1000))
        lines.append(f"{design}: {_coverage_text(cov)}")
    report("supplementary 1000-seed coverage (informational)", True, "; ".join(lines))


def test_geocode_decision_table(report):
    cases = geocode_table.cases()
    matches = 0
    for loc, tag, match, has_place, verdict, basis, reason in cases:
        m = GeocodeMetadata(LocationType[loc], frozenset(geocode_table.TAGS[tag]),
                            parse_address(geocode_table.FORMATTED[match]), (43.0, -87.9))
        d = validate_location(parse_address(geocode_table.ORIGINAL),
                              geocode_table.PLACE_DESC if has_place else None, FixedClient(m))
        matches += (d.verdict is Verdict[verdict] and d.basis is (None if basis is None else BASIS[basis])
                    and d.reason == reason)
    ok = len(cases) == 48 and matches == 48
    report("geocode decision table", ok, f"{matches}/{len(cases)} cases")
    assert ok


def _fixture_ledger(data_dir, threads):
    fmt = FormatSpec.voters(demographics=("gender", "age_group"))
    v12, _ = parse_voter_file(os.path.join(data_dir, "ledger_voters_2012.csv"), fmt, threads=threads)
    v16, _ = parse_voter_file(os.path.join(data_dir, "ledger_voters_2016.csv"), fmt, threads=threads)
    places, _ = parse_polling_place_file(os.path.join(data_dir, "ledger_places.csv"), threads=threads)
    a, _ = assign_years(v12, v16, places)
    return run_filter_pipeline(v12, v16, a[2012], a[2016], {("WI", "waukesha"): True})[1]


def test_filter_ledger_golden(report, data_dir):
    with open(os.path.join(data_dir, "ledger_golden.json"), encoding="utf-8") as fh:
        golden = fh.read()
    outputs = [_fixture_ledger(data_dir, t).to_json() for t in (1, 1, 2, 4, 8)]
    records = json.loads(outputs[0])
    counts = [r["n2016"] for r in records]
    ok = (all(o == golden for o in outputs) and counts == [40, 36, 30, 27, 25, 20, 12, 10]
          and [r["n2012"] for r in records] == counts
          and [r["stage"] for r in records] == [STAGE_INPUT, *STAGES] and len(STAGES) == 7)
    report("filter-ledger golden", ok, f"counts {counts}; {len(set(outputs))} distinct JSON output(s) over 5 runs")
    assert ok


def test_block_invariants(report):
    n_blocks = n_distance = n_shock = 0
    failures = []
    for seed in range(150):
        spread = 0.05 + 0.25 * (seed % 6) / 5
        v12, v16, places = popgen.population(seed, n_blocks=8, spread_miles=spread)
        a, _ = assign_years(v12, v16, places)
        eligible, _ = run_filter_pipeline(v12, v16, a[2012], a[2016], {})
        try:
            blocks, _ = eligible.blocks(2016)
            check_block_invariants(eligible, blocks)
            rows, srows = check_design_invariants(eligible)
            check_windows_nested(rows)
            check_windows_nested(srows)
        except AssertionError as e:
            failures.append((seed, str(e)[:80]))
            continue
        n_blocks += len(blocks)
        n_distance += len({r.block_id for r in rows})
        n_shock += len({r.block_id for r in srows})
    ok = not failures and n_blocks > 0 and n_distance > 0 and n_shock > 0
    report("block invariants", ok, f"150 geometries, {n_blocks} blocks, {n_distance} distance / {n_shock} shock "
           f"design blocks, {len(failures)} violation(s)")
    assert ok, failures[:3]


def test_balance_convergence(report):
    g = np.random.default_rng(20_161_108)
    n = 100_000
    voters, rows = {}, []
    draws = {name: g.integers(0, len(cats), size=n) for name, cats in DEMOGRAPHICS.items()}
    treat = np.tile([True, True, True, True, False, False, False, False], n // 8)
    for i in range(n):
        vid = f"v{i}"
        demo = {name: DEMOGRAPHICS[name][int(draws[name][i])] for name in DEMOGRAPHICS}
        voters[vid] = VoterRecord(vid, None, None, GeoPrecision.STREET, UspsCode.STREET_ADDRESS, True, True, False,
                                  "p", "c", "WI", vid, demographics=demo)
        rows.append(DesignRow(vid, f"b{i // 8}", vid, "WI", bool(treat[i]), 0, 0, 0, 1.0, 1.0, 0.1))
    worst = max_abs_diff(balance_table(rows, voters))
    ok = worst < 0.02
    report("balance convergence", ok, f"N={n}, max |abs_diff| = {worst:.4f}")
    assert ok


def test_spatial_checks(report):
    g = np.random.default_rng(7)
    pts = list(zip(g.uniform(-90, 90, 3000), g.uniform(-180, 180, 3000)))
    sym = all(distance_miles(a, b) == distance_miles(b, a) for a, b in zip(pts[::2], pts[1::2]))
    ident = all(distance_miles(p, p) == 0.0 for p in pts)
    tri = all(distance_miles(a, c) <= distance_miles(a, b) + distance_miles(b, c) + 1e-9
              for a, b, c in zip(pts[0::3], pts[1::3], pts[2::3]))
    d = distance_miles((0.0, 0.0), (0.0, 1.0))
    ok = sym and ident and tri and abs(d - 69.09) < 0.01
    report("spatial checks", ok, f"symmetry {sym}, identity {ident}, triangle {tri}, 1 degree = {d:.4f} mi")
    assert ok
