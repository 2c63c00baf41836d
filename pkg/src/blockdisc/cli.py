"""
Command-line driver.

``blockdisc run --config cfg.json`` executes every stage and writes the
final artifacts. The other subcommands run one stage each, reading the
previous stage's artifacts from ``--out`` and writing their own next to them.
Exit status is 0 on success and 2 on a fatal error; warnings go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from typing import Any, Optional, Sequence

from blockdisc import __version__
from blockdisc.assignment import read_assignments, write_assignments
from blockdisc.blocks import Eligible, block_id, run_filter_pipeline
from blockdisc.designs import (
    DEFAULT_WINDOWS, DesignKind, read_design, window_subset, write_design,
)
from blockdisc.diagnostics import balance_table, historical_balance
from blockdisc.errors import BlockDiscError
from blockdisc.estimator import Outcome, estimate_all, estimate_fe
from blockdisc.geocode import StubGeocoder, load_replay, validate_places
from blockdisc.ingest import (
    FormatSpec, PollingPlace, VoterRecord, parse_polling_place_file, parse_voter_file, write_rejects,
)
from blockdisc.synth import SynthParams, generate, write_output
from blockdisc.workflow import DesignResult, Thresholds, analyze, assign_years, select_design

PROG = "blockdisc"
_UNHASHED = ("output_dir", "threads")


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

class Config:
    """Parsed run configuration with paths resolved against the config file's directory."""

    def __init__(self, raw: dict, base_dir: str):
        self.raw = raw
        self.base_dir = base_dir
        inputs = raw.get("inputs", {})
        self.inputs = {k: (None if v is None else self._path(v)) for k, v in inputs.items()}
        self.thresholds = Thresholds(**raw.get("thresholds", {}))
        w = raw.get("windows")
        self.windows = DEFAULT_WINDOWS if w is None else tuple(-math.inf if x is None else float(x) for x in w)
        self.seed = int(raw.get("seed", 0))
        self.output_dir = self._path(raw["output_dir"]) if raw.get("output_dir") else None
        self.threads = raw.get("threads")
        self.voter_format = _format(raw.get("voter_format"), FormatSpec.voters)
        self.place_format = raw.get("place_format")

    def _path(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(self.base_dir, p))

    def require(self, *names: str) -> None:
        for n in names:
            p = self.inputs.get(n)
            if p is None:
                raise CliError(f"config has no inputs.{n}")
            if not os.path.exists(p):
                raise CliError(f"input {n} not found: {p}")

    @property
    def hash(self) -> str:
        canon = {k: v for k, v in self.raw.items() if k not in _UNHASHED}
        return hashlib.sha256(json.dumps(canon, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def _format(d: Optional[dict], default_factory, **kw) -> FormatSpec:
    if not d:
        return default_factory(**kw)
    if "columns" in d:
        return FormatSpec.from_dict({**d, **kw})
    return default_factory(demographics=d.get("demographics", ()), **kw) if default_factory is FormatSpec.voters \
        else default_factory(**kw)


def load_config(path: Optional[str]) -> Config:
    if path is None:
        return Config({}, os.getcwd())
    if not os.path.exists(path):
        raise CliError(f"config not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise CliError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise CliError(f"config {path} must be a JSON object")
    return Config(raw, os.path.dirname(os.path.abspath(path)))


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("BLOCKDISC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"BLOCKDISC_THREADS={env!r} is not an integer") from None
    return 1


def _out_dir(args, cfg: Config) -> str:
    out = args.out or cfg.output_dir
    if out is None:
        raise CliError("no output directory: pass --out or set output_dir in the config")
    os.makedirs(out, exist_ok=True)
    return out


def _seed(args, cfg: Config) -> int:
    return cfg.seed if args.seed is None else int(args.seed)


# --------------------------------------------------------------------------
# artifact I/O
# --------------------------------------------------------------------------

def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def write_json(path: str, data: Any, cfg: Config, seed: int) -> None:
    doc = {"provenance": {"config_hash": cfg.hash, "seed": seed, "version": __version__}, "data": _clean(data)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_jsonl(path: str, items) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in items:
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def _read_jsonl(path: str) -> list[dict]:
    if not os.path.exists(path):
        raise CliError(f"missing stage artifact: {path}")
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _need(path: str) -> str:
    if not os.path.exists(path):
        raise CliError(f"missing stage artifact: {path}")
    return path


def _read_places(cfg: Config, threads: int) -> tuple[list[PollingPlace], dict]:
    p12, p16 = cfg.inputs["places_2012"], cfg.inputs["places_2016"]
    places, rejects = [], {}
    if p12 == p16:
        fmt = _format(cfg.place_format, FormatSpec.places)
        places, rejects["places"] = parse_polling_place_file(p12, fmt, threads=threads)
    else:
        for year, path in ((2012, p12), (2016, p16)):
            fmt = _format(cfg.place_format, FormatSpec.places, default_year=year)
            got, rejects[f"places_{year}"] = parse_polling_place_file(path, fmt, threads=threads)
            places.extend(p for p in got if p.election_year == year)
    return places, rejects


def _read_inputs(cfg: Config, threads: int):
    cfg.require("voters_2012", "voters_2016", "places_2012", "places_2016")
    v12, r12 = parse_voter_file(cfg.inputs["voters_2012"], cfg.voter_format, threads=threads)
    v16, r16 = parse_voter_file(cfg.inputs["voters_2016"], cfg.voter_format, threads=threads)
    places, place_rejects = _read_places(cfg, threads)
    return v12, v16, places, {"voters_2012": r12, "voters_2016": r16, **place_rejects}


def read_county_flags(path: Optional[str]) -> dict:
    """CSV with columns state, county; every listed county used vote centers."""
    if path is None:
        return {}
    if not os.path.exists(path):
        raise CliError(f"input vote_center_counties not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "county" not in reader.fieldnames:
            raise CliError(f"{path}: needs a 'county' column")
        out = {}
        for r in reader:
            key = (r["state"], r["county"]) if r.get("state") else r["county"]
            out[key] = True
        return out


def read_state_covariates(path: Optional[str]) -> Optional[dict[str, float]]:
    """CSV with columns state, covariate."""
    if path is None:
        return None
    if not os.path.exists(path):
        raise CliError(f"input state_covariates not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        out = {}
        for r in csv.DictReader(fh):
            try:
                out[r["state"].strip().upper()] = float(r["covariate"])
            except (KeyError, TypeError, ValueError):
                raise CliError(f"{path}: rows need state and numeric covariate") from None
        return out


def _client(cfg: Config, seed: int):
    replay = cfg.inputs.get("geocode_replay")
    if replay is None:
        return None
    if not os.path.exists(replay):
        raise CliError(f"input geocode_replay not found: {replay}")
    return StubGeocoder(seed, replay=load_replay(replay))


# --------------------------------------------------------------------------
# serialisation of results
# --------------------------------------------------------------------------

def _design_payload(res: DesignResult) -> dict:
    return {
        "estimates": [e.to_dict() for e in res.estimates],
        "substitution_by_state": [r.to_dict() for r in res.by_state],
        "n_rows": len(res.rows),
        "drops": dict(sorted(_count(r for _, r in res.drops).items())),
    }


def _count(items) -> dict[str, int]:
    out: dict[str, int] = {}
    for i in items:
        out[i] = out.get(i, 0) + 1
    return out


def _balance_payload(res: DesignResult) -> dict:
    d = {"demographics": [e.to_dict() for e in res.balance]}
    if res.kind is DesignKind.SHOCK:
        d["history_2012"] = [e.to_dict() for e in res.history]
    return d


def _warn(msg: str) -> None:
    print(f"{PROG}: warning: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    threads = _threads(args)
    seed = _seed(args, cfg)
    cfg.require("voters_2012", "voters_2016", "places_2012", "places_2016")
    flags = read_county_flags(cfg.inputs.get("vote_center_counties"))
    covariates = read_state_covariates(cfg.inputs.get("state_covariates"))
    client = _client(cfg, seed)
    out = _out_dir(args, cfg)
    v12, v16, places, rejects = _read_inputs(cfg, threads)
    res = analyze(v12, v16, places, flags, client=client, thresholds=cfg.thresholds, windows=cfg.windows,
                  state_covariate=covariates, seed=seed)
    for name, rej in rejects.items():
        if rej:
            _warn(f"{len(rej)} rejected row(s) in {name}")
    for w in res.warnings:
        _warn(w)

    write_json(os.path.join(out, "ledger.json"), res.ledger.to_records(), cfg, seed)
    for kind in DesignKind:
        write_design(res.designs[kind.value].rows, os.path.join(out, f"design_{kind.value}.csv"))
    write_json(os.path.join(out, "estimates.json"),
               {k: _design_payload(v) for k, v in res.designs.items()}, cfg, seed)
    write_json(os.path.join(out, "balance.json"),
               {k: _balance_payload(v) for k, v in res.designs.items()}, cfg, seed)
    write_json(os.path.join(out, "gaps.json"),
               {k: (None if v.gaps is None else v.gaps.to_dict()) for k, v in res.designs.items()}, cfg, seed)
    write_json(os.path.join(out, "shock_types.json"), res.shock_types.to_dict(), cfg, seed)
    return 0


def cmd_ingest(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    v12, v16, places, rejects = _read_inputs(cfg, _threads(args))
    _write_jsonl(os.path.join(out, "voters_2012.jsonl"), (v.to_dict() for v in v12))
    _write_jsonl(os.path.join(out, "voters_2016.jsonl"), (v.to_dict() for v in v16))
    _write_jsonl(os.path.join(out, "places.jsonl"), (p.to_dict() for p in places))
    for name, rej in rejects.items():
        write_rejects(rej, os.path.join(out, f"rejects_{name}.csv"))
        if rej:
            _warn(f"{len(rej)} rejected row(s) in {name}")
    return 0


def _load_places(out: str) -> list[PollingPlace]:
    validated = os.path.join(out, "places_validated.jsonl")
    path = validated if os.path.exists(validated) else os.path.join(out, "places.jsonl")
    return [PollingPlace.from_dict(d) for d in _read_jsonl(path)]


def cmd_geocode(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    places = [PollingPlace.from_dict(d) for d in _read_jsonl(os.path.join(out, "places.jsonl"))]
    client = _client(cfg, seed) or StubGeocoder(seed)
    updated, decisions, unavailable = validate_places(places, client)
    _write_jsonl(os.path.join(out, "places_validated.jsonl"), (p.to_dict() for p in updated))
    write_json(os.path.join(out, "geocode_decisions.json"), [
        {"place_id": p.place_id, "election_year": p.election_year, "verdict": d.verdict.value,
         "basis": None if d.basis is None else d.basis.value, "reason": d.reason}
        for p, d in decisions
    ] + [{"place_id": p.place_id, "election_year": p.election_year, "verdict": "unavailable",
          "basis": None, "reason": "GEOCODER_UNAVAILABLE"} for p in unavailable], cfg, seed)
    if unavailable:
        _warn(f"geocoder unavailable for {len(unavailable)} polling place(s)")
    return 0


def cmd_blocks(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    v12 = [VoterRecord.from_dict(d) for d in _read_jsonl(os.path.join(out, "voters_2012.jsonl"))]
    v16 = [VoterRecord.from_dict(d) for d in _read_jsonl(os.path.join(out, "voters_2016.jsonl"))]
    places = _load_places(out)
    flags = read_county_flags(cfg.inputs.get("vote_center_counties"))
    assigns, _ = assign_years(v12, v16, places, cfg.thresholds.assignment_max_miles)
    eligible, ledger = run_filter_pipeline(v12, v16, assigns[2012], assigns[2016], flags,
                                           block_pair_miles=cfg.thresholds.block_pair_miles)
    write_json(os.path.join(out, "ledger.json"), ledger.to_records(), cfg, seed)
    _write_jsonl(os.path.join(out, "eligible_2016.jsonl"),
                 (eligible.voters[2016][i].to_dict() for i in sorted(eligible.voters[2016])))
    for y in (2012, 2016):
        write_assignments([eligible.assignments[y][i] for i in sorted(eligible.assignments[y])],
                          os.path.join(out, f"eligible_assignments_{y}.csv"))
    return 0


def _load_eligible(out: str) -> Eligible:
    voters = {d["voter_id"]: VoterRecord.from_dict(d) for d in _read_jsonl(os.path.join(out, "eligible_2016.jsonl"))}
    assigns = {y: {a.voter_id: a for a in read_assignments(_need(os.path.join(out, f"eligible_assignments_{y}.csv")))}
               for y in (2012, 2016)}
    block_of = {i: block_id(v.address) for i, v in voters.items()}
    return Eligible({2016: voters}, assigns, block_of)


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    eligible = _load_eligible(out)
    rows, drops = select_design(args.design, eligible, cfg.thresholds)
    write_design(rows, os.path.join(out, f"design_{args.design}.csv"))
    if not rows:
        _warn(f"{args.design} design selected no blocks; wrote an empty design file")
    return 0


def _load_design(out: str, design: str):
    return read_design(_need(os.path.join(out, f"design_{design}.csv")))


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    rows = _load_design(out, args.design)
    outcomes = [Outcome(o) for o in (args.outcome or [o.value for o in Outcome])]
    if args.window is not None:
        rows = window_subset(rows, args.window)
    if not rows:
        _warn(f"{args.design} design has no rows to estimate")
        estimates = []
    else:
        scope = "pooled" if args.window is None else f"window>{args.window:g}"
        estimates = [estimate_fe(rows, o, scope=scope) for o in outcomes]
        if args.by_state:
            estimates += [e for e in estimate_all(rows, outcomes, by_state=True) if e.scope != "pooled"]
    write_json(os.path.join(out, "estimates.json"), {args.design: [e.to_dict() for e in estimates]}, cfg, seed)
    for e in estimates:
        print(f"{e.scope}\t{e.outcome}\t{e.theta_hat:.6f}\t[{e.ci_low:.6f}, {e.ci_high:.6f}]\tn={e.n_units}")
    return 0


def cmd_balance(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    rows = _load_design(out, args.design)
    voters = _load_eligible(out).voters[2016]
    res = DesignResult(DesignKind(args.design), rows, [])
    if rows:
        res.balance = balance_table(rows, voters)
        if res.kind is DesignKind.SHOCK:
            res.history = historical_balance(rows, voters, res.kind)
    else:
        _warn(f"{args.design} design has no rows")
    write_json(os.path.join(out, "balance.json"), {args.design: _balance_payload(res)}, cfg, seed)
    return 0


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    raw = dict(cfg.raw.get("synth", {}))
    for k in ("n_blocks", "design", "rho", "theta_in_person", "theta_substitution"):
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    if args.inject_losses:
        raw["inject_losses"] = True
    raw["seed"] = _seed(args, cfg)
    for k in ("household_size_probs", "states", "state_shares"):
        if raw.get(k) is not None:
            raw[k] = tuple(raw[k])
    try:
        params = SynthParams(**raw)
    except TypeError as e:
        raise CliError(f"bad synth parameters: {e}") from None
    out = _out_dir(args, cfg)
    result = generate(params)
    write_output(result, params, out)
    print(result.truth.checksum)
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=PROG, description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="artifact directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    common.add_argument("--threads", type=int, help="worker threads (default $BLOCKDISC_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="run every stage").set_defaults(func=cmd_run)
    sub.add_parser("ingest", parents=[common], help="parse input files").set_defaults(func=cmd_ingest)
    sub.add_parser("geocode", parents=[common], help="validate polling-place geocodes").set_defaults(func=cmd_geocode)
    sub.add_parser("blocks", parents=[common], help="assign places and apply filters").set_defaults(func=cmd_blocks)

    designs = [k.value for k in DesignKind]
    sp = sub.add_parser("design", parents=[common], help="select a design")
    sp.add_argument("--design", choices=designs, default="distance")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("estimate", parents=[common], help="fit the within-block estimator")
    sp.add_argument("--design", choices=designs, default="distance")
    sp.add_argument("--outcome", choices=[o.value for o in Outcome], action="append")
    sp.add_argument("--by-state", action="store_true")
    sp.add_argument("--window", type=float, help="keep blocks whose gap exceeds this many miles")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("balance", parents=[common], help="treated-vs-control balance")
    sp.add_argument("--design", choices=designs, default="distance")
    sp.set_defaults(func=cmd_balance)

    sp = sub.add_parser("synth", parents=[common], help="write a synthetic population")
    sp.add_argument("--n-blocks", dest="n_blocks", type=int)
    sp.add_argument("--design", choices=designs)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--theta-in-person", dest="theta_in_person", type=float)
    sp.add_argument("--theta-substitution", dest="theta_substitution", type=float)
    sp.add_argument("--inject-losses", action="store_true")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, BlockDiscError, OSError, KeyError, ValueError, TypeError) as e:
        msg = str(e) or type(e).__name__
        if isinstance(e, KeyError):
            msg = f"missing field {e.args[0]!r}"
        print(f"{PROG}: error: {msg}".splitlines()[0], file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
