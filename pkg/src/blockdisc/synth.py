"""
Synthetic registrant populations with known treatment effects.

Every block has two faces of 2-6 registrants grouped into households. Vote
choice is drawn from a linear probability model: a registrant votes in
person with probability ``p_in_person + theta_in_person * T``, substitutes
with probability ``p_substitution + theta_substitution * T`` and otherwise
abstains. Household members share their latent uniform draw with
probability ``rho``, which keeps each registrant's marginal rates exact while
correlating outcomes inside a household.

``simulate_arrays`` draws only what the estimator needs and is cheap enough
for Monte Carlo loops. ``generate`` builds the same population with full
geometry and writes files in the ingest formats.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from blockdisc.address import make_address, render_address
from blockdisc.errors import ParamsError
from blockdisc.geocode import GeocodeMetadata, LocationType
from blockdisc.ingest import VOTER_FIELDS, PLACE_FIELDS
from blockdisc.spatial import distance_miles, offset_point

DEMOGRAPHICS = {
    "gender": ("F", "M"),
    "age_group": ("18-29", "30-44", "45-64", "65+"),
    "race": ("asian", "black", "hispanic", "other", "white"),
    "party": ("D", "I", "R"),
}

_STATE_ORIGINS = {
    "WI": (43.04, -87.91), "IA": (41.59, -93.62), "IN": (39.77, -86.16), "OH": (39.96, -83.00),
    "NC": (35.78, -78.64), "HI": (21.31, -157.86), "MN": (44.98, -93.27), "MO": (38.63, -90.20),
    "TX": (30.27, -97.74), "GA": (33.75, -84.39),
}
_CITIES = ("springfield", "riverton", "fairview", "madison", "georgetown")
_STREETS = ("main", "oak", "maple", "cedar", "elm", "pine", "lake", "hill", "park", "washington",
            "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")
_TYPES = ("street", "avenue", "road", "drive", "lane")


@dataclass(frozen=True)
class SynthParams:
    seed: int = 0
    n_blocks: int = 200
    face_size_min: int = 2
    face_size_max: int = 6
    household_size_probs: tuple[float, ...] = (0.5, 0.3, 0.2)  # P(size = 1, 2, 3)
    p_in_person: float = 0.45
    p_substitution: float = 0.25
    theta_in_person: float = -0.016
    theta_substitution: float = 0.017
    design: str = "distance"
    gap_mean_miles: float = 0.5
    states: tuple[str, ...] = ("WI", "IA", "IN", "OH", "NC")
    state_shares: Optional[tuple[float, ...]] = None
    rho: float = 0.3
    shared_2012_share: float = 0.5
    inject_losses: bool = False

    @property
    def theta_any(self) -> float:
        return self.theta_in_person + self.theta_substitution

    def validate(self) -> None:
        probs = []
        for t in (0.0, 1.0):
            p_ip = self.p_in_person + self.theta_in_person * t
            p_sub = self.p_substitution + self.theta_substitution * t
            probs += [p_ip, p_sub, p_ip + p_sub]
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ParamsError("vote probabilities leave [0, 1] for some treatment arm")
        if not 0.0 <= self.rho < 1.0:
            raise ParamsError(f"rho={self.rho} outside [0, 1)")
        if not 2 <= self.face_size_min <= self.face_size_max:
            raise ParamsError("face sizes need 2 <= min <= max")
        if self.face_size_max > 40:
            raise ParamsError("face_size_max above 40 does not fit one hundred-block")
        if self.n_blocks < 1:
            raise ParamsError("n_blocks must be positive")
        if self.design not in ("distance", "shock"):
            raise ParamsError(f"unknown design {self.design!r}")
        if not self.states or any(s not in _STATE_ORIGINS for s in self.states):
            raise ParamsError(f"states must be drawn from {sorted(_STATE_ORIGINS)}")
        if self.state_shares is not None and (len(self.state_shares) != len(self.states)
                                              or abs(sum(self.state_shares) - 1.0) > 1e-9):
            raise ParamsError("state_shares must match states and sum to 1")
        hs = self.household_size_probs
        if not hs or abs(sum(hs) - 1.0) > 1e-9 or min(hs) < 0:
            raise ParamsError("household_size_probs must be a distribution")
        if self.gap_mean_miles <= 0:
            raise ParamsError("gap_mean_miles must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _structure(rng: np.random.Generator, p: SynthParams):
    """Face sizes and household partitions: arrays block, face, household per unit."""
    sizes = rng.integers(p.face_size_min, p.face_size_max + 1, size=(p.n_blocks, 2))
    n = int(sizes.sum())
    block = np.repeat(np.arange(p.n_blocks), sizes.sum(axis=1))
    face = np.concatenate([np.repeat([0, 1], s) for s in sizes])
    # Each face is cut into consecutive households; the last one is truncated to fit.
    hh_sizes = np.arange(1, len(p.household_size_probs) + 1)
    draws = rng.choice(hh_sizes, p=p.household_size_probs, size=(sizes.size, p.face_size_max))
    ends = np.cumsum(draws, axis=1)
    face_idx = np.repeat(np.arange(sizes.size), sizes.ravel())
    pos = np.arange(n) - np.repeat(np.cumsum(sizes.ravel()) - sizes.ravel(), sizes.ravel())
    local = (ends[face_idx] <= pos[:, None]).sum(axis=1)
    _, household = np.unique(face_idx * p.face_size_max + local, return_inverse=True)
    return block, face, household.astype(np.int64), int(household.max()) + 1


def draw_outcomes(rng: np.random.Generator, treat: np.ndarray, household: np.ndarray, n_households: int,
                  p: SynthParams, apply_effect: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Return (in_person, substitution) 0/1 arrays under the linear probability model."""
    t = treat.astype(float) if apply_effect else np.zeros(len(treat))
    shared = rng.random(n_households)[household]
    own = rng.random(len(treat))
    u = np.where(rng.random(len(treat)) < p.rho, shared, own)
    p1 = p.p_in_person + p.theta_in_person * t
    p2 = p.p_substitution + p.theta_substitution * t
    ip = u < p1
    sub = (~ip) & (u < p1 + p2)
    return ip.astype(np.int8), sub.astype(np.int8)


def simulate_arrays(params: SynthParams) -> dict[str, np.ndarray]:
    """
    Estimator-ready arrays without geometry or files.

    Face 1 of every block is the treated face (the farther face in the
    distance design, the reassigned face in the shock design).
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    block, face, household, n_hh = _structure(rng, params)
    treat = face == 1
    ip, sub = draw_outcomes(rng, treat, household, n_hh, params)
    return {
        "block": block, "household": household, "treat": treat,
        "in_person": ip, "substitution": sub, "any": (ip | sub).astype(np.int8),
    }


# --------------------------------------------------------------------------
# full population with geometry
# --------------------------------------------------------------------------

@dataclass
class GroundTruth:
    treatment: dict[str, bool]
    theta: dict[str, float]
    checksum: str
    expected_losses: dict[str, int] = field(default_factory=dict)

    def manifest(self, params: SynthParams) -> dict:
        return {
            "params": params.to_dict(),
            "theta": self.theta,
            "checksum": self.checksum,
            "expected_losses": self.expected_losses,
            "n_units": len(self.treatment),
            "treated_voter_ids": sorted(k for k, v in self.treatment.items() if v),
        }


@dataclass
class SynthOutput:
    voters_2012: bytes
    voters_2016: bytes
    places: bytes
    geocode_replay: bytes
    truth: GroundTruth


def _coord(x: float) -> float:
    return float(f"{x:.7f}")


def _vote_code(ip: int, sub: int, early: bool) -> str:
    if ip:
        return "InPerson"
    if sub:
        return "Early" if early else "Mail"
    return "None"


class _Writer:
    def __init__(self, header):
        self.buf = io.StringIO()
        self.w = csv.writer(self.buf, lineterminator="\n")
        self.header = list(header)
        self.w.writerow(self.header)

    def row(self, d: dict):
        self.w.writerow(["" if d.get(h) is None else d.get(h) for h in self.header])

    def bytes(self) -> bytes:
        return self.buf.getvalue().encode("utf-8")


def generate(params: SynthParams) -> SynthOutput:
    """
    Build a complete synthetic population and serialise it.

    Returns voter files for both snapshots, one polling-place file covering
    both years, a geocode replay fixture for the places, and the ground truth.
    Identical params give byte-identical output.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    block, face, household, n_hh = _structure(rng, params)
    n = len(block)
    shares = params.state_shares or tuple(1.0 / len(params.states) for _ in params.states)
    block_state = rng.choice(len(params.states), size=params.n_blocks, p=shares)

    voters = _Writer(VOTER_FIELDS + tuple(DEMOGRAPHICS))
    voters12 = _Writer(VOTER_FIELDS + tuple(DEMOGRAPHICS))
    places = _Writer(PLACE_FIELDS)
    replay: list[tuple[str, GeocodeMetadata]] = []
    treatment: dict[str, bool] = {}

    # Geometry first: the treated face depends on realised distances.
    hh_point: dict[int, tuple[float, float]] = {}
    hh_number: dict[int, str] = {}
    block_info = []
    unit_place = {2012: np.empty(n, dtype=object), 2016: np.empty(n, dtype=object)}
    treat = np.zeros(n, dtype=bool)
    starts = np.searchsorted(block, np.arange(params.n_blocks))
    ends = np.append(starts[1:], n)
    for j in range(params.n_blocks):
        st = params.states[block_state[j]]
        lat0, lon0 = _STATE_ORIGINS[st]
        clat = lat0 + rng.uniform(-0.5, 0.5)
        clon = lon0 + rng.uniform(-0.5, 0.5)
        city = _CITIES[j % len(_CITIES)]
        county = f"county {j % 7}"
        street = _STREETS[(j // len(_CITIES)) % len(_STREETS)]
        stype = _TYPES[(j // (len(_CITIES) * len(_STREETS))) % len(_TYPES)]
        hundred = 1 + j // (len(_CITIES) * len(_STREETS) * len(_TYPES))
        idx = np.arange(starts[j], ends[j])
        counters = [0, 0]
        for i in idx:
            h = int(household[i])
            if h not in hh_point:
                r = 0.1 * math.sqrt(rng.random())
                hh_point[h] = tuple(map(_coord, offset_point(clat, clon, rng.uniform(0, 360), r)))
                f = int(face[i])
                hh_number[h] = str(hundred * 100 + 2 * counters[f] + f)
                counters[f] += 1
        base_bearing = rng.uniform(0, 360)
        d_a = rng.uniform(0.3, 3.0)

        def place_at(dist, bearing):
            return tuple(map(_coord, offset_point(clat, clon, bearing % 360, dist)))

        pa = place_at(d_a, base_bearing)
        info = {"j": j, "state": st, "city": city, "county": county, "street": street, "stype": stype,
                "hundred": hundred, "places": {}}
        if params.design == "distance":
            gap = min(rng.exponential(params.gap_mean_miles), 20.0)
            pb = place_at(d_a + gap, base_bearing + rng.uniform(90, 270))
            info["places"] = {"A": pa, "B": pb}
            for i in idx:
                lab = "A" if face[i] == 0 else "B"
                unit_place[2012][i] = unit_place[2016][i] = lab
            means = {}
            for f, lab in ((0, "A"), (1, "B")):
                members = idx[face[idx] == f]
                means[f] = math.fsum(distance_miles(hh_point[int(household[i])], info["places"][lab])
                                     for i in members) / len(members)
            farther = 0 if means[0] > means[1] else 1
            treat[idx] = face[idx] == farther
        else:
            shock = rng.normal(0.2, 0.6)
            pc = place_at(max(0.2, d_a + shock), base_bearing + rng.uniform(90, 270))
            shared = rng.random() < params.shared_2012_share
            if shared:
                info["places"] = {"A": pa, "C": pc}
                old_b = "A"
            else:
                info["places"] = {"A": pa, "B": place_at(d_a, base_bearing + 180.0), "C": pc}
                old_b = "B"
            info["years"] = {2012: ("A", old_b), 2016: ("A", "C")}
            for i in idx:
                unit_place[2012][i] = "A" if face[i] == 0 else old_b
                unit_place[2016][i] = "A" if face[i] == 0 else "C"
            treat[idx] = face[idx] == 1
        block_info.append(info)

    ip16, sub16 = draw_outcomes(rng, treat, household, n_hh, params)
    ip12, sub12 = draw_outcomes(rng, treat, household, n_hh, params,
                                apply_effect=params.design == "distance")
    early16 = rng.random(n) < 0.5
    early12 = rng.random(n) < 0.5
    demo = {k: rng.integers(0, len(v), size=n) for k, v in DEMOGRAPHICS.items()}
    price_by_hh = np.round(np.exp(rng.normal(12.2, 0.5, size=n_hh)), -2)

    def precinct(j: int, lab: str) -> str:
        return f"precinct {j}-{lab}"

    place_used: dict[int, set[str]] = {2012: set(), 2016: set()}
    for year in (2012, 2016):
        for info in block_info:
            j = info["j"]
            labels = sorted(set(unit_place[year][starts[j]:ends[j]]))
            for lab in labels:
                place_used[year].add((j, lab))

    for i in range(n):
        j = int(block[i])
        info = block_info[j]
        h = int(household[i])
        vid = f"V{j:06d}-{i - starts[j]:02d}"
        treatment[vid] = bool(treat[i])
        lat, lon = hh_point[h]
        base = {
            "voter_id": vid, "street": f"{hh_number[h]} {info['street']} {info['stype']}",
            "city": info["city"], "state": info["state"], "zip": "",
            "lat": f"{lat:.7f}", "lon": f"{lon:.7f}", "geo_precision": "Street",
            "usps_code": "StreetAddress", "address_match": "1", "registered": "1", "deceased": "0",
            "county": info["county"], "household_key": f"H{h:07d}",
            "home_sale_price": f"{price_by_hh[h]:.0f}",
        }
        for k, v in DEMOGRAPHICS.items():
            base[k] = v[demo[k][i]]
        v12 = _vote_code(ip12[i], sub12[i], bool(early12[i]))
        voters12.row({**base, "precinct": precinct(j, unit_place[2012][i]),
                      "vote_2012": v12, "vote_2016": ""})
        voters.row({**base, "precinct": precinct(j, unit_place[2016][i]),
                    "vote_2012": v12, "vote_2016": _vote_code(ip16[i], sub16[i], bool(early16[i]))})

    for year in (2012, 2016):
        for j, lab in sorted(place_used[year]):
            info = block_info[j]
            plat, plon = info["places"][lab]
            addr = make_address(f"{1000 + 4 * j + 'ABC'.index(lab)} center street", info["city"], info["state"])
            places.row({
                "place_id": f"PP-{j}-{lab}", "election_year": year, "street": addr.street_line,
                "city": info["city"], "state": info["state"], "zip": "",
                "place_description": f"{info['street']} school {j}{lab.lower()}",
                "precinct": precinct(j, lab), "county": info["county"],
                "lat": f"{plat:.7f}", "lon": f"{plon:.7f}",
            })
            replay.append((render_address(addr), GeocodeMetadata(LocationType.ROOFTOP, frozenset(), addr,
                                                                 (plat, plon))))

    expected: dict[str, int] = {}
    if params.inject_losses:
        expected = _inject_losses(rng, voters12, voters, places, replay)

    replay_lines = "".join(json.dumps({"query": q, **m.to_dict()}, sort_keys=True) + "\n"
                           for q, m in _dedupe_replay(replay))
    out = SynthOutput(voters12.bytes(), voters.bytes(), places.bytes(), replay_lines.encode("utf-8"),
                      truth=None)  # type: ignore[arg-type]
    digest = hashlib.sha256()
    for part in (json.dumps(params.to_dict(), sort_keys=True).encode(), out.voters_2012, out.voters_2016,
                 out.places, out.geocode_replay):
        digest.update(hashlib.sha256(part).digest())
    out.truth = GroundTruth(
        treatment=treatment,
        theta={"in_person": params.theta_in_person, "substitution": params.theta_substitution,
               "any": params.theta_any},
        checksum=digest.hexdigest(),
        expected_losses=expected,
    )
    return out


def _dedupe_replay(entries):
    seen = {}
    for q, m in entries:
        seen.setdefault(q, m)
    return sorted(seen.items())


def _inject_losses(rng, voters12: _Writer, voters16: _Writer, places: _Writer, replay) -> dict[str, int]:
    """
    Append registrants engineered to fail stages 5-7 exactly.

    Stage 5: a 3-person block with one member 0.5 miles away.
    Stage 6: 2 registrants whose 2012 address is on a different block.
    Stage 7: a 4-person block where one address has two precincts.
    """
    st, city, county = "WI", "lossville", "county loss"
    lat0, lon0 = 43.2, -88.1

    def add_place(tag, plat, plon):
        addr = make_address(f"{900 + 2 * 'AB'.index(tag)} center street", city, st)
        for year in (2012, 2016):
            places.row({"place_id": f"PP-L-{tag}", "election_year": year, "street": addr.street_line,
                        "city": city, "state": st, "zip": "", "place_description": "",
                        "precinct": f"precinct L-{tag}", "county": county,
                        "lat": f"{plat:.7f}", "lon": f"{plon:.7f}"})
        replay.append((render_address(addr), GeocodeMetadata(LocationType.ROOFTOP, frozenset(), addr,
                                                             (plat, plon))))

    add_place("A", _coord(lat0 + 0.01), _coord(lon0))
    add_place("B", _coord(lat0 - 0.01), _coord(lon0))

    def voter(vid, number, street, lat, lon, tag, hh):
        d = {"voter_id": vid, "street": f"{number} {street}", "city": city, "state": st, "zip": "",
             "lat": f"{lat:.7f}", "lon": f"{lon:.7f}", "geo_precision": "Street",
             "usps_code": "StreetAddress", "address_match": "1", "registered": "1", "deceased": "0",
             "precinct": f"precinct L-{tag}", "county": county, "household_key": hh,
             "vote_2012": "None", "home_sale_price": ""}
        for k, v in DEMOGRAPHICS.items():
            d[k] = v[0]
        return d

    rows12, rows16 = [], []
    far_lat = _coord(lat0 + 0.5 / 69.0)
    for k, (la, tag) in enumerate(((lat0, "A"), (lat0, "A"), (far_lat, "B"))):
        d = voter(f"L5-{k}", 102 + 2 * k, "far street", la, lon0, tag, f"HL5-{k}")
        rows12.append(d)
        rows16.append(d)
    for k in range(2):
        d16 = voter(f"L6-{k}", 202 + 2 * k, "mover street", lat0, lon0, "A", f"HL6-{k}")
        d12 = voter(f"L6-{k}", 502 + 2 * k, "old street", lat0, lon0, "A", f"HL6-{k}")
        rows12.append(d12)
        rows16.append(d16)
    for k, (num, tag) in enumerate(((302, "A"), (302, "B"), (304, "A"), (306, "B"))):
        d = voter(f"L7-{k}", num, "clash street", lat0 + 0.0001 * (num - 300), lon0, tag, f"HL7-{k}")
        rows12.append(d)
        rows16.append(d)
    for d in rows12:
        voters12.row({**d, "vote_2016": ""})
    for d in rows16:
        voters16.row({**d, "vote_2016": "None"})
    return {"stage5": 3, "stage6": 2, "stage7": 4}


def write_output(out: SynthOutput, params: SynthParams, directory) -> dict[str, str]:
    """Write the synthetic files plus a manifest and a runnable config into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    files = {
        "voters_2012": "voters_2012.csv",
        "voters_2016": "voters_2016.csv",
        "places_2012": "places.csv",
        "places_2016": "places.csv",
        "geocode_replay": "geocode_replay.jsonl",
    }
    for name, content in (("voters_2012.csv", out.voters_2012), ("voters_2016.csv", out.voters_2016),
                          ("places.csv", out.places), ("geocode_replay.jsonl", out.geocode_replay)):
        with open(os.path.join(directory, name), "wb") as fh:
            fh.write(content)
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(out.truth.manifest(params), fh, indent=2, sort_keys=True)
        fh.write("\n")
    config = {
        "inputs": files,
        "voter_format": {"demographics": list(DEMOGRAPHICS)},
        "seed": params.seed,
        "output_dir": "out",
    }
    with open(os.path.join(directory, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {k: os.path.join(directory, v) for k, v in files.items()}
