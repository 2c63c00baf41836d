"""Great-circle distances in miles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from blockdisc.errors import CoordinateError

# Fixed so that ledgers and golden files are bit-stable.
EARTH_RADIUS_MILES = 3958.7613


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        check_coordinate(self.lat, self.lon)


def check_coordinate(lat: float, lon: float) -> None:
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise CoordinateError(f"non-finite coordinate ({lat}, {lon})")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise CoordinateError(f"coordinate out of bounds ({lat}, {lon})")


def distance_miles(a, b) -> float:
    """
    Haversine distance between two points.

    ``a`` and ``b`` may be GeoPoints or plain ``(lat, lon)`` pairs; pairs are
    range-checked the same way GeoPoint is.
    """
    lat1, lon1 = _unpack(a)
    lat2, lon2 = _unpack(b)
    if lat1 == lat2 and lon1 == lon2:
        return 0.0
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_MILES * math.asin(math.sqrt(h))


def _unpack(p) -> tuple[float, float]:
    if isinstance(p, GeoPoint):
        return p.lat, p.lon
    lat, lon = float(p[0]), float(p[1])
    check_coordinate(lat, lon)
    return lat, lon


def pairwise_miles(lats, lons) -> np.ndarray:
    """Symmetric matrix of haversine distances for small point sets."""
    phi = np.radians(np.asarray(lats, dtype=float))
    lmb = np.radians(np.asarray(lons, dtype=float))
    dphi = phi[:, None] - phi[None, :]
    dlmb = lmb[:, None] - lmb[None, :]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlmb / 2.0) ** 2
    np.clip(h, 0.0, 1.0, out=h)
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(h))


def max_pairwise_miles(points) -> float:
    """Largest distance between any two of ``points`` (0 for fewer than two)."""
    if len(points) < 2:
        return 0.0
    lats = [p[0] for p in points]
    lons = [p[1] for p in points]
    return float(pairwise_miles(lats, lons).max())


def offset_point(lat: float, lon: float, bearing_deg: float, miles: float) -> tuple[float, float]:
    """Destination reached by travelling ``miles`` along ``bearing_deg`` on the sphere."""
    delta = miles / EARTH_RADIUS_MILES
    theta = math.radians(bearing_deg)
    phi1 = math.radians(lat)
    lmb1 = math.radians(lon)
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta))
    lmb2 = lmb1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    lon2 = (math.degrees(lmb2) + 540.0) % 360.0 - 180.0
    return math.degrees(phi2), lon2
