"""Centroids, radius of gyration and the corpus-wide propaganda center."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

from ..models import GeoPoint

EARTH_RADIUS_KM = 6371.0088


class GyrationMode(str, Enum):
    PLANAR = "planar"
    GREAT_CIRCLE = "great_circle"

    @property
    def units(self) -> str:
        return "degrees" if self is GyrationMode.PLANAR else "km"


@dataclass(frozen=True)
class GyrationResult:
    cluster_id: str
    centroid: GeoPoint
    radius: float
    n: int
    mode: GyrationMode = GyrationMode.PLANAR

    @property
    def units(self) -> str:
        return self.mode.units


def centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    """Arithmetic mean of latitudes and of longitudes."""
    if not points:
        raise ValueError("centroid of an empty point set")
    first = points[0]
    if all(p == first for p in points):
        # fsum(k * [x]) / k can be 1 ulp off x; keep coincident points exact.
        return first
    n = len(points)
    return GeoPoint(math.fsum(p.lat for p in points) / n, math.fsum(p.lon for p in points) / n)


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def radius_of_gyration(
    points: Sequence[GeoPoint],
    mode: GyrationMode | str = GyrationMode.PLANAR,
    cluster_id: str = "",
) -> GyrationResult:
    """Root-mean-square distance of the points from their planar centroid.

    Every point has unit mass. In planar mode distances are Euclidean in
    degree space; in great-circle mode they are haversine kilometres to the
    same planar centroid.
    """
    mode = GyrationMode(mode)
    center = centroid(points)
    n = len(points)
    if mode is GyrationMode.PLANAR:
        sq = math.fsum((p.lat - center.lat) ** 2 + (p.lon - center.lon) ** 2 for p in points)
    else:
        sq = math.fsum(haversine_km(p, center) ** 2 for p in points)
    return GyrationResult(cluster_id, center, math.sqrt(sq / n), n, mode)


def propaganda_center(results: Sequence[GyrationResult]) -> GeoPoint:
    """Mean of cluster centroids weighted by each cluster's occurrence count."""
    if not results:
        raise ValueError("propaganda center of an empty cluster set")
    total = sum(r.n for r in results)
    lat = math.fsum(r.centroid.lat * r.n for r in results) / total
    lon = math.fsum(r.centroid.lon * r.n for r in results) / total
    return GeoPoint(lat, lon)


@dataclass(frozen=True)
class DirectionSummary:
    delta_lat: float
    delta_lon: float
    quadrant: str  # NE, NW, SE, SW, N, S, E, W or coincident


def compare_to_reference(center: GeoPoint, reference: GeoPoint, tolerance: float = 1e-6) -> DirectionSummary:
    """Signed offsets of ``center`` from ``reference`` and a compass label.

    An axis whose offset is within ``tolerance`` contributes no letter, so
    a point due north gets ``"N"`` and an equal point gets ``"coincident"``.
    """
    dlat = center.lat - reference.lat
    dlon = center.lon - reference.lon
    ns = "N" if dlat > tolerance else "S" if dlat < -tolerance else ""
    ew = "E" if dlon > tolerance else "W" if dlon < -tolerance else ""
    return DirectionSummary(dlat, dlon, (ns + ew) or "coincident")
