import math
import random

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quotespread.geospatial import (
    GeoCache,
    GeocodeError,
    Geocoder,
    GeocoderSettings,
    GyrationMode,
    centroid,
    compare_to_reference,
    haversine_km,
    location_key,
    propaganda_center,
    radius_of_gyration,
)
from quotespread.geospatial.geocoder import CacheEntry
from quotespread.geospatial.gyration import GyrationResult
from quotespread.models import GeoPoint

from conftest import SAMPLE


def direct_radius(points):
    """Radius of gyration straight from its definition, via numpy."""
    arr = np.array([[p.lat, p.lon] for p in points])
    c = arr.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum((arr - c) ** 2, axis=1))))


def test_geopoint_range_checked():
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    with pytest.raises(ValueError):
        GeoPoint(0, -181)
    with pytest.raises(ValueError):
        GeoPoint(float("nan"), 0)


def test_centroid():
    assert centroid([GeoPoint(40, -80)]) == GeoPoint(40, -80)
    assert centroid([GeoPoint(40, -80), GeoPoint(42, -78)]) == GeoPoint(41, -79)
    with pytest.raises(ValueError):
        centroid([])


def test_centroid_random_against_mean():
    rng = random.Random(2)
    pts = [GeoPoint(rng.uniform(25, 49), rng.uniform(-124, -67)) for _ in range(100)]
    c = centroid(pts)
    assert abs(c.lat - sum(p.lat for p in pts) / 100) < 1e-12
    assert abs(c.lon - sum(p.lon for p in pts) / 100) < 1e-12


def test_radius_examples():
    assert radius_of_gyration([GeoPoint(40, -80)]).radius == 0
    res = radius_of_gyration([GeoPoint(0, 0), GeoPoint(0, 2)])
    assert res.centroid == GeoPoint(0, 1)
    assert res.radius == 1.0 and res.units == "degrees" and res.n == 2
    for k in (1, 2, 3, 7, 10):
        assert radius_of_gyration([GeoPoint(0.1, 0.7)] * k).radius == 0.0


def test_great_circle_mode():
    pts = [GeoPoint(0, 0), GeoPoint(0, 2)]
    res = radius_of_gyration(pts, GyrationMode.GREAT_CIRCLE)
    # one degree of longitude on the equator
    assert res.units == "km"
    assert res.radius == pytest.approx(2 * math.pi * 6371.0088 / 360, rel=1e-12)
    assert haversine_km(GeoPoint(40, -80), GeoPoint(40, -80)) == 0


coords = st.tuples(st.floats(20, 60), st.floats(-130, -60))


@given(st.lists(coords, min_size=1, max_size=30), st.floats(-10, 10), st.floats(-10, 10))
def test_radius_translation_invariant(raw, dlat, dlon):
    pts = [GeoPoint(a, b) for a, b in raw]
    moved = [GeoPoint(p.lat + dlat, p.lon + dlon) for p in pts]
    r0, r1 = radius_of_gyration(pts).radius, radius_of_gyration(moved).radius
    assert r1 == pytest.approx(r0, rel=1e-9, abs=1e-9)


@given(st.lists(coords, min_size=1, max_size=30), st.floats(0.1, 1.5), st.randoms())
def test_radius_scaling_permutation_duplication(raw, s, rnd):
    pts = [GeoPoint(a, b) for a, b in raw]
    base = radius_of_gyration(pts)
    c = base.centroid
    scaled = [GeoPoint(c.lat + s * (p.lat - c.lat), c.lon + s * (p.lon - c.lon)) for p in pts]
    assert radius_of_gyration(scaled).radius == pytest.approx(s * base.radius, rel=1e-9, abs=1e-9)
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert radius_of_gyration(shuffled).radius == pytest.approx(base.radius, rel=1e-12, abs=1e-12)
    doubled = radius_of_gyration(pts + pts)
    assert doubled.radius == pytest.approx(base.radius, rel=1e-9, abs=1e-12)
    assert doubled.centroid.lat == pytest.approx(c.lat, abs=1e-12)


def test_radius_against_direct_radius():
    rng = random.Random(9)
    for _ in range(100):
        pts = [GeoPoint(rng.uniform(25, 49), rng.uniform(-124, -67)) for _ in range(rng.randint(2, 40))]
        assert radius_of_gyration(pts).radius == pytest.approx(direct_radius(pts), rel=1e-9)


def test_propaganda_center():
    one = GyrationResult("a", GeoPoint(40, -80), 0, 3)
    assert propaganda_center([one]) == GeoPoint(40, -80)
    two = GyrationResult("b", GeoPoint(30, -90), 0, 1)
    assert propaganda_center([one, two]) == GeoPoint(37.5, -82.5)
    equal = [GyrationResult(str(i), GeoPoint(30 + i, -90 + i), 0, 1) for i in range(5)]
    assert propaganda_center(equal) == centroid([r.centroid for r in equal])
    with pytest.raises(ValueError):
        propaganda_center([])


@pytest.mark.parametrize(
    "center, ref, quadrant, deltas",
    [
        ((41, -77), (37, -92), "NE", (4, 15)),
        ((37, -92), (37, -92), "coincident", (0, 0)),
        ((35, -95), (37, -92), "SW", (-2, -3)),
        ((39, -95), (37, -92), "NW", (2, -3)),
        ((35, -90), (37, -92), "SE", (-2, 2)),
        ((40, -92), (37, -92), "N", (3, 0)),
    ],
)
def test_compare_to_reference(center, ref, quadrant, deltas):
    out = compare_to_reference(GeoPoint(*center), GeoPoint(*ref))
    assert out.quadrant == quadrant
    assert (out.delta_lat, out.delta_lon) == pytest.approx(deltas)


def test_coincidence_tolerance():
    assert compare_to_reference(GeoPoint(37.0000001, -92), GeoPoint(37, -92)).quadrant == "coincident"
    assert compare_to_reference(GeoPoint(37.1, -91.9), GeoPoint(37, -92), tolerance=0.5).quadrant == "coincident"


# -- geocoder -----------------------------------------------------------------


class StubService:
    """Counts requests; answers from a table, or fails for listed cities."""

    def __init__(self, table=None, failing=(), ambiguous=()):
        self.table = table or {}
        self.failing = set(failing)
        self.ambiguous = set(ambiguous)
        self.calls = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        city = request.url.params["city"]
        state = request.url.params["state"]
        self.calls.append((city, state))
        if city in self.failing:
            return httpx.Response(503, json={"error": "busy"})
        if (city, state) not in self.table:
            return httpx.Response(200, json=[])
        lat, lon = self.table[(city, state)]
        rows = [{"lat": str(lat), "lon": str(lon)}]
        if city in self.ambiguous:
            rows.append({"lat": "0", "lon": "0"})
        return httpx.Response(200, json=rows)

    def client(self):
        return httpx.Client(transport=httpx.MockTransport(self))


def make_geocoder(stub, cache=None, **settings):
    settings.setdefault("rate_limit", 0)
    settings.setdefault("backoff", 0)
    return Geocoder(cache or GeoCache(), GeocoderSettings(base_url="http://geo.test/search", **settings),
                    client=stub.client(), sleep=lambda s: None, now=lambda: "2026-01-01T00:00:00+00:00")


def test_warmed_cache_returns_pinned_coordinates():
    stub = StubService()
    geo = make_geocoder(stub, GeoCache.load(SAMPLE / "geocache.jsonl"))
    assert geo.geocode("Pittsburgh", "PA") == GeoPoint(40.4416941, -79.9900861)
    assert stub.calls == []
    assert geo.stats.cache_hits == 1


def test_override_shadows_service(tmp_path):
    overrides = tmp_path / "overrides.csv"
    overrides.write_text("city,state,lat,lon\nMattson,IL,41.5039252,-87.7131004\n")
    cache = GeoCache()
    cache.put(location_key("Mattson", "IL"), CacheEntry(GeoPoint(1, 1), "service"))
    cache.load_overrides(overrides)
    stub = StubService({("Mattson", "IL"): (5, 5)})
    geo = make_geocoder(stub, cache)
    assert geo.geocode("Mattson", "IL") == GeoPoint(41.5039252, -87.7131004)
    assert cache.get(location_key("mattson ", "il")).source == "override"
    assert stub.calls == [] and geo.stats.override_hits == 1


def test_miss_queries_once_then_caches(tmp_path):
    stub = StubService({("Boston", "MA"): (42.36, -71.06)})
    geo = make_geocoder(stub)
    assert geo.geocode("Boston", "MA") == GeoPoint(42.36, -71.06)
    assert geo.geocode(" boston", "ma") == GeoPoint(42.36, -71.06)
    assert len(stub.calls) == 1
    path = tmp_path / "cache.jsonl"
    geo.cache.save(path)
    reloaded = GeoCache.load(path)
    entry = reloaded.get("boston|MA")
    assert entry.point == GeoPoint(42.36, -71.06) and entry.source == "service"
    assert entry.fetched_at == "2026-01-01T00:00:00+00:00"


def test_retry_then_fail():
    stub = StubService(failing={"Nowhere"})
    sleeps = []
    geo = Geocoder(GeoCache(), GeocoderSettings(base_url="http://geo.test/search", rate_limit=0, retries=3, backoff=0.5),
                   client=stub.client(), sleep=sleeps.append)
    with pytest.raises(GeocodeError):
        geo.geocode("Nowhere", "KS")
    assert len(stub.calls) == 4
    assert sleeps == [0.5, 1.0, 2.0]
    # a known failure is not retried again in the same run
    with pytest.raises(GeocodeError):
        geo.geocode("Nowhere", "KS")
    assert len(stub.calls) == 4 and geo.stats.failures == 1


def test_unresolvable_and_ambiguous():
    stub = StubService({("Springfield", "IL"): (39.8, -89.6)}, ambiguous={"Springfield"})
    geo = make_geocoder(stub)
    with pytest.raises(GeocodeError):
        geo.geocode("Atlantis", "FL")
    assert len(stub.calls) == 1  # empty answer is final, not retried
    assert geo.geocode("Springfield", "IL") == GeoPoint(39.8, -89.6)
    assert geo.stats.ambiguous == ["springfield|IL"]


def test_rate_limit_spacing():
    clock = [0.0]
    sleeps = []

    def sleep(s):
        sleeps.append(s)
        clock[0] += s

    stub = StubService({("A", "TX"): (30, -97), ("B", "TX"): (31, -97), ("C", "TX"): (32, -97)})
    geo = Geocoder(GeoCache(), GeocoderSettings(base_url="http://geo.test/search", rate_limit=2.0),
                   client=stub.client(), sleep=sleep, clock=lambda: clock[0])
    for city in "ABC":
        geo.geocode(city, "TX")
    assert sleeps == [0.5, 0.5]


def test_request_parameters():
    seen = []

    def handler(request):
        seen.append(dict(request.url.params))
        return httpx.Response(200, json=[{"lat": 1, "lon": 2}])

    geo = Geocoder(GeoCache(), GeocoderSettings(base_url="http://geo.test/search", rate_limit=0),
                   client=httpx.Client(transport=httpx.MockTransport(handler)))
    geo.geocode("Pittsburgh", "PA")
    assert seen == [{"city": "Pittsburgh", "state": "PA", "format": "json", "country": "us"}]
