"""(city, state) geocoding with a persistent cache and manual overrides.

Lookups go override -> cache -> service. The service is any HTTP endpoint
that answers ``GET base_url?city=..&state=..`` with a JSON array of
candidates carrying ``lat``/``lon`` fields (Nominatim's ``/search`` with
``format=json`` does). Requests are rate limited and retried with
exponential backoff.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import httpx

from ..models import GeoPoint

logger = logging.getLogger(__name__)

SERVICE = "service"
OVERRIDE = "override"


class GeocodeError(Exception):
    """A location could not be resolved to coordinates."""


def location_key(city: str, state: str) -> str:
    return f"{' '.join(city.split()).lower()}|{state.strip().upper()}"


@dataclass(frozen=True)
class CacheEntry:
    point: GeoPoint
    source: str
    fetched_at: str = ""


class GeoCache:
    """Service results plus overrides; an override always shadows the service."""

    def __init__(self) -> None:
        self.service: dict[str, CacheEntry] = {}
        self.overrides: dict[str, CacheEntry] = {}

    def get(self, key: str) -> CacheEntry | None:
        return self.overrides.get(key) or self.service.get(key)

    def put(self, key: str, entry: CacheEntry) -> None:
        target = self.overrides if entry.source == OVERRIDE else self.service
        target[key] = entry

    @classmethod
    def load(cls, path: str | Path | None) -> GeoCache:
        cache = cls()
        if path is None or not Path(path).exists():
            return cache
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                row = json.loads(line)
                cache.put(
                    row["key"],
                    CacheEntry(GeoPoint(float(row["lat"]), float(row["lon"])), row["source"], row.get("fetched_at", "")),
                )
        return cache

    def load_overrides(self, path: str | Path) -> int:
        """Read an override CSV (city, state, lat, lon); returns the row count."""
        n = 0
        with open(path, encoding="utf-8", newline="") as handle:
            for row in csv.DictReader(handle):
                point = GeoPoint(float(row["lat"]), float(row["lon"]))
                self.put(location_key(row["city"], row["state"]), CacheEntry(point, OVERRIDE))
                n += 1
        return n

    def save(self, path: str | Path) -> None:
        """Write service entries as JSONL sorted by key.

        Overrides live in their own file and are not persisted here.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            for key in sorted(self.service):
                entry = self.service[key]
                row = {
                    "key": key,
                    "lat": entry.point.lat,
                    "lon": entry.point.lon,
                    "source": entry.source,
                    "fetched_at": entry.fetched_at,
                }
                handle.write(json.dumps(row, sort_keys=True) + "\n")
        tmp.replace(path)


@dataclass
class GeocoderSettings:
    base_url: str = "https://nominatim.openstreetmap.org/search"
    rate_limit: float = 1.0  # requests per second; <= 0 disables throttling
    retries: int = 3
    timeout: float = 10.0
    backoff: float = 1.0  # seconds before the first retry, doubled each time
    user_agent: str = "quotespread/0.1"
    country: str = "us"


@dataclass
class GeocoderStats:
    override_hits: int = 0
    cache_hits: int = 0
    queries: int = 0
    requests: int = 0
    failures: int = 0
    ambiguous: list[str] = field(default_factory=list)


def _utcnow() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


class Geocoder:
    def __init__(
        self,
        cache: GeoCache,
        settings: GeocoderSettings | None = None,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        now: Callable[[], str] = _utcnow,
    ) -> None:
        self.cache = cache
        self.settings = settings or GeocoderSettings()
        self._client = client
        self._sleep = sleep
        self._clock = clock
        self._now = now
        self._last_request: float | None = None
        self._failed: dict[str, str] = {}
        self.stats = GeocoderStats()

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(
                timeout=self.settings.timeout,
                headers={"User-Agent": self.settings.user_agent},
            )
        return self._client

    def geocode(self, city: str, state: str) -> GeoPoint:
        key = location_key(city, state)
        entry = self.cache.overrides.get(key)
        if entry is not None:
            self.stats.override_hits += 1
            return entry.point
        entry = self.cache.service.get(key)
        if entry is not None:
            self.stats.cache_hits += 1
            return entry.point
        if key in self._failed:
            raise GeocodeError(self._failed[key])

        self.stats.queries += 1
        try:
            point = self._query(city, state, key)
        except GeocodeError as exc:
            self.stats.failures += 1
            self._failed[key] = str(exc)
            raise
        self.cache.put(key, CacheEntry(point, SERVICE, self._now()))
        return point

    def _throttle(self) -> None:
        rate = self.settings.rate_limit
        if rate > 0 and self._last_request is not None:
            wait = 1.0 / rate - (self._clock() - self._last_request)
            if wait > 0:
                self._sleep(wait)
        self._last_request = self._clock()

    def _query(self, city: str, state: str, key: str) -> GeoPoint:
        params = {"city": city, "state": state, "format": "json"}
        if self.settings.country:
            params["country"] = self.settings.country
        last_error = "no attempt made"
        for attempt in range(self.settings.retries + 1):
            if attempt:
                self._sleep(self.settings.backoff * 2 ** (attempt - 1))
            self._throttle()
            self.stats.requests += 1
            try:
                response = self.client.get(self.settings.base_url, params=params, timeout=self.settings.timeout)
                response.raise_for_status()
                candidates = response.json()
            except (httpx.HTTPError, ValueError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                logger.debug("geocode %s attempt %d failed: %s", key, attempt + 1, last_error)
                continue
            return self._pick(candidates, key)
        raise GeocodeError(f"geocoding {key!r} failed after {self.settings.retries + 1} attempts ({last_error})")

    def _pick(self, candidates, key: str) -> GeoPoint:
        if not isinstance(candidates, list) or not candidates:
            raise GeocodeError(f"no geocoding result for {key!r}")
        if len(candidates) > 1:
            self.stats.ambiguous.append(key)
            logger.warning("ambiguous geocode for %r: %d candidates, using the first", key, len(candidates))
        first = candidates[0]
        try:
            return GeoPoint(float(first["lat"]), float(first["lon"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise GeocodeError(f"malformed geocoding result for {key!r}: {exc}") from exc
