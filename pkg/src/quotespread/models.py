"""Core record types shared by every stage of the pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude in decimal degrees, range-checked on construction."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class OfflineEvent:
    id: str
    quote_raw: str
    city: str
    state: str
    description: str
    date: date
    geo: GeoPoint | None = None


@dataclass(frozen=True)
class OnlinePost:
    id: str
    text: str
    dataset: str
    platform: str
    timestamp: date  # day granularity


@dataclass(frozen=True)
class Diagnostic:
    """One skipped row or excluded record; rendered as ``file:line: reason``."""

    file: str
    line: int
    reason: str

    def __str__(self) -> str:
        return f"{self.file}:{self.line}: {self.reason}"


class MatchKind(str, Enum):
    EXACT = "Exact"
    LOOSE = "Loose"
    NONE = "None"


@dataclass(frozen=True)
class Occurrence:
    event_id: str
    date: date
    geo: GeoPoint | None = None


@dataclass(frozen=True)
class Mention:
    post_id: str
    date: date
    platform: str
    kind: MatchKind


@dataclass(frozen=True)
class QuoteCluster:
    """Equivalence class of quote occurrences sharing one loose key.

    ``member_keys`` holds every loose key folded into the cluster; it is
    ``(canonical,)`` unless a manual merge combined several clusters.
    """

    cluster_id: str
    canonical: str
    variants: tuple[str, ...]
    offline_occurrences: tuple[Occurrence, ...] = ()
    online_mentions: tuple[Mention, ...] = ()
    member_keys: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.member_keys:
            object.__setattr__(self, "member_keys", (self.canonical,))

    @property
    def count(self) -> int:
        return len(self.offline_occurrences)
