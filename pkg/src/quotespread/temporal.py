"""Lifespans, online/offline first-appearance lead-lag and crossover statistics."""

from __future__ import annotations

import logging
import math
import statistics
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum

from .models import QuoteCluster

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    ONLINE_FIRST = "OnlineFirst"
    OFFLINE_FIRST = "OfflineFirst"
    SAME_DAY = "SameDay"
    OFFLINE_ONLY = "OfflineOnly"
    ONLINE_ONLY = "OnlineOnly"


@dataclass(frozen=True)
class CrossoverRecord:
    cluster_id: str
    first_offline: date | None
    first_online: date | None
    direction: Direction
    gap_days: int | None


@dataclass(frozen=True)
class CrossoverStats:
    n_both: int
    n_online_first: int
    n_offline_first: int
    n_same_day: int
    n_offline_only: int
    n_online_only: int
    pct_online_first: float | None
    mean_gap_online_first: float | None
    sd_gap_online_first: float | None
    mean_gap_offline_first: float | None
    sd_gap_offline_first: float | None
    window: tuple[date, date] | None = None
    sd_kind: str = "population"


class WindowError(ValueError):
    pass


def lifespan(cluster: QuoteCluster) -> int:
    """Days between the first and last offline occurrence."""
    if not cluster.offline_occurrences:
        raise ValueError(f"cluster {cluster.cluster_id} has no offline occurrences")
    days = [o.date for o in cluster.offline_occurrences]
    return (max(days) - min(days)).days


def restrict_window(clusters: Sequence[QuoteCluster], start: date, end: date) -> list[QuoteCluster]:
    """Keep only activity dated within [start, end]; drop clusters left empty."""
    if start > end:
        raise WindowError(f"window start {start} is after end {end}")
    kept = []
    for cluster in clusters:
        occ = tuple(o for o in cluster.offline_occurrences if start <= o.date <= end)
        men = tuple(m for m in cluster.online_mentions if start <= m.date <= end)
        if occ or men:
            kept.append(replace(cluster, offline_occurrences=occ, online_mentions=men))
    return kept


def lead_lag(cluster: QuoteCluster) -> CrossoverRecord:
    first_off = min((o.date for o in cluster.offline_occurrences), default=None)
    first_on = min((m.date for m in cluster.online_mentions), default=None)
    if first_off is None and first_on is None:
        raise ValueError(f"cluster {cluster.cluster_id} has no dated activity")
    if first_on is None:
        return CrossoverRecord(cluster.cluster_id, first_off, None, Direction.OFFLINE_ONLY, None)
    if first_off is None:
        return CrossoverRecord(cluster.cluster_id, None, first_on, Direction.ONLINE_ONLY, None)
    gap = (first_off - first_on).days
    if gap > 0:
        direction = Direction.ONLINE_FIRST
    elif gap < 0:
        direction = Direction.OFFLINE_FIRST
    else:
        direction = Direction.SAME_DAY
    return CrossoverRecord(cluster.cluster_id, first_off, first_on, direction, abs(gap))


def _mean_sd(values: list[int]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    return statistics.fmean(values), statistics.pstdev(values)


def crossover_stats(
    records: Sequence[CrossoverRecord], window: tuple[date, date] | None = None
) -> CrossoverStats:
    """Aggregate lead-lag records.

    Same-day clusters count toward ``n_both`` but toward neither directional
    share. Spreads are population standard deviations.
    """
    counts = Counter(r.direction for r in records)
    online_gaps = [r.gap_days for r in records if r.direction is Direction.ONLINE_FIRST]
    offline_gaps = [r.gap_days for r in records if r.direction is Direction.OFFLINE_FIRST]
    directional = len(online_gaps) + len(offline_gaps)
    on_mean, on_sd = _mean_sd(online_gaps)
    off_mean, off_sd = _mean_sd(offline_gaps)
    return CrossoverStats(
        n_both=directional + counts[Direction.SAME_DAY],
        n_online_first=len(online_gaps),
        n_offline_first=len(offline_gaps),
        n_same_day=counts[Direction.SAME_DAY],
        n_offline_only=counts[Direction.OFFLINE_ONLY],
        n_online_only=counts[Direction.ONLINE_ONLY],
        pct_online_first=len(online_gaps) / directional if directional else None,
        mean_gap_online_first=on_mean,
        sd_gap_online_first=on_sd,
        mean_gap_offline_first=off_mean,
        sd_gap_offline_first=off_sd,
        window=window,
    )


def quantile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile (the R-7 / numpy default definition)."""
    if not values:
        raise ValueError("quantile of empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile {q} outside [0, 1]")
    ordered = sorted(values)
    h = (len(ordered) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


@dataclass(frozen=True)
class RegionThresholds:
    radius: float | None
    lifespan: float | None
    radius_quantile: float
    lifespan_quantile: float


def classify_regions(
    coverage: Mapping[str, tuple[float, int]],
    radius_quantile: float = 0.75,
    lifespan_quantile: float = 0.75,
) -> tuple[dict[str, str], RegionThresholds]:
    """Label clusters by spatial (radius) and temporal (lifespan) coverage.

    ``coverage`` maps cluster id to (radius, lifespan). A is high on both
    axes, B high radius only, C long lifespan only; "high" means at or above
    the given quantile of the run's values. With fewer than four clusters
    the thresholds are undefined and everything is labelled "other".
    """
    if len(coverage) < 4:
        if coverage:
            logger.warning("only %d clusters; region thresholds undefined", len(coverage))
        return {cid: "other" for cid in coverage}, RegionThresholds(None, None, radius_quantile, lifespan_quantile)
    r_cut = quantile([r for r, _ in coverage.values()], radius_quantile)
    l_cut = quantile([l for _, l in coverage.values()], lifespan_quantile)
    labels = {}
    for cid, (radius, span) in coverage.items():
        wide, long_lived = radius >= r_cut, span >= l_cut
        labels[cid] = "A" if wide and long_lived else "B" if wide else "C" if long_lived else "other"
    return labels, RegionThresholds(r_cut, l_cut, radius_quantile, lifespan_quantile)


def daily_frequency(clusters: Sequence[QuoteCluster]) -> list[tuple[date, int, int]]:
    """(day, offline occurrences, online mentions) for every active day, sorted."""
    offline = Counter(o.date for c in clusters for o in c.offline_occurrences)
    online = Counter(m.date for c in clusters for m in c.online_mentions)
    return [(d, offline[d], online[d]) for d in sorted(offline.keys() | online.keys())]


def first_appearances(records: Sequence[CrossoverRecord]) -> list[tuple[date, str, int]]:
    """(day, medium, number of quotes first seen there that day) for crossover quotes.

    Each cluster present in both media contributes its earlier medium;
    same-day clusters contribute to both.
    """
    tally: Counter[tuple[date, str]] = Counter()
    for r in records:
        if r.direction is Direction.ONLINE_FIRST:
            tally[(r.first_online, "online")] += 1
        elif r.direction is Direction.OFFLINE_FIRST:
            tally[(r.first_offline, "offline")] += 1
        elif r.direction is Direction.SAME_DAY:
            tally[(r.first_online, "online")] += 1
            tally[(r.first_offline, "offline")] += 1
    return [(d, medium, n) for (d, medium), n in sorted(tally.items())]
