"""The five pipeline stages and ``run_all``.

Each stage reads its inputs from the run's output directory, writes its own
subdirectory, checks that its counts reconcile and returns a
:class:`StageResult`. Exit codes: 0 success, 4 success with diagnostics.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

import httpx

from .. import corpus
from ..geospatial import GeoCache, GeocodeError, Geocoder, GyrationMode, compare_to_reference
from ..geospatial import propaganda_center, radius_of_gyration
from ..matcher import cluster_online, cluster_quotes, find_online_mentions, load_stopwords, merge_clusters
from ..models import Diagnostic
from .. import temporal
from . import artifacts as art
from .config import ConfigError, RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_PARTIAL = 4

# Files the manifest never covers: the manifest itself and the mutable geocoder cache.
UNDIGESTED = {"report/manifest.json", "geocache.jsonl"}


@dataclass
class StageResult:
    stage: str
    counts: dict[str, Any] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_PARTIAL if self.diagnostics or self.warnings else EXIT_OK


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(f"count reconciliation failed: {message}")


def _write_diagnostics(path: Path, diagnostics: list[Diagnostic]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{d}\n" for d in diagnostics), encoding="utf-8")
    for d in diagnostics:
        logger.warning("%s", d)


def _prepare(config: RunConfig) -> Path:
    config.validate()
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(config.serialize(), encoding="utf-8")
    return out


def _stopwords(config: RunConfig):
    return load_stopwords(config.resolve(config.stopwords_path))


def cmd_ingest(config: RunConfig) -> StageResult:
    out = _prepare(config)
    result = StageResult("ingest")
    manifest = corpus.load_manifest(config.resolve(config.manifest_path)) if config.manifest_path else None

    offline = corpus.load_offline(config.resolve(config.offline_path), config.offline_format)
    if config.online_path:
        online = corpus.load_online(config.resolve(config.online_path), config.online_format, manifest)
    else:
        online = corpus.LoadResult(records=[])
    posts = corpus.dedup_posts(online.records)

    _check(offline.rows == len(offline.records) + offline.skipped, "offline rows != events + skipped")
    _check(online.rows == len(online.records) + online.skipped, "online rows != posts + skipped")
    _check(len(posts) <= len(online.records), "dedup grew the corpus")

    art.write_jsonl(out / "ingest" / "offline_events.jsonl", map(art.event_to_dict, offline.records))
    art.write_jsonl(out / "ingest" / "online_posts.jsonl", map(art.post_to_dict, posts))
    result.diagnostics = offline.diagnostics + online.diagnostics
    _write_diagnostics(out / "ingest" / "diagnostics.txt", result.diagnostics)
    for w in online.warnings:
        logger.warning("%s", w)

    per_source = Counter((p.platform, p.dataset) for p in posts)
    sources = [
        {"platform": pl, "dataset": ds, "posts": n, "expected": None}
        for (pl, ds), n in sorted(per_source.items())
    ]
    if manifest is not None:
        expected = {(e.platform, e.dataset): e.expected_count for e in manifest.entries}
        for row in sources:
            row["expected"] = expected.get((row["platform"], row["dataset"]))
    if not offline.records:
        result.warnings.append("offline corpus contains no events")
        logger.warning("offline corpus contains no events")
    result.counts = {
        "offline_rows": offline.rows,
        "events_loaded": len(offline.records),
        "offline_skipped": offline.skipped,
        "online_rows": online.rows,
        "posts_loaded": len(online.records),
        "online_skipped": online.skipped,
        "posts_deduped": len(posts),
        "duplicates_removed": len(online.records) - len(posts),
        "unknown_source_warnings": len(online.warnings),
        "sources": sources,
    }
    art.write_json(out / "ingest" / "summary.json", result.counts)
    return result


def _read_merges(path: Path) -> list[tuple[str, str]]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        rows = [r for r in reader if r and not r[0].startswith("#")]
    if rows and rows[0][:2] == ["cluster_a", "cluster_b"]:
        rows = rows[1:]
    return [(r[0].strip(), r[1].strip()) for r in rows]


def cmd_match(config: RunConfig) -> StageResult:
    out = _prepare(config)
    stopwords = _stopwords(config)
    events = [art.event_from_dict(d) for d in art.read_jsonl(out / "ingest" / "offline_events.jsonl")]
    posts = [art.post_from_dict(d) for d in art.read_jsonl(out / "ingest" / "online_posts.jsonl")]
    result = StageResult("match")

    offline = cluster_quotes(events, stopwords)
    clusters = offline.clusters
    n_before_merge = len(clusters)
    if config.merges_path:
        try:
            clusters = merge_clusters(clusters, _read_merges(config.resolve(config.merges_path)))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc

    annotations = corpus.load_annotations(config.resolve(config.annotations_path)) if config.annotations_path else []
    outcome = corpus.apply_annotations(clusters, annotations, stopwords)
    dropped = {c.cluster_id for c in clusters} - {c.cluster_id for c in outcome.kept}
    dropped_events = sum(c.count for c in clusters if c.cluster_id in dropped)

    kept, stats = find_online_mentions(outcome.kept, posts, stopwords)
    online = cluster_online(posts, stopwords)

    _check(sum(c.count for c in clusters) + len(offline.rejected) == len(events), "events != clustered + rejected")
    _check(sum(c.count for c in kept) + dropped_events + len(offline.rejected) == len(events), "annotation filter lost events")
    stats.reconcile()
    _check(
        sum(len(c.online_mentions) for c in kept) == stats.exact_pairs + stats.loose_pairs,
        "mention pairs != exact + loose",
    )
    _check(sum(len(c.online_mentions) for c in online.clusters) + len(online.rejected) == len(posts), "online clustering lost posts")

    art.write_jsonl(out / "match" / "clusters_offline.jsonl", map(art.cluster_to_dict, kept))
    art.write_jsonl(out / "match" / "clusters_online.jsonl", map(art.cluster_to_dict, online.clusters))
    for eid in offline.rejected:
        result.warnings.append(f"event {eid}: quote is unmatchable (empty loose key)")
    for w in result.warnings:
        logger.warning("%s", w)
    result.counts = {
        "stopwords_version": stopwords.version,
        "events": len(events),
        "posts": len(posts),
        "clusters_offline": n_before_merge,
        "clusters_after_merge": len(clusters),
        "clusters_kept": len(kept),
        "clusters_online": len(online.clusters),
        "rejected_offline": offline.rejected,
        "rejected_online": online.rejected,
        "annotation": {
            "annotated": outcome.annotated,
            "propaganda": outcome.propaganda,
            "ratio": outcome.ratio,
            "unannotated": outcome.unannotated,
            "dropped": outcome.dropped,
        },
        "mentions": asdict(stats),
    }
    art.write_json(out / "match" / "summary.json", result.counts)
    return result


def _load_clusters(out: Path):
    return [art.cluster_from_dict(d) for d in art.read_jsonl(out / "match" / "clusters_offline.jsonl")]


def cmd_geo(config: RunConfig, client: httpx.Client | None = None, **geocoder_kwargs) -> StageResult:
    out = _prepare(config)
    events = {d["id"]: art.event_from_dict(d) for d in art.read_jsonl(out / "ingest" / "offline_events.jsonl")}
    clusters = _load_clusters(out)
    mode = GyrationMode(config.gyration_mode)
    result = StageResult("geo")

    cache_path = config.resolve(config.geocache_path) if config.geocache_path else out / "geocache.jsonl"
    cache = GeoCache.load(cache_path)
    if config.overrides_path:
        cache.load_overrides(config.resolve(config.overrides_path))
    geocoder = Geocoder(cache, config.geocoder_settings(), client=client, **geocoder_kwargs)
    service_before = dict(cache.service)

    gyration, excluded_clusters, incidents = [], [], []
    resolved_total = excluded_total = 0
    for cluster in clusters:
        points = []
        for occ in cluster.offline_occurrences:
            event = events[occ.event_id]
            try:
                point = geocoder.geocode(event.city, event.state)
            except GeocodeError as exc:
                excluded_total += 1
                result.diagnostics.append(Diagnostic("geocode", 0, f"event {event.id} ({event.city}, {event.state}) excluded: {exc}"))
                continue
            resolved_total += 1
            points.append(point)
            incidents.append((cluster.cluster_id, event.id, point.lat, point.lon))
        if not points:
            excluded_clusters.append(cluster.cluster_id)
            continue
        g = radius_of_gyration(points, mode, cluster.cluster_id)
        gyration.append(g)

    _check(resolved_total + excluded_total == sum(c.count for c in clusters), "geocoded + excluded != occurrences")
    _check(sum(g.n for g in gyration) == resolved_total, "gyration n != resolved events")

    if cache.service != service_before:
        cache.save(cache_path)

    canon = {c.cluster_id: c.canonical for c in clusters}
    art.write_jsonl(
        out / "geo" / "gyration.jsonl",
        (
            {
                "cluster_id": g.cluster_id,
                "canonical": canon[g.cluster_id],
                "centroid": {"lat": g.centroid.lat, "lon": g.centroid.lon},
                "radius": g.radius,
                "units": g.units,
                "mode": g.mode.value,
                "n": g.n,
            }
            for g in gyration
        ),
    )
    digest = config.digest
    art.write_plot_csv(
        out / "geo" / "fig2_incidents.csv", "fig2_incidents", digest, ["cluster_id", "event_id", "lat", "lon"], incidents
    )
    art.write_plot_csv(
        out / "geo" / "fig2_centroids.csv",
        "fig2_centroids",
        digest,
        ["cluster_id", "canonical", "lat", "lon", "radius", "units", "frequency"],
        ((g.cluster_id, canon[g.cluster_id], g.centroid.lat, g.centroid.lon, g.radius, g.units, g.n) for g in gyration),
    )

    center = propaganda_center(gyration) if gyration else None
    comparison = None
    if center is not None and config.reference is not None:
        summary = compare_to_reference(center, config.reference, config.reference_tolerance)
        comparison = {
            "reference": {"lat": config.reference.lat, "lon": config.reference.lon},
            "delta_lat": summary.delta_lat,
            "delta_lon": summary.delta_lon,
            "quadrant": summary.quadrant,
            "tolerance": config.reference_tolerance,
        }
    _write_diagnostics(out / "geo" / "diagnostics.txt", result.diagnostics)
    result.counts = {
        "mode": mode.value,
        "units": mode.units,
        "clusters": len(clusters),
        "clusters_with_gyration": len(gyration),
        "excluded_clusters": excluded_clusters,
        "events_resolved": resolved_total,
        "events_excluded": excluded_total,
        "geocoder": {
            "override_hits": geocoder.stats.override_hits,
            "cache_hits": geocoder.stats.cache_hits,
            "queries": geocoder.stats.queries,
            "requests": geocoder.stats.requests,
            "failures": geocoder.stats.failures,
            "ambiguous": sorted(set(geocoder.stats.ambiguous)),
        },
        "propaganda_center": None if center is None else {"lat": center.lat, "lon": center.lon},
        "reference_comparison": comparison,
    }
    art.write_json(out / "geo" / "summary.json", result.counts)
    return result


def _iso(d: date | None) -> str | None:
    return None if d is None else d.isoformat()


def cmd_temporal(config: RunConfig) -> StageResult:
    out = _prepare(config)
    clusters = _load_clusters(out)
    result = StageResult("temporal")
    window = config.window
    if window is not None:
        windowed = temporal.restrict_window(clusters, *window)
        if not windowed:
            raise ConfigError(f"window {window[0]}..{window[1]} excludes all data")
    else:
        windowed = clusters

    records = [temporal.lead_lag(c) for c in windowed]
    stats = temporal.crossover_stats(records, window)
    _check(len(records) == len(windowed), "one crossover record per cluster")
    _check(
        stats.n_both + stats.n_offline_only + stats.n_online_only == len(records),
        "crossover categories do not partition the clusters",
    )

    art.write_jsonl(
        out / "temporal" / "crossover.jsonl",
        (
            {
                "cluster_id": r.cluster_id,
                "first_offline": _iso(r.first_offline),
                "first_online": _iso(r.first_online),
                "direction": r.direction.value,
                "gap_days": r.gap_days,
            }
            for r in records
        ),
    )
    stats_dict = asdict(stats)
    stats_dict["window"] = None if window is None else [_iso(window[0]), _iso(window[1])]
    art.write_json(out / "temporal" / "crossover_stats.json", stats_dict)

    digest = config.digest
    series = temporal.daily_frequency(windowed)
    _check(sum(s[1] for s in series) == sum(c.count for c in windowed), "fig4 offline series != occurrences")
    _check(sum(s[2] for s in series) == sum(len(c.online_mentions) for c in windowed), "fig4 online series != mentions")
    art.write_plot_csv(
        out / "temporal" / "fig4_daily_frequency.csv",
        "fig4_daily_frequency",
        digest,
        ["date", "offline", "online"],
        ((d.isoformat(), a, b) for d, a, b in series),
    )
    art.write_plot_csv(
        out / "temporal" / "fig5_first_appearance.csv",
        "fig5_first_appearance",
        digest,
        ["date", "medium", "quotes"],
        ((d.isoformat(), medium, n) for d, medium, n in temporal.first_appearances(records)),
    )

    gyr_path = out / "geo" / "gyration.jsonl"
    thresholds = None
    if gyr_path.is_file():
        radius = {g["cluster_id"]: g["radius"] for g in art.read_jsonl(gyr_path)}
        coverage = {c.cluster_id: (radius[c.cluster_id], temporal.lifespan(c)) for c in clusters if c.cluster_id in radius}
        labels, th = temporal.classify_regions(coverage, config.radius_quantile, config.lifespan_quantile)
        thresholds = asdict(th)
        if th.radius is None and coverage:
            result.warnings.append(f"only {len(coverage)} clusters; region labels undefined")
        canon = {c.cluster_id: c.canonical for c in clusters}
        art.write_plot_csv(
            out / "temporal" / "fig3_spatiotemporal.csv",
            "fig3_spatiotemporal",
            digest,
            ["cluster_id", "canonical", "radius", "lifespan_days", "region"],
            ((cid, canon[cid], r, span, labels[cid]) for cid, (r, span) in coverage.items()),
        )
    else:
        result.warnings.append("geo stage not run; fig3 spatiotemporal data skipped")
    for w in result.warnings:
        logger.warning("%s", w)

    result.counts = {
        "clusters": len(clusters),
        "clusters_in_window": len(windowed),
        "window": stats_dict["window"],
        "crossover": stats_dict,
        "region_thresholds": thresholds,
    }
    art.write_json(out / "temporal" / "summary.json", result.counts)
    return result


def top_k(clusters, key, k: int) -> list[tuple[str, str, int]]:
    """Top-k clusters by ``key`` descending, ties broken by canonical key ascending."""
    ranked = sorted(clusters, key=lambda c: (-key(c), c.canonical))
    return [(c.cluster_id, c.canonical, key(c)) for c in ranked[:k] if key(c) > 0]


def cmd_report(config: RunConfig) -> StageResult:
    out = _prepare(config)
    clusters = _load_clusters(out)
    summaries = {}
    for stage in ("ingest", "match", "geo", "temporal"):
        summaries[stage] = art.read_json(out / stage / "summary.json")
    result = StageResult("report")
    k = int(config.top_k)

    top_off = top_k(clusters, lambda c: c.count, k)
    top_on = top_k(clusters, lambda c: len(c.online_mentions), k)
    digest = config.digest
    cols = ["rank", "cluster_id", "canonical", "frequency"]
    art.write_plot_csv(
        out / "report" / "fig6_top_offline.csv", "fig6_top_offline", digest, cols,
        ((i + 1, *row) for i, row in enumerate(top_off)),
    )
    art.write_plot_csv(
        out / "report" / "fig6_top_online.csv", "fig6_top_online", digest, cols,
        ((i + 1, *row) for i, row in enumerate(top_on)),
    )
    ids_off = {r[0] for r in top_off}
    ids_on = {r[0] for r in top_on}
    union = ids_off | ids_on
    overlap = {
        "k": k,
        "shared": sorted(ids_off & ids_on),
        "offline_only": sorted(ids_off - ids_on),
        "online_only": sorted(ids_on - ids_off),
        "jaccard": len(ids_off & ids_on) / len(union) if union else None,
    }

    match = summaries["match"]
    mentions = match["mentions"]
    _check(mentions["total_posts"] == mentions["exact_posts"] + mentions["loose_only_posts"], "mention totals")
    report = {
        "config": config.to_dict(),
        "config_digest": digest,
        "stopwords_version": match["stopwords_version"],
        "counts": {
            "events_loaded": summaries["ingest"]["events_loaded"],
            "offline_skipped": summaries["ingest"]["offline_skipped"],
            "posts_loaded": summaries["ingest"]["posts_loaded"],
            "posts_deduped": summaries["ingest"]["posts_deduped"],
            "clusters_offline": match["clusters_after_merge"],
            "clusters_kept": match["clusters_kept"],
            "clusters_online": match["clusters_online"],
            "mentions_exact_posts": mentions["exact_posts"],
            "mentions_loose_only_posts": mentions["loose_only_posts"],
            "mentions_total_posts": mentions["total_posts"],
            "geocode_cache_hits": summaries["geo"]["geocoder"]["cache_hits"] + summaries["geo"]["geocoder"]["override_hits"],
            "geocode_queries": summaries["geo"]["geocoder"]["queries"],
            "geocode_failures": summaries["geo"]["geocoder"]["failures"],
            "annotation_ratio": match["annotation"]["ratio"],
        },
        "geo": {
            "mode": summaries["geo"]["mode"],
            "units": summaries["geo"]["units"],
            "propaganda_center": summaries["geo"]["propaganda_center"],
            "reference_comparison": summaries["geo"]["reference_comparison"],
            "excluded_clusters": summaries["geo"]["excluded_clusters"],
        },
        "crossover": summaries["temporal"]["crossover"],
        "region_thresholds": summaries["temporal"]["region_thresholds"],
        "popularity": {"top_offline": top_off, "top_online": top_on, "overlap": overlap},
    }
    art.write_json(out / "report" / "summary.json", report)
    (out / "report" / "summary.md").write_text(render_markdown(report), encoding="utf-8")

    manifest = {
        rel: art.sha256_file(out / rel)
        for rel in sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file())
        if rel not in UNDIGESTED
    }
    art.write_json(out / "report" / "manifest.json", {"files": manifest})
    result.counts = {"top_k": k, "files": len(manifest)}
    return result


def _fmt(value, spec: str = ".1f") -> str:
    return "n/a" if value is None else format(value, spec)


def render_markdown(report: dict[str, Any]) -> str:
    c = report["counts"]
    x = report["crossover"]
    g = report["geo"]
    lines = [
        "# Quote spread report",
        "",
        f"Config digest: `{report['config_digest']}`  ",
        f"Stopword list: `{report['stopwords_version']}`",
        "",
        "## Corpus and matching",
        "",
        f"- Offline events loaded: {c['events_loaded']} ({c['offline_skipped']} rows skipped)",
        f"- Online posts: {c['posts_loaded']} loaded, {c['posts_deduped']} after deduplication",
        f"- Offline quote clusters: {c['clusters_offline']} ({c['clusters_kept']} kept after annotation filter)",
        f"- Annotation propaganda ratio: {_fmt(c['annotation_ratio'], '.3f')}",
        f"- Online posts with exact mentions: {c['mentions_exact_posts']}",
        f"- Additional posts with loose mentions: {c['mentions_loose_only_posts']}",
        f"- Total mentioning posts: {c['mentions_total_posts']}",
        f"- Online-online clusters: {c['clusters_online']}",
        "",
        "## Spatial spread",
        "",
        f"- Radius units: {g['units']} ({g['mode']} mode)",
    ]
    center = g["propaganda_center"]
    if center:
        lines.append(f"- Propaganda center: ({center['lat']:.4f}, {center['lon']:.4f})")
    cmp_ = g["reference_comparison"]
    if cmp_:
        lines.append(
            f"- Offset from reference: {cmp_['delta_lat']:+.4f} lat, {cmp_['delta_lon']:+.4f} lon ({cmp_['quadrant']})"
        )
    lines.append(f"- Clusters without resolvable locations: {len(g['excluded_clusters'])}")
    lines += [
        "",
        "## Crossover",
        "",
        f"- Window: {x['window']}",
        f"- Clusters in both media: {x['n_both']} (same day: {x['n_same_day']})",
        f"- Online first: {_fmt(None if x['pct_online_first'] is None else 100 * x['pct_online_first'])}%, "
        f"gap {_fmt(x['mean_gap_online_first'], '.0f')} ± {_fmt(x['sd_gap_online_first'], '.0f')} days",
        f"- Offline first: {x['n_offline_first']} clusters, "
        f"gap {_fmt(x['mean_gap_offline_first'], '.0f')} ± {_fmt(x['sd_gap_offline_first'], '.0f')} days",
        f"- Spread is the {x['sd_kind']} standard deviation",
        "",
        "## Most popular quotes",
        "",
    ]
    pop = report["popularity"]
    for title, rows in (("Offline", pop["top_offline"]), ("Online", pop["top_online"])):
        lines += [f"### {title}", "", "| rank | quote | frequency |", "|---:|---|---:|"]
        lines += [f"| {i + 1} | {canon} | {n} |" for i, (_, canon, n) in enumerate(rows)]
        lines.append("")
    lines.append(f"Shared between the two top-{pop['overlap']['k']} lists: {len(pop['overlap']['shared'])}")
    lines.append("")
    return "\n".join(lines)


STAGES = ("ingest", "match", "geo", "temporal", "report")


def run_all(config: RunConfig, client: httpx.Client | None = None, **geocoder_kwargs) -> list[StageResult]:
    return [
        cmd_ingest(config),
        cmd_match(config),
        cmd_geo(config, client=client, **geocoder_kwargs),
        cmd_temporal(config),
        cmd_report(config),
    ]
