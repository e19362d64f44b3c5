"""Exit criteria. Each test carries an ``acceptance`` marker; the terminal
summary prints one PASS/FAIL line per criterion."""

import json
import logging
import random
import string
import threading
import time
from datetime import date, timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np
import pytest
import yaml

from quotespread.cli import main
from quotespread.corpus import AnnotationRecord, apply_annotations
from quotespread.geospatial import GyrationMode, radius_of_gyration
from quotespread.matcher import (
    cluster_online,
    cluster_quotes,
    find_online_mentions,
    match_pair,
    normalize,
)
from quotespread.matcher.normalize import default_stopwords
from quotespread.models import GeoPoint, MatchKind, Mention, OfflineEvent, Occurrence, OnlinePost, QuoteCluster
from quotespread.pipeline.artifacts import read_json
from quotespread.temporal import crossover_stats, lead_lag

from oracles import STOP, mention_triples, naive_mentions, pairwise_closure, random_events, random_posts, variant

logger = logging.getLogger(__name__)


# -- 1 ------------------------------------------------------------------------


@pytest.mark.acceptance(1, "matching equals O(n^2) and naive-scan oracles")
def test_matching_oracle_equivalence():
    started = time.perf_counter()
    rng = random.Random(2024)
    events = random_events(rng, 1000, 300)
    quotes = [e.quote_raw for e in events]
    posts = random_posts(rng, 7000, quotes, plant_rate=0.4)
    # whole-post quote variants so the online clusters are not all singletons
    posts += [
        OnlinePost(f"Q{i}", variant(rng, rng.choice(quotes).split()), "dumpB", "forum", date(2018, 1, 1))
        for i in range(3000)
    ]
    assert len(events) == 1000 and len(posts) == 10_000

    result = cluster_quotes(events)
    forms = [normalize(e.quote_raw) for e in events]
    keep = [i for i, f in enumerate(forms) if f.matchable]
    expected = {frozenset(events[keep[i]].id for i in g) for g in pairwise_closure([forms[i] for i in keep])}
    assert {frozenset(o.event_id for o in c.offline_occurrences) for c in result.clusters} == expected

    online = cluster_online(posts)
    pforms = [normalize(p.text) for p in posts]
    pkeep = [i for i, f in enumerate(pforms) if f.matchable]
    expected = {frozenset(posts[pkeep[i]].id for i in g) for g in pairwise_closure([pforms[i] for i in pkeep])}
    got = {frozenset(m.post_id for m in c.online_mentions) for c in online.clusters}
    assert got == expected
    assert sum(len(g) > 1 for g in got) > 100

    updated, stats = find_online_mentions(result.clusters, posts)
    triples = mention_triples(updated)
    assert triples == naive_mentions(result.clusters, posts)
    assert {k for _, _, k in triples} == {"Exact", "Loose"}
    stats.reconcile()

    elapsed = time.perf_counter() - started
    logger.info("criterion 1 took %.1f s", elapsed)
    assert elapsed < 60


# -- 2 ------------------------------------------------------------------------


@pytest.mark.acceptance(2, "Exact implies Loose; loose grouping equals transitive closure")
def test_two_step_consistency():
    rng = random.Random(77)
    bases = [[rng.choice(string.ascii_lowercase[:6]) for _ in range(rng.randint(1, 4))] for _ in range(40)]
    texts = [variant(rng, rng.choice(bases)) for _ in range(4000)]
    texts += [" ".join(rng.choice(STOP + ["!", "."]) for _ in range(rng.randint(1, 3))) for _ in range(200)]
    forms = [normalize(t) for t in texts]

    pairs = exact = loose = 0
    for _ in range(20_000):
        a, b = rng.choice(forms), rng.choice(forms)
        pairs += 1
        if a.exact_tokens == b.exact_tokens:
            exact += 1
            assert a.loose_tokens == b.loose_tokens
        kind = match_pair(a, b)
        if kind is MatchKind.EXACT:
            assert a.matchable and a.loose_key == b.loose_key
        if kind is not MatchKind.NONE:
            loose += 1
    assert pairs >= 10_000 and exact > 100 and loose > exact

    # grouping by loose key vs the closure of the pairwise relation, in batches
    for start in range(0, 2000, 500):
        batch = [f for f in forms[start:start + 500] if f.matchable]
        by_key = {}
        for i, f in enumerate(batch):
            by_key.setdefault(f.loose_key, set()).add(i)
        assert {frozenset(g) for g in by_key.values()} == set(pairwise_closure(batch))


# -- 3 ------------------------------------------------------------------------


def direct_radius(points):
    arr = np.array([[p.lat, p.lon] for p in points], dtype=float)
    return float(np.sqrt(((arr - arr.mean(axis=0)) ** 2).sum(axis=1).mean()))


@pytest.mark.acceptance(3, "radius of gyration matches direct recomputation")
def test_gyration_correctness():
    rng = random.Random(31)
    for _ in range(1000):
        n = rng.randint(2, 60)
        lat0, lon0, spread = rng.uniform(25, 48), rng.uniform(-124, -70), rng.choice([0.01, 0.5, 5, 20])
        pts = [GeoPoint(max(-90, min(90, lat0 + rng.gauss(0, spread))), max(-180, min(180, lon0 + rng.gauss(0, spread))))
               for _ in range(n)]
        r = radius_of_gyration(pts, GyrationMode.PLANAR).radius
        assert r == pytest.approx(direct_radius(pts), rel=1e-9, abs=0)

        dlat, dlon = rng.uniform(-5, 5), rng.uniform(-5, 5)
        moved = [GeoPoint(p.lat + dlat, p.lon + dlon) for p in pts if abs(p.lat + dlat) <= 90 and abs(p.lon + dlon) <= 180]
        if len(moved) == n:
            assert abs(radius_of_gyration(moved).radius - r) <= 1e-9

    for _ in range(200):
        p = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
        assert radius_of_gyration([p]).radius == 0.0
        assert radius_of_gyration([p] * rng.randint(2, 50)).radius == 0.0
        assert radius_of_gyration([p] * 3, GyrationMode.GREAT_CIRCLE).radius == 0.0


# -- 4 ------------------------------------------------------------------------


def planted_cluster(cid, online_day, offline_day):
    return QuoteCluster(
        cid, cid, (cid,),
        offline_occurrences=(Occurrence(f"{cid}-e0", offline_day), Occurrence(f"{cid}-e1", offline_day + timedelta(days=400))),
        online_mentions=(Mention(f"{cid}-p0", online_day, "forum", MatchKind.EXACT),),
    )


@pytest.mark.acceptance(4, "crossover statistics on the planted 87/13 fixture")
def test_temporal_statistics():
    base = date(2018, 1, 1)
    # online-first gaps 1, 6, ..., 431 and offline-first gaps 2, 5, ..., 38
    online_gaps = [1 + 5 * i for i in range(87)]
    offline_gaps = [2 + 3 * i for i in range(13)]
    clusters = [planted_cluster(f"on{i}", base, base + timedelta(days=g)) for i, g in enumerate(online_gaps)]
    clusters += [planted_cluster(f"off{i}", base + timedelta(days=g), base) for i, g in enumerate(offline_gaps)]
    clusters.append(QuoteCluster("solo", "solo", ("solo",), (Occurrence("s", base),)))
    random.Random(1).shuffle(clusters)

    stats = crossover_stats([lead_lag(c) for c in clusters])
    assert (stats.n_online_first, stats.n_offline_first, stats.n_offline_only) == (87, 13, 1)
    assert stats.pct_online_first == 0.87

    # arithmetic progression: mean a + d(n-1)/2, population variance d^2 (n^2 - 1) / 12
    assert abs(stats.mean_gap_online_first - 216) <= 1e-9
    assert abs(stats.sd_gap_online_first - (25 * (87**2 - 1) / 12) ** 0.5) <= 1e-9
    assert abs(stats.mean_gap_offline_first - 20) <= 1e-9
    assert abs(stats.sd_gap_offline_first - 126**0.5) <= 1e-9
    assert f"{100 * stats.pct_online_first:.0f}%" == "87%"
    assert f"{stats.mean_gap_online_first:.0f} ± {stats.sd_gap_online_first:.0f} days" == "216 ± 126 days"


# -- 5 ------------------------------------------------------------------------


def _pseudo_words(rng, n):
    words = set()
    while len(words) < n:
        words.add("".join(rng.choices(string.ascii_lowercase, k=rng.randint(3, 9))))
    return sorted(words)


@pytest.mark.slow
@pytest.mark.acceptance(5, "2,000 patterns against 1,000,000 posts under 5 minutes")
def test_scale_performance():
    rng = random.Random(5)
    vocab = _pseudo_words(rng, 20_000)
    noise = vocab + sorted(default_stopwords().words) + list("!?.,;:") * 20
    quotes = [" ".join(rng.choices(vocab[:3000], k=rng.randint(2, 6))) for _ in range(2000)]
    events = [OfflineEvent(f"E{i}", q, "City", "PA", "", date(2019, 1, 1)) for i, q in enumerate(quotes)]
    clusters = cluster_quotes(events).clusters
    assert len(clusters) == 2000

    sample: list[OnlinePost] = []
    day = date(2019, 6, 1)

    def stream():
        for i in range(1_000_000):
            words = rng.choices(noise, k=100)
            if i % 4 == 0:
                quote = quotes[rng.randrange(2000)]
                words[rng.randrange(100):0] = [quote if i % 8 == 0 else quote.title() + "!"]
            post = OnlinePost(f"P{i}", " ".join(words), "bulk", "forum", day)
            if i % 100 == 0:
                sample.append(post)
            yield post

    started = time.perf_counter()
    updated, stats = find_online_mentions(clusters, stream())
    elapsed = time.perf_counter() - started
    logger.info("criterion 5: %.1f s for 1,000,000 posts (%d mentioning)", elapsed, stats.total_posts)
    print(f"\ncriterion 5: matched 1,000,000 posts in {elapsed:.1f} s")
    stats.reconcile()
    assert stats.total_posts >= 250_000

    # 1% spot check against the naive scan
    sample_ids = {p.id for p in sample}
    assert len(sample_ids) == 10_000
    got = {t for t in mention_triples(updated) if t[1] in sample_ids}
    assert got == naive_mentions(clusters, sample)
    assert elapsed < 300


# -- 6 ------------------------------------------------------------------------


@pytest.mark.acceptance(6, "run-all twice gives byte-identical artifact digests")
def test_determinism(tmp_path):
    import shutil

    from conftest import SAMPLE

    manifests = []
    for name in ("first", "second"):
        target = tmp_path / name
        shutil.copytree(SAMPLE, target, ignore=shutil.ignore_patterns("out"))
        assert main(["run-all", "--config", str(target / "run.yaml")]) == 0
        manifests.append((target / "out" / "report" / "manifest.json").read_bytes())
    assert manifests[0] == manifests[1]
    files = json.loads(manifests[0])["files"]
    for rel in ("match/clusters_offline.jsonl", "report/fig6_top_offline.csv", "report/fig6_top_online.csv",
                "report/summary.json", "temporal/fig4_daily_frequency.csv", "geo/gyration.jsonl"):
        assert rel in files


# -- 7 ------------------------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    table: dict = {}
    failing: set = set()
    calls: list = []

    def do_GET(self):
        q = {k: v[0] for k, v in parse_qs(urlparse(self.path).query).items()}
        key = (q.get("city"), q.get("state"))
        self.calls.append(key)
        if key[0] in self.failing:
            self.send_response(503)
            self.end_headers()
            return
        rows = [{"lat": str(lat), "lon": str(lon)} for lat, lon in [self.table[key]]] if key in self.table else []
        body = json.dumps(rows).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def geocoder_stub(monkeypatch):
    _StubHandler.calls = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    monkeypatch.setenv("QUOTESPREAD_GEOCODER_URL", f"http://127.0.0.1:{server.server_port}/search")
    monkeypatch.setenv("QUOTESPREAD_GEOCODER_RATE_LIMIT", "0")
    yield _StubHandler
    server.shutdown()
    server.server_close()


@pytest.mark.acceptance(7, "geocoder cache, overrides and retry-then-fail against a stub service")
def test_geocoder_robustness(sample_dir, geocoder_stub):
    config = sample_dir / "run.yaml"
    data = yaml.safe_load(config.read_text())
    data["geocoder_backoff"] = 0
    config.write_text(yaml.safe_dump(data))

    # warmed cache: no network traffic at all
    geocoder_stub.table = {("Mattson", "IL"): (10.0, 10.0)}
    assert main(["run-all", "--config", str(config)]) == 0
    assert geocoder_stub.calls == []
    geo = read_json(sample_dir / "out" / "geo" / "summary.json")
    assert geo["geocoder"]["queries"] == 0 and geo["geocoder"]["override_hits"] > 0

    # one cached city evicted, one unknown city that keeps failing
    cache_lines = (sample_dir / "geocache.jsonl").read_text().splitlines()
    kept = [l for l in cache_lines if json.loads(l)["key"] != "pittsburgh|PA"]
    assert len(kept) == len(cache_lines) - 1
    (sample_dir / "geocache.jsonl").write_text("\n".join(kept) + "\n")
    with open(sample_dir / "offline.csv", "a") as f:
        f.write("E900,which way western man,Nowhere,KS,flyers,2019-03-03\n")
    geocoder_stub.table = {("Pittsburgh", "PA"): (40.4416941, -79.9900861), ("Mattson", "IL"): (10.0, 10.0)}
    geocoder_stub.failing = {"Nowhere"}

    assert main(["run-all", "--config", str(config)]) == 4
    retries = data.get("geocoder_retries", 3)
    assert sorted(geocoder_stub.calls) == sorted([("Pittsburgh", "PA")] + [("Nowhere", "KS")] * (retries + 1))
    diag = (sample_dir / "out" / "geo" / "diagnostics.txt").read_text()
    assert "event E900 (Nowhere, KS) excluded" in diag
    assert (sample_dir / "out" / "report" / "manifest.json").is_file()

    points = {(r["event_id"]): (float(r["lat"]), float(r["lon"]))
              for r in _csv_rows(sample_dir / "out" / "geo" / "fig2_incidents.csv")}
    mattson = [e for e in _csv_rows(sample_dir / "offline.csv") if e["city"] == "Mattson"]
    assert mattson and all(points[e["id"]] == (41.5039252, -87.7131004) for e in mattson)
    assert "E900" not in points
    assert "pittsburgh|PA" in (sample_dir / "geocache.jsonl").read_text()


def _csv_rows(path):
    import csv

    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(l for l in f if not l.startswith("#")))


# -- 8 ------------------------------------------------------------------------


@pytest.mark.acceptance(8, "annotation ratio on 1,798 clusters with 1,655 marked true")
def test_annotation_ratio():
    rng = random.Random(8)
    events = [OfflineEvent(f"E{i}", f"slogan{i} number{i}", "City", "PA", "", date(2019, 1, 1)) for i in range(1798)]
    clusters = cluster_quotes(events).clusters
    assert len(clusters) == 1798
    flags = [True] * 1655 + [False] * 143
    rng.shuffle(flags)
    notes = [AnnotationRecord(e.quote_raw.upper() + "!", flag) for e, flag in zip(events, flags)]
    outcome = apply_annotations(clusters, notes)
    assert (outcome.annotated, outcome.propaganda) == (1798, 1655)
    assert abs(outcome.ratio - 0.920) <= 0.0005
    assert len(outcome.kept) == 1655
