"""Regenerate the bundled sample dataset in ``sample/``.

Output is fully determined by the seed, so rerunning leaves the files
unchanged.
"""

from __future__ import annotations

import csv
import json
import random
from datetime import date, timedelta
from pathlib import Path

from quotespread.matcher.cluster import cluster_id_for
from quotespread.matcher.normalize import normalize

ROOT = Path(__file__).resolve().parent.parent / "sample"
FETCHED_AT = "2026-10-14T00:00:00+00:00"

CITIES = {
    ("Pittsburgh", "PA"): (40.4416941, -79.9900861),
    ("Philadelphia", "PA"): (39.9524152, -75.1635755),
    ("Boston", "MA"): (42.3554334, -71.060511),
    ("New York", "NY"): (40.7127281, -74.0060152),
    ("Baltimore", "MD"): (39.2908816, -76.610759),
    ("Richmond", "VA"): (37.5385087, -77.43428),
    ("Raleigh", "NC"): (35.7803977, -78.6390989),
    ("Wilson", "NC"): (35.7212689, -77.9155395),
    ("Atlanta", "GA"): (33.7489924, -84.3902644),
    ("Chicago", "IL"): (41.8755616, -87.6244212),
    ("Columbus", "OH"): (39.9622601, -83.0007065),
    ("Detroit", "MI"): (42.3315509, -83.0466403),
    ("Dallas", "TX"): (32.7762719, -96.7968559),
    ("Denver", "CO"): (39.7392364, -104.984862),
    ("Phoenix", "AZ"): (33.4484367, -112.074141),
    ("Seattle", "WA"): (47.6038321, -122.330062),
    ("Nashville", "TN"): (36.1622767, -86.7742984),
}
# Misspelled in the source data; resolved through the override file.
OVERRIDES = {("Mattson", "IL"): (41.5039252, -87.7131004)}

QUOTES = [
    # text, offline weight, spread (city pool), online weight
    ("America First", 9, list(CITIES), 14),
    ("Reclaim America", 6, list(CITIES), 2),
    ("America is not for sale", 7, list(CITIES), 1),
    ("Which way western man", 4, [("Philadelphia", "PA"), ("Pittsburgh", "PA")], 3),
    ("Defending our heritage", 4, [("Atlanta", "GA"), ("Nashville", "TN")], 2),
    ("March against sharia", 3, [("Seattle", "WA"), ("Denver", "CO"), ("Boston", "MA"), ("Dallas", "TX")], 0),
    ("Protect your heritage", 3, [("Richmond", "VA"), ("Raleigh", "NC"), ("Mattson", "IL")], 2),
    ("Troops to the border", 2, [("Phoenix", "AZ"), ("Dallas", "TX")], 8),
    ("Only two genders", 2, [("Columbus", "OH"), ("Detroit", "MI")], 6),
    ("Send a message", 2, [("Chicago", "IL")], 1),
    ("Aryan", 1, [("Chicago", "IL")], 0),
]
DECORATIONS = ["{q}", "{q}!", "{Q}", "{q}.", "\"{q}\""]
POST_TEMPLATES = [
    "{q}",
    "they keep saying {q} and nobody listens",
    "Remember: {Q}!!",
    "{q}... that's all",
    "new flyers went up today, {q}",
]
NOISE = [
    "meeting moved to thursday",
    "anyone have the link to the stream",
    "great weather this weekend",
    "thanks for sharing",
    "the forum will be down for maintenance",
]


def loose_variant(q: str) -> str:
    """Break the exact token stream while keeping the loose key."""
    words = q.lower().split()
    if len(words) >= 2:
        return " ".join(words[:1] + [f"({words[1]})"] + words[2:])
    return q


def main() -> None:
    rng = random.Random(7)
    ROOT.mkdir(exist_ok=True)

    offline = []
    for text, weight, cities, _ in QUOTES:
        base = date(2018, 1, 1) + timedelta(days=rng.randrange(0, 500))
        for i in range(weight):
            city, state = cities[i % len(cities)]
            day = base + timedelta(days=rng.randrange(0, 240))
            deco = rng.choice(DECORATIONS)
            offline.append(
                {
                    "quote": deco.format(q=text.lower() if rng.random() < 0.4 else text, Q=text.upper()),
                    "city": city,
                    "state": state,
                    "event": rng.choice(["flyers", "banner", "stickers", "graffiti"]),
                    "timestamp": day.isoformat(),
                }
            )
    rng.shuffle(offline)
    for i, row in enumerate(offline, start=1):
        row["id"] = f"E{i:03d}"

    online = []
    sources = [("forum", "dumpA"), ("forum", "dumpB"), ("microblog", "orgtweets")]
    for text, off_weight, _, weight in QUOTES:
        lead = rng.random() < 0.75
        anchor = date(2018, 3, 1) + timedelta(days=rng.randrange(0, 400))
        for i in range(weight):
            shift = rng.randrange(-200, 10) if lead else rng.randrange(30, 200)
            day = anchor + timedelta(days=shift)
            q = loose_variant(text) if i % 4 == 3 else text.lower()
            template = rng.choice(POST_TEMPLATES)
            platform, dataset = rng.choice(sources)
            online.append(
                {
                    "text": template.format(q=q, Q=text.upper()),
                    "dataset": dataset,
                    "platform": platform,
                    "timestamp": f"{day.isoformat()}T{rng.randrange(24):02d}:{rng.randrange(60):02d}:00Z",
                }
            )
    for _ in range(25):
        platform, dataset = rng.choice(sources)
        day = date(2017, 6, 1) + timedelta(days=rng.randrange(0, 900))
        online.append(
            {
                "text": rng.choice(NOISE),
                "dataset": dataset,
                "platform": platform,
                "timestamp": f"{day.isoformat()}T12:00:00Z",
            }
        )
    rng.shuffle(online)
    # Two exact duplicates of earlier rows for the deduplication step.
    online.append(dict(online[3]))
    online.append(dict(online[10]))
    for i, row in enumerate(online, start=1):
        row["id"] = f"P{i:03d}"

    with open(ROOT / "offline.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, ["id", "quote", "city", "state", "event", "timestamp"], lineterminator="\n")
        w.writeheader()
        w.writerows(offline)
    with open(ROOT / "online.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, ["id", "text", "dataset", "platform", "timestamp"], lineterminator="\n")
        w.writeheader()
        w.writerows(online)
    with open(ROOT / "manifest.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["platform", "dataset", "expected_count"])
        for platform, dataset in sources:
            w.writerow([platform, dataset, ""])
    with open(ROOT / "annotations.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["canonical_quote", "is_propaganda"])
        for text, *_ in QUOTES:
            w.writerow([normalize(text).loose_key, "false" if text in ("Send a message", "Aryan") else "true"])
    with open(ROOT / "overrides.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["city", "state", "lat", "lon"])
        for (city, state), (lat, lon) in OVERRIDES.items():
            w.writerow([city, state, lat, lon])
    with open(ROOT / "merges.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cluster_a", "cluster_b"])
        w.writerow(
            [
                cluster_id_for("off", normalize("Defending our heritage").loose_key),
                cluster_id_for("off", normalize("Protect your heritage").loose_key),
            ]
        )
    with open(ROOT / "geocache.jsonl", "w", encoding="utf-8") as f:
        for (city, state), (lat, lon) in sorted(CITIES.items()):
            key = f"{city.lower()}|{state}"
            f.write(json.dumps({"key": key, "lat": lat, "lon": lon, "source": "service", "fetched_at": FETCHED_AT}, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
