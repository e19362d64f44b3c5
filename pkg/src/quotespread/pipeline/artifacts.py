"""Reading and writing stage artifacts.

Everything is written with sorted keys, fixed separators and ``\\n`` line
endings so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections.abc import Iterable, Sequence
from datetime import date
from pathlib import Path
from typing import Any

from ..models import GeoPoint, MatchKind, Mention, OfflineEvent, OnlinePost, Occurrence, QuoteCluster

PLOT_SCHEMA_VERSION = 1


class MissingArtifact(Exception):
    """An upstream stage has not been run."""


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def read_json(path: Path) -> Any:
    if not path.is_file():
        raise MissingArtifact(str(path))
    return json.loads(path.read_text(encoding="utf-8"))


def write_jsonl(path: Path, rows: Iterable[Any]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(dumps(row) + "\n")
            n += 1
    return n


def read_jsonl(path: Path) -> list[Any]:
    if not path.is_file():
        raise MissingArtifact(str(path))
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def write_plot_csv(
    path: Path, schema: str, config_digest: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]
) -> int:
    """Write plot data as CSV preceded by ``#`` schema and config-digest lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# schema: {schema}/{PLOT_SCHEMA_VERSION}\n")
    buf.write(f"# config_digest: {config_digest}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    n = 0
    for row in rows:
        writer.writerow(row)
        n += 1
    path.write_text(buf.getvalue(), encoding="utf-8")
    return n


def read_plot_csv(path: Path) -> tuple[str | None, str | None, list[dict[str, str]]]:
    """Return (schema, config_digest, rows) from a plot CSV."""
    meta: dict[str, str] = {}
    lines = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        else:
            lines.append(line)
    return meta.get("schema"), meta.get("config_digest"), list(csv.DictReader(lines))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _geo(point: GeoPoint | None) -> dict[str, float] | None:
    return None if point is None else {"lat": point.lat, "lon": point.lon}


def _point(obj) -> GeoPoint | None:
    return None if obj is None else GeoPoint(obj["lat"], obj["lon"])


def event_to_dict(e: OfflineEvent) -> dict[str, Any]:
    return {
        "id": e.id,
        "quote": e.quote_raw,
        "city": e.city,
        "state": e.state,
        "event": e.description,
        "date": e.date.isoformat(),
        "geo": _geo(e.geo),
    }


def event_from_dict(d: dict[str, Any]) -> OfflineEvent:
    return OfflineEvent(
        d["id"], d["quote"], d["city"], d["state"], d["event"], date.fromisoformat(d["date"]), _point(d.get("geo"))
    )


def post_to_dict(p: OnlinePost) -> dict[str, Any]:
    return {
        "id": p.id,
        "text": p.text,
        "dataset": p.dataset,
        "platform": p.platform,
        "date": p.timestamp.isoformat(),
    }


def post_from_dict(d: dict[str, Any]) -> OnlinePost:
    return OnlinePost(d["id"], d["text"], d["dataset"], d["platform"], date.fromisoformat(d["date"]))


def cluster_to_dict(c: QuoteCluster) -> dict[str, Any]:
    return {
        "cluster_id": c.cluster_id,
        "canonical": c.canonical,
        "member_keys": list(c.member_keys),
        "variants": list(c.variants),
        "offline_occurrences": [
            {"event_id": o.event_id, "date": o.date.isoformat(), "geo": _geo(o.geo)} for o in c.offline_occurrences
        ],
        "online_mentions": [
            {"post_id": m.post_id, "date": m.date.isoformat(), "platform": m.platform, "kind": m.kind.value}
            for m in c.online_mentions
        ],
    }


def cluster_from_dict(d: dict[str, Any]) -> QuoteCluster:
    return QuoteCluster(
        cluster_id=d["cluster_id"],
        canonical=d["canonical"],
        variants=tuple(d["variants"]),
        offline_occurrences=tuple(
            Occurrence(o["event_id"], date.fromisoformat(o["date"]), _point(o.get("geo")))
            for o in d["offline_occurrences"]
        ),
        online_mentions=tuple(
            Mention(m["post_id"], date.fromisoformat(m["date"]), m["platform"], MatchKind(m["kind"]))
            for m in d["online_mentions"]
        ),
        member_keys=tuple(d.get("member_keys") or (d["canonical"],)),
    )
