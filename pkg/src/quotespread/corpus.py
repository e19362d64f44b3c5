"""Loading, validation and filtering of the offline and online corpora.

Both corpora come as CSV (RFC 4180) or JSON Lines; the format is always
declared by the caller. Malformed rows are skipped and reported as
:class:`Diagnostic` records; only unreadable files, schema-level problems
and ambiguous annotations are fatal.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Any

from .matcher.normalize import StopwordList, normalize
from .models import Diagnostic, OfflineEvent, OnlinePost, QuoteCluster

logger = logging.getLogger(__name__)

FORMATS = ("csv", "jsonl")
OFFLINE_FIELDS = ("quote", "city", "state", "event", "timestamp")
ONLINE_FIELDS = ("text", "dataset", "platform", "timestamp")

# USPS codes for states, DC and inhabited territories.
US_STATES = frozenset(
    "AL AK AZ AR CA CO CT DE FL GA HI ID IL IN IA KS KY LA ME MD MA MI MN MS MO "
    "MT NE NV NH NJ NM NY NC ND OH OK OR PA RI SC SD TN TX UT VT VA WA WV WI WY "
    "DC PR GU VI AS MP".split()
)


class CorpusError(Exception):
    """Fatal input problem: unreadable file, bad schema, ambiguous annotations."""


@dataclass
class LoadResult:
    records: list
    diagnostics: list[Diagnostic] = field(default_factory=list)
    warnings: list[Diagnostic] = field(default_factory=list)
    rows: int = 0

    @property
    def skipped(self) -> int:
        return len(self.diagnostics)


def parse_day(value: str) -> date:
    """Parse an ISO-8601 date or date-time and truncate it to the calendar day.

    The day is taken as written; no timezone conversion is applied.
    """
    text = value.strip()
    if len(text) == 10:
        return date.fromisoformat(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text).date()


def _iter_rows(path: Path, fmt: str, required: Sequence[str]) -> Iterator[tuple[int, Any]]:
    """Yield (line number, row mapping or error string) pairs."""
    if fmt not in FORMATS:
        raise CorpusError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    try:
        handle = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with handle:
        if fmt == "csv":
            reader = csv.DictReader(handle)
            header = reader.fieldnames
            if header is None:
                return
            missing = [c for c in required if c not in header]
            if missing:
                raise CorpusError(f"{path}: header lacks columns {missing}")
            for row in reader:
                if None in row:
                    yield reader.line_num, "too many fields"
                else:
                    yield reader.line_num, row
        else:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    yield lineno, "invalid JSON"
                    continue
                if not isinstance(obj, dict):
                    yield lineno, "line is not a JSON object"
                    continue
                yield lineno, obj


def _text(row: dict, key: str) -> str | None:
    value = row.get(key)
    if value is None:
        return None
    return value if isinstance(value, str) else str(value)


def load_offline(path: str | Path, fmt: str) -> LoadResult:
    path = Path(path)
    result = LoadResult(records=[])
    for line, row in _iter_rows(path, fmt, OFFLINE_FIELDS):
        result.rows += 1
        reason = None
        if isinstance(row, str):
            reason = row
        else:
            missing = [k for k in OFFLINE_FIELDS if _text(row, k) is None]
            quote = (_text(row, "quote") or "").strip()
            state = (_text(row, "state") or "").strip()
            if missing:
                reason = f"missing field(s) {', '.join(missing)}"
            elif not quote:
                reason = "empty quote"
            elif state not in US_STATES:
                reason = f"invalid state code {state!r}"
            else:
                try:
                    day = parse_day(_text(row, "timestamp"))
                except ValueError:
                    reason = f"invalid timestamp {row.get('timestamp')!r}"
        if reason is not None:
            result.diagnostics.append(Diagnostic(str(path), line, reason))
            continue
        result.records.append(
            OfflineEvent(
                id=(_text(row, "id") or "").strip() or f"off:{line}",
                quote_raw=quote,
                city=_text(row, "city").strip(),
                state=state,
                description=_text(row, "event"),
                date=day,
            )
        )
    return result


@dataclass(frozen=True)
class SourceEntry:
    platform: str
    dataset: str
    expected_count: int | None = None


@dataclass(frozen=True)
class SourceManifest:
    entries: tuple[SourceEntry, ...]

    def __post_init__(self) -> None:
        pairs = [(e.platform, e.dataset) for e in self.entries]
        if len(set(pairs)) != len(pairs):
            raise CorpusError("source manifest lists a (platform, dataset) pair twice")

    def knows(self, platform: str, dataset: str) -> bool:
        return any(e.platform == platform and e.dataset == dataset for e in self.entries)


def load_manifest(path: str | Path) -> SourceManifest:
    entries = []
    with open(path, encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            count = (row.get("expected_count") or "").strip()
            entries.append(
                SourceEntry(row["platform"].strip(), row["dataset"].strip(), int(count) if count else None)
            )
    return SourceManifest(tuple(entries))


def load_online(path: str | Path, fmt: str, manifest: SourceManifest | None = None) -> LoadResult:
    path = Path(path)
    result = LoadResult(records=[])
    for line, row in _iter_rows(path, fmt, ONLINE_FIELDS):
        result.rows += 1
        reason = None
        if isinstance(row, str):
            reason = row
        else:
            missing = [k for k in ONLINE_FIELDS if not (_text(row, k) or "").strip()]
            if missing:
                reason = "empty text" if missing == ["text"] else f"missing field(s) {', '.join(missing)}"
            else:
                try:
                    day = parse_day(_text(row, "timestamp"))
                except ValueError:
                    reason = f"invalid timestamp {row.get('timestamp')!r}"
        if reason is not None:
            result.diagnostics.append(Diagnostic(str(path), line, reason))
            continue
        post = OnlinePost(
            id=(_text(row, "id") or "").strip() or f"on:{line}",
            text=_text(row, "text"),
            dataset=_text(row, "dataset").strip(),
            platform=_text(row, "platform").strip(),
            timestamp=day,
        )
        if manifest is not None and not manifest.knows(post.platform, post.dataset):
            result.warnings.append(
                Diagnostic(str(path), line, f"unknown source ({post.platform}, {post.dataset})")
            )
        result.records.append(post)
    return result


def dedup_posts(posts: Sequence[OnlinePost]) -> list[OnlinePost]:
    """Keep the first post of each (exact text, platform, day) group."""
    seen = set()
    kept = []
    for post in posts:
        key = (post.text, post.platform, post.timestamp)
        if key not in seen:
            seen.add(key)
            kept.append(post)
    return kept


@dataclass(frozen=True)
class AnnotationRecord:
    canonical_quote: str
    is_propaganda: bool


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    records = []
    try:
        handle = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return records
        if not {"canonical_quote", "is_propaganda"} <= set(reader.fieldnames):
            raise CorpusError(f"{path}: expected columns canonical_quote, is_propaganda")
        for row in reader:
            flag = (row["is_propaganda"] or "").strip().lower()
            if flag not in ("true", "false"):
                raise CorpusError(f"{path}:{reader.line_num}: is_propaganda must be true/false, got {flag!r}")
            records.append(AnnotationRecord(row["canonical_quote"], flag == "true"))
    return records


@dataclass
class AnnotationOutcome:
    kept: list[QuoteCluster]
    ratio: float | None  # propaganda / annotated; None when nothing was annotated
    annotated: int
    propaganda: int
    unannotated: list[str]
    dropped: list[str]


def apply_annotations(
    clusters: Sequence[QuoteCluster],
    annotations: Sequence[AnnotationRecord],
    stopwords: StopwordList | None = None,
) -> AnnotationOutcome:
    """Drop clusters annotated as non-propaganda; keep unannotated ones.

    Annotation keys are re-normalized, which leaves a key already in loose
    normal form unchanged.
    """
    table: dict[str, bool] = {}
    for record in annotations:
        key = normalize(record.canonical_quote, stopwords).loose_key
        if key in table:
            raise CorpusError(f"duplicate annotation for {key!r}")
        table[key] = record.is_propaganda

    kept, unannotated, dropped = [], [], []
    annotated = propaganda = 0
    for cluster in clusters:
        verdict = table.get(cluster.canonical)
        if verdict is None:
            unannotated.append(cluster.cluster_id)
            kept.append(cluster)
            continue
        annotated += 1
        if verdict:
            propaganda += 1
            kept.append(cluster)
        else:
            dropped.append(cluster.cluster_id)
    ratio = propaganda / annotated if annotated else None
    return AnnotationOutcome(kept, ratio, annotated, propaganda, unannotated, dropped)
