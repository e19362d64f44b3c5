"""Two-step quote matching, clustering and online mention search."""

from __future__ import annotations

import hashlib
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

from ..models import MatchKind, Mention, OfflineEvent, OnlinePost, Occurrence, QuoteCluster
from .automaton import TokenAutomaton
from .normalize import NormalForm, StopwordList, default_stopwords, normalize


def match_pair(a: NormalForm, b: NormalForm) -> MatchKind:
    """Step one compares exact token streams, step two the loose keys.

    Texts with an empty loose key (all stopwords or punctuation) match
    nothing, not even themselves, so an exact match always implies a loose one.
    """
    if not (a.matchable and b.matchable):
        return MatchKind.NONE
    if a.exact_tokens == b.exact_tokens:
        return MatchKind.EXACT
    if a.loose_tokens == b.loose_tokens:
        return MatchKind.LOOSE
    return MatchKind.NONE


def cluster_id_for(prefix: str, key: str) -> str:
    return f"{prefix}-{hashlib.sha1(key.encode('utf-8')).hexdigest()[:12]}"


def order_clusters(clusters: Iterable[QuoteCluster], size=None) -> list[QuoteCluster]:
    """Sort by size descending, then canonical key ascending."""
    if size is None:
        size = lambda c: c.count  # noqa: E731
    return sorted(clusters, key=lambda c: (-size(c), c.canonical, c.cluster_id))


@dataclass
class ClusteringResult:
    clusters: list[QuoteCluster]
    rejected: list[str]  # ids of records whose loose key is empty


def cluster_quotes(
    events: Sequence[OfflineEvent], stopwords: StopwordList | None = None
) -> ClusteringResult:
    """Partition offline events by the loose key of their quote.

    Grouping by loose key is the transitive closure of the pairwise
    two-step relation, because an exact match always implies a loose one.
    """
    stopwords = stopwords or default_stopwords()
    groups: dict[str, list[OfflineEvent]] = defaultdict(list)
    rejected = []
    for event in events:
        key = normalize(event.quote_raw, stopwords).loose_key
        if not key:
            rejected.append(event.id)
            continue
        groups[key].append(event)

    clusters = [
        QuoteCluster(
            cluster_id=cluster_id_for("off", key),
            canonical=key,
            variants=tuple(sorted({e.quote_raw for e in members})),
            offline_occurrences=tuple(Occurrence(e.id, e.date, e.geo) for e in members),
        )
        for key, members in groups.items()
    ]
    return ClusteringResult(order_clusters(clusters), rejected)


def cluster_online(
    posts: Sequence[OnlinePost], stopwords: StopwordList | None = None
) -> ClusteringResult:
    """Group posts whose whole texts match under the two-step relation.

    Each member is recorded as a mention; its kind is Exact when the post's
    token stream equals the cluster's most frequent exact form.
    """
    stopwords = stopwords or default_stopwords()
    groups: dict[str, list[tuple[OnlinePost, tuple[str, ...]]]] = defaultdict(list)
    rejected = []
    for post in posts:
        form = normalize(post.text, stopwords)
        if not form.loose_tokens:
            rejected.append(post.id)
            continue
        groups[form.loose_key].append((post, form.exact_tokens))

    clusters = []
    for key, members in groups.items():
        tally: dict[tuple[str, ...], int] = defaultdict(int)
        for _, exact in members:
            tally[exact] += 1
        representative = min(tally, key=lambda t: (-tally[t], t))
        mentions = tuple(
            Mention(
                post.id,
                post.timestamp,
                post.platform,
                MatchKind.EXACT if exact == representative else MatchKind.LOOSE,
            )
            for post, exact in members
        )
        clusters.append(
            QuoteCluster(
                cluster_id=cluster_id_for("on", key),
                canonical=key,
                variants=tuple(sorted({post.text for post, _ in members})),
                online_mentions=mentions,
            )
        )
    ordered = order_clusters(clusters, size=lambda c: len(c.online_mentions))
    return ClusteringResult(ordered, rejected)


class _UnionFind:
    def __init__(self, items: Iterable[str]) -> None:
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def merge_clusters(
    clusters: Sequence[QuoteCluster], pairs: Iterable[tuple[str, str]]
) -> list[QuoteCluster]:
    """Apply manual merge pairs (cluster ids) and return the reordered clusters.

    The merged cluster keeps the id and canonical key of its largest member.
    Unknown ids raise ``KeyError``.
    """
    by_id = {c.cluster_id: c for c in clusters}
    uf = _UnionFind(by_id)
    for a, b in pairs:
        for cid in (a, b):
            if cid not in by_id:
                raise KeyError(f"merge pair references unknown cluster id {cid!r}")
        uf.union(a, b)

    groups: dict[str, list[QuoteCluster]] = defaultdict(list)
    for cluster in clusters:
        groups[uf.find(cluster.cluster_id)].append(cluster)

    merged = []
    for members in groups.values():
        if len(members) == 1:
            merged.append(members[0])
            continue
        members = order_clusters(
            members, size=lambda c: c.count + len(c.online_mentions)
        )
        head = members[0]
        merged.append(
            replace(
                head,
                variants=tuple(sorted({v for m in members for v in m.variants})),
                offline_occurrences=tuple(o for m in members for o in m.offline_occurrences),
                online_mentions=tuple(x for m in members for x in m.online_mentions),
                member_keys=tuple(k for m in members for k in m.member_keys),
            )
        )
    if any(c.offline_occurrences for c in merged):
        return order_clusters(merged)
    return order_clusters(merged, size=lambda c: len(c.online_mentions))


@dataclass(frozen=True)
class MentionStats:
    exact_posts: int  # posts with at least one exact mention
    loose_only_posts: int  # posts found only by the loose tier
    total_posts: int
    exact_pairs: int
    loose_pairs: int

    def reconcile(self) -> None:
        if self.total_posts != self.exact_posts + self.loose_only_posts:
            raise AssertionError(
                f"mention totals do not reconcile: {self.total_posts} != "
                f"{self.exact_posts} + {self.loose_only_posts}"
            )


class MentionScanner:
    """Two-tier containment search of post texts against a set of clusters.

    The exact tier looks for any variant's exact token stream inside the
    post's exact token stream; the loose tier looks for the cluster's loose
    tokens inside the post's loose tokens.
    """

    def __init__(self, clusters: Sequence[QuoteCluster], stopwords: StopwordList | None = None):
        self.stopwords = stopwords or default_stopwords()
        exact: dict[tuple[str, ...], set[int]] = defaultdict(set)
        loose: dict[tuple[str, ...], set[int]] = defaultdict(set)
        for index, cluster in enumerate(clusters):
            for variant in cluster.variants:
                tokens = normalize(variant, self.stopwords).exact_tokens
                if tokens:
                    exact[tokens].add(index)
            for key in cluster.member_keys:
                if key:
                    loose[tuple(key.split(" "))].add(index)
        self._exact_owner = [sorted(v) for v in exact.values()]
        self._loose_owner = [sorted(v) for v in loose.values()]
        self._exact = TokenAutomaton(exact.keys())
        self._loose = TokenAutomaton(loose.keys())

    def scan_form(self, form: NormalForm) -> tuple[set[int], set[int]]:
        """Return (exact cluster indices, loose-only cluster indices)."""
        exact = set()
        for p in self._exact.search(form.exact_tokens):
            exact.update(self._exact_owner[p])
        loose = set()
        for p in self._loose.search(form.loose_tokens):
            loose.update(self._loose_owner[p])
        return exact, loose - exact

    def scan(self, text: str) -> tuple[set[int], set[int]]:
        return self.scan_form(normalize(text, self.stopwords))


def find_online_mentions(
    clusters: Sequence[QuoteCluster],
    posts: Iterable[OnlinePost],
    stopwords: StopwordList | None = None,
) -> tuple[list[QuoteCluster], MentionStats]:
    """Attach every (cluster, post) mention and count mentioned posts.

    Mentions are appended in post input order; existing mentions on the
    clusters are discarded.
    """
    scanner = MentionScanner(clusters, stopwords)
    found: list[list[Mention]] = [[] for _ in clusters]
    exact_posts = loose_posts = exact_pairs = loose_pairs = 0
    for post in posts:
        exact, loose = scanner.scan(post.text)
        if not exact and not loose:
            continue
        for index in exact:
            found[index].append(Mention(post.id, post.timestamp, post.platform, MatchKind.EXACT))
        for index in loose:
            found[index].append(Mention(post.id, post.timestamp, post.platform, MatchKind.LOOSE))
        exact_pairs += len(exact)
        loose_pairs += len(loose)
        if exact:
            exact_posts += 1
        else:
            loose_posts += 1

    updated = [replace(c, online_mentions=tuple(m)) for c, m in zip(clusters, found)]
    stats = MentionStats(
        exact_posts=exact_posts,
        loose_only_posts=loose_posts,
        total_posts=exact_posts + loose_posts,
        exact_pairs=exact_pairs,
        loose_pairs=loose_pairs,
    )
    return updated, stats
