from .automaton import TokenAutomaton
from .cluster import (
    ClusteringResult,
    MentionScanner,
    MentionStats,
    cluster_online,
    cluster_quotes,
    find_online_mentions,
    match_pair,
    merge_clusters,
)
from .normalize import NormalForm, StopwordList, default_stopwords, load_stopwords, normalize

__all__ = [
    "ClusteringResult",
    "MentionScanner",
    "MentionStats",
    "NormalForm",
    "StopwordList",
    "TokenAutomaton",
    "cluster_online",
    "cluster_quotes",
    "default_stopwords",
    "find_online_mentions",
    "load_stopwords",
    "match_pair",
    "merge_clusters",
    "normalize",
]
