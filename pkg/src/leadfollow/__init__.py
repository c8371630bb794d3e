"""Leader-follower screening for retail price panels."""

__version__ = "0.1.0"

from leadfollow.clusters import (
    Cluster,
    ClusterStats,
    StoreCountHistogram,
    Window,
    cluster_changelog,
    cluster_summary,
    segment_clusters,
    store_count_histogram,
)
from leadfollow.leadership import (
    InitiatorStats,
    LagTable,
    LeaderRatio,
    classify_initiators,
    follow_screen,
    lag_distribution,
    leader_ratio,
)
from leadfollow.panel import (
    Category,
    ChangeLog,
    PanelError,
    PriceChange,
    PriceObservation,
    PricePanel,
    extract_changes,
    ingest_observations,
    per_store_change_counts,
    stratify,
)

__all__ = [
    "Category",
    "ChangeLog",
    "Cluster",
    "ClusterStats",
    "InitiatorStats",
    "LagTable",
    "LeaderRatio",
    "PanelError",
    "PriceChange",
    "PriceObservation",
    "PricePanel",
    "StoreCountHistogram",
    "Window",
    "classify_initiators",
    "cluster_changelog",
    "cluster_summary",
    "extract_changes",
    "follow_screen",
    "ingest_observations",
    "lag_distribution",
    "leader_ratio",
    "per_store_change_counts",
    "segment_clusters",
    "store_count_histogram",
    "stratify",
    "__version__",
]
