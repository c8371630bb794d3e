"""n-day price-change clusters and their summary statistics.

A cluster pools every store's changes on one item.  A new cluster opens
whenever the calendar gap to the previous change exceeds ``n`` days, so two
consecutive clusters of an item are always at least ``n + 1`` days apart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from typing import Iterable, Sequence

from leadfollow.panel import ChangeLog, PriceChange

BUCKETS = ("1", "2", "3", "4", "5", ">5")


@dataclass(frozen=True)
class Window:
    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"window must be a positive integer number of days, got {self.n!r}")


def as_window(window: Window | int) -> Window:
    return window if isinstance(window, Window) else Window(window)


@dataclass(frozen=True)
class Cluster:
    item_id: str
    window: int
    changes: tuple[PriceChange, ...]

    @property
    def first_date(self) -> date:
        return self.changes[0].date

    @property
    def last_date(self) -> date:
        return self.changes[-1].date

    @property
    def length_days(self) -> int:
        return (self.last_date - self.first_date).days + 1

    @property
    def distinct_stores(self) -> frozenset[str]:
        return frozenset(c.store_id for c in self.changes)

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "window": self.window,
            "first_date": self.first_date.isoformat(),
            "last_date": self.last_date.isoformat(),
            "changes": [c.to_record() for c in self.changes],
        }


def segment_clusters(item_changes: Sequence[PriceChange], window: Window | int) -> list[Cluster]:
    """Split one item's date-sorted changes into maximal n-day clusters."""
    n = as_window(window).n
    if not item_changes:
        return []
    item_id = item_changes[0].item_id
    ordered = sorted(item_changes, key=lambda c: (c.date, c.store_id))
    clusters: list[Cluster] = []
    current = [ordered[0]]
    for change in ordered[1:]:
        if change.item_id != item_id:
            raise ValueError("segment_clusters expects the changes of a single item")
        if (change.date - current[-1].date).days > n:
            clusters.append(Cluster(item_id, n, tuple(current)))
            current = []
        current.append(change)
    clusters.append(Cluster(item_id, n, tuple(current)))
    return clusters


def cluster_changelog(changelog: ChangeLog, window: Window | int) -> list[Cluster]:
    """Clusters for every item, ordered by ``(item_id, first_date)``."""
    groups = changelog.by_item()
    out: list[Cluster] = []
    for item in sorted(groups):
        out.extend(segment_clusters(groups[item], window))
    return out


@dataclass(frozen=True)
class ClusterStats:
    total_clusters: int
    total_changes: int
    total_length_days: int

    @property
    def avg_length_days(self) -> Fraction | None:
        if not self.total_clusters:
            return None
        return Fraction(self.total_length_days, self.total_clusters)

    @property
    def avg_changes_per_cluster(self) -> Fraction | None:
        if not self.total_clusters:
            return None
        return Fraction(self.total_changes, self.total_clusters)


def cluster_summary(clusters: Iterable[Cluster]) -> ClusterStats:
    clusters = list(clusters)
    return ClusterStats(
        total_clusters=len(clusters),
        total_changes=sum(len(c.changes) for c in clusters),
        total_length_days=sum(c.length_days for c in clusters),
    )


@dataclass(frozen=True)
class BucketCounts:
    total_changes: int = 0
    changes_up: int = 0
    changes_down: int = 0


@dataclass(frozen=True)
class StoreCountHistogram:
    """Changes grouped by how many distinct stores their cluster contains."""

    buckets: dict[str, BucketCounts]
    total_changes: int

    def __getitem__(self, bucket: str) -> BucketCounts:
        return self.buckets[bucket]

    def bucket_sum(self) -> int:
        return sum(b.total_changes for b in self.buckets.values())


def bucket_for(n_stores: int) -> str:
    if n_stores < 1:
        raise ValueError("a cluster has at least one store")
    return str(n_stores) if n_stores <= 5 else ">5"


def store_count_histogram(clusters: Iterable[Cluster]) -> StoreCountHistogram:
    tallies = {b: [0, 0, 0] for b in BUCKETS}
    grand = 0
    for cluster in clusters:
        t = tallies[bucket_for(len(cluster.distinct_stores))]
        for change in cluster.changes:
            t[0] += 1
            t[1 if change.direction == "up" else 2] += 1
        grand += len(cluster.changes)
    buckets = {b: BucketCounts(*tallies[b]) for b in BUCKETS}
    return StoreCountHistogram(buckets, grand)


def clusters_to_jsonl(clusters: Iterable[Cluster]) -> bytes:
    lines = (json.dumps(c.to_record(), separators=(",", ":")) for c in clusters)
    return "".join(line + "\n" for line in lines).encode("utf-8")
