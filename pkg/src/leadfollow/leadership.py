"""Cluster initiators, the leader ratio, and focal-store lag distributions."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from fractions import Fraction
from typing import Iterable, Mapping

from leadfollow.clusters import Cluster
from leadfollow.panel import ChangeLog, PricePanel


@dataclass(frozen=True)
class InitiatorStats:
    store_id: str
    window: int
    single_count: int = 0
    first_of_multiple_count: int = 0

    @property
    def initiated(self) -> int:
        return self.single_count + self.first_of_multiple_count


def classify_initiators(
    clusters: Iterable[Cluster],
    stores: Iterable[str] = (),
    window: int | None = None,
) -> list[InitiatorStats]:
    """Tally first-day changers per store, split by whether anyone followed.

    Every store with a change on a cluster's first day is an initiator (ties
    within a day cannot be ordered).  The credit is "single" when that store
    is the only one in the cluster, otherwise "first of multiple".  Extra rows
    for ``stores`` that never initiate are included with zero counts.
    """
    single: dict[str, int] = defaultdict(int)
    multiple: dict[str, int] = defaultdict(int)
    all_stores = set(stores)
    windows = set()
    for cluster in clusters:
        windows.add(cluster.window)
        distinct = cluster.distinct_stores
        all_stores |= distinct
        initiators = {c.store_id for c in cluster.changes if c.date == cluster.first_date}
        tally = single if len(distinct) == 1 else multiple
        for store in initiators:
            tally[store] += 1
    if window is not None:
        windows.add(window)
    if len(windows) > 1:
        raise ValueError(f"clusters mix window sizes {sorted(windows)}")
    if not windows:
        if all_stores:
            raise ValueError("window is required when there are no clusters")
        return []
    n = windows.pop()
    return [InitiatorStats(s, n, single[s], multiple[s]) for s in sorted(all_stores)]


@dataclass(frozen=True)
class LeaderRatio:
    """Single / first-of-multiple initiations; ``ratio`` is None without evidence."""

    store_id: str
    window: int
    ratio: Fraction | None

    @property
    def has_evidence(self) -> bool:
        return self.ratio is not None


def leader_ratio(stats: InitiatorStats) -> LeaderRatio:
    if stats.first_of_multiple_count == 0:
        return LeaderRatio(stats.store_id, stats.window, None)
    return LeaderRatio(
        stats.store_id,
        stats.window,
        Fraction(stats.single_count, stats.first_of_multiple_count),
    )


@dataclass(frozen=True)
class LagTable:
    """Per-store counts of a focal store's changed items re-priced at day t+d.

    ``numerators[(store, d)]`` counts items the store changed on t+d among
    the focal store's changes on t that the store carries;
    ``denominators[(store, d)]`` counts the carried items.  Both are pooled
    over all focal change dates.
    """

    focal_store: str
    k: int
    stores: tuple[str, ...]
    numerators: Mapping[tuple[str, int], int] = field(default_factory=dict)
    denominators: Mapping[tuple[str, int], int] = field(default_factory=dict)
    category: str | None = None

    @property
    def days(self) -> range:
        return range(-self.k, self.k + 1)

    def numerator(self, store: str, d: int) -> int:
        return self.numerators.get((store, d), 0)

    def denominator(self, store: str, d: int) -> int:
        return self.denominators.get((store, d), 0)

    def zero_support(self, store: str, d: int) -> bool:
        return self.denominator(store, d) == 0

    def fraction(self, store: str, d: int) -> Fraction:
        den = self.denominator(store, d)
        if den == 0:
            return Fraction(0)
        return Fraction(self.numerator(store, d), den)

    def row(self, store: str) -> list[Fraction]:
        return [self.fraction(store, d) for d in self.days]

    def merge(self, other: "LagTable") -> "LagTable":
        """Combine partial tables computed over disjoint sets of focal dates."""
        if (other.focal_store, other.k, other.category) != (self.focal_store, self.k, self.category):
            raise ValueError("can only merge lag tables for the same focal store, k and category")
        num: dict[tuple[str, int], int] = defaultdict(int)
        den: dict[tuple[str, int], int] = defaultdict(int)
        for table in (self, other):
            for key, v in table.numerators.items():
                num[key] += v
            for key, v in table.denominators.items():
                den[key] += v
        stores = tuple(sorted(set(self.stores) | set(other.stores)))
        return LagTable(self.focal_store, self.k, stores, dict(num), dict(den), self.category)


def lag_distribution(
    changelog: ChangeLog,
    focal: str,
    k: int = 3,
    carried: Mapping[str, Iterable[str]] | PricePanel | None = None,
    *,
    category: str | None = None,
) -> LagTable:
    """Distribution of other stores' changes around the focal store's changes.

    ``carried`` maps item -> stores stocking it.  Pass the panel to use "has at
    least one observation of the item"; with ``None`` the relation falls back
    to stores that changed the item in ``changelog``.  The focal store's own
    row is computed like any other for d != 0 and pinned to zero at d = 0.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if focal not in changelog.stores:
        raise ValueError(f"focal store {focal!r} has no price changes")
    if carried is None:
        stock: dict[str, frozenset[str]] = defaultdict(frozenset)
        for item, group in changelog.by_item().items():
            stock[item] = frozenset(c.store_id for c in group)
    elif isinstance(carried, PricePanel):
        stock = carried.carried()
    else:
        stock = {item: frozenset(s) for item, s in carried.items()}

    changed: set[tuple[str, str, date]] = {(c.store_id, c.item_id, c.date) for c in changelog}
    focal_items: dict[date, list[str]] = defaultdict(list)
    for c in changelog:
        if c.store_id == focal:
            focal_items[c.date].append(c.item_id)

    stores = set(changelog.stores)
    for holders in stock.values():
        stores |= holders
    stores.add(focal)

    num: dict[tuple[str, int], int] = defaultdict(int)
    den: dict[tuple[str, int], int] = defaultdict(int)
    for t, items in focal_items.items():
        for item in items:
            for store in stock.get(item, ()):
                for d in range(-k, k + 1):
                    den[(store, d)] += 1
                    if store == focal and d == 0:
                        continue
                    if (store, item, t + timedelta(days=d)) in changed:
                        num[(store, d)] += 1
    return LagTable(focal, k, tuple(sorted(stores)), dict(num), dict(den), category)


@dataclass(frozen=True)
class ScreenHit:
    store_id: str
    peak_day: int
    peak_fraction: Fraction


def follow_screen(
    table: LagTable, threshold: float | Fraction, *, include_focal: bool = False
) -> list[ScreenHit]:
    """Stores whose peak fraction over d = 0..k exceeds ``threshold``.

    Sorted by peak fraction descending, then store id.  Ties for the peak go
    to the smallest lag.  The focal store's self row is skipped by default.
    """
    hits = []
    for store in table.stores:
        if store == table.focal_store and not include_focal:
            continue
        best_d, best = 0, Fraction(-1)
        for d in range(0, table.k + 1):
            f = table.fraction(store, d)
            if f > best:
                best_d, best = d, f
        if best > threshold:
            hits.append(ScreenHit(store, best_d, best))
    hits.sort(key=lambda h: (-h.peak_fraction, h.store_id))
    return hits
