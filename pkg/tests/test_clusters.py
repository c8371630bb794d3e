from __future__ import annotations

import json
import random
from datetime import timedelta
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import DAY0, oracle_segments, random_panel
from leadfollow.clusters import (
    BUCKETS,
    Window,
    cluster_changelog,
    cluster_summary,
    clusters_to_jsonl,
    segment_clusters,
    store_count_histogram,
)
from leadfollow.panel import PriceChange, extract_changes


def _change(day, store="s", item="X", up=True):
    prev, new = (100, 110) if up else (110, 100)
    return PriceChange(store, item, DAY0 + timedelta(days=day), DAY0 + timedelta(days=day - 1), prev, new)


def _days(cluster):
    return [(c.date - DAY0).days for c in cluster.changes]


class TestSegment:
    def test_window_three_splits_on_gap_of_five(self):
        clusters = segment_clusters([_change(d) for d in (1, 3, 5, 10)], 3)
        assert [_days(c) for c in clusters] == [[1, 3, 5], [10]]

    def test_window_seven_keeps_one_cluster(self):
        clusters = segment_clusters([_change(d) for d in (1, 3, 5, 10)], Window(7))
        assert [_days(c) for c in clusters] == [[1, 3, 5, 10]]

    def test_empty(self):
        assert segment_clusters([], 3) == []

    def test_same_day_changes_share_a_cluster(self):
        clusters = segment_clusters([_change(4, "a"), _change(4, "b")], 1)
        assert len(clusters) == 1 and clusters[0].distinct_stores == {"a", "b"}

    def test_gap_equal_to_window_does_not_split(self):
        assert len(segment_clusters([_change(1), _change(4)], 3)) == 1
        assert len(segment_clusters([_change(1), _change(5)], 3)) == 2

    def test_rejects_mixed_items(self):
        with pytest.raises(ValueError):
            segment_clusters([_change(1, item="X"), _change(2, item="Y")], 3)

    @pytest.mark.parametrize("n", [0, -1, 1.5, True])
    def test_window_validation(self, n):
        with pytest.raises(ValueError):
            Window(n)

    def test_matches_sweep_oracle(self):
        rng = random.Random(5)
        for _ in range(300):
            days = sorted(rng.randint(1, 80) for _ in range(rng.randint(0, 40)))
            n = rng.choice((1, 2, 3, 7))
            got = [_days(c) for c in segment_clusters([_change(d, f"s{j}") for j, d in enumerate(days)], n)]
            assert got == oracle_segments(days, n)


class TestSummary:
    def test_single_cluster_arithmetic(self):
        stats = cluster_summary(segment_clusters([_change(d) for d in (2, 3, 4)], 3))
        assert (stats.total_clusters, stats.avg_length_days, stats.avg_changes_per_cluster) == (1, 3, 3)

    def test_single_change_has_length_one(self):
        (cluster,) = segment_clusters([_change(9)], 3)
        assert cluster.length_days == 1

    def test_empty_means_absent(self):
        stats = cluster_summary([])
        assert stats.total_clusters == 0
        assert stats.avg_length_days is None and stats.avg_changes_per_cluster is None


class TestHistogram:
    def test_two_store_cluster(self):
        clusters = segment_clusters([_change(1, "A", up=True), _change(2, "B", up=False)], 3)
        hist = store_count_histogram(clusters)
        b = hist["2"]
        assert (b.total_changes, b.changes_up, b.changes_down) == (2, 1, 1)
        assert all(hist[k].total_changes == 0 for k in BUCKETS if k != "2")

    def test_more_than_five_pooled(self):
        clusters = segment_clusters([_change(1, f"s{i}") for i in range(8)], 3)
        assert store_count_histogram(clusters)[">5"].total_changes == 8


def test_cluster_export_fields_are_stable():
    (cluster,) = segment_clusters([_change(1, "a"), _change(2, "b", up=False)], 3)
    line = clusters_to_jsonl([cluster]).decode().strip()
    rec = json.loads(line)
    assert list(rec) == ["item_id", "window", "first_date", "last_date", "changes"]
    assert list(rec["changes"][0]) == ["store_id", "date", "prev_date", "prev_price", "new_price", "direction"]
    assert rec["first_date"] == "2000-01-02" and rec["last_date"] == "2000-01-03"


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_panel_level_invariants(seed):
    log = extract_changes(random_panel(random.Random(seed), max_stores=8, max_items=10, max_days=60))
    totals = {}
    for n in (1, 2, 3, 7):
        clusters = cluster_changelog(log, n)
        stats = cluster_summary(clusters)
        totals[n] = stats.total_clusters
        assert stats.total_changes == len(log)
        if stats.total_clusters:
            assert stats.avg_changes_per_cluster * stats.total_clusters == len(log)
        for a, b in zip(clusters, clusters[1:]):
            if a.item_id == b.item_id:
                assert (b.first_date - a.last_date).days >= n + 1
        for c in clusters:
            days = [x.date for x in c.changes]
            assert all((y - x).days <= n for x, y in zip(days, days[1:]))
        hist = store_count_histogram(clusters)
        assert hist.bucket_sum() == len(log)
        for b in hist.buckets.values():
            assert b.changes_up + b.changes_down == b.total_changes
    assert totals[7] <= totals[3] <= totals[2] <= totals[1]


def test_average_is_exact_fraction():
    clusters = segment_clusters([_change(d) for d in (1, 2, 9)], 3)
    assert cluster_summary(clusters).avg_changes_per_cluster == Fraction(3, 2)
