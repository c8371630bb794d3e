"""Brute-force reference implementations used only by the tests.

Each oracle works from a different formulation than the library code:
changes by scanning rows day by day, clusters by looking for runs of empty
calendar days, initiators by checking look-back windows, lag tables by
enumerating every (date, item, store, day) tuple against a flat list.
"""

from __future__ import annotations

import random
from collections import defaultdict
from datetime import date, timedelta

from leadfollow.panel import PriceObservation, PricePanel

DAY0 = date(2000, 1, 1)


def oracle_changes(rows):
    """(store, item, date, prev_price, new_price) tuples from raw rows."""
    by_series = defaultdict(dict)
    for obs in rows:
        by_series[(obs.store_id, obs.item_id)][obs.date] = obs.price
    out = []
    for (store, item), prices in by_series.items():
        last = None
        day, end = min(prices), max(prices)
        while day <= end:
            if day in prices:
                if last is not None and prices[day] != last:
                    out.append((store, item, day, last, prices[day]))
                last = prices[day]
            day += timedelta(days=1)
    return sorted(out, key=lambda t: (t[1], t[2], t[0]))


def oracle_segments(dates, n):
    """Partition sorted change dates (ints) by sweeping the calendar.

    A cluster closes once more than ``n`` consecutive days pass with no change.
    """
    if not dates:
        return []
    counts = defaultdict(int)
    for d in dates:
        counts[d] += 1
    clusters, current, quiet = [], [], 0
    for day in range(min(dates), max(dates) + 1):
        if counts[day]:
            # quiet empty days mean a gap of quiet + 1 between change dates
            if current and quiet >= n:
                clusters.append(current)
                current = []
            current.extend([day] * counts[day])
            quiet = 0
        else:
            quiet += 1
    clusters.append(current)
    return clusters


def same_cluster(day_a, day_b, change_days, n):
    """True when no run of ``n`` empty days lies strictly between the two."""
    lo, hi = sorted((day_a, day_b))
    empty = 0
    for day in range(lo + 1, hi):
        empty = 0 if day in change_days else empty + 1
        if empty >= n:
            return False
    return True


def oracle_initiators(changes, n):
    """store -> [single, first_of_multiple] from PriceChange records."""
    by_item = defaultdict(list)
    for c in changes:
        by_item[c.item_id].append(c)
    tally = defaultdict(lambda: [0, 0])
    for group in by_item.values():
        days = {c.date.toordinal() for c in group}
        for c in group:
            d = c.date.toordinal()
            if any(d - n <= e < d for e in days):
                continue
            members = {o.store_id for o in group if same_cluster(d, o.date.toordinal(), days, n)}
            tally[c.store_id][0 if members == {c.store_id} else 1] += 1
    return dict(tally)


def oracle_lag(changes, focal, k, carried):
    """(num, den) dicts keyed by (store, d) through exhaustive enumeration."""
    flat = [(c.store_id, c.item_id, c.date) for c in changes]
    stores = sorted({s for s, _, _ in flat} | {s for v in carried.values() for s in v} | {focal})
    num, den = defaultdict(int), defaultdict(int)
    for (s, item, t) in flat:
        if s != focal:
            continue
        for o in stores:
            if o not in carried.get(item, ()):
                continue
            for d in range(-k, k + 1):
                den[(o, d)] += 1
                if o == focal and d == 0:
                    continue
                target = t + timedelta(days=d)
                if any(x == (o, item, target) for x in flat):
                    num[(o, d)] += 1
    return dict(num), dict(den), stores


def random_rows(rng: random.Random, max_stores=10, max_items=20, max_days=60, missing=None):
    n_stores = rng.randint(1, max_stores)
    n_items = rng.randint(1, max_items)
    n_days = rng.randint(1, max_days)
    miss = rng.uniform(0.0, 0.6) if missing is None else missing
    hazard = rng.uniform(0.02, 0.4)
    rows = []
    for s in range(n_stores):
        for i in range(n_items):
            if rng.random() < 0.15:
                continue
            price = rng.choice((999, 1099, 1199))
            for d in range(n_days):
                if rng.random() < hazard:
                    price = rng.choice((999, 1099, 1199, 1299))
                if rng.random() < miss:
                    continue
                rows.append(PriceObservation(DAY0 + timedelta(days=d), f"s{s}", f"i{i:02d}", price))
    return rows


def random_panel(rng: random.Random, **kw) -> PricePanel:
    return PricePanel(random_rows(rng, **kw))
