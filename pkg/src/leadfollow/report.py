"""Deterministic CSV / Markdown renderings of the five report tables.

Files are named ``table{N}_{category}_{window}.{ext}``; ``all`` stands in
for a category or window a table does not split on.  Totals are recomputed
at render time and a mismatch raises ``ReportError`` instead of being
patched over.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from typing import Any

from leadfollow.clusters import BUCKETS, BucketCounts, ClusterStats, StoreCountHistogram
from leadfollow.leadership import InitiatorStats, LagTable, leader_ratio
from leadfollow.panel import LABELS, ChangeCountTable

FORMATS = ("csv", "markdown")
EXTENSIONS = {"csv": "csv", "markdown": "md"}

_CATEGORY_TITLES = {
    "random": "Random",
    "nyt_bestseller": "NYT",
    "computer_bestseller": "Computer",
}
_BUCKET_TITLES = {b: (f"{b} store" if b == "1" else f"{b} stores") for b in BUCKETS[:-1]}
_BUCKET_TITLES[">5"] = "+ 5 stores"


class ReportError(ValueError):
    def __init__(self, table: str, message: str):
        self.table = table
        super().__init__(f"{table}: {message}")


@dataclass
class ReportBundle:
    """Everything the report tables need.

    A ``None`` lag table marks that section absent (for instance when the
    focal store made no changes in a category).
    """

    change_counts: ChangeCountTable | None = None
    cluster_stats: dict[int, ClusterStats] = field(default_factory=dict)
    histograms: dict[tuple[str, int], StoreCountHistogram] = field(default_factory=dict)
    initiators: dict[int, list[InitiatorStats]] = field(default_factory=dict)
    lag_tables: dict[str, LagTable | None] = field(default_factory=dict)
    windows: tuple[int, ...] = (3, 7)
    k: int = 3
    metadata: dict[str, Any] = field(default_factory=dict)


# -- number formatting ---------------------------------------------------------


def _round(value: Fraction, places: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = 60
        exact = Decimal(value.numerator) / Decimal(value.denominator)
        return exact.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def format_ratio(value: Fraction | None) -> str:
    return "n/a" if value is None else str(_round(value, 3))


def format_average(value: Fraction | None) -> str:
    return "n/a" if value is None else str(_round(value, 1))


def format_percent(value: Fraction) -> str:
    return str(_round(value * 100, 0))


def format_day(d: int) -> str:
    return f"+{d}" if d > 0 else str(d)


# -- table builders ------------------------------------------------------------


@dataclass
class Table:
    name: str
    title: str
    header: list[str]
    rows: list[list[str]]
    notes: str = ""


def _table1(bundle: ReportBundle) -> Table:
    counts = bundle.change_counts
    categories = list(counts.categories) if counts is not None else list(LABELS)
    header = ["store_id"] + categories
    rows: list[list[str]] = []
    if counts is not None and counts.stores:
        bad = counts.mismatched_totals()
        if bad:
            raise ReportError("table1_all_all", f"totals row does not equal column sums for {', '.join(bad)}")
        for store in counts.stores:
            rows.append([store] + [str(counts.count(store, c)) for c in categories])
        rows.append(["Total"] + [str(counts.totals[c]) for c in categories])
    return Table("table1_all_all", "Price changes by store", header, rows)


def _table2(bundle: ReportBundle) -> Table:
    windows = sorted(bundle.windows)
    header = ["statistic"] + [f"{n}-day" for n in windows]
    rows: list[list[str]] = []
    stats = [bundle.cluster_stats.get(n) for n in windows]
    if any(s is not None and s.total_clusters for s in stats):
        rows.append(["clusters"] + [str(s.total_clusters) if s else "n/a" for s in stats])
        rows.append(["avg_length_days"] + [format_average(s.avg_length_days) if s else "n/a" for s in stats])
        rows.append(
            ["avg_changes_per_cluster"]
            + [format_average(s.avg_changes_per_cluster) if s else "n/a" for s in stats]
        )
    return Table("table2_all_all", "Single-item price change clusters", header, rows)


def _table3(category: str, window: int, hist: StoreCountHistogram | None) -> Table:
    name = f"table3_{category}_{window}"
    header = ["stores_in_cluster", "total_changes", "changes_up", "changes_down"]
    rows: list[list[str]] = []
    if hist is not None and hist.total_changes:
        for bucket in BUCKETS:
            b = hist.buckets.get(bucket, BucketCounts())
            if b.changes_up + b.changes_down != b.total_changes:
                raise ReportError(name, f"bucket {bucket}: up + down != total")
            rows.append([_BUCKET_TITLES[bucket], str(b.total_changes), str(b.changes_up), str(b.changes_down)])
        if hist.bucket_sum() != hist.total_changes:
            raise ReportError(name, "totals row does not equal the bucket sum")
        up = sum(b.changes_up for b in hist.buckets.values())
        down = sum(b.changes_down for b in hist.buckets.values())
        rows.append(["Total", str(hist.total_changes), str(up), str(down)])
    title = f"Stores per {window}-day cluster: {_CATEGORY_TITLES.get(category, category)}"
    return Table(name, title, header, rows)


def _table4(bundle: ReportBundle) -> Table:
    windows = sorted(bundle.windows)
    header = ["store_id"]
    header += [f"single_{n}d" for n in windows]
    header += [f"first_of_multiple_{n}d" for n in windows]
    header += [f"leader_ratio_{n}d" for n in windows]
    by_store: dict[str, dict[int, InitiatorStats]] = {}
    for n in windows:
        for s in bundle.initiators.get(n, []):
            if s.single_count < 0 or s.first_of_multiple_count < 0:
                raise ReportError("table4_all_all", f"negative count for {s.store_id}")
            by_store.setdefault(s.store_id, {})[n] = s
    rows = []
    for store in sorted(by_store):
        per = {n: by_store[store].get(n, InitiatorStats(store, n)) for n in windows}
        rows.append(
            [store]
            + [str(per[n].single_count) for n in windows]
            + [str(per[n].first_of_multiple_count) for n in windows]
            + [format_ratio(leader_ratio(per[n]).ratio) for n in windows]
        )
    return Table("table4_all_all", "Stores that initiate price changes", header, rows)


def _table5(category: str, table: LagTable | None, k: int) -> Table:
    name = f"table5_{category}_all"
    if table is not None:
        k = table.k
    header = ["store_id"] + [format_day(d) for d in range(-k, k + 1)]
    rows: list[list[str]] = []
    focal = "focal store"
    if table is not None:
        focal = table.focal_store
        for store in table.stores:
            for d in table.days:
                if table.numerator(store, d) > table.denominator(store, d):
                    raise ReportError(name, f"{store} at d={d}: numerator exceeds denominator")
            rows.append([store] + [format_percent(f) for f in table.row(store)])
    title = (
        f"Percent of items changed by {focal} that each store re-priced, by day: "
        f"{_CATEGORY_TITLES.get(category, category)}"
    )
    notes = "" if table is not None else "absent"
    return Table(name, title, header, rows, notes)


def _table5_counts(category: str, table: LagTable | None) -> Table:
    header = ["store_id", "day", "numerator", "denominator", "zero_support"]
    rows = []
    if table is not None:
        for store in table.stores:
            for d in table.days:
                rows.append(
                    [
                        store,
                        format_day(d),
                        str(table.numerator(store, d)),
                        str(table.denominator(store, d)),
                        "1" if table.zero_support(store, d) else "0",
                    ]
                )
    title = f"Raw lag counts: {_CATEGORY_TITLES.get(category, category)}"
    return Table(f"table5_{category}_all_counts", title, header, rows)


def build_tables(bundle: ReportBundle) -> list[Table]:
    tables = [_table1(bundle), _table2(bundle)]
    categories = sorted(
        {c for c, _ in bundle.histograms} | set(bundle.lag_tables),
        key=lambda c: (LABELS.index(c) if c in LABELS else len(LABELS), c),
    )
    for (category, n) in sorted(
        bundle.histograms, key=lambda key: (categories.index(key[0]), key[1])
    ):
        tables.append(_table3(category, n, bundle.histograms[(category, n)]))
    tables.append(_table4(bundle))
    for category in categories:
        if category in bundle.lag_tables:
            lag = bundle.lag_tables[category]
            tables.append(_table5(category, lag, bundle.k))
            tables.append(_table5_counts(category, lag))
    return tables


# -- output formats ------------------------------------------------------------


def _csv_bytes(table: Table) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.header)
    writer.writerows(table.rows)
    return buf.getvalue().encode("utf-8")


def _md_cell(text: str) -> str:
    return text.replace("|", "\\|")


def _markdown_bytes(table: Table) -> bytes:
    lines = [f"### {table.title}", ""]
    if table.notes:
        lines += [f"_{table.notes}_", ""]
    lines.append("| " + " | ".join(_md_cell(h) for h in table.header) + " |")
    lines.append("| " + " | ".join(["---"] + ["---:"] * (len(table.header) - 1)) + " |")
    for row in table.rows:
        cells = list(row)
        if table.name.startswith("table5_") and not table.name.endswith("_counts"):
            cells = cells[:1] + [c + "%" for c in cells[1:]]
        lines.append("| " + " | ".join(_md_cell(c) for c in cells) + " |")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _encode(table: Table, fmt: str) -> bytes:
    if fmt == "csv":
        return _csv_bytes(table)
    if fmt == "markdown":
        return _markdown_bytes(table)
    raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")


def render_files(bundle: ReportBundle, fmt: str = "csv") -> dict[str, bytes]:
    """One document per table, keyed by file name."""
    ext = EXTENSIONS.get(fmt)
    if ext is None:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    out = {f"{t.name}.{ext}": _encode(t, fmt) for t in build_tables(bundle)}
    if fmt == "markdown":
        # raw counts are a machine-readable companion, always CSV
        for t in build_tables(bundle):
            if t.name.endswith("_counts"):
                del out[f"{t.name}.md"]
                out[f"{t.name}.csv"] = _csv_bytes(t)
    return out


def render(bundle: ReportBundle, fmt: str = "csv") -> bytes:
    """All tables in a single document."""
    tables = build_tables(bundle)
    chunks: list[bytes] = []
    if fmt == "markdown":
        chunks.append(b"# Price leadership report\n\n")
        for key in sorted(bundle.metadata):
            chunks.append(f"- {key}: {_meta_text(bundle.metadata[key])}\n".encode("utf-8"))
        if bundle.metadata:
            chunks.append(b"\n")
        for t in tables:
            chunks.append(_markdown_bytes(t) + b"\n")
    else:
        for i, t in enumerate(tables):
            if i:
                chunks.append(b"\n")
            chunks.append(f"# {t.name}\n".encode("utf-8") + _encode(t, fmt))
    return b"".join(chunks)


def _meta_text(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(map(str, value)) or "none"
    return str(value)


def parse_lag_csv(data: bytes) -> dict[str, dict[int, Fraction]]:
    """Read a rendered lag table back to fractions (display precision)."""
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader)
    days = [int(h) for h in header[1:]]
    return {
        row[0]: {d: Fraction(int(cell), 100) for d, cell in zip(days, row[1:])}
        for row in reader
    }


# -- bundle serialization ------------------------------------------------------


def bundle_to_json(bundle: ReportBundle) -> bytes:
    counts = bundle.change_counts
    data: dict[str, Any] = {
        "windows": list(bundle.windows),
        "k": bundle.k,
        "metadata": bundle.metadata,
        "change_counts": None
        if counts is None
        else {
            "stores": list(counts.stores),
            "categories": list(counts.categories),
            "counts": [[s, c, v] for (s, c), v in sorted(counts.counts.items())],
            "totals": dict(counts.totals),
        },
        "cluster_stats": {
            str(n): [s.total_clusters, s.total_changes, s.total_length_days]
            for n, s in sorted(bundle.cluster_stats.items())
        },
        "histograms": [
            {
                "category": c,
                "window": n,
                "total_changes": h.total_changes,
                "buckets": {b: [v.total_changes, v.changes_up, v.changes_down] for b, v in h.buckets.items()},
            }
            for (c, n), h in sorted(bundle.histograms.items())
        ],
        "initiators": {
            str(n): [[s.store_id, s.single_count, s.first_of_multiple_count] for s in rows]
            for n, rows in sorted(bundle.initiators.items())
        },
        "lag_tables": {
            c: None
            if t is None
            else {
                "focal_store": t.focal_store,
                "k": t.k,
                "stores": list(t.stores),
                "cells": [
                    [s, d, t.numerator(s, d), t.denominator(s, d)] for s in t.stores for d in t.days
                ],
            }
            for c, t in sorted(bundle.lag_tables.items())
        },
    }
    return (json.dumps(data, indent=1, sort_keys=True) + "\n").encode("utf-8")


def bundle_from_json(raw: bytes) -> ReportBundle:
    data = json.loads(raw)
    cc = data["change_counts"]
    counts = None
    if cc is not None:
        counts = ChangeCountTable(
            tuple(cc["stores"]),
            tuple(cc["categories"]),
            {(s, c): v for s, c, v in cc["counts"]},
            dict(cc["totals"]),
        )
    lag_tables: dict[str, LagTable | None] = {}
    for c, t in data["lag_tables"].items():
        if t is None:
            lag_tables[c] = None
            continue
        num = {(s, d): n for s, d, n, _ in t["cells"] if n}
        den = {(s, d): m for s, d, _, m in t["cells"] if m}
        lag_tables[c] = LagTable(t["focal_store"], t["k"], tuple(t["stores"]), num, den, c)
    return ReportBundle(
        change_counts=counts,
        cluster_stats={int(n): ClusterStats(*v) for n, v in data["cluster_stats"].items()},
        histograms={
            (h["category"], h["window"]): StoreCountHistogram(
                {b: BucketCounts(*v) for b, v in h["buckets"].items()}, h["total_changes"]
            )
            for h in data["histograms"]
        },
        initiators={
            int(n): [InitiatorStats(s, int(n), a, b) for s, a, b in rows]
            for n, rows in data["initiators"].items()
        },
        lag_tables=lag_tables,
        windows=tuple(data["windows"]),
        k=data["k"],
        metadata=data["metadata"],
    )
