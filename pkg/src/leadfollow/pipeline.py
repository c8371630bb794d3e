"""End-to-end analysis: panel and categories in, report bundle out."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from leadfollow import __version__
from leadfollow.clusters import (
    Cluster,
    cluster_changelog,
    cluster_summary,
    clusters_to_jsonl,
    store_count_histogram,
)
from leadfollow.leadership import ScreenHit, classify_initiators, follow_screen, lag_distribution
from leadfollow.panel import Category, PanelError, PricePanel, extract_changes, per_store_change_counts, stratify
from leadfollow.report import ReportBundle, render_files, bundle_to_json, format_percent


@dataclass
class Analysis:
    bundle: ReportBundle
    clusters: dict[int, list[Cluster]] = field(default_factory=dict)
    screens: dict[str, list[ScreenHit]] = field(default_factory=dict)


def analyze(
    panel: PricePanel,
    categories: Iterable[Category],
    *,
    windows: Sequence[int] = (3, 7),
    focal: str | None = None,
    k: int = 3,
    threshold: float = 0.5,
) -> Analysis:
    """Run extraction, stratification, clustering, initiators and lag tables.

    Raises ``PanelError`` for items without a category or an unknown focal
    store.  The focal store's lag table for a category is marked absent when
    it made no changes there.
    """
    windows = tuple(sorted(set(windows)))
    if not windows or any(n < 1 for n in windows):
        raise ValueError("window sizes must be positive")
    if k < 1:
        raise ValueError("k must be at least 1")
    changelog = extract_changes(panel)
    strata = stratify(changelog, categories)
    bundle = ReportBundle(windows=windows, k=k)
    bundle.change_counts = per_store_change_counts(strata, stores=panel.stores)

    result = Analysis(bundle)
    for n in windows:
        pooled = cluster_changelog(changelog, n)
        result.clusters[n] = pooled
        bundle.cluster_stats[n] = cluster_summary(pooled)
        bundle.initiators[n] = classify_initiators(pooled, stores=panel.stores, window=n)
        for label, log in strata.items():
            bundle.histograms[(label, n)] = store_count_histogram(cluster_changelog(log, n))

    absent = []
    if focal is not None and len(panel):
        if focal not in panel.stores:
            raise PanelError(f"unknown focal store {focal!r}")
        for label, log in strata.items():
            if focal in log.stores:
                table = lag_distribution(log, focal, k, panel, category=label)
                bundle.lag_tables[label] = table
                result.screens[label] = follow_screen(table, threshold)
            else:
                bundle.lag_tables[label] = None
                result.screens[label] = []
                absent.append(f"table5_{label}")
    elif focal is not None:
        for label in strata:
            bundle.lag_tables[label] = None
            result.screens[label] = []
            absent.append(f"table5_{label}")
    else:
        absent.append("table5")

    date_range = panel.date_range
    bundle.metadata = {
        "panel_digest": panel.digest(),
        "date_from": date_range[0].isoformat() if date_range else "",
        "date_to": date_range[1].isoformat() if date_range else "",
        "toolkit_version": __version__,
        "focal_store": focal or "",
        "k": k,
        "windows": list(windows),
        "screen_threshold": str(threshold),
        "absent": absent,
    }
    return result


def screen_csv(hits: Sequence[ScreenHit]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["store_id", "peak_day", "peak_percent", "peak_fraction"])
    for h in hits:
        writer.writerow(
            [h.store_id, h.peak_day, format_percent(h.peak_fraction),
             f"{h.peak_fraction.numerator}/{h.peak_fraction.denominator}"]
        )
    return buf.getvalue().encode("utf-8")


def output_files(result: Analysis, fmt: str = "csv") -> dict[str, bytes]:
    """Every file ``analyze`` writes, keyed by relative path."""
    files = render_files(result.bundle, fmt)
    for n, clusters in sorted(result.clusters.items()):
        files[f"clusters_{n}.jsonl"] = clusters_to_jsonl(clusters)
    for label, hits in sorted(result.screens.items()):
        files[f"screen_{label}.csv"] = screen_csv(hits)
    files["bundle.json"] = bundle_to_json(result.bundle)
    files["report_meta.json"] = (
        json.dumps(result.bundle.metadata, indent=1, sort_keys=True) + "\n"
    ).encode("utf-8")
    return files


def write_tree(files: dict[str, bytes], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, data in sorted(files.items()):
        (out / name).write_bytes(data)
