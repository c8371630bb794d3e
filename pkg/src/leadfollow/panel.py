"""Price-observation panels, category records and price-change extraction.

A price change is a difference in one store's listed price for one item
between two consecutive *observed* dates.  Days without an observation are
skipped rather than treated as changes, and the change is dated at the later
observation.  Prices are integer cents so equality is exact.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import BinaryIO, Iterable, Iterator, Mapping

OBSERVATION_HEADER = ("date", "store_id", "item_id", "price_cents")
CATEGORY_HEADER = ("item_id", "label")

RANDOM = "random"
NYT = "nyt_bestseller"
COMPUTER = "computer_bestseller"
LABELS = (RANDOM, NYT, COMPUTER)


class PanelError(ValueError):
    """Raised for malformed or inconsistent panel input."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


def parse_day(text: str) -> date:
    """Parse a strict ``YYYY-MM-DD`` day."""
    if len(text) != 10 or text[4] != "-" or text[7] != "-":
        raise ValueError(f"invalid date {text!r}, expected YYYY-MM-DD")
    return date.fromisoformat(text)


def is_isbn(text: str) -> bool:
    """True for a checksum-valid ISBN-10 or ISBN-13 (no hyphens)."""
    if len(text) == 13 and text.isdigit():
        total = sum(int(c) * (1 if i % 2 == 0 else 3) for i, c in enumerate(text))
        return total % 10 == 0
    if len(text) == 10 and text[:9].isdigit() and (text[9].isdigit() or text[9] in "xX"):
        digits = [int(c) for c in text[:9]] + [10 if text[9] in "xX" else int(text[9])]
        return sum((10 - i) * d for i, d in enumerate(digits)) % 11 == 0
    return False


def isbn13_check_digit(first12: str) -> str:
    total = sum(int(c) * (1 if i % 2 == 0 else 3) for i, c in enumerate(first12))
    return str((10 - total % 10) % 10)


@dataclass(frozen=True, order=True)
class PriceObservation:
    date: date
    store_id: str
    item_id: str
    price: int

    def __post_init__(self) -> None:
        if self.price < 0:
            raise PanelError(f"negative price {self.price} for {self.key}")

    @property
    def key(self) -> tuple[str, str, date]:
        return (self.store_id, self.item_id, self.date)


class PricePanel:
    """Sparse panel of once-daily prices keyed by ``(store_id, item_id, date)``.

    Missing triples are simply absent.  Exact duplicate observations collapse
    to one; a second, different price for the same key raises ``PanelError``.
    """

    def __init__(self, observations: Iterable[PriceObservation] = ()):
        prices: dict[tuple[str, str, date], int] = {}
        for obs in observations:
            previous = prices.get(obs.key)
            if previous is not None and previous != obs.price:
                raise PanelError(_conflict_message(obs.key, previous, obs.price))
            prices[obs.key] = obs.price
        self._prices = prices
        self.stores = frozenset(k[0] for k in prices)
        self.items = frozenset(k[1] for k in prices)
        days = [k[2] for k in prices]
        self.date_range: tuple[date, date] | None = (min(days), max(days)) if days else None

    def __len__(self) -> int:
        return len(self._prices)

    def __iter__(self) -> Iterator[PriceObservation]:
        """Observations in canonical order: date, then store, then item."""
        for (store, item, day) in sorted(self._prices, key=lambda k: (k[2], k[0], k[1])):
            yield PriceObservation(day, store, item, self._prices[(store, item, day)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PricePanel):
            return NotImplemented
        return self._prices == other._prices

    def __contains__(self, key: object) -> bool:
        return key in self._prices

    def price(self, store_id: str, item_id: str, day: date) -> int | None:
        return self._prices.get((store_id, item_id, day))

    def series(self) -> dict[tuple[str, str], list[tuple[date, int]]]:
        """Observed ``(date, price)`` pairs per ``(store, item)``, date-sorted."""
        out: dict[tuple[str, str], list[tuple[date, int]]] = defaultdict(list)
        for (store, item, day), price in self._prices.items():
            out[(store, item)].append((day, price))
        for points in out.values():
            points.sort()
        return dict(out)

    def carried(self) -> dict[str, frozenset[str]]:
        """Item -> stores with at least one observation of it."""
        out: dict[str, set[str]] = defaultdict(set)
        for store, item, _ in self._prices:
            out[item].add(store)
        return {item: frozenset(stores) for item, stores in out.items()}

    @property
    def n_days(self) -> int:
        if self.date_range is None:
            return 0
        return (self.date_range[1] - self.date_range[0]).days + 1

    def summary(self) -> dict[str, int]:
        return {
            "stores": len(self.stores),
            "items": len(self.items),
            "days": self.n_days,
            "observations": len(self),
        }

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(OBSERVATION_HEADER)
        for obs in self:
            writer.writerow((obs.date.isoformat(), obs.store_id, obs.item_id, obs.price))
        return buf.getvalue().encode("utf-8")

    def digest(self) -> str:
        """SHA-256 of the canonical CSV rendering."""
        return hashlib.sha256(self.to_csv()).hexdigest()


def _conflict_message(key: tuple[str, str, date], a: int, b: int) -> str:
    store, item, day = key
    return (
        f"conflicting prices for (store={store}, item={item}, date={day.isoformat()}): "
        f"{a} vs {b}"
    )


def _read_text(source: bytes | str | BinaryIO) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    else:
        raw = source.read()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise PanelError(f"input is not valid UTF-8 ({exc})") from None


def parse_observations(
    source: bytes | str | BinaryIO,
    *,
    strict_isbn: bool = False,
    source_name: str | None = None,
) -> list[PriceObservation]:
    """Parse observation CSV rows without collapsing duplicates."""
    text = _read_text(source)
    if not text:
        return []
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        return []
    if tuple(header) != OBSERVATION_HEADER:
        raise PanelError(
            f"bad header {','.join(header)!r}, expected {','.join(OBSERVATION_HEADER)!r}",
            line=1,
            source=source_name,
        )
    rows: list[PriceObservation] = []
    for row in reader:
        line = reader.line_num
        if len(row) != 4:
            raise PanelError(f"expected 4 fields, got {len(row)}", line, source_name)
        day_text, store, item, price_text = row
        try:
            day = parse_day(day_text)
        except ValueError as exc:
            raise PanelError(str(exc), line, source_name) from None
        if not store or not item:
            raise PanelError("empty store_id or item_id", line, source_name)
        if strict_isbn and not is_isbn(item):
            raise PanelError(f"item_id {item!r} is not a valid ISBN", line, source_name)
        if not price_text.isascii() or not price_text.isdigit():
            raise PanelError(
                f"price_cents {price_text!r} is not a non-negative integer", line, source_name
            )
        rows.append(PriceObservation(day, store, item, int(price_text)))
    return rows


def ingest_observations(
    source: bytes | str | BinaryIO,
    *,
    strict_isbn: bool = False,
    source_name: str | None = None,
) -> PricePanel:
    """Read the observation CSV format into a validated panel.

    Raises ``PanelError`` carrying the line number for malformed rows, and
    naming the key for conflicting same-day prices.
    """
    rows = parse_observations(source, strict_isbn=strict_isbn, source_name=source_name)
    seen: dict[tuple[str, str, date], int] = {}
    for obs in rows:
        previous = seen.setdefault(obs.key, obs.price)
        if previous != obs.price:
            raise PanelError(_conflict_message(obs.key, previous, obs.price), source=source_name)
    return PricePanel(rows)


# -- categories --------------------------------------------------------------


@dataclass(frozen=True, order=True)
class ListInterval:
    list_name: str
    start: date
    end: date


@dataclass(frozen=True)
class Category:
    """Analysis category of one item plus its bestseller-list calendar.

    The label is permanent: an item that drops off a list keeps its bestseller
    label, and the intervals record when it was actually listed.
    """

    item_id: str
    label: str
    intervals: tuple[ListInterval, ...] = ()

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise PanelError(f"item {self.item_id}: unknown label {self.label!r}")
        object.__setattr__(self, "intervals", tuple(sorted(self.intervals)))
        last_end: dict[str, date] = {}
        for iv in self.intervals:
            if iv.start > iv.end:
                raise PanelError(
                    f"item {self.item_id}: interval on {iv.list_name} starts after it ends"
                )
            prev = last_end.get(iv.list_name)
            if prev is not None and iv.start <= prev:
                raise PanelError(f"item {self.item_id}: overlapping intervals on {iv.list_name}")
            last_end[iv.list_name] = iv.end

    def listed_on(self, day: date) -> bool:
        return any(iv.start <= day <= iv.end for iv in self.intervals)

    def is_former_on(self, day: date) -> bool:
        """Listed at some point before ``day`` but not on it."""
        return not self.listed_on(day) and any(iv.end < day for iv in self.intervals)

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "label": self.label,
            "intervals": [
                {
                    "list_name": iv.list_name,
                    "start_date": iv.start.isoformat(),
                    "end_date": iv.end.isoformat(),
                }
                for iv in self.intervals
            ],
        }


def read_categories(source: bytes | str | BinaryIO, *, source_name: str | None = None) -> list[Category]:
    """Read category records from the CSV or JSON-lines format (auto-detected)."""
    text = _read_text(source)
    if text.lstrip().startswith("{"):
        return _read_categories_jsonl(text, source_name)
    return _read_categories_csv(text, source_name)


def _read_categories_csv(text: str, source_name: str | None) -> list[Category]:
    if not text:
        return []
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        return []
    if tuple(header[:2]) != CATEGORY_HEADER:
        raise PanelError("category header must start with item_id,label", 1, source_name)
    out = []
    for row in reader:
        line = reader.line_num
        if len(row) < 2 or (len(row) - 2) % 3 != 0:
            raise PanelError(
                "expected item_id,label followed by list_name,start_date,end_date triples",
                line,
                source_name,
            )
        try:
            intervals = tuple(
                ListInterval(row[i], parse_day(row[i + 1]), parse_day(row[i + 2]))
                for i in range(2, len(row), 3)
            )
            out.append(Category(row[0], row[1], intervals))
        except (ValueError, PanelError) as exc:
            raise PanelError(str(exc), line, source_name) from None
    return out


def _read_categories_jsonl(text: str, source_name: str | None) -> list[Category]:
    out = []
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
            intervals = tuple(
                ListInterval(iv["list_name"], parse_day(iv["start_date"]), parse_day(iv["end_date"]))
                for iv in rec.get("intervals", ())
            )
            out.append(Category(rec["item_id"], rec["label"], intervals))
        except (ValueError, KeyError, TypeError, PanelError) as exc:
            raise PanelError(f"bad category record ({exc})", line, source_name) from None
    return out


def write_categories_csv(categories: Iterable[Category]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CATEGORY_HEADER)
    for cat in sorted(categories, key=lambda c: c.item_id):
        row = [cat.item_id, cat.label]
        for iv in cat.intervals:
            row += [iv.list_name, iv.start.isoformat(), iv.end.isoformat()]
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def write_categories_jsonl(categories: Iterable[Category]) -> bytes:
    lines = [
        json.dumps(cat.to_record(), separators=(",", ":"))
        for cat in sorted(categories, key=lambda c: c.item_id)
    ]
    return "".join(line + "\n" for line in lines).encode("utf-8")


# -- price changes -----------------------------------------------------------


@dataclass(frozen=True)
class PriceChange:
    store_id: str
    item_id: str
    date: date
    prev_date: date
    prev_price: int
    new_price: int

    def __post_init__(self) -> None:
        if self.new_price == self.prev_price:
            raise ValueError("a price change needs differing prices")
        if self.prev_date >= self.date:
            raise ValueError("prev_date must precede date")

    @property
    def direction(self) -> str:
        return "up" if self.new_price > self.prev_price else "down"

    def sort_key(self) -> tuple[str, date, str]:
        return (self.item_id, self.date, self.store_id)

    def to_record(self) -> dict:
        return {
            "store_id": self.store_id,
            "date": self.date.isoformat(),
            "prev_date": self.prev_date.isoformat(),
            "prev_price": self.prev_price,
            "new_price": self.new_price,
            "direction": self.direction,
        }


@dataclass(frozen=True)
class ChangeLog:
    """Price changes in strictly increasing ``(item_id, date, store_id)`` order."""

    changes: tuple[PriceChange, ...] = ()

    def __post_init__(self) -> None:
        keys = [c.sort_key() for c in self.changes]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ValueError("ChangeLog must be strictly ordered by (item_id, date, store_id)")

    @classmethod
    def from_changes(cls, changes: Iterable[PriceChange]) -> "ChangeLog":
        return cls(tuple(sorted(changes, key=PriceChange.sort_key)))

    def __len__(self) -> int:
        return len(self.changes)

    def __iter__(self) -> Iterator[PriceChange]:
        return iter(self.changes)

    def by_item(self) -> dict[str, tuple[PriceChange, ...]]:
        out: dict[str, list[PriceChange]] = {}
        for c in self.changes:
            out.setdefault(c.item_id, []).append(c)
        return {item: tuple(group) for item, group in out.items()}

    @property
    def stores(self) -> frozenset[str]:
        return frozenset(c.store_id for c in self.changes)

    @property
    def items(self) -> frozenset[str]:
        return frozenset(c.item_id for c in self.changes)


def extract_changes(panel: PricePanel) -> ChangeLog:
    changes = []
    for (store, item), points in panel.series().items():
        for (prev_day, prev_price), (day, price) in zip(points, points[1:]):
            if price != prev_price:
                changes.append(PriceChange(store, item, day, prev_day, prev_price, price))
    return ChangeLog.from_changes(changes)


def category_index(categories: Iterable[Category]) -> dict[str, Category]:
    """Map item -> category; an item given two different records is an error."""
    index: dict[str, Category] = {}
    for cat in categories:
        prev = index.get(cat.item_id)
        if prev is not None and prev != cat:
            if prev.label != cat.label:
                raise PanelError(
                    f"item {cat.item_id} has two labels: {prev.label}, {cat.label}"
                )
            raise PanelError(f"item {cat.item_id} has two conflicting category records")
        index[cat.item_id] = cat
    return index


def stratify(changelog: ChangeLog, categories: Iterable[Category]) -> dict[str, ChangeLog]:
    """Partition changes by item category; every label is present in the result."""
    index = category_index(categories)
    missing = sorted(changelog.items - index.keys())
    if missing:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise PanelError(f"{len(missing)} item(s) have no category: {shown}")
    groups: dict[str, list[PriceChange]] = {label: [] for label in LABELS}
    for c in changelog:
        groups[index[c.item_id].label].append(c)
    # input order is already canonical, so each group stays sorted
    return {label: ChangeLog(tuple(group)) for label, group in groups.items()}


@dataclass(frozen=True)
class ChangeCountTable:
    """Price-change counts per store and category, with a totals row."""

    stores: tuple[str, ...]
    categories: tuple[str, ...]
    counts: Mapping[tuple[str, str], int]
    totals: Mapping[str, int] = field(default_factory=dict)

    def count(self, store: str, category: str) -> int:
        return self.counts.get((store, category), 0)

    def column_sum(self, category: str) -> int:
        return sum(self.count(s, category) for s in self.stores)

    def mismatched_totals(self) -> list[str]:
        return [c for c in self.categories if self.totals.get(c, 0) != self.column_sum(c)]


def per_store_change_counts(
    strata: Mapping[str, ChangeLog], stores: Iterable[str] = ()
) -> ChangeCountTable:
    """Count changes per store per category.

    ``stores`` adds rows for stores with no changes, so zero rows are shown.
    """
    counts: dict[tuple[str, str], int] = defaultdict(int)
    all_stores = set(stores)
    for label, log in strata.items():
        for c in log:
            counts[(c.store_id, label)] += 1
            all_stores.add(c.store_id)
    categories = tuple(label for label in LABELS if label in strata) + tuple(
        sorted(label for label in strata if label not in LABELS)
    )
    table = ChangeCountTable(tuple(sorted(all_stores)), categories, dict(counts))
    totals = {c: table.column_sum(c) for c in categories}
    return ChangeCountTable(table.stores, categories, dict(counts), totals)
