"""Synthetic price panels with planted store behaviors.

Three behaviors are available:

* ``independent`` stores reprice each carried item with a daily hazard.
* ``list_responder`` stores switch between an on-list and off-list price
  some days after an item enters or leaves a bestseller list.
* ``follower`` stores copy a target store's new price after a random lag.

Every random draw comes from a stream keyed by ``(seed, purpose, store,
item)``, so adding a store leaves all other stores' draws untouched.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Any, Mapping, Sequence

from leadfollow.panel import (
    COMPUTER,
    NYT,
    RANDOM,
    Category,
    ListInterval,
    PriceObservation,
    PricePanel,
    isbn13_check_digit,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("independent", "list_responder", "follower")
LIST_NAMES = {NYT: "nyt", COMPUTER: "computer"}
_ITEM_PREFIX = {RANDOM: "9780", NYT: "9781", COMPUTER: "9782"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def _check_prob(name: str, value: float, upper_open: bool = False) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    if not 0.0 <= value <= 1.0 or (upper_open and value == 1.0):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise ConfigError(name, f"must lie in {bound}, got {value}")
    return value


def _check_lags(name: str, lags: Any) -> tuple[float, ...]:
    if not isinstance(lags, (list, tuple)) or not lags:
        raise ConfigError(name, "expected a non-empty list of lag probabilities")
    probs = tuple(_check_prob(f"{name}[{i}]", p) for i, p in enumerate(lags))
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError(name, f"lag probabilities must sum to 1, got {sum(probs)}")
    return probs


@dataclass(frozen=True)
class StoreBehavior:
    """Behavior of one simulated store.

    ``lag`` is a probability vector over 0..L days (used by responders and
    followers).  ``magnitude_pct`` bounds an independent change as a
    percentage of the item's list price.
    """

    kind: str
    hazard: float = 0.0
    magnitude_pct: tuple[float, float] = (1.0, 10.0)
    lag: tuple[float, ...] = (1.0,)
    discount_pct: float = 0.0
    markup_pct: float = 0.0
    target: str | None = None
    follow_probability: float = 0.0
    undercut_cents: int = 0

    def validate(self, where: str, store_id: str) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"{where}.kind", f"unknown kind {self.kind!r}, expected one of {KINDS}")
        _check_prob(f"{where}.hazard", self.hazard)
        _check_lags(f"{where}.lag", self.lag)
        lo, hi = self.magnitude_pct
        if not 0 <= lo <= hi:
            raise ConfigError(f"{where}.magnitude_pct", "need 0 <= min <= max")
        if self.kind == "list_responder":
            if not 0 <= self.discount_pct < 100 or self.markup_pct < 0:
                raise ConfigError(f"{where}.discount_pct", "discount must be in [0, 100), markup >= 0")
            if self.discount_pct == 0 and self.markup_pct == 0:
                raise ConfigError(f"{where}.discount_pct", "a responder needs a discount or markup")
        if self.kind == "follower":
            if self.target is None:
                raise ConfigError(f"{where}.target", "follower needs a target store")
            if self.target == store_id:
                raise ConfigError(f"{where}.target", "a store cannot follow itself")
            _check_prob(f"{where}.follow_probability", self.follow_probability)
            if self.undercut_cents < 0:
                raise ConfigError(f"{where}.undercut_cents", "must be >= 0")

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"kind": self.kind}
        if self.kind == "independent":
            rec.update(hazard=self.hazard, magnitude_pct=list(self.magnitude_pct))
        elif self.kind == "list_responder":
            rec.update(lag=list(self.lag), discount_pct=self.discount_pct, markup_pct=self.markup_pct)
        else:
            rec.update(
                target=self.target,
                follow_probability=self.follow_probability,
                lag=list(self.lag),
                undercut_cents=self.undercut_cents,
            )
        return rec


@dataclass(frozen=True)
class SimConfig:
    stores: Mapping[str, StoreBehavior]
    items: Mapping[str, int] = field(default_factory=lambda: {RANDOM: 60})
    horizon_days: int = 120
    start_date: date = date(2000, 1, 3)
    list_price_cents: tuple[int, int] = (1000, 6000)
    list_size: int = 0
    turnover: float = 0.0
    missingness: float = 0.0
    carry_rate: float = 1.0

    def validate(self) -> "SimConfig":
        if not isinstance(self.horizon_days, int) or self.horizon_days < 1:
            raise ConfigError("horizon_days", "must be an integer >= 1")
        if not self.stores:
            raise ConfigError("stores", "at least one store is required")
        for label, count in self.items.items():
            if label not in _ITEM_PREFIX:
                raise ConfigError(f"items.{label}", "unknown category")
            if not isinstance(count, int) or count < 0:
                raise ConfigError(f"items.{label}", "must be a non-negative integer")
        if sum(self.items.values()) < 1:
            raise ConfigError("items", "at least one item is required")
        lo, hi = self.list_price_cents
        if not 1 <= lo <= hi:
            raise ConfigError("list_price_cents", "need 1 <= min <= max")
        if not isinstance(self.list_size, int) or self.list_size < 0:
            raise ConfigError("bestseller.list_size", "must be a non-negative integer")
        _check_prob("bestseller.turnover", self.turnover)
        _check_prob("missingness", self.missingness, upper_open=True)
        _check_prob("carry_rate", self.carry_rate)
        for i, (store_id, behavior) in enumerate(self.stores.items()):
            behavior.validate(f"stores[{i}]", store_id)
            if behavior.kind == "follower" and behavior.target not in self.stores:
                raise ConfigError(f"stores[{i}].target", f"unknown target store {behavior.target!r}")
        _follow_order(self.stores)
        return self

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SimConfig":
        known = {"horizon_days", "start_date", "list_price_cents", "missingness", "carry_rate",
                 "items", "bestseller", "stores"}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown setting")
        stores: dict[str, StoreBehavior] = {}
        for i, raw in enumerate(data.get("stores", [])):
            where = f"stores[{i}]"
            if not isinstance(raw, Mapping) or "id" not in raw:
                raise ConfigError(f"{where}.id", "each store needs an id")
            raw = dict(raw)
            store_id = str(raw.pop("id"))
            if store_id in stores:
                raise ConfigError(f"{where}.id", f"duplicate store id {store_id!r}")
            if "magnitude_pct" in raw:
                raw["magnitude_pct"] = tuple(raw["magnitude_pct"])
            if "lag" in raw:
                raw["lag"] = tuple(raw["lag"])
            try:
                stores[store_id] = StoreBehavior(**raw)
            except TypeError as exc:
                raise ConfigError(where, str(exc)) from None
        bestseller = data.get("bestseller", {})
        for key in bestseller:
            if key not in ("list_size", "turnover"):
                raise ConfigError(f"bestseller.{key}", "unknown setting")
        kwargs: dict[str, Any] = {"stores": stores}
        if "items" in data:
            kwargs["items"] = dict(data["items"])
        for key in ("horizon_days", "missingness", "carry_rate"):
            if key in data:
                kwargs[key] = data[key]
        if "start_date" in data:
            start = data["start_date"]
            try:
                kwargs["start_date"] = start if isinstance(start, date) else date.fromisoformat(start)
            except (TypeError, ValueError):
                raise ConfigError("start_date", f"invalid date {start!r}") from None
        if "list_price_cents" in data:
            kwargs["list_price_cents"] = tuple(data["list_price_cents"])
        if "list_size" in bestseller:
            kwargs["list_size"] = bestseller["list_size"]
        if "turnover" in bestseller:
            kwargs["turnover"] = bestseller["turnover"]
        return cls(**kwargs).validate()

    def to_record(self) -> dict[str, Any]:
        return {
            "horizon_days": self.horizon_days,
            "start_date": self.start_date.isoformat(),
            "list_price_cents": list(self.list_price_cents),
            "missingness": self.missingness,
            "carry_rate": self.carry_rate,
            "items": dict(self.items),
            "bestseller": {"list_size": self.list_size, "turnover": self.turnover},
            "stores": [{"id": s, **b.to_record()} for s, b in self.stores.items()],
        }


def load_sim_config(path: str) -> SimConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"not valid TOML ({exc})") from None
    return SimConfig.from_mapping(data)


def _follow_order(stores: Mapping[str, StoreBehavior]) -> list[str]:
    """Stores ordered so every follower comes after its target."""
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(store: str, chain: tuple[str, ...]) -> None:
        if state.get(store) == 2:
            return
        if state.get(store) == 1:
            raise ConfigError("stores", f"follower cycle: {' -> '.join(chain + (store,))}")
        state[store] = 1
        behavior = stores[store]
        if behavior.kind == "follower" and behavior.target is not None:
            visit(behavior.target, chain + (store,))
        state[store] = 2
        order.append(store)

    for store in sorted(stores):
        visit(store, ())
    return order


def _rng(seed: int, *parts: object) -> random.Random:
    key = "\x1f".join([str(seed), *map(str, parts)]).encode("utf-8")
    return random.Random(int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))


def item_ids(config: SimConfig) -> dict[str, list[str]]:
    """Deterministic ISBN-13 item ids per configured category pool."""
    out = {}
    for label, count in config.items.items():
        prefix = _ITEM_PREFIX[label]
        out[label] = [
            prefix + f"{i:08d}" + isbn13_check_digit(prefix + f"{i:08d}") for i in range(count)
        ]
    return out


def make_bestseller_calendar(config: SimConfig, seed: int) -> list[Category]:
    """Weekly bestseller-list membership, emitted as category records.

    Items from a bestseller pool that reach their list keep the bestseller
    label for good; pool items never listed within the horizon are random.
    """
    config.validate()
    pools = item_ids(config)
    last = config.horizon_days - 1
    categories = [Category(item, RANDOM) for item in pools.get(RANDOM, [])]
    for label, list_name in LIST_NAMES.items():
        pool = pools.get(label, [])
        rng = _rng(seed, "calendar", list_name)
        spells: dict[str, list[list[int]]] = {item: [] for item in pool}
        listed = sorted(rng.sample(pool, min(config.list_size, len(pool))))
        for item in listed:
            spells[item].append([0, last])
        for week_start in range(7, config.horizon_days, 7):
            leaving = [item for item in listed if rng.random() < config.turnover]
            for item in leaving:
                spells[item][-1][1] = week_start - 1
            staying = [item for item in listed if item not in leaving]
            candidates = sorted(set(pool) - set(listed))
            entering = sorted(rng.sample(candidates, min(len(leaving), len(candidates))))
            for item in entering:
                spells[item].append([week_start, last])
            listed = sorted(staying + entering)
        for item in pool:
            intervals = tuple(
                ListInterval(
                    list_name,
                    config.start_date + timedelta(days=a),
                    config.start_date + timedelta(days=b),
                )
                for a, b in spells[item]
            )
            categories.append(Category(item, label if intervals else RANDOM, intervals))
    return sorted(categories, key=lambda c: c.item_id)


@dataclass(frozen=True)
class GroundTruth:
    seed: int
    config: SimConfig
    categories: tuple[Category, ...]

    @property
    def followers(self) -> dict[str, tuple[str, tuple[float, ...]]]:
        return {
            s: (b.target, b.lag) for s, b in self.config.stores.items() if b.kind == "follower"
        }

    def kind_of(self, store: str) -> str:
        return self.config.stores[store].kind

    def to_jsonl(self) -> bytes:
        cfg = self.config
        records: list[dict[str, Any]] = [
            {
                "record": "meta",
                "seed": self.seed,
                "horizon_days": cfg.horizon_days,
                "start_date": cfg.start_date.isoformat(),
                "missingness": cfg.missingness,
                "carry_rate": cfg.carry_rate,
            }
        ]
        for store in sorted(cfg.stores):
            records.append({"record": "store", "store_id": store, **cfg.stores[store].to_record()})
        for store, (target, lags) in sorted(self.followers.items()):
            records.append(
                {"record": "follower", "store_id": store, "target": target, "lag_distribution": list(lags)}
            )
        for cat in self.categories:
            records.append({"record": "category", **cat.to_record()})
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records).encode("utf-8")


def _draw_lag(rng: random.Random, lags: Sequence[float]) -> int:
    return rng.choices(range(len(lags)), weights=lags)[0]


def _apply_schedule(
    path: list[int], schedule: list[tuple[int, int, int]], horizon: int
) -> None:
    """Apply ``(effective_day, source_day, price)`` updates in order."""
    for day, _, price in sorted(schedule):
        if day < horizon:
            for d in range(day, horizon):
                path[d] = price


def _independent_path(
    rng: random.Random, behavior: StoreBehavior, list_price: int, horizon: int
) -> list[int]:
    price = max(1, round(list_price * rng.uniform(0.75, 1.0)))
    path = [price]
    lo, hi = behavior.magnitude_pct
    for _ in range(1, horizon):
        if rng.random() < behavior.hazard:
            delta = max(1, round(list_price * rng.uniform(lo, hi) / 100))
            price = max(1, price + delta if rng.random() < 0.5 else price - delta)
        path.append(price)
    return path


def _responder_path(
    rng: random.Random,
    behavior: StoreBehavior,
    list_price: int,
    horizon: int,
    transitions: Sequence[tuple[int, bool]],
    listed_at_start: bool,
) -> list[int]:
    on_price = max(1, round(list_price * (100 - behavior.discount_pct) / 100))
    off_price = max(1, round(list_price * (100 + behavior.markup_pct) / 100))
    path = [on_price if listed_at_start else off_price] * horizon
    schedule = [
        (day + _draw_lag(rng, behavior.lag), day, on_price if entering else off_price)
        for day, entering in transitions
    ]
    _apply_schedule(path, schedule, horizon)
    return path


def _follower_path(
    rng: random.Random,
    behavior: StoreBehavior,
    list_price: int,
    horizon: int,
    target_path: Sequence[int] | None,
) -> list[int]:
    path = [max(1, round(list_price * rng.uniform(0.75, 1.0)))] * horizon
    if target_path is None:
        return path
    schedule = []
    for day in range(1, horizon):
        if target_path[day] != target_path[day - 1] and rng.random() < behavior.follow_probability:
            new_price = max(1, target_path[day] - behavior.undercut_cents)
            schedule.append((day + _draw_lag(rng, behavior.lag), day, new_price))
    _apply_schedule(path, schedule, horizon)
    return path


def _transitions(cat: Category, start: date, horizon: int) -> tuple[list[tuple[int, bool]], bool]:
    events: list[tuple[int, bool]] = []
    listed_at_start = False
    for iv in cat.intervals:
        a = (iv.start - start).days
        b = (iv.end - start).days
        if a == 0:
            listed_at_start = True
        else:
            events.append((a, True))
        if b + 1 < horizon:
            events.append((b + 1, False))
    return sorted(events), listed_at_start


def simulate(config: SimConfig, seed: int) -> tuple[PricePanel, GroundTruth]:
    """Generate a panel day by day for every (store, item) series."""
    if seed is None:
        raise ConfigError("seed", "an explicit seed is required")
    config.validate()
    categories = make_bestseller_calendar(config, seed)
    horizon = config.horizon_days
    order = _follow_order(config.stores)
    observations = []
    for cat in categories:
        item = cat.item_id
        lo, hi = config.list_price_cents
        list_price = _rng(seed, "list_price", item).randint(lo, hi)
        transitions, listed_at_start = _transitions(cat, config.start_date, horizon)
        paths: dict[str, list[int]] = {}
        carries: dict[str, bool] = {}
        for store in order:
            behavior = config.stores[store]
            carries[store] = _rng(seed, "carry", store, item).random() < config.carry_rate
            rng = _rng(seed, "price", store, item)
            if behavior.kind == "independent":
                paths[store] = _independent_path(rng, behavior, list_price, horizon)
            elif behavior.kind == "list_responder":
                paths[store] = _responder_path(
                    rng, behavior, list_price, horizon, transitions, listed_at_start
                )
            else:
                target = behavior.target
                visible = paths[target] if carries[target] and carries[store] else None
                paths[store] = _follower_path(rng, behavior, list_price, horizon, visible)
        for store in sorted(config.stores):
            if not carries[store]:
                continue
            miss = _rng(seed, "missing", store, item)
            for d, price in enumerate(paths[store]):
                if miss.random() < config.missingness:
                    continue
                observations.append(
                    PriceObservation(config.start_date + timedelta(days=d), store, item, price)
                )
    return PricePanel(observations), GroundTruth(seed, config, tuple(categories))


def confound_scenario(config: SimConfig, seed: int) -> tuple[PricePanel, GroundTruth]:
    """Simulate a market where synchronized changes come only from list events."""
    config.validate()
    followers = [s for s, b in config.stores.items() if b.kind == "follower"]
    if followers:
        raise ConfigError("stores", f"confound scenario allows no followers, got {followers}")
    return simulate(config, seed)


def default_confound_config() -> SimConfig:
    """Six list responders and four independents over all three categories."""
    stores: dict[str, StoreBehavior] = {}
    for i in range(6):
        stores[f"resp{i}"] = StoreBehavior(
            kind="list_responder",
            lag=(0.5, 0.3, 0.2),
            discount_pct=10 + 5 * (i % 3),
            markup_pct=0,
        )
    for i in range(4):
        stores[f"ind{i}"] = StoreBehavior(kind="independent", hazard=0.02, magnitude_pct=(1.0, 10.0))
    return SimConfig(
        stores=stores,
        items={RANDOM: 60, NYT: 30, COMPUTER: 20},
        horizon_days=150,
        list_size=10,
        turnover=0.3,
    ).validate()
