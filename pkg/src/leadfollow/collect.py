"""One-shot snapshot collection into the observation log.

Each source is a file glob or an HTTP URL plus the id of a parser that turns
the fetched document into observations.  Scheduling is left to the host
(cron or similar); ``collect`` fetches every source exactly once.
"""

from __future__ import annotations

import glob
import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import datetime
from typing import Callable

from leadfollow.obslog import ObservationLog, Segment
from leadfollow.panel import PanelError, PriceObservation, PricePanel, parse_day, parse_observations

logger = logging.getLogger(__name__)

Parser = Callable[[bytes], list[PriceObservation]]
PARSERS: dict[str, Parser] = {}


class CollectError(RuntimeError):
    pass


def register_parser(name: str) -> Callable[[Parser], Parser]:
    def deco(fn: Parser) -> Parser:
        PARSERS[name] = fn
        return fn

    return deco


@register_parser("observation-csv")
def parse_observation_csv(payload: bytes) -> list[PriceObservation]:
    return parse_observations(payload)


@register_parser("price-list-json")
def parse_price_list_json(payload: bytes) -> list[PriceObservation]:
    """A price-list document, or a JSON array of them::

        {"date": "2000-01-03", "store_id": "s1",
         "prices": [{"item_id": "9780000000002", "price_cents": 1299}]}
    """
    doc = json.loads(payload)
    docs = doc if isinstance(doc, list) else [doc]
    out = []
    for d in docs:
        day = parse_day(d["date"])
        for entry in d["prices"]:
            price = entry["price_cents"]
            if not isinstance(price, int) or isinstance(price, bool):
                raise ValueError(f"price_cents must be an integer, got {price!r}")
            out.append(PriceObservation(day, str(d["store_id"]), str(entry["item_id"]), price))
    return out


@dataclass(frozen=True)
class Source:
    name: str
    parser: str
    glob: str | None = None
    url: str | None = None
    schedule: str | None = None  # informational; the host scheduler owns cadence

    def __post_init__(self) -> None:
        if (self.glob is None) == (self.url is None):
            raise ValueError(f"source {self.name}: give exactly one of glob or url")


def fetch(source: Source, timeout: float = 10.0) -> list[tuple[str, bytes]]:
    """Raw documents for one source as ``(origin, payload)`` pairs."""
    if source.url is not None:
        try:
            with urllib.request.urlopen(source.url, timeout=timeout) as resp:
                return [(source.url, resp.read())]
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise CollectError(f"source {source.name}: cannot reach {source.url} ({exc})") from None
    paths = sorted(glob.glob(source.glob))
    if not paths:
        raise CollectError(f"source {source.name}: no files match {source.glob}")
    return [(p, open(p, "rb").read()) for p in paths]


def _excerpt(payload: bytes, limit: int = 120) -> str:
    text = payload[:limit].decode("utf-8", errors="replace")
    return repr(text) + ("..." if len(payload) > limit else "")


@dataclass
class CollectReport:
    appended: list[Segment]
    failures: list[tuple[str, str]]

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def collect(
    sources: list[Source], log: ObservationLog, captured_at: datetime | None = None
) -> CollectReport:
    """Fetch and parse every source once, appending one segment per source.

    A failing source is skipped and recorded; the others are still collected.
    """
    report = CollectReport([], [])
    for source in sources:
        parser = PARSERS.get(source.parser)
        try:
            if parser is None:
                raise CollectError(f"source {source.name}: no parser registered as {source.parser!r}")
            observations = []
            for origin, payload in fetch(source):
                try:
                    observations.extend(parser(payload))
                except (ValueError, KeyError, TypeError, PanelError) as exc:
                    raise CollectError(
                        f"source {source.name}: parser {source.parser} failed on {origin}: {exc}; "
                        f"payload starts {_excerpt(payload)}"
                    ) from None
            body = PricePanel(observations).to_csv()
            report.appended.append(log.append(body, source.name, captured_at))
        except (CollectError, PanelError) as exc:
            logger.warning("%s", exc)
            report.failures.append((source.name, str(exc)))
    return report
