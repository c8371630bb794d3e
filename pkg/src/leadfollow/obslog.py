"""Append-only observation log.

Layout of a log directory::

    index.jsonl          one record per segment, hash-chained
    segments/000001.csv  segment bodies in the observation CSV format
    .lock                advisory lock file

Segments are written once and never modified.  Each index record carries
the segment's SHA-256 and the SHA-256 of the previous index line, so
replay detects edits, removals and reordering.
"""

from __future__ import annotations

import contextlib
import fcntl
import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from leadfollow.panel import PanelError, PricePanel, ingest_observations, parse_observations


class LogError(RuntimeError):
    pass


class LogLockedError(LogError):
    pass


@dataclass(frozen=True)
class Segment:
    seq: int
    file: str
    source: str
    captured_at: str
    sha256: str
    prev: str
    observations: int


class ObservationLog:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def index_path(self) -> Path:
        return self.root / "index.jsonl"

    @contextlib.contextmanager
    def locked(self, exclusive: bool = True) -> Iterator[None]:
        self.root.mkdir(parents=True, exist_ok=True)
        fh = open(self.root / ".lock", "a+b")
        try:
            try:
                fcntl.flock(fh, (fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH) | fcntl.LOCK_NB)
            except BlockingIOError:
                raise LogLockedError(f"observation log {self.root} is locked by another process") from None
            yield
        finally:
            fh.close()

    def segments(self) -> list[Segment]:
        if not self.index_path.exists():
            return []
        out = []
        prev = ""
        for n, line in enumerate(self.index_path.read_bytes().splitlines(), start=1):
            rec = json.loads(line)
            seg = Segment(**rec)
            if seg.prev != prev:
                raise LogError(f"index line {n}: hash chain broken")
            body = (self.root / seg.file).read_bytes()
            if hashlib.sha256(body).hexdigest() != seg.sha256:
                raise LogError(f"segment {seg.file} does not match its recorded digest")
            prev = hashlib.sha256(line).hexdigest()
            out.append(seg)
        return out

    def _replay_unlocked(self) -> PricePanel:
        observations = []
        for seg in self.segments():
            body = (self.root / seg.file).read_bytes()
            observations.extend(parse_observations(body, source_name=seg.file))
        return PricePanel(observations)

    def replay(self) -> PricePanel:
        """Rebuild the panel from every segment in order."""
        with self.locked(exclusive=False):
            return self._replay_unlocked()

    def append(self, body: bytes, source: str, captured_at: datetime | None = None) -> Segment:
        """Validate ``body`` against the log and append it as a new segment.

        A body whose prices conflict with already-logged observations is
        rejected before anything is written.
        """
        incoming = ingest_observations(body, source_name=source)
        with self.locked():
            current = self._replay_unlocked()
            try:
                PricePanel([*current, *incoming])
            except PanelError as exc:
                raise PanelError(f"{source}: conflicts with logged observations: {exc}") from None
            existing = self.segments()
            seq = existing[-1].seq + 1 if existing else 1
            prev = ""
            if self.index_path.exists():
                lines = self.index_path.read_bytes().splitlines()
                if lines:
                    prev = hashlib.sha256(lines[-1]).hexdigest()
            rel = f"segments/{seq:06d}.csv"
            path = self.root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "xb") as fh:
                fh.write(body)
                fh.flush()
                os.fsync(fh.fileno())
            stamp = (captured_at or datetime.now(timezone.utc)).astimezone(timezone.utc)
            seg = Segment(
                seq=seq,
                file=rel,
                source=source,
                captured_at=stamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                sha256=hashlib.sha256(body).hexdigest(),
                prev=prev,
                observations=len(incoming),
            )
            line = json.dumps(seg.__dict__, sort_keys=True, separators=(",", ":"))
            with open(self.index_path, "ab") as fh:
                fh.write(line.encode("utf-8") + b"\n")
            return seg
