"""Regenerate the frozen report fixtures.

Run by hand only when a rendering change is intended:

    python tests/regen_goldens.py

then review the diff under tests/data and tests/golden before committing.
"""

from __future__ import annotations

from pathlib import Path

from leadfollow.panel import ingest_observations, read_categories
from leadfollow.pipeline import analyze
from leadfollow.report import FORMATS, bundle_from_json, bundle_to_json, render, render_files

HERE = Path(__file__).resolve().parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"


def fixture_bundle_json() -> bytes:
    panel = ingest_observations((DATA / "fixture_observations.csv").read_bytes())
    categories = read_categories((DATA / "fixture_categories.csv").read_bytes())
    bundle = analyze(panel, categories, focal="amazon").bundle
    bundle.metadata["toolkit_version"] = "fixture"
    return bundle_to_json(bundle)


def main() -> None:
    raw = fixture_bundle_json()
    (DATA / "fixture_bundle.json").write_bytes(raw)
    bundle = bundle_from_json(raw)
    for fmt in FORMATS:
        out = GOLDEN / fmt
        out.mkdir(parents=True, exist_ok=True)
        for old in out.iterdir():
            old.unlink()
        for name, data in render_files(bundle, fmt).items():
            (out / name).write_bytes(data)
    (GOLDEN / "report.csv").write_bytes(render(bundle, "csv"))
    (GOLDEN / "report.md").write_bytes(render(bundle, "markdown"))


if __name__ == "__main__":
    main()
