"""``leadfollow`` command line.

Exit codes: 0 success, 1 validation or configuration error, 2 partial
collection failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from leadfollow.collect import Source, collect
from leadfollow.obslog import LogError, ObservationLog
from leadfollow.panel import (
    PanelError,
    PricePanel,
    ingest_observations,
    read_categories,
    write_categories_csv,
)
from leadfollow.pipeline import analyze, output_files, write_tree
from leadfollow.report import FORMATS, ReportError, bundle_from_json, render_files
from leadfollow.synth import ConfigError, load_sim_config, simulate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARTIAL = 2

logger = logging.getLogger("leadfollow")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    observations: str | None = None
    categories: str | None = None
    log: str | None = None
    windows: tuple[int, ...] = (3, 7)
    focal: str | None = None
    k: int = 3
    out: str | None = None
    threshold: float = 0.5
    format: str = "csv"
    sources: list[Source] = field(default_factory=list)

    def validate(self) -> "RunConfig":
        if not self.windows or any(n < 1 for n in self.windows):
            raise ConfigError("windows", "window sizes must be integers >= 1")
        if self.k < 1:
            raise ConfigError("k", "must be >= 1")
        if self.format not in FORMATS:
            raise ConfigError("format", f"expected one of {FORMATS}")
        return self


def load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data: dict[str, Any] = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(path, str(exc)) from None
    sources = []
    for i, raw in enumerate(data.pop("sources", [])):
        try:
            sources.append(Source(**raw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sources[{i}]", str(exc)) from None
    known = set(RunConfig.__dataclass_fields__) - {"sources"}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown setting")
    if "windows" in data:
        data["windows"] = tuple(data["windows"])
    return RunConfig(**data, sources=sources)


def _parse_windows(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid window list {text!r}") from None


def _merge(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    overrides = {
        name: getattr(args, name)
        for name in ("observations", "categories", "log", "windows", "focal", "k", "out", "threshold", "format")
        if getattr(args, name, None) is not None
    }
    return replace(config, **overrides).validate()


def _captured_at(text: str | None) -> datetime | None:
    if text is None:
        return None
    return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _summary(panel: PricePanel) -> str:
    s = panel.summary()
    return f"stores={s['stores']} items={s['items']} days={s['days']} observations={s['observations']}"


def cmd_ingest(config: RunConfig, args: argparse.Namespace) -> int:
    if config.log is None or config.observations is None:
        raise UsageError("ingest needs --log and --observations")
    body = _read(config.observations)
    log = ObservationLog(config.log)
    seg = log.append(body, args.source or Path(config.observations).name, _captured_at(args.captured_at))
    panel = log.replay()
    print(f"appended segment {seg.seq} ({seg.observations} observations) from {seg.source}")
    print(_summary(panel))
    return EXIT_OK


def cmd_collect(config: RunConfig, args: argparse.Namespace) -> int:
    if config.log is None:
        raise UsageError("collect needs --log")
    if not config.sources:
        raise UsageError("collect needs at least one [[sources]] entry in --config")
    report = collect(config.sources, ObservationLog(config.log), _captured_at(args.captured_at))
    for seg in report.appended:
        print(f"collected {seg.source}: segment {seg.seq}, {seg.observations} observations")
    for name, message in report.failures:
        print(f"failed {name}: {message}", file=sys.stderr)
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_simulate(config: RunConfig, args: argparse.Namespace) -> int:
    if args.seed is None:
        raise UsageError("simulate needs an explicit --seed")
    if args.sim_config is None:
        raise UsageError("simulate needs --sim-config")
    if config.out is None:
        raise UsageError("simulate needs --out")
    sim = load_sim_config(args.sim_config)
    panel, truth = simulate(sim, args.seed)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "observations.csv").write_bytes(panel.to_csv())
    (out / "categories.csv").write_bytes(write_categories_csv(truth.categories))
    (out / "ground_truth.jsonl").write_bytes(truth.to_jsonl())
    print(_summary(panel))
    return EXIT_OK


def cmd_analyze(config: RunConfig, args: argparse.Namespace) -> int:
    if config.categories is None or config.out is None:
        raise UsageError("analyze needs --categories and --out")
    if config.log is not None:
        panel = ObservationLog(config.log).replay()
    elif config.observations is not None:
        panel = ingest_observations(_read(config.observations), source_name=config.observations)
    else:
        raise UsageError("analyze needs --log or --observations")
    categories = read_categories(_read(config.categories), source_name=config.categories)
    result = analyze(
        panel,
        categories,
        windows=config.windows,
        focal=config.focal,
        k=config.k,
        threshold=config.threshold,
    )
    write_tree(output_files(result, config.format), config.out)
    for label, hits in sorted(result.screens.items()):
        for h in hits:
            print(f"screen {label}: {h.store_id} peaks at d=+{h.peak_day} ({float(h.peak_fraction):.3f})")
    print(_summary(panel))
    return EXIT_OK


def cmd_report(config: RunConfig, args: argparse.Namespace) -> int:
    if args.bundle is None or config.out is None:
        raise UsageError("report needs --bundle and --out")
    bundle = bundle_from_json(_read(args.bundle))
    write_tree(render_files(bundle, config.format), config.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2, reserved for partial collection
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leadfollow", description="Leader-follower screening for price panels.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="run configuration (TOML); flags override it")
        p.add_argument("--log", help="observation log directory")

    p = sub.add_parser("ingest", help="append an observation CSV to the log")
    common(p)
    p.add_argument("--observations")
    p.add_argument("--source", help="source name recorded with the segment")
    p.add_argument("--captured-at", help="ISO timestamp to stamp on the segment")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("collect", help="fetch each configured source once")
    common(p)
    p.add_argument("--captured-at")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("simulate", help="generate a synthetic panel")
    common(p)
    p.add_argument("--sim-config", help="simulation configuration (TOML)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    for name, func in (("analyze", cmd_analyze), ("report", cmd_report)):
        p = sub.add_parser(name, help=f"{name} and write report tables")
        common(p)
        p.add_argument("--out")
        p.add_argument("--format", choices=FORMATS)
        if name == "analyze":
            p.add_argument("--observations")
            p.add_argument("--categories")
            p.add_argument("--windows", type=_parse_windows, help="comma-separated, default 3,7")
            p.add_argument("--focal", help="focal store for lag tables")
            p.add_argument("-k", type=int, help="lag radius in days, default 3")
            p.add_argument("--threshold", type=float, help="follow-screen threshold, default 0.5")
        else:
            p.add_argument("--bundle", help="bundle.json written by analyze")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _merge(load_run_config(args.config), args)
        return args.func(config, args)
    except (UsageError, PanelError, ConfigError, ReportError, LogError, ValueError) as exc:
        print(f"leadfollow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
