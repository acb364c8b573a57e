"""Command-line entry point: run one scenario, sweep the relaying
experiments across traffic densities, or summarise a sweep CSV.

Exit codes: 0 success, 1 conformance failure, 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .metrics import SweepResult, SweepRow, export_csv, parse_csv
from .mobility import MobilityConfig
from .netsim import Engine, NetConfig, TrialSetup, write_trace
from .relay import FRESH60, HOP4, Freshness, HopLimit, RelayPolicy
from .scenarios import build_scenario, check_conformance, spec_for

EXIT_OK = 0
EXIT_CONFORMANCE = 1
EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "accident"
    policy: str = "hop4"
    vehicles: int = 19
    police: int = 0
    seed: int = 1
    trials: int = 5
    duration: float = 1500.0
    warmup: float = 500.0
    loss: float = 0.0
    include_wired: bool = True
    out_dir: str = "out"
    densities: Tuple[int, ...] = ()
    route_length: float = 4000.0
    dt: float = 0.5
    relay_hold: float = 35.0

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials: must be at least 1")
        if self.warmup >= self.duration:
            raise ConfigError("warmup: must be less than duration")
        if not 0.0 <= self.loss < 1.0:
            raise ConfigError("loss: must be in [0, 1)")
        parse_policy(self.policy)

    # -- flat key=value round trip ----------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "densities":
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = _coerce(key, value, known[key].type)
        return cls(**values)


def _coerce(key: str, value: str, typename) -> object:
    if key == "densities":
        return tuple(int(v) for v in value.split(",") if v)
    if key == "include_wired":
        return value.lower() in ("1", "true", "yes")
    if key in ("vehicles", "police", "seed", "trials"):
        return int(value)
    if key in ("duration", "warmup", "loss", "route_length", "dt", "relay_hold"):
        return float(value)
    return value


def parse_policy(name: str) -> RelayPolicy:
    """hop4, fresh60, hops=N, or age=SECONDS."""
    if name == "hop4":
        return HOP4
    if name == "fresh60":
        return FRESH60
    if name.startswith("hops="):
        return HopLimit(int(name[5:]))
    if name.startswith("age="):
        return Freshness(float(name[4:]))
    raise ConfigError(f"policy: unknown policy {name!r}")


def make_setup(config: RunConfig, *, policy: Optional[str] = None,
               vehicles: Optional[int] = None) -> TrialSetup:
    script = build_scenario(config.scenario)
    return TrialSetup(
        script=script,
        policy=parse_policy(policy or config.policy),
        vehicles=vehicles if vehicles is not None else config.vehicles,
        police=max(config.police, script.min_police),
        duration=config.duration,
        warmup=config.warmup,
        net=NetConfig(loss=config.loss, relay_hold=config.relay_hold),
        mobility=MobilityConfig(route_length=config.route_length, dt=config.dt),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_run(config: RunConfig) -> int:
    config.validate()
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    setup = make_setup(config)
    spec = spec_for(setup.script)
    sweep = SweepResult()
    all_pass = True
    report_lines = []
    for trial in range(config.trials):
        seed = config.seed + trial
        trace, metrics = Engine(setup, seed).run()
        name = f"trace_{config.scenario}_{config.policy}_{setup.vehicles}v_t{trial}.csv"
        try:
            write_trace(trace, out_dir / name)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        total = metrics.total if config.include_wired else metrics.total_excluding_wired()
        sweep.add(SweepRow(config.scenario, config.policy, setup.vehicles, trial, total))
        report = check_conformance(trace, spec)
        report_lines.append(f"trial {trial} (seed {seed}):")
        report_lines.append(report.summary())
        all_pass = all_pass and report.passed

    try:
        export_csv(sweep, out_dir / f"metrics_{config.scenario}_{config.policy}.csv")
        (out_dir / f"conformance_{config.scenario}.txt").write_text(
            "\n".join(report_lines) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print("\n".join(report_lines))
    return EXIT_OK if all_pass else EXIT_CONFORMANCE


def run_sweep(config: RunConfig, policies: Sequence[str] = ("hop4", "fresh60")) -> SweepResult:
    """Run both policies across all densities; library form of cmd_sweep."""
    sweep = SweepResult()
    for vehicles in config.densities:
        for policy in policies:
            setup = make_setup(config, policy=policy, vehicles=vehicles)
            for trial in range(config.trials):
                _, metrics = Engine(setup, config.seed + trial).run()
                total = (
                    metrics.total
                    if config.include_wired
                    else metrics.total_excluding_wired()
                )
                sweep.add(SweepRow(config.scenario, policy, vehicles, trial, total))
    return sweep


def cmd_sweep(config: RunConfig) -> int:
    config.validate()
    if not config.densities:
        print("error: sweep requires --densities", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    sweep = run_sweep(config)
    path = out_dir / f"sweep_{config.scenario}.csv"
    try:
        export_csv(sweep, path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for vehicles in config.densities:
        hop = sweep.mean(config.scenario, "hop4", vehicles)
        fresh = sweep.mean(config.scenario, "fresh60", vehicles)
        marker = ">=" if hop >= fresh else "<"
        print(f"{vehicles:4d} vehicles: mean(hop4)={hop:.1f} {marker} mean(fresh60)={fresh:.1f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_report(csv_path: str) -> int:
    try:
        _, aggregates = parse_csv(csv_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not aggregates:
        print("no data: aggregate section is empty", file=sys.stderr)
        return EXIT_CONFIG

    means = {}
    for scenario, policy, vehicles, mean, _ in aggregates:
        means[(policy, vehicles)] = mean
    densities = sorted({v for (_, v) in means})
    inverted = []
    for vehicles in densities:
        hop = means.get(("hop4", vehicles))
        fresh = means.get(("fresh60", vehicles))
        if hop is None or fresh is None:
            continue
        print(f"{vehicles:4d} vehicles: mean(hop4)={hop:.1f} mean(fresh60)={fresh:.1f}")
        if hop < fresh:
            inverted.append(vehicles)
    if inverted:
        print("hop4 >= fresh60 violated at densities: "
              + ", ".join(str(v) for v in inverted))
    else:
        print("hop4 >= fresh60 at all densities: PASS")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--scenario")
    parser.add_argument("--policy")
    parser.add_argument("--vehicles", type=int)
    parser.add_argument("--police", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--duration", type=float)
    parser.add_argument("--warmup", type=float)
    parser.add_argument("--loss", type=float)
    parser.add_argument("--densities", help="comma-separated vehicle counts")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument(
        "--include-wired", dest="include_wired", action="store_true", default=None
    )
    parser.add_argument(
        "--exclude-wired", dest="include_wired", action="store_false"
    )


def _build_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            config = RunConfig.from_text(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    else:
        config = RunConfig()
    overrides = {}
    for key in ("scenario", "policy", "vehicles", "police", "trials", "seed",
                "duration", "warmup", "loss", "out_dir", "include_wired"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "densities", None):
        overrides["densities"] = tuple(int(v) for v in args.densities.split(","))
    return replace(config, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vanetim",
        description="VANET traffic-incident dissemination simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run one scenario for N seeded trials")
    _add_common(run_parser)
    sweep_parser = sub.add_parser("sweep", help="sweep both policies over densities")
    _add_common(sweep_parser)
    report_parser = sub.add_parser("report", help="summarise a sweep CSV")
    report_parser.add_argument("csv", help="path to a sweep CSV")

    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.csv)
        config = _build_config(args)
        if args.command == "run":
            return cmd_run(config)
        return cmd_sweep(config)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
