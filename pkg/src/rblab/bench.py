"""Benchmark harness: INI experiment configs, a CLI, and CSV reports.

An experiment config is an INI file with up to five flat sections:

    [protocol]   kind, n, f, k
    [network]    topology, depth, fanout, base_delay, jitter,
                 bandwidth_mbit, source_bandwidth_kbytes
    [workload]   source, broadcasts, payload_size, gap, seed
    [adversary]  strategy, nodes, count, crash_after
    [output]     csv, trace

Unknown sections or keys are rejected. ``load_config`` raises ParseError
for malformed files and ValidationError (naming the violated bound) for
semantically impossible ones. ``run_experiment`` executes one config and
returns a flat report row; ``run_matrix`` runs many and sorts the rows.
The ``rblab`` entry point exposes run / matrix / scenario / trace.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from .adversary import (
    Crash,
    CorruptRelay,
    EquivocatingSource,
    Silent,
    UnknownScenario,
    build_world,
    run_scenario,
)
from .core import MsgKind
from .protocols import ProtocolConfig, ProtocolKind
from .simnet import (
    FaultBudgetExceeded,
    NetParams,
    SimWorld,
    StepCapExceeded,
    Topology,
    TopologyKind,
    TraceRow,
)
from .simnet import run as simulate


class ParseError(ValueError):
    """The config file is not a well-formed experiment description."""


class ValidationError(ValueError):
    """The config describes an impossible experiment; names the bound."""


REPORT_COLUMNS = (
    "protocol", "n", "f", "k", "L", "seed", "topology", "bandwidth",
    "broadcasts", "deliveries", "duration", "throughput",
    "mean_latency", "max_latency", "source_bytes", "total_bytes",
    "msgs_msg", "msgs_echo", "msgs_acc", "msgs_req", "msgs_fwd",
    "msgs_hash_rb", "depth", "error",
)

_SECTION_KEYS = {
    "protocol": {"kind", "n", "f", "k"},
    "network": {"topology", "depth", "fanout", "base_delay", "jitter",
                "bandwidth_mbit", "source_bandwidth_kbytes"},
    "workload": {"source", "broadcasts", "payload_size", "gap", "seed"},
    "adversary": {"strategy", "nodes", "count", "crash_after"},
    "output": {"csv", "trace"},
}

STRATEGIES = ("none", "silent", "crash", "equivocate", "corrupt-relay")


@dataclass
class ExperimentConfig:
    """One fully-resolved experiment description."""

    kind: ProtocolKind
    n: int
    f: int
    k: int | None = None
    topology: TopologyKind = TopologyKind.SINGLE_SWITCH
    depth: int = 3
    fanout: int = 2
    base_delay: float = 0.1
    jitter: float = 0.0
    bandwidth_mbit: float | None = None
    source_bandwidth_kbytes: float | None = None
    source: int = 0
    broadcasts: int = 1
    payload_size: int = 1024
    gap: float = 0.0
    seed: int = 0
    strategy: str = "none"
    adversary_nodes: tuple[int, ...] | None = None
    count: int = 1
    crash_after: int = 0
    csv_path: str | None = None
    trace_path: str | None = None

    def net_params(self) -> NetParams:
        bandwidth = None if self.bandwidth_mbit is None \
            else self.bandwidth_mbit * 1e6 / 8
        source_bw = None if self.source_bandwidth_kbytes is None \
            else self.source_bandwidth_kbytes * 1000
        return NetParams(base_delay=self.base_delay, jitter=self.jitter,
                         bandwidth=bandwidth, source_bandwidth=source_bw)

    def topology_obj(self) -> Topology:
        return Topology(self.topology, depth=self.depth, fanout=self.fanout)

    def validate(self) -> None:
        try:
            ProtocolConfig(self.kind, self.n, self.f, node=0, k=self.k).validate()
            self.topology_obj().validate(self.n)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        if not 0 <= self.source < self.n:
            raise ValidationError(f"source {self.source} outside [0, {self.n})")
        if self.broadcasts < 1:
            raise ValidationError("broadcasts must be >= 1")
        if self.payload_size < 1:
            raise ValidationError("payload_size must be >= 1")
        if self.gap < 0 or self.base_delay < 0 or self.jitter < 0:
            raise ValidationError("gap, base_delay, and jitter must be >= 0")
        for name in ("bandwidth_mbit", "source_bandwidth_kbytes"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {self.strategy!r}; choices: {', '.join(STRATEGIES)}")
        if self.adversary_nodes is not None:
            bad = [i for i in self.adversary_nodes if not 0 <= i < self.n]
            if bad:
                raise ValidationError(f"adversary nodes {bad} outside [0, {self.n})")
        if self.strategy == "crash" and self.crash_after < 0:
            raise ValidationError("crash_after must be >= 0")
        if self.count < 0:
            raise ValidationError("count must be >= 0")

    def faulty_nodes(self) -> list[int]:
        if self.strategy == "none":
            return []
        if self.adversary_nodes is not None:
            return list(self.adversary_nodes)
        if self.strategy == "equivocate":
            return [self.source]
        picks: list[int] = []
        for node in range(self.n - 1, -1, -1):
            if node == self.source:
                continue
            picks.append(node)
            if len(picks) == self.count:
                break
        return picks


def _typed(parser: configparser.ConfigParser, section: str, key: str, conv,
           default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ValueError:
        raise ParseError(
            f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _node_list(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(",") if part.strip())


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ParseError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTION_KEYS[section]:
                raise ParseError(f"unknown key {key!r} in [{section}]")
    for key in ("kind", "n", "f"):
        if not parser.has_option("protocol", key):
            raise ParseError(f"[protocol] is missing required key {key!r}")
    kind_raw = parser.get("protocol", "kind")
    try:
        kind = ProtocolKind(kind_raw)
    except ValueError:
        choices = ", ".join(k.value for k in ProtocolKind)
        raise ValidationError(
            f"unknown protocol kind {kind_raw!r}; choices: {choices}") from None
    topo_raw = parser.get("network", "topology", fallback="single-switch")
    try:
        topology = TopologyKind(topo_raw)
    except ValueError:
        choices = ", ".join(t.value for t in TopologyKind)
        raise ValidationError(
            f"unknown topology {topo_raw!r}; choices: {choices}") from None
    config = ExperimentConfig(
        kind=kind,
        n=_typed(parser, "protocol", "n", int, None),
        f=_typed(parser, "protocol", "f", int, None),
        k=_typed(parser, "protocol", "k", int, None),
        topology=topology,
        depth=_typed(parser, "network", "depth", int, 3),
        fanout=_typed(parser, "network", "fanout", int, 2),
        base_delay=_typed(parser, "network", "base_delay", float, 0.1),
        jitter=_typed(parser, "network", "jitter", float, 0.0),
        bandwidth_mbit=_typed(parser, "network", "bandwidth_mbit", float, None),
        source_bandwidth_kbytes=_typed(parser, "network",
                                       "source_bandwidth_kbytes", float, None),
        source=_typed(parser, "workload", "source", int, 0),
        broadcasts=_typed(parser, "workload", "broadcasts", int, 1),
        payload_size=_typed(parser, "workload", "payload_size", int, 1024),
        gap=_typed(parser, "workload", "gap", float, 0.0),
        seed=_typed(parser, "workload", "seed", int, 0),
        strategy=parser.get("adversary", "strategy", fallback="none"),
        adversary_nodes=_typed(parser, "adversary", "nodes", _node_list, None),
        count=_typed(parser, "adversary", "count", int, 1),
        crash_after=_typed(parser, "adversary", "crash_after", int, 0),
        csv_path=parser.get("output", "csv", fallback=None),
        trace_path=parser.get("output", "trace", fallback=None),
    )
    config.validate()
    return config


def _workload(config: ExperimentConfig) -> list[tuple[float, int, bytes, int]]:
    rng = random.Random(config.seed)
    return [(i * config.gap, config.source, rng.randbytes(config.payload_size), i + 1)
            for i in range(config.broadcasts)]


def _make_strategy(config: ExperimentConfig, node: int):
    if config.strategy == "silent":
        return Silent()
    if config.strategy == "crash":
        return Crash(config.crash_after)
    if config.strategy == "corrupt-relay":
        return CorruptRelay(seed=config.seed + node)
    if config.strategy == "equivocate":
        alt = random.Random(config.seed ^ 0xE0E0).randbytes(config.payload_size)
        half = (config.n + 1) // 2
        return EquivocatingSource({to: alt for to in range(half, config.n)})
    raise ValidationError(f"unknown strategy {config.strategy!r}")


def build_experiment(config: ExperimentConfig, *, record_trace: bool = False,
                     allow_overfault: bool = False) -> SimWorld:
    world = build_world(config.kind, config.n, config.f, k=config.k,
                        topology=config.topology_obj(), net=config.net_params(),
                        seed=config.seed, record_trace=record_trace)
    try:
        for node in config.faulty_nodes():
            world.attach_adversary(node, _make_strategy(config, node),
                                   allow_overfault=allow_overfault)
    except (FaultBudgetExceeded, ValueError) as exc:
        raise ValidationError(str(exc)) from None
    return world


def run_experiment(config: ExperimentConfig, *, record_trace: bool = False,
                   allow_overfault: bool = False) -> tuple[dict, SimWorld]:
    """Run one experiment; returns (report row, finished world)."""
    world = build_experiment(config, record_trace=record_trace,
                             allow_overfault=allow_overfault)
    workload = _workload(config)
    error = ""
    try:
        simulate(world, workload)
    except StepCapExceeded as exc:
        error = str(exc)
    stats = world.stats
    started = {(source, h): at for at, source, _, h in workload}
    latencies = [rec.time - started[(s, h)]
                 for (i, s, h), rec in stats.delivers.items() if (s, h) in started]
    depths = [rec.depth for (i, s, h), rec in stats.delivers.items()
              if i in world.honest]
    deliveries = len(stats.delivers)
    duration = world.time
    resolved_k = ProtocolConfig(config.kind, config.n, config.f, node=0,
                                k=config.k).resolved_k()
    row = {
        "protocol": config.kind.value,
        "n": config.n,
        "f": config.f,
        "k": resolved_k if resolved_k is not None else "",
        "L": config.payload_size,
        "seed": config.seed,
        "topology": config.topology.value,
        "bandwidth": config.bandwidth_mbit if config.bandwidth_mbit is not None
                     else "unlimited",
        "broadcasts": config.broadcasts,
        "deliveries": deliveries,
        "duration": duration,
        "throughput": deliveries / duration if duration > 0 else "",
        "mean_latency": sum(latencies) / len(latencies) if latencies else "",
        "max_latency": max(latencies) if latencies else "",
        "source_bytes": sum(stats.sent_bytes[config.source].values()),
        "total_bytes": stats.total_sent_bytes(),
        "msgs_msg": stats.total_sent_count(MsgKind.MSG),
        "msgs_echo": stats.total_sent_count(MsgKind.ECHO),
        "msgs_acc": stats.total_sent_count(MsgKind.ACC),
        "msgs_req": stats.total_sent_count(MsgKind.REQ),
        "msgs_fwd": stats.total_sent_count(MsgKind.FWD),
        "msgs_hash_rb": stats.total_sent_count(MsgKind.HASH_RB),
        "depth": max(depths) if depths else "",
        "error": error,
    }
    return row, world


def _error_row(name: str, error: str) -> dict:
    row = {column: "" for column in REPORT_COLUMNS}
    row["protocol"] = name
    row["error"] = error
    return row


def run_matrix(paths, *, seed: int | None = None,
               allow_overfault: bool = False) -> list[dict]:
    """Run every config; failures become error rows instead of aborting."""
    rows: list[dict] = []
    for path in paths:
        try:
            config = load_config(path)
            if seed is not None:
                config.seed = seed
            row, _ = run_experiment(config, allow_overfault=allow_overfault)
        except (ParseError, ValidationError) as exc:
            row = _error_row(Path(path).stem, str(exc))
        rows.append(row)
    rows.sort(key=lambda r: (str(r["protocol"]), str(r["topology"]),
                             str(r["bandwidth"])))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def rows_to_csv(rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[column]) for column in REPORT_COLUMNS])
    return buffer.getvalue()


def trace_to_text(world: SimWorld) -> str:
    lines = ["\t".join(TraceRow.FIELDS)]
    lines += ["\t".join(str(v) for v in row.as_tuple()) for row in world.trace]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _row_text(row: dict, args) -> str:
    if args.json:
        return json.dumps({c: row[c] for c in REPORT_COLUMNS}, indent=2) + "\n"
    if args.csv:
        return rows_to_csv([row])
    width = max(len(c) for c in REPORT_COLUMNS)
    return "".join(f"{c.ljust(width)}  {_fmt(row[c])}\n" for c in REPORT_COLUMNS)


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        want_trace = bool(config.trace_path)
        row, world = run_experiment(config, record_trace=want_trace,
                                    allow_overfault=args.allow_overfault)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(_row_text(row, args), args.out)
    if config.csv_path:
        Path(config.csv_path).write_text(rows_to_csv([row]), encoding="utf-8")
    if config.trace_path:
        Path(config.trace_path).write_text(trace_to_text(world), encoding="utf-8")
    return 1 if row["error"] else 0


def _expand(paths) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files += sorted(path.glob("*.ini"))
        else:
            files.append(path)
    return files


def _cmd_matrix(args) -> int:
    rows = run_matrix(_expand(args.configs), seed=args.seed,
                      allow_overfault=args.allow_overfault)
    _emit(rows_to_csv(rows), args.out)
    return 0


def _cmd_scenario(args) -> int:
    params: dict = {"seed": args.seed}
    if args.f is not None:
        params["f"] = args.f
    if args.protocol is not None:
        params["protocol"] = args.protocol
    try:
        result = run_scenario(args.name, **params)
    except UnknownScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{'PASS' if result.passed else 'FAIL'} {result.name}")
    for message in result.messages:
        print(f"  {message}")
    return 0 if result.passed else 1


def _cmd_trace(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        row, world = run_experiment(config, record_trace=True,
                                    allow_overfault=args.allow_overfault)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(trace_to_text(world), args.out)
    return 1 if row["error"] else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rblab",
        description="Reliable-broadcast protocol laboratory benchmark CLI.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to an INI experiment config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the workload seed")
    p_run.add_argument("--out", default=None, help="write the report here")
    p_run.add_argument("--csv", action="store_true", help="emit CSV")
    p_run.add_argument("--json", action="store_true", help="emit JSON")
    p_run.add_argument("--allow-overfault", action="store_true",
                       help="permit more faulty nodes than f")
    p_run.set_defaults(fn=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="run many configs, emit sorted CSV")
    p_matrix.add_argument("configs", nargs="+",
                          help="config files or directories of .ini files")
    p_matrix.add_argument("--seed", type=int, default=None)
    p_matrix.add_argument("--out", default=None)
    p_matrix.add_argument("--allow-overfault", action="store_true")
    p_matrix.set_defaults(fn=_cmd_matrix)

    p_scenario = sub.add_parser("scenario", help="run a named adversarial scenario")
    p_scenario.add_argument("name")
    p_scenario.add_argument("--seed", type=int, default=0)
    p_scenario.add_argument("--f", type=int, default=None)
    p_scenario.add_argument("--protocol", default=None,
                            help="substitute a real protocol into the script")
    p_scenario.set_defaults(fn=_cmd_scenario)

    p_trace = sub.add_parser("trace", help="run one config and dump the event trace")
    p_trace.add_argument("config")
    p_trace.add_argument("--seed", type=int, default=None)
    p_trace.add_argument("--out", default=None)
    p_trace.add_argument("--allow-overfault", action="store_true")
    p_trace.set_defaults(fn=_cmd_trace)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
