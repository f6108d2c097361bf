"""Deterministic discrete-event network simulator for the broadcast automata.

A SimWorld owns one automaton per node, a hop-count topology, and a single
event queue ordered by (time, insertion sequence), which makes every run a
pure function of its inputs and seed. Message latency is

    hops * base_delay + uniform[0, jitter) + bits / bandwidth

with per-directed-link transmit serialization (a link finishes clocking one
message out before the next starts) and FIFO arrival ordering per link.
Self-addressed copies loop back instantly but still count toward byte
totals. Scenario scripts can override latency wholesale through
``delay_policy`` and inject hand-crafted traffic with ``inject``.

The world also records everything the analysis layer needs: per-node,
per-kind message and byte counters, delivery times, causal depth (how many
network legs the information chain behind a delivery spans), and which
digests each node vouched for in its ACC wave.
"""
from __future__ import annotations

import heapq
import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from . import hashing
from .core import (
    Action,
    BroadcastRequest,
    Deliver,
    MsgKind,
    NodeId,
    Payload,
    Receive,
    Send,
    SeqIndex,
    WireMessage,
    envelope_size,
)


class StepCapExceeded(RuntimeError):
    """The event cap tripped; the run is likely not quiescing."""


class FaultBudgetExceeded(ValueError):
    """More adversarial nodes than f in a strict run."""


class InvalidTopology(ValueError):
    """The topology cannot host the requested number of nodes."""


class NotDelivered(LookupError):
    """Queried a delivery that never happened."""


class TopologyKind(str, Enum):
    SINGLE_SWITCH = "single-switch"
    LINEAR = "linear"
    TREE = "tree"
    FAT_TREE = "fat-tree"


@dataclass(frozen=True)
class Topology:
    """Switched-network shape reduced to a host-to-host hop count.

    SINGLE_SWITCH: every host on one switch, all pairs 2 hops. LINEAR: a
    chain of n switches with one host each, hop = |i-j| + 2. TREE: a
    complete switch tree of the given depth and fanout with ``fanout``
    hosts per leaf switch, hop = 2 + 2 * (levels to the common ancestor).
    FAT_TREE: two tiers, ``fanout`` hosts per edge switch, 2 hops under
    one edge switch and 4 across the spine.
    """

    kind: TopologyKind = TopologyKind.SINGLE_SWITCH
    depth: int = 3
    fanout: int = 2

    def validate(self, n: int) -> None:
        if self.kind is TopologyKind.TREE:
            if self.depth < 1 or self.fanout < 1:
                raise InvalidTopology("tree needs depth >= 1 and fanout >= 1")
            capacity = self.fanout ** self.depth
            if n > capacity:
                raise InvalidTopology(
                    f"tree depth={self.depth} fanout={self.fanout} hosts {capacity} < n={n}")
        if self.kind is TopologyKind.FAT_TREE and self.fanout < 1:
            raise InvalidTopology("fat tree needs fanout >= 1")

    def hop(self, i: int, j: int, n: int) -> int:
        if i == j:
            return 0
        if self.kind is TopologyKind.SINGLE_SWITCH:
            return 2
        if self.kind is TopologyKind.LINEAR:
            return abs(i - j) + 2
        if self.kind is TopologyKind.TREE:
            a, b = i // self.fanout, j // self.fanout
            up = 0
            while a != b:
                a //= self.fanout
                b //= self.fanout
                up += 1
            return 2 + 2 * up
        if self.kind is TopologyKind.FAT_TREE:
            return 2 if i // self.fanout == j // self.fanout else 4
        raise ValueError(f"unknown topology {self.kind}")

    def hop_matrix(self, n: int) -> list[list[int]]:
        self.validate(n)
        return [[self.hop(i, j, n) for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class NetParams:
    """Per-hop latency, one-sided jitter, and link bandwidth.

    Bandwidths are bytes per second per directed link, None = unlimited;
    links leaving a broadcasting source can be capped separately."""

    base_delay: float = 0.1
    jitter: float = 0.0
    bandwidth: float | None = None
    source_bandwidth: float | None = None


@dataclass
class DeliverRecord:
    time: float
    payload: Payload
    depth: int


class RunStats:
    """Everything measured during one simulation run."""

    def __init__(self, n: int):
        self.n = n
        self.sent_count = [Counter() for _ in range(n)]
        self.sent_bytes = [Counter() for _ in range(n)]
        self.recv_count = [Counter() for _ in range(n)]
        self.recv_bytes = [Counter() for _ in range(n)]
        self.delivers: dict[tuple[NodeId, NodeId, SeqIndex], DeliverRecord] = {}
        self.double_deliveries: list[tuple[NodeId, NodeId, SeqIndex]] = []
        self.acc_digests: dict[tuple[NodeId, SeqIndex], dict[NodeId, set[bytes]]] = {}
        self.events_processed = 0

    def total_sent_bytes(self, kind: MsgKind | None = None) -> int:
        return self._total(self.sent_bytes, kind)

    def total_recv_bytes(self, kind: MsgKind | None = None) -> int:
        return self._total(self.recv_bytes, kind)

    def total_sent_count(self, kind: MsgKind | None = None) -> int:
        return self._total(self.sent_count, kind)

    def total_recv_count(self, kind: MsgKind | None = None) -> int:
        return self._total(self.recv_count, kind)

    @staticmethod
    def _total(counters: list[Counter], kind: MsgKind | None) -> int:
        if kind is None:
            return sum(sum(c.values()) for c in counters)
        return sum(c[kind] for c in counters)

    def conserved(self) -> bool:
        """At quiescence every byte sent has been received."""
        return (self.total_sent_bytes() == self.total_recv_bytes()
                and self.total_sent_count() == self.total_recv_count())

    def deliveries_of(self, node: NodeId) -> dict[tuple[NodeId, SeqIndex], DeliverRecord]:
        return {(s, h): rec for (i, s, h), rec in self.delivers.items() if i == node}

    def max_depth(self, nodes, s: NodeId, h: SeqIndex) -> int | None:
        depths = [rec.depth for (i, src, hh), rec in self.delivers.items()
                  if i in nodes and src == s and hh == h]
        return max(depths) if depths else None


@dataclass(frozen=True)
class _Bcast:
    node: NodeId
    payload: Payload
    h: SeqIndex


@dataclass(frozen=True)
class _Recv:
    to: NodeId
    frm: NodeId
    msg: WireMessage
    depth: int


@dataclass(frozen=True)
class _Inject:
    frm: NodeId
    to: NodeId
    msg: WireMessage
    delay: float | None
    depth: int


@dataclass(frozen=True)
class TraceRow:
    index: int
    time: float
    event: str
    node: int
    frm: int
    kind: str
    source: int
    h: int
    size: int
    depth: int

    FIELDS = ("index", "time", "event", "node", "frm", "kind",
              "source", "h", "size", "depth")

    def as_tuple(self) -> tuple:
        return (self.index, repr(self.time), self.event, self.node, self.frm,
                self.kind, self.source, self.h, self.size, self.depth)


class SimWorld:
    """One network of automata plus its event queue and measurements."""

    def __init__(self, automata, *, topology: Topology = Topology(),
                 net: NetParams = NetParams(), seed: int = 0,
                 record_trace: bool = False, max_steps: int = 1_000_000,
                 perturb_link: tuple[NodeId, NodeId] | None = None):
        self.automata = list(automata)
        self.n = len(self.automata)
        self.topology = topology
        self.hops = topology.hop_matrix(self.n)
        self.net = net
        self.rng = random.Random(seed)
        self.record_trace = record_trace
        self.max_steps = max_steps
        self.perturb_link = perturb_link
        self.time = 0.0
        self.stats = RunStats(self.n)
        self.strategies: dict[NodeId, object] = {}
        self.delay_policy = None
        self.broadcasts: list[tuple[NodeId, Payload, SeqIndex]] = []
        self.trace: list[TraceRow] = []
        self._queue: list[tuple[float, int, object]] = []
        self._seq = itertools.count()
        self._busy_until: dict[tuple[NodeId, NodeId], float] = {}
        self._last_arrival: dict[tuple[NodeId, NodeId], float] = {}
        self._ctx: dict[tuple[NodeId, NodeId, SeqIndex], int] = {}
        self._source_nodes: set[NodeId] = set()

    # -- setup ---------------------------------------------------------------
    @property
    def byzantine(self) -> set[NodeId]:
        return set(self.strategies)

    @property
    def honest(self) -> set[NodeId]:
        return set(range(self.n)) - self.byzantine

    def attach_adversary(self, node: NodeId, strategy, *,
                         allow_overfault: bool = False) -> None:
        if not 0 <= node < self.n:
            raise ValueError(f"node {node} outside [0, {self.n})")
        f = self.automata[node].f
        count = len(self.strategies) + (0 if node in self.strategies else 1)
        if not allow_overfault and count > f:
            raise FaultBudgetExceeded(f"attaching faulty node #{count} exceeds f={f}")
        self.strategies[node] = strategy
        on_attach = getattr(strategy, "on_attach", None)
        if on_attach is not None:
            on_attach(self, node)

    # -- scheduling ----------------------------------------------------------
    def _push(self, time: float, item) -> None:
        heapq.heappush(self._queue, (time, next(self._seq), item))

    def broadcast(self, node: NodeId, payload: Payload, h: SeqIndex,
                  at: float = 0.0) -> None:
        self.broadcasts.append((node, payload, h))
        self._source_nodes.add(node)
        self._push(at, _Bcast(node, payload, h))

    def inject(self, at: float, frm: NodeId, to: NodeId, msg: WireMessage,
               delay: float | None = None, depth: int = 1) -> None:
        """Schedule a hand-crafted send at an absolute time (adversary use)."""
        self._push(at, _Inject(frm, to, msg, delay, depth))

    def quiescent(self) -> bool:
        return not self._queue

    # -- core loop -----------------------------------------------------------
    def run(self, until: float | None = None) -> RunStats:
        steps = 0
        while self._queue and (until is None or self._queue[0][0] <= until):
            time, _, item = heapq.heappop(self._queue)
            self.time = time
            steps += 1
            if steps > self.max_steps:
                raise StepCapExceeded(f"exceeded {self.max_steps} events")
            self.stats.events_processed += 1
            if isinstance(item, _Bcast):
                self._process_bcast(item)
            elif isinstance(item, _Recv):
                self._process_recv(item)
            elif isinstance(item, _Inject):
                self._send(item.frm, item.to, item.msg, item.depth,
                           forced_delay=item.delay)
        if until is not None and until > self.time:
            self.time = until
        return self.stats

    def _process_bcast(self, item: _Bcast) -> None:
        node, payload, h = item.node, item.payload, item.h
        automaton = self.automata[node]
        strategy = self.strategies.get(node)
        actions = None
        if strategy is not None:
            builder = getattr(strategy, "source_actions", None)
            if builder is not None:
                actions = builder(self, node, automaton, payload, h)
        if actions is None:
            actions = automaton.step(BroadcastRequest(payload, h))
        if strategy is not None:
            actions = strategy.transform(self, node, automaton, actions)
        self._trace("bcast", node, node, "-", node, h, 0, 0)
        self._apply(node, actions, ctx=0)

    def _process_recv(self, item: _Recv) -> None:
        to, frm, msg = item.to, item.frm, item.msg
        size = envelope_size(msg)
        self.stats.recv_count[to][msg.kind] += 1
        self.stats.recv_bytes[to][msg.kind] += size
        key = (to, msg.source, msg.h)
        ctx = max(self._ctx.get(key, 0), item.depth)
        self._ctx[key] = ctx
        self._trace("recv", to, frm, msg.kind.name, msg.source, msg.h, size,
                    item.depth)
        automaton = self.automata[to]
        actions = automaton.step(Receive(frm, msg))
        strategy = self.strategies.get(to)
        if strategy is not None:
            actions = strategy.transform(self, to, automaton, actions)
        self._apply(to, actions, ctx=ctx)

    def _apply(self, node: NodeId, actions: list[Action], ctx: int) -> None:
        for action in actions:
            if isinstance(action, Send):
                self._send(node, action.to, action.msg, ctx + 1)
            elif isinstance(action, Deliver):
                key = (node, action.source, action.h)
                if key in self.stats.delivers:
                    self.stats.double_deliveries.append(key)
                    continue
                self.stats.delivers[key] = DeliverRecord(self.time, action.payload, ctx)
                self._trace("deliver", node, node, "-", action.source, action.h,
                            len(action.payload), ctx)

    def _send(self, frm: NodeId, to: NodeId, msg: WireMessage, depth: int,
              forced_delay: float | None = None) -> None:
        size = envelope_size(msg)
        self.stats.sent_count[frm][msg.kind] += 1
        self.stats.sent_bytes[frm][msg.kind] += size
        if msg.kind is MsgKind.ACC:
            digest = msg.digest if msg.digest is not None \
                else hashing.digest(msg.payload or b"")
            per_node = self.stats.acc_digests.setdefault((msg.source, msg.h), {})
            per_node.setdefault(frm, set()).add(digest)
        arrival = self.time + self._delay(frm, to, msg, size, forced_delay)
        link = (frm, to)
        arrival = max(arrival, self._last_arrival.get(link, 0.0))
        self._last_arrival[link] = arrival
        self._push(arrival, _Recv(to, frm, msg, depth))

    def _delay(self, frm: NodeId, to: NodeId, msg: WireMessage, size: int,
               forced_delay: float | None) -> float:
        if forced_delay is not None:
            return forced_delay
        if frm == to:
            return 0.0
        if self.delay_policy is not None:
            override = self.delay_policy(frm, to, msg)
            if override is not None:
                return override
        delay = self.hops[frm][to] * self.net.base_delay
        if self.net.jitter:
            delay += self.rng.uniform(0.0, self.net.jitter)
        if self.perturb_link == (frm, to):
            delay *= 100.0
        bandwidth = self.net.bandwidth
        if frm in self._source_nodes and self.net.source_bandwidth is not None:
            bandwidth = self.net.source_bandwidth
        if bandwidth:
            transmit = size / bandwidth
            start = max(self.time, self._busy_until.get((frm, to), 0.0))
            self._busy_until[(frm, to)] = start + transmit
            delay += (start - self.time) + transmit
        return delay

    def _trace(self, event: str, node: int, frm: int, kind: str, source: int,
               h: int, size: int, depth: int) -> None:
        if not self.record_trace:
            return
        self.trace.append(TraceRow(len(self.trace), self.time, event, node,
                                   frm, kind, source, h, size, depth))


def run(world: SimWorld, workload, until: float | None = None) -> RunStats:
    """Issue a workload of (at, source, payload, h) broadcasts and drain."""
    for at, source, payload, h in workload:
        world.broadcast(source, payload, h, at=at)
    return world.run(until=until)


def causal_depth(stats: RunStats, s: NodeId, h: SeqIndex, node: NodeId) -> int:
    """Depth of the information chain behind ``node``'s delivery of (s, h)."""
    rec = stats.delivers.get((node, s, h))
    if rec is None:
        raise NotDelivered(f"node {node} did not deliver ({s}, {h})")
    return rec.depth


# -- correctness checking ----------------------------------------------------

def check_broadcast_properties(world: SimWorld) -> list[str]:
    """Validate the five broadcast properties over a quiescent run.

    1. Every broadcast by a non-faulty source is delivered by every
       non-faulty node.
    2. What a non-faulty node delivers for a non-faulty source is exactly
       what that source broadcast.
    3. No two non-faulty nodes deliver different payloads for the same
       (source, index).
    4. No node delivers the same (source, index) twice.
    5. If any non-faulty node delivers (source, index), every non-faulty
       node does.
    Returns human-readable violation descriptions (empty = clean).
    """
    violations: list[str] = []
    honest = sorted(world.honest)
    stats = world.stats
    for key in stats.double_deliveries:
        violations.append(f"integrity: node {key[0]} delivered {key[1:]} twice")
    honest_broadcasts = [(s, payload, h) for s, payload, h in world.broadcasts
                         if s in world.honest]
    for s, payload, h in honest_broadcasts:
        for i in honest:
            rec = stats.delivers.get((i, s, h))
            if rec is None:
                violations.append(
                    f"termination: node {i} never delivered ({s}, {h})")
            elif rec.payload != payload:
                violations.append(
                    f"validity: node {i} delivered a different payload for ({s}, {h})")
    pairs = {(s, h) for (i, s, h) in stats.delivers if i in world.honest}
    for s, h in sorted(pairs):
        payloads = {stats.delivers[(i, s, h)].payload
                    for i in honest if (i, s, h) in stats.delivers}
        if len(payloads) > 1:
            violations.append(
                f"agreement: honest nodes delivered {len(payloads)} payloads for ({s}, {h})")
        missing = [i for i in honest if (i, s, h) not in stats.delivers]
        if missing:
            violations.append(
                f"totality: nodes {missing} missed ({s}, {h}) delivered elsewhere")
    return violations


def check_acc_consistency(world: SimWorld) -> list[str]:
    """No honest node vouches for two digests of one (source, index), and no
    two honest nodes vouch for different ones."""
    violations: list[str] = []
    for (s, h), per_node in sorted(world.stats.acc_digests.items()):
        seen: dict[bytes, NodeId] = {}
        for node in sorted(per_node):
            if node not in world.honest:
                continue
            digests = per_node[node]
            if len(digests) > 1:
                violations.append(
                    f"acc-consistency: node {node} vouched for {len(digests)} digests of ({s}, {h})")
            for d in digests:
                if d not in seen and seen:
                    other = next(iter(seen.values()))
                    violations.append(
                        f"acc-consistency: nodes {other} and {node} vouched for different digests of ({s}, {h})")
                seen.setdefault(d, node)
    return violations
