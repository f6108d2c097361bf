"""Shared machinery for the broadcast automata.

Every automaton is a pure-ish state machine: ``step(event)`` mutates only
the automaton's own bookkeeping and returns the list of Send / Deliver
actions the node performs in response. Nothing here touches a clock or a
socket, which keeps runs replayable and lets tests drive single handlers.

A node always sends to itself too (the transport loops the copy back), so
handler code never special-cases the local node: the source learns about
its own broadcast the same way everyone else does.
"""
from __future__ import annotations

from .. import hashing
from ..core import (
    Action,
    BroadcastRequest,
    Deliver,
    Digest,
    Event,
    InstanceState,
    MsgKind,
    NodeId,
    Payload,
    Receive,
    Send,
    SeqIndex,
    WireMessage,
)
from . import ProtocolConfig


class Automaton:
    """Base class: event dispatch, fan-out helpers, delivery bookkeeping."""

    def __init__(self, config: ProtocolConfig):
        config.validate()
        self.config = config
        self.n = config.n
        self.f = config.f
        self.me = config.node
        self.st = InstanceState()
        self._digest_memo: dict[bytes, Digest] = {}

    # Quorum sizes, exposed for tests and for the bench reporter.
    @property
    def f_plus_1(self) -> int:
        return self.f + 1

    @property
    def n_minus_f(self) -> int:
        return self.n - self.f

    @property
    def n_minus_2f(self) -> int:
        return self.n - 2 * self.f

    def digest_of(self, payload: Payload) -> Digest:
        memo = self._digest_memo.get(payload)
        if memo is None:
            memo = hashing.digest(payload)
            self._digest_memo[payload] = memo
        return memo

    # -- event entry point -------------------------------------------------
    def step(self, event: Event) -> list[Action]:
        if isinstance(event, BroadcastRequest):
            return self.source_sends(event.payload, event.h)
        if isinstance(event, Receive):
            name = self._HANDLERS.get(event.msg.kind)
            if name is None:
                return []
            return getattr(self, name)(event.frm, event.msg)
        raise TypeError(f"unknown event {event!r}")

    def source_sends(self, payload: Payload, h: SeqIndex) -> list[Send]:
        """Build the source's initial sends without touching state.

        Pure by design: the source's own state updates happen when its
        loopback copies arrive, and adversary strategies reuse this builder
        to craft per-recipient splits of the initial wave.
        """
        raise NotImplementedError

    # -- handlers (override per protocol) ----------------------------------
    def on_msg(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return []

    def on_echo(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return []

    def on_acc(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return []

    def on_req(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return []

    def on_fwd(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return []

    def on_hash_rb(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return []

    _HANDLERS = {
        MsgKind.MSG: "on_msg",
        MsgKind.ECHO: "on_echo",
        MsgKind.ACC: "on_acc",
        MsgKind.REQ: "on_req",
        MsgKind.FWD: "on_fwd",
        MsgKind.HASH_RB: "on_hash_rb",
    }

    # -- action helpers -----------------------------------------------------
    def send_all(self, msg: WireMessage) -> list[Action]:
        return [Send(to, msg) for to in range(self.n)]

    def deliver_once(self, source: NodeId, payload: Payload, h: SeqIndex,
                     out: list[Action]) -> None:
        """Append a Deliver unless (source, h) was already delivered."""
        if (source, h) in self.st.delivered:
            return
        self.st.delivered.add((source, h))
        out.append(Deliver(source, payload, h))
