"""Bracha's double-echo broadcast carrying the full payload end to end.

Three waves: the source's MSG, an ECHO wave, and an ACC wave. A node
echoes after the source's MSG or after f+1 matching ECHOs, accepts after
n-f ECHOs or f+1 ACCs, and delivers after n-f ACCs. Every message carries
the whole payload, so nodes never have to fetch it separately; internally
the tallies are keyed by payload digest so equivocating sources split
their support instead of pooling it.
"""
from __future__ import annotations

from ..core import (
    Action,
    Digest,
    MsgKind,
    NodeId,
    Payload,
    Send,
    SeqIndex,
    WireMessage,
    count_once,
)
from .base import Automaton


class Bracha(Automaton):
    def source_sends(self, payload: Payload, h: SeqIndex) -> list[Send]:
        msg = WireMessage(MsgKind.MSG, self.me, h, payload=payload)
        return self.send_all(msg)

    def on_msg(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        if frm != msg.source or msg.payload is None:
            return []
        if not self.st.mark_once("msg", msg.source, msg.h):
            return []
        s, h, m = msg.source, msg.h, msg.payload
        self.st.msg_set[(s, h)].add(m)
        digest = self.digest_of(m)
        count_once(self.st, MsgKind.ECHO, s, digest, h, self.me)
        actions: list[Action] = []
        if self.st.mark_sent(MsgKind.ECHO, s, h):
            actions += self.send_all(WireMessage(MsgKind.ECHO, s, h, payload=m))
        return actions

    def on_echo(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return self._tally(frm, msg, MsgKind.ECHO)

    def on_acc(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        return self._tally(frm, msg, MsgKind.ACC)

    def _tally(self, frm: NodeId, msg: WireMessage, kind: MsgKind) -> list[Action]:
        if msg.payload is None:
            return []
        s, h, m = msg.source, msg.h, msg.payload
        self.st.msg_set[(s, h)].add(m)
        if not count_once(self.st, kind, s, self.digest_of(m), h, frm):
            return []
        return self.check(s, self.digest_of(m), h)

    def check(self, s: NodeId, digest: Digest, h: SeqIndex) -> list[Action]:
        m = self.st.find_msg(s, h, digest, self.digest_of)
        if m is None:
            return []
        actions: list[Action] = []
        echoes = self.st.counter(MsgKind.ECHO, s, digest, h)
        accs = self.st.counter(MsgKind.ACC, s, digest, h)
        if echoes >= self.f_plus_1 and self.st.mark_sent(MsgKind.ECHO, s, h):
            actions += self.send_all(WireMessage(MsgKind.ECHO, s, h, payload=m))
        if (echoes >= self.n_minus_f or accs >= self.f_plus_1) \
                and self.st.mark_sent(MsgKind.ACC, s, h):
            actions += self.send_all(WireMessage(MsgKind.ACC, s, h, payload=m))
        if accs >= self.n_minus_f:
            self.deliver_once(s, m, h, actions)
        return actions
