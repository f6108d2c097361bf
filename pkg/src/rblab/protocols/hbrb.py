"""Hash-based Byzantine broadcast: quorums vote on digests, not payloads.

Only the source's MSG and the on-demand FWD carry the payload; ECHO, ACC,
and REQ carry a 32-byte digest. A node that sees a quorum form around a
digest it cannot resolve asks the quorum members for the payload (REQ) and
accepts a forwarded copy (FWD) only from nodes it asked, only if the copy
hashes to the requested digest.

HBrb3f1 runs the double-echo pattern (ECHO then ACC) and needs n >= 3f+1.
HBrb5f1 drops the ACC wave entirely: with n >= 5f+1 a single ECHO wave
amplified at n-2f already guarantees agreement, saving one hop.
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


class _HashBrb(Automaton):
    """Shared MSG / REQ / FWD plumbing for the digest-voting protocols."""

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
            actions += self.send_all(WireMessage(MsgKind.ECHO, s, h, digest=digest))
        return actions

    def on_req(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        if msg.digest is None:
            return []
        s, h = msg.source, msg.h
        if not self.st.mark_once("req", s, h, frm):
            return []
        m = self.st.find_msg(s, h, msg.digest, self.digest_of)
        if m is None:
            return []
        return [Send(frm, WireMessage(MsgKind.FWD, s, h, payload=m))]

    def on_fwd(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        if msg.payload is None:
            return []
        s, h, m = msg.source, msg.h, msg.payload
        digest = self.digest_of(m)
        if frm not in self.st.asked.get((s, digest, h), set()):
            return []
        if not self.st.mark_once("fwd", s, h, frm, digest):
            return []
        self.st.msg_set[(s, h)].add(m)
        return self.check(s, digest, h)

    def request_payload(self, s: NodeId, digest: Digest, h: SeqIndex,
                        supporters: list[NodeId]) -> list[Action]:
        """REQ the payload behind a digest from the nodes that vouched for it."""
        asked = self.st.asked[(s, digest, h)]
        targets = [j for j in supporters if j not in asked]
        asked.update(targets)
        req = WireMessage(MsgKind.REQ, s, h, digest=digest)
        return [Send(j, req) for j in targets]

    def check(self, s: NodeId, digest: Digest, h: SeqIndex) -> list[Action]:
        raise NotImplementedError


class HBrb3f1(_HashBrb):
    def on_echo(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        if msg.digest is None:
            return []
        s, h = msg.source, msg.h
        if not count_once(self.st, MsgKind.ECHO, s, msg.digest, h, frm):
            return []
        return self.check(s, msg.digest, h)

    def on_acc(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        if msg.digest is None:
            return []
        s, h, digest = msg.source, msg.h, msg.digest
        if not count_once(self.st, MsgKind.ACC, s, digest, h, frm):
            return []
        actions: list[Action] = []
        if self.st.counter(MsgKind.ACC, s, digest, h) == self.f_plus_1 \
                and self.st.find_msg(s, h, digest, self.digest_of) is None:
            supporters = self.st.supporters[(MsgKind.ACC, s, digest, h)]
            actions += self.request_payload(s, digest, h, supporters)
        actions += self.check(s, digest, h)
        return actions

    def check(self, s: NodeId, digest: Digest, h: SeqIndex) -> list[Action]:
        m = self.st.find_msg(s, h, digest, self.digest_of)
        if m is None:
            return []
        actions: list[Action] = []
        echoes = self.st.counter(MsgKind.ECHO, s, digest, h)
        accs = self.st.counter(MsgKind.ACC, s, digest, h)
        if echoes >= self.f_plus_1 and self.st.mark_sent(MsgKind.ECHO, s, h):
            actions += self.send_all(WireMessage(MsgKind.ECHO, s, h, digest=digest))
        if (echoes >= self.n_minus_f or accs >= self.f_plus_1) \
                and self.st.mark_sent(MsgKind.ACC, s, h):
            actions += self.send_all(WireMessage(MsgKind.ACC, s, h, digest=digest))
        if accs >= self.n_minus_f:
            self.deliver_once(s, m, h, actions)
        return actions


class HBrb5f1(_HashBrb):
    def on_echo(self, frm: NodeId, msg: WireMessage) -> list[Action]:
        if msg.digest is None:
            return []
        s, h, digest = msg.source, msg.h, msg.digest
        if not count_once(self.st, MsgKind.ECHO, s, digest, h, frm):
            return []
        actions: list[Action] = []
        if self.st.counter(MsgKind.ECHO, s, digest, h) == self.f_plus_1 \
                and self.st.find_msg(s, h, digest, self.digest_of) is None:
            supporters = self.st.supporters[(MsgKind.ECHO, s, digest, h)]
            actions += self.request_payload(s, digest, h, supporters)
        actions += self.check(s, digest, h)
        return actions

    def check(self, s: NodeId, digest: Digest, h: SeqIndex) -> list[Action]:
        m = self.st.find_msg(s, h, digest, self.digest_of)
        if m is None:
            return []
        actions: list[Action] = []
        echoes = self.st.counter(MsgKind.ECHO, s, digest, h)
        if echoes >= self.n_minus_2f and self.st.mark_sent(MsgKind.ECHO, s, h):
            actions += self.send_all(WireMessage(MsgKind.ECHO, s, h, digest=digest))
        if echoes >= self.n_minus_f:
            self.deliver_once(s, m, h, actions)
        return actions
