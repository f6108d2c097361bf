"""Wire messages, the envelope byte format, and per-node protocol state.

Envelope layout (all integers big-endian):

    offset  size  field
    0       1     kind        (MSG=1 ECHO=2 ACC=3 REQ=4 FWD=5 HASH_RB=6)
    1       1     variant     (PAYLOAD=1 DIGEST=2 ELEMENT=3
                               DIGEST_ELEMENT=4 PAYLOAD_DIGEST=5)
    2       1     instance    (0 = top level, 1 = nested hash broadcast)
    3       2     source      broadcasting node id
    5       4     h           per-source sequence index
    9       4     body length
    13      ...   body

Body encodings by variant: PAYLOAD is raw bytes; DIGEST is exactly 32
bytes; ELEMENT is index(1) + claimed_len(4) + shard bytes; DIGEST_ELEMENT
is a digest followed by an element; PAYLOAD_DIGEST is a digest followed by
raw payload bytes. Each kind admits a fixed set of variants; anything else
is malformed.
"""
from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass
from enum import IntEnum

from . import hashing
from .codec import CodedElement, ELEMENT_OVERHEAD, parse_element, serialize_element

NodeId = int
SeqIndex = int
Payload = bytes
Digest = bytes


class MalformedEnvelope(ValueError):
    """Raised when bytes do not parse as a valid envelope."""


class MsgKind(IntEnum):
    MSG = 1
    ECHO = 2
    ACC = 3
    REQ = 4
    FWD = 5
    HASH_RB = 6


class BodyVariant(IntEnum):
    PAYLOAD = 1
    DIGEST = 2
    ELEMENT = 3
    DIGEST_ELEMENT = 4
    PAYLOAD_DIGEST = 5


# Which body shapes each message kind may legally carry.
KIND_VARIANTS: dict[MsgKind, frozenset[BodyVariant]] = {
    MsgKind.MSG: frozenset({BodyVariant.PAYLOAD, BodyVariant.ELEMENT,
                            BodyVariant.DIGEST_ELEMENT}),
    MsgKind.ECHO: frozenset({BodyVariant.PAYLOAD, BodyVariant.DIGEST,
                             BodyVariant.ELEMENT, BodyVariant.DIGEST_ELEMENT}),
    MsgKind.ACC: frozenset({BodyVariant.PAYLOAD, BodyVariant.DIGEST}),
    MsgKind.REQ: frozenset({BodyVariant.DIGEST}),
    MsgKind.FWD: frozenset({BodyVariant.PAYLOAD, BodyVariant.PAYLOAD_DIGEST}),
    MsgKind.HASH_RB: frozenset({BodyVariant.PAYLOAD}),
}

_HEADER = struct.Struct(">BBBHII")
HEADER_SIZE = _HEADER.size

_INSTANCE_CODES = {None: 0, "hash-rb": 1}
_INSTANCE_NAMES = {v: k for k, v in _INSTANCE_CODES.items()}


@dataclass(frozen=True)
class WireMessage:
    """One protocol message. The populated optional fields determine the
    body variant: payload only, digest only, element only, digest+element,
    or payload+digest."""

    kind: MsgKind
    source: NodeId
    h: SeqIndex
    payload: Payload | None = None
    digest: Digest | None = None
    element: CodedElement | None = None
    instance: str | None = None

    def variant(self) -> BodyVariant:
        has = (self.payload is not None, self.digest is not None,
               self.element is not None)
        match has:
            case (True, False, False):
                return BodyVariant.PAYLOAD
            case (False, True, False):
                return BodyVariant.DIGEST
            case (False, False, True):
                return BodyVariant.ELEMENT
            case (False, True, True):
                return BodyVariant.DIGEST_ELEMENT
            case (True, True, False):
                return BodyVariant.PAYLOAD_DIGEST
        raise MalformedEnvelope(f"no body variant for fields {has}")


def _body_size(msg: WireMessage) -> int:
    variant = msg.variant()
    size = 0
    if variant in (BodyVariant.DIGEST, BodyVariant.DIGEST_ELEMENT,
                   BodyVariant.PAYLOAD_DIGEST):
        size += hashing.DIGEST_SIZE
    if variant in (BodyVariant.ELEMENT, BodyVariant.DIGEST_ELEMENT):
        size += ELEMENT_OVERHEAD + len(msg.element.data)
    if variant in (BodyVariant.PAYLOAD, BodyVariant.PAYLOAD_DIGEST):
        size += len(msg.payload)
    return size


def envelope_size(msg: WireMessage) -> int:
    """Exact serialized size without building the bytes."""
    return HEADER_SIZE + _body_size(msg)


def encode_envelope(msg: WireMessage) -> bytes:
    """Serialize; injective over valid messages and self-delimiting."""
    variant = msg.variant()
    if variant not in KIND_VARIANTS[msg.kind]:
        raise MalformedEnvelope(f"{msg.kind.name} cannot carry {variant.name}")
    if msg.digest is not None and len(msg.digest) != hashing.DIGEST_SIZE:
        raise MalformedEnvelope(f"digest must be {hashing.DIGEST_SIZE} bytes")
    if msg.instance not in _INSTANCE_CODES:
        raise MalformedEnvelope(f"unknown instance tag {msg.instance!r}")
    if not 0 <= msg.source <= 0xFFFF or not 0 <= msg.h <= 0xFFFFFFFF:
        raise MalformedEnvelope("source or sequence index out of range")
    parts = []
    if msg.digest is not None:
        parts.append(msg.digest)
    if msg.element is not None:
        parts.append(serialize_element(msg.element))
    if msg.payload is not None:
        parts.append(msg.payload)
    body = b"".join(parts)
    header = _HEADER.pack(msg.kind, variant, _INSTANCE_CODES[msg.instance],
                          msg.source, msg.h, len(body))
    return header + body


def decode_envelope(buf: bytes) -> WireMessage:
    """Parse one envelope; the buffer must contain exactly one."""
    if len(buf) < HEADER_SIZE:
        raise MalformedEnvelope(f"{len(buf)} bytes is shorter than the header")
    kind_b, variant_b, instance_b, source, h, body_len = _HEADER.unpack_from(buf)
    try:
        kind = MsgKind(kind_b)
        variant = BodyVariant(variant_b)
    except ValueError as exc:
        raise MalformedEnvelope(str(exc)) from None
    if instance_b not in _INSTANCE_NAMES:
        raise MalformedEnvelope(f"unknown instance code {instance_b}")
    if variant not in KIND_VARIANTS[kind]:
        raise MalformedEnvelope(f"{kind.name} cannot carry {variant.name}")
    if len(buf) != HEADER_SIZE + body_len:
        raise MalformedEnvelope(
            f"envelope declares {body_len} body bytes, buffer has {len(buf) - HEADER_SIZE}")
    body = buf[HEADER_SIZE:]
    payload = digest = element = None
    try:
        if variant in (BodyVariant.DIGEST, BodyVariant.DIGEST_ELEMENT,
                       BodyVariant.PAYLOAD_DIGEST):
            if len(body) < hashing.DIGEST_SIZE:
                raise ValueError("body shorter than a digest")
            digest, body = body[:hashing.DIGEST_SIZE], body[hashing.DIGEST_SIZE:]
        if variant in (BodyVariant.ELEMENT, BodyVariant.DIGEST_ELEMENT):
            element = parse_element(body)
            body = b""
        if variant in (BodyVariant.PAYLOAD, BodyVariant.PAYLOAD_DIGEST):
            payload, body = body, b""
        if variant == BodyVariant.DIGEST and body:
            raise ValueError("digest body has trailing bytes")
    except ValueError as exc:
        raise MalformedEnvelope(str(exc)) from None
    return WireMessage(kind=kind, source=source, h=h, payload=payload,
                       digest=digest, element=element,
                       instance=_INSTANCE_NAMES[instance_b])


@dataclass(frozen=True)
class BroadcastRequest:
    """Ask the local node to broadcast ``payload`` under sequence ``h``."""

    payload: Payload
    h: SeqIndex


@dataclass(frozen=True)
class Receive:
    """A message arriving from transport-authenticated sender ``frm``
    (which may differ from msg.source)."""

    frm: NodeId
    msg: WireMessage


Event = BroadcastRequest | Receive


@dataclass(frozen=True)
class Send:
    to: NodeId
    msg: WireMessage


@dataclass(frozen=True)
class Deliver:
    source: NodeId
    payload: Payload
    h: SeqIndex


Action = Send | Deliver


class InstanceState:
    """A node's bookkeeping across all (source, h) broadcast instances.

    Quorum counting is sender-deduplicated per (kind, source, h): a sender
    contributes to at most one digest per kind and instance, so the dedupe
    key deliberately omits the digest. The per-digest supporter lists keep
    arrival order so threshold-triggered requests go to the exact senders
    that crossed the threshold.
    """

    def __init__(self) -> None:
        self.msg_set: dict[tuple, set[bytes]] = defaultdict(set)
        self.code_set: dict[tuple, set[CodedElement]] = defaultdict(set)
        self.hash_set: dict[tuple, set[bytes]] = defaultdict(set)
        self.supporters: dict[tuple, list[NodeId]] = defaultdict(list)
        self.counted: dict[tuple, set[NodeId]] = defaultdict(set)
        self.sent_flags: set[tuple] = set()
        self.asked: dict[tuple, set[NodeId]] = defaultdict(set)
        self.delivered: set[tuple] = set()
        self.seen: set[tuple] = set()

    def counter(self, kind: MsgKind, s: NodeId, digest: Digest, h: SeqIndex) -> int:
        return len(self.supporters[(kind, s, digest, h)])

    def find_msg(self, s: NodeId, h: SeqIndex, digest: Digest, digest_fn) -> bytes | None:
        for m in self.msg_set[(s, h)]:
            if digest_fn(m) == digest:
                return m
        return None

    def mark_sent(self, kind: MsgKind, s: NodeId, h: SeqIndex) -> bool:
        """True the first time; False once already sent for this instance."""
        flag = (kind, s, h)
        if flag in self.sent_flags:
            return False
        self.sent_flags.add(flag)
        return True

    def has_sent(self, kind: MsgKind, s: NodeId, h: SeqIndex) -> bool:
        return (kind, s, h) in self.sent_flags

    def mark_once(self, *key) -> bool:
        if key in self.seen:
            return False
        self.seen.add(key)
        return True


def count_once(state: InstanceState, kind: MsgKind, s: NodeId, digest: Digest,
               h: SeqIndex, sender: NodeId) -> bool:
    """Count ``sender``'s vote for ``digest`` once per (kind, s, h).

    Returns True when the counter advanced, False when this sender was
    already counted for this kind and instance under any digest.
    """
    counted = state.counted[(kind, s, h)]
    if sender in counted:
        return False
    counted.add(sender)
    state.supporters[(kind, s, digest, h)].append(sender)
    return True
