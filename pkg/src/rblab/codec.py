"""Maximum-distance-separable erasure coding over GF(2^8).

The code is systematic: a payload of L bytes is split into k equal shards
(zero-padded), shards 1..k are the raw data, and shards k+1..n extend the
unique degree-<k polynomial through the data evaluations. Any k distinct
shards reconstruct the payload; with k = n-3f the minimum distance n-k+1
also supports decoding through f corrupted shards, and a decoder that
cross-checks every candidate against the whole input can flag inputs where
no single codeword explains what it received.

All shard arithmetic runs on numpy uint8 arrays through exp/log tables for
the field generated by x^8 + x^4 + x^3 + x^2 + 1.
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

GF_ORDER = 256
_PRIM = 0x11D


class CodecError(Exception):
    """Base class for coding failures."""


class InvalidParams(CodecError):
    """Code parameters are out of range or inconsistent."""


class NotEnoughElements(CodecError):
    """Fewer elements than the operation's minimum input size."""


class InconsistentIndices(CodecError):
    """Duplicate indices or mismatched shard shapes in the input."""


class FaultBudgetTooLarge(CodecError):
    """The subset search space exceeds the configured cap."""


def _build_tables() -> tuple[list[int], list[int]]:
    exp = [0] * 510
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= _PRIM
    for i in range(255, 510):
        exp[i] = exp[i - 255]
    return exp, log


_EXP_LIST, _LOG_LIST = _build_tables()
_EXP = np.array(_EXP_LIST + [0] * 2, dtype=np.uint8)
_LOG = np.array(_LOG_LIST, dtype=np.int16)


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP_LIST[_LOG_LIST[a] + _LOG_LIST[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse for 0 in GF(256)")
    return _EXP_LIST[255 - _LOG_LIST[a]]


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


def gf_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Multiply matrices over GF(256); a is (r, k), b is (k, w)."""
    la = _LOG[a][:, :, None]
    lb = _LOG[b][None, :, :]
    prod = _EXP[la + lb]
    mask = (a[:, :, None] == 0) | (b[None, :, :] == 0)
    return np.bitwise_xor.reduce(np.where(mask, 0, prod), axis=1)


@dataclass(frozen=True)
class CodeParams:
    """An [n, k] code: n total shards, any k of them reconstruct."""

    n: int
    k: int

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise InvalidParams(f"need 1 <= k <= n, got k={self.k} n={self.n}")
        if self.n > GF_ORDER - 1:
            raise InvalidParams(f"n={self.n} exceeds the field bound {GF_ORDER - 1}")

    @property
    def distance(self) -> int:
        return self.n - self.k + 1


@dataclass(frozen=True)
class CodedElement:
    """One shard: position index in [1, n], shard bytes, and the original
    payload length the sender claims (receivers need it to unpad)."""

    index: int
    data: bytes
    claimed_len: int


_ELEMENT_HEADER = struct.Struct(">BI")
ELEMENT_OVERHEAD = _ELEMENT_HEADER.size


def serialize_element(element: CodedElement) -> bytes:
    if not 1 <= element.index <= 255:
        raise InvalidParams(f"element index {element.index} out of range")
    return _ELEMENT_HEADER.pack(element.index, element.claimed_len) + element.data


def parse_element(buf: bytes) -> CodedElement:
    if len(buf) < ELEMENT_OVERHEAD:
        raise ValueError("truncated coded element")
    index, claimed_len = _ELEMENT_HEADER.unpack_from(buf)
    if index == 0:
        raise ValueError("coded element index 0 is invalid")
    return CodedElement(index, buf[ELEMENT_OVERHEAD:], claimed_len)


def shard_width(payload_len: int, k: int) -> int:
    return (payload_len + k - 1) // k if payload_len else 0


def _lagrange_row(points: tuple[int, ...], x: int) -> list[int]:
    """Coefficients c_i with P(x) = xor_i c_i * P(points[i]) for deg < len."""
    row = []
    for i, xi in enumerate(points):
        num, den = 1, 1
        for j, xj in enumerate(points):
            if i == j:
                continue
            num = gf_mul(num, x ^ xj)
            den = gf_mul(den, xi ^ xj)
        row.append(gf_div(num, den))
    return row


@lru_cache(maxsize=None)
def _generator_matrix(n: int, k: int) -> np.ndarray:
    """Rows 1..n of the systematic generator: row j maps data shards to the
    shard at position j. Rows 1..k are unit vectors."""
    data_points = tuple(range(1, k + 1))
    rows = []
    for j in range(1, n + 1):
        if j <= k:
            rows.append([1 if i == j - 1 else 0 for i in range(k)])
        else:
            rows.append(_lagrange_row(data_points, j))
    return np.array(rows, dtype=np.uint8)


@lru_cache(maxsize=None)
def _decode_matrix(n: int, k: int, positions: tuple[int, ...]) -> np.ndarray:
    """Inverse of the generator rows at ``positions``; maps those shards
    back to the data shards."""
    g = _generator_matrix(n, k)
    m = [[int(g[p - 1][c]) for c in range(k)] for p in positions]
    inv = [[1 if r == c else 0 for c in range(k)] for r in range(k)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if m[r][col]), None)
        if pivot is None:
            raise InvalidParams(f"positions {positions} do not span the code")
        m[col], m[pivot] = m[pivot], m[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        scale = gf_inv(m[col][col])
        m[col] = [gf_mul(v, scale) for v in m[col]]
        inv[col] = [gf_mul(v, scale) for v in inv[col]]
        for r in range(k):
            if r != col and m[r][col]:
                factor = m[r][col]
                m[r] = [v ^ gf_mul(factor, w) for v, w in zip(m[r], m[col])]
                inv[r] = [v ^ gf_mul(factor, w) for v, w in zip(inv[r], inv[col])]
    return np.array(inv, dtype=np.uint8)


def encode(payload: bytes, params: CodeParams) -> list[CodedElement]:
    """Split ``payload`` into n coded elements, any k of which rebuild it."""
    n, k = params.n, params.k
    width = shard_width(len(payload), k)
    padded = payload.ljust(k * width, b"\0")
    shards = np.frombuffer(padded, dtype=np.uint8).reshape(k, width)
    if n > k and width:
        parity = gf_matmul(_generator_matrix(n, k)[k:], shards)
    else:
        parity = np.zeros((n - k, width), dtype=np.uint8)
    out = [CodedElement(i + 1, shards[i].tobytes(), len(payload)) for i in range(k)]
    out += [CodedElement(k + 1 + j, parity[j].tobytes(), len(payload)) for j in range(n - k)]
    return out


def _check_shapes(elements, params: CodeParams, payload_len: int) -> int:
    width = shard_width(payload_len, params.k)
    for e in elements:
        if not 1 <= e.index <= params.n:
            raise InconsistentIndices(f"element index {e.index} outside [1, {params.n}]")
        if len(e.data) != width:
            raise InconsistentIndices(
                f"element {e.index} has {len(e.data)} bytes, want {width}")
    return width


def decode_erasure(elements, params: CodeParams, payload_len: int) -> bytes:
    """Rebuild the payload from any k distinct, uncorrupted elements."""
    elements = sorted(elements, key=lambda e: e.index)
    if len(elements) < params.k:
        raise NotEnoughElements(f"{len(elements)} elements, need {params.k}")
    indices = [e.index for e in elements]
    if len(set(indices)) != len(indices):
        raise InconsistentIndices(f"duplicate indices in {indices}")
    width = _check_shapes(elements, params, payload_len)
    chosen = elements[: params.k]
    if not width:
        return b""
    values = np.stack([np.frombuffer(e.data, dtype=np.uint8) for e in chosen])
    dec = _decode_matrix(params.n, params.k, tuple(e.index for e in chosen))
    data = gf_matmul(dec, values)
    return data.tobytes()[:payload_len]


def decode_correcting(elements, params: CodeParams, f: int, payload_len: int) -> bytes | None:
    """Decode through at most f corrupted elements, or report detection.

    Requires k = n - 3f. Returns the payload when exactly one codeword lies
    within the corruption budget of the input, and None when none does or
    when the input is ambiguous (which can only happen past the budget).
    Duplicate indices with conflicting bytes void that position; elements
    of the wrong shard width are discarded individually.
    """
    n, k = params.n, params.k
    if k != n - 3 * f:
        raise InvalidParams(f"error correction needs k = n - 3f, got k={k} n={n} f={f}")
    if len(elements) < n - f:
        raise NotEnoughElements(f"{len(elements)} elements, need {n - f}")
    width = shard_width(payload_len, k)
    by_pos: dict[int, bytes] = {}
    voided: set[int] = set()
    for e in elements:
        if not 1 <= e.index <= n or len(e.data) != width:
            continue
        if e.index in voided:
            continue
        prior = by_pos.get(e.index)
        if prior is None:
            by_pos[e.index] = e.data
        elif prior != e.data:
            del by_pos[e.index]
            voided.add(e.index)
    positions = sorted(by_pos)
    if len(positions) < k:
        return None
    if not width:
        return b""
    received = np.stack([np.frombuffer(by_pos[p], dtype=np.uint8) for p in positions])
    pos_rows = np.array([p - 1 for p in positions])
    gen = _generator_matrix(n, k)
    # Any codeword within budget agrees with all but at most f positions,
    # so it is reachable from some k-subset of the first k+f positions.
    window = positions[: k + f]
    unique = n - len(positions) <= f
    candidates: dict[bytes, bytes] = {}
    for subset in itertools.combinations(window, k):
        sub_rows = np.stack([received[positions.index(p)] for p in subset])
        data = gf_matmul(_decode_matrix(n, k, subset), sub_rows)
        codeword = gf_matmul(gen, data)
        mismatches = int((codeword[pos_rows] != received).any(axis=1).sum())
        if mismatches <= f:
            payload = data.tobytes()[:payload_len]
            if unique:
                return payload
            candidates[data.tobytes()] = payload
            if len(candidates) > 1:
                return None
    if len(candidates) == 1:
        return next(iter(candidates.values()))
    return None


class SubsetDecoder:
    """Incremental search for a k-subset of elements whose decode matches a
    target digest.

    Elements arrive one at a time; each arrival tries only the subsets that
    contain it. Used when k = f+1 and the set may hold up to f garbage
    elements alongside the genuine ones.
    """

    def __init__(self, params: CodeParams, target, payload_len: int,
                 digest_fn, cap: int = 10**6):
        self.params = params
        self.target = target
        self.payload_len = payload_len
        self.digest_fn = digest_fn
        self.cap = cap
        self.elements: list[CodedElement] = []
        self._seen: set[tuple[int, bytes]] = set()
        self.found: bytes | None = None

    def add(self, element: CodedElement) -> bytes | None:
        """Fold one element in; returns the payload once a subset matches."""
        if self.found is not None:
            return self.found
        key = (element.index, element.data)
        if key in self._seen:
            return None
        if len(element.data) != shard_width(self.payload_len, self.params.k):
            return None
        self._seen.add(key)
        self.elements.append(element)
        if math.comb(len(self.elements), self.params.k) > self.cap:
            raise FaultBudgetTooLarge(
                f"{len(self.elements)} elements make more than {self.cap} subsets")
        k = self.params.k
        if len(self.elements) < k:
            return None
        prior = self.elements[:-1]
        for combo in itertools.combinations(prior, k - 1):
            subset = list(combo) + [element]
            if len({e.index for e in subset}) != k:
                continue
            try:
                payload = decode_erasure(subset, self.params, self.payload_len)
            except CodecError:
                continue
            if self.digest_fn(payload) == self.target:
                self.found = payload
                return payload
        return None


def subset_search_decode(codeset, target, f: int, params: CodeParams,
                         payload_len: int, digest_fn, cap: int = 10**6) -> bytes | None:
    """Search all (f+1)-subsets of ``codeset`` for one that decodes to a
    payload matching ``target``. Requires params.k == f + 1."""
    if params.k != f + 1:
        raise InvalidParams(f"subset search needs k = f+1, got k={params.k} f={f}")
    decoder = SubsetDecoder(params, target, payload_len, digest_fn, cap)
    for element in sorted(codeset, key=lambda e: (e.index, e.data)):
        found = decoder.add(element)
        if found is not None:
            return found
    return None
