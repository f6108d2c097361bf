"""Digest helper: fixed vectors, determinism, and pluggability."""
import hashlib

import pytest

from rblab import hashing

# Well-known SHA-256 test vector for the empty string.
SHA256_EMPTY = bytes.fromhex(
    "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")


def test_empty_input_matches_published_sha256_vector():
    assert hashing.digest(b"") == SHA256_EMPTY


def test_digest_matches_hashlib_and_is_digest_size():
    for payload in (b"x", b"hello world", bytes(range(256))):
        expected = hashlib.sha256(payload).digest()
        assert hashing.digest(payload) == expected
        assert len(hashing.digest(payload)) == hashing.DIGEST_SIZE


def test_digest_is_deterministic_and_collision_free_on_distinct_inputs():
    seen = {}
    for i in range(200):
        payload = i.to_bytes(4, "big")
        d = hashing.digest(payload)
        assert hashing.digest(payload) == d
        assert d not in seen
        seen[d] = payload


def test_digest_function_is_pluggable():
    calls = []

    def fake(data: bytes) -> bytes:
        calls.append(data)
        return b"\x42" * hashing.DIGEST_SIZE

    hashing.set_digest_fn(fake)
    try:
        assert hashing.digest(b"abc") == b"\x42" * hashing.DIGEST_SIZE
        assert calls == [b"abc"]
    finally:
        hashing.reset_digest_fn()
    assert hashing.digest(b"abc") == hashlib.sha256(b"abc").digest()


def test_wrong_size_output_is_rejected_at_call_time():
    hashing.set_digest_fn(lambda data: b"short")
    try:
        with pytest.raises(ValueError):
            hashing.digest(b"abc")
    finally:
        hashing.reset_digest_fn()
