"""Minimal RLP encoding/decoding and contract-address derivation."""

from __future__ import annotations

from .keccak import keccak256
from .words import ADDR_MASK, Address, address_to_bytes


def encode_int(n: int) -> bytes:
    """Minimal big-endian byte representation (0 -> empty string)."""
    if n < 0:
        raise ValueError("RLP cannot encode negative integers")
    if n == 0:
        return b""
    return n.to_bytes((n.bit_length() + 7) // 8, "big")


def encode(item) -> bytes:
    """Encode bytes, ints, or (nested) lists of them."""
    if isinstance(item, int):
        item = encode_int(item)
    if isinstance(item, (bytes, bytearray)):
        item = bytes(item)
        if len(item) == 1 and item[0] < 0x80:
            return item
        return _length_prefix(len(item), 0x80) + item
    if isinstance(item, (list, tuple)):
        payload = b"".join(encode(x) for x in item)
        return _length_prefix(len(payload), 0xC0) + payload
    raise TypeError(f"cannot RLP-encode {type(item).__name__}")


def _length_prefix(length: int, offset: int) -> bytes:
    if length < 56:
        return bytes([offset + length])
    l_bytes = encode_int(length)
    return bytes([offset + 55 + len(l_bytes)]) + l_bytes


def decode(data: bytes):
    """Inverse of encode; returns bytes or nested lists of bytes."""
    item, rest = _decode_item(bytes(data))
    if rest:
        raise ValueError("trailing bytes after RLP item")
    return item


def _decode_item(data: bytes):
    if not data:
        raise ValueError("empty RLP input")
    b0 = data[0]
    if b0 < 0x80:
        return data[:1], data[1:]
    if b0 < 0xB8:
        n = b0 - 0x80
        payload = data[1:1 + n]
        if len(payload) != n:
            raise ValueError("short RLP string")
        if n == 1 and payload[0] < 0x80:
            raise ValueError("non-canonical single byte")
        return payload, data[1 + n:]
    if b0 < 0xC0:
        ln = b0 - 0xB7
        n = int.from_bytes(data[1:1 + ln], "big")
        payload = data[1 + ln:1 + ln + n]
        if len(payload) != n:
            raise ValueError("short RLP string")
        return payload, data[1 + ln + n:]
    if b0 < 0xF8:
        n = b0 - 0xC0
        payload = data[1:1 + n]
        if len(payload) != n:
            raise ValueError("short RLP list")
        return _decode_list(payload), data[1 + n:]
    ln = b0 - 0xF7
    n = int.from_bytes(data[1:1 + ln], "big")
    payload = data[1 + ln:1 + ln + n]
    if len(payload) != n:
        raise ValueError("short RLP list")
    return _decode_list(payload), data[1 + ln + n:]


def _decode_list(payload: bytes) -> list:
    items = []
    while payload:
        item, payload = _decode_item(payload)
        items.append(item)
    return items


def rlp_encode_pair(address: Address, nonce: int) -> bytes:
    """Canonical RLP list of (20-byte address, minimal big-endian nonce)."""
    if nonce >= 2**256:
        raise ValueError("nonce out of range")
    return encode([address_to_bytes(address), nonce])


def fresh_address(creator: Address, nonce: int) -> Address:
    """Address of an account created by `creator` whose nonce is `nonce`.

    The low 160 bits of keccak256(rlp((creator, nonce - 1))); nonce 0 is
    clamped so the function stays total.
    """
    return keccak256(rlp_encode_pair(creator, max(nonce - 1, 0))) & ADDR_MASK
