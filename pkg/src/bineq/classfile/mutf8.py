"""Strict modified UTF-8 as used by CONSTANT_Utf8_info.

Decoding keeps surrogate pairs as two separate code points so that
decode/encode is a bijection on the accepted byte strings.
"""

from __future__ import annotations


class MutfError(ValueError):
    pass


def decode(raw: bytes) -> str:
    if raw.isascii():
        if b"\x00" in raw:
            raise MutfError("NUL byte in modified UTF-8")
        return raw.decode("ascii")
    if b"\x00" in raw:
        raise MutfError("NUL byte in modified UTF-8")
    if max(raw) >= 0xF0:
        raise MutfError("4-byte sequence in modified UTF-8")
    parts = raw.split(b"\xc0\x80")
    try:
        # the utf-8 codec rejects overlong forms; surrogatepass admits
        # the 3-byte surrogate halves that modified UTF-8 uses
        return "\x00".join(p.decode("utf-8", "surrogatepass") for p in parts)
    except UnicodeDecodeError as exc:
        raise MutfError(str(exc)) from None


def _split_supplementary(text: str) -> str:
    out = []
    for ch in text:
        cp = ord(ch)
        if cp > 0xFFFF:
            cp -= 0x10000
            out.append(chr(0xD800 + (cp >> 10)))
            out.append(chr(0xDC00 + (cp & 0x3FF)))
        else:
            out.append(ch)
    return "".join(out)


def encode(text: str) -> bytes:
    if text.isascii():
        raw = text.encode("ascii")
    else:
        if any(ord(ch) > 0xFFFF for ch in text):
            text = _split_supplementary(text)
        raw = text.encode("utf-8", "surrogatepass")
    if b"\x00" in raw:
        raw = raw.replace(b"\x00", b"\xc0\x80")
    return raw
