"""TLSH locality-sensitive hash, 128 buckets with a 1-byte checksum.

Digests are bit-compatible with the reference implementation: the same
Pearson table, bucket triplets, quartile coding and distance function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputTooShort, InsufficientComplexity, TlshError

MIN_LENGTH = 50
BUCKETS = 128
CODE_SIZE = 32
HEX_LENGTH = 70

V_TABLE = bytes([
    1, 87, 49, 12, 176, 178, 102, 166, 121, 193, 6, 84, 249, 230, 44, 163,
    14, 197, 213, 181, 161, 85, 218, 80, 64, 239, 24, 226, 236, 142, 38, 200,
    110, 177, 104, 103, 141, 253, 255, 50, 77, 101, 81, 18, 45, 96, 31, 222,
    25, 107, 190, 70, 86, 237, 240, 34, 72, 242, 20, 214, 244, 227, 149, 235,
    97, 234, 57, 22, 60, 250, 82, 175, 208, 5, 127, 199, 111, 62, 135, 248,
    174, 169, 211, 58, 66, 154, 106, 195, 245, 171, 17, 187, 182, 179, 0, 243,
    132, 56, 148, 75, 128, 133, 158, 100, 130, 126, 91, 13, 153, 246, 216, 219,
    119, 68, 223, 78, 83, 88, 201, 99, 122, 11, 92, 32, 136, 114, 52, 10,
    138, 30, 48, 183, 156, 35, 61, 26, 143, 74, 251, 94, 129, 162, 63, 152,
    170, 7, 115, 167, 241, 206, 3, 150, 55, 59, 151, 220, 90, 53, 23, 131,
    125, 173, 15, 238, 79, 95, 89, 16, 105, 137, 225, 224, 217, 160, 37, 123,
    118, 73, 2, 157, 46, 116, 9, 145, 134, 228, 207, 212, 202, 215, 69, 229,
    27, 188, 67, 124, 168, 252, 42, 4, 29, 108, 21, 247, 19, 205, 39, 203,
    233, 40, 186, 147, 198, 192, 155, 33, 164, 191, 98, 204, 165, 180, 117, 76,
    140, 36, 210, 172, 41, 54, 159, 8, 185, 232, 113, 196, 231, 47, 146, 120,
    51, 65, 28, 144, 254, 221, 93, 189, 194, 139, 112, 43, 71, 109, 184, 209,
])

_T = np.frombuffer(V_TABLE, dtype=np.uint8)
# (salt, index of first partner, index of second partner); 0 is the newest byte
_TRIPLETS = ((2, 1, 2), (3, 1, 3), (5, 2, 3), (7, 2, 4), (11, 1, 4), (13, 3, 4))
_PAIR_CACHE: dict[int, np.ndarray] = {}


def _pair_table(salt: int) -> np.ndarray:
    """``table[a << 8 | b] == T[T[T[salt] ^ a] ^ b]`` for all byte pairs."""
    table = _PAIR_CACHE.get(salt)
    if table is None:
        first = _T[np.arange(256, dtype=np.uint8) ^ V_TABLE[salt]]
        table = _T[first[:, None] ^ np.arange(256, dtype=np.uint8)[None, :]].reshape(-1)
        _PAIR_CACHE[salt] = table
    return table


def _lvalue(length: int) -> int:
    if length <= 656:
        v = math.floor(math.log(length) / math.log(1.5))
    elif length <= 3199:
        v = math.floor(math.log(length) / math.log(1.3) - 8.72777)
    else:
        v = math.floor(math.log(length) / math.log(1.1) - 62.5472)
    return v & 0xFF


def _mod_diff(x: int, y: int, r: int) -> int:
    d = abs(x - y)
    return min(d, r - d)


@dataclass(frozen=True)
class TlshDigest:
    checksum: int
    lvalue: int
    q1_ratio: int
    q2_ratio: int
    body: bytes  # 32 bytes in hex-form order (bucket 127 first)

    def __post_init__(self):
        if len(self.body) != CODE_SIZE:
            raise TlshError(f"digest body must be {CODE_SIZE} bytes")

    @property
    def hex(self) -> str:
        def swap(b: int) -> str:
            return f"{((b & 0x0F) << 4) | (b >> 4):02x}"

        q = (self.q1_ratio << 4) | self.q2_ratio
        return swap(self.checksum) + swap(self.lvalue) + f"{q:02x}" + self.body.hex()

    def __str__(self) -> str:
        return self.hex

    @classmethod
    def from_hex(cls, text: str) -> "TlshDigest":
        if text[:2] in ("T1", "t1"):
            text = text[2:]
        if len(text) != HEX_LENGTH:
            raise TlshError(f"digest must be {HEX_LENGTH} hex characters, got {len(text)}")
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise TlshError(f"invalid digest hex: {exc}") from None

        def swap(b: int) -> int:
            return ((b & 0x0F) << 4) | (b >> 4)

        return cls(swap(raw[0]), swap(raw[1]), raw[2] >> 4, raw[2] & 0x0F, raw[3:])


def bucket_counts(data: bytes) -> tuple[np.ndarray, int]:
    """Return the 256 bucket counts and the 1-byte checksum of ``data``."""
    a = np.frombuffer(bytes(data), dtype=np.uint8)
    n = len(a)
    window = [a[4 - k:n - k].astype(np.intp) for k in range(5)]
    c0 = window[0] << 8
    counts = np.zeros(256, dtype=np.int64)
    for salt, p, q in _TRIPLETS:
        idx = _pair_table(salt)[c0 | window[p]] ^ window[q]
        counts += np.bincount(_T[idx], minlength=256)
    checksum = 0
    table = V_TABLE
    for v in _pair_table(0)[c0 | window[1]].tobytes():
        checksum = table[v ^ checksum]
    return counts, checksum


def tlsh_hash(data: bytes) -> TlshDigest:
    """Compute the TLSH digest of ``data``."""
    if len(data) < MIN_LENGTH:
        raise InputTooShort(f"TLSH needs at least {MIN_LENGTH} bytes, got {len(data)}")
    counts, checksum = bucket_counts(data)
    buckets = counts[:BUCKETS]
    ordered = np.sort(buckets)
    q1, q2, q3 = int(ordered[31]), int(ordered[63]), int(ordered[95])
    nonzero = int(np.count_nonzero(buckets))
    if q3 == 0 or nonzero <= 4 * CODE_SIZE // 2:
        raise InsufficientComplexity("input has too little byte variety for TLSH")
    codes = np.where(buckets > q3, 3, np.where(buckets > q2, 2, np.where(buckets > q1, 1, 0)))
    codes = codes.reshape(CODE_SIZE, 4)
    packed = codes[:, 0] | (codes[:, 1] << 2) | (codes[:, 2] << 4) | (codes[:, 3] << 6)
    body = bytes(int(b) for b in packed[::-1])
    q1_ratio = int(np.float32(q1 * 100) / np.float32(q3)) % 16
    q2_ratio = int(np.float32(q2 * 100) / np.float32(q3)) % 16
    return TlshDigest(checksum, _lvalue(len(data)), q1_ratio, q2_ratio, body)


_DIFF: dict[tuple[int, int], int] = {}


def _body_distance(a: bytes, b: bytes) -> int:
    total = 0
    for x, y in zip(a, b):
        if x == y:
            continue
        d = _DIFF.get((x, y))
        if d is None:
            d = 0
            for shift in (0, 2, 4, 6):
                k = abs(((x >> shift) & 3) - ((y >> shift) & 3))
                d += 6 if k == 3 else k
            _DIFF[(x, y)] = d
        total += d
    return total


def tlsh_distance(a: TlshDigest, b: TlshDigest, include_length: bool = True) -> int:
    """Distance between two digests, by default including the length term."""
    diff = 0
    ldiff = _mod_diff(a.lvalue, b.lvalue, 256) if include_length else 0
    if ldiff == 1:
        diff = 1
    elif ldiff > 1:
        diff = ldiff * 12
    for qa, qb in ((a.q1_ratio, b.q1_ratio), (a.q2_ratio, b.q2_ratio)):
        qd = _mod_diff(qa, qb, 16)
        diff += qd if qd <= 1 else (qd - 1) * 12
    if a.checksum != b.checksum:
        diff += 1
    return diff + _body_distance(a.body, b.body)


@dataclass(frozen=True)
class TlshVerdict:
    equivalent: bool
    distance: int | None
    error: str | None = None

    def __bool__(self) -> bool:
        return self.equivalent


def tlsh_equivalent(b1: bytes, b2: bytes, tau: int) -> TlshVerdict:
    """Similarity verdict; hashing failures count as non-equivalent."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    try:
        d = tlsh_distance(tlsh_hash(b1), tlsh_hash(b2))
    except TlshError as exc:
        return TlshVerdict(False, None, type(exc).__name__)
    return TlshVerdict(d <= tau, d)
