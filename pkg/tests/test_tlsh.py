from __future__ import annotations

import base64
import json
import os
import random

import pytest

from bineq.classfile import parse_class, serialize_class
from bineq.errors import InputTooShort, InsufficientComplexity, TlshError
from bineq.testkit import reorder_members
from bineq.tlsh import HEX_LENGTH, MIN_LENGTH, TlshDigest, tlsh_distance, tlsh_equivalent, tlsh_hash

VECTORS = os.path.join(os.path.dirname(__file__), "data", "tlsh_vectors.json")

# a ≈ b and b ≈ c but a ≉ c at τ=10; distances confirmed with the reference library
WITNESS_CLASS = "META-INF/versions/15/org/bouncycastle/jcajce/provider/asymmetric/edec/KeyPairGeneratorSpi.class"
WITNESS_DISTANCES = (6, 5, 18)


def load_vectors():
    with open(VECTORS) as fh:
        return json.load(fh)


def test_reference_digests_match():
    doc = load_vectors()
    hashed = 0
    for v in doc["vectors"]:
        data = base64.b64decode(v["data"])
        if v["digest"] is None:
            with pytest.raises(TlshError):
                tlsh_hash(data)
            continue
        assert tlsh_hash(data).hex == v["digest"], v["label"]
        hashed += 1
    assert hashed >= 20


def test_reference_distances_match():
    pairs = load_vectors()["pairs"]
    assert len(pairs) >= 20
    for p in pairs:
        a = tlsh_hash(base64.b64decode(p["a"]))
        b = tlsh_hash(base64.b64decode(p["b"]))
        assert tlsh_distance(a, b) == p["distance"]
        assert tlsh_distance(a, b, include_length=False) == p["distance_no_length"]


def test_seeded_512_vector():
    data = random.Random(42).randbytes(512)
    doc = {v["label"]: v for v in load_vectors()["vectors"]}
    assert tlsh_hash(data).hex == doc["seeded-512"]["digest"]


def test_input_too_short():
    with pytest.raises(InputTooShort):
        tlsh_hash(bytes(range(MIN_LENGTH - 1)))


def test_constant_input_lacks_complexity():
    with pytest.raises(InsufficientComplexity):
        tlsh_hash(b"\x41" * 4096)


def test_hex_round_trip_and_prefix():
    d = tlsh_hash(random.Random(1).randbytes(1000))
    assert len(d.hex) == HEX_LENGTH and d.hex == d.hex.lower()
    assert not d.hex.startswith("T1")
    assert TlshDigest.from_hex(d.hex) == d
    assert TlshDigest.from_hex("T1" + d.hex.upper()) == d
    with pytest.raises(TlshError):
        TlshDigest.from_hex(d.hex[:-2])


def test_self_distance_and_symmetry_on_random_pairs():
    rng = random.Random(7)
    for _ in range(1000):
        a = rng.randbytes(rng.randint(MIN_LENGTH, 600))
        b = bytearray(a)
        for _ in range(rng.randint(0, 40)):
            b[rng.randrange(len(b))] = rng.randrange(256)
        ha, hb = tlsh_hash(a), tlsh_hash(bytes(b))
        assert tlsh_distance(ha, ha) == 0
        assert tlsh_distance(ha, hb) == tlsh_distance(hb, ha)


def test_equivalent_verdicts():
    data = random.Random(3).randbytes(1024)
    v = tlsh_equivalent(data, bytes(data), 10)
    assert v.equivalent and v.distance == 0
    short = tlsh_equivalent(data, b"0123456789", 100)
    assert not short.equivalent and short.error == "InputTooShort"
    with pytest.raises(ValueError):
        tlsh_equivalent(data, data, -1)


def test_non_transitivity_witness(corpus_bytes):
    cf = parse_class(corpus_bytes[WITNESS_CLASS])
    a = corpus_bytes[WITNESS_CLASS]
    b = serialize_class(reorder_members(cf, 3))
    c = serialize_class(reorder_members(cf, 1))
    ha, hb, hc = tlsh_hash(a), tlsh_hash(b), tlsh_hash(c)
    dist = (tlsh_distance(ha, hb), tlsh_distance(hb, hc), tlsh_distance(ha, hc))
    assert dist == WITNESS_DISTANCES
    assert tlsh_equivalent(a, b, 10) and tlsh_equivalent(b, c, 10)
    assert not tlsh_equivalent(a, c, 10)
