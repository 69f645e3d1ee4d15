from __future__ import annotations

import hashlib
from dataclasses import replace

import pytest

from bineq import fixtures as F
from bineq.classfile import decode_code, parse_class, serialize_class, validate_class
from bineq.classfile import model as M
from bineq.classfile import mutf8
from bineq.classfile.builder import ClassBuilder
from bineq.errors import MalformedClass, UnencodableModel


def test_minimal_class_round_trips():
    data = F.minimal_class()
    cf = parse_class(data)
    assert cf.name == "example/Minimal"
    assert cf.super_name == "java/lang/Object"
    assert serialize_class(cf) == data


def test_corpus_round_trip_is_byte_identical(corpus):
    assert len(corpus) >= 200
    for path, data in corpus:
        out = serialize_class(parse_class(data))
        assert hashlib.sha256(out).hexdigest() == hashlib.sha256(data).hexdigest(), path


def test_corpus_code_reencodes(corpus):
    from bineq.classfile import encode_instructions

    checked = 0
    for path, data in corpus[:300]:
        cf = parse_class(data)
        for m in cf.methods:
            a = m.attribute("Code")
            if a is None:
                continue
            raw = encode_instructions(a.payload.instructions)
            again = decode_code(raw, cf.constant_pool)
            assert tuple(again) == a.payload.instructions, path
            checked += 1
    assert checked > 1000


def test_truncated_pool_reports_offset():
    data = F.minimal_class()
    cut = 20  # inside the constant pool
    with pytest.raises(MalformedClass) as info:
        parse_class(data[:cut])
    assert info.value.offset is not None and info.value.offset <= cut


def test_bad_magic():
    with pytest.raises(MalformedClass) as info:
        parse_class(b"\xca\xfe\xba\xbf" + F.minimal_class()[4:])
    assert info.value.offset == 0


def test_every_prefix_parses_or_raises_malformed():
    data = F.debug_class()
    for n in range(len(data)):
        with pytest.raises(MalformedClass):
            parse_class(data[:n])


def test_trailing_bytes_rejected():
    with pytest.raises(MalformedClass):
        parse_class(F.minimal_class() + b"\x00")


def test_unknown_pool_tag_is_malformed():
    data = bytearray(F.minimal_class())
    data[10] = 2  # first entry's tag; 2 is unassigned
    with pytest.raises(MalformedClass):
        parse_class(bytes(data))


def test_decode_code_examples():
    assert decode_code(b"") == []
    ins = decode_code(bytes([0x04, 0xAC]))
    assert [(i.offset, i.mnemonic) for i in ins] == [(0, "iconst_1"), (1, "ireturn")]


def test_decode_code_unknown_opcode():
    with pytest.raises(MalformedClass):
        decode_code(bytes([0xFE]))


def test_decode_wide_iinc():
    ins = decode_code(bytes([0xC4, 0x84, 0x01, 0x00, 0xFF, 0xFF]))
    assert len(ins) == 1 and ins[0].wide and ins[0].mnemonic == "iinc"
    assert ins[0].operands == (256, -1)


def test_pool_overflow_is_unencodable():
    cf = parse_class(F.minimal_class())
    entries = cf.constant_pool.entries + tuple(
        M.ConstEntry(M.INTEGER, (i,)) for i in range(70000))
    with pytest.raises(UnencodableModel):
        serialize_class(replace(cf, constant_pool=M.ConstantPool(entries)))


def test_ldc_widened_when_index_exceeds_255():
    b = ClassBuilder("example/Wide")
    for i in range(300):
        b.utf8(f"filler{i}")
    b.add_method("get", "()I", [("ldc", 100000), "ireturn"], access=0x0009)
    cf = parse_class(b.build())
    code = cf.methods[0].attribute("Code").payload
    assert code.instructions[0].mnemonic == "ldc_w"
    assert code.code_length == 4


def test_validate_rejects_bad_reference():
    cf = parse_class(F.minimal_class())
    with pytest.raises(MalformedClass):
        validate_class(replace(cf, this_class=1 if cf.constant_pool[1].tag != M.CLASS else 2))


def test_newer_major_version_parses_best_effort():
    data = bytearray(F.minimal_class())
    data[6:8] = (70).to_bytes(2, "big")
    cf = parse_class(bytes(data))
    assert cf.best_effort
    assert cf.warnings
    assert serialize_class(cf) == bytes(data)


def test_unknown_attribute_kept_opaque():
    b = ClassBuilder("example/Opaque")
    b.add_attribute("com.example.Custom", b"\x01\x02\x03")
    data = b.build()
    cf = parse_class(data)
    attr = cf.attribute("com.example.Custom")
    assert attr.opaque and attr.payload == b"\x01\x02\x03"
    assert serialize_class(cf) == data


def test_mutf8_nul_and_supplementary():
    assert mutf8.encode("a\x00b") == b"a\xc0\x80b"
    assert mutf8.decode(b"a\xc0\x80b") == "a\x00b"
    raw = mutf8.encode("\U0001F600")
    assert len(raw) == 6
    assert mutf8.encode(mutf8.decode(raw)) == raw


@pytest.mark.parametrize("raw", [b"\x00", b"\xf0\x9f\x98\x80", b"\xc1\x81", b"\xe0\x80"])
def test_mutf8_rejects_invalid(raw):
    with pytest.raises(mutf8.MutfError):
        mutf8.decode(raw)


def test_invalid_mutf8_in_class_is_malformed():
    b = ClassBuilder("example/Bad")
    b.utf8("zzzz")
    data = b.build()
    k = data.index(b"zzzz")
    bad = data[:k] + b"\xf0zzz" + data[k + 4:]
    with pytest.raises(MalformedClass):
        parse_class(bad)
