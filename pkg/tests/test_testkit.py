from __future__ import annotations

import pytest

from bineq import fixtures as F
from bineq.classfile import parse_class, serialize_class
from bineq.classfile import model as M
from bineq.classfile.builder import ClassBuilder
from bineq.engine import BITWISE, DISASSEMBLED, NORMALIZED, compare_class_pair
from bineq.errors import NoTarget
from bineq.testkit import (
    EQ, NEQ, derive_seed, generate_oracle_set, load_manifest, mutate_constant_value,
    permute_pool, reorder_members, strip_debug_attrs, swap_opcode, write_oracle_set,
)


def status(a: bytes, b: bytes) -> dict:
    v = compare_class_pair(a, b, [BITWISE, DISASSEMBLED, NORMALIZED], short_circuit=False)
    return {k: o.status for k, o in v.outcomes.items()}


def ser(cf) -> bytes:
    return serialize_class(cf)


def code_of(cf, name):
    for m in cf.methods:
        if cf.member_name(m) == name:
            return m.attribute("Code").payload
    raise KeyError(name)


def test_seed_zero_is_identity(corpus):
    data = corpus[0][1]
    cf = parse_class(data)
    assert ser(permute_pool(cf, 0)) == data
    assert ser(reorder_members(cf, 0)) == data


def test_permutation_is_l2_equal_and_l1_different(corpus):
    for _, data in corpus[:30]:
        out = ser(permute_pool(parse_class(data), 99))
        s = status(data, out)
        assert s["bitwise"] == "fail" and s["disassembled"] == "pass"


def test_permutation_widens_ldc():
    b = ClassBuilder("example/Ldc")
    b.add_method("get", "()I", [("ldc", 123456), "ireturn"], access=0x0009)
    for i in range(400):
        b.utf8(f"pad{i}")
    data = b.build()
    cf = parse_class(data)
    assert code_of(cf, "get").instructions[0].mnemonic == "ldc"
    for seed in range(1, 50):
        out = permute_pool(cf, seed)
        ins = code_of(out, "get").instructions[0]
        if ins.operands[0] > 255:
            assert ins.mnemonic == "ldc_w"
            assert status(data, ser(out))["disassembled"] == "pass"
            return
    pytest.fail("no seed moved the constant past index 255")


def test_permutation_respects_wide_entries(corpus):
    for _, data in corpus[:100]:
        cf = parse_class(data)
        if any(e is not None and e.tag in (M.LONG, M.DOUBLE) for e in cf.constant_pool.entries):
            out = permute_pool(cf, 4)
            entries = out.constant_pool.entries
            for i, e in enumerate(entries):
                if e is not None and e.tag in (M.LONG, M.DOUBLE):
                    assert entries[i + 1] is None
            return
    pytest.fail("no class with long/double constants in sample")


def test_opaque_attributes_block_permutation():
    b = ClassBuilder("example/Opaque")
    b.add_attribute("com.example.Custom", b"\x00\x01")
    cf = parse_class(b.build())
    assert permute_pool(cf, 5) is cf


def test_reorder_members(corpus):
    data = next(d for _, d in corpus if len(parse_class(d).methods) > 2)
    out = ser(reorder_members(parse_class(data), 8))
    s = status(data, out)
    assert s["bitwise"] == "fail" and s["disassembled"] == "pass"
    single = F.minimal_class()
    assert ser(reorder_members(parse_class(single), 8)) == single


def test_strip_debug_attrs():
    plain = F.minimal_class()
    assert ser(strip_debug_attrs(parse_class(plain))) == plain
    data = F.debug_class()
    once = strip_debug_attrs(parse_class(data))
    assert ser(strip_debug_attrs(once)) == ser(once)
    s = status(data, ser(once))
    assert s["bitwise"] == "fail" and s["disassembled"] == "pass"


def test_mutate_constant_value_123_to_124():
    a, b = F.constant_value_pair()
    out = ser(mutate_constant_value(parse_class(a), 1))
    from bineq.level2 import render_level2
    assert render_level2(parse_class(out)) == render_level2(parse_class(b))
    s = status(a, out)
    assert s["disassembled"] == "fail" and s["normalized"] == "fail"


def test_mutate_constant_value_wraps():
    b = ClassBuilder("example/W")
    b.add_field("MAX", "I", access=0x0019, constant=2**31 - 1)
    out = mutate_constant_value(parse_class(b.build()), 0)
    index = out.fields[0].attribute("ConstantValue").payload.index
    assert out.constant_pool[index].args == (-2**31,)


def test_mutate_constant_value_no_target():
    with pytest.raises(NoTarget):
        mutate_constant_value(parse_class(F.minimal_class()), 1)


def test_swap_opcode_table():
    data = F.arithmetic_class("iadd")
    out = swap_opcode(parse_class(data), 3)
    ops = [i.mnemonic for i in code_of(out, "compute").instructions]
    assert ops == ["iconst_1", "iconst_2", "isub", "ireturn"]
    assert code_of(out, "compute").code_length == code_of(parse_class(data), "compute").code_length
    assert status(data, ser(out))["normalized"] == "fail"


def test_swap_opcode_skips_neutral_operands():
    b = ClassBuilder("example/Neutral")
    b.add_method("f", "(I)I", ["iload_0", "iconst_0", "iadd", "iload_0", "iconst_1", "imul",
                               "iadd", "ireturn"], access=0x0009)
    cf = parse_class(b.build())
    seen = set()
    for seed in range(40):
        code = code_of(swap_opcode(cf, seed), "f")
        seen.add(tuple(i.mnemonic for i in code.instructions))
    # only the final iadd (whose right operand is not a constant) is a target
    assert seen == {("iload_0", "iconst_0", "iadd", "iload_0", "iconst_1", "imul", "isub", "ireturn")}


def test_swap_opcode_no_target():
    with pytest.raises(NoTarget):
        swap_opcode(parse_class(F.minimal_class()), 1)


def test_derive_seed_is_stable_u64():
    s = derive_seed(5, 1, 2)
    assert s == derive_seed(5, 1, 2) and 0 <= s < 2**64
    assert s != derive_seed(5, 2, 1)


def test_oracle_set_contracts(corpus):
    sample = corpus[600:610]
    pairs = generate_oracle_set(sample, 3, 21)
    eq = [p for p in pairs if p.label == EQ]
    neq = [p for p in pairs if p.label == NEQ]
    assert 0 < len(eq) <= 30 and 0 < len(neq) <= 30
    for p in pairs:
        parse_class(p.right)
        s = status(p.left, p.right)
        if p.label == EQ:
            assert s["bitwise"] == "fail" and s["disassembled"] == "pass"
        else:
            assert s["normalized"] == "fail"


def test_manifest_is_deterministic_and_loads(tmp_path, corpus):
    sample = corpus[30:40]
    a = write_oracle_set(generate_oracle_set(sample, 2, 9), tmp_path / "a")
    b = write_oracle_set(generate_oracle_set(sample, 2, 9), tmp_path / "b")
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
    loaded = load_manifest(a)
    fresh = generate_oracle_set(sample, 2, 9)
    assert [(p.left, p.right, p.label, p.mutation, p.seed) for p in loaded] == \
        [(p.left, p.right, p.label, p.mutation, p.seed) for p in fresh]


def test_manifest_detects_tampering(tmp_path, corpus):
    path = write_oracle_set(generate_oracle_set(corpus[:2], 1, 1), tmp_path)
    import json
    first = json.loads(open(path).readline())
    with open(tmp_path / first["right_path"], "ab") as fh:
        fh.write(b"x")
    with pytest.raises(ValueError):
        load_manifest(path)
