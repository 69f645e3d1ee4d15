from __future__ import annotations

from dataclasses import replace

from bineq import fixtures as F
from bineq.classfile import parse_class, serialize_class
from bineq.classfile.builder import ClassBuilder
from bineq.level2 import render_level2
from bineq.testkit import permute_pool, reorder_members, strip_debug_attrs


def render(data: bytes):
    return render_level2(parse_class(data))


def _class(code, name="example/W", extra=None):
    b = ClassBuilder(name)
    b.add_method("f", "(I)I", code, access=0x0009, max_stack=2, max_locals=2)
    if extra:
        extra(b)
    return b.build()


def test_text_format_is_lf_terminated_without_trailing_space(corpus):
    for _, data in corpus[:200]:
        text = render(data).text
        assert text.endswith("\n") and "\r" not in text
        assert all(line == line.rstrip() for line in text.split("\n"))


def test_render_is_deterministic(corpus):
    for _, data in corpus[:50]:
        assert render(data) == render(bytes(data))


def test_pool_slot_of_object_init_does_not_matter():
    # the Object.<init> Methodref lands at a different slot in each class
    a = ClassBuilder("example/P")
    a.add_method("<init>", "()V", F.INIT, max_stack=1, max_locals=1)
    b = ClassBuilder("example/P")
    for i in range(5):
        b.utf8(f"unused{i}")
    b.add_method("<init>", "()V", F.INIT, max_stack=1, max_locals=1)
    la, lb = a.build(), b.build()
    assert la != lb
    assert render(la).lines == render(lb).lines


def test_constant_value_change_differs_on_one_line():
    a, b = F.constant_value_pair()
    la, lb = render(a).lines, render(b).lines
    diff = [(x, y) for x, y in zip(la, lb) if x != y]
    assert len(la) == len(lb)
    assert diff == [("  ConstantValue int 123", "  ConstantValue int 124")]


def test_debug_attributes_are_invisible():
    data = F.debug_class()
    stripped = serialize_class(strip_debug_attrs(parse_class(data)))
    assert stripped != data
    assert render(stripped) == render(data)
    text = render(data).text
    for word in ("LineNumberTable", "LocalVariable", "SourceFile", "Deprecated", "SMAP"):
        assert word not in text


def test_permutation_invariance_100_seeds(corpus):
    data = corpus[7][1]
    cf = parse_class(data)
    expected = render_level2(cf)
    for seed in range(1, 101):
        permuted = permute_pool(cf, seed)
        assert serialize_class(permuted) != data
        assert render_level2(permuted) == expected


def test_width_invariance():
    short = _class(["iload_1", "ireturn"])
    long_ = _class([("iload", 1), "ireturn"])
    assert short != long_
    assert render(short) == render(long_)
    a = _class([("ldc", 70000), "ireturn"])
    b = _class([("ldc_w", 70000), "ireturn"])
    assert a != b and render(a) == render(b)
    g = _class([("goto", "x"), ("label", "x"), "iload_1", "ireturn"])
    gw = _class([("goto_w", "x"), ("label", "x"), "iload_1", "ireturn"])
    assert g != gw and render(g) == render(gw)


def test_value_encodings_still_differ_at_level2():
    a = _class(["iconst_3", "ireturn"])
    b = _class([("bipush", 3), "ireturn"])
    assert render(a) != render(b)


def test_member_order_invariance(corpus):
    data = next(d for _, d in corpus if len(parse_class(d).methods) > 3)
    cf = parse_class(data)
    shuffled = reorder_members(cf, 5)
    assert serialize_class(shuffled) != data
    assert render_level2(shuffled) == render_level2(cf)


def test_flag_change_is_visible():
    cf = parse_class(F.minimal_class())
    flipped = replace(cf, access_flags=cf.access_flags | 0x0010)
    assert render_level2(flipped) != render_level2(cf)


def test_operand_change_is_visible():
    assert render(_class([("bipush", 3), "ireturn"])) != render(_class([("bipush", 4), "ireturn"]))


def test_branch_targets_are_labels():
    text = render(_class(["iload_1", ("ifeq", "z"), "iconst_1", "ireturn",
                          ("label", "z"), "iconst_0", "ireturn"])).text
    assert "ifeq L0" in text and "L0:" in text


def test_unknown_attribute_rendered_by_digest():
    def extra(b):
        b.add_attribute("com.example.Custom", b"\x01\x02")

    def extra2(b):
        b.add_attribute("com.example.Custom", b"\x01\x03")

    a, b = _class(["iload_1", "ireturn"], extra=extra), _class(["iload_1", "ireturn"], extra=extra2)
    assert "com.example.Custom" in render(a).text
    assert render(a) != render(b)


def test_invokedynamic_bootstrap_inlined():
    _, new = F.concat_pair()
    text = render(new).text
    assert "StringConcatFactory" in text and "makeConcatWithConstants" in text
    assert "BootstrapMethods" not in text


def test_runtime_invisible_annotations_rendered(corpus):
    for _, data in corpus:
        cf = parse_class(data)
        if cf.attribute("RuntimeInvisibleAnnotations"):
            assert "RuntimeInvisibleAnnotations" in render_level2(cf).text
            return
