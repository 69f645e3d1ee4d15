from __future__ import annotations

from bineq import fixtures as F
from bineq.classfile import parse_class
from bineq.classfile.builder import ClassBuilder
from bineq.level2 import canonical_model, render_level2
from bineq.level3 import normalize, normalize_model, render_level3


def l3(data: bytes):
    return render_level3(normalize(parse_class(data)))


def _method(code, desc="()I", name="example/N", major=52, bsm=None):
    b = ClassBuilder(name, major=major)
    if bsm is not None:
        code = bsm(b, code)
    b.add_method("f", desc, code, access=0x0009, max_stack=4, max_locals=4)
    return b.build()


def test_constant_push_encodings_unify():
    a = _method(["iconst_3", "ireturn"])
    b = _method([("bipush", 3), "ireturn"])
    c = _method([("ldc", 3), "ireturn"])
    assert l3(a) == l3(b) == l3(c)
    assert l3(a) != l3(_method(["iconst_4", "ireturn"]))


def test_push_change_differs_on_exactly_one_line():
    a = l3(_method([("bipush", 3), "ireturn"])).lines
    b = l3(_method([("bipush", 9), "ireturn"])).lines
    assert [(x, y) for x, y in zip(a, b) if x != y] == [("    PUSH int 3", "    PUSH int 9")]


def test_nop_removed():
    assert l3(_method(["nop", "iconst_1", "nop", "ireturn"])) == l3(_method(["iconst_1", "ireturn"]))


def test_object_method_owner_canonicalized():
    left, right = F.object_method_pair()
    assert render_level2(parse_class(left)) != render_level2(parse_class(right))
    assert l3(left) == l3(right)


def test_invokespecial_object_method_not_rewritten():
    sup = ("invokespecial", "java/lang/Object", "hashCode", "()I")
    virt = ("invokevirtual", "java/lang/Object", "hashCode", "()I")
    a = _method(["aload_0", sup, "ireturn"], desc="(Ljava/lang/Object;)I")
    b = _method(["aload_0", virt, "ireturn"], desc="(Ljava/lang/Object;)I")
    assert l3(a) != l3(b)


def test_empty_method_unchanged():
    b = ClassBuilder("example/E")
    b.add_method("run", "()V", ["return"], access=0x0009, max_stack=0, max_locals=0)
    b.add_method("abs", "()V", access=0x0409)
    text = l3(b.build()).text
    assert "RETURN V" in text and "method abs()V" in text


def test_indy_concat_pair_equal_at_level3():
    old, new = F.concat_pair()
    assert render_level2(parse_class(old)) != render_level2(parse_class(new))
    assert l3(old) == l3(new)
    assert "CONCAT" in l3(new).text


SB = "java/lang/StringBuilder"
APPEND_S = ("invokevirtual", SB, "append", "(Ljava/lang/String;)Ljava/lang/StringBuilder;")
TO_STRING = ("invokevirtual", SB, "toString", "()Ljava/lang/String;")
DESC3 = "(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;)Ljava/lang/String;"


def _three_builder():
    return _method([("new", SB), "dup", ("invokespecial", SB, "<init>", "()V"),
                    "aload_0", APPEND_S, "aload_1", APPEND_S, "aload_2", APPEND_S,
                    TO_STRING, "areturn"], desc=DESC3)


def _three_indy():
    def with_bsm(b, code):
        bsm = b.concat_bootstrap("\x01\x01\x01")
        return ["aload_0", "aload_1", "aload_2",
                ("invokedynamic", bsm, "makeConcatWithConstants", DESC3), "areturn"]

    return _method(None, desc=DESC3, major=55, bsm=with_bsm)


def test_three_string_concat_encodings_agree():
    assert l3(_three_builder()) == l3(_three_indy())


def test_builder_chain_with_branch_is_left_alone():
    code = [("new", SB), "dup", ("invokespecial", SB, "<init>", "()V"),
            "aload_0", APPEND_S, "iload_1", ("ifeq", "skip"), "aload_0", APPEND_S,
            ("label", "skip"), TO_STRING, "areturn"]
    text = l3(_method(code, desc="(Ljava/lang/String;I)Ljava/lang/String;")).text
    assert "CONCAT" not in text


def test_indy_concat_constants_inlined():
    def with_bsm(b, code):
        bsm = b.concat_bootstrap("id=\x01")
        return ["aload_0", ("invokedynamic", bsm, "makeConcatWithConstants",
                            "(Ljava/lang/String;)Ljava/lang/String;"), "areturn"]

    text = l3(_method(None, desc="(Ljava/lang/String;)Ljava/lang/String;", major=55,
                      bsm=with_bsm)).text
    assert 'CONCAT ["id=", Ljava/lang/String;]' in text


def test_idempotent_on_corpus(corpus):
    for path, data in corpus[:400]:
        n = normalize(parse_class(data))
        assert normalize_model(n) == n, path


def test_level3_derived_from_level2_model(corpus):
    # identical canonical models always give identical normal forms
    for _, data in corpus[:50]:
        cf = parse_class(data)
        assert normalize_model(canonical_model(cf)) == normalize(cf)
