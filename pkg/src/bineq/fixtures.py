"""Hand-assembled class files used by tests, docs and the CLI self-check."""

from __future__ import annotations

from .classfile import model as M
from .classfile.builder import ClassBuilder

INIT = ("aload_0", ("invokespecial", "java/lang/Object", "<init>", "()V"), "return")


def _with_init(b: ClassBuilder) -> ClassBuilder:
    b.add_method("<init>", "()V", INIT, max_stack=1, max_locals=1)
    return b


def minimal_class(name: str = "example/Minimal") -> bytes:
    return _with_init(ClassBuilder(name)).build()


def constant_value_class(value: int, name: str = "example/Limits") -> bytes:
    """A class holding ``public static final int LIMIT = value``, unused by code."""
    b = _with_init(ClassBuilder(name))
    b.add_field("LIMIT", "I", access=0x0019, constant=value)
    return b.build()


def constant_value_pair() -> tuple[bytes, bytes]:
    return constant_value_class(123), constant_value_class(124)


def object_method_pair() -> tuple[bytes, bytes]:
    """``getClass`` through an interface type versus through ``Object``."""
    desc = "(Lexample/IAccessEvent;)Ljava/lang/Class;"

    def build(call) -> bytes:
        b = _with_init(ClassBuilder("example/EventKind"))
        b.add_method("kindOf", desc, ["aload_1", call, "areturn"], max_stack=1, max_locals=2)
        return b.build()

    left = build(("invokeinterface", "example/IAccessEvent", "getClass", "()Ljava/lang/Class;"))
    right = build(("invokevirtual", "java/lang/Object", "getClass", "()Ljava/lang/Class;"))
    return left, right


def concat_pair() -> tuple[bytes, bytes]:
    """``prefix + "-" + n`` via a builder chain (Java 8) and via indy (Java 9+)."""
    desc = "(Ljava/lang/String;I)Ljava/lang/String;"
    sb = "java/lang/StringBuilder"
    append_s = ("invokevirtual", sb, "append", "(Ljava/lang/String;)Ljava/lang/StringBuilder;")
    chain = [
        ("new", sb), "dup", ("invokespecial", sb, "<init>", "()V"),
        "aload_0", append_s,
        ("ldc", "-"), append_s,
        "iload_1", ("invokevirtual", sb, "append", "(I)Ljava/lang/StringBuilder;"),
        ("invokevirtual", sb, "toString", "()Ljava/lang/String;"),
        "areturn",
    ]
    old = _with_init(ClassBuilder("example/Label", major=52))
    old.add_method("label", desc, chain, access=0x0009, max_stack=2, max_locals=2)

    new = _with_init(ClassBuilder("example/Label", major=55))
    bsm = new.concat_bootstrap("\x01-\x01")
    new.add_method("label", desc, [
        "aload_0", "iload_1", ("invokedynamic", bsm, "makeConcatWithConstants", desc), "areturn",
    ], access=0x0009, max_stack=2, max_locals=2)
    return old.build(), new.build()


def arithmetic_class(op: str = "iadd", name: str = "example/Arith") -> bytes:
    """``static int compute() { return 1 <op> 2; }`` without constant folding."""
    b = _with_init(ClassBuilder(name))
    b.add_method("compute", "()I", ["iconst_1", "iconst_2", op, "ireturn"], access=0x0009,
                 max_stack=2, max_locals=0)
    return b.build()


def debug_class(name: str = "example/Debug") -> bytes:
    """A class carrying every debug-only attribute."""
    b = ClassBuilder(name)
    b.add_attribute("SourceFile", M.SingleIndex(b.utf8("Debug.java")))
    b.add_attribute("SourceDebugExtension", M.RawBytes(b"SMAP\nDebug.java\n"))
    code_attrs = (
        b.attribute("LineNumberTable", M.LineNumberTable(((0, 3),))),
        b.attribute("LocalVariableTable", M.LocalVariableTable(
            ((0, 5, b.utf8("this"), b.utf8(f"L{name};"), 0),))),
        b.attribute("LocalVariableTypeTable", M.LocalVariableTypeTable(
            ((0, 5, b.utf8("this"), b.utf8(f"L{name};"), 0),))),
    )
    b.add_method("<init>", "()V", INIT, max_stack=1, max_locals=1, code_attributes=code_attrs,
                 attributes=(b.attribute("Deprecated", M.Marker()),))
    b.add_field("count", "I", access=0x0002)
    return b.build()
