"""Level 3 semantic normalization.

The Level 2 canonical model is lifted into a small instruction vocabulary
and rewritten by five rules, applied in order:

1. the Level 2 canonicalizations (inherited from the input model);
2. constant pushes of every encoding become ``PUSH``;
3. ``nop`` is removed;
4. virtual or interface calls of a public ``java/lang/Object`` method are
   retargeted at ``java/lang/Object``;
5. string concatenation via a ``StringBuilder`` chain or via
   ``makeConcatWithConstants`` becomes one ``CONCAT``.

Patterns that do not match are left alone, so a missed rewrite can only
make two classes look different, never the same.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple

from .classfile.descriptors import parse_method_descriptor
from .classfile.model import ClassFile
from .errors import NormalizeFailure, RenderFailure
from .level2 import (
    CanonClass, CanonicalText, CanonMember, CInstr, Label, canonical_model,
    fmt, instr_text, member_lines, name, quote,
)

OBJECT = "java/lang/Object"
OBJECT_METHODS = frozenset({
    ("getClass", "()Ljava/lang/Class;"), ("hashCode", "()I"),
    ("equals", "(Ljava/lang/Object;)Z"), ("toString", "()Ljava/lang/String;"),
    ("notify", "()V"), ("notifyAll", "()V"), ("wait", "()V"), ("wait", "(J)V"),
    ("wait", "(JI)V"),
})
BUILDERS = frozenset({"java/lang/StringBuilder", "java/lang/StringBuffer"})
CONCAT_FACTORY = "java/lang/invoke/StringConcatFactory"
STRING = "Ljava/lang/String;"
# append overloads whose effect equals string conversion of the argument
APPEND_TYPES = frozenset({"I", "J", "F", "D", "C", "Z", STRING, "Ljava/lang/Object;"})


def _fbits(v: float) -> int:
    return struct.unpack(">I", struct.pack(">f", v))[0]


def _dbits(v: float) -> int:
    return struct.unpack(">Q", struct.pack(">d", v))[0]


CONST_PUSH = {
    **{f"iconst_{n}": ("int", n) for n in range(6)},
    "iconst_m1": ("int", -1),
    "lconst_0": ("long", 0), "lconst_1": ("long", 1),
    "fconst_0": ("float", _fbits(0.0)), "fconst_1": ("float", _fbits(1.0)),
    "fconst_2": ("float", _fbits(2.0)),
    "dconst_0": ("double", _dbits(0.0)), "dconst_1": ("double", _dbits(1.0)),
    "aconst_null": ("null",),
}
_TYPE = {"i": "I", "l": "J", "f": "F", "d": "D", "a": "A", "b": "B", "c": "C", "s": "S"}
ARITH_OPS = frozenset({"add", "sub", "mul", "div", "rem", "neg", "shl", "shr",
                       "ushr", "and", "or", "xor"})
BRANCHES = frozenset({
    "ifeq", "ifne", "iflt", "ifge", "ifgt", "ifle", "if_icmpeq", "if_icmpne",
    "if_icmplt", "if_icmpge", "if_icmpgt", "if_icmple", "if_acmpeq",
    "if_acmpne", "goto", "jsr", "ifnull", "ifnonnull",
})
# instructions that may not appear between the pieces of a concatenation
_SEGMENT_BARRIERS = frozenset({
    "tableswitch", "lookupswitch", "athrow", "ret", "monitorenter",
    "monitorexit", "pop", "pop2", "dup_x1", "dup_x2", "dup2", "dup2_x1",
    "dup2_x2", "swap", "iinc",
})


class NormInstr(NamedTuple):
    """One normalized instruction; ``kind == ":"`` marks a label."""

    kind: str
    args: tuple = ()


@dataclass(frozen=True)
class NormMethod:
    name: str
    descriptor: str
    lines: tuple[str, ...]
    code: tuple[NormInstr, ...] | None
    code_lines: tuple[CInstr, ...] = ()


@dataclass(frozen=True)
class NormClass:
    header: tuple[str, ...]
    fields: tuple[CanonMember, ...]
    methods: tuple[NormMethod, ...]


# ---------------------------------------------------------------- descriptors


def concat_type(desc: str) -> str | None:
    """Erase an argument type to the form both concat encodings agree on."""
    if desc in ("B", "S", "I"):
        return "I"
    if desc in ("J", "F", "D", "C", "Z", STRING):
        return desc
    if desc.startswith("L") or desc.startswith("["):
        return "Ljava/lang/Object;"
    return None


# ---------------------------------------------------------------- lifting


def lift(ins: CInstr) -> NormInstr:
    op, args = ins
    if op == ":":
        return NormInstr(":", args)
    push = CONST_PUSH.get(op)
    if push is not None:
        return NormInstr("PUSH", (push,))
    if op in ("bipush", "sipush"):
        return NormInstr("PUSH", (("int", args[0]),))
    if op in ("ldc", "ldc2_w"):
        return NormInstr("PUSH", args)
    if op == "nop":
        return NormInstr("NOP")
    head, tail = op[:1], op[1:]
    if tail in ("load", "store") and head in _TYPE:
        return NormInstr("LOAD" if tail == "load" else "STORE", (_TYPE[head], args[0]))
    if tail == "return" and head in _TYPE:
        return NormInstr("RETURN", (_TYPE[head],))
    if op == "return":
        return NormInstr("RETURN", ("V",))
    if tail in ARITH_OPS and head in "ilfd":
        return NormInstr("ARITH", (tail, _TYPE[head]))
    if op.startswith("invoke"):
        kind = op[6:]
        ref = args[0]
        if kind in ("virtual", "interface") and (ref[3], ref[4]) in OBJECT_METHODS:
            return NormInstr("INVOKE", ("virtual", ("ref", "Method", OBJECT, ref[3], ref[4])))
        return NormInstr("INVOKE", (kind, ref))
    if op in ("getfield", "putfield", "getstatic", "putstatic"):
        return NormInstr("FIELD", (op, args[0]))
    if op in BRANCHES:
        return NormInstr("BRANCH", (op, args[0]))
    if op == "new":
        return NormInstr("NEW", args)
    return NormInstr("OTHER", (op, *args))


# ---------------------------------------------------------------- concat


def _indy_concat(ins: NormInstr) -> NormInstr | None:
    if ins.kind != "INVOKE" or ins.args[0] != "dynamic":
        return None
    _, nm, desc, bsm = ins.args[1]
    handle, static_args = bsm[1], bsm[2]
    if handle[0] != "MethodHandle" or handle[1] != "invokeStatic":
        return None
    ref = handle[2]
    if ref[2] != CONCAT_FACTORY or ref[3] != nm or nm not in ("makeConcat", "makeConcatWithConstants"):
        return None
    try:
        arg_types, ret = parse_method_descriptor(desc)
    except (ValueError, IndexError):
        return None
    if ret != STRING:
        return None
    types = [concat_type(t) for t in arg_types]
    if None in types:
        return None
    parts: list[tuple] = []
    if nm == "makeConcat":
        if static_args:
            return None
        parts = [("arg", t) for t in types]
    else:
        if not static_args or static_args[0][0] != "String":
            return None
        recipe = static_args[0][1]
        consts = list(static_args[1:])
        remaining = list(types)
        for ch in recipe:
            if ch == "\x01":
                if not remaining:
                    return None
                parts.append(("arg", remaining.pop(0)))
            elif ch == "\x02":
                if not consts:
                    return None
                text = _const_text(consts.pop(0))
                if text is None:
                    return None
                parts.append(("lit", text))
            else:
                parts.append(("lit", ch))
        if remaining or consts:
            return None
    return NormInstr("CONCAT", _merge(parts))


def _const_text(c: tuple) -> str | None:
    if c[0] == "String":
        return c[1]
    if c[0] in ("int", "long"):
        return str(c[1])
    return None


def _merge(parts: list[tuple]) -> tuple:
    out: list[tuple] = []
    for p in parts:
        if p[0] == "lit":
            if not p[1]:
                continue
            if out and out[-1][0] == "lit":
                out[-1] = ("lit", out[-1][1] + p[1])
                continue
        out.append(p)
    return tuple(out)


_OBJECT_TO_STRING = NormInstr("INVOKE", ("virtual", ("ref", "Method", OBJECT, "toString",
                                                    "()Ljava/lang/String;")))


def _is_builder_call(ins: NormInstr, kind: str, nm: str | None = None) -> bool:
    if ins.kind != "INVOKE" or ins.args[0] != kind:
        return False
    ref = ins.args[1]
    return ref[2] in BUILDERS and (nm is None or ref[3] == nm)


def _segment_ok(seg: list[NormInstr]) -> bool:
    prev = None
    for ins in seg:
        k = ins.kind
        if k in (":", "BRANCH", "STORE", "RETURN"):
            return False
        if k == "NEW" and ins.args[0] in BUILDERS:
            return False
        if k == "INVOKE" and ins.args[0] != "dynamic" and ins.args[1][2] in BUILDERS:
            return False
        if k == "OTHER":
            if ins.args[0] in _SEGMENT_BARRIERS:
                return False
            if ins.args[0] == "dup" and (prev is None or prev.kind != "NEW"):
                return False
        prev = ins
    return True


def _folded(seg: list[NormInstr], append_type: str) -> str | None:
    """Literal text of a segment that is a single appended constant."""
    if len(seg) != 1 or seg[0].kind != "PUSH":
        return None
    c = seg[0].args[0]
    if c[0] == "String" and append_type in (STRING, "Ljava/lang/Object;"):
        return c[1]
    if c[0] == "int":
        v = c[1]
        if append_type == "I":
            return str(v)
        if append_type == "C" and 0 <= v <= 0xFFFF:
            return chr(v)
        if append_type == "Z" and v in (0, 1):
            return "true" if v else "false"
    if c[0] == "long" and append_type == "J":
        return str(c[1])
    return None


def _match_builder(code: list[NormInstr], i: int):
    """Match a builder chain starting at ``code[i]``.

    Returns ``(end, replacement)`` where ``code[i:end]`` is replaced, or None.
    """
    n = len(code)
    if i + 2 >= n or code[i + 1] != NormInstr("OTHER", ("dup",)):
        return None
    builder = code[i].args[0]
    j = i + 2
    parts: list[tuple] = []
    body: list[NormInstr] = []
    seg: list[NormInstr] = []
    initialized = False
    while j < n:
        ins = code[j]
        # toString was already retargeted at Object; right after an append
        # the receiver can only be the builder
        terminal = initialized and not seg and ins == _OBJECT_TO_STRING
        if not terminal and not _is_builder_call(ins, "special" if not initialized else "virtual"):
            seg.append(ins)
            j += 1
            continue
        ref = ins.args[1]
        if ref[2] != builder and not terminal:
            return None
        if not _segment_ok(seg):
            return None
        nm, desc = ref[3], ref[4]
        if not initialized:
            if nm != "<init>":
                return None
            if desc == "()V" and not seg:
                pass
            elif desc == "(Ljava/lang/String;)V":
                text = _folded(seg, STRING)
                if text is None:
                    return None
                parts.append(("lit", text))
            else:
                return None
            initialized = True
        elif nm == "append":
            try:
                (arg,), ret = parse_method_descriptor(desc)
            except (ValueError, IndexError):
                return None
            if ret != f"L{builder};" or arg not in APPEND_TYPES:
                return None
            t = concat_type(arg)
            if not seg:
                return None
            text = _folded(seg, arg)
            if text is not None:
                parts.append(("lit", text))
            else:
                body.extend(seg)
                parts.append(("arg", t))
        elif nm == "toString" and desc == "()Ljava/lang/String;":
            if seg:
                return None
            return j + 1, body + [NormInstr("CONCAT", _merge(parts))]
        else:
            return None
        seg = []
        j += 1
    return None


def _rewrite_concat(code: list[NormInstr]) -> list[NormInstr]:
    code = [_indy_concat(c) or c for c in code]
    starts = [k for k, c in enumerate(code) if c.kind == "NEW" and c.args[0] in BUILDERS]
    for i in reversed(starts):
        m = _match_builder(code, i)
        if m is not None:
            end, replacement = m
            code[i:end] = replacement
    return code


# ---------------------------------------------------------------- labels


def _map_labels(x, mapping):
    if isinstance(x, Label):
        return mapping[x]
    if isinstance(x, tuple):
        return type(x)(*[_map_labels(v, mapping) for v in x]) if hasattr(x, "_fields") \
            else tuple(_map_labels(v, mapping) for v in x)
    return x


def _relabel(code: list[NormInstr], extras: tuple[CInstr, ...]):
    """Merge adjacent labels and renumber them in code order."""
    mapping: dict[Label, Label] = {}
    out: list[NormInstr] = []
    count = 0
    prev_label = None
    for ins in code:
        if ins.kind == ":":
            if prev_label is not None:
                mapping[ins.args[0]] = prev_label
                continue
            prev_label = Label(f"L{count}")
            count += 1
            mapping[ins.args[0]] = prev_label
            out.append(NormInstr(":", (prev_label,)))
        else:
            prev_label = None
            out.append(ins)
    if all(k == v for k, v in mapping.items()):
        return out, tuple(extras)
    out = [_map_labels(ins, mapping) if ins.kind in ("BRANCH", "OTHER") else ins for ins in out]
    return out, tuple(_map_labels(e, mapping) for e in extras)


# ---------------------------------------------------------------- driver


def normalize_code(code, extras=()):
    """Normalize one method body (Level 2 or already normalized)."""
    lifted = [c if isinstance(c, NormInstr) else lift(c) for c in code]
    lifted = [c for c in lifted if c.kind != "NOP"]
    lifted = _rewrite_concat(lifted)
    return _relabel(lifted, extras)


def _normalize_member(m) -> NormMethod:
    if m.code is None:
        return NormMethod(m.name, m.descriptor, m.lines, None, m.code_lines)
    code, extras = normalize_code(m.code, m.code_lines)
    return NormMethod(m.name, m.descriptor, m.lines, tuple(code), extras)


def normalize_model(model: CanonClass | NormClass) -> NormClass:
    try:
        return NormClass(model.header, model.fields,
                         tuple(_normalize_member(m) for m in model.methods))
    except (IndexError, KeyError, TypeError, ValueError) as exc:
        raise NormalizeFailure(f"cannot normalize: {exc}") from exc


def normalize(cf: ClassFile) -> NormClass:
    """Compute the Level 3 normal form of a class."""
    try:
        model = canonical_model(cf)
    except RenderFailure as exc:
        raise NormalizeFailure(str(exc)) from exc
    return normalize_model(model)


def _part(p: tuple) -> str:
    return quote(p[1]) if p[0] == "lit" else name(p[1])


def norm_text(ins: NormInstr) -> str:
    k, args = ins
    if k == ":":
        return f"{args[0].name}:"
    if k == "CONCAT":
        return "CONCAT [" + ", ".join(_part(p) for p in args) + "]"
    if k == "PUSH" and args[0][0] == "null":
        return "PUSH null"
    if not args:
        return k
    return k + " " + " ".join(fmt(a) for a in args)


def render_level3(n: NormClass) -> CanonicalText:
    """Serialize a normal form to Level 3 canonical text."""
    lines = list(n.header)
    for f in n.fields:
        lines.extend(member_lines(f))
    for m in n.methods:
        lines.extend(m.lines)
        if m.code is not None:
            lines.append("  code:")
            lines.extend("    " + norm_text(i) for i in m.code)
            lines.extend("    " + instr_text(e) for e in m.code_lines)
    return CanonicalText(tuple(lines), 3)
