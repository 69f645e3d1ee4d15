"""Level 2 canonical disassembly.

A class is rendered to deterministic text in which the constant pool
order, member order, debug-only attributes and operand-width encodings
are invisible.  Every pool operand is replaced by its resolved symbolic
form, and branch targets become labels numbered by first appearance.

The structured intermediate (:class:`CanonClass`) is what the Level 3
normalizer consumes, so Level 3 can never see information this module
discards.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

from .classfile import model as M
from .classfile.opcodes import (
    BRANCH2, BRANCH4, BYTE, CP1, CP2, IINC, INVOKEDYNAMIC, INVOKEINTERFACE,
    KINDS, LOCAL, LOOKUPSWITCH, MNEMONICS, MULTIANEWARRAY, NEWARRAY,
    NEWARRAY_TYPES, NONE, SHORT, SHORTHAND, TABLESWITCH, WIDTH_ALIAS,
)
from .errors import MalformedClass, RenderFailure

EXCLUDED_ATTRIBUTES = M.DEBUG_ATTRIBUTES | {"StackMapTable", "BootstrapMethods"}

CLASS_FLAGS = [(0x0001, "public"), (0x0010, "final"), (0x0020, "super"),
               (0x0200, "interface"), (0x0400, "abstract"), (0x1000, "synthetic"),
               (0x2000, "annotation"), (0x4000, "enum"), (0x8000, "module")]
FIELD_FLAGS = [(0x0001, "public"), (0x0002, "private"), (0x0004, "protected"),
               (0x0008, "static"), (0x0010, "final"), (0x0040, "volatile"),
               (0x0080, "transient"), (0x1000, "synthetic"), (0x4000, "enum")]
METHOD_FLAGS = [(0x0001, "public"), (0x0002, "private"), (0x0004, "protected"),
                (0x0008, "static"), (0x0010, "final"), (0x0020, "synchronized"),
                (0x0040, "bridge"), (0x0080, "varargs"), (0x0100, "native"),
                (0x0400, "abstract"), (0x0800, "strict"), (0x1000, "synthetic")]
INNER_FLAGS = [(0x0001, "public"), (0x0002, "private"), (0x0004, "protected"),
               (0x0008, "static"), (0x0010, "final"), (0x0200, "interface"),
               (0x0400, "abstract"), (0x1000, "synthetic"), (0x2000, "annotation"),
               (0x4000, "enum")]

HANDLE_KINDS = {1: "getField", 2: "getStatic", 3: "putField", 4: "putStatic",
                5: "invokeVirtual", 6: "invokeStatic", 7: "invokeSpecial",
                8: "newInvokeSpecial", 9: "invokeInterface"}

_SAFE = frozenset(chr(c) for c in range(0x21, 0x7F)) - {'"', "\\", ","}


class CanonicalText(NamedTuple):
    lines: tuple[str, ...]
    level: int

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def encode(self) -> bytes:
        return self.text.encode("utf-8")

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.encode()).hexdigest()


class Label(NamedTuple):
    name: str


class Raw(NamedTuple):
    """Pre-formatted operand text."""

    text: str


class CInstr(NamedTuple):
    """One canonical instruction.  ``op == ":"`` marks a label."""

    op: str
    args: tuple = ()


@dataclass(frozen=True)
class CanonMember:
    kind: str
    name: str
    descriptor: str
    lines: tuple[str, ...]
    code: tuple[CInstr, ...] | None = None
    code_lines: tuple[CInstr, ...] = ()


@dataclass(frozen=True)
class CanonClass:
    header: tuple[str, ...]
    fields: tuple[CanonMember, ...]
    methods: tuple[CanonMember, ...]


# ---------------------------------------------------------------- formatting


def name(s: str) -> str:
    """Render an identifier, quoting it only if it contains unsafe characters."""
    if s and all(c in _SAFE for c in s):
        return s
    return json.dumps(s, ensure_ascii=True)


def quote(s: str) -> str:
    return json.dumps(s, ensure_ascii=True)


def flags(value: int, table) -> str:
    names = [n for bit, n in table if value & bit]
    return f"0x{value:04x}" + (" " + " ".join(names) if names else "")


def _float_text(bits: int) -> str:
    v = struct.unpack(">f", struct.pack(">I", bits))[0]
    if math.isnan(v):
        return f"NaN(0x{bits:08x})"
    return repr(v)


def _double_text(bits: int) -> str:
    v = struct.unpack(">d", struct.pack(">Q", bits))[0]
    if math.isnan(v):
        return f"NaN(0x{bits:016x})"
    return repr(v)


def fmt(arg) -> str:
    """Format one canonical operand."""
    if isinstance(arg, int):
        return str(arg)
    if isinstance(arg, str):
        return name(arg)
    if isinstance(arg, Label):
        return arg.name
    if isinstance(arg, Raw):
        return arg.text
    tag = arg[0]
    if tag == "ref":
        _, kind, owner, nm, desc = arg
        return f"{kind} {name(owner)}.{name(nm)}:{name(desc)}"
    if tag == "int" or tag == "long":
        return f"{tag} {arg[1]}"
    if tag == "float":
        return f"float {_float_text(arg[1])}"
    if tag == "double":
        return f"double {_double_text(arg[1])}"
    if tag == "String":
        return f"String {quote(arg[1])}"
    if tag == "Class":
        return f"Class {name(arg[1])}"
    if tag == "MethodType":
        return f"MethodType {name(arg[1])}"
    if tag == "MethodHandle":
        return f"MethodHandle {arg[1]} {fmt(arg[2])}"
    if tag == "Dynamic":
        return f"Dynamic {name(arg[1])}:{name(arg[2])} {fmt(arg[3])}"
    if tag == "bsm":
        return "bsm[" + ", ".join(fmt(a) for a in (arg[1], *arg[2])) + "]"
    if tag == "indy":
        return f"{name(arg[1])}:{name(arg[2])} {fmt(arg[3])}"
    if tag == "cases":
        return "{" + ", ".join(f"{k}: {fmt(t)}" for k, t in arg[1]) + "}"
    if tag == "targets":
        return "[" + ", ".join(fmt(t) for t in arg[1]) + "]"
    if tag == "default":
        return f"default={fmt(arg[1])}"
    if tag == "range":
        return f"{arg[1]}..{arg[2]}"
    raise RenderFailure(f"cannot format operand {arg!r}")


def instr_text(ins: CInstr) -> str:
    if ins.op == ":":
        return f"{ins.args[0].name}:"
    if not ins.args:
        return ins.op
    return ins.op + " " + " ".join(fmt(a) for a in ins.args)


# ---------------------------------------------------------------- resolution


class _Resolver:
    def __init__(self, cf: M.ClassFile):
        self.cf = cf
        self.pool = cf.constant_pool
        bsm = cf.attribute("BootstrapMethods")
        self.bootstrap = () if bsm is None or bsm.opaque else bsm.payload.methods

    def utf8(self, i: int) -> str:
        return self.pool.utf8(i)

    def class_name(self, i: int) -> str:
        return self.pool.class_name(i)

    def ref(self, i: int) -> tuple:
        entry = self.pool.get(i, M.FIELDREF, M.METHODREF, M.INTERFACE_METHODREF)
        kind = {M.FIELDREF: "Field", M.METHODREF: "Method",
                M.INTERFACE_METHODREF: "InterfaceMethod"}[entry.tag]
        owner, nm, desc = self.pool.member_ref(i)
        return ("ref", kind, owner, nm, desc)

    def const(self, i: int, depth: int = 0) -> tuple:
        if depth > 32:
            raise RenderFailure("constant dynamic nesting too deep")
        e = self.pool.get(i)
        t = e.tag
        if t == M.INTEGER:
            return ("int", e.args[0])
        if t == M.LONG:
            return ("long", e.args[0])
        if t == M.FLOAT:
            return ("float", e.args[0])
        if t == M.DOUBLE:
            return ("double", e.args[0])
        if t == M.STRING:
            return ("String", self.utf8(e.args[0]))
        if t == M.CLASS:
            return ("Class", self.utf8(e.args[0]))
        if t == M.METHOD_TYPE:
            return ("MethodType", self.utf8(e.args[0]))
        if t == M.METHOD_HANDLE:
            return ("MethodHandle", HANDLE_KINDS[e.args[0]], self.ref(e.args[1]))
        if t == M.DYNAMIC:
            nm, desc = self.pool.name_and_type(e.args[1])
            return ("Dynamic", nm, desc, self.bsm(e.args[0], depth + 1))
        if t == M.UTF8:
            return ("Utf8", e.args[0])
        raise RenderFailure(f"pool entry #{i} ({e.kind}) is not a constant")

    def bsm(self, index: int, depth: int = 0) -> tuple:
        if index >= len(self.bootstrap):
            raise RenderFailure(f"missing bootstrap method {index}")
        ref, args = self.bootstrap[index]
        return ("bsm", self.const(ref, depth), tuple(self.const(a, depth) for a in args))

    def indy(self, i: int) -> tuple:
        e = self.pool.get(i, M.INVOKE_DYNAMIC)
        nm, desc = self.pool.name_and_type(e.args[1])
        return ("indy", nm, desc, self.bsm(e.args[0]))

    # -- annotations -----------------------------------------------------

    def element(self, ev: M.ElementValue) -> str:
        t = ev.tag
        if t in "BCISZ":
            return f"{t} {self.pool.get(ev.value, M.INTEGER).args[0]}"
        if t == "J":
            return f"J {self.pool.get(ev.value, M.LONG).args[0]}"
        if t == "F":
            return f"F {_float_text(self.pool.get(ev.value, M.FLOAT).args[0])}"
        if t == "D":
            return f"D {_double_text(self.pool.get(ev.value, M.DOUBLE).args[0])}"
        if t == "s":
            return f"s {quote(self.utf8(ev.value))}"
        if t == "c":
            return f"c {name(self.utf8(ev.value))}"
        if t == "e":
            return f"e {name(self.utf8(ev.value[0]))}.{name(self.utf8(ev.value[1]))}"
        if t == "@":
            return self.annotation(ev.value)
        return "[" + ", ".join(self.element(v) for v in ev.value) + "]"

    def annotation(self, a: M.Annotation) -> str:
        pairs = ", ".join(f"{name(self.utf8(n))}={self.element(v)}" for n, v in a.pairs)
        return f"@{name(self.utf8(a.type_index))}({pairs})"


# ---------------------------------------------------------------- code


def _collect_labels(code: M.Code) -> dict[int, Label]:
    """Map every referenced offset to a label, numbered in code order."""
    seen: set[int] = set()
    for ins in code.instructions:
        kind = KINDS[ins.opcode]
        if kind == BRANCH2 or kind == BRANCH4:
            seen.add(ins.operands[0])
        elif kind == TABLESWITCH:
            seen.add(ins.operands[0])
            seen.update(ins.operands[3])
        elif kind == LOOKUPSWITCH:
            seen.add(ins.operands[0])
            seen.update(t for _, t in ins.operands[1])
    for h in code.exception_table:
        seen.update((h.start_pc, h.end_pc, h.handler_pc))
    for attr in code.attributes:
        if isinstance(attr.payload, M.TypeAnnotations) and attr.name not in EXCLUDED_ATTRIBUTES:
            for t in attr.payload.annotations:
                seen.update(_type_annotation_offsets(t))
    return {off: Label(f"L{k}") for k, off in enumerate(sorted(seen))}


def _type_annotation_offsets(t: M.TypeAnnotation) -> list[int]:
    tt = t.target_type
    if tt in (0x40, 0x41):
        out = []
        for s, n, _ in t.target_info[0]:
            out += [s, s + n]
        return out
    if 0x43 <= tt <= 0x4B:
        return [t.target_info[0]]
    return []


def _canon_instruction(ins: M.Instruction, r: _Resolver, labels: dict[int, str]) -> CInstr:
    op = ins.opcode
    ops = ins.operands
    if op in SHORTHAND:
        base, slot = SHORTHAND[op]
        return CInstr(MNEMONICS[base], (slot,))
    op = WIDTH_ALIAS.get(op, op)
    mn = MNEMONICS[op]
    kind = KINDS[op]
    if kind == NONE:
        return CInstr(mn)
    if kind == LOCAL or kind == BYTE or kind == SHORT or kind == IINC:
        return CInstr(mn, ops)
    if kind == CP1 or (kind == CP2 and mn in ("ldc", "ldc2_w")):
        return CInstr(mn, (r.const(ops[0]),))
    if kind == CP2:
        if mn in ("new", "anewarray", "checkcast", "instanceof"):
            return CInstr(mn, (r.class_name(ops[0]),))
        return CInstr(mn, (r.ref(ops[0]),))
    if kind == INVOKEINTERFACE:
        return CInstr(mn, (r.ref(ops[0]),))
    if kind == INVOKEDYNAMIC:
        return CInstr(mn, (r.indy(ops[0]),))
    if kind == BRANCH2 or kind == BRANCH4:
        return CInstr(mn, (labels[ops[0]],))
    if kind == NEWARRAY:
        return CInstr(mn, (NEWARRAY_TYPES.get(ops[0], f"type{ops[0]}"),))
    if kind == MULTIANEWARRAY:
        return CInstr(mn, (r.class_name(ops[0]), ops[1]))
    if kind == TABLESWITCH:
        default, low, high, targets, _ = ops
        return CInstr(mn, (("range", low, high), ("default", labels[default]),
                           ("targets", tuple(labels[t] for t in targets))))
    if kind == LOOKUPSWITCH:
        default, pairs, _ = ops
        return CInstr(mn, (("default", labels[default]),
                           ("cases", tuple((k, labels[t]) for k, t in pairs))))
    raise RenderFailure(f"cannot render opcode {mn}")


def _canon_code(code: M.Code, r: _Resolver) -> tuple[tuple[CInstr, ...], tuple[CInstr, ...]]:
    labels = _collect_labels(code)
    out: list[CInstr] = []
    for ins in code.instructions:
        label = labels.get(ins.offset)
        if label is not None:
            out.append(CInstr(":", (label,)))
        out.append(_canon_instruction(ins, r, labels))
    end = labels.get(code.code_length)
    if end is not None:
        out.append(CInstr(":", (end,)))
    extra = []
    for h in code.exception_table:
        catch = r.class_name(h.catch_type) if h.catch_type else "any"
        extra.append(CInstr("handler", (labels[h.start_pc], labels[h.end_pc],
                                        labels[h.handler_pc], catch)))
    for attr in sorted(code.attributes, key=lambda a: a.name):
        if attr.name in EXCLUDED_ATTRIBUTES:
            continue
        if attr.opaque:
            extra.append(CInstr("attribute", (attr.name, Raw(f"sha256={attr.payload_digest()}"))))
        elif isinstance(attr.payload, M.TypeAnnotations):
            for t in attr.payload.annotations:
                extra.append(CInstr(attr.name, _code_type_annotation(t, r, labels)))
    return tuple(out), tuple(extra)


def _code_type_annotation(t: M.TypeAnnotation, r: _Resolver, labels) -> tuple:
    tt = t.target_type
    info = t.target_info
    parts: list = [Raw(f"target=0x{tt:02x}")]
    if tt in (0x40, 0x41):
        for s, n, i in info[0]:
            parts += [labels[s], labels[s + n], i]
    elif 0x43 <= tt <= 0x4B:
        parts += [labels[info[0]], *info[1:]]
    else:
        parts += list(info)
    path = "".join(f"({k},{a})" for k, a in t.type_path)
    return (*parts, Raw(f"path=[{path}] {r.annotation(t.annotation)}"))


def _type_annotation_text(t: M.TypeAnnotation, r: _Resolver) -> str:
    info_text = " ".join(map(str, t.target_info))
    path = "".join(f"({k},{a})" for k, a in t.type_path)
    return f"target=0x{t.target_type:02x} info=[{info_text}] path=[{path}] {r.annotation(t.annotation)}"


# ---------------------------------------------------------------- members/class


def _attribute_lines(attrs, r: _Resolver, indent: str = "  ") -> list[str]:
    lines: list[str] = []
    for attr in sorted(attrs, key=lambda a: a.name):
        n = attr.name
        p = attr.payload
        if n in EXCLUDED_ATTRIBUTES or n == "Code":
            continue
        if attr.opaque:
            lines.append(f"{indent}attribute {name(n)} sha256={attr.payload_digest()}")
        elif n == "ConstantValue":
            lines.append(f"{indent}ConstantValue {fmt(r.const(p.index))}")
        elif n == "Signature":
            lines.append(f"{indent}Signature {name(r.utf8(p.index))}")
        elif n in ("Synthetic", "Deprecated"):
            lines.append(f"{indent}{n}")
        elif n in ("RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations"):
            for a in p.annotations:
                lines.append(f"{indent}{n} {r.annotation(a)}")
        elif n in ("RuntimeVisibleParameterAnnotations", "RuntimeInvisibleParameterAnnotations"):
            lines.append(f"{indent}{n} parameters={len(p.parameters)}")
            for k, annotations in enumerate(p.parameters):
                for a in annotations:
                    lines.append(f"{indent}{n} p{k} {r.annotation(a)}")
        elif n in ("RuntimeVisibleTypeAnnotations", "RuntimeInvisibleTypeAnnotations"):
            for t in p.annotations:
                lines.append(f"{indent}{n} {_type_annotation_text(t, r)}")
        elif n == "AnnotationDefault":
            lines.append(f"{indent}AnnotationDefault {r.element(p.value)}")
        elif n == "Exceptions":
            lines.append(f"{indent}Exceptions " + ", ".join(name(r.class_name(i)) for i in p.indices))
        elif n == "MethodParameters":
            params = ", ".join(f"{name(r.utf8(i)) if i else '-'} 0x{fl:04x}" for i, fl in p.parameters)
            lines.append(f"{indent}MethodParameters [{params}]")
        elif n == "InnerClasses":
            rows = []
            for inner, outer, nm, fl in p.entries:
                rows.append(f"{indent}InnerClass {name(r.class_name(inner))} "
                            f"outer={name(r.class_name(outer)) if outer else '-'} "
                            f"name={name(r.utf8(nm)) if nm else '-'} {flags(fl, INNER_FLAGS)}")
            lines.extend(sorted(rows))
        elif n == "EnclosingMethod":
            method = "-"
            if p.method_index:
                method = ":".join(map(name, r.pool.name_and_type(p.method_index)))
            lines.append(f"{indent}EnclosingMethod {name(r.class_name(p.class_index))} {method}")
        elif n == "NestHost":
            lines.append(f"{indent}NestHost {name(r.class_name(p.index))}")
        elif n == "NestMembers":
            members = sorted(name(r.class_name(i)) for i in p.indices)
            lines.append(f"{indent}NestMembers " + ", ".join(members))
        elif n == "PermittedSubclasses":
            lines.append(f"{indent}PermittedSubclasses " + ", ".join(name(r.class_name(i)) for i in p.indices))
        elif n == "ModulePackages":
            pkgs = sorted(name(r.utf8(r.pool.get(i, M.PACKAGE).args[0])) for i in p.indices)
            lines.append(f"{indent}ModulePackages " + ", ".join(pkgs))
        elif n == "ModuleMainClass":
            lines.append(f"{indent}ModuleMainClass {name(r.class_name(p.index))}")
        elif n == "Module":
            lines.extend(_module_lines(p, r, indent))
        elif n == "Record":
            for c in p.components:
                lines.append(f"{indent}RecordComponent {name(r.utf8(c.name_index))}:{name(r.utf8(c.descriptor_index))}")
                lines.extend(_attribute_lines(c.attributes, r, indent + "  "))
        else:  # pragma: no cover - every decoded attribute is handled above
            raise RenderFailure(f"no renderer for attribute {n}")
    return lines


def _module_lines(p: M.Module, r: _Resolver, indent: str) -> list[str]:
    def mod(i):
        return name(r.utf8(r.pool.get(i, M.MODULE).args[0]))

    def pkg(i):
        return name(r.utf8(r.pool.get(i, M.PACKAGE).args[0]))

    def opt(i):
        return name(r.utf8(i)) if i else "-"

    lines = [f"{indent}Module {mod(p.name_index)} 0x{p.flags:04x} version={opt(p.version_index)}"]
    for i, fl, v in p.requires:
        lines.append(f"{indent}  requires {mod(i)} 0x{fl:04x} version={opt(v)}")
    for label, rows in (("exports", p.exports), ("opens", p.opens)):
        for i, fl, to in rows:
            lines.append(f"{indent}  {label} {pkg(i)} 0x{fl:04x} to [{', '.join(mod(t) for t in to)}]")
    for u in p.uses:
        lines.append(f"{indent}  uses {name(r.class_name(u))}")
    for i, with_ in p.provides:
        lines.append(f"{indent}  provides {name(r.class_name(i))} with "
                     f"[{', '.join(name(r.class_name(w)) for w in with_)}]")
    return lines


def _member(cf: M.ClassFile, m: M.MemberInfo, kind: str, r: _Resolver) -> CanonMember:
    nm = r.utf8(m.name_index)
    desc = r.utf8(m.descriptor_index)
    if kind == "field":
        head = f"field {name(nm)}:{name(desc)} flags {flags(m.access_flags, FIELD_FLAGS)}"
    else:
        head = f"method {name(nm)}{name(desc)} flags {flags(m.access_flags, METHOD_FLAGS)}"
    lines = (head, *_attribute_lines(m.attributes, r))
    code = None
    code_lines: tuple[CInstr, ...] = ()
    codes = [a for a in m.attributes if a.name == "Code"]
    if codes:
        attr = codes[0]
        if attr.opaque:
            code_lines = (CInstr("attribute", ("Code", Raw(f"sha256={attr.payload_digest()}"))),)
            code = ()
        else:
            code, code_lines = _canon_code(attr.payload, r)
    return CanonMember(kind, nm, desc, lines, code, code_lines)


def canonical_model(cf: M.ClassFile) -> CanonClass:
    """Build the Level 2 canonical model of a class."""
    try:
        r = _Resolver(cf)
        header = [
            f"class {name(cf.name)} flags {flags(cf.access_flags, CLASS_FLAGS)}",
            f"  super {name(cf.super_name) if cf.super_class else '-'}",
        ]
        if cf.interfaces:
            header.append("  interfaces " + ", ".join(name(r.class_name(i)) for i in cf.interfaces))
        header.extend(_attribute_lines(cf.attributes, r))
        fields = sorted((_member(cf, m, "field", r) for m in cf.fields), key=_member_key)
        methods = sorted((_member(cf, m, "method", r) for m in cf.methods), key=_member_key)
    except (IndexError, KeyError, MalformedClass) as exc:
        raise RenderFailure(f"cannot resolve operand: {exc}") from exc
    return CanonClass(tuple(header), tuple(fields), tuple(methods))


def _member_key(m: CanonMember):
    return (m.name, m.descriptor, m.lines, m.code or (), m.code_lines)


def member_lines(m: CanonMember) -> list[str]:
    lines = list(m.lines)
    if m.code is not None:
        lines.append("  code:")
        lines.extend("    " + instr_text(i) for i in m.code)
        lines.extend("    " + instr_text(i) for i in m.code_lines)
    return lines


def text_of(model: CanonClass, level: int = 2) -> CanonicalText:
    lines = list(model.header)
    for m in model.fields + model.methods:
        lines.extend(member_lines(m))
    return CanonicalText(tuple(lines), level)


def render_level2(cf: M.ClassFile) -> CanonicalText:
    """Render ``cf`` to its Level 2 canonical text."""
    return text_of(canonical_model(cf), 2)
