"""Structural model of a parsed class file.

All model objects are immutable.  Every attribute payload that holds
constant-pool indices implements ``remap(f)``, returning a copy with each
index ``i`` replaced by ``f(i)``; index 0 (the "absent" marker used by
several attributes) is always passed through unchanged.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, NamedTuple, Union

# constant pool tags
UTF8 = 1
INTEGER = 3
FLOAT = 4
LONG = 5
DOUBLE = 6
CLASS = 7
STRING = 8
FIELDREF = 9
METHODREF = 10
INTERFACE_METHODREF = 11
NAME_AND_TYPE = 12
METHOD_HANDLE = 15
METHOD_TYPE = 16
DYNAMIC = 17
INVOKE_DYNAMIC = 18
MODULE = 19
PACKAGE = 20

TAG_NAMES = {
    UTF8: "Utf8", INTEGER: "Integer", FLOAT: "Float", LONG: "Long",
    DOUBLE: "Double", CLASS: "Class", STRING: "String", FIELDREF: "Fieldref",
    METHODREF: "Methodref", INTERFACE_METHODREF: "InterfaceMethodref",
    NAME_AND_TYPE: "NameAndType", METHOD_HANDLE: "MethodHandle",
    METHOD_TYPE: "MethodType", DYNAMIC: "Dynamic",
    INVOKE_DYNAMIC: "InvokeDynamic", MODULE: "Module", PACKAGE: "Package",
}

# which positions of ``ConstEntry.args`` are pool indices
REF_POSITIONS: dict[int, tuple[int, ...]] = {
    UTF8: (), INTEGER: (), FLOAT: (), LONG: (), DOUBLE: (),
    CLASS: (0,), STRING: (0,), FIELDREF: (0, 1), METHODREF: (0, 1),
    INTERFACE_METHODREF: (0, 1), NAME_AND_TYPE: (0, 1), METHOD_HANDLE: (1,),
    METHOD_TYPE: (0,), DYNAMIC: (1,), INVOKE_DYNAMIC: (1,), MODULE: (0,),
    PACKAGE: (0,),
}

LOADABLE = frozenset({INTEGER, FLOAT, STRING, CLASS, METHOD_HANDLE,
                      METHOD_TYPE, DYNAMIC})

IndexMap = Callable[[int], int]


def _m(f: IndexMap, i: int) -> int:
    return f(i) if i else 0


class ConstEntry(NamedTuple):
    """One constant pool entry.

    ``args`` holds the raw operands: the decoded string for Utf8, the
    signed value for Integer/Long, the raw IEEE bit pattern for
    Float/Double, and pool indices (or the reference kind / bootstrap
    index) for the symbolic kinds.
    """

    tag: int
    args: tuple

    @property
    def kind(self) -> str:
        return TAG_NAMES[self.tag]

    @property
    def wide(self) -> bool:
        return self.tag == LONG or self.tag == DOUBLE

    def remap(self, f: IndexMap) -> "ConstEntry":
        pos = REF_POSITIONS[self.tag]
        if not pos:
            return self
        args = list(self.args)
        for p in pos:
            args[p] = f(args[p])
        return ConstEntry(self.tag, tuple(args))


class ConstantPool:
    """1-based constant pool; slot 0 and the slot after Long/Double are None."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        self.entries: tuple = tuple(entries)

    def __len__(self) -> int:
        # the constant_pool_count value
        return len(self.entries)

    def __getitem__(self, index: int) -> ConstEntry:
        return self.entries[index]

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstantPool) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        return f"ConstantPool({len(self.entries) - 1} slots)"

    def get(self, index: int, *tags: int) -> ConstEntry:
        if index <= 0 or index >= len(self.entries):
            raise IndexError(f"pool index {index} out of range")
        entry = self.entries[index]
        if entry is None:
            raise IndexError(f"pool index {index} is an unusable slot")
        if tags and entry.tag not in tags:
            want = "/".join(TAG_NAMES[t] for t in tags)
            raise IndexError(f"pool index {index} is {entry.kind}, expected {want}")
        return entry

    def utf8(self, index: int) -> str:
        return self.get(index, UTF8).args[0]

    def class_name(self, index: int) -> str:
        return self.utf8(self.get(index, CLASS).args[0])

    def name_and_type(self, index: int) -> tuple[str, str]:
        name, desc = self.get(index, NAME_AND_TYPE).args
        return self.utf8(name), self.utf8(desc)

    def member_ref(self, index: int) -> tuple[str, str, str]:
        """Resolve a Fieldref/Methodref/InterfaceMethodref to (owner, name, desc)."""
        cls, nat = self.get(index, FIELDREF, METHODREF, INTERFACE_METHODREF).args
        return (self.class_name(cls), *self.name_and_type(nat))

    def indices(self):
        """Yield every usable pool index."""
        for i, entry in enumerate(self.entries):
            if entry is not None:
                yield i


# ---------------------------------------------------------------- code


class Instruction(NamedTuple):
    """A decoded instruction.

    Branch operands are absolute byte offsets inside the method.  Switch
    operands are ``(default, low, high, targets, padding)`` and
    ``(default, pairs, padding)``; ``padding`` is empty unless the original
    padding bytes were nonzero.
    """

    offset: int
    opcode: int
    operands: tuple = ()
    wide: bool = False

    @property
    def mnemonic(self) -> str:
        from .opcodes import MNEMONICS

        return MNEMONICS[self.opcode]


class ExceptionHandler(NamedTuple):
    start_pc: int
    end_pc: int
    handler_pc: int
    catch_type: int

    def remap(self, f: IndexMap) -> "ExceptionHandler":
        return self._replace(catch_type=_m(f, self.catch_type))


# ---------------------------------------------------------------- attributes


@dataclass(frozen=True)
class AttributeInfo:
    name_index: int
    name: str
    payload: Any  # decoded payload object, or bytes when opaque

    @property
    def opaque(self) -> bool:
        return isinstance(self.payload, (bytes, bytearray))

    def remap(self, f: IndexMap) -> "AttributeInfo":
        payload = self.payload if self.opaque else self.payload.remap(f)
        return AttributeInfo(f(self.name_index), self.name, payload)

    def payload_digest(self) -> str:
        data = self.payload if self.opaque else repr(self.payload).encode()
        return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class Code:
    max_stack: int
    max_locals: int
    instructions: tuple[Instruction, ...]
    code_length: int
    exception_table: tuple[ExceptionHandler, ...] = ()
    attributes: tuple[AttributeInfo, ...] = ()

    def remap(self, f: IndexMap) -> "Code":
        from .code import remap_instruction_indices

        return replace(
            self,
            instructions=tuple(remap_instruction_indices(i, f) for i in self.instructions),
            exception_table=tuple(h.remap(f) for h in self.exception_table),
            attributes=tuple(a.remap(f) for a in self.attributes),
        )


@dataclass(frozen=True)
class SingleIndex:
    """Attributes whose body is one u2 pool index (ConstantValue,
    SourceFile, Signature, NestHost, ModuleMainClass)."""

    index: int

    def remap(self, f: IndexMap) -> "SingleIndex":
        return SingleIndex(f(self.index))


@dataclass(frozen=True)
class IndexList:
    """Attributes whose body is a counted list of u2 pool indices
    (Exceptions, NestMembers, PermittedSubclasses, ModulePackages)."""

    indices: tuple[int, ...]

    def remap(self, f: IndexMap) -> "IndexList":
        return IndexList(tuple(f(i) for i in self.indices))


@dataclass(frozen=True)
class Marker:
    """Zero-length attributes (Deprecated, Synthetic)."""

    def remap(self, f: IndexMap) -> "Marker":
        return self


@dataclass(frozen=True)
class RawBytes:
    """SourceDebugExtension: uninterpreted payload without pool references."""

    data: bytes

    def remap(self, f: IndexMap) -> "RawBytes":
        return self


@dataclass(frozen=True)
class LineNumberTable:
    entries: tuple[tuple[int, int], ...]  # (start_pc, line)

    def remap(self, f: IndexMap) -> "LineNumberTable":
        return self


@dataclass(frozen=True)
class LocalVariableTable:
    # (start_pc, length, name_index, descriptor_or_signature_index, slot)
    entries: tuple[tuple[int, int, int, int, int], ...]

    def remap(self, f: IndexMap) -> "LocalVariableTable":
        return type(self)(tuple((s, n, f(a), f(b), k) for s, n, a, b, k in self.entries))


@dataclass(frozen=True)
class LocalVariableTypeTable(LocalVariableTable):
    pass


@dataclass(frozen=True)
class InnerClasses:
    # (inner_class_info, outer_class_info, inner_name, access_flags)
    entries: tuple[tuple[int, int, int, int], ...]

    def remap(self, f: IndexMap) -> "InnerClasses":
        return InnerClasses(tuple((f(a), _m(f, b), _m(f, c), d) for a, b, c, d in self.entries))


@dataclass(frozen=True)
class EnclosingMethod:
    class_index: int
    method_index: int

    def remap(self, f: IndexMap) -> "EnclosingMethod":
        return EnclosingMethod(f(self.class_index), _m(f, self.method_index))


@dataclass(frozen=True)
class BootstrapMethods:
    methods: tuple[tuple[int, tuple[int, ...]], ...]  # (method_ref, arguments)

    def remap(self, f: IndexMap) -> "BootstrapMethods":
        return BootstrapMethods(tuple((f(r), tuple(f(a) for a in args)) for r, args in self.methods))


@dataclass(frozen=True)
class MethodParameters:
    parameters: tuple[tuple[int, int], ...]  # (name_index or 0, access_flags)

    def remap(self, f: IndexMap) -> "MethodParameters":
        return MethodParameters(tuple((_m(f, n), fl) for n, fl in self.parameters))


class ElementValue(NamedTuple):
    """``value`` is a pool index for constant tags and 'c', a
    (type_name, const_name) index pair for 'e', an Annotation for '@' and
    a tuple of ElementValue for '['."""

    tag: str
    value: Any

    def remap(self, f: IndexMap) -> "ElementValue":
        t = self.tag
        if t == "e":
            return ElementValue(t, (f(self.value[0]), f(self.value[1])))
        if t == "@":
            return ElementValue(t, self.value.remap(f))
        if t == "[":
            return ElementValue(t, tuple(v.remap(f) for v in self.value))
        return ElementValue(t, f(self.value))


class Annotation(NamedTuple):
    type_index: int
    pairs: tuple  # ((name_index, ElementValue), ...)

    def remap(self, f: IndexMap) -> "Annotation":
        return Annotation(f(self.type_index), tuple((f(n), v.remap(f)) for n, v in self.pairs))


class TypeAnnotation(NamedTuple):
    target_type: int
    target_info: tuple
    type_path: tuple  # ((kind, argument_index), ...)
    annotation: Annotation

    def remap(self, f: IndexMap) -> "TypeAnnotation":
        return self._replace(annotation=self.annotation.remap(f))


@dataclass(frozen=True)
class Annotations:
    annotations: tuple[Annotation, ...]

    def remap(self, f: IndexMap) -> "Annotations":
        return Annotations(tuple(a.remap(f) for a in self.annotations))


@dataclass(frozen=True)
class ParameterAnnotations:
    parameters: tuple[tuple[Annotation, ...], ...]

    def remap(self, f: IndexMap) -> "ParameterAnnotations":
        return ParameterAnnotations(tuple(tuple(a.remap(f) for a in p) for p in self.parameters))


@dataclass(frozen=True)
class TypeAnnotations:
    annotations: tuple[TypeAnnotation, ...]

    def remap(self, f: IndexMap) -> "TypeAnnotations":
        return TypeAnnotations(tuple(a.remap(f) for a in self.annotations))


@dataclass(frozen=True)
class AnnotationDefault:
    value: ElementValue

    def remap(self, f: IndexMap) -> "AnnotationDefault":
        return AnnotationDefault(self.value.remap(f))


# verification type tags
ITEM_OBJECT = 7
ITEM_UNINITIALIZED = 8


class Frame(NamedTuple):
    frame_type: int
    offset_delta: int
    locals: tuple = ()  # ((tag, value), ...); value is None except for 7 and 8
    stack: tuple = ()


def _remap_vtypes(vtypes: tuple, f: IndexMap) -> tuple:
    return tuple((t, f(v)) if t == ITEM_OBJECT else (t, v) for t, v in vtypes)


@dataclass(frozen=True)
class StackMapTable:
    frames: tuple[Frame, ...]

    def remap(self, f: IndexMap) -> "StackMapTable":
        return StackMapTable(tuple(
            fr._replace(locals=_remap_vtypes(fr.locals, f), stack=_remap_vtypes(fr.stack, f))
            for fr in self.frames
        ))


@dataclass(frozen=True)
class Module:
    name_index: int
    flags: int
    version_index: int
    requires: tuple[tuple[int, int, int], ...]
    exports: tuple[tuple[int, int, tuple[int, ...]], ...]
    opens: tuple[tuple[int, int, tuple[int, ...]], ...]
    uses: tuple[int, ...]
    provides: tuple[tuple[int, tuple[int, ...]], ...]

    def remap(self, f: IndexMap) -> "Module":
        def targets(rows):
            return tuple((f(i), fl, tuple(f(t) for t in to)) for i, fl, to in rows)

        return Module(
            f(self.name_index), self.flags, _m(f, self.version_index),
            tuple((f(i), fl, _m(f, v)) for i, fl, v in self.requires),
            targets(self.exports), targets(self.opens),
            tuple(f(u) for u in self.uses),
            tuple((f(i), tuple(f(w) for w in with_)) for i, with_ in self.provides),
        )


@dataclass(frozen=True)
class RecordComponent:
    name_index: int
    descriptor_index: int
    attributes: tuple[AttributeInfo, ...]

    def remap(self, f: IndexMap) -> "RecordComponent":
        return RecordComponent(f(self.name_index), f(self.descriptor_index),
                               tuple(a.remap(f) for a in self.attributes))


@dataclass(frozen=True)
class Record:
    components: tuple[RecordComponent, ...]

    def remap(self, f: IndexMap) -> "Record":
        return Record(tuple(c.remap(f) for c in self.components))


Payload = Union[
    bytes, Code, SingleIndex, IndexList, Marker, RawBytes, LineNumberTable,
    LocalVariableTable, InnerClasses, EnclosingMethod, BootstrapMethods,
    MethodParameters, Annotations, ParameterAnnotations, TypeAnnotations,
    AnnotationDefault, StackMapTable, Module, Record,
]

DEBUG_ATTRIBUTES = frozenset({
    "LineNumberTable", "LocalVariableTable", "LocalVariableTypeTable",
    "SourceFile", "SourceDebugExtension", "Deprecated",
})


# ---------------------------------------------------------------- members / class


@dataclass(frozen=True)
class MemberInfo:
    access_flags: int
    name_index: int
    descriptor_index: int
    attributes: tuple[AttributeInfo, ...] = ()

    def remap(self, f: IndexMap) -> "MemberInfo":
        return MemberInfo(self.access_flags, f(self.name_index), f(self.descriptor_index),
                          tuple(a.remap(f) for a in self.attributes))

    def attribute(self, name: str) -> AttributeInfo | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None


MAX_SUPPORTED_MAJOR = 61


@dataclass(frozen=True)
class ClassFile:
    minor_version: int
    major_version: int
    constant_pool: ConstantPool
    access_flags: int
    this_class: int
    super_class: int
    interfaces: tuple[int, ...] = ()
    fields: tuple[MemberInfo, ...] = ()
    methods: tuple[MemberInfo, ...] = ()
    attributes: tuple[AttributeInfo, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def name(self) -> str:
        return self.constant_pool.class_name(self.this_class)

    @property
    def super_name(self) -> str | None:
        return self.constant_pool.class_name(self.super_class) if self.super_class else None

    @property
    def best_effort(self) -> bool:
        """True when the major version is newer than fully supported."""
        return self.major_version > MAX_SUPPORTED_MAJOR

    def attribute(self, name: str) -> AttributeInfo | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def member_name(self, m: MemberInfo) -> str:
        return self.constant_pool.utf8(m.name_index)

    def member_descriptor(self, m: MemberInfo) -> str:
        return self.constant_pool.utf8(m.descriptor_index)

    def remap(self, f: IndexMap, pool: ConstantPool) -> "ClassFile":
        """Rewrite every pool index through ``f`` and install ``pool``."""
        return replace(
            self,
            constant_pool=pool,
            this_class=f(self.this_class),
            super_class=_m(f, self.super_class),
            interfaces=tuple(f(i) for i in self.interfaces),
            fields=tuple(m.remap(f) for m in self.fields),
            methods=tuple(m.remap(f) for m in self.methods),
            attributes=tuple(a.remap(f) for a in self.attributes),
        )

    def has_opaque_attributes(self) -> bool:
        def scan(attrs) -> bool:
            for a in attrs:
                if a.opaque:
                    return True
                if isinstance(a.payload, Code) and scan(a.payload.attributes):
                    return True
                if isinstance(a.payload, Record) and any(scan(c.attributes) for c in a.payload.components):
                    return True
            return False

        return scan(self.attributes) or any(scan(m.attributes) for m in self.fields + self.methods)
