"""A small class assembler for building test fixtures without a compiler.

Code is written as a list of items: a bare mnemonic (``"iadd"``), a tuple
``(mnemonic, *operands)`` with symbolic operands, or ``("label", name)``.
Branch operands name labels.  Pool operands are given symbolically and
interned into the constant pool on the fly.
"""

from __future__ import annotations

import struct
from dataclasses import replace

from . import model as M
from .code import relayout
from .descriptors import parse_method_descriptor, slot_size
from .opcodes import (
    BRANCH2, BRANCH4, BYTE, CP1, CP2, IINC, INVOKEDYNAMIC, INVOKEINTERFACE,
    KINDS, LOCAL, LOOKUPSWITCH, MULTIANEWARRAY, NEWARRAY, NEWARRAY_TYPES, NONE,
    OPCODES, SHORT, TABLESWITCH,
)
from .writer import serialize_class

_STRIDE = 1 << 20  # placeholder offset spacing before relayout
_NEWARRAY_CODES = {v: k for k, v in NEWARRAY_TYPES.items()}
_REF_KINDS = {"getField": 1, "getStatic": 2, "putField": 3, "putStatic": 4,
              "invokeVirtual": 5, "invokeStatic": 6, "invokeSpecial": 7,
              "newInvokeSpecial": 8, "invokeInterface": 9}


def float_bits(v: float) -> int:
    return struct.unpack(">I", struct.pack(">f", v))[0]


def double_bits(v: float) -> int:
    return struct.unpack(">Q", struct.pack(">d", v))[0]


class ClassBuilder:
    def __init__(self, name: str, super_name: str | None = "java/lang/Object",
                 access: int = 0x0021, major: int = 52, minor: int = 0, interfaces=()):
        self.entries: list = [None]
        self._index: dict = {}
        self.major, self.minor, self.access = major, minor, access
        self.this_class = self.cls(name)
        self.super_class = self.cls(super_name) if super_name else 0
        self.interfaces = [self.cls(i) for i in interfaces]
        self.fields: list[M.MemberInfo] = []
        self.methods: list[M.MemberInfo] = []
        self.attributes: list[M.AttributeInfo] = []
        self.bootstraps: list[tuple[int, tuple[int, ...]]] = []

    # -- pool ------------------------------------------------------------

    def _add(self, tag: int, *args) -> int:
        key = (tag, args)
        if key in self._index:
            return self._index[key]
        index = len(self.entries)
        self.entries.append(M.ConstEntry(tag, args))
        if tag in (M.LONG, M.DOUBLE):
            self.entries.append(None)
        self._index[key] = index
        return index

    def utf8(self, s: str) -> int:
        return self._add(M.UTF8, s)

    def cls(self, name: str) -> int:
        return self._add(M.CLASS, self.utf8(name))

    def string(self, s: str) -> int:
        return self._add(M.STRING, self.utf8(s))

    def nat(self, name: str, desc: str) -> int:
        return self._add(M.NAME_AND_TYPE, self.utf8(name), self.utf8(desc))

    def ref(self, tag: int, owner: str, name: str, desc: str) -> int:
        return self._add(tag, self.cls(owner), self.nat(name, desc))

    def method_handle(self, kind: str, tag: int, owner: str, name: str, desc: str) -> int:
        return self._add(M.METHOD_HANDLE, _REF_KINDS[kind], self.ref(tag, owner, name, desc))

    def constant(self, value) -> int:
        """Intern a loadable constant: int, str, or a typed ``(kind, value)`` pair."""
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            return self._add(M.INTEGER, value)
        if isinstance(value, str):
            return self.string(value)
        kind, v = value
        if kind == "int":
            return self._add(M.INTEGER, v)
        if kind == "long":
            return self._add(M.LONG, v)
        if kind == "float":
            return self._add(M.FLOAT, float_bits(v) if isinstance(v, float) else v)
        if kind == "double":
            return self._add(M.DOUBLE, double_bits(v) if isinstance(v, float) else v)
        if kind == "String":
            return self.string(v)
        if kind == "Class":
            return self.cls(v)
        if kind == "MethodType":
            return self._add(M.METHOD_TYPE, self.utf8(v))
        if kind == "index":
            return v
        raise ValueError(f"unsupported constant {value!r}")

    def bootstrap(self, handle: int, args=()) -> int:
        self.bootstraps.append((handle, tuple(args)))
        return len(self.bootstraps) - 1

    def concat_bootstrap(self, recipe: str | None = None, constants=()) -> int:
        """Bootstrap method entry for ``StringConcatFactory``."""
        name = "makeConcat" if recipe is None else "makeConcatWithConstants"
        desc = ("(Ljava/lang/invoke/MethodHandles$Lookup;Ljava/lang/String;"
                "Ljava/lang/invoke/MethodType;"
                + ("" if recipe is None else "Ljava/lang/String;[Ljava/lang/Object;")
                + ")Ljava/lang/invoke/CallSite;")
        handle = self.method_handle("invokeStatic", M.METHODREF,
                                    "java/lang/invoke/StringConcatFactory", name, desc)
        args = [] if recipe is None else [self.string(recipe)]
        args += [self.constant(c) for c in constants]
        return self.bootstrap(handle, args)

    # -- members ---------------------------------------------------------

    def attribute(self, name: str, payload) -> M.AttributeInfo:
        return M.AttributeInfo(self.utf8(name), name, payload)

    def add_field(self, name: str, desc: str, access: int = 0x0001, constant=None, attributes=()):
        attrs = list(attributes)
        if constant is not None:
            if desc in ("I", "S", "B", "C", "Z"):
                index = self._add(M.INTEGER, int(constant))
            elif desc == "J":
                index = self.constant(("long", constant))
            elif desc == "F":
                index = self.constant(("float", constant))
            elif desc == "D":
                index = self.constant(("double", constant))
            else:
                index = self.string(constant)
            attrs.insert(0, self.attribute("ConstantValue", M.SingleIndex(index)))
        self.fields.append(M.MemberInfo(access, self.utf8(name), self.utf8(desc), tuple(attrs)))

    def add_method(self, name: str, desc: str, code=None, access: int = 0x0001,
                   max_stack: int = 8, max_locals: int = 8, handlers=(),
                   attributes=(), code_attributes=()):
        attrs = list(attributes)
        if code is not None:
            attrs.insert(0, self.attribute(
                "Code", self.assemble(code, max_stack, max_locals, handlers, code_attributes)))
        self.methods.append(M.MemberInfo(access, self.utf8(name), self.utf8(desc), tuple(attrs)))

    def add_attribute(self, name: str, payload) -> None:
        self.attributes.append(self.attribute(name, payload))

    # -- code ------------------------------------------------------------

    def assemble(self, items, max_stack=8, max_locals=8, handlers=(), attributes=()) -> M.Code:
        """Assemble code items into a laid-out :class:`Code` payload.

        ``handlers`` rows are ``(start, end, handler, catch_type)`` label
        names; ``attributes`` must use final code offsets.
        """
        labels: dict[str, int] = {}
        pending = []
        k = 0
        for item in items:
            if isinstance(item, str):
                item = (item,)
            if item[0] == "label":
                labels[item[1]] = k * _STRIDE
                continue
            pending.append((k * _STRIDE, item))
            k += 1
        end = k * _STRIDE
        labels.setdefault("END", end)
        instructions = tuple(self._instruction(off, item, labels) for off, item in pending)
        table = tuple(M.ExceptionHandler(labels[s], labels[e], labels[h], self.cls(t) if t else 0)
                      for s, e, h, t in handlers)
        code = relayout(M.Code(max_stack, max_locals, instructions, end, table))
        # attribute offsets are given in the final layout
        return replace(code, attributes=tuple(attributes))

    def _instruction(self, offset: int, item: tuple, labels) -> M.Instruction:
        mn, *ops = item
        op = OPCODES[mn]
        kind = KINDS[op]
        if kind == NONE:
            operands = ()
        elif kind in (LOCAL, BYTE, SHORT, IINC):
            operands = tuple(ops)
        elif kind == CP1 or mn in ("ldc_w", "ldc2_w"):
            operands = (self.constant(ops[0]),)
        elif kind == CP2:
            if mn in ("new", "anewarray", "checkcast", "instanceof"):
                operands = (self.cls(ops[0]),)
            elif mn in ("getfield", "putfield", "getstatic", "putstatic"):
                operands = (self.ref(M.FIELDREF, *ops),)
            else:
                tag = M.INTERFACE_METHODREF if len(ops) > 3 and ops[3] else M.METHODREF
                operands = (self.ref(tag, *ops[:3]),)
        elif kind == INVOKEINTERFACE:
            owner, name, desc = ops
            args, _ = parse_method_descriptor(desc)
            count = 1 + sum(slot_size(a) for a in args)
            operands = (self.ref(M.INTERFACE_METHODREF, owner, name, desc), count, 0)
        elif kind == INVOKEDYNAMIC:
            bsm, name, desc = ops
            operands = (self._add(M.INVOKE_DYNAMIC, bsm, self.nat(name, desc)), 0, 0)
        elif kind == BRANCH2 or kind == BRANCH4:
            operands = (labels[ops[0]],)
        elif kind == NEWARRAY:
            operands = (_NEWARRAY_CODES.get(ops[0], ops[0]),)
        elif kind == MULTIANEWARRAY:
            operands = (self.cls(ops[0]), ops[1])
        elif kind == TABLESWITCH:
            default, low, targets = ops
            operands = (labels[default], low, low + len(targets) - 1,
                        tuple(labels[t] for t in targets), b"")
        elif kind == LOOKUPSWITCH:
            default, pairs = ops
            operands = (labels[default], tuple((key, labels[t]) for key, t in pairs), b"")
        else:  # pragma: no cover
            raise ValueError(f"cannot assemble {mn}")
        return M.Instruction(offset, op, operands, False)

    # -- output ----------------------------------------------------------

    def build_model(self) -> M.ClassFile:
        attrs = list(self.attributes)
        if self.bootstraps:
            attrs.append(self.attribute("BootstrapMethods", M.BootstrapMethods(tuple(self.bootstraps))))
        return M.ClassFile(
            self.minor, self.major, M.ConstantPool(tuple(self.entries)), self.access,
            self.this_class, self.super_class, tuple(self.interfaces),
            tuple(self.fields), tuple(self.methods), tuple(attrs),
        )

    def build(self) -> bytes:
        return serialize_class(self.build_model())
