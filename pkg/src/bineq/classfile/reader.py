"""Class file parser."""

from __future__ import annotations

import struct

from ..errors import MalformedClass
from . import model as M
from . import mutf8
from .code import decode_code

_U2 = struct.Struct(">H").unpack_from
_U4 = struct.Struct(">I").unpack_from
_HH = struct.Struct(">HH").unpack_from

# context -> recognised attribute names
_CLASS_ATTRS = frozenset({
    "SourceFile", "InnerClasses", "EnclosingMethod", "SourceDebugExtension",
    "BootstrapMethods", "Module", "ModulePackages", "ModuleMainClass",
    "NestHost", "NestMembers", "Record", "PermittedSubclasses", "Synthetic",
    "Deprecated", "Signature", "RuntimeVisibleAnnotations",
    "RuntimeInvisibleAnnotations", "RuntimeVisibleTypeAnnotations",
    "RuntimeInvisibleTypeAnnotations",
})
_FIELD_ATTRS = frozenset({
    "ConstantValue", "Synthetic", "Deprecated", "Signature",
    "RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations",
    "RuntimeVisibleTypeAnnotations", "RuntimeInvisibleTypeAnnotations",
})
_METHOD_ATTRS = frozenset({
    "Code", "Exceptions", "RuntimeVisibleParameterAnnotations",
    "RuntimeInvisibleParameterAnnotations", "AnnotationDefault",
    "MethodParameters", "Synthetic", "Deprecated", "Signature",
    "RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations",
    "RuntimeVisibleTypeAnnotations", "RuntimeInvisibleTypeAnnotations",
})
_CODE_ATTRS = frozenset({
    "LineNumberTable", "LocalVariableTable", "LocalVariableTypeTable",
    "StackMapTable", "RuntimeVisibleTypeAnnotations",
    "RuntimeInvisibleTypeAnnotations",
})
_COMPONENT_ATTRS = frozenset({
    "Signature", "RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations",
    "RuntimeVisibleTypeAnnotations", "RuntimeInvisibleTypeAnnotations",
})
CONTEXTS = {
    "class": _CLASS_ATTRS, "field": _FIELD_ATTRS, "method": _METHOD_ATTRS,
    "code": _CODE_ATTRS, "component": _COMPONENT_ATTRS,
}

_CONSTANT_VALUE_TAGS = (M.INTEGER, M.FLOAT, M.LONG, M.DOUBLE, M.STRING)
_ELEMENT_CONST_TAGS = {
    "B": (M.INTEGER,), "C": (M.INTEGER,), "I": (M.INTEGER,), "S": (M.INTEGER,),
    "Z": (M.INTEGER,), "D": (M.DOUBLE,), "F": (M.FLOAT,), "J": (M.LONG,),
    "s": (M.UTF8,), "c": (M.UTF8,),
}

_FIXED_POOL = {
    3: (">i", 4), 4: (">I", 4), 5: (">q", 8), 6: (">Q", 8),
    7: (">H", 2), 8: (">H", 2), 16: (">H", 2), 19: (">H", 2), 20: (">H", 2),
    9: (">HH", 4), 10: (">HH", 4), 11: (">HH", 4), 12: (">HH", 4),
    17: (">HH", 4), 18: (">HH", 4), 15: (">BH", 3),
}
_POOL_STRUCTS = {tag: (struct.Struct(fmt).unpack_from, size) for tag, (fmt, size) in _FIXED_POOL.items()}

# required kinds of the pool references inside each pool entry
_POOL_REF_KINDS = {
    M.CLASS: ((M.UTF8,),), M.STRING: ((M.UTF8,),), M.METHOD_TYPE: ((M.UTF8,),),
    M.MODULE: ((M.UTF8,),), M.PACKAGE: ((M.UTF8,),),
    M.FIELDREF: ((M.CLASS,), (M.NAME_AND_TYPE,)),
    M.METHODREF: ((M.CLASS,), (M.NAME_AND_TYPE,)),
    M.INTERFACE_METHODREF: ((M.CLASS,), (M.NAME_AND_TYPE,)),
    M.NAME_AND_TYPE: ((M.UTF8,), (M.UTF8,)),
}
_HANDLE_KINDS = {
    1: (M.FIELDREF,), 2: (M.FIELDREF,), 3: (M.FIELDREF,), 4: (M.FIELDREF,),
    5: (M.METHODREF,), 6: (M.METHODREF, M.INTERFACE_METHODREF),
    7: (M.METHODREF, M.INTERFACE_METHODREF), 8: (M.METHODREF,),
    9: (M.INTERFACE_METHODREF,),
}


class _Parser:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.pool: M.ConstantPool | None = None

    # -- primitive reads -------------------------------------------------

    def need(self, n: int, end: int | None = None) -> None:
        limit = len(self.data) if end is None else end
        if self.pos + n > limit:
            raise MalformedClass("unexpected end of data", min(self.pos, limit))

    def u1(self, end=None) -> int:
        self.need(1, end)
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u2(self, end=None) -> int:
        self.need(2, end)
        v = _U2(self.data, self.pos)[0]
        self.pos += 2
        return v

    def u4(self, end=None) -> int:
        self.need(4, end)
        v = _U4(self.data, self.pos)[0]
        self.pos += 4
        return v

    def idx(self, end, *tags: int, optional: bool = False) -> int:
        at = self.pos
        i = self.u2(end)
        if i == 0 and optional:
            return 0
        self.check_index(i, tags, at)
        return i

    def check_index(self, i: int, tags, at: int) -> None:
        entries = self.pool.entries
        entry = entries[i] if 0 < i < len(entries) else None
        if entry is None or (tags and entry.tag not in tags):
            want = "/".join(M.TAG_NAMES[t] for t in tags) or "entry"
            raise MalformedClass(f"invalid pool reference #{i} (expected {want})", at)

    # -- structure -------------------------------------------------------

    def parse(self) -> M.ClassFile:
        data = self.data
        if len(data) < 4 or data[:4] != b"\xca\xfe\xba\xbe":
            raise MalformedClass("bad magic", 0)
        self.pos = 4
        minor = self.u2()
        major = self.u2()
        self.pool = self.parse_pool()
        access = self.u2()
        this_class = self.idx(None, M.CLASS)
        super_class = self.idx(None, M.CLASS, optional=True)
        interfaces = tuple(self.idx(None, M.CLASS) for _ in range(self.u2()))
        fields = tuple(self.member("field") for _ in range(self.u2()))
        methods = tuple(self.member("method") for _ in range(self.u2()))
        attributes = self.attributes("class", None)
        if self.pos != len(data):
            raise MalformedClass("trailing bytes after class structure", self.pos)
        warnings = ()
        if major > M.MAX_SUPPORTED_MAJOR:
            warnings = (f"major version {major} newer than {M.MAX_SUPPORTED_MAJOR}; parsed best-effort",)
        cf = M.ClassFile(minor, major, self.pool, access, this_class, super_class,
                         interfaces, fields, methods, attributes, warnings)
        self.check_bootstrap_refs(cf)
        return cf

    def parse_pool(self) -> M.ConstantPool:
        data = self.data
        count = self.u2()
        if count == 0:
            raise MalformedClass("constant_pool_count is zero", self.pos - 2)
        entries: list = [None]
        offsets = [0]
        pos = self.pos
        n = len(data)
        structs = _POOL_STRUCTS
        new = tuple.__new__
        CE = M.ConstEntry
        i = 1
        while i < count:
            if pos >= n:
                raise MalformedClass("truncated constant pool", n)
            tag = data[pos]
            offsets.append(pos)
            pos += 1
            if tag == 1:
                if pos + 2 > n:
                    raise MalformedClass("truncated constant pool", n)
                length = (data[pos] << 8) | data[pos + 1]
                pos += 2
                if pos + length > n:
                    raise MalformedClass("truncated constant pool", n)
                try:
                    text = mutf8.decode(data[pos:pos + length])
                except mutf8.MutfError as exc:
                    raise MalformedClass(f"invalid modified UTF-8: {exc}", pos) from None
                entries.append(new(CE, (1, (text,))))
                pos += length
                i += 1
                continue
            layout = structs.get(tag)
            if layout is None:
                raise MalformedClass(f"unknown constant pool tag {tag}", pos - 1)
            unpack, size = layout
            if pos + size > n:
                raise MalformedClass("truncated constant pool", n)
            entries.append(new(CE, (tag, unpack(data, pos))))
            pos += size
            if tag == 5 or tag == 6:
                if i + 1 >= count:
                    raise MalformedClass("8-byte constant in last pool slot", pos - size - 1)
                entries.append(None)
                offsets.append(pos)
                i += 2
            else:
                i += 1
        self.pos = pos
        pool = M.ConstantPool(entries)
        self.pool = pool
        for k, entry in enumerate(entries):
            if entry is None:
                continue
            tag = entry.tag
            kinds = _POOL_REF_KINDS.get(tag)
            if kinds is not None:
                for ref, want in zip(entry.args, kinds):
                    self.check_index(ref, want, offsets[k])
            elif tag == M.METHOD_HANDLE:
                kind, ref = entry.args
                want = _HANDLE_KINDS.get(kind)
                if want is None:
                    raise MalformedClass(f"invalid method handle kind {kind}", offsets[k])
                self.check_index(ref, want, offsets[k])
            elif tag == M.DYNAMIC or tag == M.INVOKE_DYNAMIC:
                self.check_index(entry.args[1], (M.NAME_AND_TYPE,), offsets[k])
        return pool

    def member(self, context: str) -> M.MemberInfo:
        access = self.u2()
        name = self.idx(None, M.UTF8)
        desc = self.idx(None, M.UTF8)
        return M.MemberInfo(access, name, desc, self.attributes(context, None))

    def attributes(self, context: str, end) -> tuple[M.AttributeInfo, ...]:
        count = self.u2(end)
        known = CONTEXTS[context]
        out = []
        for _ in range(count):
            name_index = self.idx(end, M.UTF8)
            name = self.pool.entries[name_index].args[0]
            length = self.u4(end)
            start = self.pos
            stop = start + length
            self.need(length, end)
            if name in known:
                payload = getattr(self, "a_" + name)(stop)
                if self.pos != stop:
                    raise MalformedClass(f"{name} attribute length mismatch", self.pos)
            else:
                payload = self.data[start:stop]
                self.pos = stop
            out.append(M.AttributeInfo(name_index, name, payload))
        return tuple(out)

    # -- attribute decoders (each consumes exactly up to ``end``) ---------

    def a_Code(self, end) -> M.Code:
        max_stack = self.u2(end)
        max_locals = self.u2(end)
        length = self.u4(end)
        if length == 0 or length > 65535:
            raise MalformedClass(f"invalid code length {length}", self.pos - 4)
        self.need(length, end)
        start = self.pos
        instructions = decode_code(self.data[start:start + length], self.pool, start)
        self.pos += length
        handlers = []
        for _ in range(self.u2(end)):
            s, e, h = self.u2(end), self.u2(end), self.u2(end)
            catch = self.idx(end, M.CLASS, optional=True)
            handlers.append(M.ExceptionHandler(s, e, h, catch))
        attributes = self.attributes("code", end)
        return M.Code(max_stack, max_locals, tuple(instructions), length, tuple(handlers), attributes)

    def a_ConstantValue(self, end):
        return M.SingleIndex(self.idx(end, *_CONSTANT_VALUE_TAGS))

    def a_SourceFile(self, end):
        return M.SingleIndex(self.idx(end, M.UTF8))

    def a_Signature(self, end):
        return M.SingleIndex(self.idx(end, M.UTF8))

    def a_NestHost(self, end):
        return M.SingleIndex(self.idx(end, M.CLASS))

    def a_ModuleMainClass(self, end):
        return M.SingleIndex(self.idx(end, M.CLASS))

    def _index_list(self, end, *tags):
        return M.IndexList(tuple(self.idx(end, *tags) for _ in range(self.u2(end))))

    def a_Exceptions(self, end):
        return self._index_list(end, M.CLASS)

    def a_NestMembers(self, end):
        return self._index_list(end, M.CLASS)

    def a_PermittedSubclasses(self, end):
        return self._index_list(end, M.CLASS)

    def a_ModulePackages(self, end):
        return self._index_list(end, M.PACKAGE)

    def a_Synthetic(self, end):
        return M.Marker()

    def a_Deprecated(self, end):
        return M.Marker()

    def a_SourceDebugExtension(self, end):
        data = self.data[self.pos:end]
        self.pos = end
        return M.RawBytes(data)

    def a_LineNumberTable(self, end):
        n = self.u2(end)
        self.need(4 * n, end)
        raw = struct.unpack_from(f">{2 * n}H", self.data, self.pos)
        self.pos += 4 * n
        return M.LineNumberTable(tuple(zip(raw[::2], raw[1::2])))

    def a_LocalVariableTable(self, end, cls=M.LocalVariableTable):
        entries = []
        for _ in range(self.u2(end)):
            s, n = self.u2(end), self.u2(end)
            name = self.idx(end, M.UTF8)
            desc = self.idx(end, M.UTF8)
            entries.append((s, n, name, desc, self.u2(end)))
        return cls(tuple(entries))

    def a_LocalVariableTypeTable(self, end):
        return self.a_LocalVariableTable(end, M.LocalVariableTypeTable)

    def a_InnerClasses(self, end):
        entries = []
        for _ in range(self.u2(end)):
            inner = self.idx(end, M.CLASS)
            outer = self.idx(end, M.CLASS, optional=True)
            name = self.idx(end, M.UTF8, optional=True)
            entries.append((inner, outer, name, self.u2(end)))
        return M.InnerClasses(tuple(entries))

    def a_EnclosingMethod(self, end):
        cls = self.idx(end, M.CLASS)
        return M.EnclosingMethod(cls, self.idx(end, M.NAME_AND_TYPE, optional=True))

    def a_BootstrapMethods(self, end):
        methods = []
        for _ in range(self.u2(end)):
            ref = self.idx(end, M.METHOD_HANDLE)
            args = tuple(self.idx(end, *M.LOADABLE, M.LONG, M.DOUBLE) for _ in range(self.u2(end)))
            methods.append((ref, args))
        return M.BootstrapMethods(tuple(methods))

    def a_MethodParameters(self, end):
        params = []
        for _ in range(self.u1(end)):
            name = self.idx(end, M.UTF8, optional=True)
            params.append((name, self.u2(end)))
        return M.MethodParameters(tuple(params))

    def element_value(self, end) -> M.ElementValue:
        at = self.pos
        tag = chr(self.u1(end))
        tags = _ELEMENT_CONST_TAGS.get(tag)
        if tags is not None:
            return M.ElementValue(tag, self.idx(end, *tags))
        if tag == "e":
            return M.ElementValue(tag, (self.idx(end, M.UTF8), self.idx(end, M.UTF8)))
        if tag == "@":
            return M.ElementValue(tag, self.annotation(end))
        if tag == "[":
            return M.ElementValue(tag, tuple(self.element_value(end) for _ in range(self.u2(end))))
        raise MalformedClass(f"invalid element_value tag {tag!r}", at)

    def annotation(self, end) -> M.Annotation:
        type_index = self.idx(end, M.UTF8)
        pairs = []
        for _ in range(self.u2(end)):
            name = self.idx(end, M.UTF8)
            pairs.append((name, self.element_value(end)))
        return M.Annotation(type_index, tuple(pairs))

    def _annotations(self, end):
        return M.Annotations(tuple(self.annotation(end) for _ in range(self.u2(end))))

    a_RuntimeVisibleAnnotations = _annotations
    a_RuntimeInvisibleAnnotations = _annotations

    def _parameter_annotations(self, end):
        params = []
        for _ in range(self.u1(end)):
            params.append(tuple(self.annotation(end) for _ in range(self.u2(end))))
        return M.ParameterAnnotations(tuple(params))

    a_RuntimeVisibleParameterAnnotations = _parameter_annotations
    a_RuntimeInvisibleParameterAnnotations = _parameter_annotations

    def type_annotation(self, end) -> M.TypeAnnotation:
        at = self.pos
        tt = self.u1(end)
        if tt in (0x00, 0x01, 0x16):
            info = (self.u1(end),)
        elif tt in (0x10, 0x17, 0x42):
            info = (self.u2(end),)
        elif tt in (0x11, 0x12):
            info = (self.u1(end), self.u1(end))
        elif tt in (0x13, 0x14, 0x15):
            info = ()
        elif tt in (0x40, 0x41):
            info = (tuple((self.u2(end), self.u2(end), self.u2(end)) for _ in range(self.u2(end))),)
        elif 0x43 <= tt <= 0x46:
            info = (self.u2(end),)
        elif 0x47 <= tt <= 0x4B:
            info = (self.u2(end), self.u1(end))
        else:
            raise MalformedClass(f"invalid type annotation target 0x{tt:02x}", at)
        path = tuple((self.u1(end), self.u1(end)) for _ in range(self.u1(end)))
        return M.TypeAnnotation(tt, info, path, self.annotation(end))

    def _type_annotations(self, end):
        return M.TypeAnnotations(tuple(self.type_annotation(end) for _ in range(self.u2(end))))

    a_RuntimeVisibleTypeAnnotations = _type_annotations
    a_RuntimeInvisibleTypeAnnotations = _type_annotations

    def a_AnnotationDefault(self, end):
        return M.AnnotationDefault(self.element_value(end))

    def vtypes(self, end, count: int) -> tuple:
        out = []
        for _ in range(count):
            at = self.pos
            tag = self.u1(end)
            if tag == M.ITEM_OBJECT:
                out.append((tag, self.idx(end, M.CLASS)))
            elif tag == M.ITEM_UNINITIALIZED:
                out.append((tag, self.u2(end)))
            elif tag <= 6:
                out.append((tag, None))
            else:
                raise MalformedClass(f"invalid verification type {tag}", at)
        return tuple(out)

    def a_StackMapTable(self, end):
        frames = []
        for _ in range(self.u2(end)):
            at = self.pos
            ft = self.u1(end)
            if ft <= 63:
                frames.append(M.Frame(ft, ft))
            elif ft <= 127:
                frames.append(M.Frame(ft, ft - 64, (), self.vtypes(end, 1)))
            elif ft < 247:
                raise MalformedClass(f"reserved stack map frame type {ft}", at)
            elif ft == 247:
                delta = self.u2(end)
                frames.append(M.Frame(ft, delta, (), self.vtypes(end, 1)))
            elif ft <= 251:
                frames.append(M.Frame(ft, self.u2(end)))
            elif ft <= 254:
                delta = self.u2(end)
                frames.append(M.Frame(ft, delta, self.vtypes(end, ft - 251)))
            else:
                delta = self.u2(end)
                locals_ = self.vtypes(end, self.u2(end))
                frames.append(M.Frame(ft, delta, locals_, self.vtypes(end, self.u2(end))))
        return M.StackMapTable(tuple(frames))

    def a_Module(self, end):
        name = self.idx(end, M.MODULE)
        flags = self.u2(end)
        version = self.idx(end, M.UTF8, optional=True)
        requires = tuple((self.idx(end, M.MODULE), self.u2(end), self.idx(end, M.UTF8, optional=True))
                         for _ in range(self.u2(end)))

        def targets(kind):
            rows = []
            for _ in range(self.u2(end)):
                i = self.idx(end, kind)
                fl = self.u2(end)
                rows.append((i, fl, tuple(self.idx(end, M.MODULE) for _ in range(self.u2(end)))))
            return tuple(rows)

        exports = targets(M.PACKAGE)
        opens = targets(M.PACKAGE)
        uses = tuple(self.idx(end, M.CLASS) for _ in range(self.u2(end)))
        provides = []
        for _ in range(self.u2(end)):
            i = self.idx(end, M.CLASS)
            provides.append((i, tuple(self.idx(end, M.CLASS) for _ in range(self.u2(end)))))
        return M.Module(name, flags, version, requires, exports, opens, uses, tuple(provides))

    def a_Record(self, end):
        components = []
        for _ in range(self.u2(end)):
            name = self.idx(end, M.UTF8)
            desc = self.idx(end, M.UTF8)
            components.append(M.RecordComponent(name, desc, self.attributes("component", end)))
        return M.Record(tuple(components))

    # -- cross-structure checks ------------------------------------------

    def check_bootstrap_refs(self, cf: M.ClassFile) -> None:
        needs = [i for i in cf.constant_pool.indices()
                 if cf.constant_pool[i].tag in (M.DYNAMIC, M.INVOKE_DYNAMIC)]
        if not needs:
            return
        bsm = cf.attribute("BootstrapMethods")
        count = 0 if bsm is None or bsm.opaque else len(bsm.payload.methods)
        for i in needs:
            if cf.constant_pool[i].args[0] >= count:
                raise MalformedClass(f"pool entry #{i} references missing bootstrap method")


def parse_class(data: bytes) -> M.ClassFile:
    """Parse class file bytes into a :class:`ClassFile`.

    Raises :class:`MalformedClass` on any structural violation.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("parse_class expects bytes")
    return _Parser(bytes(data)).parse()
