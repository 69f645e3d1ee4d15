"""Class file serializer."""

from __future__ import annotations

import struct

from ..errors import UnencodableModel
from . import model as M
from . import mutf8
from .code import encode_instructions, needs_relayout, relayout

_pack = struct.pack


def _u2(out: bytearray, v: int) -> None:
    if not 0 <= v <= 0xFFFF:
        raise UnencodableModel(f"value {v} does not fit in u2")
    out += _pack(">H", v)


def _u2_list(out: bytearray, values) -> None:
    _u2(out, len(values))
    for v in values:
        _u2(out, v)


def write_pool(out: bytearray, pool: M.ConstantPool) -> None:
    entries = pool.entries
    if len(entries) > 0xFFFF:
        raise UnencodableModel(f"constant pool has {len(entries) - 1} slots; limit is 65534")
    out += _pack(">H", len(entries))
    skip = False
    for entry in entries[1:]:
        if skip:
            skip = False
            continue
        if entry is None:
            raise UnencodableModel("unusable pool slot outside an 8-byte constant")
        tag, args = entry
        if tag == M.UTF8:
            raw = mutf8.encode(args[0])
            if len(raw) > 0xFFFF:
                raise UnencodableModel("Utf8 constant longer than 65535 bytes")
            out += _pack(">BH", 1, len(raw))
            out += raw
        elif tag == M.INTEGER:
            out += _pack(">Bi", tag, args[0])
        elif tag == M.FLOAT:
            out += _pack(">BI", tag, args[0])
        elif tag == M.LONG:
            out += _pack(">Bq", tag, args[0])
            skip = True
        elif tag == M.DOUBLE:
            out += _pack(">BQ", tag, args[0])
            skip = True
        elif tag == M.METHOD_HANDLE:
            out += _pack(">BBH", tag, args[0], args[1])
        elif len(args) == 1:
            out += _pack(">BH", tag, args[0])
        else:
            out += _pack(">BHH", tag, args[0], args[1])


def _element_value(out: bytearray, ev: M.ElementValue) -> None:
    out += ev.tag.encode("ascii")
    t = ev.tag
    if t == "e":
        out += _pack(">HH", *ev.value)
    elif t == "@":
        _annotation(out, ev.value)
    elif t == "[":
        _u2(out, len(ev.value))
        for v in ev.value:
            _element_value(out, v)
    else:
        _u2(out, ev.value)


def _annotation(out: bytearray, a: M.Annotation) -> None:
    _u2(out, a.type_index)
    _u2(out, len(a.pairs))
    for name, value in a.pairs:
        _u2(out, name)
        _element_value(out, value)


def _type_annotation(out: bytearray, t: M.TypeAnnotation) -> None:
    tt = t.target_type
    out.append(tt)
    info = t.target_info
    if tt in (0x00, 0x01, 0x16):
        out.append(info[0])
    elif tt in (0x10, 0x17, 0x42) or 0x43 <= tt <= 0x46:
        _u2(out, info[0])
    elif tt in (0x11, 0x12):
        out += bytes(info)
    elif tt in (0x40, 0x41):
        _u2(out, len(info[0]))
        for row in info[0]:
            out += _pack(">HHH", *row)
    elif 0x47 <= tt <= 0x4B:
        out += _pack(">HB", info[0], info[1])
    out.append(len(t.type_path))
    for kind, arg in t.type_path:
        out += bytes((kind, arg))
    _annotation(out, t.annotation)


def _vtypes(out: bytearray, vtypes) -> None:
    for tag, value in vtypes:
        out.append(tag)
        if tag == M.ITEM_OBJECT or tag == M.ITEM_UNINITIALIZED:
            _u2(out, value)


def _payload(out: bytearray, p) -> None:
    if isinstance(p, (bytes, bytearray)):
        out += p
    elif isinstance(p, M.Code):
        if needs_relayout(p):
            p = relayout(p)
        code = encode_instructions(p.instructions)
        if len(code) > 65535:
            raise UnencodableModel(f"code length {len(code)} exceeds 65535")
        out += _pack(">HHI", p.max_stack, p.max_locals, len(code))
        out += code
        _u2(out, len(p.exception_table))
        for h in p.exception_table:
            out += _pack(">HHHH", *h)
        write_attributes(out, p.attributes)
    elif isinstance(p, M.SingleIndex):
        _u2(out, p.index)
    elif isinstance(p, M.IndexList):
        _u2_list(out, p.indices)
    elif isinstance(p, M.Marker):
        pass
    elif isinstance(p, M.RawBytes):
        out += p.data
    elif isinstance(p, M.LineNumberTable):
        _u2(out, len(p.entries))
        for row in p.entries:
            out += _pack(">HH", *row)
    elif isinstance(p, M.LocalVariableTable):
        _u2(out, len(p.entries))
        for row in p.entries:
            out += _pack(">HHHHH", *row)
    elif isinstance(p, M.InnerClasses):
        _u2(out, len(p.entries))
        for row in p.entries:
            out += _pack(">HHHH", *row)
    elif isinstance(p, M.EnclosingMethod):
        out += _pack(">HH", p.class_index, p.method_index)
    elif isinstance(p, M.BootstrapMethods):
        _u2(out, len(p.methods))
        for ref, args in p.methods:
            _u2(out, ref)
            _u2_list(out, args)
    elif isinstance(p, M.MethodParameters):
        out.append(len(p.parameters))
        for row in p.parameters:
            out += _pack(">HH", *row)
    elif isinstance(p, M.Annotations):
        _u2(out, len(p.annotations))
        for a in p.annotations:
            _annotation(out, a)
    elif isinstance(p, M.ParameterAnnotations):
        out.append(len(p.parameters))
        for annotations in p.parameters:
            _u2(out, len(annotations))
            for a in annotations:
                _annotation(out, a)
    elif isinstance(p, M.TypeAnnotations):
        _u2(out, len(p.annotations))
        for t in p.annotations:
            _type_annotation(out, t)
    elif isinstance(p, M.AnnotationDefault):
        _element_value(out, p.value)
    elif isinstance(p, M.StackMapTable):
        _u2(out, len(p.frames))
        for fr in p.frames:
            ft = fr.frame_type
            out.append(ft)
            if ft <= 63:
                pass
            elif ft <= 127:
                _vtypes(out, fr.stack)
            elif ft == 247:
                _u2(out, fr.offset_delta)
                _vtypes(out, fr.stack)
            elif ft <= 251:
                _u2(out, fr.offset_delta)
            elif ft <= 254:
                _u2(out, fr.offset_delta)
                _vtypes(out, fr.locals)
            else:
                _u2(out, fr.offset_delta)
                _u2(out, len(fr.locals))
                _vtypes(out, fr.locals)
                _u2(out, len(fr.stack))
                _vtypes(out, fr.stack)
    elif isinstance(p, M.Module):
        out += _pack(">HHH", p.name_index, p.flags, p.version_index)
        _u2(out, len(p.requires))
        for row in p.requires:
            out += _pack(">HHH", *row)
        for rows in (p.exports, p.opens):
            _u2(out, len(rows))
            for i, fl, to in rows:
                out += _pack(">HH", i, fl)
                _u2_list(out, to)
        _u2_list(out, p.uses)
        _u2(out, len(p.provides))
        for i, with_ in p.provides:
            _u2(out, i)
            _u2_list(out, with_)
    elif isinstance(p, M.Record):
        _u2(out, len(p.components))
        for c in p.components:
            out += _pack(">HH", c.name_index, c.descriptor_index)
            write_attributes(out, c.attributes)
    else:
        raise UnencodableModel(f"unknown attribute payload {type(p).__name__}")


def write_attributes(out: bytearray, attributes) -> None:
    _u2(out, len(attributes))
    for a in attributes:
        _u2(out, a.name_index)
        body = bytearray()
        _payload(body, a.payload)
        out += _pack(">I", len(body))
        out += body


def serialize_class(cf: M.ClassFile) -> bytes:
    """Serialize a class model; the inverse of :func:`parse_class`."""
    out = bytearray(b"\xca\xfe\xba\xbe")
    out += _pack(">HH", cf.minor_version, cf.major_version)
    write_pool(out, cf.constant_pool)
    _u2(out, cf.access_flags)
    _u2(out, cf.this_class)
    _u2(out, cf.super_class)
    _u2_list(out, cf.interfaces)
    for members in (cf.fields, cf.methods):
        _u2(out, len(members))
        for m in members:
            out += _pack(">HHH", m.access_flags, m.name_index, m.descriptor_index)
            write_attributes(out, m.attributes)
    write_attributes(out, cf.attributes)
    return bytes(out)
