"""Decoding, encoding and relayout of bytecode arrays."""

from __future__ import annotations

import struct
from dataclasses import replace

from ..errors import MalformedClass, UnencodableModel
from . import model as M
from .opcodes import (
    BRANCH2, BRANCH4, BYTE, CP1, CP2, FIXED_SIZE, GOTO, GOTO_W, IINC,
    INVOKEDYNAMIC, INVOKEINTERFACE, JSR, JSR_W, KINDS, LDC, LDC_W, LOCAL,
    LOOKUPSWITCH, MNEMONICS, MULTIANEWARRAY, NEWARRAY, NONE, OPCODES, SHORT,
    TABLESWITCH, WIDE, WIDENABLE,
)

Instruction = M.Instruction
_new = tuple.__new__

_S4 = struct.Struct(">i")
_unpack_s4 = _S4.unpack_from

# pool entry kinds accepted by each pool-referencing opcode
_CP_KINDS: dict[int, frozenset] = {}
for _name in ("getstatic", "putstatic", "getfield", "putfield"):
    _CP_KINDS[OPCODES[_name]] = frozenset({M.FIELDREF})
_CP_KINDS[OPCODES["invokevirtual"]] = frozenset({M.METHODREF})
_CP_KINDS[OPCODES["invokespecial"]] = frozenset({M.METHODREF, M.INTERFACE_METHODREF})
_CP_KINDS[OPCODES["invokestatic"]] = frozenset({M.METHODREF, M.INTERFACE_METHODREF})
_CP_KINDS[OPCODES["invokeinterface"]] = frozenset({M.INTERFACE_METHODREF})
_CP_KINDS[OPCODES["invokedynamic"]] = frozenset({M.INVOKE_DYNAMIC})
for _name in ("new", "anewarray", "checkcast", "instanceof", "multianewarray"):
    _CP_KINDS[OPCODES[_name]] = frozenset({M.CLASS})
_CP_KINDS[LDC] = M.LOADABLE
_CP_KINDS[LDC_W] = M.LOADABLE
_CP_KINDS[OPCODES["ldc2_w"]] = frozenset({M.LONG, M.DOUBLE, M.DYNAMIC})


def _s2(hi: int, lo: int) -> int:
    v = (hi << 8) | lo
    return v - 0x10000 if v & 0x8000 else v


def decode_code(code: bytes, pool: M.ConstantPool | None = None, base: int = 0) -> list[Instruction]:
    """Decode a code array into instructions that tile it exactly.

    ``base`` is the file offset of the array, used in error messages.
    When ``pool`` is given, every pool operand is checked against the
    entry kind its opcode requires.
    """
    out: list[Instruction] = []
    append = out.append
    kinds = KINDS
    n = len(code)
    pc = 0
    try:
        while pc < n:
            op = code[pc]
            if op >= 202:
                raise MalformedClass(f"unknown opcode 0x{op:02x}", base + pc)
            kind = kinds[op]
            if kind == NONE:
                append(_new(Instruction, (pc, op, (), False)))
                pc += 1
            elif kind == CP2:
                append(_new(Instruction, (pc, op, ((code[pc + 1] << 8) | code[pc + 2],), False)))
                pc += 3
            elif kind == LOCAL:
                append(_new(Instruction, (pc, op, (code[pc + 1],), False)))
                pc += 2
            elif kind == BRANCH2:
                append(_new(Instruction, (pc, op, (pc + _s2(code[pc + 1], code[pc + 2]),), False)))
                pc += 3
            elif kind == CP1:
                append(_new(Instruction, (pc, op, (code[pc + 1],), False)))
                pc += 2
            elif kind == BYTE:
                v = code[pc + 1]
                append(_new(Instruction, (pc, op, (v - 256 if v > 127 else v,), False)))
                pc += 2
            elif kind == SHORT:
                append(_new(Instruction, (pc, op, (_s2(code[pc + 1], code[pc + 2]),), False)))
                pc += 3
            elif kind == IINC:
                d = code[pc + 2]
                append(_new(Instruction, (pc, op, (code[pc + 1], d - 256 if d > 127 else d), False)))
                pc += 3
            elif kind == INVOKEINTERFACE or kind == INVOKEDYNAMIC:
                idx = (code[pc + 1] << 8) | code[pc + 2]
                append(_new(Instruction, (pc, op, (idx, code[pc + 3], code[pc + 4]), False)))
                pc += 5
            elif kind == NEWARRAY:
                append(_new(Instruction, (pc, op, (code[pc + 1],), False)))
                pc += 2
            elif kind == MULTIANEWARRAY:
                idx = (code[pc + 1] << 8) | code[pc + 2]
                append(_new(Instruction, (pc, op, (idx, code[pc + 3]), False)))
                pc += 4
            elif kind == BRANCH4:
                if pc + 5 > n:
                    raise IndexError
                append(_new(Instruction, (pc, op, (pc + _unpack_s4(code, pc + 1)[0],), False)))
                pc += 5
            elif kind == TABLESWITCH or kind == LOOKUPSWITCH:
                start = pc
                pad_len = (3 - pc) % 4
                padding = code[pc + 1:pc + 1 + pad_len]
                if len(padding) != pad_len:
                    raise IndexError
                if any(padding):
                    padding = bytes(padding)
                else:
                    padding = b""
                p = pc + 1 + pad_len
                if p + 12 > n:
                    raise IndexError
                if kind == TABLESWITCH:
                    default, low, high = struct.unpack_from(">iii", code, p)
                    if high < low:
                        raise MalformedClass("tableswitch with high < low", base + start)
                    count = high - low + 1
                    p += 12
                    if p + 4 * count > n:
                        raise IndexError
                    targets = tuple(start + t for t in struct.unpack_from(f">{count}i", code, p))
                    p += 4 * count
                    operands = (start + default, low, high, targets, padding)
                else:
                    default, npairs = struct.unpack_from(">ii", code, p)
                    if npairs < 0:
                        raise MalformedClass("lookupswitch with negative pair count", base + start)
                    p += 8
                    if p + 8 * npairs > n:
                        raise IndexError
                    raw = struct.unpack_from(f">{2 * npairs}i", code, p)
                    pairs = tuple((raw[i], start + raw[i + 1]) for i in range(0, 2 * npairs, 2))
                    p += 8 * npairs
                    operands = (start + default, pairs, padding)
                append(_new(Instruction, (start, op, operands, False)))
                pc = p
            elif kind == WIDE:
                inner = code[pc + 1]
                if inner not in WIDENABLE:
                    raise MalformedClass(f"wide prefix on opcode 0x{inner:02x}", base + pc)
                slot = (code[pc + 2] << 8) | code[pc + 3]
                if inner == OPCODES["iinc"]:
                    append(_new(Instruction, (pc, inner, (slot, _s2(code[pc + 4], code[pc + 5])), True)))
                    pc += 6
                else:
                    append(_new(Instruction, (pc, inner, (slot,), True)))
                    pc += 4
            else:  # pragma: no cover - table is exhaustive
                raise MalformedClass(f"unhandled opcode 0x{op:02x}", base + pc)
    except IndexError:
        raise MalformedClass("truncated instruction", base + pc) from None
    if pc != n:
        raise MalformedClass("instruction runs past end of code", base + pc)

    starts = {ins.offset for ins in out}
    for ins in out:
        for t in branch_targets(ins):
            if t not in starts:
                raise MalformedClass(
                    f"{MNEMONICS[ins.opcode]} targets {t}, not an instruction boundary",
                    base + ins.offset,
                )
        if pool is not None:
            allowed = _CP_KINDS.get(ins.opcode)
            if allowed is not None:
                idx = ins.operands[0]
                entries = pool.entries
                entry = entries[idx] if 0 < idx < len(entries) else None
                if entry is None or entry.tag not in allowed:
                    raise MalformedClass(
                        f"{MNEMONICS[ins.opcode]} references invalid pool index {idx}",
                        base + ins.offset,
                    )
    return out


def branch_targets(ins: Instruction) -> tuple[int, ...]:
    kind = KINDS[ins.opcode]
    if kind == BRANCH2 or kind == BRANCH4:
        return ins.operands[:1]
    if kind == TABLESWITCH:
        return (ins.operands[0], *ins.operands[3])
    if kind == LOOKUPSWITCH:
        return (ins.operands[0], *(t for _, t in ins.operands[1]))
    return ()


def pool_operand(ins: Instruction) -> int | None:
    """The constant pool index an instruction references, if any."""
    kind = KINDS[ins.opcode]
    if kind in (CP1, CP2, INVOKEINTERFACE, INVOKEDYNAMIC, MULTIANEWARRAY):
        return ins.operands[0]
    return None


def remap_instruction_indices(ins: Instruction, f) -> Instruction:
    kind = KINDS[ins.opcode]
    if kind in (CP1, CP2, INVOKEINTERFACE, INVOKEDYNAMIC, MULTIANEWARRAY):
        return ins._replace(operands=(f(ins.operands[0]), *ins.operands[1:]))
    return ins


def instruction_size(ins: Instruction, pc: int, opcode: int | None = None) -> int:
    op = ins.opcode if opcode is None else opcode
    kind = KINDS[op]
    if ins.wide:
        return 6 if kind == IINC else 4
    size = FIXED_SIZE.get(kind)
    if size is not None:
        return size
    pad = (3 - pc) % 4
    if kind == TABLESWITCH:
        return 1 + pad + 12 + 4 * len(ins.operands[3])
    if kind == LOOKUPSWITCH:
        return 1 + pad + 8 + 8 * len(ins.operands[1])
    raise UnencodableModel(f"cannot size opcode {op}")


def needs_relayout(code: M.Code) -> bool:
    """True when stored offsets do not match the encoding the writer would emit."""
    pc = 0
    for ins in code.instructions:
        if ins.offset != pc:
            return True
        op = ins.opcode
        if op == LDC and ins.operands[0] > 255:
            return True
        kind = KINDS[op]
        if kind == BRANCH2 and not -32768 <= ins.operands[0] - pc <= 32767:
            return True
        pc += instruction_size(ins, pc)
    return pc != code.code_length


def encode_instructions(instructions) -> bytes:
    """Encode instructions whose offsets are already consistent."""
    out = bytearray()
    pack = struct.pack
    for ins in instructions:
        op = ins.opcode
        pc = ins.offset
        ops = ins.operands
        kind = KINDS[op]
        if ins.wide:
            if kind == IINC:
                out += pack(">BBHh", 0xC4, op, ops[0], ops[1])
            else:
                out += pack(">BBH", 0xC4, op, ops[0])
            continue
        if kind == NONE:
            out.append(op)
        elif kind == CP2:
            out += pack(">BH", op, ops[0])
        elif kind == LOCAL or kind == CP1 or kind == NEWARRAY:
            out += pack(">BB", op, ops[0])
        elif kind == BRANCH2:
            out += pack(">Bh", op, ops[0] - pc)
        elif kind == BYTE:
            out += pack(">Bb", op, ops[0])
        elif kind == SHORT:
            out += pack(">Bh", op, ops[0])
        elif kind == IINC:
            out += pack(">BBb", op, ops[0], ops[1])
        elif kind == INVOKEINTERFACE or kind == INVOKEDYNAMIC:
            out += pack(">BHBB", op, ops[0], ops[1], ops[2])
        elif kind == MULTIANEWARRAY:
            out += pack(">BHB", op, ops[0], ops[1])
        elif kind == BRANCH4:
            out += pack(">Bi", op, ops[0] - pc)
        elif kind == TABLESWITCH or kind == LOOKUPSWITCH:
            out.append(op)
            pad_len = (3 - pc) % 4
            padding = ops[-1]
            out += padding if len(padding) == pad_len else bytes(pad_len)
            if kind == TABLESWITCH:
                default, low, high, targets, _ = ops
                out += pack(f">iii{len(targets)}i", default - pc, low, high, *(t - pc for t in targets))
            else:
                default, pairs, _ = ops
                flat = [x for m, t in pairs for x in (m, t - pc)]
                out += pack(f">ii{len(flat)}i", default - pc, len(pairs), *flat)
        else:  # pragma: no cover
            raise UnencodableModel(f"cannot encode opcode {op}")
    return bytes(out)


# ---------------------------------------------------------------- relayout


def relayout(code: M.Code) -> M.Code:
    """Recompute instruction offsets after operand-width changes.

    ``ldc`` whose index no longer fits in a byte becomes ``ldc_w`` and
    ``goto``/``jsr`` whose displacement overflows become the wide forms.
    All offset-bearing structures (branches, exception table, line and
    local variable tables, stack map frames, code type annotations) are
    translated to the new layout.
    """
    instructions = code.instructions
    forms = [LDC_W if i.opcode == LDC and i.operands[0] > 255 else i.opcode for i in instructions]
    old_offsets = [i.offset for i in instructions]
    while True:
        new_offsets = []
        pc = 0
        for ins, op in zip(instructions, forms):
            new_offsets.append(pc)
            pc += instruction_size(ins, pc, op)
        offset_map = dict(zip(old_offsets, new_offsets))
        offset_map[code.code_length] = pc

        def m(o: int) -> int:
            try:
                return offset_map[o]
            except KeyError:
                raise UnencodableModel(f"offset {o} is not an instruction boundary") from None

        widened = False
        for k, ins in enumerate(instructions):
            if KINDS[forms[k]] == BRANCH2:
                disp = m(ins.operands[0]) - new_offsets[k]
                if not -32768 <= disp <= 32767:
                    if forms[k] == GOTO:
                        forms[k] = GOTO_W
                    elif forms[k] == JSR:
                        forms[k] = JSR_W
                    else:
                        raise UnencodableModel("conditional branch displacement exceeds 16 bits")
                    widened = True
        if not widened:
            break
    if pc > 65535:
        raise UnencodableModel(f"code length {pc} exceeds 65535")

    new_instructions = []
    for k, ins in enumerate(instructions):
        op = forms[k]
        kind = KINDS[op]
        ops = ins.operands
        if kind == BRANCH2 or kind == BRANCH4:
            ops = (m(ops[0]),)
        elif kind == TABLESWITCH:
            ops = (m(ops[0]), ops[1], ops[2], tuple(m(t) for t in ops[3]), b"")
        elif kind == LOOKUPSWITCH:
            ops = (m(ops[0]), tuple((k2, m(t)) for k2, t in ops[1]), b"")
        new_instructions.append(Instruction(new_offsets[k], op, ops, ins.wide))

    handlers = tuple(
        h._replace(start_pc=m(h.start_pc), end_pc=m(h.end_pc), handler_pc=m(h.handler_pc))
        for h in code.exception_table
    )
    attributes = tuple(_relayout_attribute(a, m) for a in code.attributes)
    return replace(code, instructions=tuple(new_instructions), code_length=pc,
                   exception_table=handlers, attributes=attributes)


def _relayout_attribute(attr: M.AttributeInfo, m) -> M.AttributeInfo:
    p = attr.payload
    if isinstance(p, M.LineNumberTable):
        p = M.LineNumberTable(tuple((m(s), line) for s, line in p.entries))
    elif isinstance(p, M.LocalVariableTable):
        p = type(p)(tuple((m(s), m(s + n) - m(s), a, b, k) for s, n, a, b, k in p.entries))
    elif isinstance(p, M.StackMapTable):
        p = M.StackMapTable(_relayout_frames(p.frames, m))
    elif isinstance(p, M.TypeAnnotations):
        p = M.TypeAnnotations(tuple(_relayout_type_annotation(t, m) for t in p.annotations))
    else:
        return attr
    return M.AttributeInfo(attr.name_index, attr.name, p)


def _relayout_vtypes(vtypes, m):
    return tuple((t, m(v)) if t == M.ITEM_UNINITIALIZED else (t, v) for t, v in vtypes)


def _relayout_frames(frames, m):
    out = []
    prev_old = -1
    prev_new = -1
    for fr in frames:
        old = prev_old + fr.offset_delta + 1
        new = m(old)
        delta = new - prev_new - 1
        ft = fr.frame_type
        if ft <= 63 and delta > 63:
            ft = 251
        elif 64 <= ft <= 127 and delta > 63:
            ft = 247
        elif ft <= 63:
            ft = delta
        elif ft <= 127:
            ft = 64 + delta
        out.append(M.Frame(ft, delta, _relayout_vtypes(fr.locals, m), _relayout_vtypes(fr.stack, m)))
        prev_old, prev_new = old, new
    return tuple(out)


def _relayout_type_annotation(t: M.TypeAnnotation, m) -> M.TypeAnnotation:
    tt = t.target_type
    info = t.target_info
    if tt in (0x40, 0x41):
        info = (tuple((m(s), m(s + n) - m(s), i) for s, n, i in info[0]),)
    elif 0x43 <= tt <= 0x46:
        info = (m(info[0]),)
    elif 0x47 <= tt <= 0x4B:
        info = (m(info[0]), info[1])
    return t._replace(target_info=info)
