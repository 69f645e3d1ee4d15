"""Labeled EQ/NEQ class-file pair generation by mutation.

EQ mutations preserve behaviour (pool permutation, member reordering,
debug-attribute stripping).  NEQ mutations change it with certainty
(constant change, arithmetic or branch swap).  Every generated pair is
checked against the engine before it is emitted.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import struct
from dataclasses import dataclass, replace

from .classfile import model as M
from .classfile import parse_class, serialize_class, validate_class
from .classfile.opcodes import OPCODES
from .errors import BineqError, NoTarget, UnencodableModel
from .engine import DISASSEMBLED, FAIL, NORMALIZED, PASS, compare_class_pair

log = logging.getLogger(__name__)

EQ, NEQ = "EQ", "NEQ"


def derive_seed(seed: int, *parts) -> int:
    """A u64 seed derived deterministically from ``seed`` and ``parts``."""
    h = hashlib.sha256(repr((seed, *parts)).encode()).digest()
    return int.from_bytes(h[:8], "big")


# ---------------------------------------------------------------- EQ


def permute_pool(cf: M.ClassFile, seed: int) -> M.ClassFile:
    """Renumber the constant pool with a seeded permutation.

    Seed 0 is the identity.  Classes with attributes this package cannot
    rewrite are returned unchanged, as are pools with fewer than two
    distinct entries.
    """
    if seed == 0 or cf.has_opaque_attributes():
        return cf
    entries = cf.constant_pool.entries
    units = [i for i in range(1, len(entries)) if entries[i] is not None]
    if len(set(entries[i] for i in units)) < 2:
        return cf
    rng = random.Random(seed)
    for _ in range(16):
        order = units[:]
        rng.shuffle(order)
        if [entries[i] for i in order] == [entries[i] for i in units]:
            continue
        mapping = {}
        k = 1
        for old in order:
            mapping[old] = k
            k += 2 if entries[old].tag in (M.LONG, M.DOUBLE) else 1

        def f(i: int) -> int:
            return mapping[i]

        new_entries: list = [None] * len(entries)
        for old in order:
            new_entries[mapping[old]] = entries[old].remap(f)
        try:
            return validate_class(cf.remap(f, M.ConstantPool(tuple(new_entries))))
        except UnencodableModel as exc:
            log.info("permutation rejected: %s", exc)
    return cf


def _shuffled(items: tuple, rng: random.Random) -> tuple:
    if len(set(items)) < 2:
        return items
    for _ in range(16):
        out = list(items)
        rng.shuffle(out)
        if out != list(items):
            return tuple(out)
    return items


def reorder_members(cf: M.ClassFile, seed: int) -> M.ClassFile:
    """Shuffle field and method order; seed 0 is the identity."""
    if seed == 0:
        return cf
    rng = random.Random(seed)
    return replace(cf, fields=_shuffled(cf.fields, rng), methods=_shuffled(cf.methods, rng))


def _strip(attrs) -> tuple:
    out = []
    for a in attrs:
        if a.name in M.DEBUG_ATTRIBUTES:
            continue
        if isinstance(a.payload, M.Code):
            a = replace(a, payload=replace(a.payload, attributes=_strip(a.payload.attributes)))
        elif isinstance(a.payload, M.Record):
            comps = tuple(replace(c, attributes=_strip(c.attributes)) for c in a.payload.components)
            a = replace(a, payload=M.Record(comps))
        out.append(a)
    return tuple(out)


def strip_debug_attrs(cf: M.ClassFile) -> M.ClassFile:
    """Remove the six debug-only attributes at every nesting level."""
    return replace(
        cf,
        attributes=_strip(cf.attributes),
        fields=tuple(replace(m, attributes=_strip(m.attributes)) for m in cf.fields),
        methods=tuple(replace(m, attributes=_strip(m.attributes)) for m in cf.methods),
    )


# ---------------------------------------------------------------- NEQ

_INT_RANGES = {"Z": (0, 1), "B": (-128, 127), "C": (0, 65535), "S": (-32768, 32767),
               "I": (-2**31, 2**31 - 1)}


def _wrap(v: int, lo: int, hi: int) -> int:
    return lo + (v + 1 - lo) % (hi - lo + 1)


def _bump_float(bits: int, fmt: str, width: int) -> int:
    size = 32 if fmt == "f" else 64
    v = struct.unpack(">" + fmt, bits.to_bytes(width, "big"))[0]
    if math.isfinite(v):
        nb = int.from_bytes(struct.pack(">" + fmt, v + 1.0), "big")
        if nb != bits:
            return nb
    return (bits + 1) % (1 << size)


def bumped(entry: M.ConstEntry, desc: str | None = None) -> M.ConstEntry:
    """``entry`` with its numeric value increased by one, wrapping."""
    v = entry.args[0]
    if entry.tag == M.INTEGER:
        lo, hi = _INT_RANGES.get(desc or "I", _INT_RANGES["I"])
        if not lo <= v <= hi:
            lo, hi = _INT_RANGES["I"]
        return M.ConstEntry(M.INTEGER, (_wrap(v, lo, hi),))
    if entry.tag == M.LONG:
        return M.ConstEntry(M.LONG, (_wrap(v, -2**63, 2**63 - 1),))
    if entry.tag == M.FLOAT:
        return M.ConstEntry(M.FLOAT, (_bump_float(v, "f", 4),))
    if entry.tag == M.DOUBLE:
        return M.ConstEntry(M.DOUBLE, (_bump_float(v, "d", 8),))
    raise NoTarget(f"pool entry {entry.kind} is not numeric")


_NUMERIC = (M.INTEGER, M.LONG, M.FLOAT, M.DOUBLE)
_LDC_OPS = {OPCODES["ldc"], OPCODES["ldc_w"], OPCODES["ldc2_w"]}


def _code_of(m: M.MemberInfo):
    for k, a in enumerate(m.attributes):
        if a.name == "Code" and isinstance(a.payload, M.Code):
            return k, a.payload
    return None, None


def _with_code(m: M.MemberInfo, k: int, code: M.Code) -> M.MemberInfo:
    attrs = list(m.attributes)
    attrs[k] = replace(attrs[k], payload=code)
    return replace(m, attributes=tuple(attrs))


def mutate_constant_value(cf: M.ClassFile, seed: int) -> M.ClassFile:
    """Add one to a single numeric constant (a field ConstantValue or an
    ``ldc`` operand).  The new value gets its own pool entry so no other
    use of the old constant is affected."""
    pool = cf.constant_pool
    targets = []
    for fi, f in enumerate(cf.fields):
        for ai, a in enumerate(f.attributes):
            if a.name == "ConstantValue" and not a.opaque and pool[a.payload.index].tag in _NUMERIC:
                targets.append(("field", fi, ai))
    for mi, m in enumerate(cf.methods):
        k, code = _code_of(m)
        if code is None:
            continue
        for ii, ins in enumerate(code.instructions):
            if ins.opcode in _LDC_OPS and pool[ins.operands[0]].tag in _NUMERIC:
                targets.append(("code", mi, ii))
    if not targets:
        raise NoTarget("no numeric constant to mutate")
    kind, a, b = random.Random(seed).choice(targets)
    entries = list(pool.entries)
    new_index = len(entries)

    def append(entry: M.ConstEntry) -> None:
        entries.append(entry)
        if entry.tag in (M.LONG, M.DOUBLE):
            entries.append(None)

    if kind == "field":
        f = cf.fields[a]
        attr = f.attributes[b]
        append(bumped(pool[attr.payload.index], cf.member_descriptor(f)))
        attrs = list(f.attributes)
        attrs[b] = replace(attr, payload=M.SingleIndex(new_index))
        fields = list(cf.fields)
        fields[a] = replace(f, attributes=tuple(attrs))
        out = replace(cf, fields=tuple(fields))
    else:
        m = cf.methods[a]
        k, code = _code_of(m)
        ins = code.instructions[b]
        append(bumped(pool[ins.operands[0]]))
        instructions = list(code.instructions)
        instructions[b] = ins._replace(operands=(new_index,))
        methods = list(cf.methods)
        methods[a] = _with_code(m, k, replace(code, instructions=tuple(instructions)))
        out = replace(cf, methods=tuple(methods))
    return validate_class(replace(out, constant_pool=M.ConstantPool(tuple(entries))))


_SWAPS = {
    "iadd": "isub", "isub": "iadd", "imul": "idiv", "idiv": "imul",
    "if_icmplt": "if_icmpge", "if_icmpge": "if_icmplt",
    "iconst_0": "iconst_1", "iconst_1": "iconst_0",
}
_SWAP_CODES = {OPCODES[a]: OPCODES[b] for a, b in _SWAPS.items()}
_IRETURN = OPCODES["ireturn"]


def _int_constant(ins: M.Instruction | None, pool: M.ConstantPool):
    """The int an instruction pushes, if it is a constant push."""
    if ins is None:
        return None
    mn = ins.mnemonic
    if mn.startswith("iconst_"):
        return -1 if mn == "iconst_m1" else int(mn[7:])
    if mn in ("bipush", "sipush"):
        return ins.operands[0]
    if mn in ("ldc", "ldc_w") and pool[ins.operands[0]].tag == M.INTEGER:
        return pool[ins.operands[0]].args[0]
    return None


def _swap_is_semantic(code: M.Code, i: int, pool: M.ConstantPool) -> bool:
    ins = code.instructions[i]
    prev = code.instructions[i - 1] if i else None
    nxt = code.instructions[i + 1] if i + 1 < len(code.instructions) else None
    mn = ins.mnemonic
    if mn in ("iadd", "isub"):
        return _int_constant(prev, pool) != 0
    if mn in ("imul", "idiv"):
        return _int_constant(prev, pool) not in (1, -1)
    if mn in ("if_icmplt", "if_icmpge"):
        return nxt is not None and ins.operands[0] != nxt.offset
    return nxt is not None and nxt.opcode == _IRETURN


def swap_opcode(cf: M.ClassFile, seed: int) -> M.ClassFile:
    """Swap one instruction for its semantic opposite (same length)."""
    pool = cf.constant_pool
    targets = []
    for mi, m in enumerate(cf.methods):
        k, code = _code_of(m)
        if code is None:
            continue
        for ii, ins in enumerate(code.instructions):
            if ins.opcode in _SWAP_CODES and _swap_is_semantic(code, ii, pool):
                targets.append((mi, ii))
    if not targets:
        raise NoTarget("no swappable instruction")
    mi, ii = random.Random(seed).choice(targets)
    m = cf.methods[mi]
    k, code = _code_of(m)
    instructions = list(code.instructions)
    ins = instructions[ii]
    instructions[ii] = ins._replace(opcode=_SWAP_CODES[ins.opcode])
    methods = list(cf.methods)
    methods[mi] = _with_code(m, k, replace(code, instructions=tuple(instructions)))
    return validate_class(replace(cf, methods=tuple(methods)))


EQ_MUTATIONS = {
    "permute_pool": permute_pool,
    "reorder_members": reorder_members,
    "strip_debug_attrs": lambda cf, seed: strip_debug_attrs(cf),
}
NEQ_MUTATIONS = {
    "mutate_constant_value": mutate_constant_value,
    "swap_opcode": swap_opcode,
}


# ---------------------------------------------------------------- oracle sets


@dataclass(frozen=True)
class OraclePair:
    left: bytes
    right: bytes
    label: str
    mutation: str
    seed: int
    left_path: str = ""
    right_path: str = ""
    compiler: str | None = None

    @property
    def left_sha256(self) -> str:
        return hashlib.sha256(self.left).hexdigest()

    @property
    def right_sha256(self) -> str:
        return hashlib.sha256(self.right).hexdigest()


def _accept(label: str, left: bytes, right: bytes) -> str | None:
    """Reason to discard a candidate pair, or None to keep it."""
    if left == right:
        return "bitwise identical"
    if label == EQ:
        v = compare_class_pair(left, right, [DISASSEMBLED])
        if v.outcomes[DISASSEMBLED.key].status != PASS:
            return "EQ pair not Level 2 equivalent"
    else:
        v = compare_class_pair(left, right, [NORMALIZED])
        if v.outcomes[NORMALIZED.key].status == PASS:
            return "NEQ pair Level 3 equivalent"
        if v.outcomes[NORMALIZED.key].status != FAIL:
            return "NEQ pair failed to evaluate"
    return None


def _try(label: str, names: list[str], table, cf: M.ClassFile, data: bytes, seed: int, source: str):
    for name in names:
        try:
            right = serialize_class(table[name](cf, seed))
            parse_class(right)
        except NoTarget:
            continue
        except BineqError as exc:
            log.info("%s on %s rejected: %s", name, source, exc)
            continue
        reason = _accept(label, data, right)
        if reason is None:
            return OraclePair(data, right, label, name, seed, left_path=source)
        log.info("%s on %s discarded: %s", name, source, reason)
    return None


def generate_oracle_set(corpus, count: int, seed: int) -> list[OraclePair]:
    """Generate up to ``count`` EQ and ``count`` NEQ pairs per corpus class.

    ``corpus`` holds raw class files or ``(name, bytes)`` pairs.  Output is
    deterministic for a fixed seed.
    """
    out: list[OraclePair] = []
    eq_names, neq_names = list(EQ_MUTATIONS), list(NEQ_MUTATIONS)
    for i, item in enumerate(corpus):
        source, data = item if isinstance(item, tuple) else (f"class{i}", item)
        try:
            cf = parse_class(data)
        except BineqError as exc:
            log.info("skipping %s: %s", source, exc)
            continue
        for k in range(count):
            s = derive_seed(seed, i, k)
            rot = (i + k) % len(eq_names)
            pair = _try(EQ, eq_names[rot:] + eq_names[:rot], EQ_MUTATIONS, cf, data, s, source)
            if pair:
                out.append(pair)
            rot = (i + k) % len(neq_names)
            pair = _try(NEQ, neq_names[rot:] + neq_names[:rot], NEQ_MUTATIONS, cf, data, s, source)
            if pair:
                out.append(pair)
    return out


MANIFEST_FIELDS = ("left_path", "right_path", "label", "mutation", "seed",
                   "left_sha256", "right_sha256")


def write_oracle_set(pairs, out_dir: str | os.PathLike, manifest: str = "manifest.jsonl") -> str:
    """Store pair classes content-addressed under ``out_dir`` and write a
    JSON-lines manifest; returns the manifest path."""
    classes = os.path.join(out_dir, "classes")
    os.makedirs(classes, exist_ok=True)
    lines = []
    for p in pairs:
        record = {}
        for side, data, digest in (("left", p.left, p.left_sha256), ("right", p.right, p.right_sha256)):
            rel = f"classes/{digest}.class"
            target = os.path.join(out_dir, rel)
            if not os.path.exists(target):
                with open(target + ".tmp", "wb") as fh:
                    fh.write(data)
                os.replace(target + ".tmp", target)
            record[f"{side}_path"] = rel
        record.update(label=p.label, mutation=p.mutation, seed=p.seed,
                      left_sha256=p.left_sha256, right_sha256=p.right_sha256)
        if p.compiler is not None:
            record["compiler"] = p.compiler
        lines.append(json.dumps({k: record[k] for k in (*MANIFEST_FIELDS, "compiler") if k in record}))
    path = os.path.join(out_dir, manifest)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
    return path


def load_manifest(path: str | os.PathLike) -> list[OraclePair]:
    """Read a manifest and the class files it names (relative to it)."""
    base = os.path.dirname(os.path.abspath(path))
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            sides = {}
            for side in ("left", "right"):
                with open(os.path.join(base, rec[f"{side}_path"]), "rb") as cf:
                    data = cf.read()
                want = rec.get(f"{side}_sha256")
                if want and hashlib.sha256(data).hexdigest() != want:
                    raise ValueError(f"{path}:{n}: {side} file does not match its sha256")
                sides[side] = data
            pairs.append(OraclePair(sides["left"], sides["right"], rec["label"], rec["mutation"],
                                    int(rec.get("seed", 0)), rec["left_path"], rec["right_path"],
                                    rec.get("compiler")))
    return pairs
