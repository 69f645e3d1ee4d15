"""JVM opcode table.

Every opcode maps to a mnemonic and an operand *kind* that tells the
decoder and encoder how its operand bytes are laid out.
"""

from __future__ import annotations

# operand kinds
NONE = 0
LOCAL = 1      # u1 local slot (u2 under wide)
BYTE = 2       # s1 immediate (bipush)
SHORT = 3      # s2 immediate (sipush)
CP1 = 4        # u1 pool index (ldc)
CP2 = 5        # u2 pool index
BRANCH2 = 6    # s2 relative branch
BRANCH4 = 7    # s4 relative branch
IINC = 8       # u1 slot, s1 delta (u2, s2 under wide)
TABLESWITCH = 9
LOOKUPSWITCH = 10
INVOKEINTERFACE = 11  # u2 index, u1 count, u1 zero
INVOKEDYNAMIC = 12    # u2 index, u1 zero, u1 zero
NEWARRAY = 13         # u1 atype
MULTIANEWARRAY = 14   # u2 index, u1 dimensions
WIDE = 15

_TABLE = [
    ("nop", NONE), ("aconst_null", NONE), ("iconst_m1", NONE),
    ("iconst_0", NONE), ("iconst_1", NONE), ("iconst_2", NONE),
    ("iconst_3", NONE), ("iconst_4", NONE), ("iconst_5", NONE),
    ("lconst_0", NONE), ("lconst_1", NONE), ("fconst_0", NONE),
    ("fconst_1", NONE), ("fconst_2", NONE), ("dconst_0", NONE),
    ("dconst_1", NONE), ("bipush", BYTE), ("sipush", SHORT),
    ("ldc", CP1), ("ldc_w", CP2), ("ldc2_w", CP2),
    ("iload", LOCAL), ("lload", LOCAL), ("fload", LOCAL), ("dload", LOCAL),
    ("aload", LOCAL),
    ("iload_0", NONE), ("iload_1", NONE), ("iload_2", NONE), ("iload_3", NONE),
    ("lload_0", NONE), ("lload_1", NONE), ("lload_2", NONE), ("lload_3", NONE),
    ("fload_0", NONE), ("fload_1", NONE), ("fload_2", NONE), ("fload_3", NONE),
    ("dload_0", NONE), ("dload_1", NONE), ("dload_2", NONE), ("dload_3", NONE),
    ("aload_0", NONE), ("aload_1", NONE), ("aload_2", NONE), ("aload_3", NONE),
    ("iaload", NONE), ("laload", NONE), ("faload", NONE), ("daload", NONE),
    ("aaload", NONE), ("baload", NONE), ("caload", NONE), ("saload", NONE),
    ("istore", LOCAL), ("lstore", LOCAL), ("fstore", LOCAL), ("dstore", LOCAL),
    ("astore", LOCAL),
    ("istore_0", NONE), ("istore_1", NONE), ("istore_2", NONE), ("istore_3", NONE),
    ("lstore_0", NONE), ("lstore_1", NONE), ("lstore_2", NONE), ("lstore_3", NONE),
    ("fstore_0", NONE), ("fstore_1", NONE), ("fstore_2", NONE), ("fstore_3", NONE),
    ("dstore_0", NONE), ("dstore_1", NONE), ("dstore_2", NONE), ("dstore_3", NONE),
    ("astore_0", NONE), ("astore_1", NONE), ("astore_2", NONE), ("astore_3", NONE),
    ("iastore", NONE), ("lastore", NONE), ("fastore", NONE), ("dastore", NONE),
    ("aastore", NONE), ("bastore", NONE), ("castore", NONE), ("sastore", NONE),
    ("pop", NONE), ("pop2", NONE), ("dup", NONE), ("dup_x1", NONE),
    ("dup_x2", NONE), ("dup2", NONE), ("dup2_x1", NONE), ("dup2_x2", NONE),
    ("swap", NONE),
    ("iadd", NONE), ("ladd", NONE), ("fadd", NONE), ("dadd", NONE),
    ("isub", NONE), ("lsub", NONE), ("fsub", NONE), ("dsub", NONE),
    ("imul", NONE), ("lmul", NONE), ("fmul", NONE), ("dmul", NONE),
    ("idiv", NONE), ("ldiv", NONE), ("fdiv", NONE), ("ddiv", NONE),
    ("irem", NONE), ("lrem", NONE), ("frem", NONE), ("drem", NONE),
    ("ineg", NONE), ("lneg", NONE), ("fneg", NONE), ("dneg", NONE),
    ("ishl", NONE), ("lshl", NONE), ("ishr", NONE), ("lshr", NONE),
    ("iushr", NONE), ("lushr", NONE), ("iand", NONE), ("land", NONE),
    ("ior", NONE), ("lor", NONE), ("ixor", NONE), ("lxor", NONE),
    ("iinc", IINC),
    ("i2l", NONE), ("i2f", NONE), ("i2d", NONE), ("l2i", NONE), ("l2f", NONE),
    ("l2d", NONE), ("f2i", NONE), ("f2l", NONE), ("f2d", NONE), ("d2i", NONE),
    ("d2l", NONE), ("d2f", NONE), ("i2b", NONE), ("i2c", NONE), ("i2s", NONE),
    ("lcmp", NONE), ("fcmpl", NONE), ("fcmpg", NONE), ("dcmpl", NONE),
    ("dcmpg", NONE),
    ("ifeq", BRANCH2), ("ifne", BRANCH2), ("iflt", BRANCH2), ("ifge", BRANCH2),
    ("ifgt", BRANCH2), ("ifle", BRANCH2),
    ("if_icmpeq", BRANCH2), ("if_icmpne", BRANCH2), ("if_icmplt", BRANCH2),
    ("if_icmpge", BRANCH2), ("if_icmpgt", BRANCH2), ("if_icmple", BRANCH2),
    ("if_acmpeq", BRANCH2), ("if_acmpne", BRANCH2),
    ("goto", BRANCH2), ("jsr", BRANCH2), ("ret", LOCAL),
    ("tableswitch", TABLESWITCH), ("lookupswitch", LOOKUPSWITCH),
    ("ireturn", NONE), ("lreturn", NONE), ("freturn", NONE), ("dreturn", NONE),
    ("areturn", NONE), ("return", NONE),
    ("getstatic", CP2), ("putstatic", CP2), ("getfield", CP2), ("putfield", CP2),
    ("invokevirtual", CP2), ("invokespecial", CP2), ("invokestatic", CP2),
    ("invokeinterface", INVOKEINTERFACE), ("invokedynamic", INVOKEDYNAMIC),
    ("new", CP2), ("newarray", NEWARRAY), ("anewarray", CP2),
    ("arraylength", NONE), ("athrow", NONE), ("checkcast", CP2),
    ("instanceof", CP2), ("monitorenter", NONE), ("monitorexit", NONE),
    ("wide", WIDE), ("multianewarray", MULTIANEWARRAY),
    ("ifnull", BRANCH2), ("ifnonnull", BRANCH2),
    ("goto_w", BRANCH4), ("jsr_w", BRANCH4),
]

MNEMONICS: tuple[str, ...] = tuple(name for name, _ in _TABLE)
KINDS: tuple[int, ...] = tuple(kind for _, kind in _TABLE)
OPCODES: dict[str, int] = {name: i for i, name in enumerate(MNEMONICS)}

# operand kind -> encoded length including the opcode byte (fixed-size kinds)
FIXED_SIZE = {
    NONE: 1, LOCAL: 2, BYTE: 2, SHORT: 3, CP1: 2, CP2: 3, BRANCH2: 3,
    BRANCH4: 5, IINC: 3, INVOKEINTERFACE: 5, INVOKEDYNAMIC: 5, NEWARRAY: 2,
    MULTIANEWARRAY: 4,
}

WIDENABLE = frozenset(OPCODES[n] for n in (
    "iload", "lload", "fload", "dload", "aload",
    "istore", "lstore", "fstore", "dstore", "astore", "ret", "iinc",
))

LDC = OPCODES["ldc"]
LDC_W = OPCODES["ldc_w"]
LDC2_W = OPCODES["ldc2_w"]
GOTO = OPCODES["goto"]
GOTO_W = OPCODES["goto_w"]
JSR = OPCODES["jsr"]
JSR_W = OPCODES["jsr_w"]
WIDE_OP = OPCODES["wide"]
TABLESWITCH_OP = OPCODES["tableswitch"]
LOOKUPSWITCH_OP = OPCODES["lookupswitch"]

NEWARRAY_TYPES = {
    4: "boolean", 5: "char", 6: "float", 7: "double",
    8: "byte", 9: "short", 10: "int", 11: "long",
}

# xload_n / xstore_n shorthands -> (long form opcode, slot)
SHORTHAND: dict[int, tuple[int, int]] = {}
for _base, _first in (("iload", 26), ("lload", 30), ("fload", 34), ("dload", 38),
                      ("aload", 42), ("istore", 59), ("lstore", 63),
                      ("fstore", 67), ("dstore", 71), ("astore", 75)):
    for _n in range(4):
        SHORTHAND[_first + _n] = (OPCODES[_base], _n)

# width-only aliases: encodings that differ only in operand width
WIDTH_ALIAS = {LDC_W: LDC, GOTO_W: GOTO, JSR_W: JSR}


def is_branch(opcode: int) -> bool:
    kind = KINDS[opcode]
    return kind == BRANCH2 or kind == BRANCH4
