"""Bit-exact JVM class file model: parse, serialize, decode bytecode."""

from .code import decode_code, encode_instructions, relayout
from .model import (
    AttributeInfo, ClassFile, Code, ConstantPool, ConstEntry, Instruction,
    MemberInfo,
)
from .reader import parse_class
from .validate import validate_class
from .writer import serialize_class

__all__ = [
    "AttributeInfo", "ClassFile", "Code", "ConstantPool", "ConstEntry",
    "Instruction", "MemberInfo", "decode_code", "encode_instructions",
    "parse_class", "relayout", "serialize_class", "validate_class",
]
