"""Field and method descriptor parsing."""

from __future__ import annotations


def parse_method_descriptor(desc: str) -> tuple[list[str], str]:
    """Split ``(args)ret`` into argument descriptors and return descriptor."""
    if not desc.startswith("("):
        raise ValueError(f"not a method descriptor: {desc!r}")
    out: list[str] = []
    i = 1
    try:
        while desc[i] != ")":
            j = i
            while desc[j] == "[":
                j += 1
            if desc[j] == "L":
                j = desc.index(";", j)
            elif desc[j] not in "BCDFIJSZ":
                raise ValueError(f"bad descriptor {desc!r}")
            out.append(desc[i:j + 1])
            i = j + 1
    except IndexError:
        raise ValueError(f"truncated descriptor {desc!r}") from None
    return out, desc[i + 1:]


def slot_size(desc: str) -> int:
    return 2 if desc in ("J", "D") else 1
