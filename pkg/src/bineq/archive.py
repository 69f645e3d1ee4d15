"""Zip/jar reading shared by the jar and source comparisons."""

from __future__ import annotations

import hashlib
import os
import zipfile
from dataclasses import dataclass

from .errors import ArchiveUnreadable


@dataclass(frozen=True)
class Entry:
    path: str
    data: bytes
    occurrence: int = 0  # index among entries sharing this path


@dataclass(frozen=True)
class Archive:
    path: str
    sha256: str
    entries: tuple[Entry, ...]

    def by_path(self) -> dict[str, list[Entry]]:
        out: dict[str, list[Entry]] = {}
        for e in self.entries:
            out.setdefault(e.path, []).append(e)
        return out

    @property
    def duplicates(self) -> list[str]:
        return sorted(p for p, es in self.by_path().items() if len(es) > 1)


def read_archive(path: str | os.PathLike) -> Archive:
    """Read every file entry of a zip archive, skipping directories."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ArchiveUnreadable(f"{path}: {exc}") from exc
    return read_archive_bytes(raw, str(path))


def read_archive_bytes(raw: bytes, label: str = "<memory>") -> Archive:
    import io

    try:
        with zipfile.ZipFile(io.BytesIO(raw)) as z:
            seen: dict[str, int] = {}
            entries = []
            for info in z.infolist():
                if info.is_dir():
                    continue
                k = seen.get(info.filename, 0)
                seen[info.filename] = k + 1
                entries.append(Entry(info.filename, z.read(info), k))
    except (zipfile.BadZipFile, zipfile.LargeZipFile, OSError, EOFError, ValueError,
            NotImplementedError) as exc:
        raise ArchiveUnreadable(f"{label}: {exc}") from exc
    return Archive(label, hashlib.sha256(raw).hexdigest(), tuple(entries))


def write_archive(path: str | os.PathLike, entries) -> None:
    """Write ``(name, bytes)`` pairs deterministically (fixed timestamps)."""
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as z:
        for name, data in entries:
            info = zipfile.ZipInfo(name, date_time=(2024, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            z.writestr(info, data)
