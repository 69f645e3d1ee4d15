"""Assemble tests/data/corpus.jar from jars bundled in public Python wheels.

Usage: python scripts/build_corpus.py WHEEL_DIR

WHEEL_DIR must contain the py4j, JPype1 and tabula-py wheels
(``pip download --no-deps py4j JPype1 tabula-py``).
"""

from __future__ import annotations

import glob
import io
import os
import sys
import zipfile

# (wheel glob, jar suffix inside wheel, path prefix, max classes)
SOURCES = [
    ("py4j-*.whl", ".jar", "", None),
    ("jpype1-*.whl", "org.jpype.jar", "", None),
    ("tabula_py-*.whl", ".jar", "com/google/gson/", None),
    ("tabula_py-*.whl", ".jar", "META-INF/versions/11/", None),
    ("tabula_py-*.whl", ".jar", "META-INF/versions/15/", None),
    ("tabula_py-*.whl", ".jar", "META-INF/versions/9/org/bouncycastle/", 80),
    ("tabula_py-*.whl", ".jar", "org/locationtech/jts/", 300),
    ("tabula_py-*.whl", ".jar", "org/apache/pdfbox/", 200),
    ("tabula_py-*.whl", ".jar", "org/apache/fontbox/", 60),
    ("tabula_py-*.whl", ".jar", "org/apache/commons/", None),
    ("tabula_py-*.whl", ".jar", "org/slf4j/", None),
    ("tabula_py-*.whl", ".jar", "org/bouncycastle/util/", 40),
    ("tabula_py-*.whl", ".jar", "technology/tabula/", None),
]


def inner_jars(wheel: str, suffix: str):
    with zipfile.ZipFile(wheel) as whl:
        for name in sorted(whl.namelist()):
            if name.endswith(suffix) and name.endswith(".jar"):
                yield zipfile.ZipFile(io.BytesIO(whl.read(name)))


def main(wheel_dir: str, out: str) -> None:
    chosen: dict[str, bytes] = {}
    for pattern, suffix, prefix, limit in SOURCES:
        for wheel in sorted(glob.glob(os.path.join(wheel_dir, pattern))):
            for jar in inner_jars(wheel, suffix):
                names = sorted(n for n in jar.namelist()
                               if n.endswith(".class") and n.startswith(prefix))
                if limit is not None:
                    # spread the sample over the package tree
                    step = max(1, len(names) // limit)
                    names = names[::step][:limit]
                for n in names:
                    chosen.setdefault(n, jar.read(n))
    with zipfile.ZipFile(out, "w", zipfile.ZIP_DEFLATED) as z:
        for name in sorted(chosen):
            info = zipfile.ZipInfo(name, date_time=(2024, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            z.writestr(info, chosen[name])
    print(f"wrote {len(chosen)} classes to {out}")


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    main(sys.argv[1], os.path.join(here, "..", "tests", "data", "corpus.jar"))
