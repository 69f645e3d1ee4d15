"""Regenerate tests/data/tlsh_vectors.json from the reference TLSH binding.

Requires the ``py-tlsh`` package, which is used only here and never at
runtime.  Usage: python scripts/make_tlsh_vectors.py [corpus.jar]
"""

import base64
import json
import random
import sys
import zipfile

import tlsh


def mutate(data: bytes, rng: random.Random, edits: int) -> bytes:
    out = bytearray(data)
    for _ in range(edits):
        out[rng.randrange(len(out))] = rng.randrange(256)
    return bytes(out)


def main() -> None:
    corpus = sys.argv[1] if len(sys.argv) > 1 else "tests/data/corpus.jar"
    rng = random.Random(20240101)
    inputs = [("seeded-512", random.Random(42).randbytes(512))]
    for k, length in enumerate([50, 64, 100, 255, 256, 300, 656, 657, 1000, 2048,
                                3199, 3200, 4096, 10000, 65536]):
        alphabet = [2, 4, 16, 256][k % 4]
        inputs.append((f"random-{length}-a{alphabet}",
                       bytes(rng.randrange(alphabet) for _ in range(length))))
    inputs.append(("text", (b"the quick brown fox jumps over the lazy dog " * 40)))
    with zipfile.ZipFile(corpus) as z:
        names = sorted(n for n in z.namelist() if n.endswith(".class"))
        for name in names[::125][:8]:
            inputs.append((name, z.read(name)))
    inputs.append(("constant-4096", bytes([7]) * 4096))
    inputs.append(("short-49", bytes(range(49))))

    vectors = []
    for label, data in inputs:
        digest = tlsh.hash(data)
        vectors.append({
            "label": label,
            "data": base64.b64encode(data).decode(),
            "digest": None if digest == "TNULL" or not digest else digest[2:].lower(),
        })

    pairs = []
    hashable = [v for v in vectors if v["digest"]]
    for k in range(20):
        base = base64.b64decode(hashable[k % len(hashable)]["data"])
        other = mutate(base, rng, edits=[1, 3, 10, 30, 100][k % 5])
        if k % 7 == 6:
            other = base + bytes(rng.randrange(256) for _ in range(64))
        da, db = tlsh.hash(base), tlsh.hash(other)
        if "TNULL" in (da, db):
            continue
        pairs.append({
            "a": base64.b64encode(base).decode(),
            "b": base64.b64encode(other).decode(),
            "distance": tlsh.diff(da, db),
            "distance_no_length": tlsh.diffxlen(da, db),
        })

    json.dump({"generator": "py-tlsh " + getattr(tlsh, "__version__", "?"),
               "vectors": vectors, "pairs": pairs},
              open("tests/data/tlsh_vectors.json", "w"), indent=1)
    print(len(vectors), "vectors,", len(pairs), "pairs")


if __name__ == "__main__":
    main()
