from __future__ import annotations

import json

import pytest

from bineq import fixtures as F
from bineq.archive import write_archive
from bineq.cli import EXIT_DIFFERENT, EXIT_ERROR, EXIT_OK, EXIT_USAGE, main


def write(tmp_path, name: str, data: bytes) -> str:
    p = tmp_path / name
    p.write_bytes(data)
    return str(p)


def test_compare_classes_constant_change(tmp_path, capsys):
    a, b = F.constant_value_pair()
    code = main(["compare-classes", write(tmp_path, "a.class", a), write(tmp_path, "b.class", b)])
    out = capsys.readouterr().out
    assert code == EXIT_DIFFERENT
    assert "-  ConstantValue int 123" in out and "+  ConstantValue int 124" in out


def test_compare_classes_structured(tmp_path, capsys):
    a = F.minimal_class()
    code = main(["compare-classes", "--format", "structured", "--relations", "bitwise,tlsh",
                 "--tau", "5", write(tmp_path, "a.class", a), write(tmp_path, "b.class", a)])
    doc = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert doc["relations"] == ["bitwise", "tlsh5"]
    assert doc["verdict"]["strongest_level"] == 1


def test_compare_jars_identical(tmp_path, capsys, corpus):
    jar = tmp_path / "x.jar"
    write_archive(jar, corpus[:10])
    code = main(["compare-jars", "--jobs", "1", str(jar), str(jar)])
    assert code == EXIT_OK
    assert "aggregate: level 1" in capsys.readouterr().out


def test_compare_jars_structured_schema(tmp_path, capsys, corpus):
    left, right = tmp_path / "l.jar", tmp_path / "r.jar"
    write_archive(left, corpus[:5])
    write_archive(right, corpus[:4])
    code = main(["compare-jars", "--format", "structured", "--jobs", "1", str(left), str(right)])
    doc = json.loads(capsys.readouterr().out)
    assert code == EXIT_DIFFERENT
    assert doc["aggregate"] == "non-equivalent" and len(doc["missing_in_right"]) == 1
    code = main(["compare-jars", "--jobs", "1", "--exclude", doc["missing_in_right"][0],
                 str(left), str(right)])
    assert code == EXIT_OK


def test_render_levels(tmp_path, capsys):
    left, right = F.concat_pair()
    a, b = write(tmp_path, "a.class", left), write(tmp_path, "b.class", right)
    assert main(["render", "--level", "2", a]) == EXIT_OK
    l2 = capsys.readouterr().out
    assert main(["render", "--level", "3", a]) == EXIT_OK
    l3a = capsys.readouterr().out
    main(["render", "--level", "3", b])
    l3b = capsys.readouterr().out
    assert "StringBuilder" in l2 and l3a == l3b


def test_hash(tmp_path, capsys):
    path = write(tmp_path, "a.class", F.debug_class())
    assert main(["hash", path]) == EXIT_OK
    assert len(capsys.readouterr().out.strip()) == 70
    assert main(["hash", write(tmp_path, "short.bin", b"tiny")]) == EXIT_ERROR


def test_source_equiv(tmp_path, capsys):
    a = write(tmp_path, "A.java", b"class A { int x = 1; }")
    b = write(tmp_path, "B.java", b"class A {\n  int x = 1; // same\n}")
    c = write(tmp_path, "C.java", b"class A { int x = 2; }")
    assert main(["source-equiv", a, b]) == EXIT_OK
    assert main(["source-equiv", a, c]) == EXIT_DIFFERENT
    assert '"left": "1"' in capsys.readouterr().out


def test_gen_oracles_and_evaluate(tmp_path, capsys, corpus):
    src = tmp_path / "corpus"
    src.mkdir()
    for i, (_, data) in enumerate(corpus[600:608]):
        (src / f"C{i}.class").write_bytes(data)
    out = tmp_path / "oracles"
    assert main(["gen-oracles", str(src), "--seed", "5", "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    manifest = out / "manifest.jsonl"
    record = json.loads(manifest.read_text().splitlines()[0])
    assert list(record) == ["left_path", "right_path", "label", "mutation", "seed",
                            "left_sha256", "right_sha256"]
    code = main(["evaluate", "--manifest", str(manifest), "--jobs", "1", "--format", "structured"])
    doc = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert {c["relation"] for c in doc["cells"]} == {"bitwise", "disassembled", "normalized",
                                                     "tlsh10", "tlsh100"}


def test_fetch(tmp_path, capsys, maven_server):
    import hashlib
    import io
    import zipfile

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as z:
        z.writestr("a.txt", "x")
    body = buf.getvalue()
    maven_server.put("g/a/maven-metadata.xml",
                     b"<metadata><versioning><versions><version>1.0-redhat-1</version>"
                     b"<version>1.0.redhat-2</version></versions></versioning></metadata>")
    maven_server.put("g/a/1.0.redhat-2/a-1.0.redhat-2.jar", body)
    maven_server.put("g/a/1.0.redhat-2/a-1.0.redhat-2.jar.md5", hashlib.md5(body).hexdigest().encode())
    code = main(["fetch", "--repo", maven_server.url, "--gav", "g:a:1.0", "--strategy", "last",
                 "--cache", str(tmp_path / "c"), "--repo-id", "rh2"])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("a-1.0.redhat-2.jar")


def test_usage_errors(capsys):
    assert main_exit(["--bogus"]) == EXIT_USAGE
    assert main_exit(["compare-classes", "only-one"]) == EXIT_USAGE
    assert main_exit(["compare-classes", "--relations", "fuzzy", "a", "b"]) == EXIT_USAGE
    assert main_exit(["render", "--level", "4", "x"]) == EXIT_USAGE


def main_exit(argv) -> int:
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_operational_error(tmp_path, capsys):
    assert main(["compare-classes", str(tmp_path / "nope"), str(tmp_path / "nope")]) == EXIT_ERROR
    bad = write(tmp_path, "bad.jar", b"zip? no")
    assert main(["compare-jars", "--jobs", "1", bad, bad]) == EXIT_ERROR
