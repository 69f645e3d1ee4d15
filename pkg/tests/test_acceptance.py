"""Acceptance criteria 1-11, each printing one PASS/FAIL line."""

from __future__ import annotations

import base64
import hashlib
import json
import os
import random
import time

import pytest

from bineq import fixtures as F
from bineq.archive import write_archive
from bineq.classfile import parse_class, serialize_class
from bineq.engine import (
    BITWISE, DEFAULT_RELATIONS, DISASSEMBLED, NORMALIZED, TLSH10, TLSH100, compare_class_pair,
    compare_jars, default_jobs, relation_properties_check,
)
from bineq.errors import ChecksumMismatch, NoTarget
from bineq.evaluate import evaluate
from bineq.repo import Coordinates, RepoClient, RepoSpec, select_version
from bineq.testkit import (
    EQ, NEQ, derive_seed, generate_oracle_set, mutate_constant_value, permute_pool,
    reorder_members, strip_debug_attrs, swap_opcode,
)
from bineq.tlsh import tlsh_distance, tlsh_hash

VECTORS = os.path.join(os.path.dirname(__file__), "data", "tlsh_vectors.json")
WITNESS_CLASS = "META-INF/versions/15/org/bouncycastle/jcajce/provider/asymmetric/edec/KeyPairGeneratorSpi.class"


def report(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number:>2} [{title}]: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def statuses(a: bytes, b: bytes, relations=DEFAULT_RELATIONS) -> dict:
    v = compare_class_pair(a, b, relations, short_circuit=False)
    return {k: o for k, o in v.outcomes.items()}


@pytest.fixture(scope="module")
def oracle_pairs(corpus):
    return generate_oracle_set(corpus, 1, 20240101)


def test_criterion_01_round_trip(capsys, corpus):
    start = time.perf_counter()
    same = sum(serialize_class(parse_class(d)) == d for _, d in corpus)
    elapsed = time.perf_counter() - start
    ok = len(corpus) >= 200 and same == len(corpus) and elapsed < 5.0
    report(capsys, 1, "round-trip", ok, f"{same}/{len(corpus)} byte-identical in {elapsed:.2f} s (limit 5 s)")


def test_criterion_02_permutation_invariance(capsys, corpus):
    classes = [d for _, d in corpus if not parse_class(d).has_opaque_attributes()][:20]
    runs = l1_fail = l2_pass = identity = 0
    for data in classes:
        cf = parse_class(data)
        for seed in range(1, 101):
            out = serialize_class(permute_pool(cf, derive_seed(2, seed)))
            runs += 1
            if out == data:
                identity += 1
                continue
            s = statuses(data, out, [BITWISE, DISASSEMBLED])
            l1_fail += s["bitwise"].status == "fail"
            l2_pass += s["disassembled"].status == "pass"
    moved = runs - identity
    ok = len(classes) >= 20 and l1_fail == moved and l2_pass == moved and moved > 0
    report(capsys, 2, "L2 pool-permutation invariance", ok,
           f"{len(classes)} classes x 100 seeds: {moved} non-identity, L1 failed {l1_fail}, L2 passed {l2_pass}")


def test_criterion_03_containment(capsys, oracle_pairs):
    pairs = [(p.left, p.right) for p in oracle_pairs]
    pairs += [(p.left, p.left) for p in oracle_pairs[:200]]  # also exercise the L1-pass premise
    violations = 0
    l1_passes = 0
    for a, b in pairs:
        s = {k: o.status for k, o in statuses(a, b).items()}
        dist = statuses(a, b, [TLSH10])["tlsh10"].provenance if s["bitwise"] == "pass" else None
        if s["bitwise"] == "pass":
            l1_passes += 1
            if s["disassembled"] != "pass" or (dist or {}).get("distance") != 0:
                violations += 1
        if s["disassembled"] == "pass" and s["normalized"] != "pass":
            violations += 1
    generated = len(oracle_pairs)
    ok = generated >= 1000 and violations == 0
    report(capsys, 3, "containment chain", ok,
           f"{generated} generated pairs + {len(pairs) - generated} self pairs ({l1_passes} L1 passes): "
           f"{violations} violations")


def test_criterion_04_neq_sensitivity(capsys, corpus):
    # mutations applied directly, without the generator's self-check filter
    judged = missed = 0
    for i, (_, data) in enumerate(corpus):
        cf = parse_class(data)
        for mutate in (mutate_constant_value, swap_opcode):
            try:
                out = serialize_class(mutate(cf, derive_seed(4, i)))
            except NoTarget:
                continue
            judged += 1
            s = statuses(data, out, [BITWISE, DISASSEMBLED, NORMALIZED])
            if any(o.status == "pass" for o in s.values()):
                missed += 1
    a, b = F.constant_value_pair()
    cv = statuses(a, b, [DISASSEMBLED])["disassembled"]
    cv_ok = cv.status == "fail" and "+  ConstantValue int 124" in cv.provenance["diff"]
    ok = judged > 0 and missed == 0 and cv_ok
    report(capsys, 4, "NEQ sensitivity", ok,
           f"{judged - missed}/{judged} mutated pairs non-equivalent at L1-L3; "
           f"unused ConstantValue 123->124 caught at L2: {cv_ok}")


def test_criterion_05_object_method_pair(capsys):
    left, right = F.object_method_pair()
    s = statuses(left, right, [DISASSEMBLED, NORMALIZED])
    ok = s["normalized"].status == "pass" and s["disassembled"].status == "fail"
    report(capsys, 5, "interface getClass vs Object.getClass", ok,
           f"L2 {s['disassembled'].status}, L3 {s['normalized'].status}")


def test_criterion_06_string_concat_pair(capsys):
    old, new = F.concat_pair()
    s = statuses(old, new, [DISASSEMBLED, NORMALIZED])
    ok = s["normalized"].status == "pass"
    report(capsys, 6, "StringBuilder chain vs makeConcatWithConstants", ok,
           f"L2 {s['disassembled'].status}, L3 {s['normalized'].status}")


def test_criterion_07_tlsh(capsys, corpus, corpus_bytes):
    with open(VECTORS) as fh:
        doc = json.load(fh)
    digests = [v for v in doc["vectors"] if v["digest"] is not None]
    digest_ok = sum(tlsh_hash(base64.b64decode(v["data"])).hex == v["digest"] for v in digests)
    dist_ok = sum(
        tlsh_distance(tlsh_hash(base64.b64decode(p["a"])), tlsh_hash(base64.b64decode(p["b"])))
        == p["distance"] for p in doc["pairs"])

    rng = random.Random(7)
    hashes = {}
    law_failures = 0
    for _ in range(1000):
        (na, a), (nb, b) = rng.sample(corpus, 2)
        ha = hashes.get(na) or hashes.setdefault(na, tlsh_hash(a))
        hb = hashes.get(nb) or hashes.setdefault(nb, tlsh_hash(b))
        if tlsh_distance(ha, ha) != 0 or tlsh_distance(ha, hb) != tlsh_distance(hb, ha):
            law_failures += 1

    cf = parse_class(corpus_bytes[WITNESS_CLASS])
    wa = tlsh_hash(corpus_bytes[WITNESS_CLASS])
    wb = tlsh_hash(serialize_class(reorder_members(cf, 3)))
    wc = tlsh_hash(serialize_class(reorder_members(cf, 1)))
    w = (tlsh_distance(wa, wb), tlsh_distance(wb, wc), tlsh_distance(wa, wc))
    witness = w[0] <= 10 and w[1] <= 10 and w[2] > 10

    ok = (len(digests) >= 20 and digest_ok == len(digests) and dist_ok == len(doc["pairs"])
          and law_failures == 0 and witness)
    report(capsys, 7, "TLSH oracle equality", ok,
           f"digests {digest_ok}/{len(digests)}, distances {dist_ok}/{len(doc['pairs'])}, "
           f"laws failed on {law_failures}/1000 pairs, witness distances {w}")


def test_criterion_08_relation_laws(capsys, corpus):
    sample = []
    for i, (_, data) in enumerate(corpus[100:110]):
        cf = parse_class(data)
        sample += [data, serialize_class(permute_pool(cf, i + 1)),
                   serialize_class(strip_debug_attrs(reorder_members(cf, i + 1)))]
    lines = []
    ok = len(sample) == 30
    triples = 0
    for rel in (BITWISE, DISASSEMBLED, NORMALIZED, TLSH10, TLSH100):
        r = relation_properties_check(rel, sample)
        triples = r.triples
        bad = len(r.reflexivity_violations) + len(r.symmetry_violations)
        if rel.transitive:
            bad += len(r.transitivity_violations)
        ok = ok and bad == 0
        lines.append(f"{rel.key}={bad}")
    report(capsys, 8, "relation laws", ok,
           f"{len(sample)} classes, {triples} triples; violations " + ", ".join(lines))


def test_criterion_09_evaluation_sanity(capsys, oracle_pairs):
    eq = [p for p in oracle_pairs if p.label == EQ][:200]
    neq = [p for p in oracle_pairs if p.label == NEQ][:200]
    r = evaluate([BITWISE, DISASSEMBLED], eq + neq)
    eq_subsets = [s for s in r.subsets if s.startswith("EQ")]
    b_eq, b_neq = r.fraction("bitwise", "EQ"), r.fraction("bitwise", "NEQ")
    d_eq = min(r.fraction("disassembled", s) for s in eq_subsets)
    d_neq = r.fraction("disassembled", "NEQ")
    ok = (len(eq) == 200 and len(neq) == 200 and b_eq == 0.0 and b_neq == 1.0
          and d_eq == 1.0 and d_neq >= 0.99)
    report(capsys, 9, "evaluation harness", ok,
           f"{len(eq)} EQ + {len(neq)} NEQ; bitwise EQ {b_eq:.2f} NEQ {b_neq:.2f}; "
           f"disassembled EQ subsets min {d_eq:.2f} NEQ {d_neq:.4f}")


def test_criterion_10_repo_ingest(capsys, tmp_path, maven_server):
    import io
    import zipfile

    versions = ["1.0-redhat-1", "1.1.redhat-00001", "1.0.redhat-00002"]
    maven_server.put("org/example/lib/maven-metadata.xml", (
        "<metadata><versioning><versions>"
        + "".join(f"<version>{v}</version>" for v in versions)
        + "</versions></versioning></metadata>").encode())
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as z:
        z.writestr("A.class", F.minimal_class())
    body = buf.getvalue()
    for v in versions:
        base = f"org/example/lib/{v}/lib-{v}.jar"
        maven_server.put(base, body)
        maven_server.put(base + ".md5", hashlib.md5(body).hexdigest().encode())
    maven_server.put("org/example/lib/1.1.redhat-00001/lib-1.1.redhat-00001.jar.md5", b"ffffffffffffffffffffffffffffffff\n")

    repo = RepoSpec("fixture", maven_server.url)
    client = RepoClient(cache_root=str(tmp_path), backoff=0.01)
    order_ok = client.fetch_versions(repo, "org.example", "lib") == versions
    rh1 = select_version(versions, "1.0", "first")
    rh2 = select_version(versions, "1.0", "last")
    select_ok = (rh1, rh2) == ("1.0-redhat-1", "1.0.redhat-00002")
    try:
        client.fetch_artifact(repo, Coordinates("org.example", "lib", "1.1.redhat-00001"))
        mismatch_ok = False
    except ChecksumMismatch:
        mismatch_ok = True
    c = Coordinates("org.example", "lib", rh2)
    client.fetch_artifact(repo, c)
    before = len(maven_server.requests)
    again = RepoClient(cache_root=str(tmp_path)).fetch_artifact(repo, c)
    cache_ok = len(maven_server.requests) == before and again.from_cache
    ok = order_ok and select_ok and mismatch_ok and cache_ok
    report(capsys, 10, "repo ingest", ok,
           f"order {order_ok}, first/last {rh1}/{rh2}, ChecksumMismatch {mismatch_ok}, "
           f"second fetch requests {len(maven_server.requests) - before}")


def test_criterion_11_performance(capsys, tmp_path, corpus):
    from bineq.engine import _digest, _texts

    classes = corpus[:1000]
    permuted = [(n, serialize_class(permute_pool(parse_class(d), derive_seed(11, i))))
                for i, (n, d) in enumerate(classes)]
    left, right = tmp_path / "left.jar", tmp_path / "right.jar"
    write_archive(left, classes)
    write_archive(right, permuted)
    _texts.cache_clear()
    _digest.cache_clear()
    jobs = default_jobs()
    start = time.perf_counter()
    r = compare_jars(left, right, [BITWISE, DISASSEMBLED, NORMALIZED], jobs=jobs)
    elapsed = time.perf_counter() - start
    ok = elapsed < 10.0 and len(r.class_verdicts) == 1000 and r.aggregate == 2
    report(capsys, 11, "performance", ok,
           f"1000 vs 1000 classes at L1-L3 in {elapsed:.2f} s on {jobs} CPU(s) (limit 10 s), "
           f"aggregate {r.aggregate}")
