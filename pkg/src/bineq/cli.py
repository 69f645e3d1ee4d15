"""Command-line interface.

Exit codes: 0 equivalent or success, 1 non-equivalent, 2 operational
error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .classfile import parse_class
from .engine import (
    BITWISE, DISASSEMBLED, NORMALIZED, REPORT_VERSION, EntryFilter, compare_class_pair,
    compare_jars, default_jobs, relation_by_key, tlsh_relation,
)
from .errors import BineqError

EXIT_OK, EXIT_DIFFERENT, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 64
DEFAULT_TAUS = (10, 100)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_relations(names: str | None, taus) -> list:
    """Relations from a comma list; ``tlsh`` expands to one relation per tau."""
    taus = list(taus or DEFAULT_TAUS)
    if not names:
        return [BITWISE, DISASSEMBLED, NORMALIZED, *(tlsh_relation(t) for t in taus)]
    out = []
    for name in names.split(","):
        name = name.strip()
        if name == "tlsh":
            out.extend(tlsh_relation(t) for t in taus)
            continue
        try:
            out.append(relation_by_key(name))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    return out


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _emit_json(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def _outcome_line(key: str, o) -> str:
    line = f"  {key:<14} {o.status}"
    prov = o.provenance or {}
    if "first_difference" in prov:
        line += f" (first difference at byte {prov['first_difference']})"
    elif "distance" in prov:
        line += f" (distance {prov['distance']}, threshold {prov['threshold']})"
    elif "implied_by" in prov:
        line += f" (implied by level {prov['implied_by']})"
    if o.message:
        line += f": {o.message}"
    return line


def _print_verdict(v) -> None:
    level = v.strongest_level
    print(f"{v.path}: " + (f"equivalent at level {level}" if level else "non-equivalent"))
    for key, o in v.outcomes.items():
        print(_outcome_line(key, o))
    for key, o in v.outcomes.items():
        diff = (o.provenance or {}).get("diff")
        if diff:
            print(f"--- {key} diff")
            print(diff)


# ---------------------------------------------------------------- commands


def cmd_compare_classes(args) -> int:
    relations = parse_relations(args.relations, args.tau)
    v = compare_class_pair(_read(args.left), _read(args.right), relations,
                           path=os.path.basename(args.right))
    if args.format == "structured":
        _emit_json({"version": REPORT_VERSION, "left": args.left, "right": args.right,
                    "relations": list(v.outcomes), "verdict": v.to_json()})
    else:
        _print_verdict(v)
    return EXIT_OK if v.equivalent else EXIT_DIFFERENT


def cmd_compare_jars(args) -> int:
    relations = parse_relations(args.relations, args.tau)
    filters = EntryFilter(args.ignore_synthetic, args.ignore_multirelease,
                          args.ignore_package_info, tuple(args.exclude or ()))
    report = compare_jars(args.left, args.right, relations, filters, jobs=args.jobs)
    if args.format == "structured":
        sys.stdout.write(report.dumps())
    else:
        agg = report.aggregate
        print(f"aggregate: {agg if agg == 'non-equivalent' else f'level {agg}'}")
        print(f"classes compared: {len(report.class_verdicts)}")
        for name, items in (("missing in left", report.missing_in_left),
                            ("missing in right", report.missing_in_right),
                            ("resource mismatches", report.resource_mismatches),
                            ("duplicate entries", report.duplicates)):
            if items:
                print(f"{name}: {len(items)}")
                for p in items:
                    print(f"  {p}")
        for v in report.class_verdicts:
            if not v.equivalent:
                _print_verdict(v)
    return EXIT_OK if report.equivalent else EXIT_DIFFERENT


def cmd_render(args) -> int:
    from .level2 import render_level2
    from .level3 import normalize, render_level3

    cf = parse_class(_read(args.path))
    text = render_level2(cf) if args.level == 2 else render_level3(normalize(cf))
    sys.stdout.write(text.text)
    return EXIT_OK


def cmd_hash(args) -> int:
    from .tlsh import tlsh_hash

    digest = tlsh_hash(_read(args.path))
    if args.format == "structured":
        _emit_json({"path": args.path, "tlsh": digest.hex})
    else:
        print(digest.hex)
    return EXIT_OK


def cmd_fetch(args) -> int:
    from .repo import Coordinates, RepoClient, RepoSpec, select_version

    repo = RepoSpec(args.repo_id, args.repo) if args.repo_id else RepoSpec.from_url(args.repo)
    try:
        coords = Coordinates.parse(args.gav, args.classifier)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    client = RepoClient(cache_root=args.cache)
    if args.strategy:
        versions = client.fetch_versions(repo, coords.group, coords.artifact)
        version = select_version(versions, coords.version, args.strategy)
        coords = Coordinates(coords.group, coords.artifact, version, coords.classifier)
    handle = client.fetch_artifact(repo, coords)
    if args.format == "structured":
        _emit_json({"coordinates": str(coords), "repo": repo.id, "path": handle.path,
                    "checksum": handle.checksum, "warning": handle.warning,
                    "from_cache": handle.from_cache})
    else:
        if handle.warning:
            print(f"warning: {handle.warning}", file=sys.stderr)
        print(handle.path)
    return EXIT_OK


def _is_archive(path: str) -> bool:
    return path.lower().endswith((".jar", ".zip"))


def cmd_source_equiv(args) -> int:
    from .source import compare_source_jars, source_equiv_files

    if _is_archive(args.left) and _is_archive(args.right):
        report = compare_source_jars(args.left, args.right)
        if args.format == "structured":
            _emit_json(report.to_json())
        else:
            print("equivalent" if report.equivalent else "non-equivalent")
            for p in report.only_left:
                print(f"  only in left: {p}")
            for p in report.only_right:
                print(f"  only in right: {p}")
            for p, v in sorted(report.entries.items()):
                if not v.equivalent or v.warning:
                    print(f"  {p}: {'equivalent' if v.equivalent else 'differs'}"
                          + (f" {json.dumps(v.provenance)}" if v.provenance else "")
                          + (f" [warning: {v.warning}]" if v.warning else ""))
        return EXIT_OK if report.equivalent else EXIT_DIFFERENT
    v = source_equiv_files(args.left, args.right)
    if args.format == "structured":
        _emit_json({"left": args.left, "right": args.right, **v.to_json()})
    else:
        print("equivalent" if v.equivalent else "non-equivalent")
        if v.provenance:
            print(f"  {json.dumps(v.provenance, ensure_ascii=False)}")
        if v.warning:
            print(f"warning: {v.warning}", file=sys.stderr)
    return EXIT_OK if v.equivalent else EXIT_DIFFERENT


def load_corpus(directory: str) -> list[tuple[str, bytes]]:
    """Class files under ``directory``, including those inside jars, sorted by name."""
    from .archive import read_archive

    out = []
    for root, dirs, files in os.walk(directory):
        dirs.sort()
        for name in sorted(files):
            path = os.path.join(root, name)
            rel = os.path.relpath(path, directory)
            if name.endswith(".class"):
                out.append((rel, _read(path)))
            elif _is_archive(name):
                out.extend((f"{rel}!/{e.path}", e.data) for e in read_archive(path).entries
                           if e.path.endswith(".class"))
    return out


def cmd_gen_oracles(args) -> int:
    from .testkit import generate_oracle_set, write_oracle_set

    corpus = load_corpus(args.corpus)
    if not corpus:
        raise UsageError(f"no class files found under {args.corpus}")
    pairs = generate_oracle_set(corpus, args.count, args.seed)
    path = write_oracle_set(pairs, args.out)
    eq = sum(p.label == "EQ" for p in pairs)
    print(f"{path}: {eq} EQ and {len(pairs) - eq} NEQ pairs from {len(corpus)} classes")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluate import evaluate
    from .testkit import load_manifest

    report = evaluate(parse_relations(args.relations, args.tau), load_manifest(args.manifest),
                      jobs=args.jobs)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.dumps())
    if args.format == "structured":
        sys.stdout.write(report.dumps())
    else:
        sys.stdout.write(report.table())
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> Parser:
    p = Parser(prog="bineq", description="Binary equivalence checks for JVM class files and jars.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    fmt = Parser(add_help=False)
    fmt.add_argument("--format", choices=("text", "structured"), default="text",
                     help="text for humans, structured for a JSON document (default: text)")

    rel = Parser(add_help=False)
    rel.add_argument("--relations", metavar="LIST",
                     help="comma list of bitwise, disassembled, normalized, tlsh (default: all)")
    rel.add_argument("--tau", type=int, action="append", metavar="N",
                     help="tlsh threshold; repeatable (default: 10 and 100)")

    jobs = Parser(add_help=False)
    jobs.add_argument("--jobs", type=int, default=default_jobs(), metavar="N",
                      help="parallel comparisons (default: CPU count)")

    s = sub.add_parser("compare-classes", parents=[fmt, rel], help="compare two class files")
    s.add_argument("left")
    s.add_argument("right")
    s.set_defaults(func=cmd_compare_classes)

    s = sub.add_parser("compare-jars", parents=[fmt, rel, jobs], help="compare two jars")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--ignore-synthetic", action="store_true",
                   help="ignore missing classes whose names contain '$'")
    s.add_argument("--ignore-multirelease", action="store_true",
                   help="ignore missing entries under META-INF/versions/")
    s.add_argument("--ignore-package-info", action="store_true",
                   help="ignore missing package-info.class entries")
    s.add_argument("--exclude", action="append", metavar="GLOB",
                   help="ignore missing entries matching GLOB; repeatable")
    s.set_defaults(func=cmd_compare_jars)

    s = sub.add_parser("render", help="print the canonical text of a class file")
    s.add_argument("--level", type=int, choices=(2, 3), default=2)
    s.add_argument("path")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("hash", parents=[fmt], help="print the TLSH digest of a file")
    s.add_argument("path")
    s.set_defaults(func=cmd_hash)

    s = sub.add_parser("fetch", parents=[fmt], help="download an artifact into the cache")
    s.add_argument("--repo", required=True, metavar="URL")
    s.add_argument("--repo-id", metavar="ID", help="cache directory name for the repository")
    s.add_argument("--gav", required=True, metavar="G:A:V")
    s.add_argument("--classifier", help="for example: sources")
    s.add_argument("--strategy", choices=("first", "last"),
                   help="treat V as canonical and pick the first or last matching release")
    s.add_argument("--cache", metavar="DIR", help="cache root (default: $BINEQ_CACHE)")
    s.set_defaults(func=cmd_fetch)

    s = sub.add_parser("source-equiv", parents=[fmt], help="compare two source files or source jars")
    s.add_argument("left")
    s.add_argument("right")
    s.set_defaults(func=cmd_source_equiv)

    s = sub.add_parser("gen-oracles", help="generate labeled EQ/NEQ class pairs")
    s.add_argument("corpus", help="directory of class files or jars")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--count", type=int, default=1, help="pairs per label per class (default: 1)")
    s.set_defaults(func=cmd_gen_oracles)

    s = sub.add_parser("evaluate", parents=[fmt, rel, jobs], help="score relations on an oracle set")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", metavar="FILE", help="also write the JSON report here")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bineq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BineqError, OSError, ValueError) as exc:
        print(f"bineq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
