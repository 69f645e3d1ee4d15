"""Equivalence relations, per-class verdicts and whole-jar comparison."""

from __future__ import annotations

import difflib
import fnmatch
import itertools
import json
import os
import re
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

from .archive import Archive, read_archive
from .classfile import parse_class
from .errors import BineqError
from .level2 import canonical_model, text_of
from .level3 import normalize_model, render_level3
from .tlsh import tlsh_distance, tlsh_hash

REPORT_VERSION = "bineq-report/1"
PASS, FAIL, ERROR = "pass", "fail", "error"


@dataclass(frozen=True)
class Relation:
    id: str
    level: int
    transitive: bool
    threshold: int | None = None

    @property
    def key(self) -> str:
        return f"{self.id}{self.threshold}" if self.threshold is not None else self.id

    @property
    def in_chain(self) -> bool:
        return self.level <= 3


BITWISE = Relation("bitwise", 1, True)
DISASSEMBLED = Relation("disassembled", 2, True)
NORMALIZED = Relation("normalized", 3, True)


def tlsh_relation(threshold: int) -> Relation:
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return Relation("tlsh", 4, False, threshold)


TLSH10 = tlsh_relation(10)
TLSH100 = tlsh_relation(100)
DEFAULT_RELATIONS = (BITWISE, DISASSEMBLED, NORMALIZED, TLSH10, TLSH100)


def relation_by_key(key: str) -> Relation:
    """Look up ``bitwise``, ``disassembled``, ``normalized`` or ``tlshN``."""
    for r in (BITWISE, DISASSEMBLED, NORMALIZED):
        if key in (r.id, str(r.level)):
            return r
    m = re.fullmatch(r"tlsh(\d+)", key)
    if m:
        return tlsh_relation(int(m.group(1)))
    raise ValueError(f"unknown relation {key!r}")


@dataclass(frozen=True)
class Outcome:
    status: str
    provenance: dict | None = None
    message: str | None = None

    def to_json(self) -> dict:
        out: dict = {"status": self.status}
        if self.provenance is not None:
            out["provenance"] = self.provenance
        if self.message is not None:
            out["message"] = self.message
        return out


@dataclass(frozen=True)
class ClassVerdict:
    path: str
    outcomes: dict[str, Outcome]
    strongest_level: int | None
    occurrence: int = 0

    @property
    def equivalent(self) -> bool:
        return self.strongest_level is not None

    def to_json(self) -> dict:
        out = OrderedDict(path=self.path)
        if self.occurrence:
            out["occurrence"] = self.occurrence
        out["outcomes"] = {k: v.to_json() for k, v in self.outcomes.items()}
        out["strongest_level"] = self.strongest_level
        return out


# ---------------------------------------------------------------- per class


@lru_cache(maxsize=512)
def _texts(data: bytes, level: int) -> tuple[str, ...]:
    model = canonical_model(parse_class(data))
    if level == 2:
        return text_of(model, 2).lines
    return render_level3(normalize_model(model)).lines


@lru_cache(maxsize=512)
def _digest(data: bytes):
    return tlsh_hash(data)


def first_difference(a: bytes, b: bytes) -> int | None:
    if a == b:
        return None
    n = min(len(a), len(b))
    lo, hi = 0, n
    # binary search on prefix equality keeps this fast for large inputs
    while lo < hi:
        mid = (lo + hi) // 2
        if a[lo:mid + 1] == b[lo:mid + 1]:
            lo = mid + 1
        else:
            hi = mid
    return lo


def unified_diff(left: tuple[str, ...], right: tuple[str, ...], path: str) -> str:
    return "\n".join(difflib.unified_diff(
        list(left), list(right), f"a/{path}", f"b/{path}", n=3, lineterm=""))


def _evaluate(rel: Relation, b1: bytes, b2: bytes, path: str) -> Outcome:
    try:
        if rel.level == 1:
            off = first_difference(b1, b2)
            if off is None:
                return Outcome(PASS)
            return Outcome(FAIL, {"first_difference": off,
                                  "left_size": len(b1), "right_size": len(b2)})
        if rel.level in (2, 3):
            t1, t2 = _texts(b1, rel.level), _texts(b2, rel.level)
            if t1 == t2:
                return Outcome(PASS)
            return Outcome(FAIL, {"diff": unified_diff(t1, t2, path)})
        d = tlsh_distance(_digest(b1), _digest(b2))
        prov = {"distance": d, "threshold": rel.threshold}
        return Outcome(PASS if d <= rel.threshold else FAIL, prov)
    except BineqError as exc:
        return Outcome(ERROR, message=f"{type(exc).__name__}: {exc}")
    except (RecursionError, MemoryError) as exc:
        return Outcome(ERROR, message=f"{type(exc).__name__}: {exc}")


def strongest_level(outcomes: dict[str, Outcome], relations) -> int | None:
    """Lowest passing chain level; None when non-equivalent.

    If no chain relation was requested, a passing similarity relation
    yields level 4.
    """
    if any(o.status == ERROR for o in outcomes.values()):
        return None
    chain = [r for r in relations if r.in_chain]
    pool = chain or list(relations)
    levels = [r.level for r in pool if outcomes[r.key].status == PASS]
    return min(levels) if levels else None


def compare_class_pair(b1: bytes, b2: bytes, relations=DEFAULT_RELATIONS,
                       path: str = "", short_circuit: bool = True,
                       occurrence: int = 0) -> ClassVerdict:
    """Evaluate ``relations`` on one pair of class files.

    With ``short_circuit`` a pass at a chain level is propagated to every
    weaker chain level, and a bitwise pass also settles the similarity
    relations (distance 0).
    """
    relations = sorted(set(relations), key=lambda r: (r.level, r.threshold or 0))
    if not relations:
        raise ValueError("no relations requested")
    outcomes: dict[str, Outcome] = {}
    passed_level = None
    for rel in relations:
        if short_circuit and passed_level is not None and (
                (rel.in_chain and rel.level > passed_level) or (not rel.in_chain and passed_level == 1)):
            if rel.in_chain:
                outcomes[rel.key] = Outcome(PASS, {"implied_by": passed_level})
            else:
                outcomes[rel.key] = Outcome(PASS, {"distance": 0, "threshold": rel.threshold,
                                                   "implied_by": 1})
            continue
        o = _evaluate(rel, b1, b2, path)
        outcomes[rel.key] = o
        if rel.in_chain and o.status == PASS and passed_level is None:
            passed_level = rel.level
    return ClassVerdict(path, outcomes, strongest_level(outcomes, relations), occurrence)


# ---------------------------------------------------------------- jars


@dataclass(frozen=True)
class EntryFilter:
    ignore_synthetic_classes: bool = False
    ignore_multirelease: bool = False
    ignore_package_info: bool = False
    excludes: tuple[str, ...] = ()

    def excluded(self, path: str) -> bool:
        base = path.rsplit("/", 1)[-1]
        if self.ignore_synthetic_classes and path.endswith(".class") and "$" in base:
            return True
        if self.ignore_multirelease and path.startswith("META-INF/versions/"):
            return True
        if self.ignore_package_info and base == "package-info.class":
            return True
        return any(fnmatch.fnmatchcase(path, g) for g in self.excludes)

    def to_json(self) -> dict:
        return OrderedDict(
            ignore_synthetic_classes=self.ignore_synthetic_classes,
            ignore_multirelease=self.ignore_multirelease,
            ignore_package_info=self.ignore_package_info,
            excludes=list(self.excludes),
        )


NON_EQUIVALENT = "non-equivalent"


@dataclass
class JarComparisonReport:
    left: dict
    right: dict
    relations: list[str]
    missing_in_left: list[str]
    missing_in_right: list[str]
    class_verdicts: list[ClassVerdict]
    resource_mismatches: list[str]
    duplicates: list[str]
    filters_applied: EntryFilter
    aggregate: int | str = field(default=NON_EQUIVALENT)

    @property
    def equivalent(self) -> bool:
        return self.aggregate != NON_EQUIVALENT

    def to_json(self) -> dict:
        return OrderedDict(
            version=REPORT_VERSION,
            left=self.left,
            right=self.right,
            relations=self.relations,
            aggregate=self.aggregate,
            missing_in_left=self.missing_in_left,
            missing_in_right=self.missing_in_right,
            resource_mismatches=self.resource_mismatches,
            duplicates=self.duplicates,
            filters_applied=self.filters_applied.to_json(),
            class_verdicts=[v.to_json() for v in self.class_verdicts],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"


def _compare_task(args):
    b1, b2, relations, path, occurrence = args
    return compare_class_pair(b1, b2, relations, path, occurrence=occurrence)


def aggregate_level(verdicts, missing: bool) -> int | str:
    """Weakest per-class level; non-equivalent if any class or entry fails."""
    if missing or any(v.strongest_level is None for v in verdicts):
        return NON_EQUIVALENT
    return max((v.strongest_level for v in verdicts), default=1)


def compare_archives(a: Archive, b: Archive, relations=DEFAULT_RELATIONS,
                     filters: EntryFilter | None = None, jobs: int | None = 1) -> JarComparisonReport:
    filters = filters or EntryFilter()
    relations = tuple(relations)
    left, right = a.by_path(), b.by_path()
    missing_in_right, missing_in_left = [], []
    tasks = []
    resource_mismatches = []
    for path in sorted(set(left) | set(right)):
        ls, rs = left.get(path, []), right.get(path, [])
        for k in range(max(len(ls), len(rs))):
            if k >= len(rs):
                if not filters.excluded(path):
                    missing_in_right.append(path)
                continue
            if k >= len(ls):
                if not filters.excluded(path):
                    missing_in_left.append(path)
                continue
            if path.endswith(".class"):
                tasks.append((ls[k].data, rs[k].data, relations, path, k))
            elif ls[k].data != rs[k].data:
                resource_mismatches.append(path)
    verdicts = run_tasks(tasks, jobs)
    report = JarComparisonReport(
        left={"path": a.path, "sha256": a.sha256},
        right={"path": b.path, "sha256": b.sha256},
        relations=[r.key for r in sorted(set(relations), key=lambda r: (r.level, r.threshold or 0))],
        missing_in_left=missing_in_left,
        missing_in_right=missing_in_right,
        class_verdicts=verdicts,
        resource_mismatches=resource_mismatches,
        duplicates=sorted(set(a.duplicates) | set(b.duplicates)),
        filters_applied=filters,
    )
    report.aggregate = aggregate_level(verdicts, bool(missing_in_left or missing_in_right))
    return report


def default_jobs() -> int:
    return os.cpu_count() or 1


def run_tasks(tasks, jobs: int | None):
    jobs = default_jobs() if jobs is None else max(1, jobs)
    if jobs == 1 or len(tasks) < 2 * jobs:
        return [_compare_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(tasks) // (jobs * 8))
        return list(pool.map(_compare_task, tasks, chunksize=chunk))


def compare_jars(jar1, jar2, relations=DEFAULT_RELATIONS, filters: EntryFilter | None = None,
                 jobs: int | None = 1) -> JarComparisonReport:
    """Compare two jar files entry by entry."""
    return compare_archives(read_archive(jar1), read_archive(jar2), relations, filters, jobs)


# ---------------------------------------------------------------- versions


def canonicalize_version(v: str, tags=("redhat",)) -> str:
    """Strip a provider sub-patch suffix such as ``.redhat-00001``."""
    alt = "|".join(re.escape(t) for t in tags)
    m = re.fullmatch(rf"(.+?)[-.](?:{alt})-\d+", v)
    return m.group(1) if m else v


# ---------------------------------------------------------------- laws


@dataclass
class PropertyReport:
    relation: str
    pairs: int
    triples: int
    reflexivity_violations: list = field(default_factory=list)
    symmetry_violations: list = field(default_factory=list)
    transitivity_violations: list = field(default_factory=list)
    transitivity_asserted: bool = True

    @property
    def holds(self) -> bool:
        trans = not self.transitivity_violations or not self.transitivity_asserted
        return not self.reflexivity_violations and not self.symmetry_violations and trans


def relation_holds(rel: Relation, b1: bytes, b2: bytes) -> bool:
    return _evaluate(rel, b1, b2, "").status == PASS


def relation_properties_check(relation: Relation, sample) -> PropertyReport:
    """Check reflexivity, symmetry and (for chain levels) transitivity.

    ``sample`` is a list of raw class files.  For similarity relations
    transitivity violations are reported but not counted against
    :attr:`PropertyReport.holds`.
    """
    sample = list(sample)
    if not sample:
        raise ValueError("empty sample")
    n = len(sample)
    rel = {}
    for i in range(n):
        for j in range(n):
            rel[i, j] = relation_holds(relation, sample[i], sample[j])
    report = PropertyReport(relation.key, n * n, 0, transitivity_asserted=relation.transitive)
    for i in range(n):
        if not rel[i, i]:
            report.reflexivity_violations.append(i)
        for j in range(i + 1, n):
            if rel[i, j] != rel[j, i]:
                report.symmetry_violations.append((i, j))
    for triple in itertools.combinations(range(n), 3):
        report.triples += 1
        for i, j, k in itertools.permutations(triple):
            if rel[i, j] and rel[j, k] and not rel[i, k]:
                report.transitivity_violations.append((i, j, k))
    return report
