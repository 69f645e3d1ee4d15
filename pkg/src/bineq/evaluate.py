"""Relation correctness over labeled oracle pairs.

An EQ pair is classified correctly when the relation passes, a NEQ pair
when it fails.  An evaluation error counts as a non-equivalence verdict
(so correct for NEQ, incorrect for EQ) and is also tallied on its own.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .engine import DEFAULT_RELATIONS, ERROR, PASS, run_tasks
from .testkit import EQ, NEQ, OraclePair

ERROR_POLICY = ("errors count as non-equivalent: correct for NEQ pairs, incorrect for EQ "
                "pairs; the error column counts them separately")


@dataclass
class Cell:
    correct: int = 0    # decided without error, matching the label
    incorrect: int = 0  # decided without error, contradicting the label
    error: int = 0

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.error

    def fraction(self, label: str) -> float:
        if not self.total:
            return 0.0
        good = self.correct + (self.error if label == NEQ else 0)
        return good / self.total


@dataclass
class CorrectnessReport:
    relations: list[str]
    subsets: list[str]
    cells: dict[tuple[str, str], Cell] = field(default_factory=dict)
    policy: str = ERROR_POLICY

    @staticmethod
    def label_of(subset: str) -> str:
        return subset.split("/", 1)[0]

    def fraction(self, relation: str, subset: str) -> float:
        return self.cells[relation, subset].fraction(self.label_of(subset))

    def to_json(self) -> dict:
        rows = []
        for subset in self.subsets:
            for rel in self.relations:
                c = self.cells[rel, subset]
                rows.append({
                    "relation": rel, "subset": subset, "total": c.total,
                    "correct": c.correct, "incorrect": c.incorrect, "error": c.error,
                    "fraction": round(c.fraction(self.label_of(subset)), 6),
                })
        return {"relations": self.relations, "subsets": self.subsets,
                "error_policy": self.policy, "cells": rows}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def table(self) -> str:
        """Aligned text table: one row per subset, one column per relation."""
        header = ["subset", "n"] + self.relations
        rows = [header]
        for subset in self.subsets:
            n = self.cells[self.relations[0], subset].total
            row = [subset, str(n)]
            for rel in self.relations:
                c = self.cells[rel, subset]
                cell = f"{c.fraction(self.label_of(subset)):.4f}"
                row.append(cell + (f" ({c.error} err)" if c.error else ""))
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = []
        for k, row in enumerate(rows):
            cells = [row[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def subsets_of(pair: OraclePair) -> list[str]:
    out = [pair.label, f"{pair.label}/{pair.mutation}"]
    if pair.compiler:
        out.append(f"{pair.label}/compiler={pair.compiler}")
    return out


def evaluate(relations, oracles, jobs: int | None = 1) -> CorrectnessReport:
    """Score each relation on every oracle subset (label, label/mutation)."""
    relations = sorted(set(relations or DEFAULT_RELATIONS), key=lambda r: (r.level, r.threshold or 0))
    oracles = list(oracles)
    if not oracles:
        raise ValueError("no oracle pairs to evaluate")
    tasks = [(p.left, p.right, tuple(relations), p.left_path or f"pair{i}", 0)
             for i, p in enumerate(oracles)]
    verdicts = run_tasks(tasks, jobs)
    counts: Counter = Counter()
    subsets: set[str] = set()
    for pair, verdict in zip(oracles, verdicts):
        names = subsets_of(pair)
        subsets.update(names)
        for rel in relations:
            status = verdict.outcomes[rel.key].status
            if status == ERROR:
                kind = "error"
            elif (status == PASS) == (pair.label == EQ):
                kind = "correct"
            else:
                kind = "incorrect"
            for s in names:
                counts[rel.key, s, kind] += 1
    order = sorted(subsets, key=lambda s: (s.split("/")[0] != EQ, "/" in s, s))
    report = CorrectnessReport([r.key for r in relations], order)
    for rel in relations:
        for s in order:
            report.cells[rel.key, s] = Cell(counts[rel.key, s, "correct"],
                                            counts[rel.key, s, "incorrect"],
                                            counts[rel.key, s, "error"])
    return report
