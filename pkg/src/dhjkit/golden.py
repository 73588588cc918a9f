"""Golden-record regression files.

A record pins selected output fields of one CLI job:

    {"job_id": ..., "command": ..., "params": {...}, "param_hash": ...,
     "provenance": "self-generated" | "closed-form", "note": ...,
     "expected": {"dotted.field": {"value": v, "abs_tol": a, "rel_tol": r}}}

Self-generated records hold values produced by this package and may be
refreshed with ``--update``; closed-form records hold values computed from
an explicit formula and are never rewritten.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

PROVENANCES = ("self-generated", "closed-form")


def param_hash(command: str, params: dict) -> str:
    blob = json.dumps({"command": command, "params": params}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class GoldenRecord:
    job_id: str
    command: str
    params: dict
    provenance: str
    note: str
    expected: dict[str, dict[str, Any]]
    param_hash: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        if not self.note:
            raise ValueError("golden records need a provenance note")
        if not self.param_hash:
            self.param_hash = param_hash(self.command, self.params)
        elif self.param_hash != param_hash(self.command, self.params):
            raise ValueError(f"{self.job_id}: parameter hash does not match params")

    @classmethod
    def load(cls, path: Path) -> "GoldenRecord":
        return cls(**json.loads(path.read_text()))

    def as_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "command": self.command,
            "params": self.params,
            "param_hash": self.param_hash,
            "provenance": self.provenance,
            "note": self.note,
            "expected": self.expected,
        }

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.as_dict(), indent=2) + "\n")


def lookup(payload: Any, dotted: str) -> Any:
    cur = payload
    for part in dotted.split("."):
        cur = cur[int(part)] if isinstance(cur, list) else cur[part]
    return cur


def _matches(actual, spec) -> bool:
    want = spec["value"]
    if isinstance(want, (int, float)) and not isinstance(want, bool):
        if not isinstance(actual, (int, float)) or not math.isfinite(float(actual)):
            return False
        tol = max(spec.get("abs_tol", 0.0), spec.get("rel_tol", 0.0) * abs(want))
        return abs(float(actual) - float(want)) <= tol
    return actual == want


def run_record(rec: GoldenRecord) -> tuple[dict, list[str]]:
    from dhjkit.cli import JOBS

    payload = JOBS[rec.command](dict(rec.params)).payload
    problems = []
    for key, spec in rec.expected.items():
        try:
            actual = lookup(payload, key)
        except (KeyError, IndexError, TypeError):
            problems.append(f"{key}: missing")
            continue
        if not _matches(actual, spec):
            problems.append(f"{key}: expected {spec['value']!r}, got {actual!r}")
    return payload, problems


def run_golden(directory: Path, update: bool = False) -> int:
    files = sorted(directory.glob("*.json"))
    if not files:
        print(f"no golden records in {directory}", file=sys.stderr)
        return 1
    failed = 0
    for path in files:
        rec = GoldenRecord.load(path)
        payload, problems = run_record(rec)
        if problems and update and rec.provenance == "self-generated":
            for key in rec.expected:
                rec.expected[key]["value"] = lookup(payload, key)
            rec.save(path)
            print(f"updated {rec.job_id}")
            continue
        status = "ok" if not problems else "FAIL"
        print(f"{status:4s} {rec.job_id} [{rec.provenance}]")
        for msg in problems:
            print(f"     {msg}")
        failed += bool(problems)
    return 3 if failed else 0
