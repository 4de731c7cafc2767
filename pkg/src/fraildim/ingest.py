"""Deficit catalog loading, cohort CSV parsing and dichotomization.

The catalog is a JSON file declaring one entry per deficit::

    {"deficits": [{"id": "...", "description": "...", "kind": "...", "rule": {...}}]}

Kinds and their rules:

* ``binary``  - cell must already be 0/1; no rule.
* ``likert5`` - cell is one of the five labels Excellent / Very good / Good /
  Fair / Poor (case-insensitive); ``rule.deficit_responses`` lists the labels
  that count as a deficit.  Cells already coded 0/1 pass through unchanged.
* ``cutoff``  - cell is numeric; ``rule.threshold`` and
  ``rule.deficit_when`` ("below" or "above") state when the value is a
  deficit (strict inequality).

Cells equal to "", "NA" or "-1" are treated as missing everywhere.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import MissingColumnError, ParseError, SchemaError

MISSING_TOKENS = frozenset({"", "na", "-1"})
LIKERT5_LEVELS = ("excellent", "very good", "good", "fair", "poor")
KINDS = ("binary", "likert5", "cutoff")

DEFAULT_MIN_AGE = 65
DEFAULT_MAX_MISSING = 20
DEFAULT_OUTCOME_COL = "casp19"

OUTCOME_MAX = 57.0


def is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


@dataclass(frozen=True)
class DeficitEntry:
    id: str
    description: str
    kind: str
    rule: dict = field(default_factory=dict)

    def encode(self, cell: str) -> int | None:
        """Dichotomize one raw CSV cell to 0/1, or None when missing."""
        if is_missing(cell):
            return None
        if self.kind == "binary":
            return _parse_binary(cell, self.id)
        if self.kind == "likert5":
            text = cell.strip().lower()
            if text in ("0", "1"):
                return int(text)
            if text not in LIKERT5_LEVELS:
                raise ValueError(
                    f"deficit '{self.id}': unrecognized likert5 response {cell!r}"
                )
            return 1 if text in self.rule["_deficit_set"] else 0
        # cutoff
        try:
            value = float(cell)
        except ValueError:
            raise ValueError(
                f"deficit '{self.id}': non-numeric cutoff value {cell!r}"
            ) from None
        if self.rule["deficit_when"] == "below":
            return 1 if value < self.rule["threshold"] else 0
        return 1 if value > self.rule["threshold"] else 0


def _parse_binary(cell: str, name: str) -> int:
    text = cell.strip()
    if text in ("0", "1"):
        return int(text)
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"deficit '{name}': non-binary value {cell!r}") from None
    if value in (0.0, 1.0):
        return int(value)
    raise ValueError(f"deficit '{name}': non-binary value {cell!r}")


@dataclass(frozen=True)
class DeficitCatalog:
    entries: tuple[DeficitEntry, ...]

    @property
    def p(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def descriptions(self) -> list[str]:
        return [e.description for e in self.entries]


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    age: int
    sex: int  # 0 = male, 1 = female
    deficits: tuple[int | None, ...]
    outcome: float | None = None

    def n_missing(self) -> int:
        return sum(1 for d in self.deficits if d is None)


@dataclass
class ExclusionLog:
    under_age: int = 0
    excess_missing: int = 0
    malformed: int = 0

    @property
    def total(self) -> int:
        return self.under_age + self.excess_missing + self.malformed

    def as_dict(self) -> dict:
        return {
            "under_age": self.under_age,
            "excess_missing": self.excess_missing,
            "malformed": self.malformed,
        }


@dataclass
class Cohort:
    records: list[ParticipantRecord]
    catalog: DeficitCatalog
    exclusion_log: ExclusionLog = field(default_factory=ExclusionLog)

    @property
    def n(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def deficit_matrix(self) -> np.ndarray:
        """N x p float matrix of deficits with NaN marking missing cells."""
        m = np.full((len(self.records), self.catalog.p), np.nan)
        for i, rec in enumerate(self.records):
            for j, d in enumerate(rec.deficits):
                if d is not None:
                    m[i, j] = float(d)
        return m

    def ages(self) -> np.ndarray:
        return np.array([r.age for r in self.records], dtype=float)

    def sexes(self) -> np.ndarray:
        return np.array([r.sex for r in self.records], dtype=float)

    def outcomes(self) -> np.ndarray:
        """Outcome vector with NaN where absent."""
        return np.array(
            [np.nan if r.outcome is None else r.outcome for r in self.records]
        )


def load_catalog(path: str | Path) -> DeficitCatalog:
    """Load and validate a deficit catalog JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict) or "deficits" not in raw:
        raise ParseError(f"{path}: expected a top-level object with a 'deficits' list")
    items = raw["deficits"]
    if not isinstance(items, list):
        raise ParseError(f"{path}: 'deficits' must be a list")

    entries = []
    seen = set()
    for pos, item in enumerate(items):
        if not isinstance(item, dict) or "id" not in item or "kind" not in item:
            raise SchemaError(f"{path}: entry {pos} lacks 'id' or 'kind'")
        ident = str(item["id"])
        kind = str(item["kind"])
        if ident in seen:
            raise SchemaError(f"{path}: duplicate deficit id '{ident}'")
        seen.add(ident)
        if kind not in KINDS:
            raise SchemaError(f"{path}: deficit '{ident}' has unknown kind '{kind}'")
        rule = dict(item.get("rule") or {})
        if kind == "likert5":
            responses = rule.get("deficit_responses")
            if not responses:
                raise SchemaError(
                    f"{path}: likert5 deficit '{ident}' needs rule.deficit_responses"
                )
            lowered = {str(r).strip().lower() for r in responses}
            bad = lowered - set(LIKERT5_LEVELS)
            if bad:
                raise SchemaError(
                    f"{path}: deficit '{ident}' has non-likert responses {sorted(bad)}"
                )
            rule["_deficit_set"] = frozenset(lowered)
        elif kind == "cutoff":
            if "threshold" not in rule or rule.get("deficit_when") not in ("below", "above"):
                raise SchemaError(
                    f"{path}: cutoff deficit '{ident}' needs rule.threshold and "
                    "rule.deficit_when ('below' or 'above')"
                )
            rule["threshold"] = float(rule["threshold"])
        entries.append(
            DeficitEntry(ident, str(item.get("description", ident)), kind, rule)
        )

    if len(entries) < 2:
        raise SchemaError(f"{path}: a catalog needs at least 2 deficits, got {len(entries)}")
    return DeficitCatalog(tuple(entries))


def _parse_age(cell: str) -> int:
    value = float(cell)
    if value < 0 or value != int(value):
        raise ValueError(f"age must be a non-negative integer, got {cell!r}")
    return int(value)


def _parse_sex(cell: str) -> int:
    text = cell.strip()
    if text in ("0", "1"):
        return int(text)
    value = float(text)
    if value in (0.0, 1.0):
        return int(value)
    raise ValueError(f"sex must be 0 (male) or 1 (female), got {cell!r}")


def parse_cohort(
    path: str | Path,
    catalog: DeficitCatalog,
    min_age: int = DEFAULT_MIN_AGE,
    max_missing: int = DEFAULT_MAX_MISSING,
    outcome_col: str = DEFAULT_OUTCOME_COL,
) -> Cohort:
    """Parse a cohort CSV, dichotomize deficits and apply inclusion rules.

    Rows failing a rule are counted in the exclusion log rather than kept:
    under ``min_age``, more than ``max_missing`` missing deficits, or a
    missing age/sex value (malformed).  Invalid cell values (non-numeric age,
    sex outside 0/1, undichotomizable deficit cells) raise ValueError since
    they indicate an input-schema bug rather than survey missingness.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file, expected a CSV header")
        header = set(reader.fieldnames)
        needed = ["age", "sex"] + catalog.ids
        absent = [c for c in needed if c not in header]
        if absent:
            raise MissingColumnError(absent)
        has_outcome = outcome_col in header
        has_id = "id" in header

        records: list[ParticipantRecord] = []
        log = ExclusionLog()
        for row_no, row in enumerate(reader, start=2):
            if any(v is None for v in row.values()) or None in row:
                log.malformed += 1
                continue
            if is_missing(row["age"]) or is_missing(row["sex"]):
                log.malformed += 1
                continue
            try:
                age = _parse_age(row["age"])
                sex = _parse_sex(row["sex"])
            except ValueError as exc:
                raise ValueError(f"{path}:{row_no}: {exc}") from None
            if age < min_age:
                log.under_age += 1
                continue
            try:
                deficits = tuple(e.encode(row[e.id]) for e in catalog.entries)
            except ValueError as exc:
                raise ValueError(f"{path}:{row_no}: {exc}") from None
            if sum(1 for d in deficits if d is None) > max_missing:
                log.excess_missing += 1
                continue
            outcome = None
            if has_outcome and not is_missing(row[outcome_col]):
                outcome = float(row[outcome_col])
                if not 0.0 <= outcome <= OUTCOME_MAX:
                    raise ValueError(
                        f"{path}:{row_no}: outcome {outcome} outside [0, {OUTCOME_MAX:g}]"
                    )
            ident = row["id"] if has_id and row["id"].strip() else f"p{row_no - 1:06d}"
            records.append(ParticipantRecord(ident, age, sex, deficits, outcome))

    return Cohort(records, catalog, log)


def write_cohort_csv(
    cohort: Cohort, path: str | Path, outcome_col: str = DEFAULT_OUTCOME_COL
) -> None:
    """Write a cohort in the same CSV format ``parse_cohort`` reads."""
    path = Path(path)
    any_outcome = any(r.outcome is not None for r in cohort.records)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        head = ["id", "age", "sex"] + cohort.catalog.ids
        if any_outcome:
            head.append(outcome_col)
        writer.writerow(head)
        for rec in cohort.records:
            row = [rec.id, rec.age, rec.sex]
            row += ["" if d is None else d for d in rec.deficits]
            if any_outcome:
                row.append("" if rec.outcome is None else repr(rec.outcome))
            writer.writerow(row)
