"""Frailty index scores and the per-deficit inspection report.

The frailty index for a participant is the proportion of assessed (non
missing) deficits that are present.  The inspection report gives, per
deficit: overall prevalence, prevalence by sex and by age band, a saturation
flag (prevalence of 1.0 in any band), and the correlation of per-year-of-age
prevalence with age.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRecordError
from .ingest import Cohort, ParticipantRecord

AGE_BANDS = (("65-69", 0, 69), ("70-79", 70, 79), ("80-89", 80, 89), ("90+", 90, None))

DEFAULT_MIN_CELL = 10


@dataclass(frozen=True)
class FrailtyResult:
    deficits_present: int
    deficits_assessed: int

    @property
    def fi(self) -> float:
        return self.deficits_present / self.deficits_assessed


def frailty_index(record: ParticipantRecord) -> FrailtyResult:
    """Frailty index for one participant.

    Missing deficits are excluded from both numerator and denominator.
    Raises DegenerateRecordError when every deficit is missing.
    """
    assessed = [d for d in record.deficits if d is not None]
    if not assessed:
        raise DegenerateRecordError(
            f"participant '{record.id}' has no assessed deficits"
        )
    return FrailtyResult(sum(assessed), len(assessed))


def cohort_frailty(cohort: Cohort) -> list[FrailtyResult]:
    return [frailty_index(r) for r in cohort.records]


@dataclass(frozen=True)
class DeficitCriteria:
    deficit_id: str
    description: str
    prevalence: float
    prevalence_male: float | None
    prevalence_female: float | None
    prevalence_by_band: dict[str, float | None]
    saturated: bool
    age_corr: float | None


@dataclass(frozen=True)
class DeficitCriteriaReport:
    rows: tuple[DeficitCriteria, ...]
    min_cell: int


def _prevalence(values: np.ndarray) -> float | None:
    seen = values[~np.isnan(values)]
    if seen.size == 0:
        return None
    return float(seen.mean())


def _band_label(age: float) -> str:
    for label, lo, hi in AGE_BANDS:
        if age >= lo and (hi is None or age <= hi):
            return label
    return AGE_BANDS[-1][0]


def _pooled_year_cells(
    ages: np.ndarray, values: np.ndarray, min_cell: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pool single-year age cells left to right until each holds >= min_cell
    assessed participants; returns (mean age, prevalence) per pooled cell.

    Cell age is the assessed-count weighted mean year so that a prevalence
    exactly linear in age stays exactly linear after pooling.
    """
    seen = ~np.isnan(values)
    ages = ages[seen]
    vals = values[seen]
    years = np.unique(ages)
    cells: list[tuple[float, float, float]] = []  # (n, sum_age, sum_present)
    acc_n = acc_a = acc_k = 0.0
    for year in years:
        mask = ages == year
        acc_n += mask.sum()
        acc_a += year * mask.sum()
        acc_k += vals[mask].sum()
        if acc_n >= min_cell:
            cells.append((acc_n, acc_a, acc_k))
            acc_n = acc_a = acc_k = 0.0
    if acc_n > 0:
        if cells:
            n, a, k = cells.pop()
            cells.append((n + acc_n, a + acc_a, k + acc_k))
        else:
            cells.append((acc_n, acc_a, acc_k))
    mean_age = np.array([a / n for n, a, _ in cells])
    prev = np.array([k / n for n, _, k in cells])
    return mean_age, prev


def _age_correlation(ages, values, min_cell) -> float | None:
    mean_age, prev = _pooled_year_cells(ages, values, min_cell)
    if mean_age.size < 3:
        return None
    da = mean_age - mean_age.mean()
    dp = prev - prev.mean()
    den = np.sqrt((da * da).sum() * (dp * dp).sum())
    if den == 0:
        return None
    return float(np.clip((da * dp).sum() / den, -1.0, 1.0))


def criteria_report(cohort: Cohort, min_cell: int = DEFAULT_MIN_CELL) -> DeficitCriteriaReport:
    """Inspect every deficit: prevalence overall / by sex / by age band,
    saturation, and prevalence-with-age correlation."""
    if not cohort.records:
        raise ValueError("criteria_report requires a non-empty cohort")
    matrix = cohort.deficit_matrix()
    ages = cohort.ages()
    sexes = cohort.sexes()
    bands = np.array([_band_label(a) for a in ages])

    rows = []
    for j, entry in enumerate(cohort.catalog.entries):
        col = matrix[:, j]
        by_band: dict[str, float | None] = {}
        saturated = False
        for label, _, _ in AGE_BANDS:
            prev = _prevalence(col[bands == label])
            by_band[label] = prev
            if prev is not None and prev >= 1.0:
                saturated = True
        overall = _prevalence(col)
        rows.append(
            DeficitCriteria(
                deficit_id=entry.id,
                description=entry.description,
                prevalence=float("nan") if overall is None else overall,
                prevalence_male=_prevalence(col[sexes == 0]),
                prevalence_female=_prevalence(col[sexes == 1]),
                prevalence_by_band=by_band,
                saturated=saturated,
                age_corr=_age_correlation(ages, col, min_cell),
            )
        )
    return DeficitCriteriaReport(tuple(rows), min_cell)
