"""Phi correlations with pairwise deletion, PSD smoothing, factorability.

Every entry of the correlation matrix is a phi coefficient computed from the
2x2 table of the cases complete for that pair only (pairwise deletion).
Pairwise deletion can leave the matrix indefinite, so ``smooth_psd`` clips
negative eigenvalues and rescales back to unit diagonal before the matrix is
factor-analyzed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .errors import (
    DegenerateMarginError,
    InsufficientOverlapError,
    SingularMatrixError,
)

DEFAULT_MIN_PAIRS = 30

# eigenvalue floor used when reassembling an indefinite matrix
SMOOTH_EPS = 1e-6
PSD_TOL = -1e-10


@dataclass(frozen=True)
class CorrMatrix:
    """Symmetric unit-diagonal correlation matrix plus provenance.

    ``n_pairs`` holds the pairwise-complete case count behind each entry;
    ``min_eig_before`` is the smallest eigenvalue seen by ``smooth_psd``
    (NaN until smoothing has been attempted).
    """

    r: np.ndarray
    n_pairs: np.ndarray
    smoothed: bool = False
    min_eig_before: float = float("nan")
    ids: tuple[str, ...] | None = None

    @property
    def p(self) -> int:
        return self.r.shape[0]

    def label(self, j: int) -> str:
        return self.ids[j] if self.ids is not None else f"var{j}"


def phi(n11: int, n10: int, n01: int, n00: int) -> float:
    """Phi coefficient from a 2x2 contingency table.

    Equals the Pearson correlation of the two 0/1 variables.  Raises
    DegenerateMarginError when either variable is constant (a zero margin),
    in which case the correlation is undefined rather than 0.
    """
    if min(n11, n10, n01, n00) < 0:
        raise ValueError("cell counts must be non-negative")
    r1, r0 = n11 + n10, n01 + n00
    c1, c0 = n11 + n01, n10 + n00
    if 0 in (r1, r0, c1, c0):
        raise DegenerateMarginError(
            f"degenerate 2x2 margin in table ({n11}, {n10}, {n01}, {n00})"
        )
    num = n11 * n00 - n10 * n01
    return float(num / np.sqrt(float(r1) * r0 * c1 * c0))


def pairwise_phi_matrix(
    m: np.ndarray,
    ids: tuple[str, ...] | None = None,
    min_pairs: int = DEFAULT_MIN_PAIRS,
) -> CorrMatrix:
    """Phi matrix of an N x p 0/1 deficit matrix with NaN for missing cells.

    Each entry uses only the rows complete for that pair; counts are recorded
    in ``n_pairs``.  Raises InsufficientOverlapError when a pair has fewer
    than ``min_pairs`` complete cases and DegenerateMarginError when a
    variable is constant (globally, or within a pair's complete cases).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[1] < 2:
        raise ValueError("deficit matrix must be N x p with p >= 2")
    p = m.shape[1]
    valid = ~np.isnan(m)

    def label(j: int) -> str:
        return ids[j] if ids is not None else f"var{j}"

    constant = []
    for j in range(p):
        col = m[valid[:, j], j]
        if col.size == 0 or np.all(col == col[0]):
            constant.append(label(j))
    if constant:
        raise DegenerateMarginError(
            "constant deficit variable(s): " + ", ".join(constant)
        )

    ones = np.where(valid, m, 0.0)
    mask = valid.astype(float)
    n11 = ones.T @ ones
    npairs = mask.T @ mask
    n1x = ones.T @ mask  # x_i = 1 among cases where j is observed
    n10 = n1x - n11
    n01 = n1x.T - n11
    n00 = npairs - n11 - n10 - n01

    off = ~np.eye(p, dtype=bool)
    if npairs[off].min() < min_pairs:
        i, j = np.unravel_index(np.argmin(np.where(off, npairs, np.inf)), npairs.shape)
        raise InsufficientOverlapError(
            f"pair ({label(i)}, {label(j)}) has only {int(npairs[i, j])} "
            f"complete case(s), need >= {min_pairs}"
        )

    r1, r0 = n11 + n10, n01 + n00
    c1, c0 = n11 + n01, n10 + n00
    degenerate = off & ((r1 == 0) | (r0 == 0) | (c1 == 0) | (c0 == 0))
    if degenerate.any():
        i, j = np.argwhere(degenerate)[0]
        raise DegenerateMarginError(
            f"pair ({label(i)}, {label(j)}) is constant on its "
            "pairwise-complete cases"
        )

    with np.errstate(invalid="ignore", divide="ignore"):
        r = (n11 * n00 - n10 * n01) / np.sqrt(r1 * r0 * c1 * c0)
    np.fill_diagonal(r, 1.0)
    r = np.clip(r, -1.0, 1.0)
    r = (r + r.T) / 2.0
    return CorrMatrix(r=r, n_pairs=npairs.astype(int), ids=ids)


def smooth_psd(c: CorrMatrix) -> CorrMatrix:
    """Clip negative eigenvalues and rescale to unit diagonal.

    PSD inputs (minimum eigenvalue >= -1e-10) are returned unchanged apart
    from recording the eigenvalue; the operation is idempotent.
    """
    w, q = np.linalg.eigh(c.r)
    min_eig = float(w.min())
    if min_eig >= PSD_TOL:
        return replace(c, smoothed=False, min_eig_before=min_eig)
    w_clipped = np.maximum(w, SMOOTH_EPS)
    m = (q * w_clipped) @ q.T
    d = np.sqrt(np.diag(m))
    r = m / np.outer(d, d)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return replace(c, r=r, smoothed=True, min_eig_before=min_eig)


@dataclass(frozen=True)
class FactorabilityReport:
    bartlett_chi2: float
    bartlett_df: int
    bartlett_p: float
    kmo_overall: float
    kmo_per_variable: np.ndarray


def factorability(c: CorrMatrix, n: int) -> FactorabilityReport:
    """Bartlett sphericity test and Kaiser-Meyer-Olkin sampling adequacy.

    Bartlett: chi2 = -(n - 1 - (2p + 5)/6) * ln det(R) on p(p-1)/2 degrees
    of freedom.  KMO compares squared correlations against squared partial
    correlations from the anti-image of R.  Raises SingularMatrixError when
    det(R) <= 0; smooth the matrix first.
    """
    p = c.p
    if n <= p:
        raise ValueError(f"factorability needs n > p (n={n}, p={p})")
    sign, logdet = np.linalg.slogdet(c.r)
    if sign <= 0:
        raise SingularMatrixError(
            "correlation matrix is numerically singular; Bartlett undefined"
        )
    df = p * (p - 1) // 2
    chi2 = -(n - 1 - (2 * p + 5) / 6.0) * logdet
    chi2 = max(chi2, 0.0)
    pval = float(special.gammaincc(df / 2.0, chi2 / 2.0))

    try:
        inv = np.linalg.inv(c.r)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("cannot invert correlation matrix for KMO") from exc
    d = 1.0 / np.sqrt(np.diag(inv))
    partial = -inv * np.outer(d, d)
    np.fill_diagonal(partial, 0.0)
    r2 = c.r**2
    np.fill_diagonal(r2, 0.0)
    p2 = partial**2

    r2_sum, p2_sum = r2.sum(axis=0), p2.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_var = np.where(r2_sum + p2_sum > 0, r2_sum / (r2_sum + p2_sum), 0.0)
    total = r2.sum() + p2.sum()
    if total == 0:
        warnings.warn(
            "correlation matrix is diagonal; KMO defined as 0", stacklevel=2
        )
        overall = 0.0
    else:
        overall = float(r2.sum() / total)
    return FactorabilityReport(float(chi2), df, pval, overall, per_var)
