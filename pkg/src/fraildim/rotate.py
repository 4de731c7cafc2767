"""Oblique oblimin (quartimin) rotation by gradient projection.

The rotated pattern is L = A T^-T for an oblique transformation T with
unit-norm columns; the factor correlation matrix is Phi = T'T.  The
criterion minimized is the oblimin family value

    Q(L) = sum_i sum_{j != l} w_ij w_il,   w = (I - gamma * ones/p) (L o L)

which at gamma = 0 (quartimin) is the sum over items of all ordered
cross-products of squared loadings.  Optimization follows the gradient
projection algorithm: steepest descent steps on T projected back onto the
unit-column manifold, with step halving until the criterion decreases.
Multiple seeded random starts guard against local minima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .efa import UnrotatedSolution

SALIENCE_THRESHOLD = 0.20
DEFAULT_RESTARTS = 10
GPA_TOL = 1e-5
GPA_MAX_ITER = 1000


def quartimin_value(pattern: np.ndarray) -> float:
    """Quartimin criterion: sum_i sum_{j != l} lambda_ij^2 lambda_il^2."""
    l2 = np.asarray(pattern, dtype=float) ** 2
    k = l2.shape[1]
    n = np.ones((k, k)) - np.eye(k)
    return float(np.sum(l2 * (l2 @ n)))


def _oblimin_value_grad(pattern: np.ndarray, gamma: float) -> tuple[float, np.ndarray]:
    l2 = pattern**2
    p, k = pattern.shape
    n = np.ones((k, k)) - np.eye(k)
    x = l2 @ n
    if gamma != 0.0:
        x = x - gamma * np.outer(np.ones(p), x.mean(axis=0))
    value = float(np.sum(l2 * x))
    grad = 4.0 * pattern * x
    return value, grad


def _gpa_oblique(
    a: np.ndarray,
    t0: np.ndarray,
    gamma: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray, float, int, bool, list[float]]:
    """Gradient projection minimization over oblique transformations.

    Returns (pattern, phi, criterion, iterations, converged, history) where
    history holds the criterion value at every accepted iterate, which is
    non-increasing by construction.
    """
    t = t0.copy()
    ti = np.linalg.inv(t)
    pattern = a @ ti.T
    f, gq = _oblimin_value_grad(pattern, gamma)
    g = -(pattern.T @ gq @ ti).T
    history = [f]
    al = 1.0
    converged = False
    iterations = 0
    for it in range(max_iter):
        iterations = it
        gp = g - t * (t * g).sum(axis=0)
        s = np.sqrt(np.sum(gp * gp))
        if s < tol:
            converged = True
            break
        al *= 2.0
        accepted = False
        for _ in range(30):
            x = t - al * gp
            norms = np.sqrt((x * x).sum(axis=0))
            if np.any(norms == 0.0):
                al /= 2.0
                continue
            tt = x / norms
            try:
                tti = np.linalg.inv(tt)
            except np.linalg.LinAlgError:
                al /= 2.0
                continue
            lt = a @ tti.T
            ft, gqt = _oblimin_value_grad(lt, gamma)
            if ft < f - 0.5 * s * s * al:
                accepted = True
                break
            al /= 2.0
        if not accepted:
            # no decreasing step found: stationary to working precision
            break
        t, ti, pattern, f, gq = tt, tti, lt, ft, gqt
        g = -(pattern.T @ gq @ ti).T
        history.append(f)
    return pattern, t.T @ t, f, iterations, converged, history


@dataclass(frozen=True)
class RotatedSolution:
    pattern: np.ndarray  # p x k
    phi: np.ndarray  # k x k factor correlations
    structure: np.ndarray  # pattern @ phi
    criterion_value: float
    converged: bool
    iterations: int
    history: tuple[float, ...]

    @property
    def k(self) -> int:
        return self.pattern.shape[1]


def _random_oblique(k: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        t = rng.standard_normal((k, k))
        t /= np.sqrt((t * t).sum(axis=0))
        if abs(np.linalg.det(t)) > 1e-6:
            return t


def _apply_conventions(pattern, phi):
    signs = np.where(pattern.sum(axis=0) < 0, -1.0, 1.0)
    pattern = pattern * signs
    phi = phi * np.outer(signs, signs)
    structure = pattern @ phi
    order = np.argsort(-(structure**2).sum(axis=0), kind="stable")
    pattern = pattern[:, order]
    phi = phi[np.ix_(order, order)]
    structure = structure[:, order]
    return pattern, phi, structure


def oblimin_rotate(
    unrotated: UnrotatedSolution | np.ndarray,
    gamma: float = 0.0,
    tol: float = GPA_TOL,
    max_iter: int = GPA_MAX_ITER,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
) -> RotatedSolution:
    """Rotate a loading matrix to the oblimin criterion (quartimin default).

    Runs the gradient projection algorithm from the identity start plus
    ``restarts`` seeded random oblique starts and keeps the lowest criterion
    (ties go to the earliest start).  A run that exhausts ``max_iter``
    without the projected gradient dropping below ``tol`` is returned with
    ``converged`` False.  Column signs are fixed so each pattern column sums
    to >= 0 and columns are ordered by descending squared structure loadings.
    """
    a = unrotated.loadings if isinstance(unrotated, UnrotatedSolution) else np.asarray(unrotated, dtype=float)
    p, k = a.shape
    if k == 1:
        pattern, phi, structure = _apply_conventions(a.copy(), np.eye(1))
        q = quartimin_value(pattern)
        return RotatedSolution(pattern, phi, structure, q, True, 0, (q,))

    starts = [np.eye(k)]
    for i in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        starts.append(_random_oblique(k, rng))

    best = None
    for t0 in starts:
        result = _gpa_oblique(a, t0, gamma, tol, max_iter)
        if best is None or result[2] < best[2]:
            best = result
    pattern, phi, criterion, iterations, converged, history = best
    pattern, phi, structure = _apply_conventions(pattern, phi)
    return RotatedSolution(
        pattern=pattern,
        phi=phi,
        structure=structure,
        criterion_value=criterion,
        converged=converged,
        iterations=iterations,
        history=tuple(history),
    )


@dataclass(frozen=True)
class FactorSalience:
    factor: int
    salient: tuple[tuple[str, float], ...]
    adequate: bool


@dataclass(frozen=True)
class SalienceReport:
    factors: tuple[FactorSalience, ...]
    threshold: float

    @property
    def all_adequate(self) -> bool:
        return all(f.adequate for f in self.factors)


def salience(
    pattern: np.ndarray,
    ids: list[str] | None = None,
    threshold: float = SALIENCE_THRESHOLD,
) -> SalienceReport:
    """Salient pattern coefficients per factor and the adequacy flag.

    A loading is salient when strictly above ``threshold`` in magnitude; a
    factor is adequate with at least three salient coefficients.
    """
    pattern = np.asarray(pattern, dtype=float)
    p, k = pattern.shape
    if ids is None:
        ids = [f"item{i + 1}" for i in range(p)]
    factors = []
    for j in range(k):
        hits = tuple(
            (ids[i], float(pattern[i, j]))
            for i in range(p)
            if abs(pattern[i, j]) > threshold
        )
        factors.append(FactorSalience(j + 1, hits, len(hits) >= 3))
    return SalienceReport(tuple(factors), threshold)
