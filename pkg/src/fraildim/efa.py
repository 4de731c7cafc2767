"""Eigen-analysis, Horn's parallel analysis and minres factor extraction.

Extraction fits R ~ L L' + diag(Psi) by unweighted least squares on the
off-diagonal residuals: Psi is optimized over [0.001, 1]^p and, for a given
Psi, L is built from the top-k eigenpairs of R - diag(Psi) with negative
eigenvalues truncated at zero.  Starting values are 1 - SMC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .corr import CorrMatrix
from .errors import ConvergenceError, SingularMatrixError

# model-fit gate: root mean square residual at or below this is acceptable
ACCEPTABLE_RMSR = 0.05

DEFAULT_REPLICATES = 100
DEFAULT_QUANTILE = 0.95

PSI_LOWER = 0.001
MINRES_TOL = 1e-9
MINRES_MAX_ITER = 1000


def _as_matrix(c) -> np.ndarray:
    r = c.r if isinstance(c, CorrMatrix) else np.asarray(c, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("expected a square correlation matrix")
    if not np.allclose(r, r.T, atol=1e-10):
        raise ValueError("correlation matrix must be symmetric")
    return r


def eigenvalues(c) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, descending.

    The decomposition is verified by reconstructing the input to 1e-8 in
    max norm; failure raises ConvergenceError.
    """
    r = _as_matrix(c)
    try:
        w, q = np.linalg.eigh(r)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed: {exc}") from exc
    recon = (q * w) @ q.T
    err = float(np.abs(recon - r).max())
    if err >= 1e-8:
        raise ConvergenceError(f"eigendecomposition reconstruction error {err:.3g}")
    return w[::-1].copy()


@dataclass(frozen=True)
class ParallelResult:
    observed_eigs: np.ndarray
    random_eigs_quantile: np.ndarray
    n_replicates: int
    quantile: float
    seed: int
    suggested_k: int


def parallel_analysis(
    n: int,
    p: int,
    observed: np.ndarray,
    n_replicates: int = DEFAULT_REPLICATES,
    quantile: float = DEFAULT_QUANTILE,
    seed: int = 0,
) -> ParallelResult:
    """Horn's parallel analysis against standard-normal null data.

    Each replicate draws an n x p standard-normal matrix, correlates it and
    records the sorted eigenvalues; the retention threshold per rank is the
    empirical ``quantile`` across replicates.  ``suggested_k`` is the length
    of the leading run of observed eigenvalues strictly above threshold.
    Replicate RNG streams are derived from the master seed, so the result is
    reproducible bit for bit regardless of evaluation order.
    """
    if n <= p:
        raise ValueError(f"parallel analysis needs n > p (n={n}, p={p})")
    observed = np.sort(np.asarray(observed, dtype=float))[::-1]
    if observed.shape != (p,):
        raise ValueError("observed eigenvalue vector must have length p")

    null_eigs = np.empty((n_replicates, p))
    for rep in range(n_replicates):
        rng = np.random.default_rng(np.random.SeedSequence([seed, rep]))
        x = rng.standard_normal((n, p))
        r = np.corrcoef(x, rowvar=False)
        null_eigs[rep] = np.sort(np.linalg.eigvalsh(r))[::-1]
    thresholds = np.quantile(null_eigs, quantile, axis=0)

    exceed = observed > thresholds
    suggested = int(p if exceed.all() else np.argmin(exceed))
    return ParallelResult(
        observed_eigs=observed,
        random_eigs_quantile=thresholds,
        n_replicates=n_replicates,
        quantile=quantile,
        seed=seed,
        suggested_k=suggested,
    )


@dataclass(frozen=True)
class UnrotatedSolution:
    loadings: np.ndarray  # p x k
    uniquenesses: np.ndarray  # p
    communalities: np.ndarray  # p
    objective_value: float
    converged: bool
    iterations: int
    heywood: bool
    history: tuple[float, ...]

    @property
    def k(self) -> int:
        return self.loadings.shape[1]


def smc(r: np.ndarray) -> np.ndarray:
    """Squared multiple correlations from the inverse correlation matrix."""
    try:
        inv = np.linalg.inv(r)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("cannot invert matrix for SMC start") from exc
    return 1.0 - 1.0 / np.diag(inv)


def _loadings_for_psi(r: np.ndarray, psi: np.ndarray, k: int) -> np.ndarray:
    w, q = np.linalg.eigh(r - np.diag(psi))
    w, q = w[::-1][:k], q[:, ::-1][:, :k]
    return q * np.sqrt(np.maximum(w, 0.0))


def extract_minres(
    c,
    k: int,
    tol: float = MINRES_TOL,
    max_iter: int = MINRES_MAX_ITER,
) -> UnrotatedSolution:
    """Minres (ULS) extraction of k factors from a correlation matrix.

    Minimizes the sum of squared off-diagonal residuals over the
    uniquenesses.  A Heywood case (a uniqueness pinned at the 0.001 bound or
    a communality reaching 1) is flagged but still returned.  Columns are
    ordered by descending sum of squared loadings and signed so each column
    sums to >= 0.
    """
    r = _as_matrix(c)
    p = r.shape[0]
    if not 1 <= k < p:
        raise ValueError(f"need 1 <= k < p, got k={k}, p={p}")

    iu = np.triu_indices(p, 1)
    obs = r[iu]

    def objective(psi: np.ndarray) -> float:
        lam = _loadings_for_psi(r, psi, k)
        resid = obs - (lam @ lam.T)[iu]
        return float(resid @ resid)

    psi0 = np.clip(1.0 - smc(r), PSI_LOWER, 1.0)
    history = [objective(psi0)]
    res = minimize(
        objective,
        psi0,
        method="L-BFGS-B",
        bounds=[(PSI_LOWER, 1.0)] * p,
        callback=lambda xk: history.append(objective(xk)),
        options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-8},
    )

    lam = _loadings_for_psi(r, res.x, k)
    # sign then order conventions
    signs = np.where(lam.sum(axis=0) < 0, -1.0, 1.0)
    lam = lam * signs
    order = np.argsort(-(lam**2).sum(axis=0), kind="stable")
    lam = lam[:, order]

    h2 = (lam**2).sum(axis=1)
    psi = np.clip(1.0 - h2, 1e-6, 1.0)
    heywood = bool(np.any(res.x <= PSI_LOWER + 1e-12) or np.any(h2 >= 1.0 - 1e-9))
    return UnrotatedSolution(
        loadings=lam,
        uniquenesses=psi,
        communalities=h2,
        objective_value=float(res.fun),
        converged=bool(res.status == 0),
        iterations=int(res.nit),
        heywood=heywood,
        history=tuple(history),
    )


@dataclass(frozen=True)
class FitStats:
    rmsr: float
    eigenvalues_of_r: np.ndarray
    prop_variance_per_factor: np.ndarray

    @property
    def acceptable(self) -> bool:
        return self.rmsr <= ACCEPTABLE_RMSR


def implied_matrix(solution) -> np.ndarray:
    """Model-implied correlation matrix (common part) of a solution.

    Oblique solutions contribute pattern @ phi @ pattern', so the fitted
    matrix, and hence RMSR, is invariant under rotation.
    """
    if hasattr(solution, "phi"):
        lam = solution.pattern
        return lam @ solution.phi @ lam.T
    lam = solution.loadings
    return lam @ lam.T


def fit_stats(c, solution) -> FitStats:
    """RMSR over off-diagonal residuals plus per-factor variance shares."""
    r = _as_matrix(c)
    model = implied_matrix(solution)
    iu = np.triu_indices(r.shape[0], 1)
    resid = r[iu] - model[iu]
    rmsr = float(np.sqrt(np.mean(resid**2)))
    lam = solution.pattern if hasattr(solution, "phi") else solution.loadings
    prop = (lam**2).sum(axis=0) / r.shape[0]
    return FitStats(rmsr, eigenvalues(r), prop)
