"""Empirical Bayes estimation of a Dirichlet concentration from neighbor counts.

The prior for an area is the maximizer of the Dirichlet-multinomial marginal
log-likelihood of the *other* areas' count vectors.  The Hessian of that
likelihood is diagonal plus a constant rank-one term, so each Newton step is
solved in O(K) with the Sherman-Morrison identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

logger = logging.getLogger(__name__)

__all__ = [
    "digamma",
    "trigamma",
    "as_count_matrix",
    "marginal_loglik",
    "loglik_gradient",
    "loglik_hessian",
    "hessian_matrix",
    "solve_diag_plus_rank_one",
    "OptimizerConfig",
    "FitResult",
    "fit_gamma",
    "estimate_prior_for_area",
]

# Values at or above this use the asymptotic expansions directly.
_ASYMPTOTIC_FROM = 10.0
_GRADIENT_BACKTRACKS = 60

# B_2n / (2n) for n = 1..7
_DIGAMMA_COEFS = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
# B_2n for n = 1..7
_TRIGAMMA_COEFS = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _positive_array(s) -> tuple[np.ndarray, bool]:
    arr = np.asarray(s, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise ValueError("argument must be positive and finite")
    return arr, scalar


def digamma(s):
    """Psi(s) = d/ds log Gamma(s) for s > 0, elementwise.

    Shifts s upward with Psi(s) = Psi(s + 1) - 1/s until s >= 10, then applies
    the asymptotic series; absolute error is below 1e-13 over the domain.
    """
    s, scalar = _positive_array(s)
    s = s.copy()
    acc = np.zeros_like(s)
    small = s < _ASYMPTOTIC_FROM
    while np.any(small):
        acc[small] -= 1.0 / s[small]
        s[small] += 1.0
        small = s < _ASYMPTOTIC_FROM
    inv2 = 1.0 / (s * s)
    series = np.zeros_like(s)
    for c in reversed(_DIGAMMA_COEFS):
        series = (series + c) * inv2
    out = acc + np.log(s) - 0.5 / s - series
    return float(out[0]) if scalar else out


def trigamma(s):
    """Psi'(s) for s > 0, elementwise (same shift-then-expand scheme)."""
    s, scalar = _positive_array(s)
    s = s.copy()
    acc = np.zeros_like(s)
    small = s < _ASYMPTOTIC_FROM
    while np.any(small):
        acc[small] += 1.0 / (s[small] * s[small])
        s[small] += 1.0
        small = s < _ASYMPTOTIC_FROM
    inv = 1.0 / s
    inv2 = inv * inv
    series = np.zeros_like(s)
    for c in reversed(_TRIGAMMA_COEFS):
        series = (series + c) * inv2
    out = acc + inv + 0.5 * inv2 + series * inv
    return float(out[0]) if scalar else out


def as_count_matrix(data) -> np.ndarray:
    """Validate a J x K matrix of non-negative integer counts."""
    arr = np.asarray(data)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("count matrix must be 2-d with at least one row and column")
    if arr.dtype.kind == "f" and np.any(arr != np.round(arr)):
        raise ValueError("counts must be whole numbers")
    if arr.dtype.kind not in "iubf":
        raise ValueError(f"counts must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    return arr


def _check_gamma(gamma, K: int) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.shape != (K,):
        raise ValueError(f"gamma has shape {g.shape}, expected ({K},)")
    if np.any(~(g > 0)) or np.any(~np.isfinite(g)):
        raise ValueError("gamma entries must be positive and finite")
    return g


def marginal_loglik(data, gamma) -> float:
    """Dirichlet-multinomial log marginal likelihood, summed over rows.

    Drops the multinomial coefficients, which do not depend on ``gamma``.
    """
    x = as_count_matrix(data)
    g = _check_gamma(gamma, x.shape[1])
    S = g.sum()
    N = x.sum(axis=1)
    per_row = gammaln(S) - gammaln(N + S) + (gammaln(x + g) - gammaln(g)).sum(axis=1)
    return float(per_row.sum())


def loglik_gradient(data, gamma) -> np.ndarray:
    x = as_count_matrix(data)
    g = _check_gamma(gamma, x.shape[1])
    S = g.sum()
    N = x.sum(axis=1)
    common = np.sum(digamma(S) - digamma(N + S))
    return common + (digamma(x + g) - digamma(g)).sum(axis=0)


def loglik_hessian(data, gamma) -> tuple[np.ndarray, float]:
    """Hessian in structured form ``(d, c)`` with H = diag(d) + c * ones((K, K)).

    ``d <= 0`` and ``c >= 0`` always hold because the trigamma function is
    decreasing.
    """
    x = as_count_matrix(data)
    g = _check_gamma(gamma, x.shape[1])
    S = g.sum()
    N = x.sum(axis=1)
    c = float(np.sum(trigamma(S) - trigamma(N + S)))
    d = (trigamma(x + g) - trigamma(g)).sum(axis=0)
    return d, c


def hessian_matrix(data, gamma) -> np.ndarray:
    d, c = loglik_hessian(data, gamma)
    return np.diag(d) + c


def solve_diag_plus_rank_one(d, c: float, b) -> np.ndarray:
    """Solve (diag(d) + c * 1 1^T) z = b in O(K).

    Raises ``np.linalg.LinAlgError`` when the system is singular to working
    precision (a zero diagonal entry or a vanishing Sherman-Morrison
    denominator).
    """
    d = np.asarray(d, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(d == 0):
        raise np.linalg.LinAlgError("zero diagonal entry")
    dinv_b = b / d
    dinv_1 = 1.0 / d
    denom = 1.0 + c * dinv_1.sum()
    if abs(denom) < 1e-12:
        raise np.linalg.LinAlgError("Sherman-Morrison denominator vanishes")
    return dinv_b - (c * dinv_b.sum() / denom) * dinv_1


@dataclass(frozen=True)
class OptimizerConfig:
    """Stopping rules and safeguards for :func:`fit_gamma`.

    ``initial_gamma`` is either the string ``"uniform-1"`` or an explicit
    positive vector.
    """

    grad_tolerance: float = 1e-8
    max_iterations: int = 200
    initial_gamma: object = "uniform-1"
    step_halving_max: int = 30

    def __post_init__(self):
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.step_halving_max < 0:
            raise ValueError("step_halving_max must be non-negative")
        if isinstance(self.initial_gamma, str) and self.initial_gamma != "uniform-1":
            raise ValueError(f"unknown initial_gamma {self.initial_gamma!r}")


@dataclass
class FitResult:
    """Outcome of a concentration fit.

    ``boundary`` marks categories with no counts in any row.  Their estimate
    is exactly 0 (the likelihood strictly decreases in those entries) and
    they are excluded from ``grad_norm``.
    """

    gamma: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    grad_norm: float
    boundary: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    message: str = ""
    history: list[float] = field(default_factory=list, repr=False)


def _ascent_slack(ll: float) -> float:
    return 1e-12 * max(1.0, abs(ll))


def _newton_direction(x, g, grad):
    d, c = loglik_hessian(x, g)
    if np.any(d >= 0):
        return None
    try:
        step = -solve_diag_plus_rank_one(d, c, grad)
    except np.linalg.LinAlgError:
        return None
    # only use the Newton step when it points uphill
    if not grad @ step > 0:
        return None
    return step


def _line_search(x, g, ll, direction, max_halvings):
    """Largest t in {1, 1/2, ...} keeping g + t*direction feasible and not worse."""
    t = 1.0
    for _ in range(max_halvings + 1):
        cand = g + t * direction
        if np.all(cand > 0):
            cand_ll = marginal_loglik(x, cand)
            if cand_ll >= ll - _ascent_slack(ll):
                return cand, cand_ll
        t *= 0.5
    return None


def fit_gamma(data, config: OptimizerConfig | None = None) -> FitResult:
    """Maximize the Dirichlet-multinomial marginal likelihood over ``gamma``.

    Newton-Raphson with the structured Hessian.  A step that leaves the
    positive orthant or lowers the likelihood is halved (up to
    ``config.step_halving_max`` times); if that fails, or the Hessian is not
    usable, a backtracking gradient-ascent step is taken instead.

    Rows with zero total carry no information and are dropped.  Categories
    that are zero in every remaining row sit on the boundary: their estimate
    is 0 and the remaining categories are fitted on their own.

    Non-convergence is reported through ``converged=False`` with the best
    iterate, not raised.
    """
    config = config or OptimizerConfig()
    x = as_count_matrix(data)
    K = x.shape[1]
    x = x[x.sum(axis=1) > 0]
    if x.shape[0] == 0:
        return FitResult(
            gamma=np.ones(K),
            loglik=0.0,
            iterations=0,
            converged=False,
            grad_norm=0.0,
            boundary=np.zeros(K, dtype=bool),
            message="all rows have zero total; the likelihood is flat",
        )

    boundary = x.sum(axis=0) == 0
    free = ~boundary
    xf = x[:, free]

    if isinstance(config.initial_gamma, str):
        g = np.ones(K)
    else:
        g = np.array(config.initial_gamma, dtype=float)
        if g.shape != (K,) or np.any(~(g > 0)):
            raise ValueError("initial_gamma must be a positive vector of length K")
    g = g[free]

    ll = marginal_loglik(xf, g)
    grad = loglik_gradient(xf, g)
    history = [ll]
    message = "maximum iterations reached"
    iterations = 0
    converged = bool(np.max(np.abs(grad)) <= config.grad_tolerance)
    while not converged and iterations < config.max_iterations:
        accepted = None
        direction = _newton_direction(xf, g, grad)
        if direction is not None:
            accepted = _line_search(xf, g, ll, direction, config.step_halving_max)
        if accepted is None:
            # gradient ascent, scaled so no entry more than halves on the first try
            ratio = np.max(np.abs(grad) / g)
            scale = 1.0 if ratio <= 0.5 else 0.5 / ratio
            accepted = _line_search(xf, g, ll, scale * grad, _GRADIENT_BACKTRACKS)
        if accepted is None:
            message = "line search failed to find an ascent step"
            logger.debug("fit_gamma: %s after %d iterations", message, iterations)
            break
        g, ll = accepted
        grad = loglik_gradient(xf, g)
        history.append(ll)
        iterations += 1
        converged = bool(np.max(np.abs(grad)) <= config.grad_tolerance)

    if converged:
        message = "converged"

    full = np.zeros(K)
    full[free] = g
    return FitResult(
        gamma=full,
        loglik=ll,
        iterations=iterations,
        converged=converged,
        grad_norm=float(np.max(np.abs(grad))),
        boundary=boundary,
        message=message,
        history=history,
    )


def estimate_prior_for_area(area_index: int, dataset, neighbors, config: OptimizerConfig | None = None) -> FitResult:
    """Fit the prior for one area from its neighbors' counts only.

    ``dataset`` needs a ``counts`` J x K matrix; ``neighbors`` is either a
    :class:`~predsets.pipeline.NeighborGraph` or a per-area sequence of index
    lists.  The target area's own row is never read.
    """
    counts = np.asarray(dataset.counts)
    J = counts.shape[0]
    if not 0 <= area_index < J:
        raise IndexError(f"area index {area_index} out of range for {J} areas")
    lists = getattr(neighbors, "neighbors", neighbors)
    nbrs = list(lists[area_index])
    if not nbrs:
        raise ValueError(f"area {area_index} has no neighbors")
    if area_index in nbrs:
        raise ValueError(f"area {area_index} lists itself as a neighbor")
    if any(not 0 <= j < J for j in nbrs):
        raise IndexError(f"neighbor index out of range for area {area_index}")
    return fit_gamma(counts[nbrs], config)
