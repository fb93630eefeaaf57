"""Order-based prediction sets for a single multinomial draw.

Every set here has the form

    A = {k : sum_l 1(key_k >= key_l) * w_l > alpha}

where ``w`` is either a known probability vector or the candidate-augmented
empirical proportions ``(x + e_k) / (N + 1)``.  The set operations only
threshold the vector returned by :func:`set_pvalues`, so sets at different
``alpha`` are nested by construction.

Category indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PredictionSet",
    "as_counts",
    "as_probabilities",
    "order_set_known_theta",
    "oracle_set",
    "conformal_set",
    "direct_set",
    "indirect_set",
    "set_pvalues",
]


@dataclass(frozen=True)
class PredictionSet:
    """A thresholded set of categories together with its cumulative sums.

    ``pvalues[k]`` is the cumulative mass admitted up to and including
    category ``k``; ``k`` is in the set iff ``pvalues[k] > alpha``.
    """

    included: frozenset[int]
    alpha: float
    pvalues: np.ndarray

    @property
    def cardinality(self) -> int:
        return len(self.included)

    @property
    def mask(self) -> np.ndarray:
        return self.pvalues > self.alpha

    def __contains__(self, k: object) -> bool:
        return k in self.included

    def sorted(self) -> list[int]:
        return sorted(self.included)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


def as_counts(x) -> np.ndarray:
    """Validate a count vector and return it as a 1-d int64 array."""
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("counts must be a non-empty 1-d vector")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("counts must be whole numbers")
    elif arr.dtype.kind not in "iub":
        raise ValueError(f"counts must be integers, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    return arr


def as_probabilities(theta, atol: float = 1e-12) -> np.ndarray:
    """Validate a probability vector (entries in [0, 1] summing to one)."""
    arr = np.asarray(theta, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("theta must be a non-empty 1-d vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("theta entries must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > atol:
        raise ValueError(f"theta must sum to 1 (sum is {arr.sum()!r})")
    return arr


def _as_keys(o, K: int) -> np.ndarray:
    arr = np.asarray(o, dtype=float)
    if arr.shape != (K,):
        raise ValueError(f"ordering key has shape {arr.shape}, expected ({K},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("ordering keys must be finite")
    return arr


def _as_gamma(gamma, K: int) -> np.ndarray:
    arr = np.asarray(gamma, dtype=float)
    if arr.shape != (K,):
        raise ValueError(f"gamma has shape {arr.shape}, expected ({K},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("gamma entries must be finite")
    if np.any(arr < 0):
        raise ValueError("gamma entries must be non-negative")
    return arr


def _mass_at_or_below(keys: np.ndarray, mass: np.ndarray, thresholds: np.ndarray):
    """For each threshold t, sum ``mass[l]`` over all l with ``keys[l] <= t``.

    One sort plus prefix sums; integer masses stay integer so the result is
    exact.
    """
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    csum = np.concatenate(([0], np.cumsum(mass[order])))
    return csum[np.searchsorted(sorted_keys, thresholds, side="right")]


def _threshold(pvalues: np.ndarray, alpha: float) -> PredictionSet:
    included = frozenset(int(k) for k in np.flatnonzero(pvalues > alpha))
    pvalues = pvalues.copy()
    pvalues.flags.writeable = False
    return PredictionSet(included=included, alpha=alpha, pvalues=pvalues)


def _fixed_order_pvalues(x: np.ndarray, o: np.ndarray) -> np.ndarray:
    # the candidate's own extra count is always admitted (o_k >= o_k)
    below = _mass_at_or_below(o, x, o)
    return (below + 1) / (x.sum() + 1)


def _augmented_pvalues(x: np.ndarray, gamma: np.ndarray | None) -> np.ndarray:
    # Candidate k is compared with key (x_k + 1) + gamma_k against x_l + gamma_l
    # for every l.  l = k is always admitted since x_k + gamma_k <= (x_k+1) + gamma_k.
    if gamma is None:
        base = x
        cand = x + 1
    else:
        base = x + gamma
        cand = (x + 1) + gamma
    below = _mass_at_or_below(base, x, cand)
    return (below + 1) / (x.sum() + 1)


def set_pvalues(x, *, gamma=None, order=None) -> np.ndarray:
    """Per-category cumulative sums behind the direct, indirect and fixed-order sets.

    Parameters
    ----------
    x : array_like of int
        Observed counts, length K.
    gamma : array_like of float, optional
        Non-negative prior concentration.  Selects the indirect scheme, whose
        ordering uses the posterior counts ``x + gamma``.
    order : array_like of float, optional
        A fixed ordering key that does not depend on the candidate.  Selects
        the general conformal scheme.

    With neither ``gamma`` nor ``order`` the direct scheme is used.

    Returns
    -------
    ndarray of float, length K
        ``set_pvalues(x, ...)[k] > alpha`` iff ``k`` is in the set at level
        ``alpha``.
    """
    if gamma is not None and order is not None:
        raise ValueError("pass at most one of gamma and order")
    x = as_counts(x)
    K = x.size
    if order is not None:
        return _fixed_order_pvalues(x, _as_keys(order, K))
    if gamma is not None:
        return _augmented_pvalues(x, _as_gamma(gamma, K))
    return _augmented_pvalues(x, None)


def order_set_known_theta(theta, o, alpha: float) -> PredictionSet:
    """Set admitting categories in the order of ``o`` when ``theta`` is known.

    Category k is included iff the total probability of categories whose key
    is at most ``o[k]`` exceeds ``alpha``.
    """
    alpha = _check_alpha(alpha)
    theta = as_probabilities(theta)
    o = _as_keys(o, theta.size)
    return _threshold(_mass_at_or_below(o, theta, o), alpha)


def oracle_set(theta, alpha: float) -> PredictionSet:
    """Known-theta set ordered by theta itself (the smallest valid set)."""
    theta = as_probabilities(theta)
    return order_set_known_theta(theta, theta, alpha)


def conformal_set(x, o, alpha: float) -> PredictionSet:
    """Conformal set for counts ``x`` under a fixed, candidate-free ordering ``o``."""
    alpha = _check_alpha(alpha)
    return _threshold(set_pvalues(x, order=o), alpha)


def direct_set(x, alpha: float) -> PredictionSet:
    """Direct set: admit categories by decreasing candidate-augmented counts."""
    alpha = _check_alpha(alpha)
    return _threshold(set_pvalues(x), alpha)


def indirect_set(x, gamma, alpha: float) -> PredictionSet:
    """Indirect set: order by posterior counts ``x + gamma``, sum raw counts.

    Any ``gamma = c * ones(K)`` with ``c >= 0`` gives exactly the direct set.
    """
    alpha = _check_alpha(alpha)
    return _threshold(set_pvalues(x, gamma=gamma), alpha)
