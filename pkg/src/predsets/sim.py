"""Monte Carlo harness for set cardinality and coverage in a single area."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_probabilities, set_pvalues

__all__ = [
    "METHODS",
    "SimConfig",
    "SimResult",
    "make_low_entropy_theta",
    "replication_rng",
    "run_cardinality_experiment",
    "run_coverage_experiment",
    "results_table",
]

METHODS = ("direct", "indirect", "oracle-order")


def make_low_entropy_theta(K: int, epsilon: float = 1e-4) -> np.ndarray:
    """Probability vector with nearly all mass on the first ceil(K/4) categories.

    The heavy categories share ``1 - epsilon`` with weights H, H-1, ..., 1
    (H = ceil(K/4)); the other ``K - H`` categories split ``epsilon`` evenly.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 0.5)")
    H = math.ceil(K / 4)
    theta = np.zeros(K)
    if K == H:
        theta[:] = 1.0
        return theta
    weights = np.arange(H, 0, -1, dtype=float)
    theta[:H] = (1 - epsilon) * weights / weights.sum()
    theta[H:] = epsilon / (K - H)
    return theta


@dataclass(frozen=True)
class SimConfig:
    """One simulation setting.

    ``theta_spec`` is ``("low-entropy", eps)``, ``("explicit", theta)`` or
    ``("uniform",)``.  ``prior_spec`` is ``("oracle-scaled", scale)``,
    ``("uniform", c)`` or ``("explicit", gamma)``.
    """

    K: int
    N: int
    alpha: float = 0.05
    replications: int = 2000
    theta_spec: tuple = ("low-entropy", 1e-4)
    prior_spec: tuple = ("oracle-scaled", 10.0)
    seed: int = 20230501

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise ValueError("K and N must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        kind = self.theta_spec[0]
        if kind == "low-entropy":
            if not 0 < self.theta_spec[1] < 0.5:
                raise ValueError("epsilon must lie in (0, 0.5)")
        elif kind == "explicit":
            if len(self.theta_spec[1]) != self.K:
                raise ValueError("explicit theta must have length K")
            as_probabilities(self.theta_spec[1])
        elif kind != "uniform":
            raise ValueError(f"unknown theta spec {kind!r}")
        kind = self.prior_spec[0]
        if kind == "oracle-scaled":
            if not self.prior_spec[1] > 0:
                raise ValueError("prior scale must be positive")
        elif kind == "uniform":
            if not self.prior_spec[1] >= 0:
                raise ValueError("uniform prior constant must be non-negative")
        elif kind == "explicit":
            g = np.asarray(self.prior_spec[1], dtype=float)
            if g.shape != (self.K,) or np.any(g < 0):
                raise ValueError("explicit gamma must be non-negative with length K")
        else:
            raise ValueError(f"unknown prior spec {kind!r}")

    def theta(self) -> np.ndarray:
        kind = self.theta_spec[0]
        if kind == "low-entropy":
            return make_low_entropy_theta(self.K, self.theta_spec[1])
        if kind == "explicit":
            return as_probabilities(self.theta_spec[1])
        return np.full(self.K, 1.0 / self.K)

    def gamma(self, theta: np.ndarray | None = None) -> np.ndarray:
        kind = self.prior_spec[0]
        if kind == "oracle-scaled":
            return (self.theta() if theta is None else theta) * self.prior_spec[1]
        if kind == "uniform":
            return np.full(self.K, float(self.prior_spec[1]))
        return np.asarray(self.prior_spec[1], dtype=float)


@dataclass
class SimResult:
    config: SimConfig
    mean_cardinality: dict[str, float]
    std_dev: dict[str, float]
    coverage: dict[str, float]
    coverage_se: dict[str, float]
    ratio_indirect_direct: float
    ratio_oracle_direct: float
    replications_used: int
    cardinalities: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Independent generator for one replication, a pure function of its inputs."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def _simulate(config: SimConfig) -> SimResult:
    theta = config.theta()
    gamma = config.gamma(theta)
    R = config.replications
    cards = {m: np.empty(R, dtype=np.int64) for m in METHODS}
    hits = {m: np.zeros(R, dtype=bool) for m in METHODS}
    for r in range(R):
        rng = replication_rng(config.seed, r)
        # numpy's multinomial draws sequential binomial conditionals
        x = rng.multinomial(config.N, theta)
        y = int(rng.choice(config.K, p=theta))
        masks = {
            "direct": set_pvalues(x) > config.alpha,
            "indirect": set_pvalues(x, gamma=gamma) > config.alpha,
            "oracle-order": set_pvalues(x, order=theta) > config.alpha,
        }
        for m, mask in masks.items():
            cards[m][r] = mask.sum()
            hits[m][r] = mask[y]

    mean = {m: float(cards[m].mean()) for m in METHODS}
    sd = {m: float(cards[m].std(ddof=1)) if R > 1 else 0.0 for m in METHODS}
    cov = {m: float(hits[m].mean()) for m in METHODS}
    se = {m: math.sqrt(cov[m] * (1 - cov[m]) / R) for m in METHODS}
    return SimResult(
        config=config,
        mean_cardinality=mean,
        std_dev=sd,
        coverage=cov,
        coverage_se=se,
        ratio_indirect_direct=mean["indirect"] / mean["direct"],
        ratio_oracle_direct=mean["oracle-order"] / mean["direct"],
        replications_used=R,
        cardinalities=cards,
    )


def run_cardinality_experiment(config: SimConfig) -> SimResult:
    """Expected set cardinality of direct, indirect and oracle-ordered sets.

    Each replication draws X ~ MN(theta, N) and one predictand Y from its own
    stream, so results do not depend on how replications are scheduled.
    """
    return _simulate(config)


def run_coverage_experiment(config: SimConfig) -> SimResult:
    """Empirical P(Y in A) per method, with binomial standard errors."""
    return _simulate(config)


def results_table(results: list[SimResult] | SimResult, with_se: bool = False) -> str:
    """Plot-ready comma-separated table, one row per (setting, method).

    ``with_se`` appends a ``coverage_se`` column.
    """
    if isinstance(results, SimResult):
        results = [results]
    buf = io.StringIO()
    header = "method,K,N,alpha,mean_cardinality,sd,ratio_vs_direct,coverage"
    buf.write(header + (",coverage_se\n" if with_se else "\n"))
    for res in results:
        c = res.config
        direct = res.mean_cardinality["direct"]
        for m in METHODS:
            buf.write(
                f"{m},{c.K},{c.N},{c.alpha!r},{res.mean_cardinality[m]!r},"
                f"{res.std_dev[m]!r},{res.mean_cardinality[m] / direct!r},{res.coverage[m]!r}"
            )
            buf.write(f",{res.coverage_se[m]!r}\n" if with_se else "\n")
    return buf.getvalue()
