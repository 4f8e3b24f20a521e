"""Nonparametric comparison pipeline: rank tests, effect sizes with standard
interpretation thresholds, Benjamini-Hochberg adjustment, and bootstrap power.

The two rank tests defer to scipy for the heavy lifting; the mode switch
(exact enumeration for small tie-free samples, tie-corrected normal
approximation with continuity correction otherwise) is pinned here so results
are reproducible regardless of scipy's own auto heuristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .errors import NumericError

EXACT_MWU_MAX_N = 16

CLIFFS_DELTA_THRESHOLDS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))
ETA_SQUARED_THRESHOLDS = ((0.01, "negligible"), (0.06, "small"), (0.14, "medium"))


class TestOutcome(NamedTuple):
    statistic: float
    p_value: float


class EffectSize(NamedTuple):
    value: float
    interpretation: str


def _interpret(value: float, thresholds) -> str:
    magnitude = abs(value)
    for cutoff, label in thresholds:
        if magnitude < cutoff:
            return label
    return "large"


def interpret_cliffs_delta(delta: float) -> str:
    return _interpret(delta, CLIFFS_DELTA_THRESHOLDS)


def interpret_eta_squared(eta2: float) -> str:
    return _interpret(eta2, ETA_SQUARED_THRESHOLDS)


def _clip_p(p: float) -> float:
    # A p of exactly 0 only arises from tail underflow; keep it in (0, 1].
    return min(max(p, math.ulp(0.0)), 1.0)


def _clean_sample(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sample")
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} contains non-finite values")
    return arr


def mann_whitney_u(x, y) -> TestOutcome:
    """Two-sided Mann-Whitney U-test.

    Exact enumeration when the combined sample is small (< = 16) and tie-free;
    otherwise the tie-corrected normal approximation with continuity
    correction. The statistic is U of the first sample.
    """
    xa = _clean_sample(x, "x")
    ya = _clean_sample(y, "y")
    pooled = np.concatenate([xa, ya])
    if np.all(pooled == pooled[0]):
        return TestOutcome(xa.size * ya.size / 2.0, 1.0)
    tie_free = np.unique(pooled).size == pooled.size
    method = "exact" if (pooled.size <= EXACT_MWU_MAX_N and tie_free) else "asymptotic"
    res = scipy_stats.mannwhitneyu(xa, ya, alternative="two-sided", method=method, use_continuity=True)
    return TestOutcome(float(res.statistic), _clip_p(float(res.pvalue)))


def kruskal_wallis(groups: Sequence) -> TestOutcome:
    """Kruskal-Wallis H with tie correction; p from chi-squared with k-1 dof."""
    if len(groups) < 2:
        raise ValueError("kruskal_wallis needs at least 2 groups")
    cleaned = [_clean_sample(g, f"group {i}") for i, g in enumerate(groups)]
    pooled = np.concatenate(cleaned)
    if np.all(pooled == pooled[0]):
        return TestOutcome(0.0, 1.0)
    res = scipy_stats.kruskal(*cleaned)
    return TestOutcome(float(res.statistic), _clip_p(float(res.pvalue)))


def cliffs_delta(x, y) -> EffectSize:
    """Cliff's delta: P(x > y) - P(x < y) over all cross pairs, with label."""
    xa = _clean_sample(x, "x")
    ya = _clean_sample(y, "y")
    # sign() gives +1/0/-1 per pair, so the mean is exactly (#gt - #lt) / (n*m).
    delta = float(np.sign(xa[:, None] - ya[None, :]).mean())
    return EffectSize(delta, interpret_cliffs_delta(delta))


def eta_squared(h: float, k: int, n: int) -> EffectSize:
    """Effect size for a Kruskal-Wallis H over k groups and n observations."""
    if k < 2:
        raise ValueError("eta_squared needs k >= 2 groups")
    if n <= k:
        raise ValueError("eta_squared needs more observations than groups")
    value = max(0.0, (h - k + 1) / (n - k))
    return EffectSize(value, interpret_eta_squared(value))


def benjamini_hochberg(p_values: Sequence[float]) -> list[float]:
    """Step-up FDR adjustment; output order matches the input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("benjamini_hochberg needs a non-empty 1-D list")
    if np.any(p <= 0) or np.any(p > 1):
        raise NumericError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    return adjusted.tolist()


_POWER_TESTS = {
    "mann_whitney_u": lambda groups: mann_whitney_u(groups[0], groups[1]),
    "kruskal_wallis": kruskal_wallis,
}


def bootstrap_power(
    groups: Sequence,
    test: str,
    n_boot: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> float:
    """Fraction of with-replacement resamples whose (unadjusted) p < alpha.

    Each group is resampled to its own size; every iteration draws from its
    own (seed, iteration) stream so the estimate does not depend on
    execution order.
    """
    if test not in _POWER_TESTS:
        raise ValueError(f"unknown test {test!r}")
    if test == "mann_whitney_u" and len(groups) != 2:
        raise ValueError("mann_whitney_u power needs exactly 2 groups")
    cleaned = [_clean_sample(g, f"group {i}") for i, g in enumerate(groups)]
    run = _POWER_TESTS[test]
    run(cleaned)  # fail fast on invalid inputs before the loop
    hits = 0
    for i in range(n_boot):
        rng = np.random.default_rng([seed, i])
        resampled = [g[rng.integers(0, g.size, g.size)] for g in cleaned]
        if run(resampled).p_value < alpha:
            hits += 1
    return hits / n_boot


@dataclass(frozen=True)
class RankedGroup:
    group_id: str
    mean: float
    rank: int


def rank_groups(group_means: dict[str, float], tie_tolerance: float = 1e-9) -> list[RankedGroup]:
    """Competition ranking by mean, descending; means within ``tie_tolerance``
    of the current run's leader share its rank."""
    if len(group_means) < 2:
        raise ValueError("rank_groups needs at least 2 groups")
    ordered = sorted(group_means.items(), key=lambda kv: (-kv[1], kv[0]))
    ranked = []
    run_rank = 1
    leader = ordered[0][1]
    for pos, (gid, mean) in enumerate(ordered, start=1):
        if leader - mean >= tie_tolerance:
            run_rank = pos
            leader = mean
        ranked.append(RankedGroup(group_id=gid, mean=mean, rank=run_rank))
    return ranked


@dataclass(frozen=True)
class TestResult:
    """One statistical comparison row."""

    test_name: str
    metric: str
    method_id: str
    statistic: float
    p_raw: float
    p_adjusted: float
    effect_size: float
    effect_kind: str
    interpretation: str
    power: float
    group_ids: tuple[str, ...]

    def __post_init__(self):
        if self.test_name not in ("mann_whitney_u", "kruskal_wallis"):
            raise ValueError(f"unknown test name {self.test_name!r}")
        if not 0.0 < self.p_raw <= 1.0 or not 0.0 < self.p_adjusted <= 1.0:
            raise NumericError("p-values must lie in (0, 1]")
        if self.p_adjusted + 1e-15 < self.p_raw:
            raise NumericError("adjusted p cannot undercut the raw p")
        if self.effect_kind == "cliffs_delta" and not -1.0 <= self.effect_size <= 1.0:
            raise NumericError("cliffs_delta must lie in [-1, 1]")
        if self.effect_kind == "eta_squared" and not 0.0 <= self.effect_size <= 1.0:
            raise NumericError("eta_squared must lie in [0, 1]")
        if not 0.0 <= self.power <= 1.0:
            raise NumericError("power must lie in [0, 1]")

    @property
    def significant(self) -> bool:
        return self.p_adjusted < 0.05
