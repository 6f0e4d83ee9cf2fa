"""Base bandit policies and the correlated (C-Bandit) wrapper.

This module is the readable single-trial reference. ``engine`` runs the
same decision rule vectorized over many trials and is tested to reproduce
these arm sequences exactly.

Every round a stochastic policy draws one noise value per arm, whether or not
the arm is a candidate, so that a policy and its correlated variant fed the
same stream see the same draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import ArmEstimators, PseudoRewardTable, PullRecord, significant_set, update_estimators
from .errors import ConfigError, UnsupportedDomainError

BASES = ("ucb", "ts", "ts-beta")


def ucb_index(mu_hat: float, n: int, t: int, B: float) -> float:
    if n == 0:
        return math.inf
    return mu_hat + B * math.sqrt(2.0 * math.log(t) / n)


def ts_gaussian_sample(mu_hat: float, n: int, B: float, beta: float, rng: np.random.Generator) -> float:
    """Draw from N(mu_hat, beta * B / (n + 1))."""
    if beta <= 0:
        raise ConfigError(f"TS variance scale beta must be positive, got {beta}")
    return mu_hat + math.sqrt(beta * B / (n + 1)) * rng.standard_normal()


def _beta_params(mu_hat, n):
    successes = np.rint(np.asarray(n) * np.asarray(mu_hat))
    return successes + 1.0, np.asarray(n) - successes + 1.0


def ts_beta_sample(mu_hat: float, n: int, rng: np.random.Generator) -> float:
    """Draw from Beta(successes + 1, failures + 1) for a {0, 1} reward history."""
    if n and abs(n * mu_hat - round(n * mu_hat)) > 1e-6:
        raise UnsupportedDomainError("Beta Thompson sampling needs binary rewards")
    a, b = _beta_params(mu_hat, n)
    return float(special.betaincinv(a, b, rng.random()))


@dataclass(frozen=True)
class CompetitiveSetSnapshot:
    t: int
    significant: frozenset[int]
    k_emp: int
    competitive: frozenset[int]

    @property
    def candidates(self) -> frozenset[int]:
        return self.competitive | {self.k_emp}


def compute_competitive_snapshot(est: ArmEstimators, t: int, K: int | None = None,
                                 lower: ArmEstimators | None = None,
                                 self_compare: bool = False) -> CompetitiveSetSnapshot:
    """Empirically competitive arms after ``t`` pulls.

    Arm k is competitive when min over significant arms l of phi_hat(k, l)
    is at least the best significant empirical mean. By default l = k is
    left out of the min so that an all-B table leaves every arm competitive;
    ``self_compare=True`` keeps it.

    ``lower`` holds running means of pseudo *lower* bounds. When given, the
    threshold becomes the largest of those among significant pairs (and never
    less than the best empirical mean).
    """
    K = est.K if K is None else K
    sig = significant_set(est, t, K)
    if not sig:
        raise ValueError(f"no significant arm at t={t}; every arm needs a pull first")
    k_emp = min(sig, key=lambda k: (-est.mu[k], k))
    threshold = est.mu[k_emp]
    if lower is not None:
        for i in sig:
            for j in sig:
                if i != j:
                    threshold = max(threshold, lower.phi[i, j])
    competitive = set()
    for k in range(K):
        refs = [ell for ell in sig if self_compare or ell != k]
        tightest = min((est.phi[k, ell] for ell in refs), default=math.inf)
        if tightest >= threshold:
            competitive.add(k)
    return CompetitiveSetSnapshot(t, frozenset(sig), k_emp, frozenset(competitive))


@dataclass
class PolicyState:
    """Everything one policy carries through one trial."""

    table: PseudoRewardTable
    rng: np.random.Generator
    beta: float = 1.0
    lower_table: PseudoRewardTable | None = None
    self_compare: bool = False
    est: ArmEstimators = field(init=False)
    lower_est: ArmEstimators | None = field(init=False, default=None)
    last_snapshot: CompetitiveSetSnapshot | None = field(init=False, default=None)

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigError(f"TS variance scale beta must be positive, got {self.beta}")
        self.est = ArmEstimators(self.table.K)
        if self.lower_table is not None:
            self.lower_est = ArmEstimators(self.table.K)

    @property
    def B(self) -> float:
        return self.table.B

    def observe(self, rec: PullRecord) -> None:
        update_estimators(self.est, self.table, rec)
        if self.lower_est is not None:
            update_estimators(self.lower_est, self.lower_table, rec)


def check_base(base: str, table: PseudoRewardTable) -> None:
    if base not in BASES:
        raise ConfigError(f"unknown base policy {base!r}; choose from {BASES}")
    if base == "ts-beta" and not all(d.is_binary for d in table.domains):
        raise UnsupportedDomainError("Beta Thompson sampling needs {0, 1} reward domains")


def _draw_noise(state: PolicyState, base: str) -> np.ndarray | None:
    K = state.est.K
    if base == "ts":
        return state.rng.standard_normal(K)
    if base == "ts-beta":
        return state.rng.random(K)
    return None


def _indices(state: PolicyState, base: str, t: int, noise) -> np.ndarray:
    """Per-arm index at round t, computed from the first t - 1 pulls."""
    est = state.est
    if base == "ucb":
        return est.mu + state.B * np.sqrt(2.0 * np.log(t - 1) / est.counts)
    if base == "ts":
        return est.mu + np.sqrt(state.beta * state.B / (est.counts + 1)) * noise
    a, b = _beta_params(est.mu, est.counts)
    return special.betaincinv(a, b, noise)


def _argmax_over(values: np.ndarray, candidates) -> int:
    best, best_k = -math.inf, None
    for k in sorted(candidates):
        if best_k is None or values[k] > best:
            best, best_k = values[k], k
    return best_k


def select_arm_cbandit(state: PolicyState, base: str, t: int) -> int:
    """Arm for round t (1-based): round-robin for t <= K, then base policy over candidates."""
    noise = _draw_noise(state, base)
    K = state.est.K
    if t <= K:
        return t - 1
    snap = compute_competitive_snapshot(state.est, t - 1, K, state.lower_est, state.self_compare)
    state.last_snapshot = snap
    return _argmax_over(_indices(state, base, t, noise), snap.candidates)


def select_arm_base(state: PolicyState, base: str, t: int) -> int:
    noise = _draw_noise(state, base)
    K = state.est.K
    if t <= K:
        return t - 1
    return _argmax_over(_indices(state, base, t, noise), range(K))


@dataclass(frozen=True)
class PolicySpec:
    """A named policy: base rule, correlated or not, TS scale."""

    name: str
    base: str
    correlated: bool
    beta: float = 1.0

    @classmethod
    def parse(cls, text: str, beta: float = 1.0) -> "PolicySpec":
        """Accepts ucb, ts, ts-beta, c-ucb, c-ts, c-ts-beta (case-insensitive)."""
        name = text.strip().lower()
        correlated = name.startswith("c-")
        base = name[2:] if correlated else name
        if base not in BASES:
            raise ConfigError(f"unknown policy {text!r}")
        return cls(name, base, correlated, beta)

    @property
    def label(self) -> str:
        return self.name.upper().replace("TS-BETA", "TS-Beta")

    def new_state(self, table: PseudoRewardTable, rng: np.random.Generator, **kw) -> PolicyState:
        check_base(self.base, table)
        return PolicyState(table, rng, self.beta, **kw)

    def select(self, state: PolicyState, t: int) -> int:
        if self.correlated:
            return select_arm_cbandit(state, self.base, t)
        return select_arm_base(state, self.base, t)


def run_trial(policy: PolicySpec, table: PseudoRewardTable, rewards: np.ndarray,
              rng: np.random.Generator, **state_kw) -> np.ndarray:
    """Play ``policy`` against a realized ``(T, K)`` reward matrix; returns the arm sequence."""
    state = policy.new_state(table, rng, **state_kw)
    T = rewards.shape[0]
    arms = np.empty(T, dtype=np.int64)
    for t in range(1, T + 1):
        k = policy.select(state, t)
        arms[t - 1] = k
        state.observe(PullRecord(t, k, float(rewards[t - 1, k])))
    return arms
