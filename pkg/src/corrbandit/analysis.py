"""Ground-truth competitiveness, regret accounting and the theoretical bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import PseudoRewardTable
from .errors import ConfigError, DegenerateInstanceError

OPTIMAL, COMPETITIVE, NON_COMPETITIVE = "optimal", "competitive", "non-competitive"


@dataclass(frozen=True)
class CompetitivenessReport:
    k_star: int
    means: np.ndarray
    phi: np.ndarray  # expected pseudo-reward of each arm w.r.t. k_star
    pseudo_gap: np.ndarray
    labels: tuple[str, ...]

    @property
    def C(self) -> int:
        return sum(lab != NON_COMPETITIVE for lab in self.labels)

    @property
    def gaps(self) -> np.ndarray:
        return self.means[self.k_star] - self.means

    def to_text(self) -> str:
        lines = ["arm mu phi pseudo_gap label"]
        for k, lab in enumerate(self.labels):
            lines.append(f"{k + 1} {self.means[k]:.6f} {self.phi[k]:.6f} {self.pseudo_gap[k]:.6f} {lab}")
        lines.append(f"C = {self.C}")
        return "\n".join(lines) + "\n"


def optimal_arm(means) -> int:
    means = np.asarray(means, dtype=float)
    best = np.flatnonzero(np.isclose(means, means.max(), rtol=0, atol=1e-12))
    if len(best) != 1:
        raise DegenerateInstanceError(f"optimal arm is not unique: arms {[int(b) + 1 for b in best]} tie")
    return int(best[0])


def classify_arms(means, table: PseudoRewardTable, pmf_kstar) -> CompetitivenessReport:
    """Label every arm from the true means and the optimal arm's reward pmf.

    ``pmf_kstar`` gives the probability of each column of the optimal arm in
    ``table`` (its discrete values, or its bins for continuous domains).
    """
    means = np.asarray(means, dtype=float)
    k_star = optimal_arm(means)
    pmf = np.asarray(pmf_kstar, dtype=float)
    m = table.sizes[k_star]
    if abs(pmf.sum() - 1) > 1e-6 or np.any(pmf[m:] > 0):
        raise ConfigError("optimal-arm pmf must sum to 1 over that arm's reward grid")
    phi = table.values[:, k_star, :m] @ pmf[:m]
    phi[k_star] = means[k_star]
    pseudo_gap = means[k_star] - phi
    labels = tuple(
        OPTIMAL if k == k_star else (NON_COMPETITIVE if pseudo_gap[k] > 0 else COMPETITIVE)
        for k in range(len(means))
    )
    return CompetitivenessReport(k_star, means, phi, pseudo_gap, labels)


def classify_instance(env, table: PseudoRewardTable) -> CompetitivenessReport:
    means = env.true_means()
    k_star = optimal_arm(means)
    return classify_arms(means, table, env.reward_pmf(k_star, table))


@dataclass
class RegretTrace:
    """Per-round pseudo-regret of one trial."""

    K: int
    increments: list[float] = field(default_factory=list)
    cumulative: list[float] = field(default_factory=list)
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.zeros(self.K, dtype=np.int64)

    @property
    def t(self) -> int:
        return len(self.increments)

    @property
    def total(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0


def record_pull(trace: RegretTrace, means, arm: int) -> RegretTrace:
    means = np.asarray(means, dtype=float)
    gap = float(means.max() - means[arm])
    trace.increments.append(gap)
    trace.cumulative.append(trace.total + gap)
    trace.counts[arm] += 1
    return trace


def t0_threshold(K: int, delta_min: float, pseudo_gap: float) -> int:
    """Smallest integer tau >= 2 with min(gaps) >= 4 sqrt(2 K ln(tau) / tau)."""
    if delta_min <= 0 or pseudo_gap <= 0:
        raise ConfigError("t0 needs positive gaps")
    g = min(delta_min, pseudo_gap)

    def ok(tau):
        return g >= 4.0 * math.sqrt(2.0 * K * math.log(tau) / tau)

    if ok(2):
        return 2
    # ln(tau)/tau decreases for tau >= 3, so the condition is monotone from here
    lo, hi = 3, 3
    while not ok(hi):
        lo, hi = hi + 1, hi * 2
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _inv_square_sum(a: int, b: int) -> float:
    """sum_{t=a}^{b} t^-2 for 1 <= a."""
    if b < a:
        return 0.0
    return float(special.zeta(2, a) - special.zeta(2, b + 1))


def _inv_cube_sum(b: int) -> float:
    if b < 1:
        return 0.0
    return float(special.zeta(3, 1) - special.zeta(3, b + 1))


def bound_noncompetitive_pulls(K: int, T: int, t0: int) -> float:
    """Upper bound on E[n_k(T)] for a non-competitive arm."""
    start = K * t0
    middle = 2.0 * K ** 5 * _inv_square_sum(start, T)  # K^3 * 2 (t/K)^-2
    return K * t0 + middle + 3.0 * _inv_cube_sum(T)


def _exp_tail_sum(K: int, T: int, delta_min: float) -> float:
    """sum_{t=1}^{T} 2 K t exp(-t delta_min^2 / (2K)), summed in chunks."""
    c = delta_min ** 2 / (2.0 * K)
    total, start, chunk = 0.0, 1, 1_000_000
    while start <= T:
        t = np.arange(start, min(T, start + chunk - 1) + 1, dtype=float)
        terms = 2.0 * K * t * np.exp(-t * c)
        total += terms.sum()
        if terms[-1] < 1e-300 and t[-1] * c > 50:
            break
        start += chunk
    return total


def bound_competitive_pulls(K: int, T: int, delta_k: float, delta_min: float) -> float:
    """Upper bound on E[n_k(T)] for a competitive sub-optimal arm."""
    if delta_k <= 0 or delta_min <= 0:
        raise ConfigError("competitive-arm bound needs positive gaps (not defined for the optimal arm)")
    return 8.0 * math.log(T) / delta_k ** 2 + (1.0 + math.pi ** 2 / 3.0) + _exp_tail_sum(K, T, delta_min)


def bound_total_regret(report: CompetitivenessReport, K: int, T: int) -> float:
    gaps = report.gaps
    sub = [k for k in range(K) if k != report.k_star]
    if not sub:
        return 0.0
    delta_min = min(gaps[k] for k in sub)
    total = 0.0
    for k in sub:
        if report.labels[k] == NON_COMPETITIVE:
            t0 = t0_threshold(K, delta_min, report.pseudo_gap[k])
            total += gaps[k] * bound_noncompetitive_pulls(K, T, t0)
        else:
            total += gaps[k] * bound_competitive_pulls(K, T, gaps[k], delta_min)
    return total


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats for finite pmfs; 0 log 0 = 0, mass where q = 0 gives inf."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("pmfs must have the same support")
    if np.any((p > 0) & (q <= 0)):
        return math.inf
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_bernoulli(p: float, q: float) -> float:
    return kl_divergence([p, 1.0 - p], [q, 1.0 - q])


def lower_bound_rate(report: CompetitivenessReport, divergences: dict[int, float]) -> float:
    """liminf E[Reg(T)] / log T for the latent-source model.

    ``divergences[k]`` is KL(f_k || f~_k) to an alternative instance in which
    arm k becomes optimal; building that instance is up to the caller.
    """
    if report.C <= 1:
        return 0.0
    rates = [report.gaps[k] / divergences[k] for k in range(len(report.labels))
             if report.labels[k] == COMPETITIVE and k in divergences]
    return max(rates, default=0.0)
