"""Builders that turn prior knowledge into pseudo-reward tables."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import PseudoRewardTable, RewardDomain
from .environments import LatentSourceEnvironment, TabularJointEnvironment
from .errors import ConfigError, IngestError

DEFAULT_LATENT_BINS = 1000


def from_joint_exact(env: TabularJointEnvironment) -> PseudoRewardTable:
    """Tight pseudo-rewards: the exact conditional means E[R_l | R_k = r].

    Conditioning values with zero probability get B.
    """

    def cond_mean(ell, k, r):
        hit = np.abs(env.support[:, k] - r) <= 1e-9
        mass = env.masses[hit].sum()
        if mass <= 0:
            return env.B
        return float(env.masses[hit] @ env.support[hit, ell] / mass)

    return PseudoRewardTable.from_function(env.domains, cond_mean)


def latent_pseudo_reward(env: LatentSourceEnvironment, ell: int, k: int, r: float,
                         grid_n: int = 2001) -> float:
    """max of upper_l(x) over grid points x with lower_k(x) <= r <= upper_k(x)."""
    if ell == k:
        return float(r)
    x = np.linspace(*env.latent.support, grid_n)
    arm = env.arms[k]
    feasible = (arm.lower(x) <= r) & (r <= arm.upper(x))
    if not feasible.any():
        return float(env.B)
    return float(min(np.max(env.arms[ell].upper(x[feasible])), env.B))


def from_latent_bounds(env: LatentSourceEnvironment, grid_n: int = 2001,
                       bins: int = DEFAULT_LATENT_BINS) -> PseudoRewardTable:
    """Tabulate latent-source pseudo-rewards over reward bins.

    Each arm's reward range is cut into ``bins`` equal cells. A cell's value is
    the max of upper_l over every grid x compatible with *some* reward in the
    cell, so it bounds the pointwise pseudo-reward of every reward inside it.
    """
    if grid_n < 2 or bins < 1:
        raise ConfigError("grid_n must be >= 2 and bins >= 1")
    x = np.linspace(*env.latent.support, grid_n)
    uppers = np.stack([a.upper(x) for a in env.arms])  # (K, grid_n)
    K = env.K
    edges = [np.linspace(d.lo, d.hi, bins + 1) for d in env.domains]
    vals = np.full((K, K, bins), float(env.B))
    for k, arm in enumerate(env.arms):
        lo_k, hi_k = arm.lower(x), arm.upper(x)
        e = edges[k]
        # reward cell [e_j, e_j+1] meets [lo_k(x), hi_k(x)]
        feasible = (lo_k[None, :] <= e[1:, None]) & (hi_k[None, :] >= e[:-1, None])  # (bins, grid_n)
        for ell in range(K):
            if ell == k:
                continue
            masked = np.where(feasible, uppers[ell][None, :], -np.inf)
            best = masked.max(axis=1)
            vals[ell, k] = np.where(np.isfinite(best), best, env.B)
    return PseudoRewardTable(env.domains, vals, edges=edges)


def soften_latent(m: float, delta: float, M: float) -> float:
    """Pseudo-reward from bounds that only hold with probability 1 - delta."""
    if not 0 <= delta <= 1:
        raise ConfigError("delta must be in [0, 1]")
    keep = (1 - delta) ** 2
    return keep * m + (1 - keep) * M


def soften_soft_upper(u: float, delta: float, M: float) -> float:
    """Pseudo-reward from a conditional-mean bound ``u`` valid w.p. 1 - delta."""
    if not 0 <= delta <= 1:
        raise ConfigError("delta must be in [0, 1]")
    return u * (1 - delta) + M * delta


def from_rating_matrix(matrix: np.ndarray, domains: Sequence[RewardDomain], mode: str = "mean",
                       pad_fraction: float = 0.0, buffer: float = 0.0,
                       rng: np.random.Generator | None = None) -> PseudoRewardTable:
    """Learn pseudo-rewards from a users x arms rating matrix (NaN = not rated).

    Cell (l, k, r) is the mean rating of arm l among users who rated arm k
    exactly r, optionally plus its standard deviation, plus ``buffer``. A
    seeded ``pad_fraction`` of the off-diagonal cells is then reset to B, as
    is every cell with no qualifying user.
    """
    if mode not in ("mean", "mean_plus_std"):
        raise ConfigError(f"unknown pseudo-reward mode {mode!r}")
    if not 0 <= pad_fraction <= 1:
        raise ConfigError("pad fraction must be in [0, 1]")
    if buffer < 0:
        raise ConfigError("safety buffer must be non-negative")
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0 or np.all(np.isnan(matrix)):
        raise IngestError("no training ratings to learn pseudo-rewards from")
    K = matrix.shape[1]
    if len(domains) != K:
        raise ConfigError("need one domain per rating-matrix column")
    table = PseudoRewardTable.constant(domains)
    B = table.B
    vals = np.array(table.values)
    for k in range(K):
        for j, r in enumerate(domains[k].values):
            users = np.abs(matrix[:, k] - r) <= 1e-9
            if not users.any():
                continue
            sub = matrix[users]
            for ell in range(K):
                if ell == k:
                    continue
                obs = sub[:, ell]
                obs = obs[~np.isnan(obs)]
                if obs.size == 0:
                    continue
                s = obs.mean()
                if mode == "mean_plus_std":
                    s += obs.std()
                vals[ell, k, j] = s + buffer

    if pad_fraction > 0:
        rng = np.random.default_rng() if rng is None else rng
        cells = [(ell, k, j) for k in range(K) for j in range(table.sizes[k])
                 for ell in range(K) if ell != k]
        n_pad = int(round(pad_fraction * len(cells)))
        for i in rng.choice(len(cells), size=n_pad, replace=False):
            vals[cells[i]] = B
    return PseudoRewardTable(domains, vals)


def from_ratings(train, arms, mode: str = "mean", pad_fraction: float = 0.0, buffer: float = 0.0,
                 rng: np.random.Generator | None = None, arm_mode: str = "items",
                 values: Sequence[float] | None = None, B: float = 5.0) -> PseudoRewardTable:
    """Learn pseudo-rewards from rating records.

    ``arm_mode='items'`` treats each listed item as an arm; ``'genres'`` uses
    each user's mean rating per genre, rounded to the nearest half point.
    ``values`` is the reward grid shared by all arms; by default it is the
    set of values present in ``train``.
    """
    from .data import rating_matrix

    if not train:
        raise IngestError("empty training set")
    matrix = rating_matrix(train, arms, arm_mode)
    if values is None:
        values = np.unique(matrix[~np.isnan(matrix)])
        if values.size == 0:
            raise IngestError("no training ratings fall on the selected arms")
    domain = RewardDomain.discrete(values, B=B)
    return from_rating_matrix(matrix, [domain] * len(arms), mode, pad_fraction, buffer, rng)
