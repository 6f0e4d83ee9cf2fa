"""Vectorized simulation of many independent trials at once.

Trials advance in lockstep: at round t every trial picks one arm, reads its
reward from its own realization matrix and updates its own estimators. The
arithmetic mirrors ``policies`` operation for operation, so a trial run here
and the same trial run through ``policies.run_trial`` pull identical arms.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .core import PseudoRewardTable
from .policies import PolicySpec, check_base


def draw_noise(policy: PolicySpec, T: int, K: int, rng: np.random.Generator) -> np.ndarray | None:
    """The per-round, per-arm noise a stochastic policy consumes in one trial."""
    if policy.base == "ts":
        return rng.standard_normal((T, K))
    if policy.base == "ts-beta":
        return rng.random((T, K))
    return None


def column_matrix(table: PseudoRewardTable, rewards: np.ndarray) -> np.ndarray:
    """Table column of every realized reward; rewards has arms on the last axis."""
    cols = np.empty(rewards.shape, dtype=np.intp)
    for k in range(table.K):
        cols[..., k] = table.column_indices(k, rewards[..., k])
    return cols


def simulate(policy: PolicySpec, table: PseudoRewardTable, rewards: np.ndarray,
             noise: np.ndarray | None = None, lower_table: PseudoRewardTable | None = None,
             self_compare: bool = False, candidate_log: np.ndarray | None = None) -> np.ndarray:
    """Arm sequences, shape (N, T), for N trials with rewards of shape (N, T, K).

    If ``candidate_log`` is a boolean (N, T, K) array it receives, per round,
    which arms the policy was allowed to pick from.
    """
    check_base(policy.base, table)
    rewards = np.asarray(rewards, dtype=float)
    if rewards.ndim == 2:
        rewards = rewards[None]
        noise = None if noise is None else np.asarray(noise)[None]
    N, T, K = rewards.shape
    if K != table.K:
        raise ValueError(f"rewards have {K} arms but the table has {table.K}")
    if policy.base != "ucb" and (noise is None or noise.shape != rewards.shape):
        raise ValueError("stochastic policies need a noise array shaped like rewards")

    cols = column_matrix(table, rewards)
    lcols = None if lower_table is None else column_matrix(lower_table, rewards)
    S = table.values
    B = table.B
    beta = policy.beta
    rows = np.arange(N)
    off_diag = ~np.eye(K, dtype=bool)

    counts = np.zeros((N, K), dtype=np.int64)
    mu = np.zeros((N, K))
    phi = np.zeros((N, K, K))  # phi[n, l, k]
    wphi = np.zeros((N, K, K)) if lower_table is not None else None
    arms = np.empty((N, T), dtype=np.int64)
    if candidate_log is not None:
        candidate_log[...] = True

    for t in range(1, T + 1):
        if t <= K:
            arm = np.full(N, t - 1, dtype=np.int64)
        else:
            tt = t - 1
            if policy.base == "ucb":
                index = mu + B * np.sqrt(2.0 * np.log(tt) / counts)
            elif policy.base == "ts":
                index = mu + np.sqrt(beta * B / (counts + 1)) * noise[:, t - 1]
            else:
                succ = np.rint(counts * mu)
                index = special.betaincinv(succ + 1.0, counts - succ + 1.0, noise[:, t - 1])
            if policy.correlated:
                sig = (counts * K >= tt) & (counts >= 1)
                k_emp = np.argmax(np.where(sig, mu, -np.inf), axis=1)
                threshold = mu[rows, k_emp]
                if wphi is not None:
                    pair = sig[:, :, None] & sig[:, None, :] & off_diag
                    w_best = np.where(pair, wphi, -np.inf).max(axis=(1, 2))
                    threshold = np.maximum(threshold, w_best)
                # refs[n, k, l]: is phi_hat(k, l) part of arm k's min
                refs = np.broadcast_to(sig[:, None, :], (N, K, K))
                if not self_compare:
                    refs = refs & off_diag
                tightest = np.where(refs, phi, np.inf).min(axis=2)
                cand = tightest >= threshold[:, None]
                cand[rows, k_emp] = True
                index = np.where(cand, index, -np.inf)
                if candidate_log is not None:
                    candidate_log[:, t - 1] = cand
            arm = np.argmax(index, axis=1)
        arms[:, t - 1] = arm

        r = rewards[rows, t - 1, arm]
        j = cols[rows, t - 1, arm]
        counts[rows, arm] += 1
        n = counts[rows, arm]
        m = mu[rows, arm]
        mu[rows, arm] = m + (r - m) / n
        cur = phi[rows, :, arm]
        phi[rows, :, arm] = cur + (S[:, arm, j].T - cur) / n[:, None]
        phi[rows, arm, arm] = mu[rows, arm]
        if wphi is not None:
            jl = lcols[rows, t - 1, arm]
            cur = wphi[rows, :, arm]
            wphi[rows, :, arm] = cur + (lower_table.values[:, arm, jl].T - cur) / n[:, None]
            wphi[rows, arm, arm] = mu[rows, arm]
    return arms


def regret_curves(arms: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Cumulative pseudo-regret per trial and round, shape (N, T)."""
    means = np.asarray(means, dtype=float)
    gaps = means.max() - means
    return np.cumsum(gaps[arms], axis=-1)


def pull_counts(arms: np.ndarray, K: int, at: int | None = None) -> np.ndarray:
    """n_k after ``at`` rounds (default all), shape (N, K)."""
    arms = np.atleast_2d(arms)
    if at is not None:
        arms = arms[:, :at]
    return np.stack([(arms == k).sum(axis=1) for k in range(K)], axis=1)
