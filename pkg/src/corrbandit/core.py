"""Reward domains, pseudo-reward tables and per-trial arm statistics.

Arms are indexed from 0 in the Python API. Text formats written by this
package (tables, reports, CSV) use 1-based arm labels.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Tolerance used to match an observed reward against a discrete value list.
MATCH_TOL = 1e-9


@dataclass(frozen=True)
class RewardDomain:
    """Reward support of a single arm.

    A discrete domain is an ordered tuple of values; a continuous one is an
    interval ``[lo, hi]``. ``B`` is the maximum reward any arm can produce and
    is what missing pseudo-rewards are padded with.
    """

    kind: str
    B: float
    values: tuple[float, ...] = ()
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.B <= 0:
            raise ConfigError(f"max reward B must be positive, got {self.B}")
        if self.kind == "discrete":
            if not self.values:
                raise ConfigError("discrete domain needs at least one value")
            vals = tuple(float(v) for v in self.values)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError("discrete domain values must be strictly increasing")
            if vals[0] < 0 or vals[-1] > self.B + MATCH_TOL:
                raise ConfigError(f"discrete values must lie in [0, {self.B}]")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "lo", vals[0])
            object.__setattr__(self, "hi", vals[-1])
        elif self.kind == "continuous":
            if not self.lo < self.hi:
                raise ConfigError(f"continuous domain needs lo < hi, got [{self.lo}, {self.hi}]")
            if self.hi > self.B + MATCH_TOL:
                raise ConfigError(f"continuous domain upper end {self.hi} exceeds B={self.B}")
        else:
            raise ConfigError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def discrete(cls, values: Sequence[float], B: float | None = None) -> "RewardDomain":
        values = tuple(sorted(float(v) for v in values))
        return cls("discrete", B=float(values[-1] if B is None else B), values=values)

    @classmethod
    def continuous(cls, lo: float, hi: float, B: float | None = None) -> "RewardDomain":
        return cls("continuous", B=float(hi if B is None else B), lo=float(lo), hi=float(hi))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def is_binary(self) -> bool:
        return self.is_discrete and set(self.values) <= {0.0, 1.0}

    def contains(self, r: float) -> bool:
        if self.is_discrete:
            vals = np.asarray(self.values)
            return bool(np.any(np.abs(vals - r) <= MATCH_TOL))
        return self.lo - MATCH_TOL <= r <= self.hi + MATCH_TOL

    def check(self, r: float) -> None:
        if not np.isfinite(r) or not self.contains(r):
            raise DomainError(f"reward {r!r} is outside the arm's domain {self.describe()}")

    def describe(self) -> str:
        if self.is_discrete:
            return "{" + ", ".join(f"{v:g}" for v in self.values) + "}"
        return f"[{self.lo:g}, {self.hi:g}]"


class PseudoRewardTable:
    """The K x K family of pseudo-reward functions s(l, k)(r).

    Every column ``k`` is tabulated over a grid of arm ``k``'s rewards. For a
    discrete domain the grid is the value list itself. For a continuous
    domain the grid is a set of bin edges and each cell holds a value valid for
    every reward in the bin. ``values[l, k, j]`` is the pseudo-reward of arm
    ``l`` when arm ``k`` returned the ``j``-th grid reward (or a reward in the
    ``j``-th bin). Unused trailing cells are filled with ``B``.

    Values are clamped to ``B`` on construction. The diagonal is never read
    from storage: ``entry(k, k, r)`` is ``r``.
    """

    def __init__(self, domains: Sequence[RewardDomain], values, edges: Sequence | None = None):
        self.domains = tuple(domains)
        self.K = len(self.domains)
        if self.K == 0:
            raise ConfigError("a pseudo-reward table needs at least one arm")
        self.B = max(d.B for d in self.domains)
        values = np.array(values, dtype=float)
        if values.ndim != 3 or values.shape[:2] != (self.K, self.K):
            raise ConfigError(f"pseudo-reward array must have shape (K, K, M), got {values.shape}")
        if np.isnan(values).any():
            raise ConfigError("pseudo-reward cells must all be defined; use B for unknown entries")

        self._edges: list[np.ndarray | None] = []
        sizes = []
        for k, dom in enumerate(self.domains):
            if dom.is_discrete:
                self._edges.append(None)
                sizes.append(len(dom.values))
            else:
                if edges is None or edges[k] is None:
                    raise ConfigError(f"continuous arm {k} needs bin edges")
                e = np.asarray(edges[k], dtype=float)
                if e.ndim != 1 or len(e) < 2 or np.any(np.diff(e) <= 0):
                    raise ConfigError(f"bin edges for arm {k} must be strictly increasing")
                self._edges.append(e)
                sizes.append(len(e) - 1)
        self.sizes = tuple(sizes)
        if values.shape[2] < max(sizes):
            raise ConfigError("pseudo-reward array is narrower than an arm's reward grid")

        floor = min(0.0, min(d.lo for d in self.domains))
        values = np.clip(values, floor, self.B)
        for k, m in enumerate(sizes):
            values[:, k, m:] = self.B
            values[k, k, :m] = self._grid_points(k)
        values.setflags(write=False)
        self.values = values

    def _grid_points(self, k: int) -> np.ndarray:
        dom = self.domains[k]
        if dom.is_discrete:
            return np.asarray(dom.values)
        e = self._edges[k]
        return 0.5 * (e[:-1] + e[1:])

    def grid(self, k: int) -> np.ndarray:
        """Grid rewards of arm k: the discrete values, or bin midpoints."""
        return self._grid_points(k)

    def edges(self, k: int) -> np.ndarray | None:
        return self._edges[k]

    def column_index(self, k: int, r: float) -> int:
        return int(self.column_indices(k, np.asarray([r]))[0])

    def column_indices(self, k: int, rewards) -> np.ndarray:
        """Grid cell of every reward in ``rewards`` (all observed from arm k)."""
        rewards = np.asarray(rewards, dtype=float)
        dom = self.domains[k]
        if dom.is_discrete:
            vals = np.asarray(dom.values)
            idx = np.clip(np.searchsorted(vals, rewards), 0, len(vals) - 1)
            lower = np.clip(idx - 1, 0, len(vals) - 1)
            use_lower = np.abs(vals[lower] - rewards) < np.abs(vals[idx] - rewards)
            idx = np.where(use_lower, lower, idx)
            bad = np.abs(vals[idx] - rewards) > MATCH_TOL
        else:
            e = self._edges[k]
            idx = np.clip(np.searchsorted(e, rewards, side="right") - 1, 0, len(e) - 2)
            bad = (rewards < e[0] - MATCH_TOL) | (rewards > e[-1] + MATCH_TOL)
        if np.any(bad | ~np.isfinite(rewards)):
            r = rewards[bad | ~np.isfinite(rewards)][0]
            raise DomainError(f"reward {r!r} is outside arm {k}'s domain {dom.describe()}")
        return idx.astype(np.intp)

    def entry(self, ell: int, k: int, r: float) -> float:
        """s(ell, k)(r)."""
        if ell == k:
            self.domains[k].check(r)
            return float(r)
        return float(self.values[ell, k, self.column_index(k, r)])

    def row(self, k: int, r: float) -> np.ndarray:
        """Pseudo-rewards of every arm given that arm k returned r (diagonal = r)."""
        out = self.values[:, k, self.column_index(k, r)].copy()
        out[k] = r
        return out

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_function(cls, domains: Sequence[RewardDomain], fn: Callable[[int, int, float], float],
                      edges: Sequence | None = None) -> "PseudoRewardTable":
        """Tabulate ``fn(l, k, r)`` over each arm's reward grid."""
        probe = cls.constant(domains, edges=edges)
        vals = np.array(probe.values)
        for k in range(probe.K):
            for j, r in enumerate(probe.grid(k)):
                for ell in range(probe.K):
                    if ell != k:
                        vals[ell, k, j] = fn(ell, k, float(r))
        return cls(domains, vals, edges=edges)

    @classmethod
    def constant(cls, domains: Sequence[RewardDomain], value: float | None = None,
                 edges: Sequence | None = None) -> "PseudoRewardTable":
        """Table with every off-diagonal cell equal to ``value`` (default B)."""
        B = max(d.B for d in domains)
        K = len(domains)
        m = []
        for k, d in enumerate(domains):
            m.append(len(d.values) if d.is_discrete else len(edges[k]) - 1)
        return cls(domains, np.full((K, K, max(m)), B if value is None else value), edges=edges)

    @classmethod
    def from_columns(cls, domains: Sequence[RewardDomain],
                     columns: dict[tuple[int, int], Sequence[float]]) -> "PseudoRewardTable":
        """Build a discrete table from ``{(l, k): [s(l,k)(v) for v in domain k]}``.

        Pairs that are not listed are padded with B.
        """
        table = cls.constant(domains)
        vals = np.array(table.values)
        for (ell, k), col in columns.items():
            col = np.asarray(col, dtype=float)
            if len(col) != table.sizes[k]:
                raise ConfigError(f"column ({ell}, {k}) has {len(col)} entries, expected {table.sizes[k]}")
            vals[ell, k, : len(col)] = col
        return cls(domains, vals)

    # -- text format ------------------------------------------------------

    def to_text(self) -> str:
        """Plain-text form: header ``K B`` then ``l k r s`` lines (1-based arms)."""
        if not all(d.is_discrete for d in self.domains):
            raise ConfigError("only tables over discrete reward domains can be serialized")
        lines = [f"{self.K} {self.B:.17g}"]
        for ell in range(self.K):
            for k in range(self.K):
                for j, r in enumerate(self.domains[k].values):
                    s = r if ell == k else self.values[ell, k, j]
                    lines.append(f"{ell + 1} {k + 1} {r:.17g} {s:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PseudoRewardTable":
        rows = [ln.split("#", 1)[0].split() for ln in io.StringIO(text)]
        rows = [r for r in rows if r]
        if not rows or len(rows[0]) != 2:
            raise ConfigError("pseudo-reward file must start with a 'K B' header")
        try:
            K, B = int(rows[0][0]), float(rows[0][1])
            cells = [(int(a) - 1, int(b) - 1, float(r), float(s)) for a, b, r, s in rows[1:]]
        except ValueError as exc:
            raise ConfigError(f"malformed pseudo-reward file: {exc}") from None
        support: list[set[float]] = [set() for _ in range(K)]
        for ell, k, r, _ in cells:
            if not (0 <= ell < K and 0 <= k < K):
                raise ConfigError(f"arm index out of range in line ({ell + 1}, {k + 1})")
            support[k].add(r)
        if any(not s for s in support):
            raise ConfigError("every arm needs at least one reward value in the table")
        domains = [RewardDomain.discrete(sorted(s), B=B) for s in support]
        table = cls.constant(domains)
        vals = np.array(table.values)
        seen = np.zeros(vals.shape, dtype=bool)
        for ell, k, r, s in cells:
            j = table.column_index(k, r)
            vals[ell, k, j] = s
            seen[ell, k, j] = True
        for k, m in enumerate(table.sizes):
            seen[:, k, m:] = True
            seen[k, k, :] = True
        if not seen.all():
            ell, k, j = np.argwhere(~seen)[0]
            raise ConfigError(f"missing pseudo-reward cell ({ell + 1}, {k + 1}, {domains[k].values[j]:g}); "
                              "write B explicitly for unknown entries")
        return cls(domains, vals)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "PseudoRewardTable":
        return cls.from_text(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, PseudoRewardTable):
            return NotImplemented
        same_edges = all(
            (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in zip(self._edges, other._edges)
        )
        return (self.domains == other.domains and same_edges
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"PseudoRewardTable(K={self.K}, B={self.B:g})"


@dataclass(frozen=True)
class PullRecord:
    t: int
    arm: int
    reward: float


@dataclass
class ArmEstimators:
    """Running pull counts, empirical means and empirical pseudo-rewards.

    ``phi[l, k]`` is the running mean of s(l, k)(r) over the rewards seen from
    arm k. The diagonal mirrors ``mu``.
    """

    K: int
    counts: np.ndarray = field(init=False)
    mu: np.ndarray = field(init=False)
    phi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.zeros(self.K, dtype=np.int64)
        self.mu = np.zeros(self.K)
        self.phi = np.zeros((self.K, self.K))

    @property
    def t(self) -> int:
        return int(self.counts.sum())

    def copy(self) -> "ArmEstimators":
        new = ArmEstimators(self.K)
        new.counts = self.counts.copy()
        new.mu = self.mu.copy()
        new.phi = self.phi.copy()
        return new


def update_estimators(est: ArmEstimators, table: PseudoRewardTable, rec: PullRecord) -> ArmEstimators:
    """Fold one pull into ``est`` in place and return it."""
    k = rec.arm
    if not 0 <= k < est.K:
        raise DomainError(f"arm {k} out of range for K={est.K}")
    table.domains[k].check(rec.reward)
    pseudo = table.values[:, k, table.column_index(k, rec.reward)]
    est.counts[k] += 1
    n = est.counts[k]
    est.mu[k] += (rec.reward - est.mu[k]) / n
    est.phi[:, k] += (pseudo - est.phi[:, k]) / n
    est.phi[k, k] = est.mu[k]
    return est


def significant_mask(counts, t: int) -> np.ndarray:
    """Arms with at least t/K pulls (and at least one), in integer arithmetic."""
    counts = np.asarray(counts)
    K = counts.shape[-1]
    return (counts * K >= t) & (counts >= 1)


def significant_set(est: ArmEstimators, t: int, K: int | None = None) -> set[int]:
    K = est.K if K is None else K
    counts = est.counts
    return {k for k in range(K) if counts[k] * K >= t and counts[k] >= 1}
