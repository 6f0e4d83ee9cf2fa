"""Sampleable reward models.

Every environment can ``realize`` a ``(T, K)`` matrix of per-round rewards:
row ``t`` holds the reward each arm *would* return at round ``t``. All
policies in a trial read from the same matrix, which is how they are compared
on identical reward realizations. Only the pulled arm's entry is ever
revealed to a policy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .core import MATCH_TOL, PseudoRewardTable, RewardDomain
from .errors import ConfigError

# Latent-source expectations are taken on a uniform grid of this many points.
LATENT_GRID_N = 10_001


def realization_hash(rewards: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(rewards, dtype=float).tobytes()).hexdigest()


# --------------------------------------------------------------------------
# tabular joint pmf
# --------------------------------------------------------------------------


@dataclass
class TabularJointEnvironment:
    """Exact joint pmf over reward tuples ``(r_1, ..., r_K)``."""

    domains: tuple[RewardDomain, ...]
    support: np.ndarray  # (S, K) reward tuples
    masses: np.ndarray  # (S,)

    def __post_init__(self):
        self.domains = tuple(self.domains)
        self.support = np.atleast_2d(np.asarray(self.support, dtype=float))
        self.masses = np.asarray(self.masses, dtype=float)
        if self.support.shape != (len(self.masses), len(self.domains)):
            raise ConfigError("support must have one row per mass and one column per arm")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-9:
            raise ConfigError(f"joint masses must be non-negative and sum to 1 (sum={self.masses.sum()})")
        for k, dom in enumerate(self.domains):
            for r in self.support[:, k]:
                dom.check(r)

    @classmethod
    def from_dict(cls, domains: Sequence[RewardDomain], pmf: dict) -> "TabularJointEnvironment":
        tuples = list(pmf)
        return cls(tuple(domains), np.array(tuples, dtype=float), np.array([pmf[t] for t in tuples]))

    @property
    def K(self) -> int:
        return len(self.domains)

    @property
    def B(self) -> float:
        return max(d.B for d in self.domains)

    def sample_joint(self, rng: np.random.Generator) -> np.ndarray:
        return self.support[rng.choice(len(self.masses), p=self.masses)].copy()

    def realize(self, T: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.masses), size=T, p=self.masses)
        return self.support[idx]

    def true_means(self) -> np.ndarray:
        return self.masses @ self.support

    def marginal_pmf(self, k: int) -> np.ndarray:
        """P(R_k = v) for each value v of arm k's domain."""
        vals = np.asarray(self.domains[k].values)
        return np.array([self.masses[np.abs(self.support[:, k] - v) <= MATCH_TOL].sum() for v in vals])

    def reward_pmf(self, k: int, table: PseudoRewardTable) -> np.ndarray:
        pmf = np.zeros(table.values.shape[2])
        cols = table.column_indices(k, self.support[:, k])
        np.add.at(pmf, cols, self.masses)
        return pmf

    # text fixture format -----------------------------------------------

    def to_text(self) -> str:
        lines = [f"K {self.K}", f"B {self.B:.17g}"]
        for k, dom in enumerate(self.domains):
            lines.append(f"values {k + 1} " + " ".join(f"{v:.17g}" for v in dom.values))
        for row, m in zip(self.support, self.masses):
            lines.append(" ".join(f"{r:.17g}" for r in row) + f" : {m:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TabularJointEnvironment":
        K = None
        B = None
        values: dict[int, list[float]] = {}
        tuples, masses = [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                if line.startswith("K "):
                    K = int(line.split()[1])
                elif line.startswith("B "):
                    B = float(line.split()[1])
                elif line.startswith("values "):
                    parts = line.split()
                    values[int(parts[1]) - 1] = [float(v) for v in parts[2:]]
                else:
                    lhs, rhs = line.split(":")
                    tuples.append([float(v) for v in lhs.split()])
                    masses.append(float(rhs))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"malformed tabular fixture line {raw!r}: {exc}") from None
        if K is None or sorted(values) != list(range(K)):
            raise ConfigError("tabular fixture needs 'K n' and a 'values k ...' line for every arm")
        domains = [RewardDomain.discrete(values[k], B=B) for k in range(K)]
        if B is None:
            B = max(d.B for d in domains)
            domains = [RewardDomain.discrete(values[k], B=B) for k in range(K)]
        return cls(tuple(domains), np.array(tuples), np.array(masses))

    @classmethod
    def load(cls, path) -> "TabularJointEnvironment":
        return cls.from_text(Path(path).read_text())


# --------------------------------------------------------------------------
# latent random source
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundFunction:
    """A named, parameterized function of the latent value.

    ``linear`` (a, b): a*x + b
    ``square`` (a, c, b): a*(x - c)**2 + b
    ``piecewise`` (x0, y0, x1, y1, ...): linear interpolation, flat outside
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        n = len(self.params)
        ok = {"linear": n == 2, "square": n == 3, "piecewise": n >= 4 and n % 2 == 0}
        if not ok.get(self.kind, False):
            raise ConfigError(f"bad bound function {self.kind}{self.params}")
        if self.kind == "piecewise" and np.any(np.diff(self.params[0::2]) <= 0):
            raise ConfigError("piecewise knots must be strictly increasing in x")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "linear":
            return p[0] * x + p[1]
        if self.kind == "square":
            return p[0] * (x - p[1]) ** 2 + p[2]
        return np.interp(x, p[0::2], p[1::2])

    def shifted(self, delta: float) -> "BoundFunction":
        p = self.params
        if self.kind == "linear":
            return BoundFunction("linear", (p[0], p[1] + delta))
        if self.kind == "square":
            return BoundFunction("square", (p[0], p[1], p[2] + delta))
        ys = [y + delta for y in p[1::2]]
        return BoundFunction("piecewise", tuple(v for pair in zip(p[0::2], ys) for v in pair))


@dataclass(frozen=True)
class LatentArm:
    """Known bounds lower(x) <= Y_k(x) <= upper(x).

    Within the bounds the reward is drawn uniformly; equal bounds give a
    deterministic reward.
    """

    lower: Callable
    upper: Callable

    @classmethod
    def band(cls, center: BoundFunction, halfwidth: float) -> "LatentArm":
        if halfwidth < 0:
            raise ConfigError("band halfwidth must be non-negative")
        return cls(center.shifted(-halfwidth), center.shifted(halfwidth))


@dataclass(frozen=True)
class LatentDistribution:
    """Distribution of the hidden variable X.

    ``beta``: Beta(a, b) affinely mapped onto [lo, hi].
    ``grid``: finite pmf on explicit points.
    """

    kind: str
    a: float = 1.0
    b: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    points: tuple[float, ...] = ()
    pmf: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "beta":
            if self.a <= 0 or self.b <= 0 or not self.lo < self.hi:
                raise ConfigError("beta latent needs a, b > 0 and lo < hi")
        elif self.kind == "grid":
            if len(self.points) != len(self.pmf) or not self.points:
                raise ConfigError("grid latent needs matching points and pmf")
            if min(self.pmf) < 0 or abs(sum(self.pmf) - 1) > 1e-9:
                raise ConfigError("grid latent pmf must be non-negative and sum to 1")
        else:
            raise ConfigError(f"unknown latent distribution {self.kind!r}")

    @classmethod
    def scaled_beta(cls, a: float, b: float, lo: float = 0.0, hi: float = 1.0) -> "LatentDistribution":
        return cls("beta", a=a, b=b, lo=lo, hi=hi)

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "beta":
            return self.lo, self.hi
        return min(self.points), max(self.points)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "beta":
            return self.lo + (self.hi - self.lo) * rng.beta(self.a, self.b, size=size)
        return np.asarray(self.points)[rng.choice(len(self.points), size=size, p=self.pmf)]

    def quadrature(self, n: int = LATENT_GRID_N) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights (summing to 1) for expectations over X."""
        if self.kind == "grid":
            return np.asarray(self.points, dtype=float), np.asarray(self.pmf, dtype=float)
        u = np.linspace(0.0, 1.0, n)
        x = self.lo + (self.hi - self.lo) * u
        pdf = stats.beta.pdf(u, self.a, self.b)
        if np.all(np.isfinite(pdf)):
            w = pdf * (u[1] - u[0])
            w[[0, -1]] *= 0.5
        else:
            # unbounded density at an endpoint: use cdf mass of each node's cell
            cuts = np.concatenate([[0.0], 0.5 * (u[1:] + u[:-1]), [1.0]])
            w = np.diff(stats.beta.cdf(cuts, self.a, self.b))
        return x, w / w.sum()


@dataclass
class LatentSourceEnvironment:
    latent: LatentDistribution
    arms: tuple[LatentArm, ...]
    B: float | None = None
    domains: tuple[RewardDomain, ...] = field(init=False)

    def __post_init__(self):
        self.arms = tuple(self.arms)
        x = np.linspace(*self.latent.support, 2001)
        if self.latent.kind == "grid":
            x = np.union1d(x, self.latent.points)
        los = [float(np.min(a.lower(x))) for a in self.arms]
        his = [float(np.max(a.upper(x))) for a in self.arms]
        for k, a in enumerate(self.arms):
            if np.any(a.lower(x) > a.upper(x) + MATCH_TOL):
                raise ConfigError(f"arm {k}: lower bound exceeds upper bound on the latent support")
        if self.B is None:
            self.B = max(his)
        if max(his) > self.B + MATCH_TOL:
            raise ConfigError(f"an upper bound reaches {max(his):g} > B={self.B:g}")
        self.domains = tuple(
            RewardDomain.continuous(lo, hi if hi > lo else lo + 1e-9, B=self.B)
            for lo, hi in zip(los, his)
        )

    @property
    def K(self) -> int:
        return len(self.arms)

    def _rewards_at(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        cols = []
        for k, arm in enumerate(self.arms):
            lo, hi = arm.lower(x), arm.upper(x)
            cols.append(lo + u[..., k] * (hi - lo))
        return np.stack(cols, axis=-1)

    def sample_latent(self, arm: int, rng: np.random.Generator) -> float:
        x = self.latent.sample(None, rng)
        u = rng.random()
        a = self.arms[arm]
        lo, hi = float(a.lower(x)), float(a.upper(x))
        r = lo + u * (hi - lo)
        assert lo - MATCH_TOL <= r <= hi + MATCH_TOL
        return r

    def realize(self, T: int, rng: np.random.Generator) -> np.ndarray:
        x = self.latent.sample(T, rng)
        u = rng.random((T, self.K))
        return self._rewards_at(x, u)

    def true_means(self, grid_n: int = LATENT_GRID_N) -> np.ndarray:
        x, w = self.latent.quadrature(grid_n)
        return np.array([w @ (0.5 * (a.lower(x) + a.upper(x))) for a in self.arms])

    def reward_pmf(self, k: int, table: PseudoRewardTable, grid_n: int = LATENT_GRID_N) -> np.ndarray:
        """Probability that arm k's reward lands in each column of ``table``."""
        x, w = self.latent.quadrature(grid_n)
        edges = table.edges(k)
        arm = self.arms[k]
        out = np.zeros(table.values.shape[2])
        m = len(edges) - 1
        for start in range(0, len(x), 512):
            xs, ws = x[start:start + 512], w[start:start + 512]
            lo, hi = arm.lower(xs)[:, None], arm.upper(xs)[:, None]
            width = hi - lo
            with np.errstate(divide="ignore", invalid="ignore"):
                cdf = np.where(width > 0, np.clip((edges[None, :] - lo) / width, 0.0, 1.0),
                               (edges[None, :] >= lo).astype(float))
            mass = np.diff(cdf, axis=1)
            # deterministic rewards sitting exactly on the top edge belong to the last bin
            mass[:, -1] += 1.0 - cdf[:, -1]
            out[:m] += ws @ mass
        return out


# --------------------------------------------------------------------------
# empirical pools
# --------------------------------------------------------------------------


@dataclass
class EmpiricalEnvironment:
    """Per-arm rating pools sampled uniformly with replacement."""

    pools: tuple[np.ndarray, ...]
    domains: tuple[RewardDomain, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.pools = tuple(np.asarray(p, dtype=float) for p in self.pools)
        self.domains = tuple(self.domains)
        if len(self.pools) != len(self.domains):
            raise ConfigError("need one domain per pool")
        for k, (pool, dom) in enumerate(zip(self.pools, self.domains)):
            if len(pool) == 0:
                raise ConfigError(f"arm {k} has an empty rating pool")
            for r in np.unique(pool):
                dom.check(r)

    @property
    def K(self) -> int:
        return len(self.pools)

    @property
    def B(self) -> float:
        return max(d.B for d in self.domains)

    def realize(self, T: int, rng: np.random.Generator) -> np.ndarray:
        cols = [pool[rng.integers(0, len(pool), size=T)] for pool in self.pools]
        return np.stack(cols, axis=1)

    def true_means(self) -> np.ndarray:
        return np.array([pool.mean() for pool in self.pools])

    def reward_pmf(self, k: int, table: PseudoRewardTable) -> np.ndarray:
        out = np.zeros(table.values.shape[2])
        np.add.at(out, table.column_indices(k, self.pools[k]), 1.0 / len(self.pools[k]))
        return out


def true_means(env) -> np.ndarray:
    return env.true_means()


# --------------------------------------------------------------------------
# shipped fixtures
# --------------------------------------------------------------------------

BINARY = RewardDomain.discrete([0, 1], B=1.0)

# Pseudo-rewards shipped with the two-arm binary example:
# s(2,1)(0)=0.7, s(2,1)(1)=0.4, s(1,2)(0)=0.8, s(1,2)(1)=0.5.
BINARY_PAIR_PSEUDO = {(1, 0): [0.7, 0.4], (0, 1): [0.8, 0.5]}


def binary_pair_env(case: str) -> TabularJointEnvironment:
    """Two correlated binary arms. Case 'a': arm 1 optimal; case 'b': arm 2 optimal."""
    pmfs = {
        "a": {(0, 0): 0.2, (1, 0): 0.4, (0, 1): 0.2, (1, 1): 0.2},
        "b": {(0, 0): 0.2, (1, 0): 0.3, (0, 1): 0.4, (1, 1): 0.1},
    }
    if case not in pmfs:
        raise ConfigError(f"unknown case {case!r}; expected 'a' or 'b'")
    return TabularJointEnvironment.from_dict((BINARY, BINARY), pmfs[case])


def binary_pair_pseudo() -> PseudoRewardTable:
    return PseudoRewardTable.from_columns((BINARY, BINARY), BINARY_PAIR_PSEUDO)


TERNARY = RewardDomain.discrete([0, 1, 2], B=2.0)

# Three-arm example with some entries unknown and padded with B=2.
TERNARY_PSEUDO = {
    (1, 0): [0.7, 0.8, 2.0], (2, 0): [2.0, 1.2, 1.0],
    (0, 1): [0.5, 1.3, 2.0], (2, 1): [1.5, 2.0, 0.8],
    (0, 2): [1.5, 2.0, 0.7], (1, 2): [2.0, 1.3, 0.75],
}


def ternary_env() -> TabularJointEnvironment:
    """A joint consistent with the three-arm pseudo-rewards; arm 1 has pmf (0.2, 0.2, 0.6)."""
    pmf = {(0, 0, 0): 0.2, (1, 0, 1): 0.2, (2, 2, 0): 0.6}
    return TabularJointEnvironment.from_dict((TERNARY,) * 3, pmf)


def ternary_pseudo() -> PseudoRewardTable:
    return PseudoRewardTable.from_columns((TERNARY,) * 3, TERNARY_PSEUDO)


def latent_two_arm_env(a: float, b: float) -> LatentSourceEnvironment:
    """X ~ 6*Beta(a, b); 2X-1 <= Y_1 <= 2X+1 and (3-X)^2-1 <= Y_2 <= (3-X)^2+1."""
    return LatentSourceEnvironment(
        LatentDistribution.scaled_beta(a, b, 0.0, 6.0),
        (LatentArm.band(BoundFunction("linear", (2.0, 0.0)), 1.0),
         LatentArm.band(BoundFunction("square", (1.0, 3.0, 0.0)), 1.0)),
    )
