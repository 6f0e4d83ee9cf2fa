"""Config-driven experiment runner and CSV output."""

from __future__ import annotations

import configparser
import csv
import io
import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import data, pseudo
from .analysis import CompetitivenessReport, classify_instance
from .core import ArmEstimators, PseudoRewardTable, PullRecord, update_estimators
from .engine import draw_noise, regret_curves, simulate
from .environments import (BoundFunction, LatentArm, LatentDistribution, LatentSourceEnvironment,
                           TabularJointEnvironment, latent_two_arm_env, realization_hash,
                           ternary_env, ternary_pseudo, binary_pair_env, binary_pair_pseudo)
from .errors import ConfigError
from .policies import PolicySpec, check_base, compute_competitive_snapshot

log = logging.getLogger(__name__)

FIXTURES = ("binary-a", "binary-b", "ternary", "latent-uniform", "latent-skewed")
PSEUDO_SOURCES = ("fixture", "exact", "latent-grid", "ratings", "constant", "file")


@dataclass
class ExperimentConfig:
    environment: str = "binary-a"  # a fixture name, "tabular", "latent" or "ratings"
    env_file: str = ""
    latent_beta: tuple[float, float] = (1.0, 1.0)
    latent_scale: tuple[float, float] = (0.0, 6.0)
    latent_arms: tuple[str, ...] = ()
    pseudo: str = "fixture"
    pseudo_file: str = ""
    grid_n: int = 2001
    bins: int = 1000
    ratings: str = ""
    split_fraction: float = 0.5
    arm_mode: str = "items"
    top_n: int = 50
    ingest_seed: int = 0
    pad_fraction: float = 0.0
    buffer: float = 0.0
    pseudo_mode: str = "mean"
    policies: tuple[str, ...] = ("ucb", "c-ucb", "ts", "c-ts")
    beta: float = 1.0
    horizon: int = 5000
    trials: int = 100
    seed: int = 0
    stride: int = 0  # 0 means max(1, horizon // 1000)
    output: str = ""
    oracle_t: int = 5000

    def validate(self, K: int | None = None) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon: must be >= 1")
        if K is not None and self.horizon < K:
            raise ConfigError(f"horizon: must be at least the number of arms ({K})")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if self.beta <= 0:
            raise ConfigError("beta: must be positive")
        if self.pseudo not in PSEUDO_SOURCES:
            raise ConfigError(f"pseudo: expected one of {PSEUDO_SOURCES}, got {self.pseudo!r}")
        if not self.policies:
            raise ConfigError("policies: at least one policy is required")
        for p in self.policies:
            PolicySpec.parse(p, self.beta)
        if self.stride < 0:
            raise ConfigError("stride: must be >= 0")

    @property
    def effective_stride(self) -> int:
        return self.stride or max(1, self.horizon // 1000)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string("[experiment]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        return cls.from_mapping(dict(parser["experiment"]))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_mapping(cls, raw: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        cfg = base or cls()
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, value in raw.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ConfigError(f"{key}: unknown config key")
            if value is None:
                continue
            updates[name] = _coerce(name, getattr(cfg, name), value)
        return replace(cfg, **updates)


def _coerce(name, current, value):
    if not isinstance(value, str):
        return value
    try:
        if isinstance(current, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, tuple):
            if name in ("latent_beta", "latent_scale"):
                return tuple(float(v) for v in value.replace(",", " ").split())
            sep = ";" if name == "latent_arms" else ","
            return tuple(v.strip() for v in value.split(sep) if v.strip())
        return value.strip()
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r}") from None


def parse_latent_arm(spec: str) -> LatentArm:
    """``linear a b w``, ``square a c b w`` or ``piecewise x0:y0,x1:y1,... w``; w is the band halfwidth."""
    parts = spec.split()
    try:
        kind, rest = parts[0], parts[1:]
        if kind == "piecewise":
            knots = [tuple(float(v) for v in pair.split(":")) for pair in rest[0].split(",")]
            params = tuple(v for pair in knots for v in pair)
            width = float(rest[1]) if len(rest) > 1 else 0.0
        else:
            *params, width = (float(v) for v in rest)
            params = tuple(params)
    except (IndexError, ValueError):
        raise ConfigError(f"latent_arms: cannot parse {spec!r}") from None
    return LatentArm.band(BoundFunction(kind, params), width)


@dataclass
class Instance:
    """Environment plus the pseudo-reward table policies will see."""

    env: object
    table: PseudoRewardTable


def build_instance(cfg: ExperimentConfig) -> Instance:
    env = _build_env(cfg)
    return Instance(env, _build_table(cfg, env))


def _ratings_split(cfg):
    records = data.read_ratings(cfg.ratings)
    if cfg.arm_mode == "genres":
        records, _ = data.derive_genre_arms(records, cfg.ingest_seed)
    train, test = data.split_by_activity(records, cfg.split_fraction)
    arms = (data.top_n_items(records, cfg.top_n) if cfg.arm_mode == "items"
            else data.genre_list(records))
    return train, test, arms


def _build_env(cfg: ExperimentConfig):
    name = cfg.environment
    if name in ("binary-a", "binary-b"):
        return binary_pair_env(name[-1])
    if name == "ternary":
        return ternary_env()
    if name == "latent-uniform":
        return latent_two_arm_env(1.0, 1.0)
    if name == "latent-skewed":
        return latent_two_arm_env(1.5, 5.0)
    if name == "tabular":
        if not cfg.env_file:
            raise ConfigError("env_file: required for a tabular environment")
        return TabularJointEnvironment.load(cfg.env_file)
    if name == "latent":
        if not cfg.latent_arms:
            raise ConfigError("latent_arms: required for a latent environment")
        a, b = cfg.latent_beta
        lo, hi = cfg.latent_scale
        return LatentSourceEnvironment(LatentDistribution.scaled_beta(a, b, lo, hi),
                                       tuple(parse_latent_arm(s) for s in cfg.latent_arms))
    if name == "ratings":
        if not cfg.ratings:
            raise ConfigError("ratings: a ratings file is required")
        train, test, arms = _ratings_split(cfg)
        values = data.rating_values(train, test, arms=arms, arm_mode=cfg.arm_mode)
        return data.build_empirical_env(test, arms, cfg.arm_mode, values)
    raise ConfigError(f"environment: unknown environment {name!r}")


def _build_table(cfg: ExperimentConfig, env) -> PseudoRewardTable:
    src = cfg.pseudo
    if src == "fixture":
        if cfg.environment in ("binary-a", "binary-b"):
            return binary_pair_pseudo()
        if cfg.environment == "ternary":
            return ternary_pseudo()
        if isinstance(env, LatentSourceEnvironment):
            return pseudo.from_latent_bounds(env, cfg.grid_n, cfg.bins)
        raise ConfigError(f"pseudo: no fixture table for environment {cfg.environment!r}")
    if src == "file":
        return PseudoRewardTable.load(cfg.pseudo_file)
    if src == "exact":
        if not isinstance(env, TabularJointEnvironment):
            raise ConfigError("pseudo: 'exact' needs a tabular environment")
        return pseudo.from_joint_exact(env)
    if src == "latent-grid":
        if not isinstance(env, LatentSourceEnvironment):
            raise ConfigError("pseudo: 'latent-grid' needs a latent environment")
        return pseudo.from_latent_bounds(env, cfg.grid_n, cfg.bins)
    if src == "constant":
        if isinstance(env, LatentSourceEnvironment):
            return PseudoRewardTable.constant(env.domains, edges=[np.linspace(d.lo, d.hi, cfg.bins + 1)
                                                                 for d in env.domains])
        return PseudoRewardTable.constant(env.domains)
    if src == "ratings":
        if cfg.environment != "ratings":
            raise ConfigError("pseudo: 'ratings' needs a ratings environment")
        train, test, arms = _ratings_split(cfg)
        rng = np.random.default_rng([cfg.seed, zlib.crc32(b"pad")])
        return pseudo.from_ratings(train, arms, cfg.pseudo_mode, cfg.pad_fraction, cfg.buffer, rng,
                                   arm_mode=cfg.arm_mode, values=env.domains[0].values, B=env.B)
    raise ConfigError(f"pseudo: unknown source {src!r}")


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


def env_rng(base_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(base_seed + trial)


def policy_rng(base_seed: int, trial: int, policy: str) -> np.random.Generator:
    return np.random.default_rng([base_seed + trial, zlib.crc32(policy.encode())])


@dataclass
class AggregateCurve:
    """Mean and standard deviation of cumulative regret per round and policy."""

    t: np.ndarray
    policies: tuple[str, ...]
    mean: np.ndarray  # (P, len(t))
    std: np.ndarray
    trials: int

    def thinned(self, stride: int) -> "AggregateCurve":
        keep = (self.t % stride == 0)
        keep[-1] = True
        return AggregateCurve(self.t[keep], self.policies, self.mean[:, keep], self.std[:, keep], self.trials)

    def final(self, policy: str) -> float:
        return float(self.mean[self.policies.index(policy), -1])


@dataclass
class ExperimentResult:
    curve: AggregateCurve
    final_regret: dict[str, np.ndarray]  # per-trial final cumulative regret
    pulls: dict[str, np.ndarray]  # (N, K) pull counts at the horizon
    realization_hashes: list[str]
    means: np.ndarray
    report: CompetitivenessReport | None = None
    arms: dict[str, np.ndarray] = field(default_factory=dict)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CORRBANDIT_THREADS", "1")))
    except ValueError:
        raise ConfigError("CORRBANDIT_THREADS must be an integer") from None


def run_experiment(cfg: ExperimentConfig, instance: Instance | None = None,
                   keep_arms: bool = False) -> ExperimentResult:
    """Run every configured policy on the same reward realizations.

    Trial i realizes its rewards from the stream seeded ``seed + i``; every
    policy reads that matrix. Stochastic policies draw their own noise from a
    stream keyed by (seed + i, policy name).
    """
    inst = instance or build_instance(cfg)
    env, table = inst.env, inst.table
    K = table.K
    cfg.validate(K)
    specs = [PolicySpec.parse(p, cfg.beta) for p in cfg.policies]
    for spec in specs:
        check_base(spec.base, table)
    means = env.true_means()
    T, N = cfg.horizon, cfg.trials

    chunk = max(1, min(N, 2_000_000 // max(1, T * K)))
    starts = list(range(0, N, chunk))

    def run_chunk(start):
        ids = range(start, min(N, start + chunk))
        rewards = np.stack([env.realize(T, env_rng(cfg.seed, i)) for i in ids])
        hashes = [realization_hash(r) for r in rewards]
        out = {}
        for spec in specs:
            noise = None
            if spec.base != "ucb":
                noise = np.stack([draw_noise(spec, T, K, policy_rng(cfg.seed, i, spec.name)) for i in ids])
            out[spec.name] = simulate(spec, table, rewards, noise)
        return hashes, out

    with ThreadPoolExecutor(max_workers=min(_threads(), len(starts))) as pool:
        chunks = list(pool.map(run_chunk, starts))

    names = tuple(s.name for s in specs)
    # Welford over trials, merged in trial order
    count = 0
    mean = np.zeros((len(specs), T))
    m2 = np.zeros((len(specs), T))
    finals = {n: [] for n in names}
    pulls = {n: [] for n in names}
    arms_kept = {n: [] for n in names}
    hashes = []
    for chunk_hashes, out in chunks:
        hashes.extend(chunk_hashes)
        curves = {n: regret_curves(out[n], means) for n in names}
        for row in range(len(chunk_hashes)):
            count += 1
            for p, n in enumerate(names):
                x = curves[n][row]
                d = x - mean[p]
                mean[p] += d / count
                m2[p] += d * (x - mean[p])
                finals[n].append(x[-1])
        for n in names:
            pulls[n].append(np.stack([(out[n] == k).sum(axis=1) for k in range(K)], axis=1))
            if keep_arms:
                arms_kept[n].append(out[n])
    std = np.sqrt(m2 / count)
    curve = AggregateCurve(np.arange(1, T + 1), names, mean, std, count)
    report = None
    try:
        report = classify_instance(env, table)
    except Exception as exc:  # the report is informational; ties etc. must not abort a run
        log.info("no competitiveness report: %s", exc)
    return ExperimentResult(
        curve=curve,
        final_regret={n: np.asarray(v) for n, v in finals.items()},
        pulls={n: np.concatenate(v) for n, v in pulls.items()},
        realization_hashes=hashes,
        means=means,
        report=report,
        arms={n: np.concatenate(v) for n, v in arms_kept.items()} if keep_arms else {},
    )


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def curve_to_csv(curve: AggregateCurve, stride: int = 1) -> str:
    c = curve.thinned(stride)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["t"]
    for p in c.policies:
        header += [f"{p}_mean", f"{p}_std"]
    w.writerow(header)
    for i, t in enumerate(c.t):
        row = [str(int(t))]
        for p in range(len(c.policies)):
            row += [repr(float(c.mean[p, i])), repr(float(c.std[p, i]))]
        w.writerow(row)
    return buf.getvalue()


def emit_csv(curve: AggregateCurve, path, stride: int = 1) -> None:
    Path(path).write_text(curve_to_csv(curve, stride))


def parse_csv(text: str, trials: int = 0) -> AggregateCurve:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    if header[0] != "t" or (len(header) - 1) % 2:
        raise ConfigError("not a regret-curve CSV")
    policies = tuple(h[: -len("_mean")] for h in header[1::2])
    arr = np.array(body, dtype=float).reshape(len(body), len(header))
    mean = arr[:, 1::2].T.copy()
    std = arr[:, 2::2].T.copy()
    return AggregateCurve(arr[:, 0].astype(np.int64), policies, mean, std, trials)


# --------------------------------------------------------------------------
# oracle
# --------------------------------------------------------------------------


def empirical_competitive_count(env, table: PseudoRewardTable, k_star: int, t: int,
                                rng: np.random.Generator) -> int:
    """|A_t + {k_emp}| after pulling only the optimal arm for t rounds."""
    est = ArmEstimators(table.K)
    rewards = env.realize(t, rng)[:, k_star]
    for i, r in enumerate(rewards, 1):
        update_estimators(est, table, PullRecord(i, k_star, float(r)))
    snap = compute_competitive_snapshot(est, t, table.K)
    return len(snap.candidates)


def report_oracle(cfg: ExperimentConfig, instance: Instance | None = None) -> tuple[CompetitivenessReport, int]:
    inst = instance or build_instance(cfg)
    report = classify_instance(inst.env, inst.table)
    c_emp = empirical_competitive_count(inst.env, inst.table, report.k_star, cfg.oracle_t,
                                        np.random.default_rng(cfg.seed))
    return report, c_emp
