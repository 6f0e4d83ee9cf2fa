"""Rating-corpus ingestion: parsing, activity split, arm derivation."""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import RewardDomain
from .environments import EmpiricalEnvironment
from .errors import ConfigError, IngestError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RatingRecord:
    user: str
    item: str
    rating: float
    genres: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.user or not self.item:
            raise IngestError("rating records need non-empty user and item ids")

    @property
    def genre(self) -> str | None:
        return self.genres[0] if self.genres else None


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    arm_mode: str = "items"  # "items" (top-n items) or "genres"
    top_n: int = 50
    genre_seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.arm_mode not in ("items", "genres"):
            raise ConfigError(f"unknown arm mode {self.arm_mode!r}")


def read_ratings(path, B: float = 5.0) -> list[RatingRecord]:
    """Parse ``user,item,rating[,genres]`` lines; genres are pipe-separated.

    Comma, tab and ``::`` delimiters are accepted. A header row is skipped.
    """
    text = Path(path).read_text()
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "::" in line:
            fields = line.split("::")
        else:
            fields = next(csv.reader([line], delimiter="\t" if "\t" in line else ","))
        if len(fields) < 3:
            raise IngestError(f"{path}:{lineno}: expected user,item,rating[,genres]")
        try:
            rating = float(fields[2])
        except ValueError:
            if not records:
                continue  # header
            raise IngestError(f"{path}:{lineno}: rating {fields[2]!r} is not a number") from None
        if not 0 <= rating <= B:
            raise IngestError(f"{path}:{lineno}: rating {rating} outside [0, {B}]")
        genres = tuple(g for g in fields[3].split("|") if g) if len(fields) > 3 else ()
        records.append(RatingRecord(fields[0].strip(), fields[1].strip(), rating, genres))
    if not records:
        raise IngestError(f"{path}: no rating records")
    return records


def write_ratings(records: Iterable[RatingRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "item", "rating", "genres"])
        for r in records:
            w.writerow([r.user, r.item, f"{r.rating:g}", "|".join(r.genres)])


def split_by_activity(records: Sequence[RatingRecord], spec: SplitSpec | float = 0.5):
    """Most active users (by record count) until their share reaches the fraction go to train."""
    fraction = spec.train_fraction if isinstance(spec, SplitSpec) else float(spec)
    if not records:
        raise IngestError("cannot split an empty rating set")
    if not 0 < fraction < 1:
        raise ConfigError("train fraction must be in (0, 1)")
    counts = Counter(r.user for r in records)
    if len(counts) < 2:
        raise IngestError("need at least two distinct users to split")
    ranked = sorted(counts, key=lambda u: (-counts[u], u))
    train_users, total, acc = set(), len(records), 0
    for u in ranked:
        train_users.add(u)
        acc += counts[u]
        if acc >= fraction * total:
            break
    train = [r for r in records if r.user in train_users]
    test = [r for r in records if r.user not in train_users]
    return train, test


def derive_genre_arms(records: Sequence[RatingRecord], seed: int = 0):
    """Keep one uniformly chosen genre per item. Returns (records, n_skipped)."""
    rng = np.random.default_rng(seed)
    genres_of: dict[str, tuple[str, ...]] = {}
    for r in records:
        genres_of.setdefault(r.item, r.genres)
    chosen = {}
    for item in sorted(genres_of):
        gs = genres_of[item]
        if gs:
            chosen[item] = gs[rng.integers(len(gs))]
    out, skipped = [], 0
    for r in records:
        if r.item in chosen:
            out.append(replace(r, genres=(chosen[r.item],)))
        else:
            skipped += 1
    if skipped:
        log.warning("skipped %d ratings of items without a genre", skipped)
    return out, skipped


def top_n_items(records: Sequence[RatingRecord], n: int) -> list[str]:
    counts = Counter(r.item for r in records)
    if n < 1 or n > len(counts):
        raise IngestError(f"asked for {n} items but the catalog has {len(counts)}")
    return sorted(counts, key=lambda i: (-counts[i], i))[:n]


def genre_list(records: Sequence[RatingRecord]) -> list[str]:
    return sorted({r.genre for r in records if r.genre is not None})


def half_point(x):
    """Round to the nearest 0.5, halves rounded up."""
    return np.floor(np.asarray(x, dtype=float) * 2 + 0.5) / 2


def user_arm_ratings(records: Sequence[RatingRecord], arms: Sequence[str], arm_mode: str = "items"):
    """{user: {arm index: rating}}. Genre arms use the user's half-point genre mean."""
    pos = {a: i for i, a in enumerate(arms)}
    acc: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        key = r.item if arm_mode == "items" else r.genre
        if key in pos:
            acc[r.user][pos[key]].append(r.rating)
    out = {}
    for user, per_arm in acc.items():
        if arm_mode == "items":
            # repeated ratings of one item collapse to their mean
            out[user] = {k: float(np.mean(v)) for k, v in per_arm.items()}
        else:
            out[user] = {k: float(half_point(np.mean(v))) for k, v in per_arm.items()}
    return out


def rating_matrix(records: Sequence[RatingRecord], arms: Sequence[str], arm_mode: str = "items") -> np.ndarray:
    """Users x arms matrix of ratings, NaN where a user did not rate an arm."""
    per_user = user_arm_ratings(records, arms, arm_mode)
    users = sorted(per_user)
    m = np.full((len(users), len(arms)), np.nan)
    for i, u in enumerate(users):
        for k, v in per_user[u].items():
            m[i, k] = v
    return m


def rating_values(*record_sets, arms, arm_mode: str = "items") -> list[float]:
    vals = set()
    for recs in record_sets:
        m = rating_matrix(recs, arms, arm_mode)
        vals.update(np.unique(m[~np.isnan(m)]).tolist())
    return sorted(vals)


def build_empirical_env(test: Sequence[RatingRecord], arms: Sequence[str], arm_mode: str = "items",
                        values: Sequence[float] | None = None, B: float = 5.0) -> EmpiricalEnvironment:
    m = rating_matrix(test, arms, arm_mode)
    pools = [col[~np.isnan(col)] for col in m.T]
    for a, pool in zip(arms, pools):
        if pool.size == 0:
            raise IngestError(f"arm {a!r} has no ratings in the test split")
    if values is None:
        values = np.unique(np.concatenate(pools))
    dom = RewardDomain.discrete(values, B=B)
    return EmpiricalEnvironment(tuple(pools), (dom,) * len(arms), labels=tuple(arms))


def synthetic_corpus(n_users: int = 500, n_arms: int = 20, seed: int = 0,
                     missing: float = 0.1) -> list[RatingRecord]:
    """Ratings on a 1-5 scale with planted cross-item correlation.

    Each user has a hidden taste x in [0, 1]. Item 0 is liked by almost
    everyone; every other item's rating is a noisy increasing or decreasing
    function of x, so ratings of one item are informative about the others.
    A fraction ``missing`` of (user, item) pairs is dropped, more often for
    less active users, which skews the activity split.
    """
    rng = np.random.default_rng(seed)
    x = rng.random(n_users)
    activity = rng.beta(2, 2, n_users)
    slope = rng.choice([-1.0, 1.0], size=n_arms)
    level = rng.uniform(1.8, 3.4, size=n_arms)
    records = []
    for u in range(n_users):
        for i in range(n_arms):
            if i > 0 and rng.random() < missing * 2 * (1 - activity[u]):
                continue
            if i == 0:
                mean = 4.6
            else:
                mean = level[i] + 1.2 * slope[i] * (x[u] - 0.5)
            r = int(np.clip(np.rint(mean + 0.4 * rng.standard_normal()), 1, 5))
            records.append(RatingRecord(f"u{u:04d}", f"item{i:02d}", float(r)))
    return records
