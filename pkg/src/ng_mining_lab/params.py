"""Protocol constants, pool descriptions and difficulty control.

Every time quantity is a real number in one abstract unit. Pools are kept in
a stable order so strategy vectors, utilities and statistics align by index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

DIFFICULTY_RTOL = 1e-9
LAMBDA_RTOL = 1e-12


class ConfigError(ValueError):
    """Raised when a configuration violates a protocol invariant."""


@dataclass(frozen=True)
class ChainParams:
    """Bitcoin-NG protocol constants.

    ``T`` is the nominal key-block interval, ``T_m`` the default mining
    duration and ``T_b`` the micro-block window. ``L`` micro blocks carrying a
    fee ``r`` each are published per interval; ``R`` is the mint reward of a key
    block and ``alpha`` the fee share kept by the current leader.
    """

    T: float = 10.0
    T_m: float = 2.0
    T_b: float | None = None
    L: float = 10.0
    alpha: float = 3 / 11
    r: float = 1.0
    R: float = 10.0
    d: float = 11

    def __post_init__(self):
        if self.T_b is None:
            object.__setattr__(self, "T_b", self.T - self.T_m)

    def replace(self, **changes) -> ChainParams:
        fields = {k: getattr(self, k) for k in ("T", "T_m", "T_b", "L", "alpha", "r", "R", "d")}
        if ("T" in changes or "T_m" in changes) and "T_b" not in changes:
            fields["T_b"] = None
        fields.update(changes)
        return ChainParams(**fields)

    @property
    def max_reward(self) -> float:
        """Upper bound ``r*L + R`` on the reward of a single key block."""
        return self.r * self.L + self.R


@dataclass(frozen=True)
class PoolSpec:
    id: str
    w: float
    lam: float


@dataclass(frozen=True)
class PoolSet:
    """Ordered pools sharing one (possibly non-integer) difficulty ``d``."""

    pools: tuple[PoolSpec, ...]
    d: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(self.pools))

    def __len__(self) -> int:
        return len(self.pools)

    def __iter__(self):
        return iter(self.pools)

    def __getitem__(self, i) -> PoolSpec:
        return self.pools[i]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.pools)

    @property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(p.lam for p in self.pools)

    @property
    def total_rate(self) -> float:
        return math.fsum(self.lambdas)

    def index(self, pool_id: str) -> int:
        try:
            return self.ids.index(pool_id)
        except ValueError:
            raise ConfigError(f"unknown pool id {pool_id!r}") from None

    @classmethod
    def from_lambdas(cls, lambdas: Sequence[float], ids: Sequence[str] | None = None) -> PoolSet:
        """Pools given directly by rate; hash rates are expressed in units of ``2^d = 1``."""
        ids = _default_ids(len(lambdas)) if ids is None else list(ids)
        return cls(tuple(PoolSpec(i, float(x), float(x)) for i, x in zip(ids, lambdas)), d=0.0)


@dataclass(frozen=True)
class PrevLeader:
    """Identifies the pool that mined the previous key block."""

    pool_id: str


@dataclass(frozen=True)
class StrategyProfile:
    taus: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))

    def __len__(self):
        return len(self.taus)

    def __getitem__(self, i):
        return self.taus[i]

    def replace(self, n: int, tau: float) -> StrategyProfile:
        taus = list(self.taus)
        taus[n] = tau
        return StrategyProfile(tuple(taus))

    @classmethod
    def honest(cls, params: ChainParams, n: int) -> StrategyProfile:
        return cls((params.T_m,) * n)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_failed(self):
        if self.errors:
            raise ConfigError("; ".join(self.errors))


def _default_ids(n: int) -> list[str]:
    if n <= 26:
        return [chr(ord("A") + i) for i in range(n)]
    return [f"pool{i}" for i in range(n)]


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def check_params(params: ChainParams) -> list[str]:
    errors = []
    if not params.T_m > 0:
        errors.append("T_m must be positive")
    if not params.T_m < params.T:
        errors.append("T_m must be smaller than T")
    if not math.isclose(params.T_b, params.T - params.T_m, rel_tol=1e-12, abs_tol=1e-12):
        errors.append("T_b ≠ T − T_m")
    if not 0 < params.alpha < 1:
        errors.append("alpha must lie in (0, 1)")
    if not params.L >= 1:
        errors.append("L must be at least 1")
    if not params.r >= 0:
        errors.append("r must be non-negative")
    if not params.R >= 0:
        errors.append("R must be non-negative")
    if not params.d >= 1:
        errors.append("d must be at least 1")
    return errors


def check_pools(pools: PoolSet, T_m: float, *, require_identity: bool = True) -> list[str]:
    errors = []
    if len(pools) < 2:
        errors.append("at least two pools are required")
    if len(set(pools.ids)) != len(pools):
        errors.append("pool ids must be unique")
    for p in pools:
        if not p.w > 0:
            errors.append(f"pool {p.id}: w must be positive")
        if not p.lam > 0:
            errors.append(f"pool {p.id}: lambda must be positive")
        elif not _close(p.lam, p.w / 2.0**pools.d, LAMBDA_RTOL):
            errors.append(f"pool {p.id}: lambda ≠ w / 2^d")
    if require_identity and T_m > 0 and not _close(T_m * pools.total_rate, 1.0, DIFFICULTY_RTOL):
        errors.append("difficulty identity T_m * sum(lambda) = 1 violated")
    return errors


def check_strategy(strategy: StrategyProfile, params: ChainParams, n_pools: int) -> list[str]:
    errors = []
    if len(strategy) != n_pools:
        errors.append(f"strategy has {len(strategy)} entries for {n_pools} pools")
    for i, tau in enumerate(strategy.taus):
        if not params.T_m <= tau <= params.T:
            errors.append(f"tau[{i}] = {tau} outside [T_m, T]")
    return errors


def validate_config(
    params: ChainParams,
    pools: PoolSet,
    strategy: StrategyProfile | None = None,
    prev: PrevLeader | None = None,
) -> ValidationReport:
    """Check every protocol invariant; failures are collected, never raised."""
    errors = check_params(params) + check_pools(pools, params.T_m)
    if strategy is not None:
        errors += check_strategy(strategy, params, len(pools))
    if prev is not None and prev.pool_id not in pools.ids:
        errors.append(f"previous leader {prev.pool_id!r} is not a pool")
    return ValidationReport(errors)


def enforce_difficulty(
    rates: Iterable[float], T_m: float, ids: Sequence[str] | None = None
) -> PoolSet:
    """Choose the difficulty so that one key block is expected per ``T_m``.

    The effective ``2^d`` is ``T_m * sum(w)``. When that is an exact power of
    two the integer ``d`` is used; otherwise ``d`` is real-valued.

    >>> ps = enforce_difficulty([1] * 1024, 2.0)
    >>> ps.d, round(ps.total_rate, 12)
    (11, 0.5)
    """
    w = [float(x) for x in rates]
    if not w:
        raise ConfigError("enforce_difficulty needs at least one pool")
    if any(not x > 0 for x in w):
        raise ConfigError("hash rates must be positive")
    if not T_m > 0:
        raise ConfigError("T_m must be positive")
    scale = T_m * math.fsum(w)
    d = math.log2(scale)
    if abs(d - round(d)) < 1e-12 and 2.0 ** round(d) == scale:
        d = int(round(d))
    ids = _default_ids(len(w)) if ids is None else list(ids)
    if len(ids) != len(w):
        raise ConfigError("ids and rates differ in length")
    return PoolSet(tuple(PoolSpec(i, x, x / 2.0**d) for i, x in zip(ids, w)), d=d)


# -- JSON configuration documents ------------------------------------------

CHAIN_KEYS = ("T", "T_m", "T_b", "L", "alpha", "r", "R", "d")


@dataclass
class Config:
    params: ChainParams
    pools: PoolSet
    strategy: StrategyProfile | None = None
    sim: dict[str, Any] = field(default_factory=dict)


def parse_config(doc: dict[str, Any]) -> Config:
    """Build a :class:`Config` from a decoded JSON document.

    Pools are given either by hash rate ``w`` (difficulty is then enforced
    against ``T_m``) or directly by ``lambda``. ``strategy`` is a per-pool list
    of ``tau`` values, the string ``"honest"``, or a per-pool mapping.
    """
    chain = dict(doc.get("chain", {}))
    unknown = set(chain) - set(CHAIN_KEYS)
    if unknown:
        raise ConfigError(f"unknown chain keys: {sorted(unknown)}")
    params = ChainParams(**{k: float(v) for k, v in chain.items()})

    raw = doc.get("pools")
    if not raw:
        raise ConfigError("config needs a non-empty 'pools' array")
    defaults = _default_ids(len(raw))
    ids = [str(p.get("id", defaults[i])) for i, p in enumerate(raw)]
    if all("w" in p for p in raw):
        pools = enforce_difficulty([p["w"] for p in raw], params.T_m, ids)
    elif all("lambda" in p for p in raw):
        pools = PoolSet.from_lambdas([float(p["lambda"]) for p in raw], ids)
    else:
        raise ConfigError("every pool needs 'w', or every pool needs 'lambda'")

    strategy = None
    s = doc.get("strategy")
    if s is not None:
        if s == "honest":
            strategy = StrategyProfile.honest(params, len(pools))
        elif isinstance(s, dict):
            strategy = StrategyProfile(
                tuple(params.T_m if s.get(i, "honest") == "honest" else float(s[i]) for i in ids)
            )
        else:
            strategy = StrategyProfile(tuple(params.T_m if x == "honest" else float(x) for x in s))

    cfg = Config(params, pools, strategy, dict(doc.get("sim", {})))
    errors = check_params(params) + check_pools(pools, params.T_m, require_identity=False)
    if strategy is not None:
        errors += check_strategy(strategy, params, len(pools))
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def load_config(path: str | Path) -> Config:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(doc)


BUNDLED_CONFIGS = {
    "defaults": "defaults.json",
    "three-pool": "three_pool.json",
}


def default_config_path() -> Path:
    return bundled_config_path("defaults")


def bundled_config_path(name: str) -> Path:
    try:
        return Path(__file__).with_name("data") / BUNDLED_CONFIGS[name]
    except KeyError:
        raise ConfigError(f"no bundled config named {name!r}") from None
