"""Discrete-time Monte Carlo simulation of the Bitcoin-NG key-block race.

Time advances in unit steps from the start of an interval. Every active
miner makes one hash test per step, succeeding with probability ``2^-d``.
A pool's miners become active at step ``ceil(T - tau)``; the first step with
at least one success ends the race and the winner is drawn uniformly among
the successful miners. The winner of round ``i`` is the previous leader of
round ``i + 1``.

Per step the success count of a pool is ``Binomial(active miners, 2^-d)``,
which is the same law as testing every miner individually; races are drawn
for many rounds at once.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import GameSpec, win_probs
from .params import (
    ChainParams,
    ConfigError,
    PoolSet,
    PrevLeader,
    check_params,
    enforce_difficulty,
)

GENERATOR = "PCG64"
MAX_STEPS = 10**6
ROUND_COLUMNS = ("round", "winner", "win_time", "reward", "included", "discarded", "prev_leader")
_STEP_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """A simulation setup.

    ``strategies`` is either one entry per pool, or a table with one row per
    possible previous leader (row ``c`` is played when pool ``c`` mined the
    last key block). Entries are durations or ``"honest"``.
    ``steps_per_unit`` refines the clock: each miner then makes that many
    tests per time unit and the difficulty is recalibrated accordingly.
    """

    params: ChainParams
    miners_per_pool: tuple[int, ...]
    strategies: tuple = "honest"
    rounds: int = 1000
    seed: int = 0
    tie_rule: str = "uniform"
    micro_fraction_mode: str = "continuous"
    steps_per_unit: int = 1
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "miners_per_pool", tuple(int(m) for m in self.miners_per_pool))
        n = len(self.miners_per_pool)
        if self.ids is None:
            object.__setattr__(self, "ids", PoolSet.from_lambdas([1.0] * max(n, 1)).ids[:n])
        object.__setattr__(self, "strategies", _normalize_strategies(self.strategies, self.params, n))
        errors = check_params(self.params)
        if n < 2:
            errors.append("at least two pools are required")
        if any(m < 1 for m in self.miners_per_pool):
            errors.append("every pool needs at least one miner")
        if self.rounds < 1:
            errors.append("rounds must be at least 1")
        if self.tie_rule != "uniform":
            errors.append("only the 'uniform' tie rule is supported")
        if self.micro_fraction_mode not in ("continuous", "floored"):
            errors.append("micro_fraction_mode must be 'continuous' or 'floored'")
        if self.steps_per_unit < 1:
            errors.append("steps_per_unit must be at least 1")
        if len(self.ids) != n:
            errors.append("ids and miners_per_pool differ in length")
        table = np.array(self.strategies)
        if np.any(table < self.params.T_m) or np.any(table > self.params.T):
            errors.append("every tau must lie in [T_m, T]")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def n_pools(self) -> int:
        return len(self.miners_per_pool)

    @property
    def strategy_table(self) -> np.ndarray:
        """``(prev leader, pool)`` table of mining durations."""
        return np.array(self.strategies, dtype=float)

    @property
    def pools(self) -> PoolSet:
        """Calibrated pools; rates are per time unit."""
        k = self.steps_per_unit
        return enforce_difficulty([m * k for m in self.miners_per_pool], self.params.T_m, self.ids)

    @property
    def success_prob(self) -> float:
        return 2.0 ** -self.pools.d

    @property
    def start_steps(self) -> np.ndarray:
        """First active step of each pool, per previous-leader row."""
        lead = (self.params.T - self.strategy_table) * self.steps_per_unit
        return np.ceil(lead - _STEP_EPS).astype(np.int64)

    @property
    def effective_taus(self) -> np.ndarray:
        """Mining durations actually realized on the step grid."""
        return self.params.T - self.start_steps / self.steps_per_unit

    def with_(self, **changes) -> SimConfig:
        fields = {f: getattr(self, f) for f in self.__dataclass_fields__}
        fields.update(changes)
        return SimConfig(**fields)


def _normalize_strategies(strategies, params: ChainParams, n: int) -> tuple:
    def tau(x):
        return params.T_m if x == "honest" or x is None else float(x)

    if isinstance(strategies, str):
        if strategies != "honest":
            raise ConfigError(f"unknown strategy {strategies!r}")
        row = (params.T_m,) * n
        return (row,) * n
    strategies = list(strategies)
    if any(isinstance(s, (list, tuple, np.ndarray)) for s in strategies):
        if len(strategies) != n or any(len(row) != n for row in strategies):
            raise ConfigError("a strategy table needs one row of n entries per pool")
        return tuple(tuple(tau(x) for x in row) for row in strategies)
    if len(strategies) != n:
        raise ConfigError(f"expected {n} strategies, got {len(strategies)}")
    row = tuple(tau(x) for x in strategies)
    return (row,) * n


@dataclass(frozen=True)
class RoundOutcome:
    winner: int
    win_time: int
    reward: float
    micro_blocks_included: float
    micro_blocks_discarded: float
    prev_leader: int


@dataclass
class SimStats:
    ids: tuple[str, ...]
    win_counts: np.ndarray
    win_frequency: np.ndarray
    total_reward: np.ndarray
    average_reward: np.ndarray
    reward_std: np.ndarray
    prev_leader_frequency: np.ndarray
    avg_discarded: float
    avg_included: float
    rounds_completed: int
    seed: int
    generator: str = GENERATOR
    params: ChainParams | None = None
    miners_per_pool: tuple[int, ...] = ()
    rounds_table: dict | None = field(default=None, repr=False)

    @property
    def reward_se(self) -> np.ndarray:
        """Standard error of each pool's average per-round reward."""
        return self.reward_std / math.sqrt(self.rounds_completed)

    @property
    def win_se(self) -> np.ndarray:
        f = self.win_frequency
        return np.sqrt(f * (1 - f) / self.rounds_completed)

    def to_dict(self) -> dict:
        out = {
            "rounds_completed": self.rounds_completed,
            "seed": self.seed,
            "generator": self.generator,
            "avg_discarded": self.avg_discarded,
            "avg_included": self.avg_included,
        }
        metrics = ("win_counts", "win_frequency", "total_reward", "average_reward", "reward_std", "prev_leader_frequency")
        for name in metrics:
            for pid, v in zip(self.ids, getattr(self, name)):
                out[f"{name}.{pid}"] = int(v) if name == "win_counts" else float(v)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rounds_csv(self) -> str:
        if self.rounds_table is None:
            raise ValueError("per-round records were not kept")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ROUND_COLUMNS)
        cols = [self.rounds_table[c] for c in ROUND_COLUMNS]
        for row in zip(*cols):
            writer.writerow([self.ids[v] if c in ("winner", "prev_leader") else _fmt(v) for c, v in zip(ROUND_COLUMNS, row)])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _race(rng: np.random.Generator, miners: np.ndarray, p: float, starts: np.ndarray, rounds: int):
    """Winners and finishing steps of ``rounds`` independent races."""
    winner = np.full(rounds, -1, dtype=np.int64)
    win_step = np.zeros(rounds, dtype=np.int64)
    running = np.arange(rounds)
    t0 = int(starts.min())
    t = t0
    while running.size:
        trials = np.where(starts <= t, miners, 0)
        k = rng.binomial(trials[None, :].repeat(running.size, axis=0), p)
        total = k.sum(axis=1)
        hit = total > 0
        if hit.any():
            kh = k[hit]
            u = rng.random(kh.shape[0]) * total[hit]
            idx = running[hit]
            winner[idx] = (np.cumsum(kh, axis=1) > u[:, None]).argmax(axis=1)
            win_step[idx] = t
            running = running[~hit]
        t += 1
        if t - t0 > MAX_STEPS:
            raise RuntimeError(f"race did not finish within {MAX_STEPS} steps; check the rates")
    return winner, win_step


def _round_accounting(config: SimConfig, winner, prev, taus):
    p = config.params
    kept = p.L * (p.T - taus) / p.T_b
    if config.micro_fraction_mode == "floored":
        kept = np.floor(kept + 1e-9)
    share = np.where(winner == prev, 1.0, 1.0 - p.alpha)
    reward = share * p.r * kept + p.R
    return reward, kept, p.L - kept


def run_round(config: SimConfig, rng: np.random.Generator, prev_leader: int) -> RoundOutcome:
    """Simulate one interval given the previous leader."""
    miners = np.array(config.miners_per_pool)
    starts = config.start_steps[prev_leader]
    w, step = _race(rng, miners, config.success_prob, starts, 1)
    winner = int(w[0])
    tau = config.strategy_table[prev_leader, winner]
    reward, kept, dropped = _round_accounting(config, np.array([winner]), np.array([prev_leader]), np.array([tau]))
    return RoundOutcome(winner, int(step[0]) + 1, float(reward[0]), float(kept[0]), float(dropped[0]), prev_leader)


def run_sim(config: SimConfig, keep_rounds: bool = False) -> SimStats:
    """Run ``config.rounds`` consecutive intervals; deterministic given the seed."""
    n = config.n_pools
    miners = np.array(config.miners_per_pool)
    seeds = np.random.SeedSequence(config.seed)
    first, *case_seeds = seeds.spawn(n + 1)

    lam = np.array(config.pools.lambdas)
    prev0 = int(np.random.Generator(np.random.PCG64(first)).choice(n, p=lam / lam.sum()))

    # races only depend on the start row, so simulate each distinct row once
    starts = config.start_steps
    rows: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
    case_result = []
    for c in range(n):
        key = tuple(starts[c])
        if key not in rows:
            rng = np.random.Generator(np.random.PCG64(case_seeds[c]))
            rows[key] = _race(rng, miners, config.success_prob, starts[c], config.rounds)
        case_result.append(rows[key])

    winners = np.empty(config.rounds, dtype=np.int64)
    steps = np.empty(config.rounds, dtype=np.int64)
    prevs = np.empty(config.rounds, dtype=np.int64)
    prev = prev0
    for i in range(config.rounds):
        w = case_result[prev][0][i]
        winners[i], steps[i], prevs[i] = w, case_result[prev][1][i], prev
        prev = w

    taus = config.strategy_table[prevs, winners]
    reward, kept, dropped = _round_accounting(config, winners, prevs, taus)

    per_pool = np.zeros((n, config.rounds))
    per_pool[winners, np.arange(config.rounds)] = reward
    counts = np.bincount(winners, minlength=n)
    total = per_pool.sum(axis=1)
    table = None
    if keep_rounds:
        table = {
            "round": np.arange(1, config.rounds + 1),
            "winner": winners,
            "win_time": steps + 1,
            "reward": reward,
            "included": kept,
            "discarded": dropped,
            "prev_leader": prevs,
        }
    return SimStats(
        ids=config.ids,
        win_counts=counts,
        win_frequency=counts / config.rounds,
        total_reward=total,
        average_reward=total / config.rounds,
        reward_std=per_pool.std(axis=1, ddof=1) if config.rounds > 1 else np.zeros(n),
        prev_leader_frequency=np.bincount(prevs, minlength=n) / config.rounds,
        avg_discarded=float(dropped.mean()),
        avg_included=float(kept.mean()),
        rounds_completed=config.rounds,
        seed=config.seed,
        params=config.params,
        miners_per_pool=config.miners_per_pool,
        rounds_table=table,
    )


@dataclass(frozen=True)
class TpsPenalty:
    sum_reward_gap: float
    avg_discarded: float
    discarded_gap: float


def measure_tps_penalty(stats_advanced: SimStats, stats_honest: SimStats) -> TpsPenalty:
    """System cost of advanced mining relative to an honest baseline.

    ``sum_reward_gap`` is the drop in the pools' summed average reward;
    ``avg_discarded`` the micro blocks per round left out of the chain.
    """
    a, h = stats_advanced, stats_honest
    if (a.params, a.miners_per_pool, a.rounds_completed, a.ids) != (h.params, h.miners_per_pool, h.rounds_completed, h.ids):
        raise ConfigError("penalty needs two runs that differ only in strategies")
    return TpsPenalty(
        sum_reward_gap=float(h.average_reward.sum() - a.average_reward.sum()),
        avg_discarded=a.avg_discarded,
        discarded_gap=a.avg_discarded - h.avg_discarded,
    )


def analytic_rewards(config: SimConfig, prev_mix: Sequence[float], quantized: bool = True, win_model: str = "exact") -> np.ndarray:
    """Expected per-round reward of each pool under the continuous-time model.

    ``prev_mix`` weights the previous-leader cases, typically the realized
    ``SimStats.prev_leader_frequency``. With ``quantized`` the win probability
    uses the durations realized on the step grid while the reward keeps the
    nominal duration, mirroring the simulator's accounting.
    """
    pools = config.pools
    p = config.params
    table = config.strategy_table
    eff = np.clip(config.effective_taus, p.T_m, p.T) if quantized else table
    out = np.zeros(config.n_pools)
    for c, weight in enumerate(prev_mix):
        if weight == 0:
            continue
        spec = GameSpec(pools, p, PrevLeader(pools.ids[c]), win_model)
        q = [_reward(p, n == c, table[c][n]) for n in range(config.n_pools)]
        out += weight * win_probs(spec, eff[c]) * np.array(q)
    return out


def _reward(params: ChainParams, leads: bool, tau: float) -> float:
    share = 1.0 if leads else 1.0 - params.alpha
    return share * params.r * params.L * (params.T - tau) / params.T_b + params.R
