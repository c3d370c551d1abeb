"""Table builders behind the command line: sweeps over solvers and simulations.

Every builder returns a list of flat row dicts whose keys are fixed column
names, ordered deterministically by the sweep key.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .game import (
    GameSpec,
    solve_equilibrium,
    two_player_equilibrium_closed_form,
    utilities,
    verify_equilibrium,
    win_probs,
)
from .params import ChainParams, PoolSet, PrevLeader, StrategyProfile
from .race import (
    ATTACKER,
    HONEST,
    RaceSpec,
    expected_reward,
    optimal_tau_closed_form,
    optimal_tau_numeric,
)
from .simulator import SimConfig, analytic_rewards, measure_tps_penalty, run_sim

DEFAULT_MINERS = 2**10

OPTIMIZE_COLUMNS = (
    "lambda_a", "R", "prev", "tau", "expected_reward",
    "tau_star_closed", "tau_star_numeric", "reward_at_star", "reward_at_honest",
)
GAME2_COLUMNS = (
    "lambda_a", "lambda_b", "R", "prev", "tau_a_closed", "tau_b_closed", "tau_a", "tau_b",
    "utility_a", "utility_b", "honest_utility_a", "honest_utility_b",
    "closed_form_gain", "max_deviation_gain", "iterations", "converged",
)
GAMEN_COLUMNS_HEAD = ("sweep_value", "R", "prev")
GAMEN_COLUMNS_TAIL = ("max_deviation_gain", "iterations", "converged", "restart_agrees")
SIMULATE_COLUMNS = (
    "scenario", "setup", "R", "lambda_a", "pool", "lambda", "miners",
    "average_reward", "reward_se", "analytic_reward", "win_frequency", "win_se",
    "product_win_prob", "exact_win_prob", "avg_discarded", "sum_average_reward",
    "penalty_sum_reward", "penalty_discarded",
)
SWEEP_COLUMNS = (
    "lambda_a", "R", "setup", "tau_prev_honest", "tau_prev_attacker",
    "average_reward", "reward_se", "win_frequency", "win_se", "analytic_reward",
)


def parse_range(text: str) -> list[float]:
    """``"0.05:0.45:0.05"`` (inclusive), ``"0.1,0.2"``, or ``""`` for no points."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("sweep step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(n, 0))]
    return [float(x) for x in text.split(",") if x.strip()]


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _run_seed(base: int, *key: int) -> int:
    return int(np.random.SeedSequence([base, *key]).generate_state(1, np.uint64)[0])


# -- single attacker --------------------------------------------------------


def optimize_rows(params: ChainParams, lambdas_a: Iterable[float], R_values: Iterable[float],
                  prevs: Sequence[str] = (HONEST, ATTACKER), n_points: int = 33, tol: float = 1e-9) -> list[dict]:
    rows = []
    taus = np.linspace(params.T_m, params.T, n_points)
    for R in R_values:
        p = params.replace(R=R)
        for prev in prevs:
            for la in lambdas_a:
                spec = RaceSpec.from_share(la, p, prev)
                closed = optimal_tau_closed_form(spec)
                numeric = optimal_tau_numeric(spec, tol)
                head = {
                    "tau_star_closed": closed,
                    "tau_star_numeric": numeric,
                    "reward_at_star": expected_reward(spec, closed),
                    "reward_at_honest": expected_reward(spec, p.T_m),
                }
                for t, pi in zip(taus, expected_reward(spec, taus)):
                    rows.append({"lambda_a": la, "R": R, "prev": prev, "tau": float(t),
                                 "expected_reward": float(pi), **head})
    return rows


# -- games -----------------------------------------------------------------


def _game2_row(args) -> dict:
    params, la, R, prev, tol = args
    p = params.replace(R=R)
    spec = GameSpec.from_lambdas([la, 1.0 / p.T_m - la], p, prev)
    closed = two_player_equilibrium_closed_form(spec)
    report = solve_equilibrium(spec, tol=tol)
    honest = utilities(spec, StrategyProfile.honest(p, 2))
    return {
        "lambda_a": la, "lambda_b": 1.0 / p.T_m - la, "R": R, "prev": spec.prev.pool_id,
        "tau_a_closed": closed[0], "tau_b_closed": closed[1],
        "tau_a": report.profile[0], "tau_b": report.profile[1],
        "utility_a": report.utilities[0], "utility_b": report.utilities[1],
        "honest_utility_a": honest[0], "honest_utility_b": honest[1],
        "closed_form_gain": verify_equilibrium(spec, closed),
        "max_deviation_gain": report.max_deviation_gain,
        "iterations": report.iterations,
        "converged": bool(report.converged and report.restart_agrees),
    }


def game2_rows(params: ChainParams, lambdas_a: Iterable[float], R_values: Iterable[float],
               prevs: Sequence[str] = ("A", "B"), tol: float = 1e-7, workers: int = 1) -> list[dict]:
    jobs = [(params, la, R, prev, tol) for R in R_values for prev in prevs for la in lambdas_a]
    return _pmap(_game2_row, jobs, workers)


def balanced_pools(ids: Sequence[str], lambdas: Sequence[float], balance: int, T_m: float) -> PoolSet | None:
    """Pools whose ``balance`` entry absorbs the remaining rate; None if it would be empty."""
    lam = list(lambdas)
    lam[balance] = 1.0 / T_m - (sum(lam) - lam[balance])
    if lam[balance] <= 1e-12:
        return None
    return PoolSet.from_lambdas(lam, ids)


def gamen_columns(ids: Sequence[str]) -> tuple[str, ...]:
    per_pool = tuple(f"{k}_{i}" for i in ids for k in ("lambda", "tau", "utility"))
    return GAMEN_COLUMNS_HEAD + per_pool + GAMEN_COLUMNS_TAIL


def _gamen_row(args) -> dict | None:
    params, ids, lambdas, swept, value, balance, R, prev, tol, win_model = args
    lam = list(lambdas)
    lam[swept] = value
    p = params.replace(R=R)
    pools = balanced_pools(ids, lam, balance, p.T_m)
    if pools is None:
        return None
    spec = GameSpec(pools, p, PrevLeader(prev), win_model)
    rep = solve_equilibrium(spec, tol=tol)
    row = {"sweep_value": value, "R": R, "prev": prev}
    for i, pid in enumerate(ids):
        row[f"lambda_{pid}"] = pools[i].lam
        row[f"tau_{pid}"] = rep.profile[i]
        row[f"utility_{pid}"] = rep.utilities[i]
    row.update(max_deviation_gain=rep.max_deviation_gain, iterations=rep.iterations,
               converged=bool(rep.converged), restart_agrees=bool(rep.restart_agrees))
    return row


def gamen_rows(params: ChainParams, ids: Sequence[str], lambdas: Sequence[float], swept: int,
               values: Iterable[float], R_values: Iterable[float], prev: str, balance: int | None = None,
               tol: float = 1e-7, win_model: str = "product", workers: int = 1) -> list[dict]:
    balance = len(ids) - 1 if balance is None else balance
    if balance == swept:
        raise ValueError("the swept pool cannot also absorb the remaining rate")
    jobs = [(params, tuple(ids), tuple(lambdas), swept, v, balance, R, prev, tol, win_model)
            for R in R_values for v in values]
    return [r for r in _pmap(_gamen_row, jobs, workers) if r is not None]


# -- simulations -----------------------------------------------------------


def miners_for(lambdas: Sequence[float], T_m: float, total: int = DEFAULT_MINERS) -> tuple[int, ...]:
    """Integer miner counts closest to the requested rate shares."""
    if abs(T_m * sum(lambdas) - 1.0) > 1e-9:
        raise ValueError("rates must satisfy T_m * sum(lambda) = 1")
    counts = [max(1, int(round(total * lam * T_m))) for lam in lambdas]
    counts[-1] = total - sum(counts[:-1])
    return tuple(counts)


def equilibrium_table(params: ChainParams, pools: PoolSet, tol: float = 1e-7) -> list[list[float]]:
    """Equilibrium durations for every previous-leader case, one row per case."""
    table = []
    for pid in pools.ids:
        spec = GameSpec(pools, params, PrevLeader(pid))
        if len(pools) == 2:
            table.append(list(two_player_equilibrium_closed_form(spec).taus))
        else:
            table.append(list(solve_equilibrium(spec, tol=tol, restart=False).profile.taus))
    return table


def two_pool_setups(table: list[list[float]], T_m: float) -> dict[str, list[list[float]]]:
    def honest_cols(cols):
        return [[T_m if j in cols else t for j, t in enumerate(row)] for row in table]

    return {
        "equilibrium": table,
        "honest": honest_cols({0, 1}),
        "advanced_A": honest_cols({1}),
        "advanced_B": honest_cols({0}),
    }


def three_pool_setups(table: list[list[float]], attacker: list[list[float]], T_m: float) -> dict[str, list[list[float]]]:
    """All-equilibrium, all-honest, pool A alone at its equilibrium duration, and
    pool A alone at its optimum against honest pools."""
    n = len(table)
    return {
        "equilibrium": table,
        "honest": [[T_m] * n for _ in table],
        "advanced_A": [[row[0]] + [T_m] * (n - 1) for row in table],
        "optimal_A": attacker,
    }


@dataclass(frozen=True)
class SimJob:
    scenario: str
    setup: str
    R: float
    lambda_a: float
    config: SimConfig


def _run_job(job: SimJob):
    return run_sim(job.config)


def _sim_rows(job: SimJob, stats, honest_stats=None) -> list[dict]:
    cfg = job.config
    pools = cfg.pools
    mix = stats.prev_leader_frequency
    product = analytic_rewards_probs(cfg, mix, "product")
    exact = analytic_rewards_probs(cfg, mix, "exact")
    analytic = analytic_rewards(cfg, mix)
    penalty = measure_tps_penalty(stats, honest_stats) if honest_stats is not None else None
    rows = []
    for i, pid in enumerate(cfg.ids):
        rows.append({
            "scenario": job.scenario, "setup": job.setup, "R": job.R, "lambda_a": job.lambda_a,
            "pool": pid, "lambda": pools[i].lam, "miners": cfg.miners_per_pool[i],
            "average_reward": float(stats.average_reward[i]), "reward_se": float(stats.reward_se[i]),
            "analytic_reward": float(analytic[i]), "win_frequency": float(stats.win_frequency[i]), "win_se": float(stats.win_se[i]),
            "product_win_prob": float(product[i]), "exact_win_prob": float(exact[i]),
            "avg_discarded": stats.avg_discarded,
            "sum_average_reward": float(stats.average_reward.sum()),
            "penalty_sum_reward": None if penalty is None else penalty.sum_reward_gap,
            "penalty_discarded": None if penalty is None else penalty.avg_discarded,
        })
    return rows


def analytic_rewards_probs(config: SimConfig, prev_mix, win_model: str) -> np.ndarray:
    """Win probabilities of the analytic model averaged over previous-leader cases."""
    eff = np.clip(config.effective_taus, config.params.T_m, config.params.T)
    out = np.zeros(config.n_pools)
    for c, weight in enumerate(prev_mix):
        if weight:
            spec = GameSpec(config.pools, config.params, PrevLeader(config.ids[c]), win_model)
            out += weight * win_probs(spec, eff[c])
    return out


def simulate_jobs(params: ChainParams, lambdas_a: Iterable[float], R_values: Iterable[float],
                  three_pool: Sequence[float] | None, rounds: int, seed: int,
                  total_miners: int = DEFAULT_MINERS, steps_per_unit: int = 1) -> list[SimJob]:
    jobs = []
    idx = 0
    for R in R_values:
        p = params.replace(R=R)
        for la in lambdas_a:
            miners = miners_for([la, 1.0 / p.T_m - la], p.T_m, total_miners)
            base = SimConfig(p, miners, "honest", rounds, 0, steps_per_unit=steps_per_unit)
            table = equilibrium_table(p, base.pools)
            for setup, strat in two_pool_setups(table, p.T_m).items():
                jobs.append(SimJob("two_pool", setup, R, la, base.with_(strategies=strat, seed=_run_seed(seed, idx))))
                idx += 1
        if three_pool:
            miners = miners_for(three_pool, p.T_m, total_miners)
            base = SimConfig(p, miners, "honest", rounds, 0, steps_per_unit=steps_per_unit)
            table = equilibrium_table(p, base.pools)
            attacker = attacker_table(p, base.pools[0].lam, len(three_pool))
            for setup, strat in three_pool_setups(table, attacker, p.T_m).items():
                jobs.append(SimJob("three_pool", setup, R, three_pool[0], base.with_(strategies=strat, seed=_run_seed(seed, idx))))
                idx += 1
    return jobs


def simulate_rows(jobs: list[SimJob], workers: int = 1) -> list[dict]:
    stats = _pmap(_run_job, jobs, workers)
    honest = {(j.scenario, j.R, j.lambda_a): s for j, s in zip(jobs, stats) if j.setup == "honest"}
    rows = []
    for job, st in zip(jobs, stats):
        ref = honest.get((job.scenario, job.R, job.lambda_a)) if job.setup == "equilibrium" else None
        rows.extend(_sim_rows(job, st, ref))
    return rows


def attacker_table(params: ChainParams, lambda_a: float, n_pools: int = 2) -> list[list[float]]:
    """Pool 0 playing its optimum against honest pools, one row per previous leader.

    Honest pools all start at ``T_m``, so together they race like a single
    pool with their summed rate.
    """
    lead = optimal_tau_closed_form(RaceSpec.from_share(lambda_a, params, ATTACKER))
    trail = optimal_tau_closed_form(RaceSpec.from_share(lambda_a, params, HONEST))
    honest = [params.T_m] * (n_pools - 1)
    return [[lead if c == 0 else trail] + honest for c in range(n_pools)]


def sweep_rows(params: ChainParams, lambdas_a: Iterable[float], R_values: Iterable[float],
               rounds: int, seed: int, total_miners: int = DEFAULT_MINERS, workers: int = 1) -> list[dict]:
    """One attacker against honest miners, simulated at its optimum and honestly."""
    jobs = []
    idx = 0
    for R in R_values:
        p = params.replace(R=R)
        for la in lambdas_a:
            miners = miners_for([la, 1.0 / p.T_m - la], p.T_m, total_miners)
            base = SimConfig(p, miners, "honest", rounds, 0)
            lam_a = base.pools[0].lam
            table = attacker_table(p, lam_a)
            for setup, strat in (("advanced", table), ("honest", "honest")):
                jobs.append(SimJob("one_attacker", setup, R, la, base.with_(strategies=strat, seed=_run_seed(seed, idx))))
                idx += 1
    stats = _pmap(_run_job, jobs, workers)
    rows = []
    for job, st in zip(jobs, stats):
        table = job.config.strategy_table
        rows.append({
            "lambda_a": job.lambda_a, "R": job.R, "setup": job.setup,
            "tau_prev_honest": float(table[1][0]), "tau_prev_attacker": float(table[0][0]),
            "average_reward": float(st.average_reward[0]), "reward_se": float(st.reward_se[0]),
            "win_frequency": float(st.win_frequency[0]), "win_se": float(st.win_se[0]),
            "analytic_reward": float(analytic_rewards(job.config, st.prev_leader_frequency)[0]),
        })
    return rows


# -- serialization -----------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse_cell(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _plain(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def format_table(rows: list[dict], columns: Sequence[str], fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps([{c: _plain(r.get(c)) for c in columns} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def parse_table(text: str, fmt: str = "csv") -> list[dict]:
    if fmt == "json":
        return json.loads(text)
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return [{c: _parse_cell(v) for c, v in zip(header, row)} for row in reader]
