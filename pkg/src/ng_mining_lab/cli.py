"""``ng-mining-lab``: sweep the solvers and the simulator, emit CSV or JSON tables.

Every flag can also be set through an environment variable named
``NG_MINING_LAB_<FLAG>`` (upper case, dashes as underscores), e.g.
``NG_MINING_LAB_ROUNDS=10000``. Flags given on the command line win.

Exit status: 0 on success, 1 if some equilibrium solve did not converge,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from pathlib import Path

from . import experiments as ex
from .params import BUNDLED_CONFIGS, Config, ConfigError, bundled_config_path, load_config
from .race import ATTACKER, HONEST
from .simulator import SimConfig, run_sim

ENV_PREFIX = "NG_MINING_LAB_"
EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2

DEFAULT_SWEEPS = {
    "optimize": "lambda_a=0.1:0.4:0.1",
    "game2": "lambda_a=0.05:0.45:0.05",
    "simulate": "lambda_a=0.05,0.15,0.25",
    "sweep": "lambda_a=0.05:0.45:0.05",
}
DEFAULT_R = {"optimize": "10", "game2": "1,5,10", "gameN": "1", "simulate": "1,10", "sweep": "1,5,10"}


def _env(flag: str, default=None):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"), default)


def _add_common(p: argparse.ArgumentParser, default_config: str = "defaults"):
    p.add_argument("--config", default=_env("config", default_config),
                   help=f"JSON config path or a bundled name ({', '.join(BUNDLED_CONFIGS)})")
    p.add_argument("--prev", default=_env("prev"), help="previous-leader case")
    p.add_argument("--sweep", default=_env("sweep"), help="VAR=start:stop:step, VAR=v1,v2 or VAR= (empty)")
    p.add_argument("--R", dest="R", default=_env("R"), help="comma-separated mint rewards")
    p.add_argument("--rounds", type=int, default=_env("rounds"), help="simulated rounds per run")
    p.add_argument("--seed", type=int, default=_env("seed"), help="base RNG seed")
    p.add_argument("--out", default=_env("out"), help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=_env("format", "csv"))
    p.add_argument("--workers", type=int, default=_env("workers", "1"), help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ng-mining-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="single attacker: reward curves and optimal mining duration")
    _add_common(p)
    p.add_argument("--points", type=int, default=_env("points", "33"), help="tau grid size per curve")

    p = sub.add_parser("game2", help="two-pool equilibria across a rate sweep")
    _add_common(p)

    p = sub.add_parser("gameN", help="N-pool equilibria with one swept rate")
    _add_common(p, default_config="three-pool")
    p.add_argument("--fix", action="append", default=None,
                   help="VAR=v1,v2 holds another pool's rate at each listed value (repeatable)")
    p.add_argument("--balance", default=_env("balance"), help="pool absorbing the remaining rate (default: last)")
    p.add_argument("--win-model", choices=("product", "exact"), default=_env("win-model", "product"))

    p = sub.add_parser("simulate", help="Monte Carlo runs of the two- and three-pool strategy setups")
    _add_common(p)
    p.add_argument("--three-pool", default=_env("three-pool", "0.25,0.1,0.15"),
                   help="rates of the three-pool scenario, or empty to skip it")
    p.add_argument("--steps-per-unit", type=int, default=_env("steps-per-unit", "1"))
    p.add_argument("--single", action="store_true",
                   help="simulate the config's own pools and strategy once and print its statistics")
    p.add_argument("--rounds-csv", default=None, help="with --single: also write the per-round table here")

    p = sub.add_parser("sweep", help="one attacker against honest pools, simulated across a rate sweep")
    _add_common(p)
    return parser


# -- argument helpers ------------------------------------------------------


def _load(name: str) -> Config:
    path = bundled_config_path(name) if name in BUNDLED_CONFIGS else Path(name)
    return load_config(path)


def _floats(text: str, what: str) -> list[float]:
    try:
        return ex.parse_range(text)
    except ValueError as exc:
        raise ConfigError(f"bad {what} {text!r}: {exc}") from None


def _sweep(text: str) -> tuple[str, list[float]]:
    if "=" not in text:
        raise ConfigError(f"sweep must look like VAR=start:stop:step, got {text!r}")
    var, values = text.split("=", 1)
    return var.strip(), _floats(values, "sweep")


def _check_shares(values: list[float], cfg: Config, what: str = "lambda_a"):
    top = 1.0 / cfg.params.T_m
    for v in values:
        if not 0.0 < v < top:
            raise ConfigError(f"{what} = {v} outside (0, {top})")


def _lambda_a_sweep(args, cfg: Config) -> list[float]:
    var, values = _sweep(args.sweep or DEFAULT_SWEEPS[args.command])
    if var.lower() != "lambda_a":
        raise ConfigError(f"{args.command} sweeps lambda_a only, got {var!r}")
    _check_shares(values, cfg)
    return values


def _r_values(args) -> list[float]:
    values = _floats(args.R or DEFAULT_R[args.command], "R list")
    if any(v < 0 for v in values):
        raise ConfigError("R must be non-negative")
    return values


def _pool_var(var: str, ids) -> int:
    if not var.lower().startswith("lambda_"):
        raise ConfigError(f"unknown sweep variable {var!r}")
    name = var[len("lambda_"):]
    for i, pid in enumerate(ids):
        if pid.lower() == name.lower():
            return i
    raise ConfigError(f"sweep variable {var!r} names no pool")


# -- commands --------------------------------------------------------------


def cmd_optimize(args, cfg: Config):
    prevs = {None: (HONEST, ATTACKER), "both": (HONEST, ATTACKER), HONEST: (HONEST,), ATTACKER: (ATTACKER,)}
    if args.prev not in prevs:
        raise ConfigError(f"optimize --prev must be honest, attacker or both, got {args.prev!r}")
    rows = ex.optimize_rows(cfg.params, _lambda_a_sweep(args, cfg), _r_values(args), prevs[args.prev], args.points)
    return rows, ex.OPTIMIZE_COLUMNS, True


def cmd_game2(args, cfg: Config):
    ids = ("A", "B")
    prevs = ids if args.prev in (None, "all") else (args.prev,)
    if any(p not in ids for p in prevs):
        raise ConfigError(f"game2 --prev must be A, B or all, got {args.prev!r}")
    rows = ex.game2_rows(cfg.params, _lambda_a_sweep(args, cfg), _r_values(args), prevs, workers=args.workers)
    return rows, ex.GAME2_COLUMNS, all(r["converged"] for r in rows)


def cmd_gamen(args, cfg: Config):
    ids = cfg.pools.ids
    lambdas = list(cfg.pools.lambdas)
    top = round(1.0 / cfg.params.T_m - 0.025, 12)
    var, values = _sweep(args.sweep or f"lambda_{ids[0]}=0.025:{top}:0.025")
    swept = _pool_var(var, ids)
    _check_shares(values, cfg, var)
    balance = len(ids) - 1 if args.balance is None else cfg.pools.index(args.balance)
    prev = args.prev or ids[-1]
    if prev not in ids:
        raise ConfigError(f"previous leader {prev!r} is not a pool")

    fixes = []
    for spec in args.fix or []:
        fvar, fvalues = _sweep(spec)
        idx = _pool_var(fvar, ids)
        if idx in (swept, balance):
            raise ConfigError(f"{fvar} is swept or absorbs the remaining rate")
        _check_shares(fvalues, cfg, fvar)
        fixes.append((idx, fvalues))
    rows = []
    for combo in itertools.product(*(v for _, v in fixes)):
        lam = list(lambdas)
        for (idx, _), value in zip(fixes, combo):
            lam[idx] = value
        rows += ex.gamen_rows(cfg.params, ids, lam, swept, values, _r_values(args), prev, balance,
                              win_model=args.win_model, workers=args.workers)
    ok = all(r["converged"] and r["restart_agrees"] for r in rows)
    return rows, ex.gamen_columns(ids), ok


def _rounds_seed(args, cfg: Config) -> tuple[int, int]:
    rounds = args.rounds if args.rounds is not None else int(cfg.sim.get("rounds", 1000))
    seed = args.seed if args.seed is not None else int(cfg.sim.get("seed", 0))
    if rounds < 1:
        raise ConfigError("rounds must be positive")
    return rounds, seed


def cmd_simulate(args, cfg: Config):
    rounds, seed = _rounds_seed(args, cfg)
    total = int(cfg.sim.get("miners_total", ex.DEFAULT_MINERS))
    if args.single:
        return _simulate_single(args, cfg, rounds, seed, total)
    three = _floats(args.three_pool, "three-pool rates") or None
    if three is not None and (len(three) != 3 or abs(sum(three) * cfg.params.T_m - 1.0) > 1e-9):
        raise ConfigError("three-pool rates must be three numbers summing to 1/T_m")
    jobs = ex.simulate_jobs(cfg.params, _lambda_a_sweep(args, cfg), _r_values(args), three, rounds, seed,
                            total, args.steps_per_unit)
    return ex.simulate_rows(jobs, args.workers), ex.SIMULATE_COLUMNS, True


def _simulate_single(args, cfg: Config, rounds: int, seed: int, total: int):
    miners = ex.miners_for(cfg.pools.lambdas, cfg.params.T_m, total)
    strategy = cfg.strategy.taus if cfg.strategy is not None else "honest"
    config = SimConfig(cfg.params, miners, strategy, rounds, seed, steps_per_unit=args.steps_per_unit,
                       ids=cfg.pools.ids)
    stats = run_sim(config, keep_rounds=args.rounds_csv is not None)
    if args.rounds_csv:
        Path(args.rounds_csv).write_text(stats.rounds_csv())
    return stats, None, True


def cmd_sweep(args, cfg: Config):
    rounds, seed = _rounds_seed(args, cfg)
    total = int(cfg.sim.get("miners_total", ex.DEFAULT_MINERS))
    rows = ex.sweep_rows(cfg.params, _lambda_a_sweep(args, cfg), _r_values(args), rounds, seed, total, args.workers)
    return rows, ex.SWEEP_COLUMNS, True


COMMANDS = {
    "optimize": cmd_optimize,
    "game2": cmd_game2,
    "gameN": cmd_gamen,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("workers must be at least 1")
        cfg = _load(args.config)
        result, columns, ok = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"ng-mining-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = result.to_json() + "\n" if columns is None else ex.format_table(result, columns, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not ok:
        print("ng-mining-lab: some equilibrium solves did not converge (see the converged column)", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
