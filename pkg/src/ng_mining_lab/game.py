"""Advanced-mining games between two or more pools.

Each pool picks a mining duration ``tau_n`` in ``[T_m, T]``; its utility is
the key-block reward it would collect times its probability of finding the
next key block first. Win probabilities use the product of pairwise races by
default. ``win_model="exact"`` evaluates the true first-finisher probability
of the race instead; the two coincide for two pools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lambertw import lambert_w0_exp
from .optimize import grid_golden_max
from .params import (
    ChainParams,
    ConfigError,
    PoolSet,
    PrevLeader,
    StrategyProfile,
    check_strategy,
    validate_config,
)
from .race import block_reward, fee_share, pairwise_win_prob

WIN_MODELS = ("product", "exact")
SCAN_POINTS = 4096


@dataclass(frozen=True)
class GameSpec:
    pools: PoolSet
    params: ChainParams
    prev: PrevLeader
    win_model: str = "product"

    def __post_init__(self):
        if isinstance(self.prev, str):
            object.__setattr__(self, "prev", PrevLeader(self.prev))
        if self.win_model not in WIN_MODELS:
            raise ConfigError(f"win_model must be one of {WIN_MODELS}")
        validate_config(self.params, self.pools, prev=self.prev).raise_if_failed()

    @classmethod
    def from_lambdas(cls, lambdas, params: ChainParams, prev: str | int = -1, **kw) -> GameSpec:
        """Convenience constructor; ``prev`` may be a pool id or an index."""
        pools = PoolSet.from_lambdas(lambdas)
        if isinstance(prev, int):
            prev = pools.ids[prev]
        return cls(pools, params, PrevLeader(prev), **kw)

    @property
    def n(self) -> int:
        return len(self.pools)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array(self.pools.lambdas)

    @property
    def leader(self) -> int:
        return self.pools.index(self.prev.pool_id)

    def with_prev(self, prev: str | int) -> GameSpec:
        if isinstance(prev, int):
            prev = self.pools.ids[prev]
        return GameSpec(self.pools, self.params, PrevLeader(prev), self.win_model)


@dataclass
class EquilibriumReport:
    profile: StrategyProfile
    utilities: tuple[float, ...]
    foc_residuals: list[float | None]
    max_deviation_gain: float
    converged: bool
    iterations: int
    restart_profile: StrategyProfile | None = None
    restart_agrees: bool | None = None
    tolerance: dict = field(default_factory=dict)


def _profile(spec: GameSpec, profile) -> StrategyProfile:
    if not isinstance(profile, StrategyProfile):
        profile = StrategyProfile(tuple(profile))
    errors = check_strategy(profile, spec.params, spec.n)
    if errors:
        raise ValueError("; ".join(errors))
    return profile


def _check_index(spec: GameSpec, n: int) -> int:
    if not -spec.n <= n < spec.n:
        raise IndexError(f"pool index {n} out of range for {spec.n} pools")
    return n % spec.n


# -- win probabilities -----------------------------------------------------


def _product_win_prob(lams: np.ndarray, taus: Sequence[float], n: int, own) -> np.ndarray:
    p = np.ones_like(own)
    for m, lam_m in enumerate(lams):
        if m != n:
            p = p * pairwise_win_prob(lams[n], lam_m, own - taus[m])
    return p


def _exact_win_prob(lams: np.ndarray, taus: Sequence[float], n: int, own) -> np.ndarray:
    """Probability that pool ``n`` finishes first in the offset exponential race.

    Measured from the moment ``n`` starts, pool ``m`` starts ``own - tau_m``
    later (earlier if negative). Between consecutive start times the set of
    active pools is fixed and the density integrates in closed form.
    """
    others = [m for m in range(len(lams)) if m != n]
    lam_o = lams[others]
    offsets = own[:, None] - np.asarray([taus[m] for m in others])[None, :]
    order = np.argsort(offsets, axis=1, kind="stable")
    offsets = np.take_along_axis(offsets, order, axis=1)
    lam_sorted = lam_o[order]
    starts = np.maximum(offsets, 0.0)
    k = own.shape[0]
    rate = np.full(k, lams[n])
    log_const = np.zeros(k)
    lo = np.zeros(k)
    total = np.zeros(k)
    for j in range(len(others) + 1):
        hi = starts[:, j] if j < len(others) else np.full(k, np.inf)
        seg = np.exp(log_const - rate * lo) - np.exp(log_const - rate * hi)
        total += lams[n] / rate * seg
        if j < len(others):
            rate = rate + lam_sorted[:, j]
            log_const = log_const + lam_sorted[:, j] * offsets[:, j]
            lo = hi
    return total


def _win_prob(spec: GameSpec, taus, n: int, own) -> np.ndarray:
    own = np.atleast_1d(np.asarray(own, dtype=float))
    fn = _product_win_prob if spec.win_model == "product" else _exact_win_prob
    return fn(spec.lambdas, taus, n, own)


def n_player_win_prob(spec: GameSpec, profile, n: int) -> float:
    """Probability that pool ``n`` mines the next key block.

    In the default model this is the product over opponents of the pairwise
    race probabilities. For three or more pools these events share pool
    ``n``'s mining time, so the product is not the true race probability and
    the pools' values need not sum to one.
    """
    profile = _profile(spec, profile)
    n = _check_index(spec, n)
    return float(_win_prob(spec, profile.taus, n, profile.taus[n])[0])


def win_probs(spec: GameSpec, profile) -> np.ndarray:
    profile = _profile(spec, profile)
    return np.array([_win_prob(spec, profile.taus, n, profile.taus[n])[0] for n in range(spec.n)])


# -- rewards and utilities ------------------------------------------------


def n_player_reward(spec: GameSpec, n: int, tau_n):
    n = _check_index(spec, n)
    t = np.asarray(tau_n, dtype=float)
    p = spec.params
    if np.any(t < p.T_m) or np.any(t > p.T):
        raise ValueError("tau outside [T_m, T]")
    q = block_reward(p, n == spec.leader, t)
    return float(q) if np.ndim(tau_n) == 0 else q


def utility_curve(spec: GameSpec, profile, n: int, own_taus) -> np.ndarray:
    """Utility of pool ``n`` for each candidate ``own_taus``, opponents fixed."""
    taus = profile.taus if isinstance(profile, StrategyProfile) else tuple(profile)
    own = np.atleast_1d(np.asarray(own_taus, dtype=float))
    return block_reward(spec.params, n == spec.leader, own) * _win_prob(spec, taus, n, own)


def n_player_utility(spec: GameSpec, profile, n: int) -> float:
    profile = _profile(spec, profile)
    n = _check_index(spec, n)
    return float(utility_curve(spec, profile, n, profile.taus[n])[0])


def utilities(spec: GameSpec, profile) -> tuple[float, ...]:
    profile = _profile(spec, profile)
    return tuple(float(utility_curve(spec, profile, n, profile.taus[n])[0]) for n in range(spec.n))


# -- closed-form two-player results ----------------------------------------


def _fee_slope(params: ChainParams, leads: bool) -> float:
    """Fees forgone per unit of extra mining time."""
    return fee_share(params, leads) * params.r * params.L / params.T_b


def trailing_stationary_tau(params: ChainParams, lam_other: float, leads: bool) -> float:
    """Stationary point for a pool that mines for less time than its opponent.

    Behind the opponent, the win probability grows at rate ``lam_other``
    regardless of the opponent's exact duration, giving
    ``tau = T + R / a - 1 / lam_other`` with ``a`` the fee slope.
    """
    a = _fee_slope(params, leads)
    if a == 0.0:
        return math.inf
    return params.T + params.R / a - 1.0 / lam_other


def leading_stationary_tau(
    params: ChainParams, lam_self: float, lam_other: float, tau_other: float, leads: bool
) -> float:
    """Stationary point for a pool that mines for longer than its opponent.

    ``tau = T + R/a - (W(z) - 1) / lam_self`` with
    ``z = (lam_self + lam_other) / lam_other * exp(lam_self (T - tau_other + R/a) + 1)``.
    With ``tau_other = T_m`` this is the single-attacker optimum.
    """
    a = _fee_slope(params, leads)
    if a == 0.0:
        return math.inf
    k = params.R / a
    log_z = math.log((lam_self + lam_other) / lam_other) + lam_self * (params.T - tau_other + k) + 1.0
    return params.T + k - (lambert_w0_exp(log_z) - 1.0) / lam_self


def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


def _require_two(spec: GameSpec):
    if spec.n != 2:
        raise ConfigError("closed-form results exist for two pools only")


def two_player_best_response(spec: GameSpec, n: int, tau_other: float) -> float:
    """Closed-form best response of pool ``n`` to its opponent's duration.

    The utility is continuously differentiable across ``tau_n = tau_other``
    and its derivative is decreasing, so the sign of the derivative at the
    kink decides which side holds the optimum.
    """
    _require_two(spec)
    n = _check_index(spec, n)
    m = 1 - n
    p = spec.params
    lam = spec.lambdas
    leads = n == spec.leader
    behind = trailing_stationary_tau(p, lam[m], leads)
    if behind < tau_other:
        return max(behind, p.T_m)
    ahead = leading_stationary_tau(p, lam[n], lam[m], tau_other, leads)
    return _clamp(ahead, tau_other, p.T)


def _ordered_candidate(spec: GameSpec, early: int) -> tuple[float, float]:
    p = spec.params
    lam = spec.lambdas
    late = 1 - early
    tau_late = _clamp(trailing_stationary_tau(p, lam[early], late == spec.leader), p.T_m, p.T)
    tau_early = _clamp(
        leading_stationary_tau(p, lam[early], lam[late], tau_late, early == spec.leader), tau_late, p.T
    )
    taus = [0.0, 0.0]
    taus[early], taus[late] = tau_early, tau_late
    return taus[0], taus[1]


def two_player_equilibrium_closed_form(spec: GameSpec, ordering: str | int | None = None) -> StrategyProfile:
    """Nash equilibrium of the two-pool game in closed form.

    ``ordering`` names the pool that mines for longer (starts earlier). The
    other pool's duration only depends on the opponent's rate; the longer
    miner then plays its Lambert-W best response. Both are clamped to
    ``[T_m, T]``. With ``ordering=None`` the ordering whose profile is a
    mutual best response is returned.
    """
    _require_two(spec)
    if ordering is not None:
        early = spec.pools.index(ordering) if isinstance(ordering, str) else _check_index(spec, ordering)
        return StrategyProfile(_ordered_candidate(spec, early))
    for early in (0, 1):
        cand = _ordered_candidate(spec, early)
        if all(
            abs(two_player_best_response(spec, n, cand[1 - n]) - cand[n]) <= 1e-9 * spec.params.T
            for n in (0, 1)
        ):
            return StrategyProfile(cand)
    raise ArithmeticError("no consistent two-player equilibrium ordering found")


# -- numerical best response and equilibrium -------------------------------


def best_response(spec: GameSpec, profile, n: int, tol: float = 1e-9, n_grid: int = 1025) -> float:
    """Numerical argmax of pool ``n``'s utility with the others held fixed."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    profile = _profile(spec, profile)
    n = _check_index(spec, n)
    tau, _ = grid_golden_max(
        lambda own: utility_curve(spec, profile, n, own), spec.params.T_m, spec.params.T, tol, n_grid
    )
    return tau


def verify_equilibrium(spec: GameSpec, profile, eps: float | None = None, n_scan: int = SCAN_POINTS) -> float:
    """Largest utility gain any single pool finds by scanning deviations.

    Returns 0.0 when no scanned deviation improves on the profile. ``eps``
    is accepted for symmetry with :func:`is_equilibrium` and ignored here.
    """
    profile = _profile(spec, profile)
    grid = np.linspace(spec.params.T_m, spec.params.T, n_scan)
    gain = 0.0
    for n in range(spec.n):
        current = utility_curve(spec, profile, n, profile.taus[n])[0]
        best = utility_curve(spec, profile, n, grid).max()
        gain = max(gain, float(best - current))
    return gain


def is_equilibrium(spec: GameSpec, profile, eps: float | None = None) -> bool:
    eps = 1e-6 * spec.params.max_reward if eps is None else eps
    return verify_equilibrium(spec, profile) <= eps


def foc_residuals(spec: GameSpec, profile, boundary_tol: float = 1e-7) -> list[float | None]:
    """Central-difference derivative of each pool's utility in its own duration.

    Coordinates sitting on ``T_m`` or ``T`` get ``None``: there the
    first-order condition is replaced by a boundary condition.
    """
    profile = _profile(spec, profile)
    p = spec.params
    h = 1e-6 * (p.T - p.T_m)
    out: list[float | None] = []
    for n, tau in enumerate(profile.taus):
        if tau - p.T_m <= boundary_tol or p.T - tau <= boundary_tol:
            out.append(None)
            continue
        lo, hi = max(tau - h, p.T_m), min(tau + h, p.T)
        u = utility_curve(spec, profile, n, [lo, hi])
        out.append(float((u[1] - u[0]) / (hi - lo)))
    return out


def iterate_best_response(spec: GameSpec, start, tol: float, max_iters: int) -> tuple[StrategyProfile, bool, int]:
    """Round-robin best responses until no coordinate moves more than ``tol``."""
    profile = _profile(spec, start)
    br_tol = max(tol * 1e-2, 1e-11)
    for it in range(1, max_iters + 1):
        change = 0.0
        for n in range(spec.n):
            new = best_response(spec, profile, n, br_tol)
            change = max(change, abs(new - profile.taus[n]))
            profile = profile.replace(n, new)
        if change <= tol:
            return profile, True, it
    return profile, False, max_iters


def solve_equilibrium(
    spec: GameSpec,
    tol: float = 1e-7,
    max_iters: int = 500,
    start=None,
    gain_tol: float | None = None,
    foc_tol: float | None = None,
    restart: bool = True,
) -> EquilibriumReport:
    """Iterated best response from the honest profile.

    A second run from the all-``T`` profile checks empirically that the
    fixed point does not depend on where the iteration starts.
    Non-convergence is reported in the result, not raised.
    """
    if spec.n < 2:
        raise ConfigError("a game needs at least two pools")
    p = spec.params
    gain_tol = 1e-6 * p.max_reward if gain_tol is None else gain_tol
    foc_tol = 1e-5 * p.max_reward if foc_tol is None else foc_tol
    start = StrategyProfile.honest(p, spec.n) if start is None else start
    profile, ok, iters = iterate_best_response(spec, start, tol, max_iters)

    restart_profile = agrees = None
    if restart:
        restart_profile, ok2, _ = iterate_best_response(spec, (p.T,) * spec.n, tol, max_iters)
        agrees = ok2 and max(abs(a - b) for a, b in zip(profile.taus, restart_profile.taus)) <= 10 * tol

    gain = verify_equilibrium(spec, profile)
    focs = foc_residuals(spec, profile, boundary_tol=max(10 * tol, 1e-9))
    foc_ok = all(abs(r) <= foc_tol for r in focs if r is not None)
    return EquilibriumReport(
        profile=profile,
        utilities=utilities(spec, profile),
        foc_residuals=focs,
        max_deviation_gain=gain,
        converged=ok and gain <= gain_tol and foc_ok,
        iterations=iters,
        restart_profile=restart_profile,
        restart_agrees=agrees,
        tolerance={"tol": tol, "gain_tol": gain_tol, "foc_tol": foc_tol},
    )
