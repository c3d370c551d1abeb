"""One strategic miner racing an aggregated honest miner.

The attacker chooses how long it mines (``tau``) before the nominal next key
block; everyone else mines for the default ``T_m``. Mining times are
exponential, so the race reduces to a Laplace-distributed difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lambertw import lambert_w0_exp
from .optimize import grid_golden_max
from .params import ChainParams, ConfigError, PrevLeader, check_params

ATTACKER = "attacker"
HONEST = "honest"
_TAU_SLACK = 1e-12


def _as_output(x, like):
    return float(x) if np.ndim(like) == 0 else x


def check_tau(params: ChainParams, tau) -> np.ndarray:
    t = np.asarray(tau, dtype=float)
    slack = _TAU_SLACK * params.T
    if np.any(t < params.T_m - slack) or np.any(t > params.T + slack) or np.any(np.isnan(t)):
        raise ValueError(f"tau must lie in [T_m, T] = [{params.T_m}, {params.T}]")
    return np.clip(t, params.T_m, params.T)


def pairwise_win_prob(lambda_n, lambda_m, delta):
    """``Pr(X_n - X_m < delta)`` for independent exponentials.

    ``delta`` is the head start of ``n`` over ``m`` (``tau_n - tau_m``).
    Continuous and strictly increasing in ``delta``; accepts arrays.
    """
    if not (np.all(np.asarray(lambda_n) > 0) and np.all(np.asarray(lambda_m) > 0)):
        raise ValueError("race rates must be positive")
    delta_arr = np.asarray(delta, dtype=float)
    total = np.add(lambda_n, lambda_m)
    ahead = 1.0 - (lambda_m / total) * np.exp(-np.maximum(delta_arr, 0.0) * lambda_n)
    behind = (lambda_n / total) * np.exp(np.minimum(delta_arr, 0.0) * lambda_m)
    return _as_output(np.where(delta_arr >= 0.0, ahead, behind), delta)


def micro_blocks_kept(params: ChainParams, tau, floored: bool = False):
    """Micro blocks of the last interval that the winner builds on."""
    kept = params.L * (params.T - np.asarray(tau, dtype=float)) / params.T_b
    if floored:
        kept = np.floor(kept + 1e-9)
    return _as_output(kept, tau)


def fee_share(params: ChainParams, is_prev_leader: bool) -> float:
    """Fraction of the previous interval's fees a new leader collects."""
    return 1.0 if is_prev_leader else 1.0 - params.alpha


def block_reward(params: ChainParams, is_prev_leader: bool, tau, floored: bool = False):
    """Reward for mining the next key block after mining for ``tau``."""
    kept = micro_blocks_kept(params, tau, floored)
    return fee_share(params, is_prev_leader) * params.r * kept + params.R


@dataclass(frozen=True)
class RaceSpec:
    lambda_a: float
    lambda_b: float
    params: ChainParams
    prev: str = HONEST

    def __post_init__(self):
        prev = self.prev.pool_id if isinstance(self.prev, PrevLeader) else self.prev
        if prev not in (HONEST, ATTACKER):
            raise ConfigError(f"prev must be {HONEST!r} or {ATTACKER!r}, got {prev!r}")
        object.__setattr__(self, "prev", prev)
        errors = check_params(self.params)
        if not (self.lambda_a > 0 and self.lambda_b > 0):
            errors.append("both race rates must be positive")
        elif not math.isclose(self.params.T_m * (self.lambda_a + self.lambda_b), 1.0, rel_tol=1e-9):
            errors.append("difficulty identity T_m * (lambda_a + lambda_b) = 1 violated")
        elif self.lambda_a * self.params.T_m >= 1.0 - 1e-9:
            errors.append("attacker owns (almost) the whole network")
        if errors:
            raise ConfigError("; ".join(errors))

    @classmethod
    def from_share(cls, lambda_a: float, params: ChainParams, prev: str = HONEST) -> RaceSpec:
        """Attacker rate ``lambda_a``; the honest rate fills the rest of ``1/T_m``."""
        return cls(lambda_a, 1.0 / params.T_m - lambda_a, params, prev)

    @property
    def attacker_leads(self) -> bool:
        return self.prev == ATTACKER


@dataclass(frozen=True)
class RewardCurvePoint:
    tau: float
    win_prob: float
    reward_if_win: float
    expected_reward: float


def attacker_win_prob(spec: RaceSpec, tau):
    t = check_tau(spec.params, tau)
    p = pairwise_win_prob(spec.lambda_a, spec.lambda_b, t - spec.params.T_m)
    return _as_output(p, tau)


def reward_if_win(params: ChainParams, prev, tau, floored: bool = False):
    """Attacker reward on winning: full fees if it also led the last interval."""
    if isinstance(prev, PrevLeader):
        prev = prev.pool_id
    t = check_tau(params, tau)
    return _as_output(block_reward(params, prev == ATTACKER, t, floored), tau)


def expected_reward(spec: RaceSpec, tau, floored: bool = False):
    t = check_tau(spec.params, tau)
    q = block_reward(spec.params, spec.attacker_leads, t, floored)
    p = pairwise_win_prob(spec.lambda_a, spec.lambda_b, t - spec.params.T_m)
    return _as_output(q * p, tau)


def reward_curve(spec: RaceSpec, n_points: int = 33) -> list[RewardCurvePoint]:
    taus = np.linspace(spec.params.T_m, spec.params.T, n_points)
    p = attacker_win_prob(spec, taus)
    q = reward_if_win(spec.params, spec.prev, taus)
    return [RewardCurvePoint(float(t), float(a), float(b), float(a * b)) for t, a, b in zip(taus, p, q)]


def optimal_tau_unclamped(spec: RaceSpec) -> float:
    """Stationary point of the expected reward in closed form.

    With ``k = R / (s r L)`` (``s`` the fee share) the optimum is

        tau* = (k lam T_b + lam T + 1 - W(exp((k + 1) lam T_b + 1) / (1 - lam T_m))) / lam

    evaluated in log space so large mint rewards do not overflow.
    """
    p = spec.params
    lam = spec.lambda_a
    fees = fee_share(p, spec.attacker_leads) * p.r * p.L
    if fees == 0.0:
        return math.inf  # nothing to lose by mining early
    k = p.R / fees
    log_arg = (k + 1.0) * lam * p.T_b + 1.0 - math.log1p(-lam * p.T_m)
    w = lambert_w0_exp(log_arg)
    return (k * lam * p.T_b + lam * p.T + 1.0 - w) / lam


def optimal_tau_closed_form(spec: RaceSpec) -> float:
    """Closed-form optimal mining duration, clamped to ``[T_m, T]``.

    The expected reward is concave in ``tau``, so clamping the unconstrained
    stationary point yields the constrained optimum.
    """
    tau = optimal_tau_unclamped(spec)
    return float(min(max(tau, spec.params.T_m), spec.params.T))


def optimal_tau_numeric(spec: RaceSpec, tol: float = 1e-9) -> float:
    """Grid plus golden-section argmax of the expected reward."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    tau, _ = grid_golden_max(lambda t: expected_reward(spec, t), spec.params.T_m, spec.params.T, tol)
    return tau


def reward_derivative(spec: RaceSpec, tau: float, h: float | None = None) -> float:
    """Central finite difference of the expected reward."""
    p = spec.params
    h = 1e-6 * (p.T - p.T_m) if h is None else h
    lo, hi = max(tau - h, p.T_m), min(tau + h, p.T)
    return (expected_reward(spec, hi) - expected_reward(spec, lo)) / (hi - lo)
