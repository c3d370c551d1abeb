import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ng_mining_lab import (
    ChainParams,
    ConfigError,
    GameSpec,
    StrategyProfile,
    best_response,
    foc_residuals,
    is_equilibrium,
    lambert_w0,
    n_player_reward,
    n_player_utility,
    n_player_win_prob,
    solve_equilibrium,
    two_player_best_response,
    two_player_equilibrium_closed_form,
    utilities,
    verify_equilibrium,
    win_probs,
)

P = ChainParams()
LAMBDA_GRID = [round(0.05 * k, 2) for k in range(1, 10)]


def game(lambdas, prev=-1, R=10.0, **kw):
    return GameSpec.from_lambdas(lambdas, P.replace(R=R), prev, **kw)


# -- hand-derived oracles for the ordering where B mines longer ---------------


def oracle_b_leads_prev_b(p, la, lb):
    """B led the last interval; A keeps only the (1 - alpha) fee share."""
    tau_a = p.T + p.R * p.T_b / ((1 - p.alpha) * p.r * p.L) - 1 / lb
    k = p.R / (p.r * p.L) * lb * p.T_b
    w = lambert_w0(math.exp(2 - k * p.alpha / (1 - p.alpha)) / (1 - lb * p.T_m))
    return tau_a, (k + lb * p.T + 1 - w) / lb


def oracle_b_leads_prev_a(p, la, lb):
    """A led the last interval; B keeps only the (1 - alpha) fee share."""
    tau_a = p.T + p.R * p.T_b / (p.r * p.L) - 1 / lb
    k = p.R / ((1 - p.alpha) * p.r * p.L) * lb * p.T_b
    w = lambert_w0(math.exp(2 + p.R / (p.r * p.L) * lb * p.T_b * p.alpha / (1 - p.alpha)) / (1 - lb * p.T_m))
    return tau_a, (k + lb * p.T + 1 - w) / lb


@pytest.mark.parametrize("oracle, prev", [(oracle_b_leads_prev_b, "B"), (oracle_b_leads_prev_a, "A")])
@pytest.mark.parametrize("la, R", [(0.3, 1.0), (0.35, 1.0), (0.4, 5.0), (0.35, 5.0)])
def test_closed_form_matches_interior_oracles(oracle, prev, la, R):
    spec = game([la, 0.5 - la], prev, R)
    tau_a, tau_b = oracle(spec.params, la, 0.5 - la)
    assert P.T_m < tau_a < tau_b < P.T
    got = two_player_equilibrium_closed_form(spec)
    assert got.taus == pytest.approx((tau_a, tau_b), abs=1e-12)


def test_trailing_pool_reacts_to_its_opponents_rate():
    # Using the pool's own rate in the trailing duration gives a profile that is not an equilibrium.
    spec = game([0.3, 0.2], "B", 1.0)
    p = spec.params
    wrong_a = p.T + p.R * p.T_b / ((1 - p.alpha) * p.r * p.L) - 1 / 0.3
    wrong = StrategyProfile((wrong_a, two_player_best_response(spec, 1, wrong_a)))
    assert verify_equilibrium(spec, wrong) > 1e-3
    assert verify_equilibrium(spec, two_player_equilibrium_closed_form(spec)) <= 1e-6 * p.max_reward


# -- win probabilities --------------------------------------------------------


@given(st.floats(0.01, 0.49), st.floats(2.0, 10.0), st.floats(2.0, 10.0), st.sampled_from(["product", "exact"]))
def test_two_player_probabilities_sum_to_one(la, ta, tb, model):
    spec = game([la, 0.5 - la], win_model=model)
    assert abs(win_probs(spec, (ta, tb)).sum() - 1.0) <= 1e-12


def test_three_player_tied_products():
    spec = game([0.1, 0.15, 0.25])
    honest = StrategyProfile.honest(P, 3)
    expected = [
        (0.1 / 0.25) * (0.1 / 0.35),
        (0.15 / 0.25) * (0.15 / 0.4),
        (0.25 / 0.35) * (0.25 / 0.4),
    ]
    assert n_player_win_prob(spec, honest, 0) == pytest.approx(0.1142857142857, rel=1e-12)
    assert win_probs(spec, honest) == pytest.approx(expected, rel=1e-14)


def test_three_player_ordered_products_term_by_term():
    l1, l2, l3 = 0.1, 0.15, 0.25
    t1, t2, t3 = 3.0, 5.0, 8.5
    spec = game([l1, l2, l3])
    p1 = (l1 / (l1 + l2) * math.exp((t1 - t2) * l2)) * (l1 / (l1 + l3) * math.exp((t1 - t3) * l3))
    p2 = (1 - l1 / (l1 + l2) * math.exp((t1 - t2) * l2)) * (l2 / (l2 + l3) * math.exp((t2 - t3) * l3))
    p3 = (1 - l1 / (l1 + l3) * math.exp((t1 - t3) * l3)) * (1 - l2 / (l2 + l3) * math.exp((t2 - t3) * l3))
    assert win_probs(spec, (t1, t2, t3)) == pytest.approx([p1, p2, p3], rel=1e-13)


def test_product_form_does_not_sum_to_one_for_three_pools():
    spec = game([0.1, 0.15, 0.25])
    assert win_probs(spec, StrategyProfile.honest(P, 3)).sum() < 0.9


def test_exact_race_matches_monte_carlo():
    lams = np.array([0.25, 0.1, 0.15])
    taus = np.array([7.3, 3.0, 5.5])
    spec = game(lams.tolist(), win_model="exact")
    probs = win_probs(spec, taus)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(11)
    n = 2 * 10**6
    finish = rng.exponential(1 / lams, (n, 3)) - taus
    freq = np.bincount(finish.argmin(axis=1), minlength=3) / n
    assert np.all(np.abs(freq - probs) < 4 * np.sqrt(probs * (1 - probs) / n))


@given(st.lists(st.floats(2.0, 10.0), min_size=2, max_size=2))
def test_exact_and_product_agree_for_two_pools(taus):
    a = win_probs(game([0.2, 0.3], win_model="exact"), taus)
    b = win_probs(game([0.2, 0.3]), taus)
    assert a == pytest.approx(b, abs=1e-12)


# -- rewards and utilities ----------------------------------------------------


def test_rewards():
    spec = game([0.25, 0.25], "B")
    assert n_player_reward(spec, 1, P.T_m) == pytest.approx(20.0, rel=1e-15)
    assert n_player_reward(spec, 0, P.T) == P.R
    assert n_player_reward(spec, 0, P.T_m) == pytest.approx(190 / 11, rel=1e-15)


def test_symmetric_honest_utilities():
    spec = game([0.25, 0.25], "B")
    assert utilities(spec, (2.0, 2.0)) == pytest.approx((95 / 11, 10.0), rel=1e-14)  # 8.6363..., 10


def test_zero_mint_reward_at_full_window_pays_nothing():
    spec = game([0.1, 0.15, 0.25], "C", R=0.0)
    assert n_player_utility(spec, (10.0, 4.0, 2.0), 0) == 0.0


def test_three_player_honest_utilities_compose():
    spec = game([0.1, 0.15, 0.25], "C")
    honest = StrategyProfile.honest(P, 3)
    probs = win_probs(spec, honest)
    rewards = [190 / 11, 190 / 11, 20.0]
    assert utilities(spec, honest) == pytest.approx([r * q for r, q in zip(rewards, probs)], rel=1e-14)


# -- two-player equilibrium ---------------------------------------------------


@pytest.mark.parametrize("R", [1.0, 5.0, 10.0])
@pytest.mark.parametrize("prev", ["A", "B"])
def test_closed_form_profiles_are_equilibria(R, prev):
    for la in LAMBDA_GRID:
        spec = game([la, 0.5 - la], prev, R)
        profile = two_player_equilibrium_closed_form(spec)
        assert verify_equilibrium(spec, profile) <= 1e-6 * spec.params.max_reward
        assert is_equilibrium(spec, profile)
        if la < 0.25:
            assert profile[0] >= profile[1]
        elif la > 0.25:
            assert profile[0] <= profile[1]


def test_large_mint_reward_pushes_both_to_the_full_window():
    near = [two_player_equilibrium_closed_form(game([la, 0.5 - la], "B", 10.0)) for la in LAMBDA_GRID]
    assert sum(min(p.taus) > 9.0 for p in near) >= len(LAMBDA_GRID) // 2


def test_best_response_recovers_closed_form():
    spec = game([0.35, 0.15], "A", 1.0)
    profile = two_player_equilibrium_closed_form(spec)
    assert best_response(spec, profile, 0) == pytest.approx(profile[0], abs=1e-4)
    assert best_response(spec, profile, 1) == pytest.approx(profile[1], abs=1e-4)
    assert two_player_best_response(spec, 0, profile[1]) == pytest.approx(profile[0], abs=1e-12)
    assert best_response(spec, profile, 0) == best_response(spec, profile, 0)


def test_dominant_pool_without_mint_reward_mines_honestly():
    spec = game([0.4999, 0.0001], "B", 0.0)
    assert best_response(spec, (2.0, 2.0), 0) == pytest.approx(P.T_m, abs=1e-6)


@pytest.mark.parametrize("la, prev, R", [(0.1, "A", 1.0), (0.3, "B", 5.0), (0.45, "A", 10.0), (0.2, "B", 10.0)])
def test_iterated_best_response_matches_closed_form(la, prev, R):
    spec = game([la, 0.5 - la], prev, R)
    report = solve_equilibrium(spec)
    assert report.converged and report.restart_agrees
    assert report.profile.taus == pytest.approx(two_player_equilibrium_closed_form(spec).taus, abs=1e-3)
    assert report.max_deviation_gain <= 1e-6 * P.max_reward


def test_honest_mining_is_not_an_equilibrium():
    assert verify_equilibrium(game([0.25, 0.25], "B"), (2.0, 2.0)) > 0.0


def test_perturbed_equilibrium_is_beaten():
    spec = game([0.3, 0.2], "A", 1.0)
    profile = two_player_equilibrium_closed_form(spec)
    assert verify_equilibrium(spec, profile.replace(0, profile[0] + 0.1)) > 0.0


def test_explicit_ordering():
    spec = game([0.3, 0.2], "A", 1.0)
    assert two_player_equilibrium_closed_form(spec, ordering="B") == two_player_equilibrium_closed_form(spec)


def test_closed_form_needs_two_pools():
    with pytest.raises(ConfigError):
        two_player_equilibrium_closed_form(game([0.1, 0.15, 0.25]))


# -- N players ----------------------------------------------------------------


def test_interior_first_order_conditions_vanish():
    for la, prev, R in [(0.3, "A", 1.0), (0.1, "B", 5.0)]:
        spec = game([la, 0.5 - la], prev, R)
        res = foc_residuals(spec, two_player_equilibrium_closed_form(spec))
        assert all(abs(r) <= 1e-5 * spec.params.max_reward for r in res if r is not None)
    report = solve_equilibrium(game([0.15, 0.1, 0.25], "C", 1.0))
    assert any(r is not None for r in report.foc_residuals)
    assert all(abs(r) <= 1e-5 * P.max_reward for r in report.foc_residuals if r is not None)


def test_three_player_solution_is_stable():
    spec = game([0.15, 0.1, 0.25], "C", 1.0)
    report = solve_equilibrium(spec)
    assert report.converged and report.restart_agrees
    assert report.max_deviation_gain <= 1e-6 * P.max_reward
    lam = spec.lambdas
    for i, j in itertools.permutations(range(3), 2):
        if lam[i] > lam[j]:
            assert report.profile[i] <= report.profile[j] + 1e-6


def test_game_utilities_are_log_concave_in_own_duration():
    # Plain concavity fails in the multi-pool game; log-concavity is what makes each best response unique.
    taus = np.linspace(P.T_m, P.T, 513)
    rng = np.random.default_rng(3)
    for _ in range(30):
        spec = game([0.15, 0.1, 0.25], str(rng.choice(list("ABC"))), float(rng.choice([1.0, 5.0, 10.0])))
        profile = rng.uniform(P.T_m, P.T, 3)
        for n in range(3):
            u = np.array([n_player_utility(spec, StrategyProfile(tuple(np.where(np.arange(3) == n, t, profile))), n)
                          for t in taus])
            lu = np.log(u)
            assert np.max(lu[2:] - 2 * lu[1:-1] + lu[:-2]) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(0.02, 0.2), st.floats(0.02, 0.2), st.sampled_from(["A", "B", "C"]), st.sampled_from([1.0, 10.0]))
def test_solver_output_is_an_equilibrium(la, lb, prev, R):
    lc = 0.5 - la - lb
    spec = game([la, lb, lc], prev, R)
    report = solve_equilibrium(spec, restart=False)
    assert report.max_deviation_gain <= 1e-6 * P.max_reward
    assert all(P.T_m <= t <= P.T for t in report.profile.taus)


def test_non_convergence_is_reported_not_raised():
    report = solve_equilibrium(game([0.15, 0.1, 0.25], "C", 1.0), max_iters=1, restart=False)
    assert not report.converged
    assert report.iterations == 1


def test_spec_validation():
    with pytest.raises(ConfigError):
        game([0.2, 0.2])
    with pytest.raises(ConfigError):
        game([0.25, 0.25], "Z")
    with pytest.raises(ConfigError):
        game([0.25, 0.25], win_model="bogus")
