"""
Three pools
===========

There is no closed form beyond two pools, so the solver iterates numerical
best responses. Each pool's win probability is modelled as a product of
pairwise races; the exact race model is shown next to it for comparison.
"""

from ng_mining_lab import ChainParams, GameSpec, StrategyProfile, solve_equilibrium, win_probs

params = ChainParams(R=1)
for lb in (0.1, 0.2, 0.3):
    print(f"\nlambda_B = {lb}, pool C takes the rest, C led the last interval")
    la = 0.05
    while 0.5 - la - lb > 1e-9:
        spec = GameSpec.from_lambdas([la, lb, 0.5 - la - lb], params, "C")
        rep = solve_equilibrium(spec)
        taus = ", ".join(f"{t:.3f}" for t in rep.profile.taus)
        print(f"  lambda_A={la:.2f}  tau*=({taus})  converged={rep.converged}")
        la = round(la + 0.05, 2)

# The product of pairwise races is not a probability distribution over three
# pools: with everyone honest the probabilities sum to well under one.
spec = GameSpec.from_lambdas([0.25, 0.1, 0.15], params, "C")
honest = StrategyProfile.honest(params, 3)
print("\nproduct form:", win_probs(spec, honest).round(4))
print("exact race:  ", win_probs(GameSpec(spec.pools, params, spec.prev, "exact"), honest).round(4))
