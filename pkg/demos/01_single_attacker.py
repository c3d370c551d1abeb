"""
One pool mining early against everyone else
===========================================

A pool that starts hashing for the next key block before the current
interval's default start gives up some micro-block fees but raises its
chance of winning. This walk-through prints the expected reward curve and
the optimal head start for a few pool sizes.
"""

import numpy as np

from ng_mining_lab import ChainParams
from ng_mining_lab.race import ATTACKER, HONEST, RaceSpec, expected_reward, optimal_tau_closed_form, optimal_tau_numeric

params = ChainParams(R=10)
print(params)

# The mining window tau runs from the default T_m (honest) up to the whole interval T.
taus = np.linspace(params.T_m, params.T, 9)
print("\nexpected reward by mining window, previous leader is someone else")
print("lambda_a " + " ".join(f"{t:6.1f}" for t in taus))
for la in (0.1, 0.2, 0.3, 0.4):
    spec = RaceSpec.from_share(la, params, HONEST)
    print(f"{la:8.2f} " + " ".join(f"{v:6.2f}" for v in expected_reward(spec, taus)))

# The optimum has a closed form through the Lambert W function; a grid plus
# golden-section search finds the same point independently.
print("\noptimal window: closed form vs numeric search, and the gain over honest mining")
for prev in (HONEST, ATTACKER):
    for la in (0.1, 0.2, 0.3, 0.4):
        spec = RaceSpec.from_share(la, params, prev)
        tau = optimal_tau_closed_form(spec)
        gain = expected_reward(spec, tau) - expected_reward(spec, params.T_m)
        print(f"prev={prev:8s} lambda_a={la:.2f}  tau*={tau:.4f}  numeric={optimal_tau_numeric(spec):.4f}  gain={gain:+.3f}")

# A pool that led the last interval keeps all of its fees, so it has more to
# lose and starts later than a pool that only keeps the (1 - alpha) share.
