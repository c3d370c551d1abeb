"""
Simulating the race
===================

The simulator runs 2^10 miners in discrete steps with difficulty d = 11.
It compares equilibrium play with honest play and counts the micro blocks
that early mining throws away.
"""

from ng_mining_lab import ChainParams
from ng_mining_lab import experiments as ex

params = ChainParams()
jobs = ex.simulate_jobs(params, [0.05, 0.15, 0.25], [1.0, 10.0], [0.25, 0.1, 0.15], rounds=10_000, seed=1)
rows = ex.simulate_rows(jobs)

print("scenario    setup         R   lambda_a pool  reward +- se     win freq  discarded")
for r in rows:
    print(
        f"{r['scenario']:11s} {r['setup']:12s} {r['R']:4.0f} {r['lambda_a']:8.2f}  {r['pool']:3s} "
        f"{r['average_reward']:7.3f} +- {r['reward_se']:.3f}  {r['win_frequency']:.4f}   {r['avg_discarded']:.2f}"
    )

# Equilibrium rows carry the throughput penalty: micro blocks left out of the
# chain per round and the drop in the pools' summed reward against honest play.
print("\nthroughput penalty")
for r in rows:
    if r["penalty_discarded"] is not None and r["pool"] == "A":
        print(f"  {r['scenario']:10s} R={r['R']:4.0f} lambda_a={r['lambda_a']:.2f}  "
              f"discarded={r['penalty_discarded']:.2f}  reward lost={r['penalty_sum_reward']:.2f}")
