"""
Two pools both mining early
===========================

When both pools may start early, each one's best window depends on the
other's. The equilibrium has a closed form; iterated best responses from
two different starting points land on the same profile.
"""

from ng_mining_lab import ChainParams, GameSpec, solve_equilibrium, two_player_equilibrium_closed_form, utilities

for R in (1.0, 5.0, 10.0):
    params = ChainParams(R=R)
    print(f"\nR = {R}: equilibrium windows (previous leader B) and utilities vs both honest")
    for la in (0.05, 0.15, 0.25, 0.35, 0.45):
        spec = GameSpec.from_lambdas([la, 0.5 - la], params, "B")
        closed = two_player_equilibrium_closed_form(spec)
        report = solve_equilibrium(spec)
        eq_u = utilities(spec, closed)
        honest_u = utilities(spec, (params.T_m, params.T_m))
        print(
            f"  lambda_a={la:.2f}  tau*=({closed[0]:.3f}, {closed[1]:.3f})  "
            f"iterated=({report.profile[0]:.3f}, {report.profile[1]:.3f})  "
            f"u*=({eq_u[0]:.2f}, {eq_u[1]:.2f})  honest=({honest_u[0]:.2f}, {honest_u[1]:.2f})"
        )

# With a large mint reward both pools mine for nearly the whole interval and
# most of the interval's micro blocks are thrown away.
