#!/usr/bin/env python3

# Solving for participation probabilities and powers
# Twenty devices scattered around the server, tight and loose deadlines.

import numpy as np

from fedsel.baselines import deterministic_plan
from fedsel.scenario import PopulationConfig, generate_population
from fedsel.solver import alternating_solve, feasibility_check
from fedsel.wireless import NetworkParams

devices = generate_population(PopulationConfig(count=20, placement_seed=3))

for tau in (0.08, 0.5):
    net = NetworkParams(tau_th_s=tau)
    plan = alternating_solve(devices, net, rounds=1)
    a, p = plan.probabilities[:, 0], plan.powers[:, 0]
    print(f"\ntau={tau} s  objective={plan.objective:.3f}  outer iterations={plan.iterations_used}")
    print("feasible:", feasibility_check(plan, devices, net).feasible)
    order = np.argsort([d.distance_m for d in devices])
    for i in order[::4]:
        d = devices[i]
        print(f"  d={d.distance_m:6.1f} m  E_max={d.energy_budget_j:8.3g} J  a={a[i]:.3f}  P={p[i]:.2e} W")
    # rounding to 0/1 drops every device with a < 0.5
    print("devices kept after rounding:", int(deterministic_plan(plan).probabilities[:, 0].sum()))
