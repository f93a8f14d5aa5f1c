#!/usr/bin/env python3

# Federated training under a probabilistic participation plan

from fedsel.data import dirichlet_partition, make_blobs
from fedsel.fl import TrainingConfig, run_training
from fedsel.scenario import PopulationConfig, generate_population
from fedsel.solver import alternating_solve
from fedsel.wireless import NetworkParams

train, test = make_blobs(12_000, 2_000, seed=0)
parts = dirichlet_partition(train, 20, beta=0.3, seed=0)   # label skew
print("samples per device:", parts.sizes)

devices = generate_population(PopulationConfig(count=20, placement_seed=0), parts.sizes)
net = NetworkParams(tau_th_s=0.5)
plan = alternating_solve(devices, net, rounds=100)

trace = run_training(devices, net, plan, train, parts, TrainingConfig(rounds=100, seed=0), test=test)
for rec in trace.records[::10]:
    print(f"round {rec.round:3d}  participants={len(rec.participants):2d}  "
          f"acc={rec.accuracy:.3f}  cum_time={rec.cum_time_s:8.2f} s  cum_energy={rec.cum_energy_j:.3e} J")
