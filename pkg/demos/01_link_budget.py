#!/usr/bin/env python3

# Link budget of a single device
# How transmit power trades upload time against upload energy.

import numpy as np

from fedsel.wireless import (DeviceProfile, NetworkParams, computation_energy,
                             min_feasible_power, transmission_time, upload_energy_curve)

dev = DeviceProfile(id=0, distance_m=100.0, bandwidth_hz=1e5, dataset_size=600, energy_budget_j=1.0)
net = NetworkParams(tau_th_s=0.5)

# more power -> shorter upload, but energy P*T keeps growing
powers = np.logspace(-9, -1, 9)
for p, e in zip(powers, upload_energy_curve(dev, net, powers)):
    print(f"P={p:8.1e} W   T={transmission_time(dev, net, p):10.3f} s   E_up={e:.3e} J")

print("local computation per round:", computation_energy(dev), "J")

# the lowest power that keeps a*T within the deadline, for a few participation rates
for a in (0.05, 0.1, 0.2, 0.4):
    print(f"a={a:4.2f}  P_min={min_feasible_power(dev, net, a):.3e} W")
