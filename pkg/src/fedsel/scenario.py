"""Device placement and the two label-skew scenarios used in the experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .wireless import (
    DEFAULT_CAPACITANCE,
    DEFAULT_CPU_FREQ_HZ,
    DEFAULT_CYCLES_PER_SAMPLE,
    DeviceProfile,
)

#: Dirichlet concentration and round-time threshold of each scenario
SCENARIOS = {
    "highly_biased": {"beta": 0.1, "tau_th_s": 0.08},
    "mildly_biased": {"beta": 0.3, "tau_th_s": 0.5},
}


@dataclass(frozen=True)
class PopulationConfig:
    count: int = 100
    area_side_m: float = 1000.0
    bandwidth_total_hz: float = 10e6
    budget_min_j: float = 1e-3
    budget_max_j: float = 100.0
    placement_seed: int = 0
    min_distance_m: float = 1.0
    samples_per_device: int = 600
    cpu_freq_hz: float = DEFAULT_CPU_FREQ_HZ
    cycles_per_sample: float = DEFAULT_CYCLES_PER_SAMPLE
    capacitance: float = DEFAULT_CAPACITANCE

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if not 0 < self.budget_min_j <= self.budget_max_j:
            raise ValueError("need 0 < budget_min_j <= budget_max_j")
        if self.area_side_m <= 0 or self.bandwidth_total_hz <= 0:
            raise ValueError("area side and bandwidth must be positive")


def generate_population(cfg: PopulationConfig, dataset_sizes=None) -> list[DeviceProfile]:
    """Scatter devices uniformly in a square around a central server.

    Bandwidth is shared equally, budgets are log-uniform over the configured
    range, and weights are proportional to ``dataset_sizes`` (defaulting to
    ``cfg.samples_per_device`` for every device).
    """
    n = cfg.count
    rng = np.random.default_rng(cfg.placement_seed)
    half = cfg.area_side_m / 2.0
    xy = rng.uniform(-half, half, size=(n, 2))
    distance = np.maximum(np.hypot(xy[:, 0], xy[:, 1]), cfg.min_distance_m)
    budgets = np.exp(rng.uniform(math.log(cfg.budget_min_j), math.log(cfg.budget_max_j), size=n))
    budgets = np.clip(budgets, cfg.budget_min_j, cfg.budget_max_j)

    sizes = np.full(n, cfg.samples_per_device) if dataset_sizes is None else np.asarray(dataset_sizes)
    if sizes.shape != (n,):
        raise ValueError(f"expected {n} dataset sizes, got {sizes.shape}")
    weights = sizes / sizes.sum()
    return [
        DeviceProfile(
            id=i,
            distance_m=float(distance[i]),
            bandwidth_hz=cfg.bandwidth_total_hz / n,
            dataset_size=int(sizes[i]),
            energy_budget_j=float(budgets[i]),
            weight=float(weights[i]),
            cpu_freq_hz=cfg.cpu_freq_hz,
            cycles_per_sample=cfg.cycles_per_sample,
            capacitance=cfg.capacitance,
        )
        for i in range(n)
    ]
