"""Baseline selection strategies and the time/energy-to-accuracy comparison."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import Dataset, dirichlet_partition, load_idx_dataset, make_blobs
from .fl import STRATEGIES, TrainingConfig, TrainingTrace, run_training
from .scenario import SCENARIOS, PopulationConfig, generate_population
from .solver import SelectionPlan, SolverConfig, alternating_solve, objective_value
from .wireless import DeviceProfile, NetworkParams

SUMMARY_HEADER = ["strategy", "target", "time_s", "energy_j", "reached"]


def uniform_plan(devices: Sequence[DeviceProfile], net: NetworkParams, M: int, rounds: int,
                 rng=None) -> SelectionPlan:
    """Pick ``M`` devices uniformly at random per round, all transmitting at ``p_max``.

    The plan ignores the energy and time constraints.
    """
    n = len(devices)
    if not 1 <= M <= n:
        raise ValueError(f"M must lie in [1, {n}], got {M}")
    rng = np.random.default_rng(rng)
    a = np.zeros((n, rounds))
    for k in range(rounds):
        a[rng.choice(n, size=M, replace=False), k] = 1.0
    return SelectionPlan(a, np.full((n, rounds), net.p_max),
                         device_ids=[d.id for d in devices],
                         objective=float(np.sum(a * np.array([d.weight for d in devices])[:, None])))


def deterministic_plan(prob_plan: SelectionPlan) -> SelectionPlan:
    """Round probabilities to {0, 1} at 0.5 (ties go to 1); powers are kept."""
    a = (prob_plan.probabilities >= 0.5).astype(float)
    return SelectionPlan(a, prob_plan.powers.copy(), converged=prob_plan.converged,
                         iterations_used=prob_plan.iterations_used,
                         device_ids=list(prob_plan.device_ids))


def equally_weighted_plan(devices: Sequence[DeviceProfile], net: NetworkParams,
                          cfg: SolverConfig = SolverConfig(), rounds: int = 1) -> SelectionPlan:
    n = len(devices)
    equal = np.full(n, 1.0 / n) if n else np.zeros(0)
    solved = alternating_solve(devices, net, cfg, rounds=rounds, weights=equal)
    plan = deterministic_plan(solved)
    plan.objective = objective_value(plan, devices, equal)
    return plan


@dataclass(frozen=True)
class DataConfig:
    n_train: int = 60_000
    n_test: int = 10_000
    dims: int = 64
    classes: int = 10
    separation: float = 0.6
    nuisance_dims: int = 16
    nuisance_scale: float = 4.0
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None

    def load(self, seed: int = 0) -> tuple[Dataset, Dataset]:
        if self.train_images:
            train = load_idx_dataset(self.train_images, self.train_labels, self.classes)
            test = load_idx_dataset(self.test_images, self.test_labels, self.classes)
            return train, test
        return make_blobs(self.n_train, self.n_test, self.dims, self.classes,
                          self.separation, self.nuisance_dims, self.nuisance_scale, seed)


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str = "mildly_biased"
    n_devices: int = 20
    n_runs: int = 10
    strategies: tuple[str, ...] = STRATEGIES
    target_accuracies: tuple[float, ...] = (0.5, 0.7)
    seed: int = 0
    uniform_m: int | None = None
    tau_th_s: float | None = None
    beta: float | None = None
    net: NetworkParams = NetworkParams()
    training: TrainingConfig = TrainingConfig()
    solver: SolverConfig = SolverConfig()
    population: PopulationConfig = PopulationConfig()
    data: DataConfig = DataConfig()

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {list(SCENARIOS)}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        if any(not 0.0 <= t < 1.0 for t in self.target_accuracies):
            raise ValueError("target accuracies must lie in [0, 1)")

    @property
    def rounds(self) -> int:
        return self.training.rounds

    @property
    def resolved_beta(self) -> float:
        return SCENARIOS[self.scenario]["beta"] if self.beta is None else self.beta

    @property
    def resolved_net(self) -> NetworkParams:
        tau = SCENARIOS[self.scenario]["tau_th_s"] if self.tau_th_s is None else self.tau_th_s
        return replace(self.net, tau_th_s=tau)


@dataclass
class StrategyResult:
    strategy: str
    time_s: list[float | None]
    energy_j: list[float | None]
    mean_accuracy: np.ndarray
    mean_cum_time: np.ndarray
    mean_cum_energy: np.ndarray

    @property
    def reached(self) -> list[bool]:
        return [t is not None for t in self.time_s]

    @property
    def final_accuracy(self) -> float:
        return float(self.mean_accuracy[-1])


@dataclass
class ComparisonSummary:
    scenario: str
    targets: list[float]
    results: dict[str, StrategyResult]
    plans: dict[str, SelectionPlan] = field(default_factory=dict)
    traces: dict[str, list[TrainingTrace]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for name, res in self.results.items():
            for target, t, e in zip(self.targets, res.time_s, res.energy_j):
                writer.writerow([name, repr(target), "" if t is None else repr(t),
                                 "" if e is None else repr(e), "true" if t is not None else "false"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        def cell(v):
            return "NA" if v is None else v
        return {
            "scenario": self.scenario,
            "targets": self.targets,
            "time_s": {n: [cell(v) for v in r.time_s] for n, r in self.results.items()},
            "energy_j": {n: [cell(v) for v in r.energy_j] for n, r in self.results.items()},
            "final_accuracy": {n: r.final_accuracy for n, r in self.results.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def curves_csv(self) -> str:
        """Mean accuracy against cumulative time and energy, one row per (strategy, round)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["strategy", "round", "cum_time_s", "cum_energy_j", "accuracy"])
        for name, r in self.results.items():
            for k, (t, e, acc) in enumerate(zip(r.mean_cum_time, r.mean_cum_energy, r.mean_accuracy)):
                writer.writerow([name, k, repr(float(t)), repr(float(e)), repr(float(acc))])
        return buf.getvalue()


def first_crossing(accuracy, cum_time, cum_energy, target):
    """Cumulative (time, energy) at the first index with ``accuracy >= target``."""
    hit = np.flatnonzero(np.asarray(accuracy) >= target)
    if hit.size == 0:
        return None, None
    k = hit[0]
    return float(cum_time[k]), float(cum_energy[k])


def build_setup(spec: ExperimentSpec):
    """Data, partition, devices and network for one experiment spec.

    ``spec.seed`` drives the synthetic data, the partition and the placement.
    """
    train, test = spec.data.load(spec.seed)
    parts = dirichlet_partition(train, spec.n_devices, spec.resolved_beta, seed=spec.seed)
    pop = replace(spec.population, count=spec.n_devices, placement_seed=spec.seed)
    devices = generate_population(pop, dataset_sizes=parts.sizes)
    return train, test, parts, devices, spec.resolved_net


def strategy_plans(spec: ExperimentSpec, devices, net) -> dict[str, SelectionPlan]:
    """Fixed plans of the non-random strategies (uniform is drawn per run)."""
    prob = alternating_solve(devices, net, spec.solver, rounds=spec.rounds)
    return {
        "probabilistic": prob,
        "deterministic": deterministic_plan(prob),
        "equally_weighted": equally_weighted_plan(devices, net, spec.solver, rounds=spec.rounds),
    }


def compare_runs(spec: ExperimentSpec) -> ComparisonSummary:
    """Average ``n_runs`` seeded trainings per strategy and report time/energy to each target."""
    train, test, parts, devices, net = build_setup(spec)
    plans = strategy_plans(spec, devices, net)
    m = spec.uniform_m
    if m is None:
        m = int(round(plans["probabilistic"].probabilities[:, 0].sum()))
    m = min(max(m, 1), len(devices))

    results, traces = {}, {}
    for name in spec.strategies:
        acc, cum_t, cum_e = [], [], []
        traces[name] = []
        for run in range(spec.n_runs):
            run_seed = spec.seed * 1_000 + run
            if name == "uniform":
                plan = uniform_plan(devices, net, m, spec.rounds,
                                    rng=np.random.SeedSequence([spec.seed, run, 1]))
            else:
                plan = plans[name]
            cfg = replace(spec.training, seed=run_seed, strategy=name)
            trace = run_training(devices, net, plan, train, parts, cfg, test=test)
            traces[name].append(trace)
            acc.append(trace.column("accuracy"))
            cum_t.append(trace.column("cum_time_s"))
            cum_e.append(trace.column("cum_energy_j"))
        mean_acc, mean_t, mean_e = (np.mean(v, axis=0) for v in (acc, cum_t, cum_e))
        times, energies = [], []
        for target in spec.target_accuracies:
            t, e = first_crossing(mean_acc, mean_t, mean_e, target)
            times.append(t)
            energies.append(e)
        results[name] = StrategyResult(name, times, energies, mean_acc, mean_t, mean_e)
    return ComparisonSummary(spec.scenario, list(spec.target_accuracies), results, plans, traces)
