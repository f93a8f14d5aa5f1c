"""Joint selection-probability and transmit-power allocation.

The problem maximises the weighted expected number of participants
``sum_k sum_i a_ik * w_i`` under a per-round expected energy budget, an
expected transmission-time threshold and box constraints on ``a`` and ``P``.
It is solved by alternating between a Dinkelbach power step (for fixed ``a``)
and a closed-form probability step (for fixed ``P``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .wireless import (
    DeviceProfile,
    NetworkParams,
    channel_floor,
    computation_energy,
    min_feasible_power,
    transmission_time,
    upload_energy,
)

#: relative slack used when comparing constraint values against their bounds
FEASIBILITY_RTOL = 1e-9


class InfeasiblePower(ValueError):
    """The time threshold cannot be met at ``p_max`` for the requested ``a``."""


class EmptyPopulation(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    lambda0: float = 1.0
    eps_dinkelbach: float = 1e-9
    eps_outer: float = 1e-6
    max_inner_iters: int = 100
    max_outer_iters: int = 100
    a_init: float = 1.0
    strict: bool = False

    def __post_init__(self):
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if self.eps_dinkelbach <= 0 or self.eps_outer <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if not 0.0 < self.a_init <= 1.0:
            raise ValueError("a_init must lie in (0, 1]")


@dataclass
class PowerSolution:
    """Result of one Dinkelbach solve.

    ``ratio`` is the expected upload energy ``a * P * T(P)`` at ``power``;
    ``lambdas`` holds the full parameter sequence starting at ``lambda0``.
    """

    power: float
    ratio: float
    converged: bool
    lambdas: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.lambdas) - 1


@dataclass
class SelectionPlan:
    probabilities: np.ndarray
    powers: np.ndarray
    converged: bool = True
    iterations_used: int = 0
    objective: float = 0.0
    device_ids: list[int] | None = None
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.powers = np.asarray(self.powers, dtype=float)
        if self.probabilities.ndim != 2 or self.probabilities.shape != self.powers.shape:
            raise ValueError("probabilities and powers must be matching [device x round] matrices")
        if self.device_ids is None:
            self.device_ids = list(range(self.probabilities.shape[0]))
        elif len(self.device_ids) != self.probabilities.shape[0]:
            raise ValueError("device_ids length does not match the plan")

    @property
    def n_devices(self) -> int:
        return self.probabilities.shape[0]

    @property
    def rounds(self) -> int:
        return self.probabilities.shape[1]

    def to_dict(self) -> dict:
        return {
            "devices": [int(i) for i in self.device_ids],
            "rounds": self.rounds,
            "a": self.probabilities.tolist(),
            "p_watts": self.powers.tolist(),
            "objective": float(self.objective),
            "converged": bool(self.converged),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "SelectionPlan":
        a = np.asarray(doc["a"], dtype=float).reshape(len(doc["devices"]), int(doc["rounds"]))
        p = np.asarray(doc["p_watts"], dtype=float).reshape(a.shape)
        return cls(a, p, converged=bool(doc.get("converged", True)),
                   objective=float(doc.get("objective", 0.0)),
                   device_ids=[int(i) for i in doc["devices"]])

    @classmethod
    def from_json(cls, text: str) -> "SelectionPlan":
        return cls.from_dict(json.loads(text))


@dataclass
class FeasibilityReport:
    """Per-(device, round) slacks; a negative slack is a violation.

    Energy and time slacks are relative to ``E_max`` and ``tau_th``.
    """

    energy_slack: np.ndarray
    time_slack: np.ndarray
    power_ok: np.ndarray
    prob_ok: np.ndarray
    violations: list[tuple[int, int, str]]

    @property
    def feasible(self) -> bool:
        return not self.violations


def energy_headroom(dev: DeviceProfile, a: float) -> float:
    """Budget left for upload energy once the expected computation energy is paid."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"a must lie in [0, 1], got {a!r}")
    return dev.energy_budget_j - a * computation_energy(dev)


def _expected_upload(dev, net, a, power):
    # a * P * S / (B log2(1 + P / (d^2 sigma^2)))
    return a * upload_energy(dev, net, power)


def feasible_power_interval(dev: DeviceProfile, net: NetworkParams, a: float) -> tuple[float, float]:
    """Return ``(P_min, P_max)`` or raise :class:`InfeasiblePower`."""
    p_min = min_feasible_power(dev, net, a)
    if p_min > net.p_max * (1 + 1e-12):
        raise InfeasiblePower(
            f"device {dev.id}: P_min={p_min:.6g} W exceeds p_max={net.p_max:.6g} W at a={a:.6g}")
    if p_min >= net.p_max * (1 - 1e-12):
        # singleton interval up to rounding
        return net.p_max, net.p_max
    return p_min, net.p_max


def dinkelbach_power(dev: DeviceProfile, net: NetworkParams, a: float,
                     cfg: SolverConfig = SolverConfig()) -> PowerSolution:
    """Minimise the expected upload energy over ``[P_min, P_max]``.

    Each step minimises ``a*P*S - lam*B*log2(1 + P/(d^2 sigma^2))``; the
    stationary point ``lam*B/(a*S*ln 2) - d^2 sigma^2`` is projected onto the
    feasible box, and ``lam`` is reset to the ratio at the projected power.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"a must lie in (0, 1], got {a!r}")
    lo, hi = feasible_power_interval(dev, net, a)
    floor = channel_floor(dev, net)
    scale = dev.bandwidth_hz / (a * net.message_bits * math.log(2))

    lam = cfg.lambda0
    lambdas = [lam]
    power = hi
    converged = False
    for _ in range(cfg.max_inner_iters):
        power = min(max(lam * scale - floor, lo), hi)
        new_lam = _expected_upload(dev, net, a, power)
        lambdas.append(new_lam)
        # relative test: expected energies span many orders of magnitude
        converged = abs(new_lam - lam) <= cfg.eps_dinkelbach * new_lam
        lam = new_lam
        if converged:
            break
    # from the first update on the parameter sequence cannot increase
    if len(lambdas) > 2 and max(np.diff(lambdas[1:])) > 1e-12 * lambdas[1]:
        raise AssertionError(f"device {dev.id}: Dinkelbach parameter increased")
    return PowerSolution(power, lam, converged, lambdas)


def optimal_probability(dev: DeviceProfile, net: NetworkParams, power_w: float) -> float:
    """Largest ``a`` in ``[0, 1]`` meeting the energy and time constraints at ``power_w``."""
    if not 0.0 < power_w <= net.p_max * (1 + 1e-12):
        raise ValueError(f"power_w must lie in (0, p_max], got {power_w!r}")
    t = transmission_time(dev, net, power_w)
    return min(1.0, net.tau_th_s / t,
               dev.energy_budget_j / (power_w * t + computation_energy(dev)))


def largest_time_feasible_a(dev: DeviceProfile, net: NetworkParams, a: float,
                            resolution: float = 1e-6) -> float:
    """Bisect ``a`` downwards until ``P_min(a) <= p_max``."""
    lo, hi = 0.0, a
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if min_feasible_power(dev, net, mid) <= net.p_max:
            lo = mid
        else:
            hi = mid
    return lo


def objective_value(plan: SelectionPlan, devices: Sequence[DeviceProfile],
                    weights: Sequence[float] | None = None) -> float:
    w = np.asarray([d.weight for d in devices] if weights is None else weights, dtype=float)
    if w.shape[0] != plan.n_devices:
        raise ValueError(f"plan has {plan.n_devices} devices, got {w.shape[0]} weights")
    return float(np.sum(plan.probabilities * w[:, None]))


def feasibility_check(plan: SelectionPlan, devices: Sequence[DeviceProfile],
                      net: NetworkParams, rtol: float = FEASIBILITY_RTOL) -> FeasibilityReport:
    if len(devices) != plan.n_devices:
        raise ValueError("plan and device list disagree in length")
    n, k = plan.probabilities.shape
    e_slack = np.zeros((n, k))
    t_slack = np.zeros((n, k))
    violations = []
    a_mat, p_mat = plan.probabilities, plan.powers
    power_ok = (p_mat >= 0) & (p_mat <= net.p_max * (1 + rtol))
    prob_ok = (a_mat >= 0) & (a_mat <= 1)
    for i, dev in enumerate(devices):
        e_c = computation_energy(dev)
        for r in range(k):
            a, p = a_mat[i, r], p_mat[i, r]
            if a > 0:
                t = transmission_time(dev, net, p) if p > 0 else math.inf
                energy = a * (p * t + e_c) if p > 0 else a * e_c
                e_slack[i, r] = 1.0 - energy / dev.energy_budget_j
                t_slack[i, r] = 1.0 - a * t / net.tau_th_s
            else:
                e_slack[i, r] = 1.0
                t_slack[i, r] = 1.0
            if e_slack[i, r] < -rtol:
                violations.append((i, r, "energy"))
            if t_slack[i, r] < -rtol:
                violations.append((i, r, "time"))
            if not power_ok[i, r]:
                violations.append((i, r, "power"))
            if not prob_ok[i, r]:
                violations.append((i, r, "probability"))
    return FeasibilityReport(e_slack, t_slack, power_ok, prob_ok, violations)


def _solve_pair(dev, net, a, cfg):
    """Power step for one (device, round); returns (power, ratio, a) after repair."""
    if a <= 0:
        return 0.0, 0.0, 0.0
    try:
        sol = dinkelbach_power(dev, net, a, cfg)
    except InfeasiblePower:
        a = largest_time_feasible_a(dev, net, a)
        if a <= 0:
            return 0.0, 0.0, 0.0
        sol = dinkelbach_power(dev, net, a, cfg)
    return sol.power, sol.ratio, a


def alternating_solve(devices: Sequence[DeviceProfile], net: NetworkParams,
                      cfg: SolverConfig = SolverConfig(), rounds: int = 1,
                      weights: Sequence[float] | None = None) -> SelectionPlan:
    """Alternate power and probability updates until the objective settles.

    Starts from ``P = p_max`` with the closed-form probability at that power.
    A device whose new expected upload energy would exceed its headroom keeps
    its last feasible pair (or, with ``cfg.strict``, the whole loop stops).
    """
    if len(devices) == 0:
        raise EmptyPopulation("alternating_solve needs at least one device")
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    n = len(devices)
    w = np.asarray([d.weight for d in devices] if weights is None else weights, dtype=float)

    a = np.empty((n, rounds))
    p = np.full((n, rounds), net.p_max)
    for i, dev in enumerate(devices):
        a0 = min(cfg.a_init, optimal_probability(dev, net, net.p_max))
        a[i, :] = a0

    objective = float(np.sum(a * w[:, None]))
    history = [objective]
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        new_a = a.copy()
        new_p = p.copy()
        broke = False
        for i, dev in enumerate(devices):
            for r in range(rounds):
                power, ratio, a_fix = _solve_pair(dev, net, a[i, r], cfg)
                if a_fix <= 0:
                    new_a[i, r], new_p[i, r] = 0.0, 0.0
                    continue
                if ratio <= energy_headroom(dev, a_fix) * (1 + FEASIBILITY_RTOL):
                    new_p[i, r] = power
                    new_a[i, r] = optimal_probability(dev, net, power)
                elif cfg.strict:
                    broke = True
                    break
                # otherwise keep the last feasible (a, P) of this pair
            if broke:
                break
        if broke:
            break
        a, p = new_a, new_p
        new_objective = float(np.sum(a * w[:, None]))
        if new_objective < objective - 1e-12 * max(1.0, abs(objective)):
            raise AssertionError("objective decreased between outer iterations")
        history.append(new_objective)
        delta = abs(new_objective - objective)
        objective = new_objective
        if delta < cfg.eps_outer:
            converged = True
            break

    return SelectionPlan(a, p, converged=converged, iterations_used=it, objective=objective,
                         device_ids=[d.id for d in devices], history=history)
