"""Channel, timing and energy model for devices uploading gradients to a server.

The received SNR is ``P * d**-2 / sigma2`` where ``sigma2`` is the total noise
power of the device channel (it is not multiplied by the bandwidth). Path loss
is a deterministic ``d**-2`` law with no fading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: 199,210 float32 parameters.
DEFAULT_MESSAGE_BITS = 199_210 * 32
DEFAULT_CAPACITANCE = 1e-28
DEFAULT_CYCLES_PER_SAMPLE = 1e4
DEFAULT_CPU_FREQ_HZ = 1e9


class InfiniteTimeError(ValueError):
    """Raised when a transmission is requested at zero rate."""


@dataclass(frozen=True)
class DeviceProfile:
    id: int
    distance_m: float
    bandwidth_hz: float
    dataset_size: int
    energy_budget_j: float
    weight: float = 0.0
    cpu_freq_hz: float = DEFAULT_CPU_FREQ_HZ
    cycles_per_sample: float = DEFAULT_CYCLES_PER_SAMPLE
    capacitance: float = DEFAULT_CAPACITANCE

    def __post_init__(self):
        for name in ("distance_m", "bandwidth_hz", "energy_budget_j",
                     "cpu_freq_hz", "cycles_per_sample", "capacitance"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.dataset_size < 0:
            raise ValueError("dataset_size must be non-negative")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight!r}")


@dataclass(frozen=True)
class NetworkParams:
    noise_power: float = 1e-12
    message_bits: float = DEFAULT_MESSAGE_BITS
    p_max: float = 0.1
    tau_th_s: float = 0.5

    def __post_init__(self):
        for name in ("noise_power", "message_bits", "p_max", "tau_th_s"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


def channel_floor(dev: DeviceProfile, net: NetworkParams) -> float:
    """Return ``d**2 * sigma2``, the power at which the SNR equals one."""
    return dev.distance_m ** 2 * net.noise_power


def achievable_rate(dev: DeviceProfile, net: NetworkParams, power_w: float) -> float:
    if power_w < 0:
        raise ValueError("power_w must be non-negative")
    return dev.bandwidth_hz * math.log1p(power_w / channel_floor(dev, net)) / math.log(2)


def transmission_time(dev: DeviceProfile, net: NetworkParams, power_w: float) -> float:
    rate = achievable_rate(dev, net, power_w)
    if rate <= 0:
        raise InfiniteTimeError(f"device {dev.id}: zero rate at power {power_w!r} W")
    return net.message_bits / rate


def computation_energy(dev: DeviceProfile) -> float:
    return dev.capacitance * dev.cycles_per_sample * dev.dataset_size * dev.cpu_freq_hz ** 2


def upload_energy(dev: DeviceProfile, net: NetworkParams, power_w: float) -> float:
    return power_w * transmission_time(dev, net, power_w)


def round_energy(dev: DeviceProfile, net: NetworkParams, power_w: float) -> float:
    """Computation plus upload energy of one participation."""
    return computation_energy(dev) + upload_energy(dev, net, power_w)


def min_feasible_power(dev: DeviceProfile, net: NetworkParams, a: float) -> float:
    """Smallest power meeting the expected-time threshold at probability ``a``.

    At the returned power ``a * transmission_time == tau_th``. The value may
    exceed ``net.p_max`` (or overflow to ``inf``); callers decide feasibility.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"a must lie in (0, 1], got {a!r}")
    exponent = a * net.message_bits / (dev.bandwidth_hz * net.tau_th_s)
    try:
        growth = math.expm1(exponent * math.log(2))
    except OverflowError:
        return math.inf
    return channel_floor(dev, net) * growth


def max_time_feasible_probability(dev: DeviceProfile, net: NetworkParams) -> float:
    """Largest ``a`` with ``a * T(P_max) <= tau_th``, clamped to 1."""
    return min(1.0, net.tau_th_s / transmission_time(dev, net, net.p_max))


def upload_energy_curve(dev: DeviceProfile, net: NetworkParams, powers) -> np.ndarray:
    """Vectorised ``P * T(P)`` over an array of positive powers."""
    powers = np.asarray(powers, dtype=float)
    rate = dev.bandwidth_hz * np.log1p(powers / channel_floor(dev, net)) / np.log(2)
    return powers * net.message_bits / rate
