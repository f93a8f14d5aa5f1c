import numpy as np
import pytest

from fedsel.wireless import DeviceProfile, NetworkParams

ACCEPTANCE_LINES = []


@pytest.fixture
def ref_device():
    # 10 MHz shared by 100 devices, 100 m from the server, 600 samples
    return DeviceProfile(id=0, distance_m=100.0, bandwidth_hz=1e5, dataset_size=600,
                         energy_budget_j=1.0, weight=1.0)


@pytest.fixture
def ref_net():
    return NetworkParams(noise_power=1e-12, message_bits=199_210 * 32, p_max=0.1, tau_th_s=0.08)


def random_device(rng, i=0, bandwidth=None):
    return DeviceProfile(
        id=i,
        distance_m=float(rng.uniform(1.0, 707.0)),
        bandwidth_hz=float(bandwidth or rng.uniform(5e4, 1e6)),
        dataset_size=int(rng.integers(50, 3000)),
        energy_budget_j=float(np.exp(rng.uniform(np.log(1e-3), np.log(100.0)))),
        weight=0.05,
    )


@pytest.fixture
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
