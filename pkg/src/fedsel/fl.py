"""Simulated federated training with probabilistic client participation.

Each round every device draws its own Bernoulli(a_ik) participation from a
per-device random stream, participants send one full-batch gradient of their
mean local loss, and the server applies ``theta -= eta * sum_i alpha_i g_i``
over the participants. The round clock is the slowest participant's upload
time; computation time is not clocked but computation energy is charged.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, PartitionSpec, compute_weights
from .solver import SelectionPlan
from .wireless import DeviceProfile, NetworkParams, computation_energy, upload_energy, transmission_time

STRATEGIES = ("probabilistic", "deterministic", "uniform", "equally_weighted")
ALPHA_MODES = ("weight", "participants")
TRACE_HEADER = ["round", "time_s", "cum_time_s", "energy_j", "cum_energy_j",
                "participants", "accuracy", "loss"]


@dataclass(frozen=True)
class TrainingConfig:
    eta: float = 0.1
    rounds: int = 100
    seed: int = 0
    strategy: str = "probabilistic"
    alpha_mode: str = "weight"
    hidden: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}; choose from {ALPHA_MODES}")
        if self.hidden < 0:
            raise ValueError("hidden must be non-negative")


@dataclass
class ModelState:
    """Flat parameter vector plus layer sizes ``(dims, [hidden,] classes)``.

    Two sizes give multinomial logistic regression; three give a tanh MLP.
    Each layer is stored as its weight matrix (row-major, in x out) followed
    by its bias.
    """

    theta: np.ndarray
    layers: tuple[int, ...]

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.layers = tuple(int(s) for s in self.layers)
        if len(self.layers) not in (2, 3):
            raise ValueError("layers must be (dims, classes) or (dims, hidden, classes)")
        if self.theta.shape != (n_parameters(self.layers),):
            raise ValueError(f"theta has {self.theta.size} entries, architecture needs "
                             f"{n_parameters(self.layers)}")

    def copy(self) -> "ModelState":
        return ModelState(self.theta.copy(), self.layers)


def n_parameters(layers: Sequence[int]) -> int:
    return sum(m * n + n for m, n in zip(layers[:-1], layers[1:]))


def init_model(dims: int, classes: int, hidden: int = 0, seed: int = 0) -> ModelState:
    """Zero-initialised logistic regression, or a small random MLP when ``hidden > 0``."""
    if hidden == 0:
        layers = (dims, classes)
        return ModelState(np.zeros(n_parameters(layers)), layers)
    layers = (dims, hidden, classes)
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(dims), size=(dims, hidden))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, classes))
    theta = np.concatenate([w1.ravel(), np.zeros(hidden), w2.ravel(), np.zeros(classes)])
    return ModelState(theta, layers)


def _unpack(theta, layers):
    params, at = [], 0
    for m, n in zip(layers[:-1], layers[1:]):
        w = theta[at:at + m * n].reshape(m, n)
        at += m * n
        b = theta[at:at + n]
        at += n
        params.append((w, b))
    return params


def _softmax_xent(logits, y):
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    losses = -log_p[np.arange(len(y)), y]
    return losses, np.exp(log_p)


def predict_logits(model: ModelState, x: np.ndarray) -> np.ndarray:
    params = _unpack(model.theta, model.layers)
    h = x
    for w, b in params[:-1]:
        h = np.tanh(h @ w + b)
    w, b = params[-1]
    return h @ w + b


def loss_and_gradient(model: ModelState, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over ``(x, y)`` and its gradient in flat layout."""
    params = _unpack(model.theta, model.layers)
    activations = [x]
    h = x
    for w, b in params[:-1]:
        h = np.tanh(h @ w + b)
        activations.append(h)
    w_out, b_out = params[-1]
    losses, probs = _softmax_xent(h @ w_out + b_out, y)
    n = len(y)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads = []
    for layer in range(len(params) - 1, -1, -1):
        w, _ = params[layer]
        a_in = activations[layer]
        grads.append((a_in.T @ delta, delta.sum(axis=0)))
        if layer > 0:
            delta = (delta @ w.T) * (1.0 - a_in ** 2)
    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in reversed(grads)])
    return float(losses.mean()), flat


def local_gradient(model: ModelState, data: Dataset, indices) -> np.ndarray:
    """Full-batch gradient of the device's mean per-sample loss."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("local_gradient needs at least one sample")
    return loss_and_gradient(model, data.features[indices], data.labels[indices])[1]


def evaluate(model: ModelState, test: Dataset) -> tuple[float, float]:
    if len(test) == 0:
        raise ValueError("empty test set")
    logits = predict_logits(model, test.features)
    losses, _ = _softmax_xent(logits, test.labels)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == test.labels))
    return accuracy, float(losses.mean())


def device_streams(seed: int, n_devices: int) -> list[np.random.Generator]:
    """Independent per-device generators derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(n_devices)
    return [np.random.default_rng(c) for c in children]


def sample_participants(plan: SelectionPlan, k: int, rng) -> np.ndarray:
    """Indices of devices that transmit in round ``k``.

    ``rng`` is either one generator (one uniform per device, in order) or a
    sequence of per-device generators; each device always consumes one draw.
    """
    if not 0 <= k < plan.rounds:
        raise IndexError(f"round {k} outside plan with {plan.rounds} rounds")
    if isinstance(rng, np.random.Generator):
        u = rng.random(plan.n_devices)
    else:
        if len(rng) != plan.n_devices:
            raise ValueError("need one generator per device")
        u = np.array([g.random() for g in rng])
    return np.flatnonzero(u < plan.probabilities[:, k])


def aggregate_update(theta: np.ndarray, gradients, alphas, eta: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    gradients = [np.asarray(g, dtype=float) for g in gradients]
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    if len(gradients) != alphas.size:
        raise ValueError("gradients and alphas are not aligned")
    step = np.zeros_like(theta)
    for alpha, g in zip(alphas, gradients):
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape {g.shape} does not match theta {theta.shape}")
        step += alpha * g
    return theta - eta * step


@dataclass
class RoundRecord:
    round: int
    participants: list[int]
    round_time_s: float
    device_energy_j: np.ndarray
    cum_time_s: float
    cum_energy_j: float
    accuracy: float
    loss: float

    @property
    def energy_j(self) -> float:
        return float(self.device_energy_j.sum())


@dataclass
class TrainingTrace:
    initial_accuracy: float
    initial_loss: float
    records: list[RoundRecord] = field(default_factory=list)
    final_model: ModelState | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        """Per-round column with the pre-training state prepended at index 0."""
        start = {"accuracy": self.initial_accuracy, "loss": self.initial_loss}.get(name, 0.0)
        values = [getattr(r, name) for r in self.records]
        return np.array([start] + values, dtype=float)

    def device_energy(self) -> np.ndarray:
        """[rounds x devices] energy matrix."""
        return np.array([r.device_energy_j for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.records:
            writer.writerow([r.round, repr(r.round_time_s), repr(r.cum_time_s), repr(r.energy_j),
                             repr(r.cum_energy_j), ";".join(map(str, r.participants)),
                             repr(r.accuracy), repr(r.loss)])
        return buf.getvalue()


class Federation:
    """Static context of one simulated deployment: devices, channel and data."""

    def __init__(self, devices: Sequence[DeviceProfile], net: NetworkParams, data: Dataset,
                 parts: PartitionSpec, test: Dataset | None = None, alpha_mode: str = "weight",
                 eta: float = 0.1):
        if len(devices) != len(parts.assignments):
            raise ValueError("one partition entry per device is required")
        if alpha_mode not in ALPHA_MODES:
            raise ValueError(f"unknown alpha_mode {alpha_mode!r}")
        self.devices = list(devices)
        self.net = net
        self.data = data
        self.parts = parts
        self.test = data if test is None else test
        self.alpha_mode = alpha_mode
        self.eta = eta
        self.weights = compute_weights(parts)
        self.local = [(data.features[ix], data.labels[ix]) for ix in parts.assignments]
        self.comp_energy = np.array([computation_energy(d) for d in self.devices])

    def link_cost(self, i: int, power: float) -> tuple[float, float]:
        """(upload time, round energy) of device ``i`` transmitting at ``power``."""
        dev = self.devices[i]
        return transmission_time(dev, self.net, power), self.comp_energy[i] + upload_energy(dev, self.net, power)


def simulate_round(fed: Federation, model: ModelState, plan: SelectionPlan, k: int, rng,
                   cum_time: float = 0.0, cum_energy: float = 0.0) -> tuple[ModelState, RoundRecord]:
    chosen = sample_participants(plan, k, rng)
    energy = np.zeros(len(fed.devices))
    round_time = 0.0
    grads = []
    for i in chosen:
        t, e = fed.link_cost(i, plan.powers[i, k])
        round_time = max(round_time, t)
        energy[i] = e
        x, y = fed.local[i]
        grads.append(loss_and_gradient(model, x, y)[1])
    if fed.alpha_mode == "weight":
        alphas = fed.weights[chosen]
    else:
        alphas = np.full(len(chosen), 1.0 / max(len(chosen), 1))
    new_model = ModelState(aggregate_update(model.theta, grads, alphas, fed.eta), model.layers)
    accuracy, loss = evaluate(new_model, fed.test)
    record = RoundRecord(k, [int(i) for i in chosen], round_time, energy,
                         cum_time + round_time, cum_energy + float(energy.sum()), accuracy, loss)
    return new_model, record


def run_training(devices: Sequence[DeviceProfile], net: NetworkParams, plan: SelectionPlan,
                 data: Dataset, parts: PartitionSpec, cfg: TrainingConfig,
                 test: Dataset | None = None, model: ModelState | None = None) -> TrainingTrace:
    if plan.n_devices != len(devices):
        raise ValueError("plan and device list disagree in length")
    if plan.rounds < cfg.rounds:
        raise ValueError(f"plan covers {plan.rounds} rounds, training needs {cfg.rounds}")
    fed = Federation(devices, net, data, parts, test, cfg.alpha_mode, cfg.eta)
    if model is None:
        model = init_model(data.dims, data.classes, cfg.hidden, seed=cfg.seed)
    rngs = device_streams(cfg.seed, len(devices))
    acc0, loss0 = evaluate(model, fed.test)
    trace = TrainingTrace(acc0, loss0)
    cum_time = cum_energy = 0.0
    for k in range(cfg.rounds):
        model, record = simulate_round(fed, model, plan, k, rngs, cum_time, cum_energy)
        cum_time, cum_energy = record.cum_time_s, record.cum_energy_j
        trace.records.append(record)
    trace.final_model = model
    return trace
