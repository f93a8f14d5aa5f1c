"""Command-line runner: ``python -m fedsel {solve,train,bench} --config PATH``.

The configuration is one JSON document whose top-level blocks override the
defaults: ``network``, ``solver``, ``training``, ``experiment``,
``population``, ``data`` and ``output_dir``. Every run writes a resolved
configuration snapshot next to its artifacts.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .baselines import DataConfig, ExperimentSpec, build_setup, compare_runs, strategy_plans, uniform_plan
from .data import PartitionError
from .fl import TrainingConfig, run_training
from .scenario import PopulationConfig
from .solver import EmptyPopulation, InfeasiblePower, SolverConfig
from .wireless import NetworkParams

log = logging.getLogger("fedsel")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentSpec = ExperimentSpec()
    output_dir: str = "out"

    @property
    def training(self) -> TrainingConfig:
        return self.experiment.training

    def to_dict(self) -> dict:
        exp = self.experiment
        top = {f.name: getattr(exp, f.name) for f in dataclasses.fields(exp)
               if f.name not in ("net", "training", "solver", "population", "data")}
        top["strategies"] = list(exp.strategies)
        top["target_accuracies"] = list(exp.target_accuracies)
        return {
            "network": dataclasses.asdict(exp.net),
            "solver": dataclasses.asdict(exp.solver),
            "training": dataclasses.asdict(exp.training),
            "experiment": top,
            "population": dataclasses.asdict(exp.population),
            "data": dataclasses.asdict(exp.data),
            "output_dir": self.output_dir,
        }


def _build(cls, block, name):
    if block is None:
        return cls()
    if not isinstance(block, dict):
        raise ConfigError(f"block {name!r} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(block) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(unknown)}")
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r} block: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    blocks = {"network", "solver", "training", "experiment", "population", "data", "output_dir"}
    unknown = sorted(set(doc) - blocks)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    exp_block = dict(doc.get("experiment") or {})
    for key in ("strategies", "target_accuracies"):
        if key in exp_block:
            exp_block[key] = tuple(exp_block[key])
    nested = {
        "net": _build(NetworkParams, doc.get("network"), "network"),
        "training": _build(TrainingConfig, doc.get("training"), "training"),
        "solver": _build(SolverConfig, doc.get("solver"), "solver"),
        "population": _build(PopulationConfig, doc.get("population"), "population"),
        "data": _build(DataConfig, doc.get("data"), "data"),
    }
    clash = sorted(set(exp_block) & set(nested))
    if clash:
        raise ConfigError(f"{', '.join(clash)} belong in their own blocks, not 'experiment'")
    experiment = _build(ExperimentSpec, {**exp_block, **nested}, "experiment")
    for key in ("train_images", "train_labels", "test_images", "test_labels"):
        path = getattr(experiment.data, key)
        if path and not Path(path).exists():
            raise ConfigError(f"data file not found: {path}")
    return RunConfig(experiment, str(doc.get("output_dir", "out")))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(doc)


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)
    log.info("wrote %s", out / name)


def run(cfg: RunConfig, command: str) -> int:
    exp = cfg.experiment
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "config.resolved.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True))

    if command == "bench":
        summary = compare_runs(exp)
        _write(out, "plan.json", summary.plans["probabilistic"].to_json())
        _write(out, "summary.csv", summary.to_csv())
        _write(out, "summary.json", summary.to_json())
        _write(out, "curves.csv", summary.curves_csv())
        for name, traces in summary.traces.items():
            _write(out, f"trace_{name}.csv", traces[0].to_csv())
        return EXIT_OK

    train, test, parts, devices, net = build_setup(exp)
    plans = strategy_plans(exp, devices, net)
    _write(out, "plan.json", plans["probabilistic"].to_json())
    if command == "solve":
        return EXIT_OK

    strategy = exp.training.strategy
    if strategy == "uniform":
        m = exp.uniform_m or int(round(plans["probabilistic"].probabilities[:, 0].sum()))
        plan = uniform_plan(devices, net, min(max(m, 1), len(devices)), exp.rounds,
                            rng=exp.training.seed)
    else:
        plan = plans[strategy]
    trace = run_training(devices, net, plan, train, parts, exp.training, test=test)
    _write(out, f"trace_{strategy}.csv", trace.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsel", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=("solve", "train", "bench"))
    parser.add_argument("--config", help="JSON configuration file (defaults used when omitted)")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--seed", type=int, help="override the experiment and training seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            exp = cfg.experiment
            cfg = replace(cfg, experiment=replace(exp, seed=args.seed,
                                                  training=replace(exp.training, seed=args.seed)))
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
    except ConfigError as exc:
        print(f"fedsel: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, args.command)
    except (PartitionError, EmptyPopulation, InfeasiblePower) as exc:
        print(f"fedsel: infeasible population: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"fedsel: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
