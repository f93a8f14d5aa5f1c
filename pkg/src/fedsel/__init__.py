"""Probabilistic client selection and power allocation for federated learning over wireless links."""
from .baselines import (
    ComparisonSummary,
    DataConfig,
    ExperimentSpec,
    compare_runs,
    deterministic_plan,
    equally_weighted_plan,
    uniform_plan,
)
from .data import Dataset, PartitionError, PartitionSpec, compute_weights, dirichlet_partition, make_blobs, read_idx
from .fl import ModelState, TrainingConfig, TrainingTrace, evaluate, local_gradient, run_training
from .scenario import SCENARIOS, PopulationConfig, generate_population
from .solver import (
    EmptyPopulation,
    FeasibilityReport,
    InfeasiblePower,
    SelectionPlan,
    SolverConfig,
    alternating_solve,
    dinkelbach_power,
    energy_headroom,
    feasibility_check,
    objective_value,
    optimal_probability,
)
from .wireless import (
    DeviceProfile,
    NetworkParams,
    achievable_rate,
    computation_energy,
    min_feasible_power,
    round_energy,
    transmission_time,
    upload_energy,
)

__version__ = "0.1.0"
