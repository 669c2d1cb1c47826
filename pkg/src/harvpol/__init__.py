"""harvpol: energy-management policies for energy-harvesting sensors.

The toolkit synthesizes operating points from long-run feasibility
conditions, verifies them, simulates the resulting buffer dynamics, solves
the finite delay/distortion control problem exactly, and schedules several
sensors sharing one channel by TDMA.
"""

from .errors import (
    ConfigError,
    DomainError,
    EnergyViolation,
    HarvpolError,
    InvariantViolation,
    MissingState,
    RateInfinite,
    SpecError,
    TooShortError,
)
from .models import (
    AwgnChannelModel,
    DiscretePmf,
    Environment,
    GaussianIidSourceModel,
    GaussMarkovSourceModel,
    SensorSpec,
    SlotGeometry,
    UniformContinuous,
    analog_mmse,
    channel_rate_awgn,
    d_mmse_gaussian_iid,
    effective_source_output,
    mean_energy,
    source_rate,
)
from .policies import (
    Action,
    AnalogGreedyPolicy,
    AnalogPolicy,
    DoPolicy,
    GreedyFixedPolicy,
    GreedyPolicy,
    Hybrid1Policy,
    Hybrid2Policy,
    decide,
    policy_kind,
)
from .feasibility import (
    FeasibilityReport,
    RegionResult,
    check_analog,
    check_do,
    check_greedy,
    check_hybrid,
    expected_source_rate,
    min_feasible_distortion,
    min_source_rate,
    region_sweep,
    synthesize,
    synthesize_analog,
    synthesize_do,
    synthesize_greedy,
    synthesize_greedy_fixed,
    synthesize_hybrid1,
    synthesize_hybrid2,
    weighted_waterfill,
    write_region_csv,
)
from .simulator import (
    StabilityVerdict,
    Trace,
    run,
    stability_estimate,
    write_trace_csv,
)
from .mdp import (
    DiscreteSpec,
    MdpTables,
    SeparableSolution,
    SolvedPolicy,
    TradeoffPoint,
    build_mdp,
    separable_curve,
    separable_optimize,
    stationary_distribution,
    tradeoff_curve,
    value_iteration,
    write_tradeoff_csv,
)
from .scheduling import (
    DoSchedule,
    FixedSchedule,
    MultiSensorSpec,
    ScheduleReport,
    check_multi,
    effective_weights,
    product_joint_pmf,
    region_sweep_two_sensors,
    simulate_tdma,
    synthesize_fixed_schedule,
    synthesize_schedule,
)
from .config import (
    ExperimentConfig,
    PRESETS,
    build_job,
    config_digest,
    config_from_dict,
    load_config,
    preset,
    save_config,
)

__version__ = "0.1.0"

__all__ = [
    "Action", "AnalogGreedyPolicy", "AnalogPolicy", "AwgnChannelModel",
    "ConfigError", "DiscretePmf",
    "DiscreteSpec", "DoPolicy", "DoSchedule", "DomainError", "EnergyViolation",
    "Environment", "ExperimentConfig", "FeasibilityReport", "FixedSchedule",
    "GaussMarkovSourceModel", "GaussianIidSourceModel", "GreedyFixedPolicy",
    "GreedyPolicy", "HarvpolError", "Hybrid1Policy", "Hybrid2Policy",
    "InvariantViolation",
    "MdpTables", "MissingState", "MultiSensorSpec", "PRESETS",
    "RateInfinite",
    "RegionResult", "ScheduleReport", "SensorSpec", "SeparableSolution",
    "SlotGeometry", "SolvedPolicy", "SpecError", "StabilityVerdict",
    "TooShortError", "Trace", "TradeoffPoint", "UniformContinuous",
    "analog_mmse", "build_job", "build_mdp", "channel_rate_awgn",
    "check_analog", "check_do", "check_greedy", "check_hybrid", "check_multi",
    "config_digest", "config_from_dict", "d_mmse_gaussian_iid",
    "effective_source_output", "effective_weights", "expected_source_rate",
    "decide", "load_config", "mean_energy", "min_feasible_distortion",
    "min_source_rate", "policy_kind", "preset", "product_joint_pmf",
    "region_sweep", "region_sweep_two_sensors", "run", "save_config",
    "separable_curve", "separable_optimize", "simulate_tdma", "source_rate",
    "stability_estimate", "stationary_distribution", "synthesize",
    "synthesize_analog", "synthesize_do",
    "synthesize_fixed_schedule", "synthesize_greedy",
    "synthesize_greedy_fixed", "synthesize_hybrid1", "synthesize_hybrid2",
    "synthesize_schedule", "tradeoff_curve", "value_iteration",
    "weighted_waterfill", "write_region_csv", "write_trace_csv",
    "write_tradeoff_csv",
]
