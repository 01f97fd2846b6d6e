"""Energy-aware safety-critical control of port-Hamiltonian systems.

The package provides:

* evaluable port-Hamiltonian structures and their bracket algebra (core);
* the closed-form CBF safety filter with exact power accounting and an
  independent QP cross-check (barrier);
* mechanical systems, energy-shaped barriers and their specialised
  power/margin formulas (mechanics);
* energy-audited fixed-step simulation and limit-cycle detection (simulate);
* reproducible experiment presets, CSV/SVG outputs and a CLI (scenarios, cli).
"""
from .barrier import (Barrier, CbfDegeneracyError, ClassK, FilterResult,
                      QpInfeasibleError, constraint_margin, energy_bound_barrier,
                      safety_filter, solve_filter_qp, stability_condition)
from .core import (PhSystem, PowerTerms, StructureReport, bracket_j, bracket_sym,
                   drift, output, power_terms, validate_structure)
from .io import read_trajectory_csv, write_trajectory_csv
from .mechanics import (EnergyCbfSpec, MechanicalReport, MechanicalSystem,
                        barrier_from_spec, constraint_margin_mech,
                        constraint_margin_split, dkinetic_dq, filter_power,
                        kinetic_energy, make_double_pendulum, make_mass_spring,
                        to_ph, validate_mechanical, velocity)
from .numerics import central_gradient, gradient_rel_error, sample_states
from .scenarios import (BarrierConfig, ConfigError, ScenarioConfig, ScenarioResult,
                        build_barrier_spec, build_plant, list_presets, load_config,
                        preset_config, run_scenario)
from .simulate import (AuditReport, LimitCycleResult, SimConfig,
                       SimulationDivergenceError, Trajectory, audit,
                       detect_limit_cycle, simulate, step)
from .tolerances import DEFAULT_TOLERANCES, Tolerances

__version__ = "0.1.0"

__all__ = [
    "Barrier", "CbfDegeneracyError", "ClassK", "FilterResult", "QpInfeasibleError",
    "constraint_margin", "energy_bound_barrier", "safety_filter", "solve_filter_qp",
    "stability_condition",
    "PhSystem", "PowerTerms", "StructureReport", "bracket_j", "bracket_sym",
    "drift", "output", "power_terms", "validate_structure",
    "read_trajectory_csv", "write_trajectory_csv",
    "EnergyCbfSpec", "MechanicalReport", "MechanicalSystem", "barrier_from_spec",
    "constraint_margin_mech", "constraint_margin_split", "dkinetic_dq", "filter_power",
    "kinetic_energy", "make_double_pendulum", "make_mass_spring", "to_ph",
    "validate_mechanical", "velocity",
    "central_gradient", "gradient_rel_error", "sample_states",
    "BarrierConfig", "ConfigError", "ScenarioConfig", "ScenarioResult",
    "build_barrier_spec", "build_plant", "list_presets", "load_config",
    "preset_config", "run_scenario",
    "AuditReport", "LimitCycleResult", "SimConfig", "SimulationDivergenceError",
    "Trajectory", "audit", "detect_limit_cycle", "simulate", "step",
    "DEFAULT_TOLERANCES", "Tolerances",
]
