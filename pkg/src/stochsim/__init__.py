"""Stochastic transient-stability simulation of multi-machine power systems.

Solves the coupled machine/network model with Ornstein-Uhlenbeck load noise
using either a windowed truncated power-series propagator or an
Euler-Maruyama reference scheme, and provides Monte Carlo ensemble
statistics (stability-in-probability, envelopes, distribution evolution).
"""

__version__ = "0.1.0"

from .case import SystemCase, GeneratorParams, CaseError, parse_case, load_case
from .network import (
    NetworkCondition,
    ReducedNetwork,
    ReductionError,
    load_to_admittance,
    build_reduced_network,
    kron_reduce,
)
from .powerflow import PowerFlowError, solve_power_flow
from .dynamics import (
    AlgebraicOutputs,
    EquilibriumError,
    MachineSet,
    compute_injections,
    init_dynamic_state,
    rhs,
    solve_equilibrium,
)
from .noise import (
    NoisePath,
    OUParams,
    StochasticLoadSpec,
    build_noise_path,
    ou_closed_form,
    ou_exact_step,
    sample_load_path,
    stationary_variance,
)
from .scenario import Scenario, ScenarioError, SimulationSetup, load_scenario
from .trajectory import Trajectory
from .sas import SolverConfig, SASWindow, derive_window, evaluate_sas, simulate_sas
from .em import EMConfig, em_sde_step, euler_det_step, simulate_em
from .ensemble import (
    Ensemble,
    StabilityCriterion,
    PdfSnapshot,
    confidence_envelope,
    ensemble_stats,
    pdf_evolution,
    run_ensemble,
    stability_probability,
)
