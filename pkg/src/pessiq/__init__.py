"""Pessimistic asynchronous Q-learning on tabular MDPs."""
from .evaluation import GapReport, evaluate_policy, make_rho, nearest_rank
from .harness import ExperimentSpec, RunRecord, emit_plot_data, generate_instance, read_records, run_sweep
from .instances import chain_mdp, near_expert_behavior, near_expert_fixture, random_mdp
from .lcb import LcbConfig, LcbState, eta_weights, hoeffding_penalty, lcb_step, learning_rate, run_lcb
from .mdp import (ChainDiagnostics, ConvergenceError, DeterministicPolicy, ExactSolution, MdpFormatError,
                  OccupancyMeasure, StochasticPolicy, TabularMdp, concentrability, load_mdp, mixing_time,
                  occupancy, policy_evaluation, stationary_distribution, value_iteration)
from .rng import SplitMix64, derive_seed
from .sampling import Sampler, SamplerConfig, Trajectory, Transition
from .vr import (EpochSchedule, ReferenceBundle, VrConfig, VrResult, adv_penalty, build_schedule,
                 empirical_transition, run_vr, vr_epoch)

__version__ = "0.1.0"
