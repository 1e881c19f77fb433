"""Simulation and optimization of reconfigurable coupler antenna (RCA) arrays."""

from .channel import (PathSet, channel_gain, effective_channel, gain_map, port_channel,
                      sample_pathset, snr_and_rate)
from .em import (DipoleSpec, ImpedanceSet, LoadConfig, MechanicalWeights, assemble_impedances,
                 mechanical_weights, mutual_impedance_side_by_side, self_impedance)
from .errors import (ConditioningError, ConfigError, DomainError, PlanningError, ProjectionError,
                     QuantizationError, RCAError, SpacingError)
from .estimate import (AngleGrid, EstimatedPaths, MeasurementSet, reconstruct_channel,
                       recover_paths, synthesize_measurements)
from .estimators import CouplerPlacement, PathRecovery
from .layout import ArrayLayout, ula_layout
from .optimize import (OptimizationConfig, OptimizationTrace, baseline_fully_active,
                       optimize_joint, optimize_loads, optimize_positions, project_feasible,
                       quantize_positions)
from .planner import MovePlan, assign_targets, plan_trajectories, verify_plan
from .scenario import Scenario, load_scenario, save_scenario
from .special import cosine_integral, sine_integral

__version__ = "0.1.0"
