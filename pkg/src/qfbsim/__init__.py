"""qfbsim: Monte Carlo simulation of a qubit stabilized by fluorescence feedback.

A two-level emitter is continuously monitored by heterodyne detection of
its fluorescence; both record quadratures drive analog feedback (a
record-proportional transverse drive, a record-proportional frequency
modulation, and a static drift pre-compensation) that can pin the qubit to
any chosen point of the Bloch sphere.  The package integrates the diffusive
stochastic master equation in Bloch form with a realistic signal chain
(finite detection bandwidth, loop delay), aggregates trajectory ensembles,
and cross-validates the Monte Carlo engine against a deterministic
affine-generator oracle in the Markovian limit.
"""

__version__ = "0.1.0"

from .controller import (ControllerConfig, DEFAULT_FM_KG2, FmNonlinearity,
                         calibrated_fm_nonlinearity, feedback_law, fm_box,
                         optimal_rabi_gain, rabi_box, total_controls)
from .ensemble import (EnsembleStats, ExponentialFit, FitError, fit_exponential,
                       run_ensemble, trajectory_rng, trajectory_seed)
from .experiments import (EQUATOR, EXCITED, SimSettings, Table, optimize_gfm,
                          oracle_compare, sweep_alpha, sweep_beta, sweep_gain,
                          sweep_theta, transient)
from .model import (BlochVector, ControlVector, PhysicalParams, TargetState,
                    bloch_from_angles, fidelity, ideal_params, measured_params)
from .oracle import (AffineGenerator, OracleResidualError,
                     SingularGeneratorError, extract_generator,
                     ideal_fixed_point_check, steady_state)
from .sme import (DelayLine, FilterState, IntegrationError, MeasurementRecord,
                  SignalChainState, Trajectory, control_rotation, delay_step,
                  filter_step, measurement_update, simulate_trajectory, step)

__all__ = [
    "__version__",
    # model
    "BlochVector", "TargetState", "PhysicalParams", "ControlVector",
    "bloch_from_angles", "fidelity", "measured_params", "ideal_params",
    # controller
    "ControllerConfig", "FmNonlinearity", "feedback_law", "rabi_box", "fm_box",
    "total_controls", "optimal_rabi_gain", "calibrated_fm_nonlinearity",
    "DEFAULT_FM_KG2",
    # sme
    "MeasurementRecord", "FilterState", "DelayLine", "SignalChainState",
    "Trajectory", "IntegrationError", "measurement_update", "control_rotation",
    "filter_step", "delay_step", "step", "simulate_trajectory",
    # ensemble
    "EnsembleStats", "ExponentialFit", "FitError", "run_ensemble",
    "fit_exponential", "trajectory_seed", "trajectory_rng",
    # oracle
    "AffineGenerator", "extract_generator", "steady_state",
    "ideal_fixed_point_check", "OracleResidualError", "SingularGeneratorError",
    # experiments
    "Table", "SimSettings", "sweep_gain", "sweep_alpha", "sweep_beta",
    "sweep_theta", "transient", "optimize_gfm", "oracle_compare",
    "EXCITED", "EQUATOR",
]
