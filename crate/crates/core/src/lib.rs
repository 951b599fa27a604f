//! Probabilistic behavioral distances between a parametrized input-output
//! ODE system and a simpler specification family, and joint tuning of the
//! system so its input-output behavior matches the specification.
//!
//! The pieces:
//!
//! - [`trajectory`]: time grids, the [`SystemFamily`] trait and RK4
//!   integration with forward sensitivities;
//! - [`input`]: random Fourier-series inputs;
//! - [`distance`]: output distance, per-input specification fits, Monte
//!   Carlo estimators and confidence intervals;
//! - [`optim`]: ADAM, AMSGrad and BFGS;
//! - [`tuning`]: the joint objective over system and per-sample
//!   specification parameters, and the tuning driver;
//! - [`models`]: the diffusive network, second-order Kuramoto network and a
//!   scalar linear test system.

pub mod distance;
pub mod error;
pub mod input;
pub mod models;
pub mod optim;
pub mod trajectory;
pub mod tuning;

pub use distance::{
    confidence_interval, epsilon_curve, estimate_d_rho, estimate_d_rho_eps, fit_spec_to_input, output_distance,
    ConfidenceInterval, DistanceConfig, EpsilonCurvePoint, InnerFitConfig, InnerFitResult, Problem, RhoEstimate,
};
pub use error::{Error, Result};
pub use input::{sample_inputs, FourierSignal, InputEnsembleSpec};
pub use optim::{run_optimizer, GradientMode, OptimizerConfig, OptimizerKind, OptimizerOutcome};
pub use optim::{OptimizerStatus, SearchBox};
pub use trajectory::{
    integrate, output_trajectory, Coordinate, InputSignal, ParamDomain, SystemFamily, TimeGrid, Trajectory,
};
pub use tuning::{
    estimate_flags, joint_gradient, joint_loss, random_initial_guess, random_initial_guesses, resample_and_validate,
    run_joint_schedule, stage_flags, tune, JointParams, StageRecord, TuneOptions, TuningReport, TuningStep,
};
