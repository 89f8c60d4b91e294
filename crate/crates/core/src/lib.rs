//! Spiral wave dynamics in a frame comoving with the wave tip.
//!
//! The library integrates a two-component reaction-diffusion system on a
//! square grid and, once a rotor has formed, switches to a frame that
//! translates and rotates with the tip. The frame velocities `(cx, cy, omega)`
//! are recovered every step from a tip pinning condition, which turns the
//! tip trajectory into a time series of frame velocities. Downstream modules
//! quantify that series (arc length per period of the velocity cycle),
//! classify the motion as rigid rotation or meander, and run parameter
//! continuation experiments: sweeps in the excitability parameter, hysteresis
//! scans, stimulus-response ("shock") protocols, and numerical convergence
//! checks.
//!
//! Modules are layered bottom-up:
//!
//! * [`kinetics`]: reaction terms and rest state of the local model
//! * [`grid`]: grid geometry, Laplacian and upwind-gradient stencils
//! * [`solver`]: operator-split time stepper and the frame-velocity solve
//! * [`snapshot`]: lossless on-disk state format
//! * [`quotient`]: velocity-series analysis and motion classification
//! * [`trajectory`]: tip path reconstruction from a velocity series
//! * [`runner`]: run-until-classified driver used by experiments
//! * [`sweep`]: parameter continuation, bifurcation points, hysteresis
//! * [`shock`]: impulse perturbation experiments between coexisting states
//!
//! Everything is deterministic: there is no random state anywhere, and a
//! repeated run from the same inputs reproduces trajectories bitwise.

pub mod error;
pub mod grid;
pub mod kinetics;
pub mod quotient;
pub mod runner;
pub mod shock;
pub mod snapshot;
pub mod solver;
pub mod sweep;
pub mod trajectory;

pub use error::SimError;
pub use grid::{make_numerics, Field, FieldPair, NumericalParams};
pub use kinetics::{reaction, rest_state, ModelParams};
pub use quotient::{classify, detect_period, quotient_size, Classification, QuotientSeries};
pub use runner::{run_to_classification, RunOutcome, RunPolicy};
pub use shock::{apply_shock, run_conversion, ShockOutcome, ShockSpec, Verdict};
pub use snapshot::{read_snapshot, state_hash, write_snapshot};
pub use solver::{FrameState, PinningSpec, SimState};
pub use sweep::{
    find_bifurcation_points, hysteresis_region, run_sweep, ConvergenceVariant, Direction,
    HysteresisRegion, SeedState, SweepRecord, SweepResult, SweepSink, SweepSpec,
};
pub use trajectory::{reconstruct_tip, TipPath};
