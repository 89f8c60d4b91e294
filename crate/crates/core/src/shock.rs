//! Single-shock conversion experiments.
//!
//! Inside the bistable parameter window a settled wave can be pushed from
//! one coexisting solution onto the other by a single uniform impulse to
//! the excitation field. The shock is a pure time impulse: it raises `u1`
//! by the amplitude everywhere in one step and leaves `u2` alone, so it
//! looks the same in the comoving frame as in the lab frame. Depending on
//! amplitude, the wave shrugs it off, lands on the other branch, or dies
//! outright.

use std::path::Path;

use crate::error::{Result, SimError};
use crate::kinetics::rest_state;
use crate::quotient::{classify, Classification, QuotientSeries};
use crate::runner::{run_to_classification, RunPolicy, Sim};
use crate::snapshot::read_snapshot;
use crate::solver::SimState;

/// Field-value distance from uniform rest below which the medium counts as
/// extinguished.
pub const REST_PROXIMITY: f64 = 1e-4;

/// One impulse: `u1 += amplitude` at every grid point, `at_step` steps
/// after the conversion run starts. The recovery field is never shocked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockSpec {
    /// Uniform increment added to `u1` (field units).
    pub amplitude: f64,
    /// Steps to advance from the loaded snapshot before the impulse lands.
    pub at_step: u64,
}

impl ShockSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(SimError::InvalidModel(format!(
                "shock amplitude must be finite, got {}",
                self.amplitude
            )));
        }
        if self.at_step == 0 {
            return Err(SimError::InvalidModel(
                "shock must land at step 1 or later, so the pre-shock state is observable".into(),
            ));
        }
        Ok(())
    }
}

/// What the shock did to the wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Post-shock motion classifies differently from pre-shock motion.
    Converted,
    /// Same classification before and after.
    Unchanged,
    /// No wave left: the field collapsed to rest or the tip was lost.
    Eliminated,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converted => "Converted",
            Verdict::Unchanged => "Unchanged",
            Verdict::Eliminated => "Eliminated",
        })
    }
}

/// Full account of one conversion run.
#[derive(Debug, Clone)]
pub struct ShockOutcome {
    pub verdict: Verdict,
    pub pre_class: Classification,
    /// `None` when the wave was eliminated before the motion classified.
    pub post_class: Option<Classification>,
    /// Velocity record of the post-shock run, up to where it resolved or
    /// the wave died.
    pub post_series: QuotientSeries,
}

/// Adds the impulse to the excitation field in place.
pub fn apply_shock(state: &mut SimState, spec: &ShockSpec) {
    for v in state.fields.u1.data_mut() {
        *v += spec.amplitude;
    }
}

fn verdict_for(pre: Classification, post: Classification) -> Verdict {
    if pre == post {
        Verdict::Unchanged
    } else {
        Verdict::Converted
    }
}

fn near_uniform_rest(state: &SimState, u_r: f64, v_r: f64) -> bool {
    let u1_dev = state.fields.u1.data().iter().map(|v| (v - u_r).abs()).fold(0.0, f64::max);
    let u2_dev = state.fields.u2.data().iter().map(|v| (v - v_r).abs()).fold(0.0, f64::max);
    u1_dev < REST_PROXIMITY && u2_dev < REST_PROXIMITY
}

/// Solver wrapper that reports wave death between batches, so the
/// classification driver stops as soon as the medium has gone quiet.
struct RestWatch<'a> {
    state: &'a mut SimState,
    u_r: f64,
    v_r: f64,
}

impl Sim for RestWatch<'_> {
    fn advance(&mut self, steps: u64) -> Result<()> {
        self.state.run(steps)?;
        if near_uniform_rest(self.state, self.u_r, self.v_r) {
            return Err(SimError::NoTip);
        }
        Ok(())
    }

    fn record(&self) -> &QuotientSeries {
        &self.state.record
    }

    fn reset_record(&mut self) {
        self.state.reset_record();
    }

    fn engaged(&self) -> bool {
        self.state.advection_engaged
    }
}

/// Loads a settled branch snapshot, advances to the shock step, applies the
/// impulse, and classifies what the wave does next.
///
/// The pre-shock classification is read off the record accumulated on the
/// way to the shock step, which keeps the trajectory bitwise identical to
/// an unshocked run up to the impulse. Tip loss or collapse to rest after
/// the impulse is the `Eliminated` verdict; before the impulse it is an
/// error, because the snapshot was supposed to hold a settled wave. A
/// post-shock run that exhausts its budget without classifying is reported
/// as [`SimError::Unresolved`].
pub fn run_conversion(
    snapshot: &Path,
    diff: [[f64; 2]; 2],
    spec: &ShockSpec,
    policy: &RunPolicy,
) -> Result<ShockOutcome> {
    spec.validate()?;
    let mut state = read_snapshot(snapshot, diff)?;
    if !state.advection_engaged {
        return Err(SimError::NotEngaged);
    }
    let (u_r, v_r) = rest_state(&state.model)?;

    state.reset_record();
    state.run(spec.at_step)?;
    let pre_class = classify(&state.record, policy.tol);
    if pre_class != Classification::Rw && pre_class != Classification::Mrw {
        return Err(SimError::Unresolved { steps: spec.at_step });
    }

    apply_shock(&mut state, spec);

    let mut watched = RestWatch { state: &mut state, u_r, v_r };
    match run_to_classification(&mut watched, policy) {
        Ok(out) => {
            let post = out.classification;
            if post != Classification::Rw && post != Classification::Mrw {
                return Err(SimError::Unresolved { steps: out.steps_run });
            }
            Ok(ShockOutcome {
                verdict: verdict_for(pre_class, post),
                pre_class,
                post_class: Some(post),
                post_series: state.record.clone(),
            })
        }
        Err(SimError::NoTip | SimError::SingularPinning { .. }) => Ok(ShockOutcome {
            verdict: Verdict::Eliminated,
            pre_class,
            post_class: None,
            post_series: state.record.clone(),
        }),
        Err(e) => Err(e),
    }
}
