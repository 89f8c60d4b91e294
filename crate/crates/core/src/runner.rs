//! Run-until-classified driver.
//!
//! Continuation experiments all need the same loop: advance the solver,
//! keep checking the velocity record, and stop as soon as the motion is
//! confidently rigid rotation or confidently meander, giving up at a step
//! cap. The subtlety is that a parameter step kicks up a velocity
//! oscillation that can take hundreds of rotation periods to die away, and
//! while it decays it looks exactly like meander to a pointwise classifier.
//! The driver therefore issues verdicts by trend, not by a single window:
//!
//! * meander only once the per-period arc lengths in the measurement window
//!   have stopped trending, which distinguishes a reached limit cycle from
//!   a transient passing through;
//! * rigid rotation either when the velocities are already constant to
//!   tolerance, or when a small-amplitude oscillation is shrinking period
//!   over period without letting up, which means the state is inside the
//!   rigid-rotation basin and only the (possibly very slow) tail of the
//!   decay remains. The no-letting-up requirement is what keeps this from
//!   firing on a state relaxing down onto a finite-amplitude cycle: that
//!   decay decelerates as the cycle is approached.

use crate::error::{Result, SimError};
use crate::quotient::{
    classify, detect_period, period_arcs, quotient_size, trim_transient, Classification,
    QuotientSeries, CLASSIFY_TOL, MIN_CLASSIFY_SAMPLES,
};
use crate::solver::SimState;

/// Steps run past the point where rigid rotation was detected, so the
/// persisted state sits comfortably inside the settled regime.
pub const RW_CONFIRM_STEPS: u64 = 50;

/// The shrinking-oscillation verdict only applies while the amplitude is
/// within this factor of the constancy gate; a large decaying oscillation
/// is still anyone's game.
const DECAY_SPREAD_FACTOR: f64 = 10.0;

/// Per-arc growth allowed before a shrinking sequence stops counting as
/// monotone (absorbs arc-length estimation noise).
const DECAY_MONOTONE_SLACK: f64 = 0.005;

/// How much the late arc-to-arc ratios may exceed the early ones before the
/// decay counts as decelerating.
const DECAY_RATIO_SLACK: f64 = 0.003;

/// Arcs beyond this horizon are ignored when judging the decay trend, so an
/// old steep transient cannot vouch for a stalled present.
const DECAY_TREND_ARCS: usize = 40;

/// Knobs for [`run_to_classification`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPolicy {
    /// Constancy tolerance handed to the classifier.
    pub tol: f64,
    /// Step budget for one classification run.
    pub max_steps: u64,
    /// Earliest record length at which classification is attempted.
    pub min_samples: usize,
    /// Steps between classification attempts.
    pub check_every: u64,
    /// Whole measured periods required for a meander verdict and its
    /// quotient size.
    pub min_periods: usize,
    /// Relative spread of per-period arc lengths below which the
    /// measurement window counts as a reached limit cycle.
    pub stationary_tol: f64,
    /// Consecutive shrinking arcs required before a small decaying
    /// oscillation is called rigid rotation.
    pub decay_min_arcs: usize,
    /// Minimum end-to-end arc decline, relative to the first arc, for the
    /// shrinking-oscillation verdict.
    pub decay_frac: f64,
}

impl Default for RunPolicy {
    fn default() -> Self {
        RunPolicy {
            tol: CLASSIFY_TOL,
            max_steps: 200_000,
            min_samples: MIN_CLASSIFY_SAMPLES,
            check_every: 1000,
            min_periods: 5,
            stationary_tol: 0.02,
            decay_min_arcs: 8,
            decay_frac: 0.02,
        }
    }
}

/// What a classification run concluded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub classification: Classification,
    /// Mean arc length per period; exactly 0 for rigid rotation, NaN when
    /// unresolved.
    pub q_s: f64,
    pub period: Option<f64>,
    /// Whole periods behind the `q_s` average.
    pub n_periods: usize,
    /// Steps actually taken by this run.
    pub steps_run: u64,
}

/// Anything the driver can advance and measure. The solver implements it;
/// tests substitute synthetic signal generators.
pub trait Sim {
    fn advance(&mut self, steps: u64) -> Result<()>;
    fn record(&self) -> &QuotientSeries;
    fn reset_record(&mut self);
    fn engaged(&self) -> bool;
}

impl Sim for SimState {
    fn advance(&mut self, steps: u64) -> Result<()> {
        self.run(steps)
    }

    fn record(&self) -> &QuotientSeries {
        &self.record
    }

    fn reset_record(&mut self) {
        self.reset_record();
    }

    fn engaged(&self) -> bool {
        self.advection_engaged
    }
}

/// Clears the record, then advances until the motion classifies.
///
/// Rigid rotation stops [`RW_CONFIRM_STEPS`] after constancy is detected, or
/// immediately once a residual oscillation qualifies as decaying out (see
/// [`RunPolicy::decay_min_arcs`]); either way `q_s = 0`. Meander stops once
/// the record holds five transient periods plus at least `min_periods`
/// measured ones whose arc lengths are stationary, and reports their mean
/// arc length. Hitting `max_steps` first reports `Unresolved`. Solver
/// failures (blow-up, lost tip) propagate as errors.
pub fn run_to_classification<S: Sim>(sim: &mut S, policy: &RunPolicy) -> Result<RunOutcome> {
    if !sim.engaged() {
        return Err(SimError::NotEngaged);
    }
    sim.reset_record();
    let mut taken: u64 = 0;
    loop {
        let batch = policy.check_every.min(policy.max_steps - taken);
        if batch == 0 {
            return Ok(RunOutcome {
                classification: Classification::Unresolved,
                q_s: f64::NAN,
                period: detect_period(sim.record()),
                n_periods: 0,
                steps_run: taken,
            });
        }
        sim.advance(batch)?;
        taken += batch;
        if sim.record().len() < policy.min_samples {
            continue;
        }
        match classify(sim.record(), policy.tol) {
            Classification::Rw => {
                sim.advance(RW_CONFIRM_STEPS)?;
                return Ok(RunOutcome {
                    classification: Classification::Rw,
                    q_s: 0.0,
                    period: None,
                    n_periods: 0,
                    steps_run: taken + RW_CONFIRM_STEPS,
                });
            }
            Classification::Mrw => {
                if let Some(out) = settled_meander(sim.record(), policy, taken)? {
                    return Ok(out);
                }
                if let Some(out) = decaying_to_rest(sim.record(), policy, taken)? {
                    return Ok(out);
                }
            }
            Classification::Unresolved | Classification::Failed => {
                if let Some(out) = decaying_to_rest(sim.record(), policy, taken)? {
                    return Ok(out);
                }
            }
        }
    }
}

/// Meander verdict once the record is deep enough and the measured periods
/// have stopped trending; `None` means keep running.
fn settled_meander(
    qs: &QuotientSeries,
    policy: &RunPolicy,
    taken: u64,
) -> Result<Option<RunOutcome>> {
    let Some(period) = detect_period(qs) else {
        return Ok(None);
    };
    let span = qs.len() as f64 * qs.dt();
    if span < (5 + policy.min_periods) as f64 * period {
        return Ok(None);
    }
    let start = match trim_transient(qs, period) {
        Ok(start) => start,
        Err(SimError::TooShort(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let arcs = match period_arcs(qs, period, start) {
        Ok(arcs) => arcs,
        Err(SimError::TooShort(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if arcs.len() < policy.min_periods {
        return Ok(None);
    }
    // Judge stationarity on the most recent arcs only. The automatic
    // transient trim stops at its first quiet stretch, and on a slowly
    // saturating signal that leaves a shallow drift inside the window that
    // would otherwise never fall below the spread gate.
    let window = policy.min_periods.max(2);
    let tail = &arcs[arcs.len() - window..];
    let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
    let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    if mean <= 0.0 || (hi - lo) / mean > policy.stationary_tol {
        return Ok(None);
    }
    let p = (period / qs.dt()).round() as usize;
    let (q_s, n_periods) = quotient_size(qs, period, start + (arcs.len() - window) * p)?;
    Ok(Some(RunOutcome {
        classification: Classification::Mrw,
        q_s,
        period: Some(period),
        n_periods,
        steps_run: taken,
    }))
}

/// Rigid-rotation verdict for a small oscillation that is demonstrably on
/// its way out; `None` means no such claim can be made yet.
///
/// Fires only when the amplitude is modest (within [`DECAY_SPREAD_FACTOR`]
/// of the constancy gate), the recent per-period arcs shrink monotonically
/// by at least `decay_frac` end to end, and the shrinking is not easing off.
/// The last condition separates decay towards the fixed point (ratio steady
/// or improving) from relaxation onto a nearby limit cycle (ratio drifting
/// up towards one), at the price of staying silent right at a fold, where
/// the decay is genuinely ambiguous.
fn decaying_to_rest(
    qs: &QuotientSeries,
    policy: &RunPolicy,
    taken: u64,
) -> Result<Option<RunOutcome>> {
    let Some(period) = detect_period(qs) else {
        return Ok(None);
    };
    if !qs.is_constant(DECAY_SPREAD_FACTOR * policy.tol) {
        return Ok(None);
    }
    // Skip the first two periods: they carry whatever disturbance started
    // the record.
    let p = (period / qs.dt()).round() as usize;
    if p < 2 {
        return Ok(None);
    }
    let arcs = match period_arcs(qs, period, 2 * p) {
        Ok(arcs) => arcs,
        Err(SimError::TooShort(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let arcs = &arcs[arcs.len().saturating_sub(DECAY_TREND_ARCS)..];
    if arcs.len() < policy.decay_min_arcs.max(3) {
        return Ok(None);
    }
    let first = arcs[0];
    let last = arcs[arcs.len() - 1];
    if !(first > 0.0) || last >= first * (1.0 - policy.decay_frac) {
        return Ok(None);
    }
    let ratios: Vec<f64> = arcs.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|&r| !r.is_finite() || r > 1.0 + DECAY_MONOTONE_SLACK) {
        return Ok(None);
    }
    let half = ratios.len() / 2;
    let early = ratios[..half].iter().sum::<f64>() / half as f64;
    let late = ratios[half..].iter().sum::<f64>() / (ratios.len() - half) as f64;
    if late > early + DECAY_RATIO_SLACK {
        return Ok(None);
    }
    Ok(Some(RunOutcome {
        classification: Classification::Rw,
        q_s: 0.0,
        period: Some(period),
        n_periods: arcs.len(),
        steps_run: taken,
    }))
}
