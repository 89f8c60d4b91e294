//! Parameter continuation in the excitability parameter.
//!
//! A sweep walks beta across a range, carrying the final state of each run
//! into the next one, so every run after the first starts close to the
//! attractor it is probing. That continuation is the whole point: which
//! attractor the state lands on near the bistable zone depends on the
//! direction of approach, and forward/reverse sweeps disagreeing is the
//! hysteresis measurement.
//!
//! Every record keeps the state hash at its start and end; consecutive
//! records' hashes chain, which makes "this sweep really was a continuation"
//! an assertable fact rather than a hope.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Result, SimError};
use crate::grid::{make_numerics, NumericalParams};
use crate::kinetics::ModelParams;
use crate::quotient::Classification;
use crate::runner::{run_to_classification, RunPolicy};
use crate::snapshot::{read_snapshot, state_hash};
use crate::solver::{PinningSpec, SimState};

/// Where a sweep's first state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedState {
    /// Spiral-forming initial condition, frame engaged immediately.
    Fresh,
    /// Previously persisted state, typically another sweep's final record.
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

/// Full description of one continuation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub beta_start: f64,
    pub beta_end: f64,
    /// Signed step; must point from `beta_start` towards `beta_end`.
    pub dbeta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub diff: [[f64; 2]; 2],
    pub numerics: NumericalParams,
    pub pin: PinningSpec,
    pub policy: RunPolicy,
    pub seed: SeedState,
}

impl SweepSpec {
    /// Standard kinetics and grid, fresh seed, default run policy.
    pub fn with_defaults(
        beta_start: f64,
        beta_end: f64,
        dbeta: f64,
        numerics: NumericalParams,
    ) -> Self {
        SweepSpec {
            beta_start,
            beta_end,
            dbeta,
            gamma: 0.5,
            epsilon: 0.2,
            diff: [[1.0, 0.0], [0.0, 0.0]],
            numerics,
            pin: PinningSpec::centered(numerics.n),
            policy: RunPolicy::default(),
            seed: SeedState::Fresh,
        }
    }

    pub fn direction(&self) -> Direction {
        if self.dbeta >= 0.0 {
            Direction::Forward
        } else {
            Direction::Reverse
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidSweep(msg));
        if !(self.beta_start.is_finite() && self.beta_end.is_finite() && self.dbeta.is_finite()) {
            return bad("non-finite beta bounds or step".into());
        }
        if self.dbeta == 0.0 {
            return bad("dbeta must be non-zero".into());
        }
        let span = self.beta_end - self.beta_start;
        if span != 0.0 && span.signum() != self.dbeta.signum() {
            return bad(format!(
                "dbeta {} points away from beta_end {} (start {})",
                self.dbeta, self.beta_end, self.beta_start
            ));
        }
        self.pin.validate(self.numerics.n)?;
        Ok(())
    }

    /// The beta values the sweep visits: an arithmetic sequence from
    /// `beta_start` stepping `dbeta`, with `beta_end` appended as a partial
    /// final step when the range does not divide evenly.
    pub fn beta_sequence(&self) -> Vec<f64> {
        let (a, b, d) = (self.beta_start, self.beta_end, self.dbeta);
        if a == b {
            return vec![a];
        }
        let whole = ((b - a) / d + 1e-6).floor() as u64;
        let mut betas: Vec<f64> = (0..=whole).map(|k| a + k as f64 * d).collect();
        if (betas.last().unwrap() - b).abs() > 1e-6 * d.abs() {
            betas.push(b);
        }
        betas
    }
}

/// One resolved point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub beta: f64,
    /// 0 for rigid rotation, NaN when unresolved or failed.
    pub q_s: f64,
    pub classification: Classification,
    pub period: Option<f64>,
    pub n_periods: usize,
    pub steps_run: u64,
    /// Snapshot reference the sink reported for this record's final state.
    pub snapshot: Option<PathBuf>,
    /// State hash at the start of the run, before beta was reassigned.
    pub hash_before: String,
    /// State hash the next record continues from. For a failed record this
    /// is the reverted last-good state, since that is what continues.
    pub hash_after: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub direction: Direction,
    pub records: Vec<SweepRecord>,
    pub bifurcation_points: Vec<f64>,
}

impl SweepResult {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("beta,q_s,classification,period,n_periods,snapshot_file\n");
        for r in &self.records {
            writeln!(
                out,
                "{:.16e},{:.16e},{},{:.16e},{},{}",
                r.beta,
                r.q_s,
                r.classification,
                r.period.unwrap_or(f64::NAN),
                r.n_periods,
                r.snapshot.as_deref().map(|p| p.display().to_string()).unwrap_or_default()
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv_string())?;
        Ok(())
    }
}

/// Receives each record's final state for persistence; returns the
/// reference stored in the record.
pub trait SweepSink {
    fn persist(
        &mut self,
        index: usize,
        record: &SweepRecord,
        state: &SimState,
    ) -> Result<Option<PathBuf>>;
}

/// Sink for sweeps whose states nobody needs afterwards.
pub struct DiscardSink;

impl SweepSink for DiscardSink {
    fn persist(&mut self, _: usize, _: &SweepRecord, _: &SimState) -> Result<Option<PathBuf>> {
        Ok(None)
    }
}

fn seed_state(spec: &SweepSpec) -> Result<SimState> {
    let model = ModelParams::new(spec.beta_start, spec.gamma, spec.epsilon, spec.diff)?;
    match &spec.seed {
        SeedState::Fresh => {
            let mut s = SimState::fresh_spiral(model, spec.numerics, spec.pin)?;
            s.engage_frame()?;
            Ok(s)
        }
        SeedState::Snapshot(path) => {
            let s = read_snapshot(path, spec.diff)?;
            if s.numerics != spec.numerics {
                return Err(SimError::InvalidSweep(format!(
                    "seed snapshot grid {:?} does not match sweep grid {:?}",
                    s.numerics, spec.numerics
                )));
            }
            if !s.advection_engaged {
                return Err(SimError::NotEngaged);
            }
            Ok(s)
        }
    }
}

/// Runs the continuation sweep, classifying each beta in turn.
///
/// Runs that blow up or lose the tip are recorded as `FAILED` and the sweep
/// restarts the next beta from the last state that finished, so one bad
/// point cannot sink a long sweep.
pub fn run_sweep(spec: &SweepSpec, sink: &mut dyn SweepSink) -> Result<SweepResult> {
    spec.validate()?;
    let betas = spec.beta_sequence();
    let mut state = seed_state(spec)?;
    let mut last_good: Option<SimState> = None;
    let mut records: Vec<SweepRecord> = Vec::with_capacity(betas.len());

    for (index, &beta) in betas.iter().enumerate() {
        let hash_before = state_hash(&state)?;
        state.model.beta = beta;
        let mut record = match run_to_classification(&mut state, &spec.policy) {
            Ok(out) => {
                last_good = Some(state.clone());
                SweepRecord {
                    beta,
                    q_s: out.q_s,
                    classification: out.classification,
                    period: out.period,
                    n_periods: out.n_periods,
                    steps_run: out.steps_run,
                    snapshot: None,
                    hash_before,
                    hash_after: String::new(),
                }
            }
            Err(e @ (SimError::BlowUp { .. } | SimError::SingularPinning { .. })) => {
                let failed_at = match &e {
                    SimError::BlowUp { step } | SimError::SingularPinning { step, .. } => *step,
                    _ => unreachable!(),
                };
                state = match &last_good {
                    Some(good) => good.clone(),
                    None => seed_state(spec)?,
                };
                let steps_run = failed_at.saturating_sub(state.step_index);
                SweepRecord {
                    beta,
                    q_s: f64::NAN,
                    classification: Classification::Failed,
                    period: None,
                    n_periods: 0,
                    steps_run,
                    snapshot: None,
                    hash_before,
                    hash_after: String::new(),
                }
            }
            Err(e) => return Err(e),
        };
        record.hash_after = state_hash(&state)?;
        record.snapshot = sink.persist(index, &record, &state)?;
        records.push(record);
    }

    let mut result =
        SweepResult { direction: spec.direction(), records, bifurcation_points: Vec::new() };
    result.bifurcation_points = find_bifurcation_points(&result);
    Ok(result)
}

/// Betas where the classification flips between rigid rotation and meander,
/// reported as the first beta of the new regime. Unresolved and failed
/// records do not interrupt a regime.
pub fn find_bifurcation_points(result: &SweepResult) -> Vec<f64> {
    let mut points = Vec::new();
    let mut prev: Option<Classification> = None;
    for r in &result.records {
        let c = r.classification;
        if c != Classification::Rw && c != Classification::Mrw {
            continue;
        }
        if let Some(p) = prev {
            if p != c {
                points.push(r.beta);
            }
        }
        prev = Some(c);
    }
    points
}

/// Open hysteresis intervals between a forward and a reverse sweep.
///
/// `low` spans from the reverse sweep's rigid-rotation resumption up to the
/// forward sweep's meander onset; `high` is the mirror pair at the upper
/// boundary when both sweeps flip back. `None` on a side means the flips
/// coincide or at least one sweep never flips there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisRegion {
    pub low: Option<(f64, f64)>,
    pub high: Option<(f64, f64)>,
}

impl HysteresisRegion {
    pub fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none()
    }
}

pub fn hysteresis_region(fwd: &SweepResult, rev: &SweepResult) -> Result<HysteresisRegion> {
    check_grids_align(fwd, rev)?;
    let flips = |r: &SweepResult, from: Classification, to: Classification| -> Vec<f64> {
        let mut out = Vec::new();
        let mut prev: Option<Classification> = None;
        for rec in &r.records {
            let c = rec.classification;
            if c != Classification::Rw && c != Classification::Mrw {
                continue;
            }
            if prev == Some(from) && c == to {
                out.push(rec.beta);
            }
            prev = Some(c);
        }
        out
    };

    let fwd_onset = flips(fwd, Classification::Rw, Classification::Mrw);
    let fwd_resume = flips(fwd, Classification::Mrw, Classification::Rw);
    let rev_resume = flips(rev, Classification::Mrw, Classification::Rw);
    let rev_onset = flips(rev, Classification::Rw, Classification::Mrw);

    let interval = |a: Option<&f64>, b: Option<&f64>| -> Option<(f64, f64)> {
        match (a, b) {
            (Some(&lo), Some(&hi)) if lo < hi => Some((lo, hi)),
            _ => None,
        }
    };
    Ok(HysteresisRegion {
        low: interval(rev_resume.first(), fwd_onset.first()),
        high: interval(fwd_resume.first(), rev_onset.first()),
    })
}

fn check_grids_align(a: &SweepResult, b: &SweepResult) -> Result<()> {
    let grid = |r: &SweepResult| -> Result<(f64, f64)> {
        if r.records.len() < 2 {
            return Err(SimError::MismatchedRange(
                "need at least two records per sweep to compare grids".into(),
            ));
        }
        let step = r.records[1].beta - r.records[0].beta;
        Ok((r.records[0].beta, step))
    };
    let (a0, da) = grid(a)?;
    let (b0, db) = grid(b)?;
    if (da.abs() - db.abs()).abs() > 1e-9 {
        return Err(SimError::MismatchedRange(format!(
            "step sizes differ: {} vs {}",
            da.abs(),
            db.abs()
        )));
    }
    // Same lattice: the offset between starting points must be a whole
    // number of steps.
    let offset = (b0 - a0) / da.abs();
    if (offset - offset.round()).abs() > 1e-6 {
        return Err(SimError::MismatchedRange(format!(
            "beta grids are shifted by a fractional step ({a0} vs {b0} at step {})",
            da.abs()
        )));
    }
    let lo_a = a.records.iter().map(|r| r.beta).fold(f64::MAX, f64::min);
    let hi_a = a.records.iter().map(|r| r.beta).fold(f64::MIN, f64::max);
    let lo_b = b.records.iter().map(|r| r.beta).fold(f64::MAX, f64::min);
    let hi_b = b.records.iter().map(|r| r.beta).fold(f64::MIN, f64::max);
    if hi_a < lo_b - 1e-12 || hi_b < lo_a - 1e-12 {
        return Err(SimError::MismatchedRange(format!(
            "beta ranges [{lo_a}, {hi_a}] and [{lo_b}, {hi_b}] do not overlap"
        )));
    }
    Ok(())
}

/// Summary block for a sweep in the flat key=value style the experiment
/// outputs use.
pub fn bifurcation_summary(result: &SweepResult, hyst: Option<&HysteresisRegion>) -> String {
    let mut out = String::new();
    writeln!(out, "direction={}", result.direction).unwrap();
    let pts: Vec<String> = result.bifurcation_points.iter().map(|b| format!("{b:.6}")).collect();
    writeln!(out, "points=[{}]", pts.join(", ")).unwrap();
    let side = |s: Option<(f64, f64)>| match s {
        Some((lo, hi)) => format!("({lo:.6}, {hi:.6})"),
        None => "none".into(),
    };
    match hyst {
        Some(h) => {
            writeln!(out, "hysteresis_low={}", side(h.low)).unwrap();
            writeln!(out, "hysteresis_high={}", side(h.high)).unwrap();
        }
        None => {
            writeln!(out, "hysteresis_low=none").unwrap();
            writeln!(out, "hysteresis_high=none").unwrap();
        }
    }
    out
}

/// The four grid-refinement experiment families.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvergenceVariant {
    /// Refine dx at fixed ts; dt shrinks with dx squared.
    VaryDxFixTs { dx: Vec<f64> },
    /// Refine dx holding the time step fixed by adjusting ts.
    VaryDxFixDt { dx: Vec<f64> },
    /// Vary ts (hence dt) on a fixed grid.
    VaryTsFixDx { ts: Vec<f64> },
    /// Vary the box size at fixed dx; the grid grows with the box.
    VaryBox { box_size: Vec<f64> },
}

/// Expands a convergence variant into concrete sweep specs, one per grid.
/// Pins are recentred on each derived grid.
pub fn convergence_specs(base: &SweepSpec, variant: &ConvergenceVariant) -> Result<Vec<SweepSpec>> {
    base.validate()?;
    let derive = |numerics: NumericalParams| -> SweepSpec {
        let mut spec = base.clone();
        spec.numerics = numerics;
        spec.pin = PinningSpec {
            u_star: base.pin.u_star,
            v_star: base.pin.v_star,
            ..PinningSpec::centered(numerics.n)
        };
        spec
    };
    let mut specs = Vec::new();
    match variant {
        ConvergenceVariant::VaryDxFixTs { dx } => {
            for &d in dx {
                let n = grid_intervals(base.numerics.box_size, d)?;
                specs.push(derive(make_numerics(base.numerics.box_size, n, base.numerics.ts)?));
            }
        }
        ConvergenceVariant::VaryDxFixDt { dx } => {
            for &d in dx {
                let n = grid_intervals(base.numerics.box_size, d)?;
                let ts = 4.0 * base.numerics.dt / (d * d);
                specs.push(derive(make_numerics(base.numerics.box_size, n, ts)?));
            }
        }
        ConvergenceVariant::VaryTsFixDx { ts } => {
            for &t in ts {
                specs.push(derive(make_numerics(base.numerics.box_size, base.numerics.n, t)?));
            }
        }
        ConvergenceVariant::VaryBox { box_size } => {
            for &l in box_size {
                let n = grid_intervals(l, base.numerics.dx)?;
                specs.push(derive(make_numerics(l, n, base.numerics.ts)?));
            }
        }
    }
    Ok(specs)
}

fn grid_intervals(box_size: f64, dx: f64) -> Result<usize> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(SimError::InvalidNumerics(format!("dx must be positive, got {dx}")));
    }
    let n = (box_size / dx).round();
    if !(n.is_finite() && n >= 4.0) {
        return Err(SimError::InvalidNumerics(format!(
            "box {box_size} at dx {dx} gives a degenerate grid"
        )));
    }
    Ok(n as usize)
}

/// Runs every sweep of a convergence family, building a sink per run.
pub fn convergence_suite(
    base: &SweepSpec,
    variant: &ConvergenceVariant,
    mut make_sink: impl FnMut(usize) -> Box<dyn SweepSink>,
) -> Result<Vec<SweepResult>> {
    let specs = convergence_specs(base, variant)?;
    specs.iter().enumerate().map(|(k, spec)| run_sweep(spec, make_sink(k).as_mut())).collect()
}
