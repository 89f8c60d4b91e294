//! Frame-velocity series analysis.
//!
//! An engaged run produces one `(cx, cy, omega)` sample per time step. For
//! rigid rotation the samples sit at a fixed point; for meander they trace a
//! closed loop. The size of that loop, measured as discrete arc length per
//! oscillation period
//!
//! ```text
//! q_s = sum_k sqrt(dcx_k^2 + dcy_k^2 + domega_k^2)
//! ```
//!
//! averaged over whole periods, is the scalar that continuation experiments
//! track: it is zero for rigid rotation and jumps to a finite value at the
//! meander transition.

use std::fmt;
use std::path::Path;

use crate::error::{Result, SimError};

/// Relative tolerance used by the constancy test when none is supplied.
pub const CLASSIFY_TOL: f64 = 1e-4;

/// Minimum number of samples before a series can be classified at all.
pub const MIN_CLASSIFY_SAMPLES: usize = 2000;

/// Motion classes distinguished by the analysis, plus the bookkeeping states
/// a continuation record can end up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Rigid rotation: the velocity series is constant.
    Rw,
    /// Meander: the velocity series cycles with finite amplitude.
    Mrw,
    /// Could not be resolved within the available samples or budget.
    Unresolved,
    /// The run aborted with a solver error.
    Failed,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Rw => "RW",
            Classification::Mrw => "MRW",
            Classification::Unresolved => "UNRESOLVED",
            Classification::Failed => "FAILED",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Classification {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "RW" => Ok(Classification::Rw),
            "MRW" => Ok(Classification::Mrw),
            "UNRESOLVED" => Ok(Classification::Unresolved),
            "FAILED" => Ok(Classification::Failed),
            other => Err(format!("unknown classification {other:?}")),
        }
    }
}

/// Uniformly sampled frame-velocity series.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientSeries {
    t0: f64,
    dt: f64,
    cx: Vec<f64>,
    cy: Vec<f64>,
    omega: Vec<f64>,
}

impl QuotientSeries {
    /// Empty series whose first pushed sample will carry `t = dt`.
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0 && dt.is_finite(), "sample spacing must be positive");
        QuotientSeries { t0: dt, dt, cx: Vec::new(), cy: Vec::new(), omega: Vec::new() }
    }

    /// Builds a series from raw columns with an explicit time origin.
    pub fn from_columns(t0: f64, dt: f64, cx: Vec<f64>, cy: Vec<f64>, omega: Vec<f64>) -> Self {
        assert!(dt > 0.0 && dt.is_finite());
        assert!(cx.len() == cy.len() && cy.len() == omega.len());
        QuotientSeries { t0, dt, cx, cy, omega }
    }

    pub fn push(&mut self, cx: f64, cy: f64, omega: f64) {
        self.cx.push(cx);
        self.cy.push(cy);
        self.omega.push(omega);
    }

    pub fn len(&self) -> usize {
        self.cx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cx.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Timestamp of the first sample.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn cx(&self) -> &[f64] {
        &self.cx
    }

    pub fn cy(&self) -> &[f64] {
        &self.cy
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// True when all three components are constant over the last quarter of
    /// the series: spread below `tol * max(1, |mean|)` componentwise.
    pub fn is_constant(&self, tol: f64) -> bool {
        let len = self.len();
        if len < 8 {
            return false;
        }
        let from = len - len / 4;
        for comp in [&self.cx, &self.cy, &self.omega] {
            let w = &comp[from..];
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for &v in w {
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
            }
            let mean = sum / w.len() as f64;
            if hi - lo >= tol * mean.abs().max(1.0) {
                return false;
            }
        }
        true
    }

    /// Writes `t,cx,cy,omega` rows at full precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64 + 16);
        out.push_str("t,cx,cy,omega\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.t(k),
                self.cx[k],
                self.cy[k],
                self.omega[k]
            ));
        }
        out
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text).map_err(|msg| SimError::Parse { path: path.to_path_buf(), msg })
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let mut t = Vec::new();
        let mut cx = Vec::new();
        let mut cy = Vec::new();
        let mut omega = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("t,")) {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |name: &str| -> std::result::Result<f64, String> {
                cols.next()
                    .ok_or_else(|| format!("line {}: missing column {name}", lineno + 1))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: bad {name}: {e}", lineno + 1))
            };
            t.push(next("t")?);
            cx.push(next("cx")?);
            cy.push(next("cy")?);
            omega.push(next("omega")?);
        }
        if t.len() < 2 {
            return Err("need at least two samples".into());
        }
        let dt = t[1] - t[0];
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(format!("non-increasing timestamps: dt = {dt}"));
        }
        for k in 1..t.len() {
            let step = t[k] - t[k - 1];
            if (step - dt).abs() > 1e-6 * dt {
                return Err(format!("non-uniform spacing at sample {k}: {step} vs {dt}"));
            }
        }
        Ok(QuotientSeries { t0: t[0], dt, cx, cy, omega })
    }
}

/// Dominant oscillation period of the series, from the mean spacing of
/// upward mean-crossings of `cx` over the last half, with each crossing time
/// refined by linear interpolation. Falls back to the autocorrelation peak
/// when fewer than three crossings exist, and reports `None` for a series
/// that is constant under the default tolerance.
pub fn detect_period(qs: &QuotientSeries) -> Option<f64> {
    let len = qs.len();
    if len < 8 || qs.is_constant(CLASSIFY_TOL) {
        return None;
    }
    let from = len / 2;
    let w = &qs.cx[from..];
    let mean = w.iter().sum::<f64>() / w.len() as f64;

    let mut crossings: Vec<f64> = Vec::new();
    for k in 0..w.len() - 1 {
        let a = w[k] - mean;
        let b = w[k + 1] - mean;
        if a < 0.0 && b >= 0.0 {
            let frac = -a / (b - a);
            crossings.push(qs.t(from + k) + frac * qs.dt);
        }
    }
    if crossings.len() >= 3 {
        let first = crossings[0];
        let last = crossings[crossings.len() - 1];
        return Some((last - first) / (crossings.len() - 1) as f64);
    }

    autocorrelation_period(w, qs.dt)
}

fn autocorrelation_period(w: &[f64], dt: f64) -> Option<f64> {
    // The scan is O(window * lags), so bound the window: long records reach
    // this fallback only when nearly crossing-free, and a crossing-free
    // window this wide has no period the scan could resolve anyway.
    let w = &w[w.len().saturating_sub(16_384)..];
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let n = w.len();
    if n < 16 {
        return None;
    }
    let y: Vec<f64> = w.iter().map(|v| v - mean).collect();
    let r0: f64 = y.iter().map(|v| v * v).sum();
    if r0 <= 0.0 {
        return None;
    }
    let max_lag = n / 2;
    let r = |lag: usize| -> f64 { (0..n - lag).map(|k| y[k] * y[k + lag]).sum::<f64>() / r0 };
    let mut best: Option<(usize, f64)> = None;
    let mut prev = r(1);
    let mut curr = r(2);
    for lag in 2..max_lag - 1 {
        let next = r(lag + 1);
        if curr >= prev && curr > next && curr > 0.2 {
            best = Some((lag, curr));
            break;
        }
        prev = curr;
        curr = next;
    }
    best.map(|(lag, _)| lag as f64 * dt)
}

/// Start index after the transient: at least five periods in, then advanced
/// whole periods at a time while the arc lengths of consecutive periods
/// still differ by more than 1%, but never past the middle of the series.
pub fn trim_transient(qs: &QuotientSeries, period: f64) -> Result<usize> {
    let p = samples_per_period(qs, period)?;
    let len = qs.len();
    if len < 7 * p {
        return Err(SimError::TooShort(format!(
            "{len} samples is fewer than 7 periods of {p} samples"
        )));
    }
    let mut start = (5.0 * period / qs.dt).ceil() as usize;
    let half = len / 2;
    while start + 2 * p < len && start + p <= half {
        let q1 = arc_length(qs, start, start + p);
        let q2 = arc_length(qs, start + p, start + 2 * p);
        let scale = q1.abs().max(q2.abs());
        if scale > 0.0 && (q1 - q2).abs() > 0.01 * scale {
            start += p;
        } else {
            break;
        }
    }
    Ok(start.min(half))
}

/// Mean arc length per period over every whole period from `start`, plus the
/// number of periods averaged. A series that is constant under the default
/// tolerance reports exactly zero.
pub fn quotient_size(qs: &QuotientSeries, period: f64, start: usize) -> Result<(f64, usize)> {
    let p = samples_per_period(qs, period)?;
    let len = qs.len();
    if start >= len || (len - 1 - start) < p {
        return Err(SimError::TooShort(format!(
            "no whole period of {p} samples after start index {start} in {len} samples"
        )));
    }
    let n_periods = (len - 1 - start) / p;
    if qs.is_constant(CLASSIFY_TOL) {
        return Ok((0.0, n_periods));
    }
    let mut total = 0.0;
    for m in 0..n_periods {
        total += arc_length(qs, start + m * p, start + (m + 1) * p);
    }
    Ok((total / n_periods as f64, n_periods))
}

/// Arc length of each whole period from `start`, in order. The mean of the
/// returned values is what [`quotient_size`] reports for a non-constant
/// series; callers use the spread to judge whether a limit cycle has actually
/// been reached or the signal is still growing or decaying.
pub fn period_arcs(qs: &QuotientSeries, period: f64, start: usize) -> Result<Vec<f64>> {
    let p = samples_per_period(qs, period)?;
    let len = qs.len();
    if start >= len || (len - 1 - start) < p {
        return Err(SimError::TooShort(format!(
            "no whole period of {p} samples after start index {start} in {len} samples"
        )));
    }
    let n_periods = (len - 1 - start) / p;
    Ok((0..n_periods).map(|m| arc_length(qs, start + m * p, start + (m + 1) * p)).collect())
}

fn samples_per_period(qs: &QuotientSeries, period: f64) -> Result<usize> {
    if !(period.is_finite() && period > 0.0) {
        return Err(SimError::TooShort(format!("invalid period {period}")));
    }
    let p = (period / qs.dt).round() as usize;
    if p < 2 {
        return Err(SimError::TooShort(format!(
            "period {period} spans fewer than two samples at dt {}",
            qs.dt
        )));
    }
    Ok(p)
}

fn arc_length(qs: &QuotientSeries, from: usize, to: usize) -> f64 {
    let mut total = 0.0;
    for k in from..to {
        let dcx = qs.cx[k + 1] - qs.cx[k];
        let dcy = qs.cy[k + 1] - qs.cy[k];
        let dom = qs.omega[k + 1] - qs.omega[k];
        total += (dcx * dcx + dcy * dcy + dom * dom).sqrt();
    }
    total
}

/// Classifies the motion behind a velocity series.
///
/// Rigid rotation when the last quarter is constant to `tol`; meander when a
/// period is detected and the arc length per period clearly exceeds the
/// noise floor (`10 tol`); unresolved otherwise, including any series with
/// fewer than [`MIN_CLASSIFY_SAMPLES`] samples.
pub fn classify(qs: &QuotientSeries, tol: f64) -> Classification {
    let len = qs.len();
    if len < MIN_CLASSIFY_SAMPLES {
        return Classification::Unresolved;
    }
    if qs.is_constant(tol) {
        return Classification::Rw;
    }
    let Some(period) = detect_period(qs) else {
        return Classification::Unresolved;
    };
    let Ok(p) = samples_per_period(qs, period) else {
        return Classification::Unresolved;
    };
    let n_avail = (len - 1) / p;
    if n_avail == 0 {
        return Classification::Unresolved;
    }
    let use_periods = n_avail.min(5);
    let start = len - 1 - use_periods * p;
    let mut total = 0.0;
    for m in 0..use_periods {
        total += arc_length(qs, start + m * p, start + (m + 1) * p);
    }
    let per_period = total / use_periods as f64;
    if per_period > 10.0 * tol {
        Classification::Mrw
    } else {
        Classification::Unresolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(radius: f64, period: f64, dt: f64, n: usize, omega0: f64) -> QuotientSeries {
        let mut qs = QuotientSeries::new(dt);
        for k in 1..=n {
            let t = dt * k as f64;
            let ph = 2.0 * PI * t / period;
            qs.push(radius * ph.cos(), radius * ph.sin(), omega0);
        }
        qs
    }

    #[test]
    fn unit_circle_arc_length_per_period() {
        let samples_per = 10_000usize;
        let dt = 1.0 / samples_per as f64;
        let qs = circle(1.0, 1.0, dt, 3 * samples_per, 0.7);
        let (q, n) = quotient_size(&qs, 1.0, 0).unwrap();
        assert_eq!(n, 2);
        assert!((q - 2.0 * PI).abs() < 1e-4, "q = {q}");
        // The chord sum of a regular N-gon is exactly 2 N sin(pi / N).
        let polygon = 2.0 * samples_per as f64 * (PI / samples_per as f64).sin();
        assert!((q - polygon).abs() < 1e-9, "q = {q}, polygon = {polygon}");
    }

    #[test]
    fn arc_length_scales_with_radius() {
        let samples_per = 10_000usize;
        let dt = 1.0 / samples_per as f64;
        let qs = circle(0.5, 1.0, dt, 2 * samples_per, 0.0);
        let (q, _) = quotient_size(&qs, 1.0, 0).unwrap();
        assert!((q - PI).abs() < 1e-4, "q = {q}");
    }

    #[test]
    fn constant_series_has_zero_size() {
        let mut qs = QuotientSeries::new(0.01);
        for _ in 0..4000 {
            qs.push(1.3, -0.2, 0.9);
        }
        let (q, n) = quotient_size(&qs, 1.0, 0).unwrap();
        assert_eq!(q, 0.0);
        assert!(n >= 1);
    }

    #[test]
    fn phase_shift_leaves_size_unchanged() {
        let samples_per = 5000usize;
        let dt = 1.0 / samples_per as f64;
        let make = |phase: f64| {
            let mut qs = QuotientSeries::new(dt);
            for k in 1..=3 * samples_per {
                let ph = 2.0 * PI * (dt * k as f64) + phase;
                qs.push(ph.cos(), ph.sin(), 0.1 * (2.0 * ph).sin());
            }
            qs
        };
        let (qa, _) = quotient_size(&make(0.0), 1.0, 0).unwrap();
        let (qb, _) = quotient_size(&make(1.234), 1.0, 0).unwrap();
        assert!((qa - qb).abs() / qa < 1e-3, "qa = {qa}, qb = {qb}");
    }

    #[test]
    fn doubling_sampling_rate_changes_size_little() {
        let base = 4000usize;
        let make = |per: usize| {
            let dt = 1.0 / per as f64;
            circle(1.0, 1.0, dt, 3 * per, 0.0)
        };
        let (qa, _) = quotient_size(&make(base), 1.0, 0).unwrap();
        let (qb, _) = quotient_size(&make(2 * base), 1.0, 0).unwrap();
        assert!((qa - qb).abs() / qa < 5e-3, "qa = {qa}, qb = {qb}");
    }

    #[test]
    fn period_of_clean_sinusoid() {
        let dt = 0.01;
        let mut qs = QuotientSeries::new(dt);
        for k in 1..=6000 {
            let t = dt * k as f64;
            qs.push((2.0 * PI * t / 3.0).sin(), 0.0, 0.0);
        }
        let p = detect_period(&qs).unwrap();
        assert!((p - 3.0).abs() < 3e-3, "p = {p}");
    }

    #[test]
    fn period_of_quasiperiodic_signal_locks_to_carrier() {
        let dt = 0.01;
        let mut qs = QuotientSeries::new(dt);
        for k in 1..=6000 {
            let t = dt * k as f64;
            let v = (2.0 * PI * t / 3.0).sin() + 0.2 * (2.0 * PI * t * 2f64.sqrt() / 3.0).sin();
            qs.push(v, 0.0, 0.0);
        }
        let p = detect_period(&qs).unwrap();
        assert!((p - 3.0).abs() / 3.0 < 0.05, "p = {p}");
    }

    #[test]
    fn constant_series_has_no_period() {
        let mut qs = QuotientSeries::new(0.01);
        for _ in 0..5000 {
            qs.push(0.4, 0.4, 0.4);
        }
        assert_eq!(detect_period(&qs), None);
    }

    #[test]
    fn transient_trim_on_stationary_signal_is_five_periods() {
        let dt = 0.01;
        let period = 1.0;
        let mut qs = QuotientSeries::new(dt);
        for k in 1..=2000 {
            let t = dt * k as f64;
            qs.push((2.0 * PI * t).sin(), (2.0 * PI * t).cos(), 0.0);
        }
        let start = trim_transient(&qs, period).unwrap();
        assert_eq!(start, (5.0 * period / dt).ceil() as usize);
    }

    #[test]
    fn transient_trim_advances_through_decaying_envelope() {
        let dt = 0.01;
        let period = 1.0;
        let mut qs = QuotientSeries::new(dt);
        for k in 1..=1400 {
            let t = dt * k as f64;
            let env = (-t / (4.0 * period)).exp();
            qs.push(env * (2.0 * PI * t).sin(), env * (2.0 * PI * t).cos(), 0.0);
        }
        let start = trim_transient(&qs, period).unwrap();
        let five = (5.0 * period / dt).ceil() as usize;
        assert!(start > five, "start = {start}, five periods = {five}");
        assert!(start <= qs.len() / 2);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let qs = circle(1.0, 1.0, 0.01, 300, 0.0);
        assert!(matches!(trim_transient(&qs, 1.0), Err(SimError::TooShort(_))));
        assert!(matches!(quotient_size(&qs, 10.0, 290), Err(SimError::TooShort(_))));
    }

    #[test]
    fn classify_constant_with_noise_below_tolerance() {
        let tol = 1e-4;
        let mut qs = QuotientSeries::new(0.01);
        for k in 0..4000u64 {
            // Deterministic sub-tolerance jitter.
            let noise = ((k * 2654435761 % 1000) as f64 / 1000.0 - 0.5) * tol / 10.0;
            qs.push(1.5 + noise, -0.3 + noise, 2.0 + noise);
        }
        assert_eq!(classify(&qs, tol), Classification::Rw);
    }

    #[test]
    fn classify_finite_cycle_as_meander() {
        let qs = circle(0.5, 1.0, 0.01, 4000, 1.9);
        assert_eq!(classify(&qs, 1e-4), Classification::Mrw);
    }

    #[test]
    fn classify_short_or_aperiodic_as_unresolved() {
        let qs = circle(0.5, 1.0, 0.01, 500, 0.0);
        assert_eq!(classify(&qs, 1e-4), Classification::Unresolved);
        let mut ramp = QuotientSeries::new(0.01);
        for k in 0..4000 {
            ramp.push(k as f64 * 1e-3, 0.0, 0.0);
        }
        assert_eq!(classify(&ramp, 1e-4), Classification::Unresolved);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let qs = circle(0.371, 1.7, 0.003, 500, -0.123456789012345);
        let text = qs.to_csv_string();
        let back = QuotientSeries::parse_csv(&text).unwrap();
        assert_eq!(qs.cx(), back.cx());
        assert_eq!(qs.cy(), back.cy());
        assert_eq!(qs.omega(), back.omega());
        assert!((back.t(0) - qs.t(0)).abs() < 1e-15);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(QuotientSeries::parse_csv("t,cx,cy,omega\n1,2\n").is_err());
        assert!(QuotientSeries::parse_csv("").is_err());
        assert!(QuotientSeries::parse_csv("0.0,1,1,1\n0.1,1,1,1\n0.3,1,1,1\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            // Arc length is never negative and is invariant under constant
            // offsets of every component.
            #[test]
            fn size_nonnegative_and_offset_invariant(
                amp in 0.0f64..2.0, off in -5.0f64..5.0, per in 0.5f64..2.0,
            ) {
                let dt = 0.005;
                let n = ((3.0 * per) / dt) as usize;
                let mut a = QuotientSeries::new(dt);
                let mut b = QuotientSeries::new(dt);
                for k in 1..=n {
                    let ph = 2.0 * PI * (dt * k as f64) / per;
                    let (x, y, w) = (amp * ph.cos(), amp * ph.sin(), 0.3 * amp * (2.0 * ph).cos());
                    a.push(x, y, w);
                    b.push(x + off, y + off, w + off);
                }
                let (qa, _) = quotient_size(&a, per, 0).unwrap();
                let (qb, _) = quotient_size(&b, per, 0).unwrap();
                prop_assert!(qa >= 0.0);
                prop_assert!((qa - qb).abs() <= 1e-9 * qa.max(1.0));
            }
        }
    }
}
