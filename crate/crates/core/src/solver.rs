//! Comoving-frame time stepping.
//!
//! One step is an operator split: a forward-Euler reaction-diffusion substep
//! produces the half-step fields, the frame velocities `(cx, cy, omega)` are
//! solved from the tip pinning constraints, and an upwind advection substep
//! applies the frame motion. The orientation angle and the laboratory-frame
//! tip position integrate alongside.
//!
//! A state starts in the fixed frame (advection disengaged, zero frame
//! velocities); [`SimState::engage_frame`] centres the tip on the pin point
//! and switches the advection path on.

use crate::error::{Result, SimError};
use crate::grid::{one_sided, reflect, Field, FieldPair, NumericalParams};
use crate::kinetics::{reaction, rest_state, ModelParams};
use crate::quotient::QuotientSeries;

/// Condition-number ceiling for the pinning solve; beyond this the tip is
/// considered lost.
pub const PINNING_COND_LIMIT: f64 = 1e12;

/// Tip pinning constraint: field values held fixed at the pin point, plus an
/// offset point whose `u1` value fixes the residual rotational freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinningSpec {
    /// `u1` value pinned at `(i0, j0)` and at the offset point.
    pub u_star: f64,
    /// `u2` value pinned at `(i0, j0)`.
    pub v_star: f64,
    pub i0: usize,
    pub j0: usize,
    /// Offset from `(i0, j0)` to the orientation point.
    pub i_inc: i32,
    pub j_inc: i32,
}

impl PinningSpec {
    /// Pin at the box centre, orientation point one node in +x, both pinned
    /// values zero.
    pub fn centered(n: usize) -> Self {
        PinningSpec { u_star: 0.0, v_star: 0.0, i0: n / 2, j0: n / 2, i_inc: 1, j_inc: 0 }
    }

    pub fn offset_point(&self) -> (usize, usize) {
        (
            (self.i0 as i64 + self.i_inc as i64) as usize,
            (self.j0 as i64 + self.j_inc as i64) as usize,
        )
    }

    /// Both pin points must sit at least two nodes from every wall so the
    /// second-order gradient stencils fit, and the offset must be nonzero.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.i_inc == 0 && self.j_inc == 0 {
            return Err(SimError::InvalidNumerics("pinning offset must be nonzero".into()));
        }
        if !self.u_star.is_finite() || !self.v_star.is_finite() {
            return Err(SimError::InvalidNumerics("pinned values must be finite".into()));
        }
        let interior = |i: i64, j: i64| i >= 2 && j >= 2 && i + 2 <= n as i64 && j + 2 <= n as i64;
        if !interior(self.i0 as i64, self.j0 as i64) {
            return Err(SimError::InvalidNumerics(format!(
                "pin point ({}, {}) is closer than two nodes to a wall of an n = {n} grid",
                self.i0, self.j0
            )));
        }
        let (i1, j1) = (self.i0 as i64 + self.i_inc as i64, self.j0 as i64 + self.j_inc as i64);
        if !interior(i1, j1) {
            return Err(SimError::InvalidNumerics(format!(
                "orientation point ({i1}, {j1}) is closer than two nodes to a wall of an n = {n} grid"
            )));
        }
        Ok(())
    }
}

/// Frame velocities and the accumulated frame pose.
///
/// `(rx, ry)` is the tip position in the laboratory frame, rebuilt from the
/// velocities by rotating `(cx, cy)` through the accumulated angle `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameState {
    pub cx: f64,
    pub cy: f64,
    pub omega: f64,
    pub theta: f64,
    pub rx: f64,
    pub ry: f64,
}

impl FrameState {
    /// Generator of in-plane rotations; `exp(theta * TAU)` is the rotation
    /// matrix applied when mapping frame velocities to the laboratory frame.
    pub const TAU: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

    /// `exp(theta * TAU)` evaluated explicitly.
    pub fn rotation(theta: f64) -> [[f64; 2]; 2] {
        let (s, c) = theta.sin_cos();
        [[c, -s], [s, c]]
    }
}

#[derive(Debug, Clone)]
struct Scratch {
    half: FieldPair,
}

/// Complete solver state: fields, frame, pinning setup, and the running
/// record of frame velocities.
#[derive(Debug, Clone)]
pub struct SimState {
    pub model: ModelParams,
    pub numerics: NumericalParams,
    pub pin: PinningSpec,
    pub fields: FieldPair,
    pub frame: FrameState,
    pub step_index: u64,
    /// Whether the advection substep and velocity solve run at all.
    pub advection_engaged: bool,
    /// Whether omega participates in the velocity solve. Off until the
    /// orientation condition at the offset point is first met.
    pub omega_engaged: bool,
    /// One `(cx, cy, omega)` sample per step taken.
    pub record: QuotientSeries,
    scratch: Scratch,
}

impl SimState {
    pub fn new(
        model: ModelParams,
        numerics: NumericalParams,
        pin: PinningSpec,
        fields: FieldPair,
    ) -> Result<Self> {
        if fields.n() != numerics.n {
            return Err(SimError::InvalidNumerics(format!(
                "fields are on an n = {} grid but numerics say n = {}",
                fields.n(),
                numerics.n
            )));
        }
        pin.validate(numerics.n)?;
        let mut half = FieldPair::zeros(numerics.n);
        half.origin = fields.origin;
        Ok(SimState {
            model,
            numerics,
            pin,
            fields,
            frame: FrameState::default(),
            step_index: 0,
            advection_engaged: false,
            omega_engaged: false,
            record: QuotientSeries::new(numerics.dt),
            scratch: Scratch { half },
        })
    }

    /// Fresh state holding the spiral-forming initial condition.
    pub fn fresh_spiral(
        model: ModelParams,
        numerics: NumericalParams,
        pin: PinningSpec,
    ) -> Result<Self> {
        let fields = init_spiral(&model, &numerics)?;
        Self::new(model, numerics, pin, fields)
    }

    /// Rebuilds a state from persisted parts. The orientation latch is not
    /// stored separately: an engaged state is assumed to be past it.
    pub fn from_parts(
        model: ModelParams,
        numerics: NumericalParams,
        pin: PinningSpec,
        fields: FieldPair,
        frame: FrameState,
        step_index: u64,
        advection_engaged: bool,
    ) -> Result<Self> {
        let mut s = Self::new(model, numerics, pin, fields)?;
        s.frame = frame;
        s.step_index = step_index;
        s.advection_engaged = advection_engaged;
        s.omega_engaged = advection_engaged;
        Ok(s)
    }

    /// Drops the accumulated velocity record, keeping everything else.
    pub fn reset_record(&mut self) {
        self.record = QuotientSeries::new(self.numerics.dt);
    }

    /// Current deviation of the pin-point values from their targets.
    pub fn pin_residual(&self) -> (f64, f64) {
        (
            (self.fields.u1.at(self.pin.i0, self.pin.j0) - self.pin.u_star).abs(),
            (self.fields.u2.at(self.pin.i0, self.pin.j0) - self.pin.v_star).abs(),
        )
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let m = self.model;
        self.step_impl(|u1, u2| reaction(u1, u2, &m))
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn step_impl<F: Fn(f64, f64) -> (f64, f64)>(&mut self, react: F) -> Result<()> {
        let step = self.step_index;
        let nm = self.numerics;
        if !rd_into(&self.fields, &self.model.diff, &nm, &react, &mut self.scratch.half) {
            return Err(SimError::BlowUp { step });
        }
        let (cx, cy, omega);
        if self.advection_engaged {
            let ((vx, vy, vw), oriented) = solve_frame_velocities(
                &self.scratch.half,
                &self.pin,
                &self.frame,
                &nm,
                self.omega_engaged,
                step,
            )?;
            let (ccx, ccy, com) = clamp_frame(vx, vy, vw, &nm);
            if !advect_into(&self.scratch.half, ccx, ccy, com, &nm, &mut self.fields) {
                return Err(SimError::BlowUp { step });
            }
            self.omega_engaged |= oriented;
            self.frame.cx = ccx;
            self.frame.cy = ccy;
            self.frame.omega = com;
            self.frame.theta += nm.dt * com;
            let (sin_t, cos_t) = self.frame.theta.sin_cos();
            self.frame.rx += nm.dt * (ccx * cos_t - ccy * sin_t);
            self.frame.ry += nm.dt * (ccx * sin_t + ccy * cos_t);
            (cx, cy, omega) = (ccx, ccy, com);
        } else {
            std::mem::swap(&mut self.fields.u1, &mut self.scratch.half.u1);
            std::mem::swap(&mut self.fields.u2, &mut self.scratch.half.u2);
            (cx, cy, omega) = (0.0, 0.0, 0.0);
        }
        self.step_index += 1;
        self.record.push(cx, cy, omega);
        Ok(())
    }

    /// Centres the tip on the pin point and switches the comoving frame on.
    ///
    /// The tip is located by isoline intersection, the fields are shifted by
    /// the integer node offset that puts it nearest `(i0, j0)` (edge values
    /// replicated into the vacated strip), and omega is held out of the
    /// velocity solve until the orientation condition is first met. Calling
    /// this on an engaged state is a no-op.
    pub fn engage_frame(&mut self) -> Result<()> {
        if self.advection_engaged {
            return Ok(());
        }
        let (ti, tj) =
            locate_tip(&self.fields, self.pin.u_star, self.pin.v_star).ok_or(SimError::NoTip)?;
        let di = ti.round() as isize - self.pin.i0 as isize;
        let dj = tj.round() as isize - self.pin.j0 as isize;
        if di != 0 || dj != 0 {
            let n = self.numerics.n;
            let clamp = |v: isize| v.clamp(0, n as isize) as usize;
            let u1 = &self.fields.u1;
            let u2 = &self.fields.u2;
            let s1 =
                Field::from_fn(n, |i, j| u1.at(clamp(i as isize + di), clamp(j as isize + dj)));
            let s2 =
                Field::from_fn(n, |i, j| u2.at(clamp(i as isize + di), clamp(j as isize + dj)));
            self.fields.u1 = s1;
            self.fields.u2 = s2;
        }
        self.advection_engaged = true;
        self.omega_engaged = false;
        self.frame.cx = 0.0;
        self.frame.cy = 0.0;
        self.frame.omega = 0.0;
        Ok(())
    }
}

/// Forward-Euler reaction-diffusion substep producing the half-step fields.
pub fn rd_substep(s: &SimState) -> Result<FieldPair> {
    let m = s.model;
    let mut out = FieldPair::zeros(s.numerics.n);
    out.origin = s.fields.origin;
    if !rd_into(&s.fields, &m.diff, &s.numerics, &|u1, u2| reaction(u1, u2, &m), &mut out) {
        return Err(SimError::BlowUp { step: s.step_index });
    }
    Ok(out)
}

fn rd_into<F: Fn(f64, f64) -> (f64, f64)>(
    fields: &FieldPair,
    diff: &[[f64; 2]; 2],
    nm: &NumericalParams,
    react: &F,
    out: &mut FieldPair,
) -> bool {
    let n = nm.n;
    debug_assert!(fields.n() == n && out.n() == n);
    let stride = n + 1;
    let inv_dx2 = 1.0 / (nm.dx * nm.dx);
    let dt = nm.dt;
    let [[d11, d12], [d21, d22]] = *diff;
    let u1 = &fields.u1.data;
    let u2 = &fields.u2.data;
    let (o1, o2) = (&mut out.u1.data, &mut out.u2.data);
    let mut probe = 0.0;
    if d12 == 0.0 && d21 == 0.0 && d22 == 0.0 {
        // Second diffusion row empty: skip the u2 Laplacian entirely. The
        // update formulas below are bit-identical to the general path since
        // the dropped terms multiply exact zeros.
        for i in 0..=n {
            let im = reflect(i as isize - 1, n) * stride;
            let ip = reflect(i as isize + 1, n) * stride;
            let row = i * stride;
            for j in 0..=n {
                let jm = row + if j == 0 { 1 } else { j - 1 };
                let jp = row + if j == n { n - 1 } else { j + 1 };
                let k = row + j;
                let c1 = u1[k];
                let c2 = u2[k];
                let l1 = ((u1[ip + j] + u1[im + j]) + (u1[jp] + u1[jm]) - 4.0 * c1) * inv_dx2;
                let (f1, f2) = react(c1, c2);
                let v1 = c1 + dt * (d11 * l1 + f1);
                let v2 = c2 + dt * f2;
                probe += v1;
                probe += v2;
                o1[k] = v1;
                o2[k] = v2;
            }
        }
    } else {
        for i in 0..=n {
            let im = reflect(i as isize - 1, n) * stride;
            let ip = reflect(i as isize + 1, n) * stride;
            let row = i * stride;
            for j in 0..=n {
                let jm = row + if j == 0 { 1 } else { j - 1 };
                let jp = row + if j == n { n - 1 } else { j + 1 };
                let k = row + j;
                let c1 = u1[k];
                let c2 = u2[k];
                let l1 = ((u1[ip + j] + u1[im + j]) + (u1[jp] + u1[jm]) - 4.0 * c1) * inv_dx2;
                let l2 = ((u2[ip + j] + u2[im + j]) + (u2[jp] + u2[jm]) - 4.0 * c2) * inv_dx2;
                let (f1, f2) = react(c1, c2);
                let v1 = c1 + dt * (d11 * l1 + d12 * l2 + f1);
                let v2 = c2 + dt * (d21 * l1 + d22 * l2 + f2);
                probe += v1;
                probe += v2;
                o1[k] = v1;
                o2[k] = v2;
            }
        }
    }
    probe.is_finite()
}

/// Solves the frame velocities from the pinning constraints on the
/// half-step fields.
///
/// Each constraint says the advected value at a pin point hits its target:
/// `half + dt [(cx - omega y) gx + (cy + omega x) gy] = target`, with upwind
/// gradient sides chosen from the previous step's velocities and `(x, y)`
/// the point's physical coordinates. With `solve_rotation` the full 3x3
/// system over `(cx, cy, omega)` is solved; without it the 2x2 system from
/// the pin-point constraints alone, with omega held at zero.
///
/// Returns the velocities and whether the orientation condition (advected
/// `u2` below `v_star` at the offset point) holds; `step` only labels
/// errors.
pub fn solve_frame_velocities(
    half: &FieldPair,
    pin: &PinningSpec,
    prev: &FrameState,
    nm: &NumericalParams,
    solve_rotation: bool,
    step: u64,
) -> Result<((f64, f64, f64), bool)> {
    let n = nm.n;
    pin.validate(n)?;
    if half.n() != n {
        return Err(SimError::InvalidNumerics("half-step fields on the wrong grid".into()));
    }
    let dt = nm.dt;
    let inv_2dx = 1.0 / (2.0 * nm.dx);
    let stride = n + 1;
    let (oi, oj) = half.origin;
    let coord = |k: usize, o: usize| (k as f64 - o as f64) * nm.dx;
    let (i0, j0) = (pin.i0, pin.j0);
    let (i1, j1) = pin.offset_point();
    let (x0, y0) = (coord(i0, oi), coord(j0, oj));
    let (x1, y1) = (coord(i1, oi), coord(j1, oj));

    let ax0 = prev.cx - prev.omega * y0;
    let ay0 = prev.cy + prev.omega * x0;
    let ax1 = prev.cx - prev.omega * y1;
    let ay1 = prev.cy + prev.omega * x1;

    let grad = |f: &Field, i: usize, j: usize, along_x: bool, a: f64| {
        let k = i * stride + j;
        if along_x {
            one_sided(&f.data, k, stride, i, n, a, inv_2dx)
        } else {
            one_sided(&f.data, k, 1, j, n, a, inv_2dx)
        }
    };
    let g1x0 = grad(&half.u1, i0, j0, true, ax0);
    let g1y0 = grad(&half.u1, i0, j0, false, ay0);
    let g2x0 = grad(&half.u2, i0, j0, true, ax0);
    let g2y0 = grad(&half.u2, i0, j0, false, ay0);
    let g1x1 = grad(&half.u1, i1, j1, true, ax1);
    let g1y1 = grad(&half.u1, i1, j1, false, ay1);
    let g2x1 = grad(&half.u2, i1, j1, true, ax1);
    let g2y1 = grad(&half.u2, i1, j1, false, ay1);

    let h10 = half.u1.at(i0, j0);
    let h20 = half.u2.at(i0, j0);
    let h11 = half.u1.at(i1, j1);
    let h21 = half.u2.at(i1, j1);

    for v in [g1x0, g1y0, g2x0, g2y0, g1x1, g1y1, g2x1, g2y1, h10, h20, h11, h21] {
        if !v.is_finite() {
            return Err(SimError::BlowUp { step });
        }
    }

    let solved = if solve_rotation {
        let a = [
            [dt * g1x0, dt * g1y0, dt * (x0 * g1y0 - y0 * g1x0)],
            [dt * g2x0, dt * g2y0, dt * (x0 * g2y0 - y0 * g2x0)],
            [dt * g1x1, dt * g1y1, dt * (x1 * g1y1 - y1 * g1x1)],
        ];
        let b = [pin.u_star - h10, pin.v_star - h20, pin.u_star - h11];
        solve3(&a, &b).map(|(x, cond)| ((x[0], x[1], x[2]), cond))
    } else {
        let a = [[dt * g1x0, dt * g1y0], [dt * g2x0, dt * g2y0]];
        let b = [pin.u_star - h10, pin.v_star - h20];
        solve2(&a, &b).map(|(x, cond)| ((x[0], x[1], 0.0), cond))
    };
    let ((cx, cy, omega), cond) = match solved {
        Some(v) => v,
        None => return Err(SimError::SingularPinning { step, cond: f64::INFINITY }),
    };
    if !(cond <= PINNING_COND_LIMIT) {
        return Err(SimError::SingularPinning { step, cond });
    }

    let advected_u2 = h21 + dt * ((cx - omega * y1) * g2x1 + (cy + omega * x1) * g2y1);
    Ok(((cx, cy, omega), advected_u2 < pin.v_star))
}

fn solve2(a: &[[f64; 2]; 2], b: &[f64; 2]) -> Option<([f64; 2], f64)> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let x =
        [(a[1][1] * b[0] - a[0][1] * b[1]) * inv_det, (a[0][0] * b[1] - a[1][0] * b[0]) * inv_det];
    let norm_a = (a[0][0].abs() + a[1][0].abs()).max(a[0][1].abs() + a[1][1].abs());
    let norm_inv =
        ((a[1][1].abs() + a[1][0].abs()).max(a[0][1].abs() + a[0][0].abs())) * inv_det.abs();
    Some((x, norm_a * norm_inv))
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<([f64; 3], f64)> {
    let c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
    let c01 = a[1][2] * a[2][0] - a[1][0] * a[2][2];
    let c02 = a[1][0] * a[2][1] - a[1][1] * a[2][0];
    let det = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    // Adjugate solve; fine at this size given the condition guard above.
    let adj = [
        [c00, a[0][2] * a[2][1] - a[0][1] * a[2][2], a[0][1] * a[1][2] - a[0][2] * a[1][1]],
        [c01, a[0][0] * a[2][2] - a[0][2] * a[2][0], a[0][2] * a[1][0] - a[0][0] * a[1][2]],
        [c02, a[0][1] * a[2][0] - a[0][0] * a[2][1], a[0][0] * a[1][1] - a[0][1] * a[1][0]],
    ];
    let inv_det = 1.0 / det;
    let x = [
        (adj[0][0] * b[0] + adj[0][1] * b[1] + adj[0][2] * b[2]) * inv_det,
        (adj[1][0] * b[0] + adj[1][1] * b[1] + adj[1][2] * b[2]) * inv_det,
        (adj[2][0] * b[0] + adj[2][1] * b[1] + adj[2][2] * b[2]) * inv_det,
    ];
    let col_sum = |m: &[[f64; 3]; 3], c: usize| m[0][c].abs() + m[1][c].abs() + m[2][c].abs();
    let norm_a = col_sum(a, 0).max(col_sum(a, 1)).max(col_sum(a, 2));
    let norm_inv = col_sum(&adj, 0).max(col_sum(&adj, 1)).max(col_sum(&adj, 2)) * inv_det.abs();
    Some((x, norm_a * norm_inv))
}

/// Applies the stability limits to a solved velocity triple: translational
/// components saturate at `dx^2 / (2 dt)`; omega is zeroed, not saturated,
/// when `|omega|` exceeds `1 / (n dt)`.
pub fn clamp_frame(cx: f64, cy: f64, omega: f64, nm: &NumericalParams) -> (f64, f64, f64) {
    let c_lim = nm.dx * nm.dx / (2.0 * nm.dt);
    let w_lim = 1.0 / (nm.n as f64 * nm.dt);
    (
        cx.clamp(-c_lim, c_lim),
        cy.clamp(-c_lim, c_lim),
        if omega.abs() > w_lim { 0.0 } else { omega },
    )
}

/// Upwind advection substep: `u += dt [(cx - omega y) du/dx + (cy + omega x)
/// du/dy]` per component, coordinates measured from the field origin.
pub fn advection_substep(
    half: &FieldPair,
    cx: f64,
    cy: f64,
    omega: f64,
    nm: &NumericalParams,
) -> Result<FieldPair> {
    let mut out = FieldPair::zeros(nm.n);
    out.origin = half.origin;
    if !advect_into(half, cx, cy, omega, nm, &mut out) {
        return Err(SimError::BlowUp { step: 0 });
    }
    Ok(out)
}

fn advect_into(
    half: &FieldPair,
    cx: f64,
    cy: f64,
    omega: f64,
    nm: &NumericalParams,
    out: &mut FieldPair,
) -> bool {
    let n = nm.n;
    debug_assert!(half.n() == n && out.n() == n);
    let stride = n + 1;
    let dt = nm.dt;
    let inv_2dx = 1.0 / (2.0 * nm.dx);
    let (oi, oj) = half.origin;
    let u1 = &half.u1.data;
    let u2 = &half.u2.data;
    let (o1, o2) = (&mut out.u1.data, &mut out.u2.data);
    let mut probe = 0.0;
    for i in 0..=n {
        let x = (i as f64 - oi as f64) * nm.dx;
        let ay = cy + omega * x;
        let row = i * stride;
        for j in 0..=n {
            let k = row + j;
            let y = (j as f64 - oj as f64) * nm.dx;
            let ax = cx - omega * y;
            let g1x = one_sided(u1, k, stride, i, n, ax, inv_2dx);
            let g1y = one_sided(u1, k, 1, j, n, ay, inv_2dx);
            let v1 = u1[k] + dt * (ax * g1x + ay * g1y);
            let g2x = one_sided(u2, k, stride, i, n, ax, inv_2dx);
            let g2y = one_sided(u2, k, 1, j, n, ay, inv_2dx);
            let v2 = u2[k] + dt * (ax * g2x + ay * g2y);
            probe += v1;
            probe += v2;
            o1[k] = v1;
            o2[k] = v2;
        }
    }
    probe.is_finite()
}

/// Spiral-forming initial condition: the excited plateau on the lower
/// half-plane against the rest state, with the inhibitor graded across x so
/// the broken front end curls up.
pub fn init_spiral(m: &ModelParams, nm: &NumericalParams) -> Result<FieldPair> {
    let (u_r, v_r) = rest_state(m)?;
    let n = nm.n;
    let mut fields = FieldPair::zeros(n);
    let (_, oj) = fields.origin;
    for i in 0..=n {
        let frac = i as f64 / n as f64;
        for j in 0..=n {
            let y = (j as f64 - oj as f64) * nm.dx;
            fields.u1.set(i, j, if y < 0.0 { 2.0 } else { u_r });
            fields.u2.set(i, j, v_r + frac);
        }
    }
    Ok(fields)
}

/// Locates the spiral tip: the intersection of the `u1 = u_star` and
/// `u2 = v_star` isolines, each interpolated bilinearly within its grid
/// cell. Returns continuous grid-index coordinates of the intersection
/// nearest the field origin, or `None` when the isolines do not cross.
pub fn locate_tip(fields: &FieldPair, u_star: f64, v_star: f64) -> Option<(f64, f64)> {
    let n = fields.n();
    let (oi, oj) = fields.origin;
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..n {
        for j in 0..n {
            let a = [
                fields.u1.at(i, j) - u_star,
                fields.u1.at(i + 1, j) - u_star,
                fields.u1.at(i, j + 1) - u_star,
                fields.u1.at(i + 1, j + 1) - u_star,
            ];
            let b = [
                fields.u2.at(i, j) - v_star,
                fields.u2.at(i + 1, j) - v_star,
                fields.u2.at(i, j + 1) - v_star,
                fields.u2.at(i + 1, j + 1) - v_star,
            ];
            if same_strict_sign(&a) || same_strict_sign(&b) {
                continue;
            }
            for (s, t) in bilinear_intersections(&a, &b) {
                let gi = i as f64 + s;
                let gj = j as f64 + t;
                let d2 = (gi - oi as f64).powi(2) + (gj - oj as f64).powi(2);
                if best.map_or(true, |(bd, _, _)| d2 < bd) {
                    best = Some((d2, gi, gj));
                }
            }
        }
    }
    best.map(|(_, gi, gj)| (gi, gj))
}

fn same_strict_sign(v: &[f64; 4]) -> bool {
    v.iter().all(|&x| x > 0.0) || v.iter().all(|&x| x < 0.0)
}

/// Intersections of two bilinear zero-level curves within the unit cell.
///
/// Corner order is `[f(0,0), f(1,0), f(0,1), f(1,1)]` in `(s, t)`
/// coordinates. Eliminating `t` reduces the pair to a quadratic in `s`.
fn bilinear_intersections(a: &[f64; 4], b: &[f64; 4]) -> Vec<(f64, f64)> {
    const SLACK: f64 = 1e-9;
    let (a0, a_s, a_t, a_st) = (a[0], a[1] - a[0], a[2] - a[0], a[3] - a[1] - a[2] + a[0]);
    let (b0, b_s, b_t, b_st) = (b[0], b[1] - b[0], b[2] - b[0], b[3] - b[1] - b[2] + b[0]);

    let q2 = b_s * a_st - b_st * a_s;
    let q1 = b0 * a_st + b_s * a_t - b_st * a0 - b_t * a_s;
    let q0 = b0 * a_t - b_t * a0;

    let mut roots: Vec<f64> = Vec::new();
    let scale = q2.abs().max(q1.abs()).max(q0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if q2.abs() <= 1e-14 * scale {
        if q1.abs() > 1e-14 * scale {
            roots.push(-q0 / q1);
        }
    } else {
        let disc = q1 * q1 - 4.0 * q2 * q0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let qq = -0.5 * (q1 + q1.signum() * sq);
            if qq != 0.0 {
                roots.push(qq / q2);
                roots.push(q0 / qq);
            } else {
                roots.push(0.0);
            }
        }
    }

    let in_unit = |v: f64| (-SLACK..=1.0 + SLACK).contains(&v);
    let eval =
        |f0: f64, fs: f64, ft: f64, fst: f64, s: f64, t: f64| f0 + fs * s + ft * t + fst * s * t;
    let norm_a = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let norm_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);

    let mut hits = Vec::new();
    for s in roots {
        if !in_unit(s) {
            continue;
        }
        let da = a_t + a_st * s;
        let db = b_t + b_st * s;
        let t = if da.abs() >= db.abs() {
            if da == 0.0 {
                continue;
            }
            -(a0 + a_s * s) / da
        } else {
            -(b0 + b_s * s) / db
        };
        if !in_unit(t) {
            continue;
        }
        let ra = eval(a0, a_s, a_t, a_st, s, t).abs();
        let rb = eval(b0, b_s, b_t, b_st, s, t).abs();
        if ra <= 1e-7 * norm_a && rb <= 1e-7 * norm_b {
            hits.push((s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)));
        }
    }
    hits
}
