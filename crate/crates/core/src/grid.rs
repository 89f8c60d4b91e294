//! Square grid geometry and the two spatial stencils.
//!
//! The domain is a square of side `box_size` discretised by `n + 1` points
//! per axis, `dx = box_size / n` apart. Index `(i, j)` maps to physical
//! position relative to the origin index: `x = (i - i0) dx`, `y = (j - j0) dx`.
//! Boundaries are no-flux, imposed by reflecting the grid across the boundary
//! node (`f[-1] = f[1]`), which keeps the five-point Laplacian second-order
//! accurate at the edge and makes the trapezoid-weighted field sum a
//! conserved quantity of pure diffusion.
//!
//! The time step is tied to the grid through `dt = ts * dx^2 / 4`, so one
//! dimensionless stability number `ts` controls the diffusive CFL ratio at
//! any resolution.

use crate::error::{Result, SimError};

/// Grid resolution and the derived step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalParams {
    /// Physical side length of the square domain.
    pub box_size: f64,
    /// Number of grid intervals per axis; there are `n + 1` points.
    pub n: usize,
    /// Grid spacing, `box_size / n`.
    pub dx: f64,
    /// Dimensionless time-step parameter.
    pub ts: f64,
    /// Time step, `ts * dx^2 / 4`.
    pub dt: f64,
}

/// Builds [`NumericalParams`], deriving `dx` and `dt`.
pub fn make_numerics(box_size: f64, n: usize, ts: f64) -> Result<NumericalParams> {
    if !(box_size.is_finite() && box_size > 0.0) {
        return Err(SimError::InvalidNumerics(format!(
            "box_size must be positive, got {box_size}"
        )));
    }
    if n < 4 {
        return Err(SimError::InvalidNumerics(format!("need at least 4 grid intervals, got {n}")));
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(SimError::InvalidNumerics(format!("ts must be positive, got {ts}")));
    }
    let dx = box_size / n as f64;
    let dt = ts * (dx * dx) / 4.0;
    Ok(NumericalParams { box_size, n, dx, ts, dt })
}

/// A scalar field on the `(n + 1) x (n + 1)` grid, row-major in the x index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n: usize,
    pub(crate) data: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field { n, data: vec![0.0; (n + 1) * (n + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Fills the field from a function of the grid indices.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Field::zeros(n);
        for i in 0..=n {
            for j in 0..=n {
                let v = f(i, j);
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// The pair of model fields plus the grid index of the spatial origin.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u1: Field,
    pub u2: Field,
    /// Index `(i0, j0)` that maps to physical `(0, 0)`, normally the box
    /// centre.
    pub origin: (usize, usize),
}

impl FieldPair {
    pub fn zeros(n: usize) -> Self {
        FieldPair { u1: Field::zeros(n), u2: Field::zeros(n), origin: (n / 2, n / 2) }
    }

    pub fn n(&self) -> usize {
        self.u1.n
    }
}

#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    // Mirror across the boundary node: -1 -> 1, n+1 -> n-1.
    if i < 0 {
        (-i) as usize
    } else if i as usize > n {
        2 * n - i as usize
    } else {
        i as usize
    }
}

/// Five-point Laplacian with reflecting boundaries, written into `out`.
///
/// At every point: `((right + left) + (up + down) - 4 c) / dx^2`, with
/// out-of-range neighbours reflected across the boundary node. The grouping
/// of the neighbour sum is fixed so that the operator commutes exactly with
/// quarter-turn rotations of the grid.
pub fn laplacian5_into(f: &Field, dx: f64, out: &mut Field) {
    let n = f.n;
    assert_eq!(out.n, n, "output grid size mismatch");
    let inv_dx2 = 1.0 / (dx * dx);
    let stride = n + 1;
    let d = &f.data;
    for i in 0..=n {
        let im = reflect(i as isize - 1, n) * stride;
        let ip = reflect(i as isize + 1, n) * stride;
        let row = i * stride;
        for j in 0..=n {
            let jm = reflect(j as isize - 1, n);
            let jp = reflect(j as isize + 1, n);
            let c = d[row + j];
            let lap = ((d[ip + j] + d[im + j]) + (d[row + jp] + d[row + jm]) - 4.0 * c) * inv_dx2;
            out.data[row + j] = lap;
        }
    }
}

/// Allocating wrapper around [`laplacian5_into`].
pub fn laplacian5(f: &Field, dx: f64) -> Field {
    let mut out = Field::zeros(f.n);
    laplacian5_into(f, dx, &mut out);
    out
}

/// One-sided gradient in one axis direction for a single point.
///
/// `a` is the advection coefficient multiplying this derivative in
/// `df/dt = a df/dq + ...`; that term transports the profile towards
/// negative `q` when `a > 0`, so the stencil reaches towards positive `q`
/// (the side the data comes from). Second order where the stencil fits,
/// first order one point from the wall, and forced to the only available
/// side on the wall itself.
///
/// Written in neighbour-difference form so a constant field yields exactly
/// zero on every branch.
#[inline]
pub(crate) fn one_sided(
    d: &[f64],
    base: usize,
    stride: usize,
    pos: usize,
    n: usize,
    a: f64,
    inv_2dx: f64,
) -> f64 {
    let c = d[base];
    if a >= 0.0 {
        if pos + 2 <= n {
            (4.0 * (d[base + stride] - c) - (d[base + 2 * stride] - c)) * inv_2dx
        } else if pos + 1 <= n {
            (d[base + stride] - c) * (2.0 * inv_2dx)
        } else {
            (c - d[base - stride]) * (2.0 * inv_2dx)
        }
    } else if pos >= 2 {
        (4.0 * (c - d[base - stride]) + (d[base - 2 * stride] - c)) * inv_2dx
    } else if pos >= 1 {
        (c - d[base - stride]) * (2.0 * inv_2dx)
    } else {
        (d[base + stride] - c) * (2.0 * inv_2dx)
    }
}

/// Upwind one-sided gradients of `f` in both axes, written into
/// `(gx_out, gy_out)`.
///
/// `ax` and `ay` hold the per-point advection coefficients that multiply
/// `df/dx` and `df/dy`; their signs select the stencil side point by point.
pub fn upwind_grad_into(
    f: &Field,
    dx: f64,
    ax: &Field,
    ay: &Field,
    gx_out: &mut Field,
    gy_out: &mut Field,
) {
    let n = f.n;
    assert!(ax.n == n && ay.n == n && gx_out.n == n && gy_out.n == n, "grid size mismatch");
    let inv_2dx = 1.0 / (2.0 * dx);
    let stride = n + 1;
    let d = &f.data;
    for i in 0..=n {
        let row = i * stride;
        for j in 0..=n {
            let k = row + j;
            gx_out.data[k] = one_sided(d, k, stride, i, n, ax.data[k], inv_2dx);
            gy_out.data[k] = one_sided(d, k, 1, j, n, ay.data[k], inv_2dx);
        }
    }
}

/// Allocating wrapper around [`upwind_grad_into`].
pub fn upwind_grad(f: &Field, dx: f64, ax: &Field, ay: &Field) -> (Field, Field) {
    let mut gx = Field::zeros(f.n);
    let mut gy = Field::zeros(f.n);
    upwind_grad_into(f, dx, ax, ay, &mut gx, &mut gy);
    (gx, gy)
}

/// Trapezoid-weighted sum of the field: weight 1 inside, 1/2 on edges, 1/4
/// on corners. This is the discrete functional that pure diffusion with
/// reflecting boundaries conserves exactly.
pub fn trapezoid_sum(f: &Field) -> f64 {
    let n = f.n;
    let mut total = 0.0;
    for i in 0..=n {
        let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
        for j in 0..=n {
            let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
            total += wi * wj * f.at(i, j);
        }
    }
    total
}
