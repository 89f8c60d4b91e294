//! Local reaction kinetics of the two-component excitable model.
//!
//! The activator equation is stiff (`1/epsilon` prefactor), the inhibitor
//! slow (`epsilon` prefactor):
//!
//! ```text
//! f1(u1, u2) = (u1 - u1^3/3 - u2) / epsilon
//! f2(u1, u2) = epsilon * (u1 + beta - gamma * u2)
//! ```
//!
//! `beta` is the excitability parameter that all continuation experiments
//! sweep; `gamma` and `epsilon` are usually held at 0.5 and 0.2.

use crate::error::{Result, SimError};

/// Reaction parameters plus the diffusion matrix of the full PDE.
///
/// The diffusion matrix rides along here because the reaction and diffusion
/// parts of the model are always configured together; only `diff[0][0]` is
/// non-zero in the standard setup (activator diffuses, inhibitor does not).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Row-major 2x2 diffusion matrix; row i scales the Laplacians entering
    /// component i.
    pub diff: [[f64; 2]; 2],
}

impl ModelParams {
    /// Validates and builds parameters with an explicit diffusion matrix.
    pub fn new(beta: f64, gamma: f64, epsilon: f64, diff: [[f64; 2]; 2]) -> Result<Self> {
        if !(beta.is_finite() && gamma.is_finite() && epsilon.is_finite()) {
            return Err(SimError::InvalidModel("non-finite parameter".into()));
        }
        if epsilon == 0.0 {
            return Err(SimError::InvalidModel("epsilon must be non-zero".into()));
        }
        if diff.iter().flatten().any(|d| !d.is_finite()) {
            return Err(SimError::InvalidModel("non-finite diffusion entry".into()));
        }
        Ok(ModelParams { beta, gamma, epsilon, diff })
    }

    /// The standard parameter slice: `gamma = 0.5`, `epsilon = 0.2`,
    /// diffusion on the activator only.
    pub fn with_defaults(beta: f64) -> Self {
        ModelParams::new(beta, 0.5, 0.2, [[1.0, 0.0], [0.0, 0.0]])
            .expect("default parameters are valid")
    }
}

/// Reaction terms at a single point.
#[inline]
pub fn reaction(u1: f64, u2: f64, p: &ModelParams) -> (f64, f64) {
    let f1 = (u1 - u1 * u1 * u1 / 3.0 - u2) / p.epsilon;
    let f2 = p.epsilon * (u1 + p.beta - p.gamma * u2);
    (f1, f2)
}

/// Spatially uniform rest state `(u_r, v_r)`: the nullcline intersection
/// with the smallest `u`, found by bracketing the cubic
/// `u - u^3/3 - (u + beta)/gamma` and bisecting to machine precision.
///
/// Both reaction components vanish at the returned point to below `1e-12`.
pub fn rest_state(p: &ModelParams) -> Result<(f64, f64)> {
    if p.gamma == 0.0 {
        return Err(SimError::NoRealRoot { beta: p.beta, gamma: p.gamma });
    }
    let g = |u: f64| u - u * u * u / 3.0 - (u + p.beta) / p.gamma;

    // The cubic term dominates outside a radius set by the linear
    // coefficients, so this bracket always contains every real root.
    let radius = 4.0 + (3.0 * (1.0 + p.beta.abs()) / p.gamma.abs()).cbrt() + p.beta.abs();
    let scan = 512;
    let mut root: Option<f64> = None;
    let mut prev_u = -radius;
    let mut prev_g = g(prev_u);
    for k in 1..=scan {
        let u = -radius + 2.0 * radius * (k as f64) / (scan as f64);
        let gu = g(u);
        if prev_g == 0.0 {
            root = Some(prev_u);
            break;
        }
        if prev_g * gu < 0.0 {
            root = Some(bisect(g, prev_u, u));
            break;
        }
        prev_u = u;
        prev_g = gu;
    }
    let u = root.ok_or(SimError::NoRealRoot { beta: p.beta, gamma: p.gamma })?;
    Ok((u, (u + p.beta) / p.gamma))
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if glo * gm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, gamma: f64, epsilon: f64) -> ModelParams {
        ModelParams::new(beta, gamma, epsilon, [[1.0, 0.0], [0.0, 0.0]]).unwrap()
    }

    #[test]
    fn reaction_values_on_the_cubic_nullcline() {
        // u1 = 1, u2 = 2/3 sits exactly on u2 = u1 - u1^3/3, so f1 = 0.
        let p = params(0.7, 0.5, 0.2);
        let (f1, f2) = reaction(1.0, 2.0 / 3.0, &p);
        assert!(f1.abs() < 1e-14, "f1 = {f1}");
        let expect = 0.2 * (1.0 + 0.7 - 0.5 * (2.0 / 3.0));
        assert!((f2 - expect).abs() < 1e-15, "f2 = {f2}");
    }

    #[test]
    fn reaction_at_origin() {
        let p = params(0.7, 0.5, 0.2);
        let (f1, f2) = reaction(0.0, 0.0, &p);
        assert_eq!(f1, 0.0);
        assert!((f2 - 0.14).abs() < 1e-15);
    }

    #[test]
    fn rest_state_zeroes_the_reaction() {
        let p = params(0.7, 0.5, 0.2);
        let (u, v) = rest_state(&p).unwrap();
        let (f1, f2) = reaction(u, v, &p);
        assert!(f1.abs() < 1e-12, "f1 residual {f1}");
        assert!(f2.abs() < 1e-12, "f2 residual {f2}");
        // Independent check: slow bisection of the same cubic on a fixed
        // bracket, carried out here rather than shared with the library.
        let g = |u: f64| u - u * u * u / 3.0 - (u + 0.7) / 0.5;
        let (mut lo, mut hi) = (-2.0, 0.0);
        assert!(g(lo) * g(hi) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((u - oracle).abs() < 1e-10, "u = {u}, oracle = {oracle}");
        assert!((u + 1.03279).abs() < 1e-4);
    }

    #[test]
    fn rest_state_at_zero_beta_is_the_origin() {
        let p = params(0.0, 0.5, 0.2);
        let (u, v) = rest_state(&p).unwrap();
        assert!(u.abs() < 1e-14);
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn rest_state_is_odd_in_beta() {
        for beta in [0.3, 0.58, 0.7, 0.99] {
            let (u, v) = rest_state(&params(beta, 0.5, 0.2)).unwrap();
            let (un, vn) = rest_state(&params(-beta, 0.5, 0.2)).unwrap();
            assert!((u + un).abs() < 1e-12);
            assert!((v + vn).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        assert!(ModelParams::new(0.7, 0.5, 0.0, [[1.0, 0.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn zero_gamma_has_no_rest_state() {
        let p = ModelParams::new(0.7, 0.0, 0.2, [[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(rest_state(&p), Err(SimError::NoRealRoot { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // f1 is affine in u2 with slope -1/epsilon.
            #[test]
            fn activator_is_linear_in_inhibitor(
                u1 in -3.0f64..3.0, a in -3.0f64..3.0, b in -3.0f64..3.0,
            ) {
                let p = params(0.7, 0.5, 0.2);
                let (fa, _) = reaction(u1, a, &p);
                let (fb, _) = reaction(u1, b, &p);
                let expect = -(a - b) / p.epsilon;
                prop_assert!((fa - fb - expect).abs() < 1e-9);
            }

            // Negating (u1, u2, beta) negates both components exactly.
            #[test]
            fn odd_symmetry(u1 in -3.0f64..3.0, u2 in -3.0f64..3.0, beta in -1.5f64..1.5) {
                let p = params(beta, 0.5, 0.2);
                let pn = params(-beta, 0.5, 0.2);
                let (f1, f2) = reaction(u1, u2, &p);
                let (g1, g2) = reaction(-u1, -u2, &pn);
                prop_assert_eq!(f1, -g1);
                prop_assert_eq!(f2, -g2);
            }

            // The rest state inherits the same symmetry.
            #[test]
            fn rest_state_symmetry(beta in -1.2f64..1.2) {
                let (u, v) = rest_state(&params(beta, 0.5, 0.2)).unwrap();
                let (un, vn) = rest_state(&params(-beta, 0.5, 0.2)).unwrap();
                prop_assert!((u + un).abs() < 1e-11);
                prop_assert!((v + vn).abs() < 1e-11);
            }
        }
    }
}
