//! Clamped biharmonic Green function on the unit ball of R^4, in
//! Boggio's closed form, with the Robin function, the boundary-layer
//! correction R1, and the attainment indicator built from them.
//!
//! With [x,y]^2 = |x-y|^2 + (1-|x|^2)(1-|y|^2) and A = [x,y]/|x-y|,
//!
//!     G(x,y) = (1/8pi^2) * integral_1^A (v^2-1)/v^3 dv
//!            = (1/8pi^2) * (ln A + 1/(2A^2) - 1/2),
//!
//! evaluated through the antiderivative so no quadrature tolerance enters.
//! The regular part R(x,y) = G(x,y) + ln|x-y| / (8pi^2) simplifies to
//! (1/8pi^2)(ln[x,y] + |x-y|^2/(2[x,y]^2) - 1/2), which is finite through
//! the diagonal.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::operators::ClampedBilaplacian;

/// Default step for the Richardson-extrapolated second differences used on
/// the diagonal of the Robin function.
pub const DEFAULT_ROBIN_FD_STEP: f64 = 1.0e-2;

/// Point of the closed unit ball in R^4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallPoint {
    coords: [f64; 4],
}

impl BallPoint {
    pub fn new(coords: [f64; 4]) -> Result<BallPoint> {
        let p = BallPoint { coords };
        if !p.radius().is_finite() || p.radius() > 1.0 + 1.0e-12 {
            return Err(Error::Domain(format!(
                "point lies outside the closed unit ball (|x| = {})",
                p.radius()
            )));
        }
        Ok(p)
    }

    pub fn origin() -> BallPoint {
        BallPoint { coords: [0.0; 4] }
    }

    /// r * e_1 for radial work.
    pub fn on_axis(r: f64) -> Result<BallPoint> {
        BallPoint::new([r, 0.0, 0.0, 0.0])
    }

    pub fn coords(&self) -> [f64; 4] {
        self.coords
    }

    pub fn radius(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    fn dist_sq(&self, other: &BallPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub(crate) fn offset(&self, axis: usize, h: f64) -> Result<BallPoint> {
        let mut c = self.coords;
        c[axis] += h;
        BallPoint::new(c)
    }
}

const INV_8PI2: f64 = 1.0 / (8.0 * PI * PI);

/// Squared Boggio bracket [x,y]^2; the boundary factors are clamped at
/// zero so points stored with |x| = 1 + O(1e-16) behave as boundary points.
fn bracket_sq(x: &BallPoint, y: &BallPoint) -> f64 {
    let bx = (1.0 - x.norm_sq()).max(0.0);
    let by = (1.0 - y.norm_sq()).max(0.0);
    x.dist_sq(y) + bx * by
}

/// A = [x,y]/|x-y| >= 1, equal to 1 exactly when either point is on the
/// boundary.
pub fn boggio_modulus(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    let d2 = x.dist_sq(y);
    if d2 == 0.0 {
        return Err(Error::Domain("coincident points".into()));
    }
    Ok((bracket_sq(x, y) / d2).sqrt().max(1.0))
}

/// Green function of the clamped bilaplacian on the unit ball.
pub fn green(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    let a = boggio_modulus(x, y)?;
    Ok(INV_8PI2 * (a.ln() + 0.5 / (a * a) - 0.5))
}

/// Regular part R(x,y) = G(x,y) + ln|x-y|/(8pi^2); finite through the
/// diagonal, where it becomes (1/8pi^2)(ln(1-|y|^2) - 1/2).
pub fn robin(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    let b2 = bracket_sq(x, y);
    if b2 == 0.0 {
        return Err(Error::Domain(
            "Robin function diverges at a boundary diagonal point".into(),
        ));
    }
    let d2 = x.dist_sq(y);
    Ok(INV_8PI2 * (0.5 * b2.ln() + 0.5 * d2 / b2 - 0.5))
}

/// Delta_x R(x,y) at x = y by central second differences over the four
/// axes, Richardson-extrapolated once (steps h and h/2).
pub fn laplacian_robin_diag(y: &BallPoint, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {h}")));
    }
    if y.radius() + h >= 1.0 {
        return Err(Error::Domain(format!(
            "point at radius {} too close to the boundary for step {h}",
            y.radius()
        )));
    }
    let second_diff = |h: f64| -> Result<f64> {
        let center = robin(y, y)?;
        let mut acc = 0.0;
        for axis in 0..4 {
            let plus = robin(&y.offset(axis, h)?, y)?;
            let minus = robin(&y.offset(axis, -h)?, y)?;
            acc += (plus - 2.0 * center + minus) / (h * h);
        }
        Ok(acc)
    };
    let d_h = second_diff(h)?;
    let d_h2 = second_diff(0.5 * h)?;
    Ok((4.0 * d_h2 - d_h) / 3.0)
}

/// Biharmonic field matching the boundary data 4/|x-P|^2 and its normal
/// derivative. Only the centered case P = 0 is radial; there the data is
/// value 4 and slope -8 on the unit sphere.
pub fn r1_solve(p: &BallPoint, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    if p.radius() > 1.0e-14 {
        return Err(Error::Unsupported(
            "R1 is only implemented for a centered pole (P = 0)".into(),
        ));
    }
    let op = ClampedBilaplacian::new(grid)?;
    op.solve_with_boundary(&RadialField::zeros(grid.clone()), 4.0, -8.0)
}

/// Attainment indicator R1(Q,Q) + 16 pi^2 Delta_x R(Q,Q). Positive on the
/// ball at the center, which is where the diagonal of R is maximal.
pub fn con_value(q: &BallPoint, grid: &Arc<RadialGrid>) -> Result<f64> {
    if q.radius() > 1.0e-14 {
        return Err(Error::Unsupported(
            "the attainment indicator is only implemented at the center".into(),
        ));
    }
    let r1 = r1_solve(&BallPoint::origin(), grid)?;
    let lap = laplacian_robin_diag(&BallPoint::origin(), DEFAULT_ROBIN_FD_STEP)?;
    Ok(r1.values()[0] + 16.0 * PI * PI * lap)
}

/// Empirical constants for the classical Green-function bounds
/// |G| <= C log(2 + 1/|x-y|) and |grad_x G| <= C / |x-y|.
#[derive(Debug, Clone, Copy)]
pub struct GreenBoundReport {
    pub c_log: f64,
    pub c_grad: f64,
    pub samples: usize,
}

pub fn green_bound_check(pairs: &[(BallPoint, BallPoint)]) -> Result<GreenBoundReport> {
    let mut c_log = 0.0f64;
    let mut c_grad = 0.0f64;
    for (x, y) in pairs {
        let d = x.dist_sq(y).sqrt();
        if d == 0.0 {
            return Err(Error::Domain("coincident sample pair".into()));
        }
        let g = green(x, y)?;
        c_log = c_log.max(g.abs() / (2.0 + 1.0 / d).ln());
        // gradient in the first argument by central differences, with a
        // step keeping the stencil inside the ball and away from y
        let room = 1.0 - x.radius();
        let h = (0.2 * d.min(room.max(0.0))).min(1.0e-3);
        if h > 1.0e-9 {
            let mut norm_sq = 0.0;
            for axis in 0..4 {
                let gp = green(&x.offset(axis, h)?, y)?;
                let gm = green(&x.offset(axis, -h)?, y)?;
                let der = (gp - gm) / (2.0 * h);
                norm_sq += der * der;
            }
            c_grad = c_grad.max(norm_sq.sqrt() * d);
        }
    }
    Ok(GreenBoundReport {
        c_log,
        c_grad,
        samples: pairs.len(),
    })
}

/// Deterministic sample pairs with separations sweeping [1e-6, ~1] and
/// varying directions; used by the bound check and the symmetry tests.
pub fn sample_pairs(count: usize) -> Vec<(BallPoint, BallPoint)> {
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let t = (k as f64 + 0.5) / count as f64;
        let rx = 0.9 * t;
        let phi = 2.399963229728653 * k as f64; // golden angle
        let dir = [
            phi.cos(),
            phi.sin(),
            (1.7 * phi + 0.4).cos(),
            (1.7 * phi + 0.4).sin(),
        ];
        let norm: f64 = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
        let x = BallPoint::new([
            rx * dir[0] / norm,
            rx * dir[1] / norm,
            rx * dir[2] / norm,
            rx * dir[3] / norm,
        ])
        .expect("sample inside ball");
        let sep = 10f64.powf(-6.0 * (1.0 - t));
        let mut yc = x.coords();
        yc[k % 4] += sep;
        let ynorm: f64 = yc.iter().map(|c| c * c).sum::<f64>().sqrt();
        if ynorm >= 1.0 {
            for c in yc.iter_mut() {
                *c *= 0.999 / ynorm;
            }
        }
        let y = BallPoint::new(yc).expect("sample inside ball");
        if x.dist_sq(&y) > 0.0 {
            pairs.push((x, y));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn closed_form_center(r: f64) -> f64 {
        INV_8PI2 * ((1.0 / r).ln() + 0.5 * r * r - 0.5)
    }

    #[test]
    fn boggio_modulus_examples() {
        let x = BallPoint::on_axis(0.5).unwrap();
        let a = boggio_modulus(&x, &BallPoint::origin()).unwrap();
        assert_abs_diff_eq!(a, 2.0, epsilon = 1.0e-14);
        // boundary point: bracket collapses to the distance
        let b = BallPoint::on_axis(1.0).unwrap();
        let y = BallPoint::new([0.1, 0.2, 0.0, 0.3]).unwrap();
        assert_abs_diff_eq!(boggio_modulus(&b, &y).unwrap(), 1.0, epsilon = 1.0e-14);
        assert!(boggio_modulus(&x, &x).is_err());
    }

    #[test]
    fn boggio_modulus_symmetric_bitwise() {
        for (x, y) in sample_pairs(64) {
            let a = boggio_modulus(&x, &y).unwrap();
            let b = boggio_modulus(&y, &x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn green_matches_centered_closed_form() {
        let x = BallPoint::on_axis(0.5).unwrap();
        let g = green(&x, &BallPoint::origin()).unwrap();
        let expected = INV_8PI2 * (2.0f64.ln() + 0.125 - 0.5);
        assert_abs_diff_eq!(g, expected, epsilon = 1.0e-16);
        assert_abs_diff_eq!(g, 0.00402939, epsilon = 1.0e-8);
        for k in 1..=9 {
            let r = k as f64 / 10.0;
            let x = BallPoint::on_axis(r).unwrap();
            let g = green(&x, &BallPoint::origin()).unwrap();
            assert_abs_diff_eq!(g, closed_form_center(r), epsilon = 1.0e-14);
        }
        let b = BallPoint::on_axis(1.0).unwrap();
        assert_abs_diff_eq!(
            green(&b, &BallPoint::origin()).unwrap(),
            0.0,
            epsilon = 1.0e-15
        );
    }

    #[test]
    fn green_symmetric_and_nonnegative() {
        for (x, y) in sample_pairs(128) {
            let g = green(&x, &y).unwrap();
            assert_eq!(g, green(&y, &x).unwrap());
            assert!(g >= 0.0);
        }
    }

    #[test]
    fn robin_closed_forms() {
        for k in 0..10 {
            let r = 0.095 * k as f64;
            let x = BallPoint::on_axis(r).unwrap();
            let v = robin(&x, &BallPoint::origin()).unwrap();
            assert_abs_diff_eq!(v, INV_8PI2 * (0.5 * r * r - 0.5), epsilon = 1.0e-15);
        }
        let center = robin(&BallPoint::origin(), &BallPoint::origin()).unwrap();
        assert_abs_diff_eq!(center, -1.0 / (16.0 * PI * PI), epsilon = 1.0e-16);
        assert_abs_diff_eq!(center, -0.00633257, epsilon = 1.0e-8);
    }

    #[test]
    fn robin_diagonal_maximal_at_center() {
        let center = robin(&BallPoint::origin(), &BallPoint::origin()).unwrap();
        for k in 1..100 {
            let r = k as f64 / 101.0;
            let y = BallPoint::on_axis(r).unwrap();
            assert!(robin(&y, &y).unwrap() < center);
        }
    }

    #[test]
    fn robin_continuous_through_diagonal() {
        let y = BallPoint::on_axis(0.4).unwrap();
        let at = robin(&y, &y).unwrap();
        let mut prev = f64::INFINITY;
        for &d in &[1.0e-2, 1.0e-4, 1.0e-6] {
            let x = BallPoint::new([0.4, d, 0.0, 0.0]).unwrap();
            let gap = (robin(&x, &y).unwrap() - at).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1.0e-7);
    }

    #[test]
    fn robin_diagonal_laplacian_center_value() {
        let v = laplacian_robin_diag(&BallPoint::origin(), DEFAULT_ROBIN_FD_STEP).unwrap();
        assert_abs_diff_eq!(v, 1.0 / (2.0 * PI * PI), epsilon = 1.0e-8);
        assert_abs_diff_eq!(v, 0.0506606, epsilon = 1.0e-7);
    }

    #[test]
    fn robin_center_slice_has_constant_laplacian() {
        // Delta_x of R(x,0) = (1/8pi^2)(|x|^2/2 - 1/2) is 4/(8pi^2),
        // independent of x; checked by plain second differences off-center
        let y = BallPoint::origin();
        let x = BallPoint::on_axis(0.4).unwrap();
        let h = 1.0e-3;
        let mut acc = 0.0;
        for axis in 0..4 {
            let p = robin(&x.offset(axis, h).unwrap(), &y).unwrap();
            let c = robin(&x, &y).unwrap();
            let m = robin(&x.offset(axis, -h).unwrap(), &y).unwrap();
            acc += (p - 2.0 * c + m) / (h * h);
        }
        assert_abs_diff_eq!(acc, 1.0 / (2.0 * PI * PI), epsilon = 1.0e-7);
    }

    #[test]
    fn robin_diagonal_laplacian_self_convergence() {
        // off-center there is no closed form; successive Richardson values
        // must contract fast under step halving
        let y = BallPoint::on_axis(0.3).unwrap();
        let e1 = laplacian_robin_diag(&y, 2.0e-2).unwrap();
        let e2 = laplacian_robin_diag(&y, 1.0e-2).unwrap();
        let e3 = laplacian_robin_diag(&y, 5.0e-3).unwrap();
        let c1 = (e1 - e2).abs();
        let c2 = (e2 - e3).abs();
        assert!(c2 < c1 / 8.0, "contraction {c1} -> {c2}");
        assert!(laplacian_robin_diag(&BallPoint::on_axis(0.995).unwrap(), 1.0e-2).is_err());
    }

    #[test]
    fn r1_matches_ball_closed_form() {
        let grid = RadialGrid::new(513, 1.0).unwrap();
        let r1 = r1_solve(&BallPoint::origin(), &grid).unwrap();
        for (&r, &v) in grid.nodes().iter().zip(r1.values()) {
            assert_abs_diff_eq!(v, 4.0 * (2.0 - r * r), epsilon = 1.0e-9);
        }
        assert_abs_diff_eq!(r1.values()[0], 8.0, epsilon = 1.0e-9);
        // boundary data reproduced: value 4, slope -8
        assert_abs_diff_eq!(*r1.values().last().unwrap(), 4.0, epsilon = 1.0e-12);
        assert_abs_diff_eq!(crate::operators::boundary_slope(&r1), -8.0, epsilon = 1.0e-9);
        assert!(r1_solve(&BallPoint::on_axis(0.2).unwrap(), &grid).is_err());
    }

    #[test]
    fn con_value_at_center() {
        let grid = RadialGrid::new(513, 1.0).unwrap();
        let v = con_value(&BallPoint::origin(), &grid).unwrap();
        assert_abs_diff_eq!(v, 16.0, epsilon = 1.0e-6);
        assert!(v > 0.0);
        // stable under grid refinement
        let mut vals = Vec::new();
        for n in [257usize, 513, 1025] {
            let g = RadialGrid::new(n, 1.0).unwrap();
            vals.push(con_value(&BallPoint::origin(), &g).unwrap());
        }
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.0e-6, "spread {spread}");
        assert!(con_value(&BallPoint::on_axis(0.5).unwrap(), &grid).is_err());
    }

    #[test]
    fn green_bounds_fit_finite_constants() {
        let report = green_bound_check(&sample_pairs(256)).unwrap();
        assert!(report.c_log.is_finite() && report.c_log > 0.0);
        assert!(report.c_grad.is_finite() && report.c_grad > 0.0);
        let double = green_bound_check(&sample_pairs(512)).unwrap();
        assert!(double.c_log <= 2.0 * report.c_log && double.c_log >= report.c_log / 2.0);
        assert!(double.c_grad <= 2.0 * report.c_grad && double.c_grad >= report.c_grad / 2.0);
        // boundary pair contributes a zero numerator
        let x = BallPoint::on_axis(1.0).unwrap();
        let y = BallPoint::on_axis(0.2).unwrap();
        let r = green_bound_check(&[(x, y)]).unwrap();
        assert_eq!(r.c_log, 0.0);
    }

    #[test]
    fn clamped_solve_reproduces_green_as_bump_shrinks() {
        // solving with a narrow normalized bump at the origin approaches
        // G(., 0) away from the center
        let grid = RadialGrid::new(1025, 1.0).unwrap();
        let op = ClampedBilaplacian::new(&grid).unwrap();
        let mut prev = f64::INFINITY;
        for &delta in &[0.2, 0.1, 0.05] {
            let bump = RadialField::from_fn(grid.clone(), |r| {
                let s = r / delta;
                if s < 1.0 {
                    (1.0 - s * s).powi(3)
                } else {
                    0.0
                }
            });
            let mass = bump.integrate();
            let normalized = bump.axpy(1.0 / mass, &RadialField::zeros(grid.clone()), 0.0).unwrap();
            let u = op.solve(&normalized).unwrap();
            let sup = grid
                .nodes()
                .iter()
                .zip(u.values())
                .filter(|(&r, _)| r >= 0.25)
                .map(|(&r, &v)| (v - closed_form_center(r)).abs())
                .fold(0.0f64, f64::max);
            assert!(sup < prev, "sup {sup} at delta {delta}");
            prev = sup;
        }
        assert!(prev < 5.0e-3, "final sup {prev}");
    }
}
