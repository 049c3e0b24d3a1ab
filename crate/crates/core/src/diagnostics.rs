//! Blow-up structure diagnostics, run on computed solutions and on
//! synthetic near-singular fields. On the ball the minimizers stay
//! bounded up to the threshold, so projected bubbles are the only way to
//! exercise the concentration picture at desk scale: local mass
//! quantization toward 64 pi^2, rescaling onto the standard profile, and
//! the far-field collapse onto 64 pi^2 G(., 0).

use std::f64::consts::PI;

use crate::adams_threshold;
use crate::bubble::bubble_profile;
use crate::error::{Error, Result};
use crate::green::{green, robin, BallPoint};
use crate::grid::RadialField;
use crate::interp::{cubic, linear, MonotoneCubic};
use crate::operators::{laplacian_exact, radial_derivative};

/// Term-by-term Pohozaev balance on the ball B_r.
///
/// For a radial solution of Delta^2 u = f(u) on the 4-ball, with
/// v = -Delta u and F the primitive of f vanishing at 0, the identity
///
///   4 int_{B_r} F(u) dx
///     = int_{dB_r} <x,nu> F + 1/2 int v^2 <x,nu> + 2 int (du/dn) v
///       + int [ (dv/dn)<x,Du> + (du/dn)<x,Dv> - <Dv,Du><x,nu> ]
///
/// reduces through <x,nu> = r, du/dn = u', <x,Du> = r u', |dB_r| =
/// 2 pi^2 r^3 to
///
///   4 int_{B_r} F(u) dx
///     = 2 pi^2 r^3 [ r F(u(r)) + (r/2) v(r)^2 + 2 u'(r) v(r)
///                    + r u'(r) v'(r) ],
///
/// where the last bracket collects the mixed pair 2 r u'v' minus the
/// gradient product r u'v'. The breakdown keeps the five surface terms
/// separately; `residual` is the volume term minus their sum and decays
/// at the scheme order on discrete solutions.
#[derive(Debug, Clone, Copy)]
pub struct PohozaevBreakdown {
    pub r: f64,
    /// 4 int_{B_r} F(u).
    pub volume_term: f64,
    /// 2 pi^2 r^3 * r F(u(r)).
    pub f_flux: f64,
    /// 2 pi^2 r^3 * (r/2) v^2.
    pub v_sq: f64,
    /// 2 pi^2 r^3 * 2 u' v.
    pub slope_v: f64,
    /// 2 pi^2 r^3 * 2 r u' v'.
    pub mixed_pair: f64,
    /// -2 pi^2 r^3 * r u' v'.
    pub grad_dot: f64,
    pub residual: f64,
}

impl PohozaevBreakdown {
    pub fn boundary_sum(&self) -> f64 {
        self.f_flux + self.v_sq + self.slope_v + self.mixed_pair + self.grad_dot
    }
}

/// Evaluate the Pohozaev balance of Delta^2 u = rho e^u / int e^u on B_r.
///
/// Traces at interior radii are cubic interpolants of u, v = -Delta u and
/// u': the interpolation error is then O(h^4) and the reported residual
/// is the smooth O(h^2) defect of the discrete solution itself, refining
/// cleanly under grid doubling. The v' trace is not a second numerical
/// derivative (that would amplify the rounding of the stored samples by
/// 1/h^3 and floor the refinement study); it comes from the radial flux
/// form of Delta v = -f,
///
///     v'(r) = -(1/r^3) int_0^r s^3 f(u(s)) ds,
///
/// an identity of the same equation with the same O(h^2) accuracy. At
/// r = 1 the normal derivative uses the clamped boundary convention
/// u'(1) = 0 of the discretization (the operation expects a converged
/// clamped field), which makes the derivative fluxes vanish identically
/// there.
pub fn pohozaev_residual(u: &RadialField, rho: f64, r: f64) -> Result<PohozaevBreakdown> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!(
            "ball radius must lie in (0, 1], got {r}"
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean field parameter must be positive, got {rho}"
        )));
    }
    let grid = u.grid().clone();
    let nodes = grid.nodes();
    let exp_u: Vec<f64> = u.values().iter().map(|v| v.exp()).collect();
    let mass = grid.partial_integral(&exp_u, 1.0)?;
    // F(u) = rho (e^u - 1)/m, the primitive of rho e^u/m vanishing at 0
    let f_of_u: Vec<f64> = exp_u.iter().map(|e| rho * (e - 1.0) / mass).collect();
    let volume_term = 4.0 * grid.partial_integral(&f_of_u, r)?;

    let v = laplacian_exact(u).axpy(-1.0, &RadialField::zeros(grid.clone()), 0.0)?;
    let du = radial_derivative(u);
    // v' through the flux identity; exact at r = 1 where the full flux is
    // -rho / (2 pi^2)
    let dv_at = |r: f64| -> Result<f64> {
        let inside = grid.partial_integral(&exp_u, r)?;
        Ok(-(rho / mass) * inside / (2.0 * PI * PI * r.powi(3)))
    };

    let at_boundary = (r - 1.0).abs() <= 1.0e-12;
    let (u_r, v_r, du_r, dv_r) = if at_boundary {
        let n = grid.len();
        (
            u.values()[n - 1],
            v.values()[n - 1],
            0.0, // clamped slope
            dv_at(1.0)?,
        )
    } else {
        (
            cubic(nodes, u.values(), r),
            cubic(nodes, v.values(), r),
            cubic(nodes, du.values(), r),
            dv_at(r)?,
        )
    };

    let area = 2.0 * PI * PI * r.powi(3);
    let f_trace = rho * (u_r.exp() - 1.0) / mass;
    let f_flux = area * r * f_trace;
    let v_sq = area * 0.5 * r * v_r * v_r;
    let slope_v = area * 2.0 * du_r * v_r;
    let mixed_pair = area * 2.0 * r * du_r * dv_r;
    let grad_dot = -area * r * du_r * dv_r;
    let breakdown = PohozaevBreakdown {
        r,
        volume_term,
        f_flux,
        v_sq,
        slope_v,
        mixed_pair,
        grad_dot,
        residual: 0.0,
    };
    Ok(PohozaevBreakdown {
        residual: volume_term - breakdown.boundary_sum(),
        ..breakdown
    })
}

/// Mass of the normalized density inside B_r: rho int_{B_r} e^u / int e^u.
/// Exactly rho at r = 1, approaching multiples of 64 pi^2 at concentration
/// radii of near-singular fields.
pub fn local_mass(u: &RadialField, rho: f64, r: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean field parameter must be nonnegative, got {rho}"
        )));
    }
    let exp_u: Vec<f64> = u.values().iter().map(|v| v.exp()).collect();
    let inside = u.grid().partial_integral(&exp_u, r)?;
    let total = u.grid().partial_integral(&exp_u, 1.0)?;
    Ok(rho * inside / total)
}

/// Rescaling of a concentrated field onto the standard bubble.
#[derive(Debug, Clone)]
pub struct RescaleReport {
    /// Concentration scale e^{-(u(0) - alpha)/4}.
    pub mu: f64,
    /// Sample abscissas on [0, r_max].
    pub xs: Vec<f64>,
    /// Rescaled profile u_hat(mu x) + 4 ln mu; exactly 0 at x = 0.
    pub values: Vec<f64>,
    /// Sup distance to the standard bubble over the samples.
    pub sup_distance: f64,
    pub r_max: f64,
}

const RESCALE_SAMPLES: usize = 257;

/// Extract the concentration scale of a centered peak and compare the
/// rescaled profile with the standard bubble on [0, r_max].
pub fn rescale_extract(u: &RadialField, rho: f64, r_max: f64) -> Result<RescaleReport> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean field parameter must be positive, got {rho}"
        )));
    }
    if !(r_max >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "rescaled window must extend to at least 1, got {r_max}"
        )));
    }
    let peak = u.values()[0];
    if peak < u.max_value() {
        return Err(Error::Domain(
            "field maximum must sit at the center for rescaling".into(),
        ));
    }
    let mass = u
        .values()
        .iter()
        .zip(u.grid().weights())
        .map(|(v, w)| v.exp() * w)
        .sum::<f64>();
    let alpha = (mass / rho).ln();
    // carry ln mu so that the rescaled center value cancels exactly
    let ln_mu = -(peak - alpha) / 4.0;
    let mu = ln_mu.exp();
    if mu * r_max > 1.0 {
        return Err(Error::Domain(format!(
            "window mu * r_max = {} leaves the grid; largest admissible r_max is {}",
            mu * r_max,
            1.0 / mu
        )));
    }
    let hat: Vec<f64> = u.values().iter().map(|v| v - alpha).collect();
    let spline = MonotoneCubic::new(u.grid().nodes(), &hat);
    let mut xs = Vec::with_capacity(RESCALE_SAMPLES);
    let mut values = Vec::with_capacity(RESCALE_SAMPLES);
    let mut sup = 0.0f64;
    for k in 0..RESCALE_SAMPLES {
        let x = r_max * k as f64 / (RESCALE_SAMPLES - 1) as f64;
        let value = spline.eval(mu * x) + 4.0 * ln_mu;
        sup = sup.max((value - bubble_profile(x)).abs());
        xs.push(x);
        values.push(value);
    }
    Ok(RescaleReport {
        mu,
        xs,
        values,
        sup_distance: sup,
        r_max,
    })
}

/// Sup over r in [r0, 1] of |u(r) - 64 pi^2 G(r, 0)|, the distance to the
/// one-bubble far-field limit. The mean field parameter tags the report
/// but does not enter the comparison profile.
pub fn far_field_compare(u: &RadialField, _rho: f64, r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0 <= 1.0) {
        return Err(Error::Domain(format!(
            "comparison radius must lie in (0, 1], got {r0}"
        )));
    }
    let origin = BallPoint::origin();
    let profile = |r: f64| -> Result<f64> {
        Ok(adams_threshold() * green(&BallPoint::on_axis(r)?, &origin)?)
    };
    let nodes = u.grid().nodes();
    let mut sup = (linear(nodes, u.values(), r0) - profile(r0)?).abs();
    for (&r, &v) in nodes.iter().zip(u.values()) {
        if r > r0 && r < 1.0 {
            sup = sup.max((v - profile(r)?).abs());
        }
    }
    // boundary: both the clamped field and the Green profile vanish
    sup = sup.max((u.values()[u.len() - 1]).abs());
    Ok(sup)
}

/// Left side of the balance identity grad_x R(x_j, x_j) +
/// sum_{l != j} grad_x G(x_j, x_l) per configuration point, by central
/// differences of the closed forms. Vanishes at critical configurations;
/// radial symmetry forces it to vanish for a single point at the center.
pub fn gradient_balance(points: &[BallPoint]) -> Result<Vec<[f64; 4]>> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("no configuration points".into()));
    }
    let mut min_sep = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        if p.radius() >= 1.0 {
            return Err(Error::Domain(format!(
                "configuration point {i} must be interior"
            )));
        }
        for q in &points[i + 1..] {
            let d = p
                .coords()
                .iter()
                .zip(q.coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d < 1.0e-9 {
                return Err(Error::Domain("coincident configuration points".into()));
            }
            min_sep = min_sep.min(d);
        }
    }
    let room = points
        .iter()
        .map(|p| 1.0 - p.radius())
        .fold(f64::INFINITY, f64::min);
    let h = 1.0e-4f64.min(room / 10.0).min(min_sep / 10.0);
    let mut out = Vec::with_capacity(points.len());
    for (j, p) in points.iter().enumerate() {
        let mut grad = [0.0f64; 4];
        for (axis, slot) in grad.iter_mut().enumerate() {
            let plus = p.offset(axis, h)?;
            let minus = p.offset(axis, -h)?;
            let mut acc = (robin(&plus, p)? - robin(&minus, p)?) / (2.0 * h);
            for (l, q) in points.iter().enumerate() {
                if l != j {
                    acc += (green(&plus, q)? - green(&minus, q)?) / (2.0 * h);
                }
            }
            *slot = acc;
        }
        out.push(grad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::project;
    use crate::grid::RadialGrid;
    use crate::solver::{solve_newton, adams_threshold};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn solved(n: usize, rho: f64) -> crate::solver::SolveReport {
        let g = RadialGrid::new(n, 1.0).unwrap();
        solve_newton(rho, &RadialField::zeros(g), 1.0e-11, 50).unwrap()
    }

    #[test]
    fn pohozaev_zero_field_balances_exactly() {
        let g = RadialGrid::new(129, 1.0).unwrap();
        let zero = RadialField::zeros(g);
        let b = pohozaev_residual(&zero, 10.0, 0.5).unwrap();
        assert_eq!(b.volume_term, 0.0);
        assert_eq!(b.boundary_sum(), 0.0);
        assert_eq!(b.residual, 0.0);
    }

    #[test]
    fn pohozaev_residual_refines_at_scheme_order() {
        let rho = 0.5 * adams_threshold();
        let coarse = solved(513, rho);
        let fine = solved(1025, rho);
        for r in [0.3, 0.5, 0.7, 0.9] {
            let bc = pohozaev_residual(&coarse.field, rho, r).unwrap();
            let bf = pohozaev_residual(&fine.field, rho, r).unwrap();
            let rel_c = (bc.residual / bc.volume_term).abs();
            let rel_f = (bf.residual / bf.volume_term).abs();
            assert!(rel_c < 1.0e-3, "relative residual {rel_c} at r={r}");
            let ratio = rel_c / rel_f;
            assert!(
                ratio > 2.0f64.powf(1.5),
                "refinement ratio {ratio} at r={r}"
            );
        }
    }

    #[test]
    fn pohozaev_boundary_terms_vanish_on_clamped_fields() {
        let rho = 0.5 * adams_threshold();
        let report = solved(257, rho);
        let b = pohozaev_residual(&report.field, rho, 1.0).unwrap();
        assert_eq!(b.slope_v, 0.0);
        assert_eq!(b.mixed_pair, 0.0);
        assert_eq!(b.grad_dot, 0.0);
        // u(1) = 0 exactly, so the F-flux also vanishes there
        assert_eq!(b.f_flux, 0.0);
        assert!(b.v_sq > 0.0);
        assert!(pohozaev_residual(&report.field, rho, 0.0).is_err());
        assert!(pohozaev_residual(&report.field, rho, 1.5).is_err());
    }

    fn synthetic(eps: f64) -> (RadialField, Arc<RadialGrid>) {
        let g = RadialGrid::new(2049, 2.0).unwrap();
        (project(eps, &g).unwrap().projected, g)
    }

    #[test]
    fn local_mass_normalizes_and_grows() {
        let rho = adams_threshold();
        let (u, _) = synthetic(0.05);
        assert_eq!(local_mass(&u, rho, 1.0).unwrap(), rho);
        assert_eq!(local_mass(&u, rho, 0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in 1..=10 {
            let m = local_mass(&u, rho, k as f64 / 10.0).unwrap();
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn local_mass_quantizes_on_synthetic_bubble() {
        let rho = adams_threshold();
        let (u, _) = synthetic(0.02);
        let m = local_mass(&u, rho, 0.5).unwrap();
        assert!(
            (m - rho).abs() <= 0.03 * rho,
            "local mass {m} vs quantum {rho}"
        );
    }

    #[test]
    fn rescale_recovers_standard_bubble() {
        let rho = adams_threshold();
        let mut prev_sup = f64::INFINITY;
        let mut prev_mu = f64::INFINITY;
        for &eps in &[0.1, 0.05, 0.02] {
            let (u, _) = synthetic(eps);
            let report = rescale_extract(&u, rho, 10.0).unwrap();
            assert_eq!(report.values[0], 0.0);
            assert!(report.sup_distance < prev_sup);
            assert!(report.mu < prev_mu);
            // mu tracks eps with ratio (8 sqrt 6)^{-1/2}
            let ratio = report.mu / eps;
            let predicted = 1.0 / crate::bubble::bubble_scale().sqrt();
            assert!(
                (ratio - predicted).abs() < 0.05 * predicted,
                "mu/eps {ratio} vs {predicted}"
            );
            prev_sup = report.sup_distance;
            prev_mu = report.mu;
        }
        assert!(prev_sup <= 0.05, "sup distance {prev_sup}");
    }

    #[test]
    fn rescale_monotone_profile_and_window_guard() {
        let rho = 0.5 * adams_threshold();
        let report = solved(257, rho);
        let rescaled = rescale_extract(&report.field, rho, 1.0).unwrap();
        for w in rescaled.values.windows(2) {
            assert!(w[1] <= w[0] + 1.0e-12);
        }
        // window beyond the grid is refused with the admissible bound
        let err = rescale_extract(&report.field, rho, 1.0e9);
        assert!(matches!(err, Err(Error::Domain(_))));
        let g = report.field.grid().clone();
        let tilted = RadialField::from_fn(g, |r| r * (1.0 - r));
        assert!(rescale_extract(&tilted, rho, 1.0).is_err());
    }

    #[test]
    fn far_field_approaches_green_profile() {
        let rho = adams_threshold();
        let mut prev = f64::INFINITY;
        for &eps in &[0.1, 0.05, 0.02] {
            let (u, _) = synthetic(eps);
            let sup = far_field_compare(&u, rho, 0.3).unwrap();
            assert!(sup < prev, "sup {sup} at eps {eps}");
            prev = sup;
        }
        assert!(prev <= 0.1, "final sup {prev}");
    }

    #[test]
    fn far_field_of_zero_field_is_profile_height() {
        let g = RadialGrid::new(513, 1.0).unwrap();
        let zero = RadialField::zeros(g);
        let r0 = 0.3f64;
        let sup = far_field_compare(&zero, 1.0, r0).unwrap();
        let expected = 8.0 * ((1.0 / r0).ln() + r0 * r0 / 2.0 - 0.5);
        assert_abs_diff_eq!(sup, expected, epsilon = 1.0e-12);
        // at r0 = 1 both the clamped field and the profile vanish
        assert_abs_diff_eq!(
            far_field_compare(&zero, 1.0, 1.0).unwrap(),
            0.0,
            epsilon = 1.0e-15
        );
    }

    #[test]
    fn balance_gradient_vanishes_at_center_only() {
        let center = gradient_balance(&[BallPoint::origin()]).unwrap();
        let norm = center[0].iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(norm <= 1.0e-8, "center residual {norm}");

        let off = gradient_balance(&[BallPoint::on_axis(0.3).unwrap()]).unwrap();
        assert!(off[0][0].abs() >= 1.0e-3, "axis component {}", off[0][0]);
        for c in &off[0][1..] {
            assert!(c.abs() <= 1.0e-10);
        }
    }

    #[test]
    fn balance_respects_reflection_symmetry() {
        let pair = [
            BallPoint::on_axis(0.3).unwrap(),
            BallPoint::new([-0.3, 0.0, 0.0, 0.0]).unwrap(),
        ];
        let grads = gradient_balance(&pair).unwrap();
        for axis in 0..4 {
            let s = grads[0][axis] + grads[1][axis];
            assert!(s.abs() <= 1.0e-8, "axis {axis} sum {s}");
        }
        // coincident points are rejected
        let dup = [BallPoint::origin(), BallPoint::origin()];
        assert!(gradient_balance(&dup).is_err());
    }
}
