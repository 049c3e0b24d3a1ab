//! The standard concentration bubble and its clamped projection.
//!
//! The entire solution of Delta^2 u = e^u on R^4 with u(0) = 0 and finite
//! mass is u(r) = -4 ln(1 + r^2 / (8 sqrt 6)); its total mass is exactly
//! 64 pi^2, one quantum of the mean field parameter. The two-parameter
//! family
//!
//!     U_eps(r) = ln( gamma eps^4 / (eps^2 + r^2)^4 ),   gamma = 384,
//!
//! solves the same equation for every eps and reduces to the standard
//! profile at eps^2 = 8 sqrt 6. Projecting U_eps onto the clamped space
//! subtracts the biharmonic correction phi_eps matching its boundary
//! data; phi_eps expands as ln(gamma eps^4) - 64 pi^2 R(x,0) - eps^2
//! R1(x,0) + O(eps^4), which ties the bubble to the Robin function.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::green::{r1_solve, robin, BallPoint};
use crate::grid::{RadialField, RadialGrid};
use crate::operators::{
    boundary_slope, lap3_dd, lap_center_dd, laplacian, ClampedBilaplacian,
};

/// Normalization making ln(gamma eps^4 / (eps^2+r^2)^4) solve
/// Delta^2 u = e^u: gamma = 3 * 2^7.
pub const GAMMA: f64 = 384.0;

/// Largest concentration scale the clamped projection accepts; beyond it
/// the boundary layer contaminates the small-eps expansion.
pub const MAX_PROJECTION_EPS: f64 = 0.3;

/// 8 sqrt 6, the squared concentration scale of the standard profile.
pub fn bubble_scale() -> f64 {
    8.0 * 6.0f64.sqrt()
}

/// The entire solution profile -4 ln(1 + r^2/(8 sqrt 6)).
pub fn bubble_profile(r: f64) -> f64 {
    -4.0 * (r * r / bubble_scale()).ln_1p()
}

/// U_eps at radius r.
pub fn u_eps(eps: f64, r: f64) -> f64 {
    (GAMMA * eps.powi(4)).ln() - 4.0 * (eps * eps + r * r).ln()
}

/// Radial derivative of U_eps.
pub fn u_eps_slope(eps: f64, r: f64) -> f64 {
    -8.0 * r / (eps * eps + r * r)
}

/// Concentration parameters of a projected bubble.
#[derive(Debug, Clone, Copy)]
pub struct BubbleParams {
    pub eps: f64,
}

impl BubbleParams {
    pub fn new(eps: f64) -> Result<BubbleParams> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "concentration scale must be positive, got {eps}"
            )));
        }
        Ok(BubbleParams { eps })
    }

    pub fn gamma(&self) -> f64 {
        GAMMA
    }
}

/// Sample the standard profile on [0, scale] through a unit grid.
pub fn standard_bubble(grid: &Arc<RadialGrid>, scale: f64) -> Result<RadialField> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sampling scale must be positive, got {scale}"
        )));
    }
    Ok(RadialField::from_fn(grid.clone(), |r| {
        bubble_profile(scale * r)
    }))
}

/// Max over reliable nodes of |Delta^2 u - e^u| for the standard profile
/// sampled on a uniform n-node grid over [0, r_max]. Evaluated in
/// double-double so the reported value is pure scheme truncation; in f64
/// the 1/h^4 stencil amplifies sample rounding past the truncation on
/// fine grids. The last two nodes are excluded (one-sided closure).
pub fn bubble_pde_residual(n: usize, r_max: f64) -> Result<f64> {
    let (_, res) = bubble_pde_residual_profile(n, r_max)?;
    Ok(res.iter().fold(0.0f64, |m, v| m.max(*v)))
}

/// Per-node residual profile behind [`bubble_pde_residual`].
pub fn bubble_pde_residual_profile(n: usize, r_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 64 {
        return Err(Error::InvalidConfig(format!(
            "residual check needs at least 64 nodes, got {n}"
        )));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "outer radius must be positive, got {r_max}"
        )));
    }
    let a = Dd::from(6.0).sqrt().scale(8.0); // 8 sqrt 6
    let m = Dd::from((n - 1) as f64);
    let radius = Dd::from(r_max);
    let nodes: Vec<f64> = (0..n).map(|i| Dd::from(i as f64).div(m).to_f64()).collect();
    // field values u(r_max * x_i) and the exact right-hand side
    // e^u = (1 + r^2/a)^-4
    let mut field = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let r = Dd::from(i as f64).div(m).mul(radius);
        let w = Dd::ONE.add(r.mul(r).div(a));
        field.push(w.ln().scale(-4.0));
        let w2 = w.mul(w);
        rhs.push(Dd::ONE.div(w2.mul(w2)));
    }
    // two passes of the Laplacian in the unit coordinate; nodes beyond
    // n-3 would need the one-sided closure and are skipped
    let lap_rows = |count: usize, f: &dyn Fn(usize) -> Dd| -> Vec<Dd> {
        let mut out = Vec::with_capacity(count);
        let c = lap_center_dd(nodes[1], nodes[2]);
        out.push(c[0].mul(f(0)).add(c[1].mul(f(1))).add(c[2].mul(f(2))));
        for i in 1..count {
            let c = lap3_dd(nodes[i - 1], nodes[i], nodes[i + 1], nodes[i]);
            out.push(
                c[0].mul(f(i - 1))
                    .add(c[1].mul(f(i)))
                    .add(c[2].mul(f(i + 1))),
            );
        }
        out
    };
    let v = lap_rows(n - 2, &|i| field[i]);
    let w = lap_rows(n - 3, &|i| v[i]);
    let r4 = radius.mul(radius).mul(radius).mul(radius);
    let mut radii = Vec::with_capacity(n - 3);
    let mut res = Vec::with_capacity(n - 3);
    for i in 0..n - 3 {
        let defect = w[i].div(r4).sub(rhs[i]).abs().to_f64();
        radii.push(r_max * nodes[i]);
        res.push(defect);
    }
    Ok((radii, res))
}

/// Mass of the standard bubble inside radius r_max (closed form); the
/// total over R^4 is exactly 64 pi^2.
pub fn bubble_mass(r_max: f64) -> f64 {
    let total = 64.0 * PI * PI;
    if r_max == f64::INFINITY {
        return total;
    }
    assert!(r_max >= 0.0, "radius must be nonnegative");
    let s = r_max * r_max / bubble_scale();
    let t = 1.0 + s;
    total * (1.0 - 3.0 / (t * t) + 2.0 / (t * t * t))
}

/// Quadrature cross-check of [`bubble_mass`]: composite Simpson over n
/// uniform samples of 2 pi^2 r^3 e^u on [0, r_max] (n must be odd).
pub fn bubble_mass_quadrature(n: usize, r_max: f64) -> Result<f64> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "Simpson cross-check needs an odd node count >= 3, got {n}"
        )));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "outer radius must be positive and finite, got {r_max}"
        )));
    }
    let h = r_max / (n - 1) as f64;
    let g = |r: f64| 2.0 * PI * PI * r.powi(3) * bubble_profile(r).exp();
    let mut sum = g(0.0) + g(r_max);
    for i in 1..n - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(i as f64 * h);
    }
    Ok(sum * h / 3.0)
}

/// Clamped projection of U_eps and the quality of its Robin-function
/// expansion.
#[derive(Debug, Clone)]
pub struct ProjectionReport {
    pub eps: f64,
    /// P U_eps = U_eps - phi_eps; vanishes with its slope at r = 1.
    pub projected: RadialField,
    /// The biharmonic correction phi_eps.
    pub correction: RadialField,
    /// max_r |phi_eps - (ln(gamma eps^4) - 64 pi^2 R(x,0) - eps^2 R1(x,0))|,
    /// the remainder of the expansion; O(eps^4).
    pub expansion_defect: f64,
    /// Predicted decay order of the remainder.
    pub predicted_order: f64,
    /// P U_eps at r = 1 (zero by construction).
    pub boundary_value: f64,
    /// One-sided cubic-fit slope of P U_eps at r = 1.
    pub boundary_slope: f64,
    /// Exact-stencil residual of the discrete biharmonic solve for phi.
    pub solver_defect: f64,
}

/// Project U_eps onto the clamped space over the given grid.
pub fn project(eps: f64, grid: &Arc<RadialGrid>) -> Result<ProjectionReport> {
    let params = BubbleParams::new(eps)?;
    if params.eps > MAX_PROJECTION_EPS {
        return Err(Error::InvalidConfig(format!(
            "concentration scale {eps} exceeds the projection range (0, {MAX_PROJECTION_EPS}]"
        )));
    }
    let inside = grid.nodes_inside(eps);
    if inside < 8 {
        return Err(Error::InvalidConfig(format!(
            "grid resolves only {inside} nodes inside r <= {eps}; at least 8 are needed \
             (increase n or the grading exponent)"
        )));
    }
    let u = RadialField::from_fn(grid.clone(), |r| u_eps(eps, r));
    let g0 = u_eps(eps, 1.0);
    let g1 = -8.0 / (1.0 + eps * eps);
    let op = ClampedBilaplacian::new(grid)?;
    let zeros = RadialField::zeros(grid.clone());
    let phi = op.solve_with_boundary(&zeros, g0, g1)?;
    let solver_defect = op.defect(&phi, &zeros, g0, g1);
    let projected = u.axpy(1.0, &phi, -1.0)?;

    let r1 = r1_solve(&BallPoint::origin(), grid)?;
    let origin = BallPoint::origin();
    let lead = (GAMMA * eps.powi(4)).ln();
    let mut expansion_defect = 0.0f64;
    for ((&r, &phi_v), &r1_v) in grid
        .nodes()
        .iter()
        .zip(phi.values())
        .zip(r1.values())
    {
        let robin_v = robin(&BallPoint::on_axis(r)?, &origin)?;
        let predicted = lead - 64.0 * PI * PI * robin_v - eps * eps * r1_v;
        expansion_defect = expansion_defect.max((phi_v - predicted).abs());
    }

    let boundary_value = *projected.values().last().unwrap();
    let boundary_slope = boundary_slope(&projected);
    Ok(ProjectionReport {
        eps,
        projected,
        correction: phi,
        expansion_defect,
        predicted_order: 4.0,
        boundary_value,
        boundary_slope,
        solver_defect,
    })
}

/// The constrained energy J_rho(u) = 1/2 int |Delta u|^2 - rho ln int e^u.
pub fn j_energy(u: &RadialField, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean field parameter must be nonnegative, got {rho}"
        )));
    }
    let umax = u.max_value();
    if umax > 700.0 {
        return Err(Error::Range(format!(
            "field maximum {umax} would overflow exp"
        )));
    }
    let du = laplacian(u);
    let bending: f64 = du
        .values()
        .iter()
        .zip(u.grid().weights())
        .map(|(d, w)| d * d * w)
        .sum();
    let mass: f64 = u
        .values()
        .iter()
        .zip(u.grid().weights())
        .map(|(v, w)| v.exp() * w)
        .sum();
    Ok(0.5 * bending - rho * mass.ln())
}

/// J_rho along the projected bubble family, one entry per concentration
/// scale. For rho above 64 pi^2 the series decreases without bound as eps
/// shrinks; below the threshold it eventually increases. The asymptotic
/// slope against ln(1/eps) is 4 (64 pi^2 - rho).
pub fn energy_family(
    rho: f64,
    eps_list: &[f64],
    grid: &Arc<RadialGrid>,
) -> Result<Vec<(f64, f64)>> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "mean field parameter must be positive, got {rho}"
        )));
    }
    if eps_list.is_empty() {
        return Err(Error::InvalidConfig("empty concentration list".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig(
            "concentration scales must decrease strictly".into(),
        ));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let report = project(eps, grid)?;
        let energy = j_energy(&report.projected, rho)?;
        out.push((eps, energy));
    }
    Ok(out)
}
