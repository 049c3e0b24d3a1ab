//! Radial grids and sampled fields on the unit ball of R^4.
//!
//! A grid holds nodes 0 = r_0 < r_1 < ... < r_{n-1} = 1, graded as
//! r_i = (i/(n-1))^q, together with quadrature weights for the radial
//! measure of the 4-ball, 2 pi^2 r^3 dr (the area of the 3-sphere of
//! radius r). Weights integrate the piecewise-linear interpolant of the
//! samples against that measure exactly, so sum(w) is the exact 4-ball
//! volume pi^2/2 up to rounding and the rule is exact for linear
//! integrands on any grading.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest node count a grid may have.
pub const MIN_NODES: usize = 16;

/// 1D mesh on [0,1] carrying the R^4 radial quadrature.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    q: f64,
}

/// Moments of the measure 2 pi^2 r^3 dr over [a, b] against the linear
/// hat values at the endpoints: returns the coefficients (to_left,
/// to_right) so that the integral of a linear f is f(a)*to_left +
/// f(b)*to_right.
fn segment_weights(a: f64, b: f64) -> (f64, f64) {
    let m0 = (b.powi(4) - a.powi(4)) / 4.0;
    let m1 = (b.powi(5) - a.powi(5)) / 5.0;
    let d = b - a;
    let left = 2.0 * PI * PI * (b * m0 - m1) / d;
    let right = 2.0 * PI * PI * (m1 - a * m0) / d;
    (left, right)
}

fn weights_for(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let (wl, wr) = segment_weights(nodes[i], nodes[i + 1]);
        w[i] += wl;
        w[i + 1] += wr;
    }
    w
}

impl RadialGrid {
    /// Build an n-node grid with grading exponent q (q = 1 is uniform,
    /// larger q clusters nodes at the center).
    pub fn new(n: usize, q: f64) -> Result<Arc<RadialGrid>> {
        if n < MIN_NODES {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if !q.is_finite() || q < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "grading exponent must be finite and >= 1, got {q}"
            )));
        }
        let m = (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| {
                let xi = i as f64 / m;
                if q == 1.0 {
                    xi
                } else {
                    xi.powf(q)
                }
            })
            .collect();
        let weights = weights_for(&nodes);
        Ok(Arc::new(RadialGrid { nodes, weights, q }))
    }

    /// Rebuild a grid from explicit nodes (e.g. a reloaded CSV field).
    /// The nodes must span [0,1], increase strictly and follow a power
    /// grading; the exponent is recovered by fitting.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<RadialGrid>> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if (nodes[n - 1] - 1.0).abs() > 1.0e-12 {
            return Err(Error::InvalidConfig(format!(
                "last node must be 1, got {}",
                nodes[n - 1]
            )));
        }
        let mut nodes = nodes;
        nodes[n - 1] = 1.0;
        for i in 1..n {
            if nodes[i] <= nodes[i - 1] {
                return Err(Error::InvalidConfig(format!(
                    "nodes must increase strictly (violated at index {i})"
                )));
            }
        }
        let m = (n - 1) as f64;
        let mid = (n - 1) / 2;
        let q = nodes[mid].ln() / (mid as f64 / m).ln();
        for (i, &r) in nodes.iter().enumerate().skip(1) {
            let xi = i as f64 / m;
            if (r - xi.powf(q)).abs() > 1.0e-8 {
                return Err(Error::InvalidConfig(
                    "nodes do not follow a power grading r_i = (i/(n-1))^q".into(),
                ));
            }
        }
        let weights = weights_for(&nodes);
        Ok(Arc::new(RadialGrid { nodes, weights, q }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grading(&self) -> f64 {
        self.q
    }

    /// Number of nodes with r <= radius.
    pub fn nodes_inside(&self, radius: f64) -> usize {
        self.nodes.iter().take_while(|&&r| r <= radius).count()
    }

    /// Integral over the ball of the piecewise-linear interpolant of
    /// `values`, restricted to radius <= r. At r = 1 this sums exactly the
    /// same segment contributions as the full quadrature.
    pub fn partial_integral(&self, values: &[f64], r: f64) -> Result<f64> {
        assert_eq!(values.len(), self.len());
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!(
                "ball radius must lie in [0, 1], got {r}"
            )));
        }
        let mut total = 0.0;
        for i in 0..self.len() - 1 {
            let a = self.nodes[i];
            let b = self.nodes[i + 1];
            if r >= b {
                let (wl, wr) = segment_weights(a, b);
                total += values[i] * wl + values[i + 1] * wr;
            } else {
                if r > a {
                    // linear piece cut at r
                    let m0 = (r.powi(4) - a.powi(4)) / 4.0;
                    let m1 = (r.powi(5) - a.powi(5)) / 5.0;
                    let slope = (values[i + 1] - values[i]) / (b - a);
                    total += 2.0 * PI * PI * (values[i] * m0 + slope * (m1 - a * m0));
                }
                break;
            }
        }
        Ok(total)
    }
}

/// Sampled radial function tied to a grid.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<RadialField> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "field values must be finite, found {v}"
            )));
        }
        Ok(RadialField { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> RadialField {
        let n = grid.len();
        RadialField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<RadialGrid>, c: f64) -> RadialField {
        let n = grid.len();
        RadialField {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> RadialField {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Quadrature of the samples: sum_i w_i u(r_i), approximating the
    /// integral of u over the unit 4-ball.
    pub fn integrate(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.nodes() == other.grid.nodes()
    }

    /// Pointwise combination a*self + b*other (grids must match).
    pub fn axpy(&self, a: f64, other: &RadialField, b: f64) -> Result<RadialField> {
        if !self.same_grid(other) {
            return Err(Error::InvalidConfig(
                "fields live on different grids".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        RadialField::new(self.grid.clone(), values)
    }
}
