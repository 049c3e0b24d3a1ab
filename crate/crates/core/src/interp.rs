//! Interpolation of sampled radial profiles: linear for traces whose
//! accuracy should track the second-order scheme, monotone cubic
//! (Fritsch-Carlson) where the interpolant must preserve a decreasing
//! profile, e.g. when rescaling concentrated fields.

/// Index of the segment [x_i, x_{i+1}] containing x (clamped to range).
fn segment(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(xs.len() - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(xs.len() - 2),
    }
}

pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = segment(xs, x);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Four-point Lagrange interpolation on the containing segment and its
/// neighbors; O(h^4), so trace evaluation stays below the scheme error.
pub fn cubic(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n < 4 {
        return linear(xs, ys, x);
    }
    let i = segment(xs, x);
    let lo = i.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for a in lo..lo + 4 {
        let mut basis = 1.0;
        for b in lo..lo + 4 {
            if a != b {
                basis *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += ys[a] * basis;
    }
    acc
}

/// Monotone cubic Hermite interpolant with Fritsch-Carlson slopes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: &[f64], ys: &[f64]) -> MonotoneCubic {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 3);
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut m = vec![0.0; n];
        // endpoint slopes: one-sided parabolic, clipped to keep shape
        let end_slope = |d0: f64, d1: f64, h0: f64, h1: f64| -> f64 {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s * d0 <= 0.0 {
                0.0
            } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        m[0] = end_slope(d[0], d[1], h[0], h[1]);
        m[n - 1] = end_slope(d[n - 2], d[n - 3], h[n - 2], h[n - 3]);
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        MonotoneCubic {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes: m,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = segment(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_hits_nodes_and_midpoints() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [1.0, 2.0, -2.0];
        assert_abs_diff_eq!(linear(&xs, &ys, 1.0), 2.0);
        assert_abs_diff_eq!(linear(&xs, &ys, 0.5), 1.5);
        assert_abs_diff_eq!(linear(&xs, &ys, 2.0), 0.0);
    }

    #[test]
    fn monotone_cubic_preserves_decrease() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0 * 5.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| -4.0 * (1.0 + x * x / 19.6).ln()).collect();
        let c = MonotoneCubic::new(&xs, &ys);
        let mut prev = f64::INFINITY;
        for k in 0..400 {
            let x = k as f64 / 399.0 * 5.0;
            let v = c.eval(x);
            assert!(v <= prev + 1.0e-12);
            prev = v;
        }
        // interpolates node values exactly
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(c.eval(*x), *y, epsilon = 1.0e-12);
        }
    }
}
