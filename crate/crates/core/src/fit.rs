//! Small least-squares helpers for convergence and scaling studies.

/// Slope of the least-squares line through (x_i, y_i).
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Fitted order p of err ~ C h^p from (h, err) pairs on a log-log scale.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logged: Vec<(f64, f64)> = points
        .iter()
        .map(|&(h, e)| (h.ln(), e.max(f64::MIN_POSITIVE).ln()))
        .collect();
    slope(&logged)
}
