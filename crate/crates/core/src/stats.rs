//! Small fitting helpers.

/// Least-squares line through `(x, y)` points; returns the slope and the
/// root-mean-square residual.
pub fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

/// `e^x − 1`, by its quartic Taylor polynomial when `|x|` is small enough
/// for the truncation to sit below double rounding.
#[inline]
pub fn expm1_small(x: f64) -> f64 {
    if x.abs() < 2e-4 {
        x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)))
    } else {
        x.exp_m1()
    }
}
