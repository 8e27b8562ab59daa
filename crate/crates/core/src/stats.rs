//! Small fitting helpers.

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (my - b * mx, b)
}

/// Richardson extrapolation of values on meshes `h` and `h/2` for an
/// error of order `h^p`.
pub fn richardson(coarse: f64, fine: f64, p: f64) -> f64 {
    let r = 2f64.powf(p);
    (r * fine - coarse) / (r - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_and_extrapolation() {
        let (a, b) = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((a - 1.0).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
        // f(h) = 1 + h^2 at h = 0.2, 0.1
        assert!((richardson(1.04, 1.01, 2.0) - 1.0).abs() < 1e-14);
    }
}
