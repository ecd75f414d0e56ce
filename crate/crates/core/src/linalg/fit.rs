use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares line fit; returns (slope, intercept, slope standard error).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, se)
}

/// Weighted least squares line fit with per-point standard errors.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sd: &[f64]) -> (f64, f64, f64) {
    let w: Vec<f64> = sd.iter().map(|s| 1.0 / (s * s).max(1e-300)).collect();
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, (1.0 / sxx).sqrt())
}

/// Least-squares fit of y ≈ Σ_k c_k x^(2k), k = 0..=degree/2. Returns coefficients and the
/// condition number of the design matrix.
pub fn even_polynomial_fit(x: &[f64], y: &[f64], degree: usize) -> (Vec<f64>, f64) {
    let terms = degree / 2 + 1;
    let a = DMatrix::from_fn(x.len(), terms, |i, k| x[i].powi(2 * k as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let sol = svd.solve(&b, 1e-300).expect("svd with u and v");
    (sol.as_slice().to_vec(), cond)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (s, c, se) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12 && se < 1e-10);
    }

    #[test]
    fn even_poly_recovers_coefficients() {
        let x: Vec<f64> = (1..=5).map(|k| 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.0 + 0.5 * t * t - 0.25 * t.powi(4)).collect();
        let (c, cond) = even_polynomial_fit(&x, &y, 4);
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] - 0.5).abs() < 1e-8 && (c[2] + 0.25).abs() < 1e-7);
        assert!(cond.is_finite());
    }
}
