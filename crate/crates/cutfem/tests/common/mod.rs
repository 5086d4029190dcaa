//! Test-only oracles, independent of the solver implementation.

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// High-order quadrature of a function over the unit sphere at the origin:
/// Gauss-Legendre in the polar cosine times a trapezoid rule in azimuth
/// (spectrally accurate for smooth integrands).
pub fn sphere_integral(f: &dyn Fn(f64, f64, f64) -> f64, n_polar: usize, n_azimuth: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n_polar);
    let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
    let mut total = 0.0;
    for (c, w) in nodes.iter().zip(&weights) {
        let s = (1.0 - c * c).sqrt();
        for k in 0..n_azimuth {
            let phi = dphi * k as f64;
            total += w * dphi * f(s * phi.cos(), s * phi.sin(), *c);
        }
    }
    total
}

#[allow(dead_code)]
pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}
