//! One-dimensional quadrature rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        dp = if d.is_finite() { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Hermite nodes and weights for the weight `exp(-x^2)`, nodes ascending.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[n - 1],
            3 => 1.91 * z - 0.91 * x[n - 2],
            _ => 2.0 * z - x[n - 1 - (i - 2)],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (p, d) = hermite_normalized(n, z);
            pp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = hermite_normalized(n, z);
        if d.is_finite() && d != 0.0 {
            pp = d;
        }
        x[n - 1 - i] = z;
        x[i] = -z;
        let wi = 2.0 / (pp * pp);
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

// Orthonormal Hermite recursion; returns (p_n, p_n') up to the common scale
// that makes the weight formula `2 / p'^2` exact.
fn hermite_normalized(n: usize, z: f64) -> (f64, f64) {
    let pim4 = PI.powf(-0.25);
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    let pp = (2.0 * n as f64).sqrt() * p2;
    (p1, pp)
}

/// Fejér's first rule on [0, π] for integrals `∫ g(θ) sin θ dθ` at the
/// half-offset equiangular nodes `θ_j = π(2j+1)/(2n)`.
/// Exact when `g` is a polynomial in `cos θ` of degree below `n`.
pub fn fejer_first(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let nf = n as f64;
    let mut theta = vec![0.0; n];
    let mut w = vec![0.0; n];
    for j in 0..n {
        let t = PI * (2.0 * j as f64 + 1.0) / (2.0 * nf);
        let mut s = 0.0;
        for k in 1..=n / 2 {
            let kf = k as f64;
            s += (2.0 * kf * t).cos() / (4.0 * kf * kf - 1.0);
        }
        theta[j] = t;
        w[j] = 2.0 / nf * (1.0 - 2.0 * s);
    }
    (theta, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 12, 40] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn hermite_moments() {
        for n in [1usize, 4, 20, 60, 100] {
            let (x, w) = gauss_hermite(n);
            // ∫ x^{2k} e^{-x²} dx = Γ(k+1/2)
            let mut gamma = PI.sqrt();
            for k in 0..n.min(12) {
                let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(2 * k as i32)).sum();
                assert!((q - gamma).abs() < 1e-11 * gamma, "n={n} k={k} q={q} exact={gamma}");
                gamma *= k as f64 + 0.5;
            }
        }
    }

    #[test]
    fn fejer_exact_on_polynomials() {
        for n in [1usize, 3, 8, 17] {
            let (t, w) = fejer_first(n);
            for deg in 0..n {
                let q: f64 = t.iter().zip(&w).map(|(a, b)| b * a.cos().powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }
}
