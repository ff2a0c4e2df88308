use num_complex::Complex64;

use crate::error::{EntkError, Result};

use super::grid::{matrix_to_euler, Rotation, S2Grid};
use super::wigner::{wigner_big_d, wigner_d_series, WignerTables};

/// Number of sphere coefficients with `l < band`.
pub fn s2_coeff_count(band: usize) -> usize {
    band * band
}

/// Flat index `l² + l + m`.
pub fn s2_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// `Y^l_m(θ, φ) = √((2l+1)/4π) d^l_{m0}(θ) e^{imφ}` (Condon–Shortley phase).
pub fn spherical_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() as usize > l {
        return Err(EntkError::Index(format!("|m| > l: l={l}, m={m}")));
    }
    let d = super::wigner::wigner_d(l, m, 0, theta)?;
    let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    Ok(Complex64::from_polar(norm * d, m as f64 * phi))
}

/// All `Y^l_m` with `l < band` at one point, in [`s2_index`] order.
pub fn spherical_harmonics_at(band: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); s2_coeff_count(band)];
    if band == 0 {
        return out;
    }
    for m in -(band as i64 - 1)..band as i64 {
        let series = wigner_d_series(band - 1, m, 0, theta);
        let l0 = m.unsigned_abs() as usize;
        let e = Complex64::from_polar(1.0, m as f64 * phi);
        for (k, d) in series.into_iter().enumerate() {
            let l = l0 + k;
            let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
            out[s2_index(l, m)] = e * (norm * d);
        }
    }
    out
}

/// Sample-to-coefficient and coefficient-to-sample maps on an [`S2Grid`].
#[derive(Clone, Debug)]
pub struct SphereTransform {
    pub band: usize,
    pub grid: S2Grid,
    // Y values, [point][coeff]
    ylm: Vec<Complex64>,
}

impl SphereTransform {
    /// Coefficients up to `band` on a grid of the same or larger band.
    pub fn new(band: usize, grid: S2Grid) -> Result<Self> {
        if band == 0 || band > grid.band {
            return Err(EntkError::Index(format!("band {band} on a grid of band {}", grid.band)));
        }
        let tables = WignerTables::new(band, &grid.theta)?;
        let nc = s2_coeff_count(band);
        let np = grid.phi.len();
        let mut ylm = vec![Complex64::new(0.0, 0.0); grid.len() * nc];
        for i in 0..grid.len() {
            let (it, ip) = (i / np, i % np);
            let phi = grid.phi[ip];
            for l in 0..band {
                let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
                for m in -(l as i64)..=l as i64 {
                    let d = tables.get(l, m, 0, it);
                    ylm[i * nc + s2_index(l, m)] = Complex64::from_polar(norm * d, m as f64 * phi);
                }
            }
        }
        Ok(SphereTransform { band, grid, ylm })
    }

    pub fn coeff_count(&self) -> usize {
        s2_coeff_count(self.band)
    }

    /// `f̂_lm = ∫ f conj(Y_lm)`, exact when `f` has band ≤ grid band.
    pub fn forward(&self, samples: &[f64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.grid.len() {
            return Err(EntkError::Shape(format!("{} samples on a grid of {}", samples.len(), self.grid.len())));
        }
        let nc = self.coeff_count();
        let mut out = vec![Complex64::new(0.0, 0.0); nc];
        for (i, &f) in samples.iter().enumerate() {
            let w = self.grid.weight(i) * f;
            for (o, y) in out.iter_mut().zip(&self.ylm[i * nc..(i + 1) * nc]) {
                *o += y.conj() * w;
            }
        }
        Ok(out)
    }

    /// `f(x) = Σ f̂_lm Y_lm(x)` on the grid; real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Result<Vec<f64>> {
        let nc = self.coeff_count();
        if coeffs.len() != nc {
            return Err(EntkError::Shape(format!("{} coefficients for band {}", coeffs.len(), self.band)));
        }
        Ok((0..self.grid.len()).map(|i| self.ylm[i * nc..(i + 1) * nc].iter().zip(coeffs).map(|(y, c)| (y * c).re).sum()).collect())
    }
}

/// Coefficients of `x ↦ f(R⁻¹x)`: `f̂'^l_m = Σ_n D^l_{mn}(R) f̂^l_n`.
pub fn rotate_coeffs(coeffs: &[Complex64], band: usize, rot: &Rotation) -> Result<Vec<Complex64>> {
    if coeffs.len() != s2_coeff_count(band) {
        return Err(EntkError::Shape(format!("{} coefficients for band {band}", coeffs.len())));
    }
    let (a, b, g) = matrix_to_euler(rot);
    let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for l in 0..band {
        let li = l as i64;
        for m in -li..=li {
            let mut s = Complex64::new(0.0, 0.0);
            for n in -li..=li {
                s += wigner_big_d(l, m, n, a, b, g)? * coeffs[s2_index(l, n)];
            }
            out[s2_index(l, m)] = s;
        }
    }
    Ok(out)
}

/// Evaluate `Σ f̂_lm Y_lm` at a unit vector.
pub fn evaluate(coeffs: &[Complex64], band: usize, v: &[f64; 3]) -> f64 {
    let theta = v[2].clamp(-1.0, 1.0).acos();
    let phi = v[1].atan2(v[0]);
    spherical_harmonics_at(band, theta, phi).iter().zip(coeffs).map(|(y, c)| (y * c).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::grid::{euler_to_matrix, mat_vec, transpose, SphereQuadrature};
    use std::f64::consts::PI;

    #[test]
    fn index_layout() {
        let mut k = 0;
        for l in 0..5usize {
            for m in -(l as i64)..=l as i64 {
                assert_eq!(s2_index(l, m), k);
                k += 1;
            }
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        let (t, p) = (0.7, 1.3);
        let y10 = spherical_harmonic(1, 0, t, p).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt() * t.cos()).abs() < 1e-14);
        let y11 = spherical_harmonic(1, 1, t, p).unwrap();
        let want = Complex64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * t.sin(), p);
        assert!((y11 - want).norm() < 1e-14);
        let y2m2 = spherical_harmonic(2, -2, t, p).unwrap();
        let want = Complex64::from_polar(0.25 * (15.0 / (2.0 * PI)).sqrt() * t.sin().powi(2), -2.0 * p);
        assert!((y2m2 - want).norm() < 1e-14);
    }

    #[test]
    fn orthonormal_on_both_grids() {
        for q in [SphereQuadrature::GaussLegendre, SphereQuadrature::Equiangular] {
            let tr = SphereTransform::new(4, S2Grid::new(4, q).unwrap()).unwrap();
            let nc = tr.coeff_count();
            for a in 0..nc {
                for b in 0..nc {
                    let s: Complex64 = (0..tr.grid.len()).map(|i| tr.ylm[i * nc + a] * tr.ylm[i * nc + b].conj() * tr.grid.weight(i)).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((s - want).norm() < 1e-12, "{q:?} {a} {b} {s}");
                }
            }
        }
    }

    #[test]
    fn rotation_of_coefficients_matches_rotated_samples() {
        let band = 4;
        let tr = SphereTransform::new(band, S2Grid::new(band, SphereQuadrature::GaussLegendre).unwrap()).unwrap();
        // real band-limited test function
        let f = |v: &[f64; 3]| v[0] * v[1] + 0.3 * v[2].powi(3) - 0.2 * v[0] + 0.5;
        let samples: Vec<f64> = (0..tr.grid.len()).map(|i| f(&tr.grid.unit_vector(i))).collect();
        let c = tr.forward(&samples).unwrap();
        let rot = euler_to_matrix(0.4, 1.1, -0.9);
        let rc = rotate_coeffs(&c, band, &rot).unwrap();
        let rinv = transpose(&rot);
        for i in (0..tr.grid.len()).step_by(3) {
            let x = tr.grid.unit_vector(i);
            let want = f(&mat_vec(&rinv, &x));
            assert!((evaluate(&rc, band, &x) - want).abs() < 1e-12);
        }
    }
}
