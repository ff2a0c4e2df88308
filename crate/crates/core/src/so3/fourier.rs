use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{EntkError, Result};
use crate::kernel::{nonlin_map, nonlin_map_clamped, KernelState, NonlinKind};

use super::sht::{s2_coeff_count, s2_index, SphereTransform};
use super::transform::So3Transform;
use super::wigner::{so3_coeff_count, so3_index};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const EIGHT_PI2: f64 = 8.0 * PI * PI;

/// Multichannel signal on S² held as harmonic coefficients (`l < band`).
#[derive(Clone, Debug, PartialEq)]
pub struct SphereSignal {
    pub band: usize,
    pub coeffs: Vec<Vec<Complex64>>,
}

impl SphereSignal {
    pub fn new(band: usize, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(EntkError::Shape("signal without channels".into()));
        }
        for c in &coeffs {
            if c.len() != s2_coeff_count(band) {
                return Err(EntkError::Shape(format!("{} coefficients for band {band}", c.len())));
            }
        }
        Ok(SphereSignal { band, coeffs })
    }

    /// Harmonic analysis of grid samples, one vector per channel.
    pub fn from_samples(samples: &[Vec<f64>], tr: &SphereTransform) -> Result<Self> {
        let coeffs = samples.iter().map(|s| tr.forward(s)).collect::<Result<Vec<_>>>()?;
        Self::new(tr.band, coeffs)
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    /// Drop every degree `l ≥ band`.
    pub fn truncated(&self, band: usize) -> Result<Self> {
        if band > self.band {
            return Err(EntkError::Index(format!("cannot raise band {} to {band}", self.band)));
        }
        let n = s2_coeff_count(band);
        Ok(SphereSignal { band, coeffs: self.coeffs.iter().map(|c| c[..n].to_vec()).collect() })
    }
}

/// Pair kernel on S²×S² in harmonic coefficients:
/// `K(x, x') = Σ K̂_{(lm),(l'm')} Y_lm(x) Y_l'm'(x')`. The diagonal is kept as
/// its sphere average.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereKernel {
    pub band: usize,
    pub k: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    pub diag_x: f64,
    pub diag_y: f64,
}

/// Pair kernel on SO(3)×SO(3) in Wigner coefficients,
/// `K̂_{ij} = ∫∫ K(R, R') D_i(R) D_j(R')` with `i = (l, m, n)`.
///
/// Under global filters the diagonal `K(R, R)` is constant and stored as a
/// scalar. `invariant` records that `K(RS, R'S) = K(R, R')` holds
/// structurally, which enables the single-grid nonlinearity.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierKernel {
    pub band: usize,
    pub k: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    pub invariant: bool,
    pub diag_x: f64,
    pub diag_y: f64,
}

impl FourierKernel {
    pub fn zeros(band: usize) -> Self {
        let n = so3_coeff_count(band);
        FourierKernel { band, k: vec![C0; n * n], theta: vec![C0; n * n], invariant: false, diag_x: 0.0, diag_y: 0.0 }
    }

    pub fn dim(&self) -> usize {
        so3_coeff_count(self.band)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.k[i * self.dim() + j]
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        if self.k.len() != n * n || self.theta.len() != n * n {
            return Err(EntkError::Shape(format!("coefficient block of band {} has wrong size", self.band)));
        }
        Ok(())
    }
}

/// `K̂⁰ = (1/n_in) Σ_c f̂_c f̂'_cᵀ`, `Θ⁰ = 0`.
pub fn input_kernel_s2(f: &SphereSignal, g: &SphereSignal) -> Result<SphereKernel> {
    if f.band != g.band || f.channels() != g.channels() {
        return Err(EntkError::Shape("sphere signals differ in band or channels".into()));
    }
    let n = s2_coeff_count(f.band);
    let inv = 1.0 / f.channels() as f64;
    let mut k = vec![C0; n * n];
    for (a, b) in f.coeffs.iter().zip(&g.coeffs) {
        for i in 0..n {
            let ai = a[i] * inv;
            for (dst, bj) in k[i * n..(i + 1) * n].iter_mut().zip(b) {
                *dst += ai * bj;
            }
        }
    }
    let power = |s: &SphereSignal| -> f64 { s.coeffs.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum::<f64>() * inv / (4.0 * PI) };
    Ok(SphereKernel { band: f.band, k, theta: vec![C0; n * n], diag_x: power(f), diag_y: power(g) })
}

fn lift_block(k0: &[Complex64], band: usize) -> Vec<Complex64> {
    let n0 = s2_coeff_count(band);
    let n = so3_coeff_count(band);
    let mut out = vec![C0; n * n];
    for l in 0..band {
        let li = l as i64;
        let c = EIGHT_PI2 / (2 * l + 1) as f64;
        let c = c * c / (4.0 * PI);
        for m in -li..=li {
            for mp in -li..=li {
                let v = k0[s2_index(l, m) * n0 + s2_index(l, mp)] * c;
                for nn in -li..=li {
                    let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
                    out[so3_index(l, m, nn) * n + so3_index(l, mp, -nn)] = v * sign;
                }
            }
        }
    }
    out
}

/// Global lifting `K¹(R, R') = (1/4π) ∫ K⁰(Rx, R'x) dx`, in coefficients
/// `K̂¹^{ll}_{mn, m'(−n)} = (1/4π)(8π²/(2l+1))² (−1)ⁿ K̂⁰^{ll}_{m m'}`.
pub fn lifting_so3(k0: &SphereKernel) -> Result<FourierKernel> {
    let n0 = s2_coeff_count(k0.band);
    if k0.k.len() != n0 * n0 || k0.theta.len() != n0 * n0 {
        return Err(EntkError::Shape("sphere kernel block has wrong size".into()));
    }
    let k = lift_block(&k0.k, k0.band);
    let t = lift_block(&k0.theta, k0.band);
    let theta = k.iter().zip(&t).map(|(a, b)| a + b).collect();
    Ok(FourierKernel { band: k0.band, k, theta, invariant: true, diag_x: k0.diag_x, diag_y: k0.diag_y })
}

fn gconv_block(k: &[Complex64], band: usize) -> Vec<Complex64> {
    let n = so3_coeff_count(band);
    let mut out = vec![C0; n * n];
    for l in 0..band {
        let li = l as i64;
        let inv = 1.0 / (2 * l + 1) as f64;
        for m in -li..=li {
            for mp in -li..=li {
                // Σ_p (−1)^{−p} K̂_{mp, m'(−p)}
                let mut s = C0;
                for p in -li..=li {
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    s += k[so3_index(l, m, p) * n + so3_index(l, mp, -p)] * sign;
                }
                for nn in -li..=li {
                    let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
                    out[so3_index(l, m, nn) * n + so3_index(l, mp, -nn)] = s * (sign * inv);
                }
            }
        }
    }
    out
}

/// Global group convolution `K'(R, R') = (1/8π²) ∫ K(RS, R'S) dS`:
/// `K̂'^{ll}_{mn, m'(−n)} = (1/(2l+1)) Σ_p (−1)^{n−p} K̂^{ll}_{mp, m'(−p)}`.
pub fn gconv_so3(k: &FourierKernel) -> Result<FourierKernel> {
    k.check()?;
    let kk = gconv_block(&k.k, k.band);
    let t = gconv_block(&k.theta, k.band);
    let theta = kk.iter().zip(&t).map(|(a, b)| a + b).collect();
    Ok(FourierKernel { band: k.band, k: kk, theta, invariant: true, diag_x: k.diag_x, diag_y: k.diag_y })
}

/// Group pooling `(1/(8π²)²) ∫∫ K = K̂^{00}/(8π²)²`. The diagonal entries of
/// the returned scalar state are the (constant) unpooled diagonals.
pub fn gpool_so3(k: &FourierKernel) -> Result<KernelState> {
    k.check()?;
    let scale = 1.0 / (EIGHT_PI2 * EIGHT_PI2);
    let (kv, tv) = (k.k[0] * scale, k.theta[0] * scale);
    let tol = 1e-9 * (1.0 + kv.re.abs() + tv.re.abs());
    if kv.im.abs() > tol || tv.im.abs() > tol {
        return Err(EntkError::Reality(kv.im.abs().max(tv.im.abs())));
    }
    Ok(KernelState::scalar(kv.re, k.diag_x, k.diag_y, tv.re))
}

/// Keep degrees `l < band` (a leading block in the coefficient order).
pub fn bandlimit_truncate(k: &FourierKernel, band: usize) -> Result<FourierKernel> {
    k.check()?;
    if band == 0 || band > k.band {
        return Err(EntkError::Index(format!("cannot truncate band {} to {band}", k.band)));
    }
    let (n, m) = (k.dim(), so3_coeff_count(band));
    let cut = |v: &[Complex64]| -> Vec<Complex64> { (0..m).flat_map(|i| v[i * n..i * n + m].to_vec()).collect() };
    Ok(FourierKernel { band, k: cut(&k.k), theta: cut(&k.theta), ..*k })
}

fn check_work(k: &FourierKernel, work: &So3Transform) -> Result<()> {
    k.check()?;
    if work.band != k.band {
        return Err(EntkError::Index(format!("kernel band {} with transform band {}", k.band, work.band)));
    }
    if work.grid.band < 2 * k.band {
        return Err(EntkError::Index(format!("work grid band {} below twice the kernel band {}", work.grid.band, k.band)));
    }
    Ok(())
}

fn reality_tol(values: &[f64]) -> f64 {
    1e-8 * (1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

/// Pointwise nonlinearity on the full pair grid: synthesize `K(R_a, R_b)`,
/// map, and re-analyse with truncation to the kernel band.
pub fn nonlinearity_so3(k: &FourierKernel, kind: NonlinKind, work: &So3Transform) -> Result<FourierKernel> {
    check_work(k, work)?;
    let (kv, ki) = work.double_inverse(&k.k)?;
    let (tv, ti) = work.double_inverse(&k.theta)?;
    let tol = reality_tol(&kv).max(reality_tol(&tv));
    if ki > tol || ti > tol {
        return Err(EntkError::Reality(ki.max(ti)));
    }
    let mut nk = Vec::with_capacity(kv.len());
    let mut nt = Vec::with_capacity(kv.len());
    for (kk, tt) in kv.iter().zip(&tv) {
        let (a, d) = nonlin_map_clamped(kind, k.diag_x, *kk, k.diag_y)?;
        nk.push(a);
        nt.push(d * tt);
    }
    Ok(FourierKernel {
        band: k.band,
        k: work.double_forward(&nk)?,
        theta: work.double_forward(&nt)?,
        invariant: false,
        diag_x: nonlin_map(kind, k.diag_x, k.diag_x, k.diag_x)?.0,
        diag_y: nonlin_map(kind, k.diag_y, k.diag_y, k.diag_y)?.0,
    })
}

// φ̂^l_{pq} = ((2l+1)/8π²) K̂_{(l,−q,−q),(l,p,q)}, so that φ(Q) = K(I, Q).
fn profile_coeffs(k: &[Complex64], band: usize) -> Vec<Complex64> {
    let n = so3_coeff_count(band);
    let mut out = vec![C0; n];
    for l in 0..band {
        let li = l as i64;
        let c = (2 * l + 1) as f64 / EIGHT_PI2;
        for p in -li..=li {
            for q in -li..=li {
                out[so3_index(l, p, q)] = k[so3_index(l, -q, -q) * n + so3_index(l, p, q)] * c;
            }
        }
    }
    out
}

// Inverse of `profile_coeffs` for a right-invariant kernel:
// K̂_{mn, m'(−n)} = (8π²/(2l+1)) (−1)^{m+n} ψ̂^l_{m',−m}.
fn invariant_from_profile(psi: &[Complex64], band: usize) -> Vec<Complex64> {
    let n = so3_coeff_count(band);
    let mut out = vec![C0; n * n];
    for l in 0..band {
        let li = l as i64;
        let c = EIGHT_PI2 / (2 * l + 1) as f64;
        for m in -li..=li {
            for mp in -li..=li {
                let v = psi[so3_index(l, mp, -m)] * c;
                for nn in -li..=li {
                    let sign = if (m + nn) % 2 == 0 { 1.0 } else { -1.0 };
                    out[so3_index(l, m, nn) * n + so3_index(l, mp, -nn)] = v * sign;
                }
            }
        }
    }
    out
}

/// Nonlinearity of a right-invariant kernel `K(R, R') = φ(R'R⁻¹)`, computed
/// on a single SO(3) grid through the profile `φ`.
pub fn nonlinearity_so3_invariant(k: &FourierKernel, kind: NonlinKind, work: &So3Transform) -> Result<FourierKernel> {
    check_work(k, work)?;
    if !k.invariant {
        return Err(EntkError::Unsupported("kernel is not marked right-invariant".into()));
    }
    let (phi, pi) = work.inverse(&profile_coeffs(&k.k, k.band))?;
    let (th, ti) = work.inverse(&profile_coeffs(&k.theta, k.band))?;
    let tol = reality_tol(&phi).max(reality_tol(&th));
    if pi > tol || ti > tol {
        return Err(EntkError::Reality(pi.max(ti)));
    }
    let mut psi = Vec::with_capacity(phi.len());
    let mut tpsi = Vec::with_capacity(phi.len());
    for (p, t) in phi.iter().zip(&th) {
        let (a, d) = nonlin_map_clamped(kind, k.diag_x, *p, k.diag_y)?;
        psi.push(a);
        tpsi.push(d * t);
    }
    Ok(FourierKernel {
        band: k.band,
        k: invariant_from_profile(&work.forward(&psi)?, k.band),
        theta: invariant_from_profile(&work.forward(&tpsi)?, k.band),
        invariant: true,
        diag_x: nonlin_map(kind, k.diag_x, k.diag_x, k.diag_x)?.0,
        diag_y: nonlin_map(kind, k.diag_y, k.diag_y, k.diag_y)?.0,
    })
}

/// Largest coefficient outside the right-invariant pattern
/// `l = l'`, `n' = −n`, `(−1)^n K̂_{mn,m'(−n)}` independent of `n`.
pub fn invariance_defect(k: &FourierKernel) -> f64 {
    let n = k.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (l, m, nn) = super::wigner::so3_lmn(i);
        for j in 0..n {
            let (lp, mp, np) = super::wigner::so3_lmn(j);
            let v = k.k[i * n + j];
            if l != lp || np != -nn {
                worst = worst.max(v.norm());
            } else {
                let s0 = if nn % 2 == 0 { 1.0 } else { -1.0 };
                let base = k.k[so3_index(l, m, 0) * n + so3_index(l, mp, 0)];
                worst = worst.max((v * s0 - base).norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::grid::{So3Grid, SphereQuadrature};

    fn random_kernel(band: usize, seed: u64) -> FourierKernel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut k = FourierKernel::zeros(band);
        for v in k.k.iter_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        k
    }

    #[test]
    fn gconv_is_idempotent_and_invariant() {
        let k = random_kernel(3, 1);
        let g1 = gconv_so3(&k).unwrap();
        let g2 = gconv_so3(&g1).unwrap();
        assert!(invariance_defect(&g1) < 1e-12);
        for (a, b) in g1.k.iter().zip(&g2.k) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn truncation_keeps_leading_block() {
        let k = random_kernel(3, 2);
        let t = bandlimit_truncate(&k, 2).unwrap();
        assert_eq!(t.k.len(), 100);
        assert_eq!(t.get(3, 7), k.get(3, 7));
        assert!(bandlimit_truncate(&k, 4).is_err());
    }

    #[test]
    fn profile_round_trip() {
        let k = gconv_so3(&random_kernel(3, 3)).unwrap();
        let back = invariant_from_profile(&profile_coeffs(&k.k, 3), 3);
        for (a, b) in k.k.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn work_grid_must_oversample() {
        let k = FourierKernel { invariant: true, diag_x: 1.0, diag_y: 1.0, ..FourierKernel::zeros(2) };
        let t = So3Transform::new(2, So3Grid::new(3, SphereQuadrature::GaussLegendre).unwrap()).unwrap();
        assert!(nonlinearity_so3(&k, NonlinKind::Erf, &t).is_err());
    }
}
