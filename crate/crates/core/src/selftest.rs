//! Built-in consistency checks: optimized layers against brute-force group
//! sums and real-space quadrature, transform round trips, nonlinearity closed
//! forms against quadrature, and Wigner symmetries.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::kernel::{apply_nonlinearity, nonlin_map, quadrature_oracle, KernelState, NonlinKind, Support};
use crate::planar::{
    brute_force_gpool, brute_force_lifting_state, brute_force_state_layer, gconv_planar, gpool_planar, input_kernel_planar, lifting_planar,
    FiniteGroup, GridGeom, Image,
};
use crate::so3::{
    gconv_so3, input_kernel_s2, lifting_so3, oracle, s2_coeff_count, so3_coeff_count, wigner_d, FourierKernel, S2Grid, So3Grid,
    So3Transform, SphereQuadrature, SphereSignal, SphereTransform,
};

/// One named check with its worst observed deviation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, max_deviation: f64, tolerance: f64) -> Self {
        Check { name: name.into(), max_deviation, tolerance, pass: max_deviation < tolerance }
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn state_diff(a: &KernelState, b: &KernelState) -> f64 {
    max_abs(&a.k_xy, &b.k_xy).max(max_abs(&a.theta, &b.theta)).max(max_abs(&a.k_xx, &b.k_xx)).max(max_abs(&a.k_yy, &b.k_yy))
}

fn random_image(h: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::new(1, h, h, (0..h * h).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

/// Lifting, group convolutions and pooling on `C₄ ⋉ (Z₄×Z₄)` against explicit
/// sums over the 64 group elements, per layer and pooled, for depths 1 to 3.
/// Returns the largest absolute difference.
pub fn planar_vs_brute_force(trials: usize, seed: u64) -> Result<Check> {
    let geom = GridGeom::square(4, 4)?;
    let group = FiniteGroup::new(geom)?;
    let support = Support::Square(3);
    let offsets = geom.offsets(&support)?;
    let pix: Vec<usize> = offsets.iter().map(|&o| geom.shift(0, o).expect("circular")).collect();
    let elems = group.support_elements(&offsets);
    let devs: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let (f, g) = (random_image(4, &mut rng), random_image(4, &mut rng));
            let s0 = input_kernel_planar(&f, &g, &geom)?;
            let mut worst = 0.0f64;
            for kind in [NonlinKind::Relu, NonlinKind::Erf] {
                for depth in 1..=3 {
                    let mut fast = lifting_planar(&s0, &support, &geom)?;
                    let mut slow = brute_force_lifting_state(&group, &s0, &pix)?;
                    worst = worst.max(state_diff(&fast, &slow));
                    for _ in 1..depth {
                        fast = gconv_planar(&apply_nonlinearity(&fast, kind)?, &support, &geom, true)?;
                        slow = brute_force_state_layer(&group, &apply_nonlinearity(&slow, kind)?, &elems)?;
                        worst = worst.max(state_diff(&fast, &slow));
                    }
                    let pooled = gpool_planar(&fast)?;
                    worst = worst.max((pooled.k_xy[0] - brute_force_gpool(&group, &slow.k_xy)).abs());
                    worst = worst.max((pooled.theta[0] - brute_force_gpool(&group, &slow.theta)).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(Check::new("planar layers vs brute-force group sums", devs.into_iter().fold(0.0, f64::max), 1e-12))
}

fn random_sphere_signal(band: usize, channels: usize, rng: &mut ChaCha8Rng) -> Result<SphereSignal> {
    let tr = SphereTransform::new(band, S2Grid::new(band, SphereQuadrature::GaussLegendre)?)?;
    let coeffs: Vec<Vec<Complex64>> = (0..channels)
        .map(|_| {
            let raw: Vec<Complex64> =
                (0..s2_coeff_count(band)).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            // keep only the real part of the synthesized signal
            tr.forward(&tr.inverse(&raw).expect("length")).expect("length")
        })
        .collect();
    SphereSignal::new(band, coeffs)
}

fn random_fourier_kernel(band: usize, rng: &mut ChaCha8Rng) -> Result<FourierKernel> {
    // real pair field on the grid, so both the lemma and the oracle see a
    // genuine real kernel
    let tr = So3Transform::new(band, So3Grid::new(band, SphereQuadrature::GaussLegendre)?)?;
    let ng = tr.points();
    let field = |rng: &mut ChaCha8Rng| -> Result<Vec<Complex64>> {
        let raw: Vec<Complex64> =
            (0..so3_coeff_count(band).pow(2)).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let (re, _) = tr.double_inverse(&raw)?;
        debug_assert_eq!(re.len(), ng * ng);
        tr.double_forward(&re)
    };
    let mut k = FourierKernel::zeros(band);
    k.k = field(rng)?;
    k.theta = field(rng)?;
    Ok(k)
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().chain(b).map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// Fourier-domain lifting and group convolution at bandlimit 3 against
/// real-space quadrature over rotation pairs, on `kernels` random inputs.
/// Deviations are relative to the largest coefficient magnitude.
pub fn so3_lemmas_vs_quadrature(kernels: usize, seed: u64) -> Result<Check> {
    so3_lemmas_vs_quadrature_with(kernels, seed, &gconv_so3)
}

/// As [`so3_lemmas_vs_quadrature`] with a substitute group convolution.
pub fn so3_lemmas_vs_quadrature_with(
    kernels: usize,
    seed: u64,
    gconv: &(dyn Fn(&FourierKernel) -> Result<FourierKernel> + Sync),
) -> Result<Check> {
    let band = 3;
    let devs: Vec<f64> = (0..kernels as u64)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let (f, g) = (random_sphere_signal(band, 2, &mut rng)?, random_sphere_signal(band, 2, &mut rng)?);
            let mut k0 = input_kernel_s2(&f, &g)?;
            let s: f64 = rng.gen_range(0.2..1.0);
            k0.theta = k0.k.iter().map(|v| v * s).collect();
            let lemma = lifting_so3(&k0)?;
            let quad = if t % 2 == 0 { SphereQuadrature::GaussLegendre } else { SphereQuadrature::Equiangular };
            let direct = oracle::lifting_real_space(&k0, quad)?;
            let mut worst = rel_diff(&lemma.k, &direct.k).max(rel_diff(&lemma.theta, &direct.theta));

            let k = random_fourier_kernel(band, &mut rng)?;
            let lemma = gconv(&k)?;
            let direct = oracle::gconv_real_space(&k, quad)?;
            worst = worst.max(rel_diff(&lemma.k, &direct.k)).max(rel_diff(&lemma.theta, &direct.theta));
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(Check::new("SO(3) Fourier layers vs real-space quadrature", devs.into_iter().fold(0.0, f64::max), 1e-8))
}

/// Forward-after-inverse identity for band-limited real data on S², SO(3)
/// and SO(3)×SO(3), bands `1..=max_band` (pairs up to `max_pair_band`).
pub fn transform_round_trips(max_band: usize, max_pair_band: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let cplx = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    for band in 1..=max_band {
        for q in [SphereQuadrature::GaussLegendre, SphereQuadrature::Equiangular] {
            let tr = SphereTransform::new(band, S2Grid::new(band, q)?)?;
            let c = tr.forward(&tr.inverse(&cplx(s2_coeff_count(band), &mut rng))?)?;
            let back = tr.forward(&tr.inverse(&c)?)?;
            worst = worst.max(rel_diff(&back, &c));

            let t3 = So3Transform::new(band, So3Grid::new(band, q)?)?;
            let (f, _) = t3.inverse(&cplx(so3_coeff_count(band), &mut rng))?;
            let c = t3.forward(&f)?;
            let (f2, imag) = t3.inverse(&c)?;
            worst = worst.max(rel_diff(&t3.forward(&f2)?, &c)).max(imag / c.iter().map(|v| v.norm()).fold(0.0, f64::max));
            worst = worst.max(max_abs(&f, &f2) / f.iter().fold(0.0f64, |m, v| m.max(v.abs())));

            if band <= max_pair_band && q == SphereQuadrature::GaussLegendre {
                let n = so3_coeff_count(band);
                let (field, _) = t3.double_inverse(&cplx(n * n, &mut rng))?;
                let kh = t3.double_forward(&field)?;
                let (field2, _) = t3.double_inverse(&kh)?;
                worst = worst.max(rel_diff(&t3.double_forward(&field2)?, &kh));
            }
        }
    }
    Ok(Check::new("transform round trips", worst, 1e-10))
}

/// Closed-form nonlinearity kernels against the quadrature oracle on `n`
/// random positive semidefinite triples.
pub fn nonlin_vs_oracle(n: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<(NonlinKind, f64, f64, f64)> = (0..n)
        .map(|i| {
            let (a, b): (f64, f64) = (rng.gen_range(0.05..3.0), rng.gen_range(0.05..3.0));
            let rho: f64 = rng.gen_range(-1.0..1.0);
            let kind = if i % 2 == 0 { NonlinKind::Relu } else { NonlinKind::Erf };
            (kind, a, rho * (a * b).sqrt(), b)
        })
        .collect();
    let devs: Vec<f64> = triples
        .par_iter()
        .map(|&(kind, a, c, b)| -> Result<f64> {
            let (k, d) = nonlin_map(kind, a, c, b)?;
            let (ko, dq) = quadrature_oracle(kind, a, c, b, 20)?;
            Ok((k - ko).abs().max((d - dq).abs()))
        })
        .collect::<Result<_>>()?;
    Ok(Check::new("nonlinearity closed forms vs quadrature", devs.into_iter().fold(0.0, f64::max), 1e-8))
}

/// `d^l_{mn}(β) = (−1)^{m−n} d^l_{nm}(β) = d^l_{−n,−m}(β)` and row
/// orthonormality, up to degree 16.
pub fn wigner_symmetries() -> Result<Check> {
    let mut worst = 0.0f64;
    for &beta in &[0.3, 1.1, 2.0, 2.9] {
        for l in 0..=16usize {
            let li = l as i64;
            for m in -li..=li {
                let mut norm = 0.0;
                for n in -li..=li {
                    let d = wigner_d(l, m, n, beta)?;
                    let sign = if (m - n).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    worst = worst.max((d - sign * wigner_d(l, n, m, beta)?).abs());
                    worst = worst.max((d - wigner_d(l, -n, -m, beta)?).abs());
                    norm += d * d;
                }
                worst = worst.max((norm - 1.0).abs());
            }
        }
    }
    Ok(Check::new("Wigner d symmetries and unitarity", worst, 1e-12))
}

/// The full self-test.
pub fn run_all() -> Result<Vec<Check>> {
    Ok(vec![
        wigner_symmetries()?,
        nonlin_vs_oracle(1000, 1)?,
        transform_round_trips(8, 4, 2)?,
        planar_vs_brute_force(5, 3)?,
        so3_lemmas_vs_quadrature(4, 4)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass() {
        assert!(wigner_symmetries().unwrap().pass);
        assert!(nonlin_vs_oracle(50, 0).unwrap().pass);
        assert!(transform_round_trips(3, 2, 0).unwrap().pass);
        assert!(planar_vs_brute_force(1, 0).unwrap().pass);
    }

    #[test]
    fn sign_flip_in_gconv_is_caught() {
        let good = so3_lemmas_vs_quadrature(1, 5).unwrap();
        assert!(good.pass, "{good:?}");
        let flipped = |k: &FourierKernel| -> Result<FourierKernel> {
            let mut out = gconv_so3(k)?;
            out.k.iter_mut().for_each(|v| *v = -*v);
            Ok(out)
        };
        let bad = so3_lemmas_vs_quadrature_with(1, 5, &flipped).unwrap();
        assert!(!bad.pass);
    }
}
