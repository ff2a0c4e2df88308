//! Real-space reference computations for the Fourier-domain layers. They
//! integrate over explicit rotations and never use the coefficient lemmas.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;

use super::fourier::{FourierKernel, SphereKernel};
use super::grid::{euler_to_matrix, mat_mul, mat_vec, matrix_to_euler, Rotation, S2Grid, So3Grid, SphereQuadrature};
use super::sht::{s2_coeff_count, spherical_harmonics_at};
use super::transform::So3Transform;
use super::wigner::{so3_coeff_count, so3_index, wigner_big_d};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Synthesis weights `(2l+1)/(8π²) conj(D_i(R))` at an arbitrary rotation.
pub fn synthesis_vector(band: usize, rot: &Rotation) -> Result<Vec<Complex64>> {
    let (a, b, g) = matrix_to_euler(rot);
    let mut out = vec![C0; so3_coeff_count(band)];
    for l in 0..band {
        let li = l as i64;
        let s = (2 * l + 1) as f64 / (8.0 * PI * PI);
        for m in -li..=li {
            for n in -li..=li {
                out[so3_index(l, m, n)] = wigner_big_d(l, m, n, a, b, g)?.conj() * s;
            }
        }
    }
    Ok(out)
}

/// `K(R, R')` of a coefficient block at two arbitrary rotations.
pub fn evaluate_pair(kh: &[Complex64], band: usize, r: &Rotation, rp: &Rotation) -> Result<f64> {
    let (u, v) = (synthesis_vector(band, r)?, synthesis_vector(band, rp)?);
    let n = u.len();
    let mut s = C0;
    for i in 0..n {
        let row: Complex64 = kh[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum();
        s += u[i] * row;
    }
    Ok(s.re)
}

fn grid_rotations(grid: &So3Grid) -> Vec<Rotation> {
    (0..grid.len())
        .map(|a| {
            let (x, y, z) = grid.point(a);
            euler_to_matrix(x, y, z)
        })
        .collect()
}

// Σ_j w_j uᵀ K̂ v over precomputed per-node vectors.
fn bilinear_field(kh: &[Complex64], left: &[Vec<Vec<Complex64>>], right: &[Vec<Vec<Complex64>>], w: &[f64]) -> Vec<f64> {
    let n = left[0][0].len();
    // U = K̂ᵀ u
    let proj: Vec<Vec<Vec<Complex64>>> = left
        .iter()
        .map(|row| {
            row.iter()
                .map(|u| {
                    let mut out = vec![C0; n];
                    for (i, ui) in u.iter().enumerate() {
                        for (o, k) in out.iter_mut().zip(&kh[i * n..(i + 1) * n]) {
                            *o += ui * k;
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();
    let ng = left.len();
    let mut out = vec![0.0; ng * ng];
    for a in 0..ng {
        for b in 0..ng {
            let mut s = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let d: Complex64 = proj[a][j].iter().zip(&right[b][j]).map(|(x, y)| x * y).sum();
                s += wj * d.re;
            }
            out[a * ng + b] = s;
        }
    }
    out
}

/// Lifting by direct quadrature of `(1/4π) ∫ K⁰(Rx, R'x) dx` on a grid of
/// rotation pairs, followed by a pair Fourier transform.
pub fn lifting_real_space(k0: &SphereKernel, quadrature: SphereQuadrature) -> Result<FourierKernel> {
    let band = k0.band;
    let s2 = S2Grid::new(band, quadrature)?;
    let tr = So3Transform::new(band, So3Grid::new(band, quadrature)?)?;
    let rots = grid_rotations(&tr.grid);
    let ylm: Vec<Vec<Vec<Complex64>>> = rots
        .iter()
        .map(|r| {
            (0..s2.len())
                .map(|j| {
                    let y = mat_vec(r, &s2.unit_vector(j));
                    spherical_harmonics_at(band, y[2].clamp(-1.0, 1.0).acos(), y[1].atan2(y[0]))
                })
                .collect()
        })
        .collect();
    debug_assert_eq!(ylm[0][0].len(), s2_coeff_count(band));
    let w: Vec<f64> = (0..s2.len()).map(|j| s2.weight(j) / (4.0 * PI)).collect();
    let kf = bilinear_field(&k0.k, &ylm, &ylm, &w);
    let tf = bilinear_field(&k0.theta, &ylm, &ylm, &w);
    let k = tr.double_forward(&kf)?;
    let t = tr.double_forward(&tf)?;
    let theta = k.iter().zip(&t).map(|(a, b)| a + b).collect();
    Ok(FourierKernel { band, k, theta, invariant: false, diag_x: k0.diag_x, diag_y: k0.diag_y })
}

/// Global group convolution by direct quadrature of
/// `(1/8π²) ∫ K(RS, R'S) dS` on a grid of rotation pairs.
pub fn gconv_real_space(k: &FourierKernel, quadrature: SphereQuadrature) -> Result<FourierKernel> {
    let band = k.band;
    let tr = So3Transform::new(band, So3Grid::new(band, quadrature)?)?;
    let rots = grid_rotations(&tr.grid);
    let vecs: Vec<Vec<Vec<Complex64>>> = rots
        .iter()
        .map(|r| rots.iter().map(|s| synthesis_vector(band, &mat_mul(r, s))).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let w: Vec<f64> = (0..tr.grid.len()).map(|c| tr.grid.weight(c) / (8.0 * PI * PI)).collect();
    let kf = bilinear_field(&k.k, &vecs, &vecs, &w);
    let tf = bilinear_field(&k.theta, &vecs, &vecs, &w);
    let kk = tr.double_forward(&kf)?;
    let t = tr.double_forward(&tf)?;
    let theta = kk.iter().zip(&t).map(|(a, b)| a + b).collect();
    Ok(FourierKernel { band, k: kk, theta, invariant: false, diag_x: k.diag_x, diag_y: k.diag_y })
}
