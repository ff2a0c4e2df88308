use num_complex::Complex64;

use crate::error::{EntkError, Result};

/// Largest degree supported by the recursion.
pub const MAX_DEGREE: usize = 64;

/// Wigner small-d `d^l_{mn}(β)` in the ZYZ convention
/// `D^l_{mn}(α,β,γ) = e^{−imα} d^l_{mn}(β) e^{−inγ}`.
pub fn wigner_d(l: usize, m: i64, n: i64, beta: f64) -> Result<f64> {
    let li = l as i64;
    if m.abs() > li || n.abs() > li {
        return Err(EntkError::Index(format!("|m|, |n| ≤ l violated: l={l}, m={m}, n={n}")));
    }
    if l > MAX_DEGREE {
        return Err(EntkError::Index(format!("degree {l} above {MAX_DEGREE}")));
    }
    Ok(wigner_d_series(l, m, n, beta)[l - m.unsigned_abs().max(n.unsigned_abs()) as usize])
}

/// `d^l_{mn}(β)` for `l = max(|m|,|n|), …, l_max`, by the three-term
/// recursion in `l` seeded with the closed form at the lowest degree.
pub fn wigner_d_series(l_max: usize, m: i64, n: i64, beta: f64) -> Vec<f64> {
    let l0 = m.abs().max(n.abs());
    if (l_max as i64) < l0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(l_max + 1 - l0 as usize);
    let seed = seed_value(l0, m, n, beta);
    out.push(seed);
    let cb = beta.cos();
    let (mf, nf) = (m as f64, n as f64);
    let mut prev = 0.0;
    let mut cur = seed;
    for l in l0..l_max as i64 {
        let lf = l as f64;
        let next = if l == 0 {
            cb * cur
        } else {
            let a = (2.0 * lf + 1.0) * (lf * (lf + 1.0) * cb - mf * nf);
            let b = (lf + 1.0) * ((lf * lf - mf * mf) * (lf * lf - nf * nf)).sqrt();
            let den = lf * (((lf + 1.0).powi(2) - mf * mf) * ((lf + 1.0).powi(2) - nf * nf)).sqrt();
            (a * cur - b * prev) / den
        };
        prev = cur;
        cur = next;
        out.push(next);
    }
    out
}

fn ln_binomial(n: i64, k: i64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

// Closed form at l = max(|m|, |n|).
fn seed_value(l: i64, m: i64, n: i64, beta: f64) -> f64 {
    let c = (0.5 * beta).cos();
    let s = (0.5 * beta).sin();
    // d = sign · sqrt(C(2l, l+k)) · c^a · s^b
    let (sign, k, a, b) = if m.abs() >= n.abs() {
        if m == l {
            (if (l - n) % 2 == 0 { 1.0 } else { -1.0 }, n, l + n, l - n)
        } else {
            (1.0, n, l - n, l + n)
        }
    } else if n == l {
        (1.0, m, l + m, l - m)
    } else {
        (if (l + m) % 2 == 0 { 1.0 } else { -1.0 }, m, l - m, l + m)
    };
    let binom = (0.5 * ln_binomial(2 * l, l + k)).exp();
    sign * binom * c.powi(a as i32) * s.powi(b as i32)
}

/// Full Wigner `D^l_{mn}(α, β, γ)`.
pub fn wigner_big_d(l: usize, m: i64, n: i64, alpha: f64, beta: f64, gamma: f64) -> Result<Complex64> {
    let d = wigner_d(l, m, n, beta)?;
    Ok(Complex64::from_polar(d, -(m as f64) * alpha - (n as f64) * gamma))
}

/// `d^l_{mn}(β_j)` for every `l < band`, `|m|,|n| ≤ l` and node `β_j`.
#[derive(Clone, Debug)]
pub struct WignerTables {
    pub band: usize,
    pub betas: Vec<f64>,
    data: Vec<f64>,
}

impl WignerTables {
    pub fn new(band: usize, betas: &[f64]) -> Result<Self> {
        if band == 0 || band > MAX_DEGREE + 1 {
            return Err(EntkError::Index(format!("band {band} outside 1..={}", MAX_DEGREE + 1)));
        }
        let nb = betas.len();
        let count = so3_coeff_count(band);
        let mut data = vec![0.0; count * nb];
        let lmax = band - 1;
        for m in -(lmax as i64)..=lmax as i64 {
            for n in -(lmax as i64)..=lmax as i64 {
                let l0 = m.abs().max(n.abs()) as usize;
                for (j, &b) in betas.iter().enumerate() {
                    let series = wigner_d_series(lmax, m, n, b);
                    for (k, v) in series.into_iter().enumerate() {
                        data[so3_index(l0 + k, m, n) * nb + j] = v;
                    }
                }
            }
        }
        Ok(WignerTables { band, betas: betas.to_vec(), data })
    }

    pub fn get(&self, l: usize, m: i64, n: i64, j: usize) -> f64 {
        self.data[so3_index(l, m, n) * self.betas.len() + j]
    }
}

/// Number of SO(3) coefficients with `l < band`: `Σ (2l+1)²`.
pub fn so3_coeff_count(band: usize) -> usize {
    (4 * band * band * band - band) / 3
}

/// Flat index of `(l, m, n)`, ordered by `l`, then `m`, then `n`.
pub fn so3_index(l: usize, m: i64, n: i64) -> usize {
    let li = l as i64;
    so3_coeff_count(l) + ((m + li) * (2 * li + 1) + (n + li)) as usize
}

/// Inverse of [`so3_index`].
pub fn so3_lmn(index: usize) -> (usize, i64, i64) {
    let mut l = 0;
    while so3_coeff_count(l + 1) <= index {
        l += 1;
    }
    let r = (index - so3_coeff_count(l)) as i64;
    let w = 2 * l as i64 + 1;
    (l, r / w - l as i64, r % w - l as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // exp(−β J_y) in the |j m⟩ basis via scaled Taylor series; J_y = (J+ − J−)/(2i)
    // so −iβJ_y = −β(J+ − J−)/2 is real.
    fn d_matrix_expm(l: usize, beta: f64) -> Vec<Vec<f64>> {
        let dim = 2 * l + 1;
        let j = l as f64;
        let mut a = vec![vec![0.0; dim]; dim];
        for col in 0..dim {
            let m = col as f64 - j;
            if col + 1 < dim {
                let up = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                a[col + 1][col] += -beta / 2.0 * up;
            }
            if col > 0 {
                let dn = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
                a[col - 1][col] += beta / 2.0 * dn;
            }
        }
        let scale = 64.0;
        let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
            let mut z = vec![vec![0.0; dim]; dim];
            for i in 0..dim {
                for k in 0..dim {
                    for jj in 0..dim {
                        z[i][jj] += x[i][k] * y[k][jj];
                    }
                }
            }
            z
        };
        let small: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect();
        let mut e = vec![vec![0.0; dim]; dim];
        let mut term = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            e[i][i] = 1.0;
            term[i][i] = 1.0;
        }
        for k in 1..30 {
            term = mul(&term, &small);
            for r in term.iter_mut() {
                for v in r.iter_mut() {
                    *v /= k as f64;
                }
            }
            for i in 0..dim {
                for jj in 0..dim {
                    e[i][jj] += term[i][jj];
                }
            }
        }
        for _ in 0..6 {
            e = mul(&e, &e);
        }
        e
    }

    #[test]
    fn low_degree_values() {
        assert_eq!(wigner_d(0, 0, 0, 1.234).unwrap(), 1.0);
        assert!((wigner_d(1, 0, 0, PI / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((wigner_d(1, 1, 1, PI / 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(wigner_d(1, 2, 0, 0.3).is_err());
    }

    #[test]
    fn matches_generator_exponential() {
        for l in 0..=6usize {
            for &beta in &[0.3, PI / 3.0, PI / 2.0, 2.5] {
                let e = d_matrix_expm(l, beta);
                for m in -(l as i64)..=l as i64 {
                    for n in -(l as i64)..=l as i64 {
                        let want = e[(m + l as i64) as usize][(n + l as i64) as usize];
                        let got = wigner_d(l, m, n, beta).unwrap();
                        assert!((got - want).abs() < 1e-12, "l={l} m={m} n={n} β={beta}: {got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn symmetries_and_unitarity_at_high_degree() {
        let beta = 1.1;
        for l in [10usize, 33, 64] {
            let li = l as i64;
            for &(m, n) in &[(0i64, 0i64), (3, -7), (li, 2), (-li, li), (5, 5)] {
                if m.abs() > li || n.abs() > li {
                    continue;
                }
                let a = wigner_d(l, m, n, beta).unwrap();
                let b = wigner_d(l, n, m, beta).unwrap();
                let c = wigner_d(l, -n, -m, beta).unwrap();
                let sign = if (m - n) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((a - sign * b).abs() < 1e-12);
                assert!((a - c).abs() < 1e-12);
            }
            // rows of an orthogonal matrix
            for m in [-li, 0, li / 2] {
                let s: f64 = (-li..=li).map(|n| wigner_d(l, m, n, beta).unwrap().powi(2)).sum();
                assert!((s - 1.0).abs() < 1e-11, "l={l} m={m} norm {s}");
            }
        }
    }

    #[test]
    fn index_round_trip() {
        for i in 0..so3_coeff_count(6) {
            let (l, m, n) = so3_lmn(i);
            assert_eq!(so3_index(l, m, n), i);
        }
        assert_eq!(so3_coeff_count(3), 35);
    }
}
