use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{EntkError, Result};

use super::grid::{So3Grid, SphereQuadrature};
use super::wigner::{so3_coeff_count, so3_index, WignerTables};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Fourier transform on SO(3) restricted to `l < band`, sampled on a grid of
/// band at least `band`.
///
/// `f̂^l_{mn} = ∫ f(R) D^l_{mn}(R) dR` and
/// `f(R) = Σ (2l+1)/(8π²) f̂^l_{mn} conj(D^l_{mn}(R))`.
#[derive(Clone, Debug)]
pub struct So3Transform {
    pub band: usize,
    pub grid: So3Grid,
    // [coeff][point], weights folded in
    fwd: Vec<Complex64>,
    // [point][coeff]
    inv: Vec<Complex64>,
}

impl So3Transform {
    pub fn new(band: usize, grid: So3Grid) -> Result<Self> {
        if band == 0 || band > grid.band {
            return Err(EntkError::Index(format!("band {band} on a grid of band {}", grid.band)));
        }
        let tables = WignerTables::new(band, &grid.beta)?;
        let nc = so3_coeff_count(band);
        let ng = grid.len();
        let mut fwd = vec![C0; nc * ng];
        let mut inv = vec![C0; ng * nc];
        let (nb, ngam) = (grid.beta.len(), grid.gamma.len());
        for a in 0..ng {
            let (al, _, ga) = grid.point(a);
            let jb = (a / ngam) % nb;
            let w = grid.weight(a);
            for l in 0..band {
                let li = l as i64;
                let scale = (2 * l + 1) as f64 / (8.0 * PI * PI);
                for m in -li..=li {
                    for n in -li..=li {
                        let d = Complex64::from_polar(tables.get(l, m, n, jb), -(m as f64) * al - (n as f64) * ga);
                        let i = so3_index(l, m, n);
                        fwd[i * ng + a] = d * w;
                        inv[a * nc + i] = d.conj() * scale;
                    }
                }
            }
        }
        Ok(So3Transform { band, grid, fwd, inv })
    }

    pub fn coeff_count(&self) -> usize {
        so3_coeff_count(self.band)
    }

    pub fn points(&self) -> usize {
        self.grid.len()
    }

    pub fn forward(&self, f: &[f64]) -> Result<Vec<Complex64>> {
        let ng = self.points();
        if f.len() != ng {
            return Err(EntkError::Shape(format!("{} samples on a grid of {ng}", f.len())));
        }
        Ok((0..self.coeff_count()).map(|i| self.fwd[i * ng..(i + 1) * ng].iter().zip(f).map(|(d, v)| d * v).sum()).collect())
    }

    /// Synthesis on the grid; returns the real part and the largest
    /// imaginary part seen.
    pub fn inverse(&self, c: &[Complex64]) -> Result<(Vec<f64>, f64)> {
        let nc = self.coeff_count();
        if c.len() != nc {
            return Err(EntkError::Shape(format!("{} coefficients for band {}", c.len(), self.band)));
        }
        let mut imag: f64 = 0.0;
        let out = (0..self.points())
            .map(|a| {
                let s: Complex64 = self.inv[a * nc..(a + 1) * nc].iter().zip(c).map(|(d, v)| d * v).sum();
                imag = imag.max(s.im.abs());
                s.re
            })
            .collect();
        Ok((out, imag))
    }

    /// `K̂_{ij} = ∫∫ K(R, R') D_i(R) D_j(R')`.
    pub fn double_forward(&self, k: &[f64]) -> Result<Vec<Complex64>> {
        let (nc, ng) = (self.coeff_count(), self.points());
        if k.len() != ng * ng {
            return Err(EntkError::Shape(format!("pair field of length {} on {ng} points", k.len())));
        }
        // T = F K  (nc × ng)
        let mut t = vec![C0; nc * ng];
        for i in 0..nc {
            let frow = &self.fwd[i * ng..(i + 1) * ng];
            let trow = &mut t[i * ng..(i + 1) * ng];
            for (a, f) in frow.iter().enumerate() {
                let krow = &k[a * ng..(a + 1) * ng];
                for (tv, kv) in trow.iter_mut().zip(krow) {
                    *tv += f * kv;
                }
            }
        }
        // K̂ = T Fᵀ
        let mut out = vec![C0; nc * nc];
        for i in 0..nc {
            let trow = &t[i * ng..(i + 1) * ng];
            for j in 0..nc {
                out[i * nc + j] = trow.iter().zip(&self.fwd[j * ng..(j + 1) * ng]).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    /// Pair synthesis on the grid; real part and largest imaginary part.
    pub fn double_inverse(&self, kh: &[Complex64]) -> Result<(Vec<f64>, f64)> {
        let (nc, ng) = (self.coeff_count(), self.points());
        if kh.len() != nc * nc {
            return Err(EntkError::Shape(format!("{} coefficients, expected {}", kh.len(), nc * nc)));
        }
        // T = B K̂  (ng × nc)
        let mut t = vec![C0; ng * nc];
        for a in 0..ng {
            let brow = &self.inv[a * nc..(a + 1) * nc];
            let trow = &mut t[a * nc..(a + 1) * nc];
            for (i, b) in brow.iter().enumerate() {
                for (tv, kv) in trow.iter_mut().zip(&kh[i * nc..(i + 1) * nc]) {
                    *tv += b * kv;
                }
            }
        }
        let mut imag: f64 = 0.0;
        let mut out = vec![0.0; ng * ng];
        for a in 0..ng {
            let trow = &t[a * nc..(a + 1) * nc];
            for b in 0..ng {
                let s: Complex64 = trow.iter().zip(&self.inv[b * nc..(b + 1) * nc]).map(|(x, y)| x * y).sum();
                imag = imag.max(s.im.abs());
                out[a * ng + b] = s.re;
            }
        }
        Ok((out, imag))
    }
}

type CacheKey = (usize, usize, SphereQuadrature);

/// Shared, immutable transform for `(band, grid band, quadrature)`.
pub fn cached_transform(band: usize, grid_band: usize, quadrature: SphereQuadrature) -> Result<Arc<So3Transform>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<So3Transform>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (band, grid_band, quadrature);
    if let Some(t) = cache.lock().expect("transform cache").get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(So3Transform::new(band, So3Grid::new(grid_band, quadrature)?)?);
    cache.lock().expect("transform cache").insert(key, t.clone());
    Ok(t)
}
