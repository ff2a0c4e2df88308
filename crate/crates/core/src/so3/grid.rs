use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EntkError, Result};
use crate::quadrature::{fejer_first, gauss_legendre};

/// Colatitude quadrature for sphere and rotation grids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereQuadrature {
    /// `band` Gauss–Legendre nodes in `cos θ`.
    #[default]
    GaussLegendre,
    /// `2·band` equiangular nodes `θ_j = π(2j+1)/(4·band)` with Fejér weights.
    Equiangular,
}

impl SphereQuadrature {
    /// Nodes in `θ ∈ (0, π)` and weights for `∫ g(θ) sin θ dθ`.
    pub fn colatitude_rule(&self, band: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            SphereQuadrature::GaussLegendre => {
                let (x, w) = gauss_legendre(band);
                // descending x so θ ascends
                let mut pairs: Vec<(f64, f64)> = x.iter().map(|v| v.acos()).zip(w).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                pairs.into_iter().unzip()
            }
            SphereQuadrature::Equiangular => fejer_first(2 * band),
        }
    }
}

fn check_band(band: usize) -> Result<()> {
    if band == 0 || band > 65 {
        return Err(EntkError::Index(format!("band {band} outside 1..=65")));
    }
    Ok(())
}

/// Product grid on S²; exact for integrands of degree below `2·band`.
#[derive(Clone, Debug, PartialEq)]
pub struct S2Grid {
    pub band: usize,
    pub quadrature: SphereQuadrature,
    pub theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
}

impl S2Grid {
    pub fn new(band: usize, quadrature: SphereQuadrature) -> Result<Self> {
        check_band(band)?;
        let (theta, theta_weights) = quadrature.colatitude_rule(band);
        let np = 2 * band - 1;
        let phi = (0..np).map(|k| 2.0 * PI * k as f64 / np as f64).collect();
        Ok(S2Grid { band, quadrature, theta, theta_weights, phi })
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(θ, φ)` of point `i·Nφ + k`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let np = self.phi.len();
        (self.theta[idx / np], self.phi[idx % np])
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.theta_weights[idx / self.phi.len()] * 2.0 * PI / self.phi.len() as f64
    }

    pub fn unit_vector(&self, idx: usize) -> [f64; 3] {
        let (t, p) = self.point(idx);
        [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
    }
}

/// Product grid on SO(3) in ZYZ Euler angles; exact for products of two
/// band-limited functions of band `band`.
#[derive(Clone, Debug, PartialEq)]
pub struct So3Grid {
    pub band: usize,
    pub quadrature: SphereQuadrature,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_weights: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl So3Grid {
    pub fn new(band: usize, quadrature: SphereQuadrature) -> Result<Self> {
        check_band(band)?;
        let (beta, beta_weights) = quadrature.colatitude_rule(band);
        let na = 2 * band - 1;
        let ang: Vec<f64> = (0..na).map(|k| 2.0 * PI * k as f64 / na as f64).collect();
        Ok(So3Grid { band, quadrature, alpha: ang.clone(), beta, beta_weights, gamma: ang })
    }

    pub fn len(&self) -> usize {
        self.alpha.len() * self.beta.len() * self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(α, β, γ)` of point `(iα·Nβ + iβ)·Nγ + iγ`.
    pub fn point(&self, idx: usize) -> (f64, f64, f64) {
        let (nb, ng) = (self.beta.len(), self.gamma.len());
        (self.alpha[idx / (nb * ng)], self.beta[(idx / ng) % nb], self.gamma[idx % ng])
    }

    /// Haar weight; the weights sum to `8π²`.
    pub fn weight(&self, idx: usize) -> f64 {
        let (nb, ng) = (self.beta.len(), self.gamma.len());
        let wa = 2.0 * PI / self.alpha.len() as f64;
        let wg = 2.0 * PI / ng as f64;
        self.beta_weights[(idx / ng) % nb] * wa * wg
    }
}

/// 3×3 rotation matrix, row-major.
pub type Rotation = [[f64; 3]; 3];

fn rz(a: f64) -> Rotation {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn ry(b: f64) -> Rotation {
    let (s, c) = b.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn mat_mul(a: &Rotation, b: &Rotation) -> Rotation {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat_vec(a: &Rotation, v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

pub fn transpose(a: &Rotation) -> Rotation {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// Active rotation `Rz(α) Ry(β) Rz(γ)`.
pub fn euler_to_matrix(alpha: f64, beta: f64, gamma: f64) -> Rotation {
    mat_mul(&mat_mul(&rz(alpha), &ry(beta)), &rz(gamma))
}

/// ZYZ angles with `β ∈ [0, π]`; at the poles `γ = 0`.
pub fn matrix_to_euler(r: &Rotation) -> (f64, f64, f64) {
    let cb = r[2][2].clamp(-1.0, 1.0);
    let beta = cb.acos();
    let sb = (r[0][2].powi(2) + r[1][2].powi(2)).sqrt();
    if sb > 1e-12 {
        (r[1][2].atan2(r[0][2]), beta, r[2][1].atan2(-r[2][0]))
    } else if cb > 0.0 {
        (r[1][0].atan2(r[0][0]), 0.0, 0.0)
    } else {
        ((-r[1][0]).atan2(-r[0][0]), PI, 0.0)
    }
}
