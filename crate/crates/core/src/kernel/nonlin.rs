use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EntkError, Result};
use crate::quadrature::gauss_legendre;

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinKind {
    Relu,
    Erf,
}

impl NonlinKind {
    pub fn name(self) -> &'static str {
        match self {
            NonlinKind::Relu => "relu",
            NonlinKind::Erf => "erf",
        }
    }
}

impl std::str::FromStr for NonlinKind {
    type Err = EntkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(NonlinKind::Relu),
            "erf" => Ok(NonlinKind::Erf),
            _ => Err(EntkError::Argument(format!("unknown nonlinearity '{s}'"))),
        }
    }
}

/// Absolute slack for Cauchy–Schwarz and sign checks.
pub const PSD_SLACK: f64 = 1e-12;

fn check_triple(k11: f64, k12: f64, k22: f64) -> Result<(f64, f64, f64)> {
    if !(k11.is_finite() && k12.is_finite() && k22.is_finite()) {
        return Err(EntkError::InvalidKernel(format!("non-finite triple ({k11}, {k12}, {k22})")));
    }
    if k11 < -PSD_SLACK || k22 < -PSD_SLACK {
        return Err(EntkError::InvalidKernel(format!("negative diagonal ({k11}, {k22})")));
    }
    let k11 = k11.max(0.0);
    let k22 = k22.max(0.0);
    let bound = (k11 * k22).sqrt();
    if k12.abs() > bound + PSD_SLACK * bound.max(1.0) {
        return Err(EntkError::InvalidKernel(format!("|k12| = {} exceeds sqrt(k11 k22) = {}", k12.abs(), bound)));
    }
    Ok((k11, k12.clamp(-bound, bound), k22))
}

/// Closed-form Gaussian expectations `(E[σ(u)σ(v)], E[σ'(u)σ'(v)])` for
/// `(u, v) ~ N(0, [[k11, k12], [k12, k22]])`.
pub fn nonlin_map(kind: NonlinKind, k11: f64, k12: f64, k22: f64) -> Result<(f64, f64)> {
    let (k11, k12, k22) = check_triple(k11, k12, k22)?;
    Ok(closed_form(kind, k11, k12, k22))
}

/// Like [`nonlin_map`] but clamps any Cauchy–Schwarz violation instead of
/// failing. Used where kernels come out of truncated expansions.
pub fn nonlin_map_clamped(kind: NonlinKind, k11: f64, k12: f64, k22: f64) -> Result<(f64, f64)> {
    if !(k11.is_finite() && k12.is_finite() && k22.is_finite()) {
        return Err(EntkError::InvalidKernel(format!("non-finite triple ({k11}, {k12}, {k22})")));
    }
    let k11 = k11.max(0.0);
    let k22 = k22.max(0.0);
    let bound = (k11 * k22).sqrt();
    Ok(closed_form(kind, k11, k12.clamp(-bound, bound), k22))
}

fn closed_form(kind: NonlinKind, k11: f64, k12: f64, k22: f64) -> (f64, f64) {
    match kind {
        NonlinKind::Relu => {
            let norm = (k11 * k22).sqrt();
            if norm == 0.0 {
                // limit along k12 = 0: independent half-planes
                return (0.0, 0.25);
            }
            let c = (k12 / norm).clamp(-1.0, 1.0);
            let theta = c.acos();
            let s = (1.0 - c * c).max(0.0).sqrt();
            let k = norm / (2.0 * PI) * (s + (PI - theta) * c);
            (k, (PI - theta) / (2.0 * PI))
        }
        NonlinKind::Erf => {
            let a = 1.0 + 2.0 * k11;
            let b = 1.0 + 2.0 * k22;
            let arg = (2.0 * k12 / (a * b).sqrt()).clamp(-1.0, 1.0);
            let k = 2.0 / PI * arg.asin();
            let det = a * b - 4.0 * k12 * k12;
            (k, 4.0 / PI / det.sqrt())
        }
    }
}

/// Quadrature estimate of the same expectations, independent of the closed
/// forms. erf uses a tensor-product rule against the standard normal after
/// factoring Λ: composite Gauss–Legendre with `order` nodes per panel on
/// |z| ≤ 8.5, since a fixed Hermite rule under-resolves erf' at large variance.
/// ReLU uses the same factorization, then integrates in polar coordinates:
/// positive homogeneity makes the radial part an elementary moment and the
/// angular part is split at the kinks of the integrand and integrated with
/// Gauss–Legendre on each piece. A plain tensor rule converges only
/// algebraically across the kink and cannot reach 1e-8.
pub fn quadrature_oracle(kind: NonlinKind, k11: f64, k12: f64, k22: f64, order: usize) -> Result<(f64, f64)> {
    if order < 20 {
        return Err(EntkError::Argument(format!("quadrature order {order} < 20")));
    }
    let (k11, k12, k22) = check_triple(k11, k12, k22)?;
    let (l11, l21, l22) = cholesky2(k11, k12, k22);
    match kind {
        NonlinKind::Erf => {
            // erf'(u) has width ~1/l in z, so panels shrink with the scale
            let scale = l11.max(l21.abs() + l22).max(1.0);
            let panels = 24 * (scale / 3f64.sqrt()).ceil() as usize;
            let (z, wz) = composite_normal_rule(order, panels);
            let (mut k, mut kd) = (0.0, 0.0);
            for (&z1, &w1) in z.iter().zip(&wz) {
                let u = l11 * z1;
                let (mut rk, mut rd) = (0.0, 0.0);
                for (&z2, &w2) in z.iter().zip(&wz) {
                    let v = l21 * z1 + l22 * z2;
                    rk += w2 * erf(v);
                    rd += w2 * derf(v);
                }
                k += w1 * erf(u) * rk;
                kd += w1 * derf(u) * rd;
            }
            Ok((k, kd))
        }
        NonlinKind::Relu => {
            // u = r a(φ), v = r b(φ) with a = l11 cos φ, b = l21 cos φ + l22 sin φ.
            let mut cuts = vec![0.0, 2.0 * PI];
            for (p, q) in [(l11, 0.0), (l21, l22)] {
                if p != 0.0 || q != 0.0 {
                    // zeros of p cos φ + q sin φ
                    let phi0 = q.atan2(p);
                    for z in [phi0 + PI / 2.0, phi0 - PI / 2.0, phi0 + 1.5 * PI] {
                        let z = z.rem_euclid(2.0 * PI);
                        cuts.push(z);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            let (x, w) = gauss_legendre(order);
            let (mut ang_k, mut ang_d) = (0.0, 0.0);
            for seg in cuts.windows(2) {
                let (lo, hi) = (seg[0], seg[1]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for i in 0..order {
                    let phi = mid + half * x[i];
                    let a = l11 * phi.cos();
                    let b = l21 * phi.cos() + l22 * phi.sin();
                    if a > 0.0 && b > 0.0 {
                        ang_k += half * w[i] * a * b;
                        ang_d += half * w[i];
                    }
                }
            }
            // ∫ r³ e^{-r²/2} dr = 2, ∫ r e^{-r²/2} dr = 1
            Ok((2.0 * ang_k / (2.0 * PI), ang_d / (2.0 * PI)))
        }
    }
}

/// Nodes and weights for ∫ f(z) φ(z) dz, φ the standard normal density.
fn composite_normal_rule(order: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    const CUT: f64 = 8.5;
    let (x, w) = gauss_legendre(order);
    let h = 2.0 * CUT / panels as f64;
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut z = Vec::with_capacity(order * panels);
    let mut wz = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let mid = -CUT + h * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            let zi = mid + 0.5 * h * xi;
            z.push(zi);
            wz.push(0.5 * h * wi * norm * (-0.5 * zi * zi).exp());
        }
    }
    (z, wz)
}

fn cholesky2(k11: f64, k12: f64, k22: f64) -> (f64, f64, f64) {
    if k11 > 0.0 {
        let l11 = k11.sqrt();
        let l21 = k12 / l11;
        let l22 = (k22 - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    } else {
        (0.0, 0.0, k22.sqrt())
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Derivative of [`erf`].
pub fn derf(x: f64) -> f64 {
    2.0 / PI.sqrt() * (-x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        // values from standard tables
        let table = [
            (0.0, 0.0),
            (0.5, 0.520_499_877_813_046_5),
            (1.0, 0.842_700_792_949_714_9),
            (2.0, 0.995_322_265_018_952_7),
            (3.0, 0.999_977_909_503_001_4),
            (-1.5, -0.966_105_146_475_310_7),
        ];
        for (x, e) in table {
            assert!((erf(x) - e).abs() < 1e-15, "erf({x}) = {} vs {e}", erf(x));
        }
    }

    #[test]
    fn relu_examples() {
        let (k, d) = nonlin_map(NonlinKind::Relu, 1.0, 1.0, 1.0).unwrap();
        assert!((k - 0.5).abs() < 1e-15 && (d - 0.5).abs() < 1e-15);
        let (k, d) = nonlin_map(NonlinKind::Relu, 1.0, 0.0, 1.0).unwrap();
        assert!((k - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn erf_examples() {
        let (k, d) = nonlin_map(NonlinKind::Erf, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(k, 0.0);
        assert!((d - 4.0 / (3.0 * PI)).abs() < 1e-15);
        let (k, _) = nonlin_map(NonlinKind::Erf, 1.0, 1.0, 1.0).unwrap();
        assert!((k - 2.0 / PI * (2.0f64 / 3.0).asin()).abs() < 1e-15);
        assert!((k - 0.464_559_054_397_54).abs() < 1e-12);
    }

    #[test]
    fn degenerate_diagonals_are_finite() {
        for kind in [NonlinKind::Relu, NonlinKind::Erf] {
            for (a, b) in [(0.0, 0.0), (0.0, 2.0), (3.0, 0.0)] {
                let (k, d) = nonlin_map(kind, a, 0.0, b).unwrap();
                assert!(k.is_finite() && d.is_finite());
                assert_eq!(k, 0.0);
            }
        }
        let (_, d) = nonlin_map(NonlinKind::Erf, 0.0, 0.0, 2.0).unwrap();
        assert!((d - 4.0 / PI / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(nonlin_map(NonlinKind::Relu, -1.0, 0.0, 1.0).is_err());
        assert!(nonlin_map(NonlinKind::Erf, 1.0, 2.0, 1.0).is_err());
        assert!(nonlin_map(NonlinKind::Relu, 1.0, 1.0 + 1e-14, 1.0).is_ok());
        assert!(quadrature_oracle(NonlinKind::Relu, 1.0, 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn oracle_examples() {
        let (k, d) = quadrature_oracle(NonlinKind::Relu, 1.0, 1.0, 1.0, 60).unwrap();
        assert!((k - 0.5).abs() < 1e-9 && (d - 0.5).abs() < 1e-9);
        let (k, _) = quadrature_oracle(NonlinKind::Relu, 4.0, 0.0, 1.0, 60).unwrap();
        assert!((k - 1.0 / PI).abs() < 1e-12);
        let (k, d) = quadrature_oracle(NonlinKind::Erf, 1.0, 0.0, 1.0, 60).unwrap();
        assert!(k.abs() < 1e-10);
        assert!((d - 4.0 / (3.0 * PI)).abs() < 1e-10);
        let (k, d) = quadrature_oracle(NonlinKind::Relu, 1.0, 0.0, 1.0, 80).unwrap();
        assert!((k - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!((d - 0.25).abs() < 1e-12);
        let (k, _) = quadrature_oracle(NonlinKind::Erf, 1.0, 1.0, 1.0, 80).unwrap();
        assert!((k - 2.0 / PI * (2.0f64 / 3.0).asin()).abs() < 1e-10);
    }
}
