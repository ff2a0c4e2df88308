use crate::error::{EntkError, Result};

/// Index domain of a kernel state.
///
/// Pair fields are stored as row-major `N×N` matrices over the single-index
/// domain of size `N`; diagonal fields have length `N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    Scalar,
    /// Rotation index `r < n_rot` and pixel `t = (t1, t2)`; single index `r·H·W + t1·W + t2`.
    Planar {
        n_rot: usize,
        h: usize,
        w: usize,
    },
    /// Sampled SO(3) grid with `points` nodes for bandlimit `band`.
    So3Grid {
        band: usize,
        points: usize,
    },
}

impl Domain {
    pub fn single_len(&self) -> usize {
        match *self {
            Domain::Scalar => 1,
            Domain::Planar { n_rot, h, w } => n_rot * h * w,
            Domain::So3Grid { points, .. } => points,
        }
    }

    pub fn pair_len(&self) -> usize {
        let n = self.single_len();
        n * n
    }
}

/// Paired NNGP/NTK fields of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelState {
    pub domain: Domain,
    /// Cross NNGP field K(f, f').
    pub k_xy: Vec<f64>,
    /// Diagonal NNGP field K_{g,g}(f, f).
    pub k_xx: Vec<f64>,
    /// Diagonal NNGP field K_{g,g}(f', f').
    pub k_yy: Vec<f64>,
    /// NTK field Θ(f, f').
    pub theta: Vec<f64>,
}

impl KernelState {
    pub fn new(domain: Domain, k_xy: Vec<f64>, k_xx: Vec<f64>, k_yy: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let s = KernelState { domain, k_xy, k_xx, k_yy, theta };
        s.check_shape()?;
        Ok(s)
    }

    pub fn scalar(k_xy: f64, k_xx: f64, k_yy: f64, theta: f64) -> Self {
        KernelState { domain: Domain::Scalar, k_xy: vec![k_xy], k_xx: vec![k_xx], k_yy: vec![k_yy], theta: vec![theta] }
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.domain.single_len();
        if self.k_xy.len() != n * n || self.theta.len() != n * n {
            return Err(EntkError::Shape(format!(
                "pair fields have lengths {} and {}, domain needs {}",
                self.k_xy.len(),
                self.theta.len(),
                n * n
            )));
        }
        if self.k_xx.len() != n || self.k_yy.len() != n {
            return Err(EntkError::Shape(format!(
                "diagonal fields have lengths {} and {}, domain needs {}",
                self.k_xx.len(),
                self.k_yy.len(),
                n
            )));
        }
        Ok(())
    }

    pub fn is_scalar(&self) -> bool {
        self.domain == Domain::Scalar
    }

    /// Scalar NNGP value; errors unless the state is scalar.
    pub fn nngp(&self) -> Result<f64> {
        self.require_scalar()?;
        Ok(self.k_xy[0])
    }

    /// Scalar NTK value; errors unless the state is scalar.
    pub fn ntk(&self) -> Result<f64> {
        self.require_scalar()?;
        Ok(self.theta[0])
    }

    pub fn require_scalar(&self) -> Result<()> {
        if self.is_scalar() {
            Ok(())
        } else {
            Err(EntkError::Domain(format!("expected scalar state, found {:?}", self.domain)))
        }
    }

    /// Swap the roles of the two inputs: K(f', f) from K(f, f').
    pub fn transposed(&self) -> KernelState {
        let n = self.domain.single_len();
        let mut k = vec![0.0; n * n];
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[j * n + i] = self.k_xy[i * n + j];
                t[j * n + i] = self.theta[i * n + j];
            }
        }
        KernelState { domain: self.domain.clone(), k_xy: k, k_xx: self.k_yy.clone(), k_yy: self.k_xx.clone(), theta: t }
    }
}
