//! Kernel mean predictors: Gram assembly, regularized solves, NTK dynamics
//! at finite and infinite time, label encoding and metrics.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{EntkError, Result};

/// Symmetric Gram matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl GramMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(EntkError::Shape(format!("{} entries for a {n}x{n} Gram matrix", data.len())));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..n {
            for j in i + 1..n {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return Err(EntkError::InvalidKernel(format!("Gram matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(GramMatrix { n, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Default ridge `1e-8 · trace / n`.
    pub fn default_ridge(&self) -> f64 {
        1e-8 * self.trace() / self.n.max(1) as f64
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// Multiply every entry by `s`.
    pub fn scaled(&self, s: f64) -> GramMatrix {
        GramMatrix { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }
}

/// Evaluate `kernel(i, j)` on the upper triangle (in parallel) and mirror it.
pub fn assemble_gram<F>(n: usize, kernel: F) -> Result<GramMatrix>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs.par_iter().map(|&(i, j)| kernel(i, j)).collect::<Result<_>>()?;
    let mut data = vec![0.0; n * n];
    for (&(i, j), &v) in pairs.iter().zip(&vals) {
        if !v.is_finite() {
            return Err(EntkError::NonFinite(i, j));
        }
        data[i * n + j] = v;
        data[j * n + i] = v;
    }
    Ok(GramMatrix { n, data })
}

/// Targets `e_c − (1/C)·1` for class labels.
pub fn encode_labels(classes: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    if n_classes == 0 {
        return Err(EntkError::Argument("no classes".into()));
    }
    let mut y = DMatrix::from_element(classes.len(), n_classes, -1.0 / n_classes as f64);
    for (i, &c) in classes.iter().enumerate() {
        if c >= n_classes {
            return Err(EntkError::Index(format!("class {c} with {n_classes} classes")));
        }
        y[(i, c)] += 1.0;
    }
    Ok(y)
}

/// Cholesky factor of `gram + ridge·I + jitter·I`.
#[derive(Clone, Debug)]
pub struct Factorized {
    chol: Cholesky<f64, nalgebra::Dyn>,
    pub ridge: f64,
    /// Extra diagonal shift that was needed for the factorization to succeed.
    pub jitter: f64,
}

impl Factorized {
    /// Factorize with escalating jitter `1e-12, 1e-11, …, 1e-6` times the mean
    /// diagonal when the plain factorization fails.
    pub fn new(gram: &GramMatrix, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) {
            return Err(EntkError::Argument(format!("ridge {ridge} must be nonnegative")));
        }
        let base = gram.to_matrix();
        let mean_diag = (gram.trace() / gram.n.max(1) as f64).abs().max(1e-300);
        let mut jitter = 0.0;
        let mut level = 1e-12;
        loop {
            let mut m = base.clone();
            for i in 0..gram.n {
                m[(i, i)] += ridge + jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                return Ok(Factorized { chol, ridge, jitter });
            }
            if level > 1.0000001e-6 {
                return Err(EntkError::Singular(jitter));
            }
            jitter = level * mean_diag;
            level *= 10.0;
        }
    }

    pub fn solve(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(y)
    }
}

/// Mean predictions with the regularization actually applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub values: DMatrix<f64>,
    pub ridge: f64,
    pub jitter: f64,
}

fn check_shapes(n: usize, k_test: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if k_test.ncols() != n || y.nrows() != n {
        return Err(EntkError::Shape(format!(
            "gram {n}x{n}, test kernel {}x{}, targets {}x{}",
            k_test.nrows(),
            k_test.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

/// `μ(x) = Θ(x,X) (Θ(X,X) + ridge·I)⁻¹ Y`.
pub fn predict_infinite_time(gram: &GramMatrix, k_test: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> Result<Prediction> {
    check_shapes(gram.n, k_test, y)?;
    let f = Factorized::new(gram, ridge)?;
    Ok(Prediction { values: k_test * f.solve(y), ridge, jitter: f.jitter })
}

/// Eigendecomposition of `gram + ridge·I`, backing the finite-time predictor.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    pub ridge: f64,
}

/// Relative eigenvalue cutoff below which a direction counts as the null
/// space of the Gram matrix.
pub const NULL_CUTOFF: f64 = 1e-10;

impl Spectral {
    pub fn new(gram: &GramMatrix, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) {
            return Err(EntkError::Argument(format!("ridge {ridge} must be nonnegative")));
        }
        let mut m = gram.to_matrix();
        for i in 0..gram.n {
            m[(i, i)] += ridge;
        }
        let eig = SymmetricEigen::new(m);
        Ok(Spectral { eigenvalues: eig.eigenvalues.iter().copied().collect(), eigenvectors: eig.eigenvectors, ridge })
    }

    /// `Θ(x,X) g(Θ(X,X)) Y` with `g(λ) = (1 − e^{−ηλt})/λ`. At `t = ∞` this is
    /// the minimum-norm solution: directions with eigenvalue below
    /// [`NULL_CUTOFF`] times the largest are never fitted, as in gradient flow
    /// from zero.
    pub fn predict_at_time(&self, k_test: &DMatrix<f64>, y: &DMatrix<f64>, t: f64, eta: f64) -> Result<DMatrix<f64>> {
        check_shapes(self.eigenvalues.len(), k_test, y)?;
        if t.is_nan() || t < 0.0 {
            return Err(EntkError::Argument(format!("time {t} must be nonnegative")));
        }
        if !(eta > 0.0) {
            return Err(EntkError::Argument(format!("learning rate {eta} must be positive")));
        }
        let top = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = NULL_CUTOFF * top;
        let g: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| {
                if t.is_infinite() {
                    if l > cut {
                        1.0 / l
                    } else {
                        0.0
                    }
                } else if l.abs() <= cut {
                    eta * t
                } else {
                    -(-eta * l * t).exp_m1() / l
                }
            })
            .collect();
        let v = &self.eigenvectors;
        let mut proj = v.transpose() * y;
        for (i, gi) in g.iter().enumerate() {
            proj.row_mut(i).scale_mut(*gi);
        }
        Ok(k_test * (v * proj))
    }
}

/// Finite-time NTK mean predictor `Θ(x,X) Θ⁻¹ (I − e^{−ηΘt}) Y`.
pub fn predict_at_time(gram: &GramMatrix, k_test: &DMatrix<f64>, y: &DMatrix<f64>, t: f64, eta: f64, ridge: f64) -> Result<DMatrix<f64>> {
    Spectral::new(gram, ridge)?.predict_at_time(k_test, y, t, eta)
}

/// Learning rate in the time variable of a loss that averages (rather than
/// sums) over `n_train` examples.
pub fn mean_loss_rate(eta: f64, n_train: usize) -> f64 {
    eta / n_train as f64
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the true class.
pub fn accuracy(preds: &DMatrix<f64>, classes: &[usize]) -> Result<f64> {
    if preds.nrows() != classes.len() || preds.nrows() == 0 {
        return Err(EntkError::Shape(format!("{} predictions for {} labels", preds.nrows(), classes.len())));
    }
    let hits = (0..preds.nrows())
        .filter(|&i| {
            let row: Vec<f64> = preds.row(i).iter().copied().collect();
            argmax(&row) == classes[i]
        })
        .count();
    Ok(hits as f64 / classes.len() as f64)
}

/// Mean absolute error over all entries.
pub fn mae(preds: &[f64], truth: &[f64]) -> Result<f64> {
    if preds.len() != truth.len() || preds.is_empty() {
        return Err(EntkError::Shape(format!("{} predictions for {} targets", preds.len(), truth.len())));
    }
    Ok(preds.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

/// One evaluation result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionReport {
    pub train_size: usize,
    pub kernel: String,
    pub metric: String,
    pub value: f64,
    pub ridge: f64,
    pub jitter: f64,
    /// `None` for the infinite-time predictor.
    pub time: Option<f64>,
}
