//! Prediction sweeps over training-set sizes and the invariance checks on
//! predictions, shared by the command line and the acceptance tests.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::{molecule_sphere_input, molecule_vector_input, standardize, synth_molecules, synth_rotclass_dataset, Molecule};
use crate::error::{EntkError, Result};
use crate::kernel::{ArchitectureSpec, Input, Pipeline};
use crate::planar::Image;
use crate::predict::{accuracy, argmax, encode_labels, mae, predict_infinite_time, GramMatrix, PredictionReport};
use crate::so3::{euler_to_matrix, S2Grid, SphereQuadrature, SphereTransform};

/// Labelled images split into a training pool and a fixed test set.
#[derive(Clone, Debug)]
pub struct ImageSplit {
    pub train: Vec<Image>,
    pub train_labels: Vec<usize>,
    pub test: Vec<Image>,
    pub test_labels: Vec<usize>,
    pub n_classes: usize,
}

impl ImageSplit {
    /// First `n_train` items train, the rest test.
    pub fn new(images: Vec<Image>, labels: Vec<usize>, n_train: usize, n_classes: usize) -> Result<Self> {
        if images.len() != labels.len() || n_train == 0 || n_train >= images.len() {
            return Err(EntkError::Argument(format!("cannot split {} images ({} labels) at {n_train}", images.len(), labels.len())));
        }
        let (mut train, mut train_labels) = (images, labels);
        let test = train.split_off(n_train);
        let test_labels = train_labels.split_off(n_train);
        Ok(ImageSplit { train, train_labels, test, test_labels, n_classes })
    }
}

fn ntk_matrix(p: &Pipeline, xs: &[Input], ys: Option<&[Input]>) -> Result<DMatrix<f64>> {
    let g = p.gram(xs, ys)?;
    Ok(DMatrix::from_row_slice(g.rows, g.cols, &g.ntk))
}

fn leading_gram(full: &DMatrix<f64>, n: usize) -> Result<GramMatrix> {
    GramMatrix::new(n, full.view((0, 0), (n, n)).transpose().as_slice().to_vec())
}

fn check_sizes(sizes: &[usize], pool: usize) -> Result<()> {
    match sizes.iter().find(|&&n| n == 0 || n > pool) {
        Some(n) => Err(EntkError::Argument(format!("train size {n} outside 1..={pool}"))),
        None => Ok(()),
    }
}

/// Test accuracy of the infinite-time NTK predictor for each kernel and each
/// train size (a prefix of the training pool). `ridge = None` uses the
/// default ridge of each Gram matrix.
pub fn image_sweep(
    split: &ImageSplit,
    kernels: &[(String, ArchitectureSpec)],
    train_sizes: &[usize],
    ridge: Option<f64>,
) -> Result<Vec<PredictionReport>> {
    check_sizes(train_sizes, split.train.len())?;
    let n_max = train_sizes.iter().copied().max().unwrap_or(0);
    let train: Vec<Input> = split.train[..n_max].iter().cloned().map(Input::Image).collect();
    let test: Vec<Input> = split.test.iter().cloned().map(Input::Image).collect();
    let mut out = Vec::new();
    for (name, arch) in kernels {
        let p = Pipeline::new(arch)?;
        let full = ntk_matrix(&p, &train, None)?;
        let k_test = ntk_matrix(&p, &test, Some(&train))?;
        for &n in train_sizes {
            let g = leading_gram(&full, n)?;
            let y = encode_labels(&split.train_labels[..n], split.n_classes)?;
            let r = ridge.unwrap_or_else(|| g.default_ridge());
            let pr = predict_infinite_time(&g, &k_test.columns(0, n).into_owned(), &y, r)?;
            out.push(PredictionReport {
                train_size: n,
                kernel: name.clone(),
                metric: "accuracy".into(),
                value: accuracy(&pr.values, &split.test_labels)?,
                ridge: pr.ridge,
                jitter: pr.jitter,
                time: None,
            });
        }
    }
    Ok(out)
}

/// Molecules split into a training pool and a fixed test set.
#[derive(Clone, Debug)]
pub struct MoleculeSplit {
    pub train: Vec<Molecule>,
    pub test: Vec<Molecule>,
}

/// Which molecule kernel to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoleculeKernel {
    /// Per-atom spherical signals through the SO(3) network.
    So3,
    /// Per-atom flattened grid samples through a fully connected network.
    Mlp,
}

impl MoleculeKernel {
    pub fn name(self) -> &'static str {
        match self {
            MoleculeKernel::So3 => "so3",
            MoleculeKernel::Mlp => "mlp",
        }
    }
}

/// Featurization settings for the molecule kernels.
#[derive(Clone, Debug)]
pub struct MoleculeSetup {
    /// Band of the sampling grid and the sphere transform.
    pub grid_band: usize,
    /// Band limit of the SO(3) network.
    pub bandlimit: usize,
    pub transform: SphereTransform,
}

impl MoleculeSetup {
    pub fn new(grid_band: usize, bandlimit: usize) -> Result<Self> {
        let transform = SphereTransform::new(grid_band, S2Grid::new(grid_band, SphereQuadrature::GaussLegendre)?)?;
        Ok(MoleculeSetup { grid_band, bandlimit, transform })
    }

    fn branches(molecules: &[&Molecule]) -> usize {
        molecules.iter().map(|m| m.atoms.len()).max().unwrap_or(1)
    }

    fn arch(&self, kind: MoleculeKernel, branches: usize) -> ArchitectureSpec {
        match kind {
            MoleculeKernel::So3 => ArchitectureSpec::molecule_so3(self.bandlimit, branches),
            MoleculeKernel::Mlp => ArchitectureSpec::molecule_mlp(branches),
        }
    }

    pub fn input(&self, kind: MoleculeKernel, m: &Molecule) -> Result<Input> {
        match kind {
            MoleculeKernel::So3 => molecule_sphere_input(m, &self.transform),
            MoleculeKernel::Mlp => molecule_vector_input(m, &self.transform.grid),
        }
    }
}

/// Energies predicted for `test` from the first `n` training molecules with
/// standardized targets, plus the ridge and jitter used.
fn molecule_predictions(full: &DMatrix<f64>, k_test: &DMatrix<f64>, energies: &[f64], ridge: Option<f64>) -> Result<(Vec<f64>, f64, f64)> {
    let n = energies.len();
    // a single target can only be centered
    let (z, mean, sd) = if n < 2 { (vec![0.0; n], energies.iter().sum::<f64>() / n.max(1) as f64, 1.0) } else { standardize(energies)? };
    let g = leading_gram(full, n)?;
    let r = ridge.unwrap_or_else(|| g.default_ridge());
    let pr = predict_infinite_time(&g, &k_test.columns(0, n).into_owned(), &DMatrix::from_column_slice(n, 1, &z), r)?;
    Ok((pr.values.iter().map(|v| v * sd + mean).collect(), pr.ridge, pr.jitter))
}

/// Test MAE of the infinite-time NTK predictor for each kernel and train size.
pub fn molecule_sweep(
    split: &MoleculeSplit,
    setup: &MoleculeSetup,
    kernels: &[MoleculeKernel],
    train_sizes: &[usize],
    ridge: Option<f64>,
) -> Result<Vec<PredictionReport>> {
    check_sizes(train_sizes, split.train.len())?;
    let n_max = train_sizes.iter().copied().max().unwrap_or(0);
    let all: Vec<&Molecule> = split.train.iter().chain(&split.test).collect();
    let branches = MoleculeSetup::branches(&all);
    let truth: Vec<f64> = split.test.iter().map(|m| m.energy).collect();
    let energies: Vec<f64> = split.train.iter().map(|m| m.energy).collect();
    let mut out = Vec::new();
    for &kind in kernels {
        let p = Pipeline::new(&setup.arch(kind, branches))?;
        let train: Vec<Input> = split.train[..n_max].iter().map(|m| setup.input(kind, m)).collect::<Result<_>>()?;
        let test: Vec<Input> = split.test.iter().map(|m| setup.input(kind, m)).collect::<Result<_>>()?;
        let full = ntk_matrix(&p, &train, None)?;
        let k_test = ntk_matrix(&p, &test, Some(&train))?;
        for &n in train_sizes {
            let (preds, r, jitter) = molecule_predictions(&full, &k_test, &energies[..n], ridge)?;
            out.push(PredictionReport {
                train_size: n,
                kernel: kind.name().into(),
                metric: "mae".into(),
                value: mae(&preds, &truth)?,
                ridge: r,
                jitter,
                time: None,
            });
        }
    }
    Ok(out)
}

/// Largest change of any predicted value when the test inputs are replaced by
/// transformed copies, and whether every argmax is unchanged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub max_value_change: f64,
    pub argmax_unchanged: bool,
    pub n_test: usize,
}

fn compare(a: &DMatrix<f64>, b: &DMatrix<f64>) -> InvarianceReport {
    let row = |m: &DMatrix<f64>, i: usize| m.row(i).iter().copied().collect::<Vec<f64>>();
    InvarianceReport {
        max_value_change: (a - b).amax(),
        argmax_unchanged: (0..a.nrows()).all(|i| argmax(&row(a, i)) == argmax(&row(b, i))),
        n_test: a.nrows(),
    }
}

/// Predictions of `arch` on the test images against predictions on the same
/// images rotated by `quarter_turns`.
pub fn image_rotation_invariance(split: &ImageSplit, arch: &ArchitectureSpec, quarter_turns: usize) -> Result<InvarianceReport> {
    let p = Pipeline::new(arch)?;
    let train: Vec<Input> = split.train.iter().cloned().map(Input::Image).collect();
    let test: Vec<Input> = split.test.iter().cloned().map(Input::Image).collect();
    let rotated: Vec<Input> = split.test.iter().map(|f| f.rotated(quarter_turns).map(Input::Image)).collect::<Result<_>>()?;
    let g = GramMatrix::new(train.len(), ntk_matrix(&p, &train, None)?.transpose().as_slice().to_vec())?;
    let y = encode_labels(&split.train_labels, split.n_classes)?;
    let r = g.default_ridge();
    let a = predict_infinite_time(&g, &ntk_matrix(&p, &test, Some(&train))?, &y, r)?;
    let b = predict_infinite_time(&g, &ntk_matrix(&p, &rotated, Some(&train))?, &y, r)?;
    Ok(compare(&a.values, &b.values))
}

/// Predictions of the SO(3) molecule kernel on the test molecules against
/// predictions on copies rotated about z by `steps` azimuthal grid spacings,
/// which permutes the grid samples exactly.
pub fn molecule_rotation_invariance(split: &MoleculeSplit, setup: &MoleculeSetup, steps: usize) -> Result<InvarianceReport> {
    let all: Vec<&Molecule> = split.train.iter().chain(&split.test).collect();
    let p = Pipeline::new(&setup.arch(MoleculeKernel::So3, MoleculeSetup::branches(&all)))?;
    let n_phi = setup.transform.grid.phi.len();
    let rot = euler_to_matrix(2.0 * std::f64::consts::PI * steps as f64 / n_phi as f64, 0.0, 0.0);
    let input = |m: &Molecule| setup.input(MoleculeKernel::So3, m);
    let train: Vec<Input> = split.train.iter().map(input).collect::<Result<_>>()?;
    let test: Vec<Input> = split.test.iter().map(input).collect::<Result<_>>()?;
    let rotated: Vec<Input> = split.test.iter().map(|m| input(&m.rotated(&rot))).collect::<Result<_>>()?;
    let full = ntk_matrix(&p, &train, None)?;
    let energies: Vec<f64> = split.train.iter().map(|m| m.energy).collect();
    let (a, ..) = molecule_predictions(&full, &ntk_matrix(&p, &test, Some(&train))?, &energies, None)?;
    let (b, ..) = molecule_predictions(&full, &ntk_matrix(&p, &rotated, Some(&train))?, &energies, None)?;
    Ok(compare(&DMatrix::from_column_slice(a.len(), 1, &a), &DMatrix::from_column_slice(b.len(), 1, &b)))
}

/// Synthetic 9-class rotated-texture task on `h×h` images: 27 images per
/// class, the first 200 form the training pool and the other 43 the test set.
pub fn rotclass_split(h: usize, seed: u64) -> Result<ImageSplit> {
    let (images, labels) = synth_rotclass_dataset(27, 9, h, seed)?;
    ImageSplit::new(images, labels, 200, 9)
}

/// Synthetic molecules with at most six atoms: 60 train, 20 test.
pub fn molecule_split(seed: u64) -> Result<MoleculeSplit> {
    let mut train = synth_molecules(80, 6, 100 + seed)?;
    let test = train.split_off(60);
    Ok(MoleculeSplit { train, test })
}

/// Train sizes of the image comparison.
pub const ROTCLASS_TRAIN_SIZES: [usize; 4] = [20, 50, 100, 200];

/// Mean over [`ROTCLASS_TRAIN_SIZES`] of the GCNN and CNN kernel accuracies.
pub fn rotclass_comparison(h: usize, seed: u64) -> Result<(f64, f64)> {
    let split = rotclass_split(h, seed)?;
    let kernels = [("gcnn".to_string(), ArchitectureSpec::classifier_gcnn(4)), ("cnn".to_string(), ArchitectureSpec::classifier_cnn())];
    let reports = image_sweep(&split, &kernels, &ROTCLASS_TRAIN_SIZES, None)?;
    let mean = |k: &str| {
        let v: Vec<f64> = reports.iter().filter(|r| r.kernel == k).map(|r| r.value).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    Ok((mean("gcnn"), mean("cnn")))
}

/// Test MAE of the SO(3) and MLP molecule kernels on the full training pool.
pub fn molecule_comparison(seed: u64) -> Result<(f64, f64)> {
    let split = molecule_split(seed)?;
    let setup = MoleculeSetup::new(6, 3)?;
    let r = molecule_sweep(&split, &setup, &[MoleculeKernel::So3, MoleculeKernel::Mlp], &[split.train.len()], None)?;
    Ok((r[0].value, r[1].value))
}
