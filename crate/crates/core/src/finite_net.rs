//! Finite-width `C_n ⋉ Z_H×Z_W` networks in NTK parametrization, with exact
//! parameter gradients, for Monte-Carlo estimates of the NNGP and NTK.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{EntkError, Result};
use crate::kernel::{derf, erf, run_pipeline, ArchitectureSpec, GroupParams, Input, Layer, NonlinKind};
use crate::planar::{rotate_offset, GridGeom, Image};

#[derive(Clone, Debug)]
enum NetLayer {
    Lift { n_in: usize, n_out: usize, table: Vec<usize>, taps: usize },
    Conv { n_in: usize, n_out: usize, table: Vec<usize>, taps: usize },
    Nonlin(NonlinKind),
    Pool,
    Dense { n_in: usize, n_out: usize },
}

/// Finite network on a fixed grid: layer shapes and gather tables.
#[derive(Clone, Debug)]
pub struct FiniteNet {
    pub geom: GridGeom,
    pub in_channels: usize,
    pub width: usize,
    layers: Vec<NetLayer>,
}

/// Weights per parameterized layer, flattened row-major as
/// `[n_out, n_in, support]` (lifting), `[n_out, n_in, n_rot, support]`
/// (group convolution) or `[n_out, n_in]` (dense).
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteParamSet {
    pub weights: Vec<Vec<f64>>,
    pub seed: u64,
    pub sample: u64,
}

const NONE: usize = usize::MAX;

// Source positions for every (tap, output position); taps are (r̃, s) pairs.
fn gather_table(geom: &GridGeom, offsets: &[(i64, i64)], lifting: bool) -> Vec<usize> {
    let (n, p) = (geom.n_rot, geom.pixels());
    let rots = if lifting { 1 } else { n };
    let taps = rots * offsets.len();
    let mut table = vec![NONE; taps * n * p];
    for r in 0..n {
        let q = geom.quarter_turns(r);
        for t in 0..p {
            let pos = r * p + t;
            for rt in 0..rots {
                for (si, &o) in offsets.iter().enumerate() {
                    let src = geom.shift(t, rotate_offset(o, q)).map(|x| if lifting { x } else { ((r + rt) % n) * p + x });
                    table[pos * taps + rt * offsets.len() + si] = src.unwrap_or(NONE);
                }
            }
        }
    }
    table
}

impl FiniteNet {
    /// Build the network for `arch` with every hidden width set to `width`;
    /// the last parameterized layer has `out_channels` outputs.
    pub fn new(arch: &ArchitectureSpec, geom: GridGeom, in_channels: usize, width: usize, out_channels: usize) -> Result<Self> {
        arch.validate()?;
        if width == 0 || in_channels == 0 || out_channels == 0 {
            return Err(EntkError::Argument("widths must be positive".into()));
        }
        match arch.group {
            GroupParams::Planar { n_rot, padding } if n_rot == geom.n_rot && padding == geom.padding => {}
            ref g => return Err(EntkError::Unsupported(format!("finite network for {g:?} on {geom:?}"))),
        }
        let last_param = arch
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Lifting { .. } | Layer::GConv { .. } | Layer::Dense))
            .ok_or_else(|| EntkError::Unsupported("network without parameters".into()))?;
        let mut layers = Vec::new();
        let mut ch = in_channels;
        for (i, l) in arch.layers.iter().enumerate() {
            let n_out = if i == last_param { out_channels } else { width };
            layers.push(match l {
                Layer::Lifting { support } => {
                    let offs = geom.offsets(support)?;
                    let table = gather_table(&geom, &offs, true);
                    let nl = NetLayer::Lift { n_in: ch, n_out, taps: offs.len(), table };
                    ch = n_out;
                    nl
                }
                Layer::GConv { support } => {
                    let offs = geom.offsets(support)?;
                    let table = gather_table(&geom, &offs, false);
                    let nl = NetLayer::Conv { n_in: ch, n_out, taps: geom.n_rot * offs.len(), table };
                    ch = n_out;
                    nl
                }
                Layer::Dense => {
                    let nl = NetLayer::Dense { n_in: ch, n_out };
                    ch = n_out;
                    nl
                }
                Layer::Nonlin { nonlin } => NetLayer::Nonlin(*nonlin),
                Layer::GPool => NetLayer::Pool,
                l => return Err(EntkError::Unsupported(format!("finite network layer {l:?}"))),
            });
        }
        Ok(FiniteNet { geom, in_channels, width, layers })
    }

    /// Number of weights per parameterized layer.
    pub fn param_shapes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match *l {
                NetLayer::Lift { n_in, n_out, taps, .. } | NetLayer::Conv { n_in, n_out, taps, .. } => Some(n_out * n_in * taps),
                NetLayer::Dense { n_in, n_out } => Some(n_out * n_in),
                _ => None,
            })
            .collect()
    }

    /// i.i.d. standard normal weights from the stream `sample` of `seed`.
    pub fn init_params(&self, seed: u64, sample: u64) -> FiniteParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample);
        let weights = self.param_shapes().into_iter().map(|n| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        FiniteParamSet { weights, seed, sample }
    }

    fn check_params(&self, params: &FiniteParamSet) -> Result<()> {
        let shapes = self.param_shapes();
        if params.weights.len() != shapes.len() || params.weights.iter().zip(&shapes).any(|(w, &n)| w.len() != n) {
            return Err(EntkError::Shape("parameter shapes do not match the network".into()));
        }
        Ok(())
    }

    /// Forward pass; returns the output vector and the cache for [`FiniteNet::grad_params`].
    pub fn forward(&self, params: &FiniteParamSet, f: &Image) -> Result<(Vec<f64>, Cache)> {
        self.check_params(params)?;
        f.check_geom(&self.geom)?;
        if f.channels != self.in_channels {
            return Err(EntkError::Shape(format!("{} input channels, network expects {}", f.channels, self.in_channels)));
        }
        let hw = self.geom.pixels();
        let positions = self.geom.n_rot * hw;
        let mut a = DMatrix::from_row_slice(f.channels, hw, &f.data);
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut wi = 0;
        for layer in &self.layers {
            match layer {
                NetLayer::Lift { n_in, n_out, table, taps } | NetLayer::Conv { n_in, n_out, table, taps } => {
                    let fan = n_in * taps;
                    let mut x = DMatrix::zeros(fan, positions);
                    for p in 0..positions {
                        let row = &table[p * taps..(p + 1) * taps];
                        let mut colv = x.column_mut(p);
                        let col = colv.as_mut_slice();
                        for c in 0..*n_in {
                            for (k, &src) in row.iter().enumerate() {
                                if src != NONE {
                                    col[c * taps + k] = a[(c, src)];
                                }
                            }
                        }
                    }
                    let w = DMatrix::from_row_slice(*n_out, fan, &params.weights[wi]);
                    let z = (&w * &x) * (1.0 / (fan as f64).sqrt());
                    steps.push(Step::Linear { x, w, fan, prev_cols: a.ncols() });
                    a = z;
                    wi += 1;
                }
                NetLayer::Dense { n_in, n_out } => {
                    let w = DMatrix::from_row_slice(*n_out, *n_in, &params.weights[wi]);
                    let z = (&w * &a) * (1.0 / (*n_in as f64).sqrt());
                    steps.push(Step::Dense { x: a.clone(), w, fan: *n_in });
                    a = z;
                    wi += 1;
                }
                NetLayer::Nonlin(kind) => {
                    let z = a.clone();
                    a = match kind {
                        NonlinKind::Relu => z.map(|v| v.max(0.0)),
                        NonlinKind::Erf => z.map(erf),
                    };
                    steps.push(Step::Nonlin { z, kind: *kind });
                }
                NetLayer::Pool => {
                    let cols = a.ncols();
                    let pooled = DMatrix::from_fn(a.nrows(), 1, |c, _| a.row(c).sum() / cols as f64);
                    steps.push(Step::Pool { cols });
                    a = pooled;
                }
            }
        }
        if a.ncols() != 1 {
            return Err(EntkError::Architecture("network output is not pooled".into()));
        }
        Ok((a.column(0).iter().copied().collect(), Cache { steps }))
    }

    /// Gradient of the (single) output with respect to every weight.
    pub fn grad_params(&self, params: &FiniteParamSet, cache: &Cache) -> Result<Vec<Vec<f64>>> {
        self.check_params(params)?;
        let mut delta = DMatrix::from_element(1, 1, 1.0);
        let mut grads: Vec<Vec<f64>> = Vec::new();
        for (i, step) in cache.steps.iter().enumerate().rev() {
            match step {
                Step::Linear { x, w, fan, prev_cols } => {
                    if delta.nrows() != w.nrows() {
                        return Err(EntkError::Shape("gradient needs a single output".into()));
                    }
                    let s = 1.0 / (*fan as f64).sqrt();
                    let dw = (&delta * x.transpose()) * s;
                    grads.push(row_major(&dw));
                    if i > 0 {
                        let dx = (w.transpose() * &delta) * s;
                        let (table, taps, n_in) = match &self.layers[i] {
                            NetLayer::Lift { table, taps, n_in, .. } | NetLayer::Conv { table, taps, n_in, .. } => (table, *taps, *n_in),
                            _ => unreachable!(),
                        };
                        let mut prev = DMatrix::zeros(n_in, *prev_cols);
                        for p in 0..dx.ncols() {
                            let row = &table[p * taps..(p + 1) * taps];
                            let col = dx.column(p);
                            for c in 0..n_in {
                                for (k, &src) in row.iter().enumerate() {
                                    if src != NONE {
                                        prev[(c, src)] += col[c * taps + k];
                                    }
                                }
                            }
                        }
                        delta = prev;
                    }
                }
                Step::Dense { x, w, fan } => {
                    let s = 1.0 / (*fan as f64).sqrt();
                    let dw = (&delta * x.transpose()) * s;
                    grads.push(row_major(&dw));
                    delta = (w.transpose() * &delta) * s;
                }
                Step::Nonlin { z, kind } => {
                    let d = match kind {
                        NonlinKind::Relu => z.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
                        NonlinKind::Erf => z.map(derf),
                    };
                    delta.component_mul_assign(&d);
                }
                Step::Pool { cols } => {
                    let c = delta.nrows();
                    let inv = 1.0 / *cols as f64;
                    delta = DMatrix::from_fn(c, *cols, |r, _| delta[(r, 0)] * inv);
                }
            }
        }
        grads.reverse();
        Ok(grads)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Clone, Debug)]
enum Step {
    Linear { x: DMatrix<f64>, w: DMatrix<f64>, fan: usize, prev_cols: usize },
    Dense { x: DMatrix<f64>, w: DMatrix<f64>, fan: usize },
    Nonlin { z: DMatrix<f64>, kind: NonlinKind },
    Pool { cols: usize },
}

/// Activations retained by [`FiniteNet::forward`].
#[derive(Clone, Debug)]
pub struct Cache {
    steps: Vec<Step>,
}

impl Cache {
    /// Features `u` of the input to the last linear layer, scaled so that the
    /// readout NNGP conditional on all earlier weights is `u·u'`. Available
    /// when only pooling follows that layer.
    pub fn readout_features(&self) -> Option<Vec<f64>> {
        let last = self.steps.iter().rposition(|s| matches!(s, Step::Linear { .. } | Step::Dense { .. }))?;
        if self.steps[last + 1..].iter().any(|s| !matches!(s, Step::Pool { .. })) {
            return None;
        }
        let (x, fan) = match &self.steps[last] {
            Step::Linear { x, fan, .. } | Step::Dense { x, fan, .. } => (x, *fan),
            _ => unreachable!(),
        };
        let s = 1.0 / ((fan as f64).sqrt() * x.ncols() as f64);
        Some((0..x.nrows()).map(|r| x.row(r).sum() * s).collect())
    }
}

/// `Θ̂(f, f') = ∇N(f) · ∇N(f')`.
pub fn empirical_ntk(ga: &[Vec<f64>], gb: &[Vec<f64>]) -> Result<f64> {
    if ga.len() != gb.len() || ga.iter().zip(gb).any(|(a, b)| a.len() != b.len()) {
        return Err(EntkError::Shape("gradient shapes differ".into()));
    }
    Ok(ga.iter().zip(gb).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).sum())
}

/// Mean empirical Gram matrices over samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalEstimate {
    pub width: usize,
    pub n_samples: usize,
    pub ntk_mean: Vec<f64>,
    pub ntk_stderr: Vec<f64>,
    pub nngp_mean: Vec<f64>,
    pub nngp_stderr: Vec<f64>,
}

/// Per-sample Gram matrices: gradient dot products for the NTK, and readout
/// feature products (or output products) for the NNGP.
fn sample_grams(net: &FiniteNet, inputs: &[Image], seed: u64, sample: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let params = net.init_params(seed, sample);
    let mut grads = Vec::with_capacity(inputs.len());
    let mut feats = Vec::with_capacity(inputs.len());
    for f in inputs {
        let (out, cache) = net.forward(&params, f)?;
        grads.push(net.grad_params(&params, &cache)?);
        feats.push(cache.readout_features().unwrap_or(out));
    }
    let m = inputs.len();
    let mut ntk = vec![0.0; m * m];
    let mut nngp = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let t = empirical_ntk(&grads[i], &grads[j])?;
            let k: f64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| a * b).sum();
            ntk[i * m + j] = t;
            ntk[j * m + i] = t;
            nngp[i * m + j] = k;
            nngp[j * m + i] = k;
        }
    }
    Ok((ntk, nngp))
}

fn mean_and_stderr(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let len = samples[0].len();
    let mut mean = vec![0.0; len];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for s in samples {
        for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let denom = (n - 1.0).max(1.0);
    let se = var.iter().map(|v| (v / denom / n).sqrt()).collect();
    (mean, se)
}

type SampleGrams = Vec<(Vec<f64>, Vec<f64>)>;

// Samples run in parallel; every reduction is sequential in sample order, so
// results do not depend on the thread count.
fn all_sample_grams(net: &FiniteNet, inputs: &[Image], n_samples: usize, seed: u64) -> Result<SampleGrams> {
    if n_samples < 2 {
        return Err(EntkError::Argument("need at least two samples".into()));
    }
    (0..n_samples as u64).into_par_iter().map(|s| sample_grams(net, inputs, seed, s)).collect()
}

/// Monte-Carlo mean of the empirical kernels over `n_samples` independent
/// initializations.
pub fn estimate_kernels(net: &FiniteNet, inputs: &[Image], n_samples: usize, seed: u64) -> Result<EmpiricalEstimate> {
    let (ntks, nngps): (Vec<_>, Vec<_>) = all_sample_grams(net, inputs, n_samples, seed)?.into_iter().unzip();
    let (ntk_mean, ntk_stderr) = mean_and_stderr(&ntks);
    let (nngp_mean, nngp_stderr) = mean_and_stderr(&nngps);
    Ok(EmpiricalEstimate { width: net.width, n_samples, ntk_mean, ntk_stderr, nngp_mean, nngp_stderr })
}

/// One row of a convergence table.
///
/// `rel_error` is the relative Gram error of a single initialization,
/// averaged over the entries and then over the samples; `std` is its
/// standard error. `mean_estimate_error` is the relative error of the
/// sample-mean Gram matrix, which at a fixed sample count is dominated by
/// Monte-Carlo noise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McRow {
    pub width: usize,
    pub kernel_type: &'static str,
    pub rel_error: f64,
    pub std: f64,
    pub n_samples: usize,
    pub mean_estimate_error: f64,
}

fn entry_error(est: &[f64], exact: &[f64]) -> f64 {
    est.iter().zip(exact).map(|(m, e)| (m - e).abs() / e.abs().max(1e-12)).sum::<f64>() / exact.len() as f64
}

fn mc_row(width: usize, kernel_type: &'static str, grams: &[Vec<f64>], exact: &[f64]) -> McRow {
    let errs: Vec<Vec<f64>> = grams.iter().map(|g| vec![entry_error(g, exact)]).collect();
    let (e, se) = mean_and_stderr(&errs);
    let (mean, _) = mean_and_stderr(grams);
    McRow { width, kernel_type, rel_error: e[0], std: se[0], n_samples: grams.len(), mean_estimate_error: entry_error(&mean, exact) }
}

/// Analytic NTK and NNGP Gram matrices of `arch` on `inputs`.
pub fn analytic_grams(arch: &ArchitectureSpec, inputs: &[Image]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = inputs.len();
    let mut ntk = vec![0.0; m * m];
    let mut nngp = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let s = run_pipeline(arch, &Input::Image(inputs[i].clone()), &Input::Image(inputs[j].clone()))?;
            for (dst, v) in [(&mut ntk, s.theta[0]), (&mut nngp, s.k_xy[0])] {
                dst[i * m + j] = v;
                dst[j * m + i] = v;
            }
        }
    }
    Ok((ntk, nngp))
}

/// Relative Gram errors of Monte-Carlo estimates against the analytic
/// kernels, per width, for a single-output network. Rows are sorted by
/// width, NTK before NNGP.
pub fn mc_convergence(arch: &ArchitectureSpec, widths: &[usize], n_samples: usize, inputs: &[Image], seed: u64) -> Result<Vec<McRow>> {
    let first = inputs.first().ok_or_else(|| EntkError::Argument("no inputs".into()))?;
    let (n_rot, padding) = match arch.group {
        GroupParams::Planar { n_rot, padding } => (n_rot, padding),
        ref g => return Err(EntkError::Unsupported(format!("Monte-Carlo for {g:?}"))),
    };
    let geom = GridGeom::new(first.h, first.w, padding, n_rot)?;
    let (ntk, nngp) = analytic_grams(arch, inputs)?;
    let mut ws = widths.to_vec();
    ws.sort_unstable();
    ws.dedup();
    let mut rows = Vec::new();
    for w in ws {
        let net = FiniteNet::new(arch, geom, first.channels, w, 1)?;
        let (ntks, nngps): (Vec<_>, Vec<_>) = all_sample_grams(&net, inputs, n_samples, seed)?.into_iter().unzip();
        rows.push(mc_row(w, "ntk", &ntks, &ntk));
        rows.push(mc_row(w, "nngp", &nngps, &nngp));
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// CSV table `width,kernel_type,rel_error,std,n_samples,mean_estimate_error`.
pub fn mc_csv(rows: &[McRow]) -> String {
    let mut s = String::from("width,kernel_type,rel_error,std,n_samples,mean_estimate_error\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.12e},{:.12e},{},{:.12e}\n",
            r.width, r.kernel_type, r.rel_error, r.std, r.n_samples, r.mean_estimate_error
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Support;
    use crate::planar::Padding;
    use rand::Rng;

    fn image(h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(1, h, h, (0..h * h).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn small_net(kind: NonlinKind) -> FiniteNet {
        let arch = ArchitectureSpec::gcnn(3, Support::Square(3), kind, 4, Padding::Circular);
        FiniteNet::new(&arch, GridGeom::square(4, 4).unwrap(), 1, 3, 1).unwrap()
    }

    #[test]
    fn params_are_seeded() {
        let net = small_net(NonlinKind::Relu);
        assert_eq!(net.init_params(1, 0), net.init_params(1, 0));
        assert_ne!(net.init_params(1, 0).weights, net.init_params(1, 1).weights);
        assert_ne!(net.init_params(1, 0).weights, net.init_params(2, 0).weights);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let net = small_net(NonlinKind::Erf);
        let p = net.init_params(3, 0);
        let (out, _) = net.forward(&p, &Image::zeros(1, 4, 4)).unwrap();
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn gradients_match_central_differences() {
        for kind in [NonlinKind::Relu, NonlinKind::Erf] {
            let net = small_net(kind);
            let p = net.init_params(7, 2);
            let f = image(4, 9);
            let (_, cache) = net.forward(&p, &f).unwrap();
            let g = net.grad_params(&p, &cache).unwrap();
            let h = 1e-5;
            for (li, w) in p.weights.iter().enumerate() {
                for k in (0..w.len()).step_by(7) {
                    let mut plus = p.clone();
                    plus.weights[li][k] += h;
                    let mut minus = p.clone();
                    minus.weights[li][k] -= h;
                    let fd = (net.forward(&plus, &f).unwrap().0[0] - net.forward(&minus, &f).unwrap().0[0]) / (2.0 * h);
                    let scale = g[li][k].abs().max(1e-3);
                    assert!((fd - g[li][k]).abs() / scale < 1e-6, "{kind:?} layer {li} entry {k}: {fd} vs {}", g[li][k]);
                }
            }
        }
    }

    #[test]
    fn forward_is_invariant_under_rotations_and_shifts() {
        let net = small_net(NonlinKind::Relu);
        let p = net.init_params(11, 0);
        let f = image(4, 12);
        let base = net.forward(&p, &f).unwrap().0[0];
        for q in 1..4 {
            let g = f.rotated(q).unwrap().shifted(1, 3);
            assert!((net.forward(&p, &g).unwrap().0[0] - base).abs() < 1e-10);
        }
    }

    #[test]
    fn empirical_ntk_is_symmetric_and_nonnegative() {
        let net = small_net(NonlinKind::Erf);
        let p = net.init_params(5, 0);
        let (f, g) = (image(4, 1), image(4, 2));
        let gf = net.grad_params(&p, &net.forward(&p, &f).unwrap().1).unwrap();
        let gg = net.grad_params(&p, &net.forward(&p, &g).unwrap().1).unwrap();
        assert_eq!(empirical_ntk(&gf, &gg).unwrap(), empirical_ntk(&gg, &gf).unwrap());
        assert!(empirical_ntk(&gf, &gf).unwrap() >= 0.0);
    }

    #[test]
    fn estimates_are_thread_count_independent() {
        let net = small_net(NonlinKind::Relu);
        let inputs = vec![image(4, 1), image(4, 2)];
        let a = estimate_kernels(&net, &inputs, 6, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_kernels(&net, &inputs, 6, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
