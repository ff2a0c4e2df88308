//! Checks of the equivalences between group-averaged kernels of ordinary
//! networks and kernels of group convolutional networks, and of the induced
//! predictor equality for data augmentation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{EntkError, Result};
use crate::kernel::{ArchitectureSpec, Input, NonlinKind, Pipeline, Support};
use crate::planar::{FiniteGroup, GridGeom, Image, Padding};
use crate::predict::{encode_labels, mean_loss_rate, GramMatrix, Spectral};

/// Tolerance for the kernel identities.
pub const KERNEL_TOL: f64 = 1e-10;
/// Tolerance for the predictor gap.
pub const PREDICTION_TOL: f64 = 1e-8;

/// Finite group acting on images.
#[derive(Clone, Debug)]
pub enum FiniteGroupSpec {
    /// `C_n` about the grid center.
    Rotations { geom: GridGeom },
    /// `C_n ⋉ (Z_H × Z_W)` on a circular grid.
    RotoTranslations(FiniteGroup),
}

impl FiniteGroupSpec {
    pub fn rotations(geom: GridGeom) -> Result<Self> {
        if geom.h != geom.w && geom.n_rot > 2 {
            return Err(EntkError::Geometry("quarter turns need a square grid".into()));
        }
        Ok(FiniteGroupSpec::Rotations { geom })
    }

    pub fn roto_translations(geom: GridGeom) -> Result<Self> {
        let g = FiniteGroup::new(geom)?;
        if g.order() > 1024 {
            return Err(EntkError::Geometry(format!("group of order {} too large", g.order())));
        }
        Ok(FiniteGroupSpec::RotoTranslations(g))
    }

    pub fn order(&self) -> usize {
        match self {
            FiniteGroupSpec::Rotations { geom } => geom.n_rot,
            FiniteGroupSpec::RotoTranslations(g) => g.order(),
        }
    }

    pub fn geom(&self) -> &GridGeom {
        match self {
            FiniteGroupSpec::Rotations { geom } => geom,
            FiniteGroupSpec::RotoTranslations(g) => &g.geom,
        }
    }

    /// `ρ_reg(g) f` for element index `g`.
    pub fn act(&self, g: usize, f: &Image) -> Result<Image> {
        f.check_geom(self.geom())?;
        match self {
            FiniteGroupSpec::Rotations { geom } => f.rotated(geom.quarter_turns(g)),
            FiniteGroupSpec::RotoTranslations(group) => Ok(group.act_image(g, f)),
        }
    }
}

/// All `|G|` transforms of `f`, in element order.
pub fn orbit(f: &Image, group: &FiniteGroupSpec) -> Result<Vec<Image>> {
    (0..group.order()).map(|g| group.act(g, f)).collect()
}

/// NNGP and NTK values of one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelPair {
    pub nngp: f64,
    pub ntk: f64,
}

/// `(1/|G|) Σ_g k(f, ρ_reg(g) f')`.
pub fn averaged_kernel<'a, F>(base: F, group: &'a FiniteGroupSpec) -> impl Fn(&Image, &Image) -> Result<KernelPair> + 'a
where
    F: Fn(&Image, &Image) -> Result<KernelPair> + 'a,
{
    move |f, fp| {
        let mut acc = KernelPair { nngp: 0.0, ntk: 0.0 };
        for g in orbit(fp, group)? {
            let k = base(f, &g)?;
            acc.nngp += k.nngp;
            acc.ntk += k.ntk;
        }
        let n = group.order() as f64;
        Ok(KernelPair { nngp: acc.nngp / n, ntk: acc.ntk / n })
    }
}

/// Pooled kernel of `arch` as a function of an image pair.
pub fn pipeline_kernel(arch: &ArchitectureSpec) -> Result<impl Fn(&Image, &Image) -> Result<KernelPair>> {
    let p = Pipeline::new(arch)?;
    Ok(move |f: &Image, g: &Image| {
        let (x, y) = (Input::Image(f.clone()), Input::Image(g.clone()));
        let (sx, sy) = if p.needs_self() { (Some(p.self_values(&x)?), Some(p.self_values(&y)?)) } else { (None, None) };
        let s = p.pair(&x, &y, sx.as_ref(), sy.as_ref())?;
        if s.k_xy.len() != 1 {
            return Err(EntkError::Architecture("kernel is not pooled to a scalar".into()));
        }
        Ok(KernelPair { nngp: s.k_xy[0], ntk: s.theta[0] })
    })
}

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub config: Value,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Whether the configuration satisfies the hypotheses of the identity.
    pub conforming: bool,
    pub pass: bool,
}

fn random_image(channels: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::new(channels, h, w, (0..channels * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

fn relative_deviation(a: KernelPair, b: KernelPair) -> f64 {
    let d = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-12);
    d(a.nngp, b.nngp).max(d(a.ntk, b.ntk))
}

fn worst_over_trials<F>(trials: usize, seed: u64, geom: &GridGeom, channels: usize, check: F) -> Result<f64>
where
    F: Fn(&Image, &Image) -> Result<f64> + Sync,
{
    let devs: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let f = random_image(channels, geom.h, geom.w, &mut rng);
            let g = random_image(channels, geom.h, geom.w, &mut rng);
            check(&f, &g)
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Rotation-averaged CNN kernel against the roto-translation GCNN kernel with
/// the same filter shape and depth.
pub fn verify_thm6(
    geom: GridGeom,
    depth: usize,
    support: Support,
    nonlin: NonlinKind,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let offsets = geom.offsets(&support)?;
    let conforming = geom.padding == Padding::Circular && geom.support_is_invariant(&offsets);
    let cnn = ArchitectureSpec::cnn(depth, support.clone(), nonlin, geom.padding);
    let gcnn = ArchitectureSpec::gcnn(depth, support.clone(), nonlin, geom.n_rot, geom.padding);
    let group = FiniteGroupSpec::rotations(geom)?;
    let cnn_k = pipeline_kernel(&cnn)?;
    let avg = averaged_kernel(cnn_k, &group);
    let gk = pipeline_kernel(&gcnn)?;
    let worst = worst_over_trials(trials, seed, &geom, 1, |f, g| Ok(relative_deviation(avg(f, g)?, gk(f, g)?)))?;
    Ok(VerificationReport {
        theorem: "rotation-averaged CNN kernel equals GCNN kernel".into(),
        config: json!({
            "h": geom.h, "w": geom.w, "n_rot": geom.n_rot, "padding": geom.padding,
            "depth": depth, "support": support, "nonlin": nonlin, "trials": trials, "seed": seed,
        }),
        max_deviation: worst,
        tolerance: KERNEL_TOL,
        conforming,
        pass: conforming && worst < KERNEL_TOL,
    })
}

/// Roto-translation-averaged MLP kernel against the GCNN with filters of the
/// given support (global for the identity to hold) and group pooling.
pub fn verify_thm5(
    geom: GridGeom,
    depth: usize,
    support: Support,
    nonlin: NonlinKind,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let group = FiniteGroupSpec::roto_translations(geom)?;
    let offsets = geom.offsets(&support)?;
    let conforming = offsets.len() == geom.pixels();
    let mlp = ArchitectureSpec::mlp(depth, nonlin);
    let gcnn = ArchitectureSpec::gcnn(depth, support.clone(), nonlin, geom.n_rot, Padding::Circular);
    let avg = averaged_kernel(pipeline_kernel(&mlp)?, &group);
    let gk = pipeline_kernel(&gcnn)?;
    let worst = worst_over_trials(trials, seed, &geom, 1, |f, g| Ok(relative_deviation(avg(f, g)?, gk(f, g)?)))?;
    Ok(VerificationReport {
        theorem: "group-averaged MLP kernel equals global GCNN kernel".into(),
        config: json!({
            "h": geom.h, "w": geom.w, "n_rot": geom.n_rot, "group_order": group.order(),
            "depth": depth, "support": support, "nonlin": nonlin, "trials": trials, "seed": seed,
        }),
        max_deviation: worst,
        tolerance: KERNEL_TOL,
        conforming,
        pass: conforming && worst < KERNEL_TOL,
    })
}

/// Prediction gap at one time (`None` is `t = ∞`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeGap {
    pub time: Option<f64>,
    pub max_gap: f64,
}

/// Predictor comparison: CNN kernel on the rotation-augmented training set
/// against the GCNN kernel on the original set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thm4Report {
    pub theorem: String,
    pub config: Value,
    pub gaps: Vec<TimeGap>,
    pub max_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn ntk_gram(p: &Pipeline, xs: &[Input], ys: Option<&[Input]>) -> Result<DMatrix<f64>> {
    let g = p.gram(xs, ys)?;
    Ok(DMatrix::from_row_slice(g.rows, g.cols, &g.ntk))
}

/// Both predictors use gradient flow on the mean squared loss, so the
/// augmented set of `|G|·N` points trains with rate `η/(|G|N)` and the
/// original set with `η/N`.
#[allow(clippy::too_many_arguments)]
pub fn verify_thm4(
    train: &[Image],
    classes: &[usize],
    n_classes: usize,
    test: &[Image],
    times: &[f64],
    eta: f64,
    cnn: &ArchitectureSpec,
    gcnn: &ArchitectureSpec,
    group: &FiniteGroupSpec,
) -> Result<Thm4Report> {
    if train.len() != classes.len() || train.is_empty() {
        return Err(EntkError::Shape(format!("{} training inputs for {} labels", train.len(), classes.len())));
    }
    let y = encode_labels(classes, n_classes)?;
    let n_g = group.order();

    let mut aug = Vec::with_capacity(train.len() * n_g);
    let mut y_aug = DMatrix::zeros(train.len() * n_g, n_classes);
    for (i, f) in train.iter().enumerate() {
        for (k, g) in orbit(f, group)?.into_iter().enumerate() {
            aug.push(Input::Image(g));
            y_aug.row_mut(i * n_g + k).copy_from(&y.row(i));
        }
    }
    let train_in: Vec<Input> = train.iter().cloned().map(Input::Image).collect();
    let test_in: Vec<Input> = test.iter().cloned().map(Input::Image).collect();

    let pc = Pipeline::new(cnn)?;
    let pg = Pipeline::new(gcnn)?;
    let gram_c = ntk_gram(&pc, &aug, None)?;
    let k_c = ntk_gram(&pc, &test_in, Some(&aug))?;
    let gram_g = ntk_gram(&pg, &train_in, None)?;
    let k_g = ntk_gram(&pg, &test_in, Some(&train_in))?;
    let sym = |m: &DMatrix<f64>| GramMatrix::new(m.nrows(), m.transpose().as_slice().to_vec());
    let spec_c = Spectral::new(&sym(&gram_c)?, 0.0)?;
    let spec_g = Spectral::new(&sym(&gram_g)?, 0.0)?;
    let (eta_c, eta_g) = (mean_loss_rate(eta, aug.len()), mean_loss_rate(eta, train.len()));

    let mut all_times: Vec<f64> = times.to_vec();
    all_times.push(f64::INFINITY);
    let mut gaps = Vec::new();
    let mut worst = 0.0f64;
    for &t in &all_times {
        let a = spec_c.predict_at_time(&k_c, &y_aug, t, eta_c)?;
        let b = spec_g.predict_at_time(&k_g, &y, t, eta_g)?;
        let gap = (a - b).amax();
        worst = worst.max(gap);
        gaps.push(TimeGap { time: t.is_finite().then_some(t), max_gap: gap });
    }
    Ok(Thm4Report {
        theorem: "augmented CNN predictor equals GCNN predictor".into(),
        config: json!({
            "n_train": train.len(), "n_test": test.len(), "group_order": n_g, "eta": eta,
            "cnn": cnn, "gcnn": gcnn,
        }),
        gaps,
        max_gap: worst,
        tolerance: PREDICTION_TOL,
        pass: worst < PREDICTION_TOL,
    })
}

/// Default predictor check: `train` random images with random labels on an
/// `h×h` grid, `noise` of the test inputs being pure noise and the rest
/// rotated training images, eight log-spaced times.
pub fn default_thm4(h: usize, depth: usize, nonlin: NonlinKind, n_train: usize, n_noise: usize, seed: u64) -> Result<Thm4Report> {
    let geom = GridGeom::square(h, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train: Vec<Image> = (0..n_train).map(|_| random_image(1, h, h, &mut rng)).collect();
    let n_classes = 3;
    let classes: Vec<usize> = (0..n_train).map(|_| rng.gen_range(0..n_classes)).collect();
    let mut test: Vec<Image> = (0..n_noise).map(|_| random_image(1, h, h, &mut rng)).collect();
    for f in train.iter().take(2) {
        test.push(f.rotated(1)?.shifted(1, 0));
    }
    let times: Vec<f64> = (0..8).map(|i| 10f64.powf(-2.0 + i as f64 * 5.0 / 7.0)).collect();
    let cnn = ArchitectureSpec::cnn(depth, Support::Square(3), nonlin, Padding::Circular);
    let gcnn = ArchitectureSpec::gcnn(depth, Support::Square(3), nonlin, 4, Padding::Circular);
    verify_thm4(&train, &classes, n_classes, &test, &times, 1.0, &cnn, &gcnn, &FiniteGroupSpec::rotations(geom)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, seed: u64) -> Image {
        random_image(1, h, h, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn orbits() {
        let geom = GridGeom::square(4, 4).unwrap();
        let g = FiniteGroupSpec::rotations(geom).unwrap();
        let c = Image::new(1, 4, 4, vec![2.0; 16]).unwrap();
        assert!(orbit(&c, &g).unwrap().iter().all(|x| *x == c));
        let o = orbit(&img(4, 1), &g).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(o[i], o[j]);
            }
        }
        // composing two actions is the action of the product
        let rt = FiniteGroupSpec::roto_translations(geom).unwrap();
        let FiniteGroupSpec::RotoTranslations(group) = &rt else { unreachable!() };
        let f = img(4, 2);
        for (a, b) in [(3, 17), (20, 45), (63, 5)] {
            let twice = rt.act(a, &rt.act(b, &f).unwrap()).unwrap();
            assert_eq!(twice, rt.act(group.mul(a, b), &f).unwrap());
        }
        assert_eq!(rt.order(), 64);
    }

    #[test]
    fn averaging_is_idempotent_and_fixes_invariant_kernels() {
        let geom = GridGeom::square(4, 4).unwrap();
        let g = FiniteGroupSpec::rotations(geom).unwrap();
        let constant = averaged_kernel(|_: &Image, _: &Image| Ok(KernelPair { nngp: 1.5, ntk: 2.0 }), &g);
        assert_eq!(constant(&img(4, 1), &img(4, 2)).unwrap(), KernelPair { nngp: 1.5, ntk: 2.0 });

        let cnn = ArchitectureSpec::cnn(2, Support::Square(3), NonlinKind::Relu, Padding::Circular);
        let base = pipeline_kernel(&cnn).unwrap();
        let (f, h) = (img(4, 3), img(4, 4));
        let mut loop_sum = KernelPair { nngp: 0.0, ntk: 0.0 };
        for q in 0..4 {
            let k = base(&f, &h.rotated(q).unwrap()).unwrap();
            loop_sum.nngp += k.nngp / 4.0;
            loop_sum.ntk += k.ntk / 4.0;
        }
        let avg = averaged_kernel(pipeline_kernel(&cnn).unwrap(), &g);
        let once = avg(&f, &h).unwrap();
        assert!(relative_deviation(once, loop_sum) < 1e-14);
        let twice = averaged_kernel(avg, &g);
        assert!(relative_deviation(twice(&f, &h).unwrap(), once) < 1e-12);
    }

    #[test]
    fn thm6_depth_one_and_three() {
        let geom = GridGeom::square(4, 4).unwrap();
        for depth in [1, 3] {
            let r = verify_thm6(geom, depth, Support::Square(3), NonlinKind::Relu, 3, 1).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let zero = GridGeom::new(4, 4, Padding::Zero, 4).unwrap();
        let r = verify_thm6(zero, 2, Support::Square(3), NonlinKind::Relu, 2, 1).unwrap();
        assert!(!r.conforming && !r.pass);
    }

    #[test]
    fn thm5_needs_global_filters() {
        let geom = GridGeom::square(3, 4).unwrap();
        let r = verify_thm5(geom, 2, Support::Global, NonlinKind::Erf, 2, 3).unwrap();
        assert!(r.pass, "{r:?}");
        let r = verify_thm5(geom, 2, Support::Square(1), NonlinKind::Erf, 2, 3).unwrap();
        assert!(!r.conforming && !r.pass);
    }

    #[test]
    fn thm4_small() {
        let r = default_thm4(4, 2, NonlinKind::Relu, 4, 2, 5).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.gaps.len(), 9);
        assert!(r.gaps.last().unwrap().time.is_none());
    }
}
