use rayon::prelude::*;

use crate::error::{EntkError, Result};
use crate::planar::{cnn_conv_kernel, gconv_planar, gpool_planar, input_kernel_planar, lifting_planar, sumpool_cnn, GridGeom, Image};
use crate::so3::{
    cached_transform, gconv_so3, gpool_so3, input_kernel_s2, lifting_so3, nonlinearity_so3, nonlinearity_so3_invariant, FourierKernel,
    SphereSignal,
};

use super::arch::{ArchitectureSpec, GroupParams, Layer};
use super::layers::{apply_nonlinearity, fan_in_sum, fc_layer, flatten_input};
use super::state::KernelState;

/// One network input.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Image(Image),
    Sphere(SphereSignal),
    Vector(Vec<f64>),
    /// Per-branch inputs of a fan-in network.
    Branches(Vec<Input>),
}

impl Input {
    fn branches(&self) -> Result<&[Input]> {
        match self {
            Input::Branches(b) => Ok(b),
            _ => Err(EntkError::Argument("fan-in network needs branch inputs".into())),
        }
    }
}

/// Pooled self-kernels of one input, one per branch.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfValues(pub Vec<f64>);

/// Validated architecture split into a spatial front (through the layer that
/// reaches the scalar domain), per-branch scalar layers, and a tail after the
/// fan-in.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub spec: ArchitectureSpec,
    split: usize,
    fan: Option<usize>,
    needs_self: bool,
}

enum Spatial {
    Planar(KernelState),
    So3(FourierKernel),
}

impl Pipeline {
    pub fn new(spec: &ArchitectureSpec) -> Result<Self> {
        spec.validate()?;
        let split = spec.scalarizing_layer().expect("validated network reaches a scalar domain");
        let fan = spec.fan_in_position();
        let exact_diag = matches!(spec.layers[split], Layer::Flatten);
        let needs_self = !exact_diag && spec.layers[split + 1..].iter().any(|l| matches!(l, Layer::Nonlin { .. }));
        Ok(Pipeline { spec: spec.clone(), split, fan, needs_self })
    }

    /// Whether pooled self-kernels must be computed before pair values.
    pub fn needs_self(&self) -> bool {
        self.needs_self
    }

    fn front(&self, x: &Input, y: &Input) -> Result<KernelState> {
        let layers = &self.spec.layers[..=self.split];
        match (&self.spec.group, x, y) {
            (_, Input::Vector(a), Input::Vector(b)) => {
                expect_flatten(layers)?;
                flatten_input(a, b)
            }
            (_, Input::Image(a), Input::Image(b)) if layers.len() == 1 && matches!(layers[0], Layer::Flatten) => {
                flatten_input(&a.data, &b.data)
            }
            (GroupParams::Planar { n_rot, padding }, Input::Image(a), Input::Image(b)) => {
                let geom = GridGeom::new(a.h, a.w, *padding, *n_rot)?;
                let mut s = input_kernel_planar(a, b, &geom)?;
                for layer in layers {
                    s = match layer {
                        Layer::Lifting { support } => lifting_planar(&s, support, &geom)?,
                        Layer::GConv { support } => gconv_planar(&s, support, &geom, true)?,
                        Layer::ConvCnn { support } => cnn_conv_kernel(&s, support, &geom.translations_only())?,
                        Layer::Nonlin { nonlin } => apply_nonlinearity(&s, *nonlin)?,
                        Layer::GPool => gpool_planar(&s)?,
                        Layer::SumPoolCnn => sumpool_cnn(&s)?,
                        l => return Err(EntkError::Architecture(format!("{l:?} in the spatial stage"))),
                    };
                }
                Ok(s)
            }
            (GroupParams::So3 { bandlimit, work_band, quadrature }, Input::Sphere(a), Input::Sphere(b)) => {
                let band = *bandlimit;
                let (a, b) = (a.truncated(band)?, b.truncated(band)?);
                let k0 = input_kernel_s2(&a, &b)?;
                let work = cached_transform(band, work_band.unwrap_or(2 * band).max(2 * band), *quadrature)?;
                let mut cur: Option<Spatial> = None;
                for layer in layers {
                    cur = Some(match (layer, cur) {
                        (Layer::Lifting { .. }, None) => Spatial::So3(lifting_so3(&k0)?),
                        (Layer::GConv { .. }, Some(Spatial::So3(k))) => Spatial::So3(gconv_so3(&k)?),
                        (Layer::Nonlin { nonlin }, Some(Spatial::So3(k))) => Spatial::So3(if k.invariant {
                            nonlinearity_so3_invariant(&k, *nonlin, &work)?
                        } else {
                            nonlinearity_so3(&k, *nonlin, &work)?
                        }),
                        (Layer::GPool, Some(Spatial::So3(k))) => Spatial::Planar(gpool_so3(&k)?),
                        (l, _) => return Err(EntkError::Architecture(format!("{l:?} in the SO(3) stage"))),
                    });
                }
                match cur {
                    Some(Spatial::Planar(s)) => Ok(s),
                    _ => Err(EntkError::Architecture("SO(3) stage did not pool".into())),
                }
            }
            (g, _, _) => Err(EntkError::Argument(format!("inputs do not match the {g:?} architecture"))),
        }
    }

    fn branch_inputs<'a>(&self, x: &'a Input) -> Result<Vec<&'a Input>> {
        if self.fan.is_some() {
            Ok(x.branches()?.iter().collect())
        } else {
            Ok(vec![x])
        }
    }

    /// Pooled self-kernels `K(x, x)` after the spatial front, per branch.
    pub fn self_values(&self, x: &Input) -> Result<SelfValues> {
        let mut out = Vec::new();
        for b in self.branch_inputs(x)? {
            out.push(self.front(b, b)?.k_xy[0]);
        }
        Ok(SelfValues(out))
    }

    fn mid_layers(&self) -> &[Layer] {
        let end = self.fan.unwrap_or(self.spec.layers.len());
        &self.spec.layers[self.split + 1..end]
    }

    fn tail_layers(&self) -> &[Layer] {
        match self.fan {
            Some(f) => &self.spec.layers[f + 1..],
            None => &[],
        }
    }

    /// Scalar state of the network output for the pair `(x, y)`. Self values
    /// are computed on demand when not supplied.
    pub fn pair(&self, x: &Input, y: &Input, sx: Option<&SelfValues>, sy: Option<&SelfValues>) -> Result<KernelState> {
        let (bx, by) = (self.branch_inputs(x)?, self.branch_inputs(y)?);
        let own;
        let sx = match (self.needs_self, sx) {
            (true, None) => {
                own = self.self_values(x)?;
                Some(&own)
            }
            (_, s) => s,
        };
        let own_y;
        let sy = match (self.needs_self, sy) {
            (true, None) => {
                own_y = self.self_values(y)?;
                Some(&own_y)
            }
            (_, s) => s,
        };
        let count = bx.len().max(by.len());
        let mut states = Vec::with_capacity(count);
        for i in 0..count {
            let mut s = match (bx.get(i), by.get(i)) {
                (Some(a), Some(b)) => self.front(a, b)?,
                (Some(a), None) => {
                    let d = self.front(a, a)?.k_xy[0];
                    KernelState::scalar(0.0, d, 0.0, 0.0)
                }
                (None, Some(b)) => {
                    let d = self.front(b, b)?.k_xy[0];
                    KernelState::scalar(0.0, 0.0, d, 0.0)
                }
                (None, None) => unreachable!(),
            };
            if self.needs_self {
                let pick = |v: Option<&SelfValues>, cur: f64| -> Result<f64> {
                    match v.and_then(|s| s.0.get(i)) {
                        Some(&d) => Ok(d),
                        None if cur == 0.0 => Ok(0.0),
                        None => Err(EntkError::Argument(format!("missing self value for branch {i}"))),
                    }
                };
                s.k_xx[0] = pick(sx, s.k_xx[0])?;
                s.k_yy[0] = pick(sy, s.k_yy[0])?;
            }
            states.push(run_scalar(s, self.mid_layers())?);
        }
        let s = if self.fan.is_some() { fan_in_sum(&states)? } else { states.pop().expect("one branch") };
        run_scalar(s, self.tail_layers())
    }
}

fn expect_flatten(layers: &[Layer]) -> Result<()> {
    if layers.len() == 1 && matches!(layers[0], Layer::Flatten) {
        Ok(())
    } else {
        Err(EntkError::Argument("vector inputs need a network starting with flatten".into()))
    }
}

fn run_scalar(mut s: KernelState, layers: &[Layer]) -> Result<KernelState> {
    for layer in layers {
        s = match layer {
            Layer::Nonlin { nonlin } => apply_nonlinearity(&s, *nonlin)?,
            Layer::Dense => fc_layer(&s)?,
            l => return Err(EntkError::Architecture(format!("{l:?} in the scalar stage"))),
        };
    }
    Ok(s)
}

/// NNGP and NTK of the network output for one pair.
pub fn run_pipeline(spec: &ArchitectureSpec, x: &Input, y: &Input) -> Result<KernelState> {
    Pipeline::new(spec)?.pair(x, y, None, None)
}

/// Row-major NNGP and NTK Gram matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Gram {
    pub rows: usize,
    pub cols: usize,
    pub nngp: Vec<f64>,
    pub ntk: Vec<f64>,
}

impl Pipeline {
    pub fn all_self_values(&self, xs: &[Input]) -> Result<Option<Vec<SelfValues>>> {
        if !self.needs_self {
            return Ok(None);
        }
        xs.par_iter().map(|x| self.self_values(x)).collect::<Result<Vec<_>>>().map(Some)
    }

    /// Gram blocks between `xs` and `ys` (or `xs` with itself, using symmetry).
    pub fn gram(&self, xs: &[Input], ys: Option<&[Input]>) -> Result<Gram> {
        let sx = self.all_self_values(xs)?;
        let (ys_ref, sy) = match ys {
            Some(v) => (v, self.all_self_values(v)?),
            None => (xs, sx.clone()),
        };
        let symmetric = ys.is_none();
        let (r, c) = (xs.len(), ys_ref.len());
        let pairs: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).filter(|&(i, j)| !symmetric || j >= i).collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| {
                let s = self.pair(&xs[i], &ys_ref[j], sx.as_ref().map(|v| &v[i]), sy.as_ref().map(|v| &v[j]))?;
                Ok((s.k_xy[0], s.theta[0]))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = Gram { rows: r, cols: c, nngp: vec![0.0; r * c], ntk: vec![0.0; r * c] };
        for (&(i, j), (k, t)) in pairs.iter().zip(values) {
            g.nngp[i * c + j] = k;
            g.ntk[i * c + j] = t;
            if symmetric {
                g.nngp[j * c + i] = k;
                g.ntk[j * c + i] = t;
            }
        }
        Ok(g)
    }
}
