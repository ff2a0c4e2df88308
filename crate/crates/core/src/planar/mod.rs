//! Kernel recursions for `C_n ⋉ Z_H×Z_W` acting on pixel grids.
//!
//! Group elements are pairs `g = (t, r)` acting on pixels by
//! `ρ(g)x = t + R^r x`, with `R` the quarter-turn `(a, b) ↦ (−b, a)` on
//! offsets. Kernels are stored as row-major matrices over group elements with
//! single index `r·H·W + t1·W + t2`.

mod brute;
mod ops;

pub use brute::{
    brute_force_gpool, brute_force_group_layer, brute_force_lifting, brute_force_lifting_state, brute_force_state_layer, FiniteGroup,
};
pub use ops::{a_operator, cnn_conv_kernel, gconv_planar, gpool_planar, input_kernel_planar, lifting_planar, sumpool_cnn};

use serde::{Deserialize, Serialize};

use crate::error::{EntkError, Result};
use crate::kernel::Support;

/// Boundary handling of convolutions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Circular,
    Zero,
}

/// Pixel grid plus rotation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridGeom {
    pub h: usize,
    pub w: usize,
    pub padding: Padding,
    pub n_rot: usize,
}

impl GridGeom {
    pub fn new(h: usize, w: usize, padding: Padding, n_rot: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(EntkError::Geometry("empty grid".into()));
        }
        if ![1, 2, 4].contains(&n_rot) {
            return Err(EntkError::Geometry(format!("n_rot {n_rot} not in {{1, 2, 4}}")));
        }
        if n_rot > 1 && h != w {
            return Err(EntkError::Geometry(format!("rotations need a square grid, got {h}×{w}")));
        }
        Ok(GridGeom { h, w, padding, n_rot })
    }

    pub fn square(h: usize, n_rot: usize) -> Result<Self> {
        Self::new(h, h, Padding::Circular, n_rot)
    }

    pub fn pixels(&self) -> usize {
        self.h * self.w
    }

    /// Quarter turns represented by rotation index `r`.
    pub fn quarter_turns(&self, r: usize) -> usize {
        (r % self.n_rot) * (4 / self.n_rot)
    }

    /// Same grid without rotations.
    pub fn translations_only(&self) -> GridGeom {
        GridGeom { n_rot: 1, ..*self }
    }

    /// Pixel reached from `t` by offset `o`; `None` outside a zero-padded grid.
    pub(crate) fn shift(&self, t: usize, o: (i64, i64)) -> Option<usize> {
        let (h, w) = (self.h as i64, self.w as i64);
        let i = (t / self.w) as i64 + o.0;
        let j = (t % self.w) as i64 + o.1;
        match self.padding {
            Padding::Circular => Some((i.rem_euclid(h) * w + j.rem_euclid(w)) as usize),
            Padding::Zero => {
                if (0..h).contains(&i) && (0..w).contains(&j) {
                    Some((i * w + j) as usize)
                } else {
                    None
                }
            }
        }
    }

    /// Rotation of pixel `t` about the grid center by `q` quarter turns,
    /// matching [`rotate_grid`]: `(i, j) ↦ (H−1−j, i)` per turn.
    pub(crate) fn rotate_pixel(&self, t: usize, q: usize) -> usize {
        let (mut i, mut j) = (t / self.w, t % self.w);
        for _ in 0..q % 4 {
            let ni = self.h - 1 - j;
            j = i;
            i = ni;
        }
        i * self.w + j
    }

    /// Resolve a support into offsets, checking it fits the grid.
    pub fn offsets(&self, support: &Support) -> Result<Vec<(i64, i64)>> {
        let offs: Vec<(i64, i64)> = match support {
            Support::Square(k) => {
                if k % 2 == 0 || *k == 0 {
                    return Err(EntkError::Geometry(format!("square support {k} must be odd")));
                }
                if *k > self.h || *k > self.w {
                    return Err(EntkError::Geometry(format!("support {k}×{k} exceeds grid {}×{}", self.h, self.w)));
                }
                let r = (*k / 2) as i64;
                (-r..=r).flat_map(|a| (-r..=r).map(move |b| (a, b))).collect()
            }
            Support::Global => {
                if self.padding != Padding::Circular {
                    return Err(EntkError::Geometry("global support needs circular padding".into()));
                }
                (0..self.h as i64).flat_map(|a| (0..self.w as i64).map(move |b| (a, b))).collect()
            }
            Support::Offsets(v) => {
                if v.is_empty() {
                    return Err(EntkError::Geometry("empty support".into()));
                }
                for o in v {
                    if o[0].unsigned_abs() as usize >= self.h || o[1].unsigned_abs() as usize >= self.w {
                        return Err(EntkError::Geometry(format!("offset {o:?} outside grid")));
                    }
                }
                v.iter().map(|o| (o[0], o[1])).collect()
            }
        };
        Ok(offs)
    }

    /// Whether `R^r S = S` for every rotation of this geometry.
    pub fn support_is_invariant(&self, offsets: &[(i64, i64)]) -> bool {
        let canon = |o: (i64, i64)| match self.padding {
            Padding::Circular => (o.0.rem_euclid(self.h as i64), o.1.rem_euclid(self.w as i64)),
            Padding::Zero => o,
        };
        let mut base: Vec<_> = offsets.iter().map(|&o| canon(o)).collect();
        base.sort();
        base.dedup();
        (0..self.n_rot).all(|r| {
            let q = self.quarter_turns(r);
            let mut rot: Vec<_> = offsets.iter().map(|&o| canon(rotate_offset(o, q))).collect();
            rot.sort();
            rot.dedup();
            rot == base
        })
    }
}

/// Linear quarter-turn `(a, b) ↦ (−b, a)` applied `q` times.
pub fn rotate_offset(o: (i64, i64), q: usize) -> (i64, i64) {
    let (mut a, mut b) = o;
    for _ in 0..q % 4 {
        let na = -b;
        b = a;
        a = na;
    }
    (a, b)
}

/// Rotate an `H×H` field by `q` counter-clockwise quarter turns:
/// one turn maps `output[i][j] = input[j][H−1−i]`.
pub fn rotate_grid(field: &[f64], h: usize, w: usize, q: usize) -> Result<Vec<f64>> {
    if field.len() != h * w {
        return Err(EntkError::Shape(format!("field of length {} is not {h}×{w}", field.len())));
    }
    if q % 4 == 0 {
        return Ok(field.to_vec());
    }
    if h != w {
        return Err(EntkError::Geometry("rotation of a non-square grid".into()));
    }
    let mut cur = field.to_vec();
    for _ in 0..q % 4 {
        let mut next = vec![0.0; h * w];
        for i in 0..h {
            for j in 0..w {
                next[i * w + j] = cur[j * w + (h - 1 - i)];
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// Multichannel image, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(channels: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * h * w || channels == 0 {
            return Err(EntkError::Shape(format!("image data of length {} for {channels}×{h}×{w}", data.len())));
        }
        Ok(Image { channels, h, w, data })
    }

    pub fn zeros(channels: usize, h: usize, w: usize) -> Self {
        Image { channels, h, w, data: vec![0.0; channels * h * w] }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.h * self.w;
        &self.data[c * p..(c + 1) * p]
    }

    /// Every channel rotated by `q` quarter turns (see [`rotate_grid`]).
    pub fn rotated(&self, q: usize) -> Result<Image> {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            data.extend(rotate_grid(self.channel(c), self.h, self.w, q)?);
        }
        Ok(Image { data, ..*self })
    }

    /// Circular shift: `out(x) = in(x − d)`.
    pub fn shifted(&self, d1: i64, d2: i64) -> Image {
        let (h, w) = (self.h as i64, self.w as i64);
        let mut data = vec![0.0; self.data.len()];
        let p = self.h * self.w;
        for c in 0..self.channels {
            for i in 0..h {
                for j in 0..w {
                    let si = (i - d1).rem_euclid(h);
                    let sj = (j - d2).rem_euclid(w);
                    data[c * p + (i * w + j) as usize] = self.data[c * p + (si * w + sj) as usize];
                }
            }
        }
        Image { data, ..*self }
    }

    pub fn check_geom(&self, geom: &GridGeom) -> Result<()> {
        if self.h != geom.h || self.w != geom.w {
            return Err(EntkError::Shape(format!("image {}×{} on grid {}×{}", self.h, self.w, geom.h, geom.w)));
        }
        Ok(())
    }
}
