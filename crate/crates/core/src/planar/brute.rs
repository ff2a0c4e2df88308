use crate::error::{EntkError, Result};
use crate::kernel::{Domain, KernelState};

use super::{rotate_offset, GridGeom, Image, Padding};

/// Explicit `C_n ⋉ Z_H×Z_W` with multiplication, inverse and action tables.
///
/// Element `e = r·H·W + t1·W + t2` is `(t, r)`; the product is
/// `(t, r)(t', r') = (t + R^r t', r + r')` and the action on pixels
/// `ρ(g)x = t + R^r x`, all modulo the grid.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    pub geom: GridGeom,
    mul: Vec<usize>,
    inv: Vec<usize>,
    act: Vec<usize>,
}

impl FiniteGroup {
    pub fn new(geom: GridGeom) -> Result<Self> {
        if geom.padding != Padding::Circular {
            return Err(EntkError::Unsupported("finite group needs circular padding".into()));
        }
        let p = geom.pixels();
        let n = geom.n_rot;
        let size = n * p;
        if size > 4096 {
            return Err(EntkError::Geometry(format!("group of order {size} too large")));
        }
        let vec_of = |t: usize| ((t / geom.w) as i64, (t % geom.w) as i64);
        let pix_of = |v: (i64, i64)| (v.0.rem_euclid(geom.h as i64) as usize) * geom.w + v.1.rem_euclid(geom.w as i64) as usize;
        let mut mul = vec![0; size * size];
        let mut act = vec![0; size * p];
        for a in 0..size {
            let (ra, ta) = (a / p, vec_of(a % p));
            let qa = geom.quarter_turns(ra);
            for b in 0..size {
                let (rb, tb) = (b / p, vec_of(b % p));
                let rt = rotate_offset(tb, qa);
                let t = pix_of((ta.0 + rt.0, ta.1 + rt.1));
                mul[a * size + b] = ((ra + rb) % n) * p + t;
            }
            for x in 0..p {
                let rx = rotate_offset(vec_of(x), qa);
                act[a * p + x] = pix_of((ta.0 + rx.0, ta.1 + rx.1));
            }
        }
        let mut inv = vec![usize::MAX; size];
        for a in 0..size {
            for b in 0..size {
                if mul[a * size + b] == 0 {
                    inv[a] = b;
                }
            }
        }
        let g = FiniteGroup { geom, mul, inv, act };
        g.check_axioms()?;
        Ok(g)
    }

    pub fn order(&self) -> usize {
        self.inv.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order() + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    /// Pixel `ρ(g)x`.
    pub fn act(&self, g: usize, x: usize) -> usize {
        self.act[g * self.geom.pixels() + x]
    }

    /// Element with translation `t` (a pixel index) and rotation index `r`.
    pub fn element(&self, t: usize, r: usize) -> usize {
        r * self.geom.pixels() + t
    }

    fn check_axioms(&self) -> Result<()> {
        let n = self.order();
        for a in 0..n {
            if self.inv[a] == usize::MAX || self.mul(self.inv[a], a) != 0 {
                return Err(EntkError::Geometry(format!("element {a} has no two-sided inverse")));
            }
            if self.mul(0, a) != a || self.mul(a, 0) != a {
                return Err(EntkError::Geometry("identity law fails".into()));
            }
        }
        for a in (0..n).step_by(1 + n / 7) {
            for b in (0..n).step_by(1 + n / 11) {
                for c in (0..n).step_by(1 + n / 5) {
                    if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                        return Err(EntkError::Geometry("associativity fails".into()));
                    }
                }
                for x in 0..self.geom.pixels() {
                    if self.act(self.mul(a, b), x) != self.act(a, self.act(b, x)) {
                        return Err(EntkError::Geometry("action is not compatible with product".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Regular action on images: `(ρ_reg(g) f)(x) = f(ρ(g)⁻¹ x)`.
    pub fn act_image(&self, g: usize, f: &Image) -> Image {
        let p = self.geom.pixels();
        let gi = self.inv(g);
        let mut data = vec![0.0; f.data.len()];
        for c in 0..f.channels {
            for x in 0..p {
                data[c * p + x] = f.data[c * p + self.act(gi, x)];
            }
        }
        Image { data, ..*f }
    }

    /// Elements `(s, r̃)` for every rotation `r̃` and offset `s`.
    pub fn support_elements(&self, offsets: &[(i64, i64)]) -> Vec<usize> {
        let mut out = Vec::new();
        for r in 0..self.geom.n_rot {
            for &o in offsets {
                let t = self.geom.shift(0, o).expect("circular shift");
                out.push(self.element(t, r));
            }
        }
        out
    }
}

/// Literal finite sum `K_{g,g'} ← (1/|S|) Σ_{h∈S} K_{gh, g'h}` on an
/// `|G|×|G|` matrix.
pub fn brute_force_group_layer(group: &FiniteGroup, k: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let n = group.order();
    if k.len() != n * n {
        return Err(EntkError::Shape(format!("kernel of length {} for group of order {n}", k.len())));
    }
    if support.is_empty() {
        return Err(EntkError::Geometry("empty support".into()));
    }
    let mut out = vec![0.0; n * n];
    for g in 0..n {
        for gp in 0..n {
            let s: f64 = support.iter().map(|&h| k[group.mul(g, h) * n + group.mul(gp, h)]).sum();
            out[g * n + gp] = s / support.len() as f64;
        }
    }
    Ok(out)
}

/// Literal lifting sum `K¹_{g,g'} = (1/|S|) Σ_{x∈S} K⁰_{ρ(g)x, ρ(g')x}` for a
/// `P×P` pixel kernel and pixel support `S`.
pub fn brute_force_lifting(group: &FiniteGroup, k0: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let p = group.geom.pixels();
    let n = group.order();
    if k0.len() != p * p {
        return Err(EntkError::Shape(format!("pixel kernel of length {}", k0.len())));
    }
    let mut out = vec![0.0; n * n];
    for g in 0..n {
        for gp in 0..n {
            let s: f64 = support.iter().map(|&x| k0[group.act(g, x) * p + group.act(gp, x)]).sum();
            out[g * n + gp] = s / support.len() as f64;
        }
    }
    Ok(out)
}

/// Literal pooling `(1/|G|²) Σ_{g,g'} K_{g,g'}`.
pub fn brute_force_gpool(group: &FiniteGroup, k: &[f64]) -> f64 {
    let n = group.order();
    let mut s = 0.0;
    for g in 0..n {
        for gp in 0..n {
            s += k[g * n + gp];
        }
    }
    s / (n * n) as f64
}

/// Applies the brute-force layers to a full kernel state (cross field and
/// NTK) so whole pipelines can be replayed against the optimized path.
pub fn brute_force_state_layer(group: &FiniteGroup, state: &KernelState, support: &[usize]) -> Result<KernelState> {
    let k = brute_force_group_layer(group, &state.k_xy, support)?;
    let t = brute_force_group_layer(group, &state.theta, support)?;
    let theta = k.iter().zip(&t).map(|(a, b)| a + b).collect();
    let diag = |d: &[f64]| -> Vec<f64> {
        (0..group.order()).map(|g| support.iter().map(|&h| d[group.mul(g, h)]).sum::<f64>() / support.len() as f64).collect()
    };
    Ok(KernelState { domain: state.domain.clone(), k_xy: k, k_xx: diag(&state.k_xx), k_yy: diag(&state.k_yy), theta })
}

/// Brute-force lifting of a whole pixel-domain kernel state.
pub fn brute_force_lifting_state(group: &FiniteGroup, state: &KernelState, support: &[usize]) -> Result<KernelState> {
    let k = brute_force_lifting(group, &state.k_xy, support)?;
    let t = brute_force_lifting(group, &state.theta, support)?;
    let theta = k.iter().zip(&t).map(|(a, b)| a + b).collect();
    let diag = |d: &[f64]| -> Vec<f64> {
        (0..group.order()).map(|g| support.iter().map(|&x| d[group.act(g, x)]).sum::<f64>() / support.len() as f64).collect()
    };
    Ok(KernelState {
        domain: Domain::Planar { n_rot: group.geom.n_rot, h: group.geom.h, w: group.geom.w },
        k_xy: k,
        k_xx: diag(&state.k_xx),
        k_yy: diag(&state.k_yy),
        theta,
    })
}
