use crate::error::{EntkError, Result};
use crate::kernel::{pool_mean, Domain, KernelState, Support};

use super::{rotate_offset, GridGeom, Image};

fn planar_dims(state: &KernelState, geom: &GridGeom) -> Result<usize> {
    match state.domain {
        Domain::Planar { n_rot, h, w } if h == geom.h && w == geom.w => Ok(n_rot),
        ref d => Err(EntkError::Domain(format!("expected planar state on {}×{}, found {d:?}", geom.h, geom.w))),
    }
}

/// Input-layer kernel `K⁰(t, t') = (1/n_in) Σ_c f_c(t) f'_c(t')`, Θ⁰ = 0.
pub fn input_kernel_planar(f: &Image, g: &Image, geom: &GridGeom) -> Result<KernelState> {
    f.check_geom(geom)?;
    g.check_geom(geom)?;
    if f.channels != g.channels {
        return Err(EntkError::Shape(format!("{} vs {} channels", f.channels, g.channels)));
    }
    let p = geom.pixels();
    let inv = 1.0 / f.channels as f64;
    let mut k = vec![0.0; p * p];
    let mut dx = vec![0.0; p];
    let mut dy = vec![0.0; p];
    for c in 0..f.channels {
        let (fc, gc) = (f.channel(c), g.channel(c));
        for t in 0..p {
            let a = fc[t] * inv;
            let row = &mut k[t * p..(t + 1) * p];
            for (dst, b) in row.iter_mut().zip(gc) {
                *dst += a * b;
            }
            dx[t] += fc[t] * fc[t] * inv;
            dy[t] += gc[t] * gc[t] * inv;
        }
    }
    Ok(KernelState { domain: Domain::Planar { n_rot: 1, h: geom.h, w: geom.w }, k_xy: k, k_xx: dx, k_yy: dy, theta: vec![0.0; p * p] })
}

/// `A_S(K)(t, t') = (1/|S|) Σ_{s∈S} K(t+s, t'+s)` on a `P×P` translation-pair
/// field, with zero contributions outside a zero-padded grid.
pub fn a_operator(k: &[f64], offsets: &[(i64, i64)], geom: &GridGeom) -> Result<Vec<f64>> {
    let p = geom.pixels();
    if k.len() != p * p {
        return Err(EntkError::Shape(format!("field of length {} on {p} pixels", k.len())));
    }
    if offsets.is_empty() {
        return Err(EntkError::Geometry("empty support".into()));
    }
    let mut out = vec![0.0; p * p];
    let mut map = vec![usize::MAX; p];
    for &o in offsets {
        for (t, m) in map.iter_mut().enumerate() {
            *m = geom.shift(t, o).unwrap_or(usize::MAX);
        }
        for t in 0..p {
            let a = map[t];
            if a == usize::MAX {
                continue;
            }
            let src = &k[a * p..(a + 1) * p];
            let dst = &mut out[t * p..(t + 1) * p];
            for (d, &b) in dst.iter_mut().zip(&map) {
                if b != usize::MAX {
                    *d += src[b];
                }
            }
        }
    }
    let inv = 1.0 / offsets.len() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// Lemma form of one rotation block: `[A_{R^q S}(K̃)](t, Rc^{q−q'} t')` with
/// the twisted field `K̃(a, b) = B(a, Rc^{q'−q} b)`, where `Rc` is the pixel
/// rotation about the grid center.
fn twisted_block(b: &[f64], offsets: &[(i64, i64)], q: usize, qp: usize, geom: &GridGeom) -> Result<Vec<f64>> {
    let p = geom.pixels();
    let fwd = (qp + 4 - q) % 4;
    let back = (q + 4 - qp) % 4;
    let twist: Vec<usize> = (0..p).map(|t| geom.rotate_pixel(t, fwd)).collect();
    let mut kt = vec![0.0; p * p];
    for a in 0..p {
        for (y, &ty) in twist.iter().enumerate() {
            kt[a * p + y] = b[a * p + ty];
        }
    }
    let rot_s: Vec<(i64, i64)> = offsets.iter().map(|&o| rotate_offset(o, q)).collect();
    let a = a_operator(&kt, &rot_s, geom)?;
    let untwist: Vec<usize> = (0..p).map(|t| geom.rotate_pixel(t, back)).collect();
    let mut out = vec![0.0; p * p];
    for t in 0..p {
        for (tp, &u) in untwist.iter().enumerate() {
            out[t * p + tp] = a[t * p + u];
        }
    }
    Ok(out)
}

fn diag_average(d: &[f64], offsets: &[(i64, i64)], q: usize, geom: &GridGeom) -> Vec<f64> {
    let p = geom.pixels();
    let inv = 1.0 / offsets.len() as f64;
    (0..p).map(|t| offsets.iter().filter_map(|&o| geom.shift(t, rotate_offset(o, q))).map(|x| d[x]).sum::<f64>() * inv).collect()
}

/// Lifting layer: translation-pair kernel to rotation-pair kernel,
/// `K¹_{rr'}(t,t') = (1/|S|) Σ_s K⁰(t + R^r s, t' + R^{r'} s)`, computed
/// through the twisted A-operator.
pub fn lifting_planar(state: &KernelState, support: &Support, geom: &GridGeom) -> Result<KernelState> {
    if planar_dims(state, geom)? != 1 {
        return Err(EntkError::Domain("lifting expects a state without rotation indices".into()));
    }
    let offsets = geom.offsets(support)?;
    let (n, p) = (geom.n_rot, geom.pixels());
    let big = n * p;
    let mut k = vec![0.0; big * big];
    let mut th = vec![0.0; big * big];
    for r in 0..n {
        for rp in 0..n {
            let (q, qp) = (geom.quarter_turns(r), geom.quarter_turns(rp));
            let kb = twisted_block(&state.k_xy, &offsets, q, qp, geom)?;
            let tb = twisted_block(&state.theta, &offsets, q, qp, geom)?;
            write_block(&mut k, &kb, r, rp, n, p);
            let sum: Vec<f64> = kb.iter().zip(&tb).map(|(a, b)| a + b).collect();
            write_block(&mut th, &sum, r, rp, n, p);
        }
    }
    let mut dx = Vec::with_capacity(big);
    let mut dy = Vec::with_capacity(big);
    for r in 0..n {
        let q = geom.quarter_turns(r);
        dx.extend(diag_average(&state.k_xx, &offsets, q, geom));
        dy.extend(diag_average(&state.k_yy, &offsets, q, geom));
    }
    Ok(KernelState { domain: Domain::Planar { n_rot: n, h: geom.h, w: geom.w }, k_xy: k, k_xx: dx, k_yy: dy, theta: th })
}

fn write_block(dst: &mut [f64], block: &[f64], r: usize, rp: usize, n: usize, p: usize) {
    let big = n * p;
    for t in 0..p {
        let row = (r * p + t) * big + rp * p;
        dst[row..row + p].copy_from_slice(&block[t * p..(t + 1) * p]);
    }
}

fn read_block(src: &[f64], r: usize, rp: usize, n: usize, p: usize, out: &mut [f64], scale: f64) {
    let big = n * p;
    for t in 0..p {
        let row = (r * p + t) * big + rp * p;
        for (o, v) in out[t * p..(t + 1) * p].iter_mut().zip(&src[row..row + p]) {
            *o += scale * v;
        }
    }
}

/// Group convolution with support `C_n × S`:
/// `K_{rr'}(t,t') ← (1/(n|S|)) Σ_{r̃} Σ_s K_{r+r̃, r'+r̃}(t + R^r s, t' + R^{r'} s)`.
/// With `strict`, supports that are not rotation invariant are rejected.
pub fn gconv_planar(state: &KernelState, support: &Support, geom: &GridGeom, strict: bool) -> Result<KernelState> {
    let n = planar_dims(state, geom)?;
    if n != geom.n_rot {
        return Err(EntkError::Domain(format!("state has {n} rotation indices, geometry {}", geom.n_rot)));
    }
    let offsets = geom.offsets(support)?;
    if strict && !geom.support_is_invariant(&offsets) {
        return Err(EntkError::Geometry("support is not rotation invariant".into()));
    }
    let p = geom.pixels();
    let big = n * p;
    let inv_n = 1.0 / n as f64;
    let mut k = vec![0.0; big * big];
    let mut th = vec![0.0; big * big];
    let mut bk = vec![0.0; p * p];
    let mut bt = vec![0.0; p * p];
    for r in 0..n {
        for rp in 0..n {
            bk.iter_mut().for_each(|v| *v = 0.0);
            bt.iter_mut().for_each(|v| *v = 0.0);
            for rt in 0..n {
                read_block(&state.k_xy, (r + rt) % n, (rp + rt) % n, n, p, &mut bk, inv_n);
                read_block(&state.theta, (r + rt) % n, (rp + rt) % n, n, p, &mut bt, inv_n);
            }
            let (q, qp) = (geom.quarter_turns(r), geom.quarter_turns(rp));
            let kb = twisted_block(&bk, &offsets, q, qp, geom)?;
            let tb = twisted_block(&bt, &offsets, q, qp, geom)?;
            write_block(&mut k, &kb, r, rp, n, p);
            let sum: Vec<f64> = kb.iter().zip(&tb).map(|(a, b)| a + b).collect();
            write_block(&mut th, &sum, r, rp, n, p);
        }
    }
    let diag = |d: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(big);
        for r in 0..n {
            let mut avg = vec![0.0; p];
            for rt in 0..n {
                let src = &d[((r + rt) % n) * p..((r + rt) % n + 1) * p];
                for (a, v) in avg.iter_mut().zip(src) {
                    *a += v * inv_n;
                }
            }
            out.extend(diag_average(&avg, &offsets, geom.quarter_turns(r), geom));
        }
        out
    };
    Ok(KernelState { domain: state.domain.clone(), k_xy: k, k_xx: diag(&state.k_xx), k_yy: diag(&state.k_yy), theta: th })
}

/// Group pooling: mean over all `(r, r', t, t')`.
pub fn gpool_planar(state: &KernelState) -> Result<KernelState> {
    if !matches!(state.domain, Domain::Planar { .. }) {
        return Err(EntkError::Domain(format!("group pooling of {:?}", state.domain)));
    }
    pool_mean(state)
}

/// Ordinary convolution: `K ← A_S(K)`, `Θ ← A_S(K) + A_S(Θ)`.
pub fn cnn_conv_kernel(state: &KernelState, support: &Support, geom: &GridGeom) -> Result<KernelState> {
    if planar_dims(state, geom)? != 1 {
        return Err(EntkError::Domain("CNN convolution expects a translation-pair state".into()));
    }
    let offsets = geom.offsets(support)?;
    let k = a_operator(&state.k_xy, &offsets, geom)?;
    let at = a_operator(&state.theta, &offsets, geom)?;
    let theta = k.iter().zip(&at).map(|(a, b)| a + b).collect();
    Ok(KernelState {
        domain: state.domain.clone(),
        k_xx: diag_average(&state.k_xx, &offsets, 0, geom),
        k_yy: diag_average(&state.k_yy, &offsets, 0, geom),
        k_xy: k,
        theta,
    })
}

/// Global sum pooling of a CNN kernel: mean over `(t, t')`.
pub fn sumpool_cnn(state: &KernelState) -> Result<KernelState> {
    match state.domain {
        Domain::Planar { n_rot: 1, .. } => pool_mean(state),
        ref d => Err(EntkError::Domain(format!("sum pooling of {d:?}"))),
    }
}
