use crate::error::{EntkError, Result};

use super::nonlin::{nonlin_map, NonlinKind};
use super::state::{Domain, KernelState};

/// Pointwise nonlinearity on every pair index. Uses the left diagonal for
/// the first argument and the right diagonal for the second.
pub fn apply_nonlinearity(state: &KernelState, kind: NonlinKind) -> Result<KernelState> {
    state.check_shape()?;
    let n = state.domain.single_len();
    let mut k_xy = vec![0.0; n * n];
    let mut theta = vec![0.0; n * n];
    for i in 0..n {
        let a = state.k_xx[i];
        for j in 0..n {
            let p = i * n + j;
            let (k, kd) = nonlin_map(kind, a, state.k_xy[p], state.k_yy[j])?;
            k_xy[p] = k;
            theta[p] = kd * state.theta[p];
        }
    }
    let k_xx = map_diag(kind, &state.k_xx)?;
    let k_yy = map_diag(kind, &state.k_yy)?;
    Ok(KernelState { domain: state.domain.clone(), k_xy, k_xx, k_yy, theta })
}

pub(crate) fn map_diag(kind: NonlinKind, d: &[f64]) -> Result<Vec<f64>> {
    d.iter().map(|&v| nonlin_map(kind, v, v, v).map(|r| r.0)).collect()
}

/// Dense layer without bias: K unchanged, Θ ← K + Θ.
pub fn fc_layer(state: &KernelState) -> Result<KernelState> {
    state.require_scalar()?;
    let mut out = state.clone();
    out.theta[0] = state.k_xy[0] + state.theta[0];
    Ok(out)
}

/// Input kernel of a fully connected network on flattened feature maps:
/// the mean over positions and channels of f·f'.
pub fn flatten_input(f: &[f64], g: &[f64]) -> Result<KernelState> {
    if f.len() != g.len() {
        return Err(EntkError::Shape(format!("flatten inputs of length {} and {}", f.len(), g.len())));
    }
    if f.is_empty() {
        return Err(EntkError::Shape("empty feature map".into()));
    }
    let n = f.len() as f64;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n;
    Ok(KernelState::scalar(dot(f, g), dot(f, f), dot(g, g), 0.0))
}

/// Sum of independent-parameter branches: every field adds.
pub fn fan_in_sum(states: &[KernelState]) -> Result<KernelState> {
    let first = states.first().ok_or_else(|| EntkError::Argument("fan-in of zero branches".into()))?;
    let mut out = KernelState::scalar(0.0, 0.0, 0.0, 0.0);
    for s in states {
        if s.domain != Domain::Scalar {
            return Err(EntkError::Domain(format!("fan-in expects scalar branches, found {:?} (first {:?})", s.domain, first.domain)));
        }
        out.k_xy[0] += s.k_xy[0];
        out.k_xx[0] += s.k_xx[0];
        out.k_yy[0] += s.k_yy[0];
        out.theta[0] += s.theta[0];
    }
    Ok(out)
}

/// Mean over all pair entries (global pooling of a pair-indexed state).
/// The pooled diagonals are the means of the diagonal fields; these bound
/// the exact pooled self-kernels from above and are replaced by them in the
/// pipeline whenever a later layer consumes them.
pub fn pool_mean(state: &KernelState) -> Result<KernelState> {
    state.check_shape()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(KernelState::scalar(mean(&state.k_xy), mean(&state.k_xx), mean(&state.k_yy), mean(&state.theta)))
}
