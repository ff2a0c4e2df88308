use serde::{Deserialize, Serialize};

use crate::error::{EntkError, Result};
use crate::planar::Padding;
use crate::so3::SphereQuadrature;

use super::nonlin::NonlinKind;

/// Spatial filter support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Centered `k×k` square of offsets (k odd).
    Square(usize),
    /// Every offset of the grid (or the whole group for SO(3)).
    Global,
    /// Explicit offsets `(d1, d2)`.
    Offsets(Vec<[i64; 2]>),
}

/// One layer of an architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Lifting {
        support: Support,
    },
    #[serde(rename = "gconv")]
    GConv {
        support: Support,
    },
    Nonlin {
        nonlin: NonlinKind,
    },
    #[serde(rename = "gpool")]
    GPool,
    ConvCnn {
        support: Support,
    },
    SumPoolCnn,
    Dense,
    FanInSum {
        branches: usize,
    },
    Flatten,
}

/// Group acting on the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroupParams {
    /// `C_n ⋉ Z_H×Z_W` on pixel grids.
    Planar { n_rot: usize, padding: Padding },
    /// SO(3) acting on spherical signals; group layers carry coefficients `l < bandlimit`.
    So3 {
        bandlimit: usize,
        /// Band of the sampling grid used around nonlinearities (default `2·bandlimit`).
        #[serde(default)]
        work_band: Option<usize>,
        #[serde(default)]
        quadrature: SphereQuadrature,
    },
    /// No group structure (fully connected networks only).
    Trivial,
}

/// Ordered layer list plus group parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub layers: Vec<Layer>,
    pub group: GroupParams,
}

/// Index domain between layers, as tracked by the validator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Stage {
    Raw,
    Translation,
    Group,
    Scalar,
}

impl ArchitectureSpec {
    /// Check that consecutive layers have matching domains.
    pub fn validate(&self) -> Result<()> {
        let err = |i: usize, msg: &str| Err(EntkError::Architecture(format!("layer {i}: {msg}")));
        if self.layers.is_empty() {
            return Err(EntkError::Architecture("no layers".into()));
        }
        match &self.group {
            GroupParams::Planar { n_rot, .. } if ![1, 2, 4].contains(n_rot) => {
                return Err(EntkError::Architecture(format!("n_rot {n_rot} not in {{1, 2, 4}}")));
            }
            GroupParams::So3 { bandlimit, work_band, .. } => {
                if *bandlimit == 0 {
                    return Err(EntkError::Architecture("bandlimit must be positive".into()));
                }
                if let Some(w) = work_band {
                    if w < bandlimit {
                        return Err(EntkError::Architecture("work band below bandlimit".into()));
                    }
                }
            }
            _ => {}
        }
        let mut stage = Stage::Raw;
        let mut pooled = false;
        let mut fanned = false;
        for (i, layer) in self.layers.iter().enumerate() {
            stage = match (layer, stage) {
                (Layer::Lifting { support }, Stage::Raw) => {
                    match &self.group {
                        GroupParams::Planar { .. } => {}
                        GroupParams::So3 { .. } => {
                            if *support != Support::Global {
                                return err(i, "SO(3) layers support global filters only");
                            }
                        }
                        GroupParams::Trivial => return err(i, "lifting needs a group"),
                    }
                    Stage::Group
                }
                (Layer::GConv { support }, Stage::Group) => {
                    if matches!(self.group, GroupParams::So3 { .. }) && *support != Support::Global {
                        return err(i, "SO(3) layers support global filters only");
                    }
                    Stage::Group
                }
                (Layer::ConvCnn { .. }, Stage::Raw | Stage::Translation) => {
                    if !matches!(self.group, GroupParams::Planar { .. }) {
                        return err(i, "CNN convolution needs a planar grid");
                    }
                    Stage::Translation
                }
                (Layer::Nonlin { .. }, s @ (Stage::Translation | Stage::Group | Stage::Scalar)) => s,
                (Layer::GPool, Stage::Group) => {
                    if pooled {
                        return err(i, "pooling may appear at most once");
                    }
                    pooled = true;
                    Stage::Scalar
                }
                (Layer::SumPoolCnn, Stage::Translation) => {
                    if pooled {
                        return err(i, "pooling may appear at most once");
                    }
                    pooled = true;
                    Stage::Scalar
                }
                (Layer::Flatten, Stage::Raw) => Stage::Scalar,
                (Layer::Dense, Stage::Scalar) => Stage::Scalar,
                (Layer::FanInSum { branches }, Stage::Scalar) => {
                    if fanned {
                        return err(i, "fan-in may appear at most once");
                    }
                    if *branches == 0 {
                        return err(i, "fan-in needs at least one branch");
                    }
                    fanned = true;
                    Stage::Scalar
                }
                (l, s) => return err(i, &format!("{l:?} cannot follow a {s:?} domain")),
            };
        }
        if stage != Stage::Scalar {
            return Err(EntkError::Architecture(format!("network ends in a {stage:?} domain, not scalar")));
        }
        Ok(())
    }

    /// Index of the layer that first produces a scalar domain.
    pub(crate) fn scalarizing_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| matches!(l, Layer::GPool | Layer::SumPoolCnn | Layer::Flatten))
    }

    pub(crate) fn fan_in_position(&self) -> Option<usize> {
        self.layers.iter().position(|l| matches!(l, Layer::FanInSum { .. }))
    }

    pub fn n_rot(&self) -> Option<usize> {
        match self.group {
            GroupParams::Planar { n_rot, .. } => Some(n_rot),
            _ => None,
        }
    }

    /// Lifting, then `depth − 1` blocks of (σ, GConv), then pooling.
    pub fn gcnn(depth: usize, support: Support, nonlin: NonlinKind, n_rot: usize, padding: Padding) -> Self {
        let mut layers = vec![Layer::Lifting { support: support.clone() }];
        for _ in 1..depth {
            layers.push(Layer::Nonlin { nonlin });
            layers.push(Layer::GConv { support: support.clone() });
        }
        layers.push(Layer::GPool);
        ArchitectureSpec { layers, group: GroupParams::Planar { n_rot, padding } }
    }

    /// CNN counterpart of [`ArchitectureSpec::gcnn`].
    pub fn cnn(depth: usize, support: Support, nonlin: NonlinKind, padding: Padding) -> Self {
        let mut layers = vec![Layer::ConvCnn { support: support.clone() }];
        for _ in 1..depth {
            layers.push(Layer::Nonlin { nonlin });
            layers.push(Layer::ConvCnn { support: support.clone() });
        }
        layers.push(Layer::SumPoolCnn);
        ArchitectureSpec { layers, group: GroupParams::Planar { n_rot: 1, padding } }
    }

    /// Flatten, then `depth` dense layers separated by σ.
    pub fn mlp(depth: usize, nonlin: NonlinKind) -> Self {
        let mut layers = vec![Layer::Flatten, Layer::Dense];
        for _ in 1..depth {
            layers.push(Layer::Nonlin { nonlin });
            layers.push(Layer::Dense);
        }
        ArchitectureSpec { layers, group: GroupParams::Trivial }
    }

    /// Monte-Carlo network: lifting and four group convolutions with σ in
    /// between, then group pooling.
    pub fn mc_gcnn(nonlin: NonlinKind) -> Self {
        Self::gcnn(5, Support::Square(3), nonlin, 4, Padding::Circular)
    }

    /// Image-classification GCNN: five 3×3 group layers each followed by
    /// ReLU, pooling, and a dense/ReLU/dense head.
    pub fn classifier_gcnn(n_rot: usize) -> Self {
        let s = Support::Square(3);
        let mut layers = vec![Layer::Lifting { support: s.clone() }, relu()];
        for _ in 0..4 {
            layers.push(Layer::GConv { support: s.clone() });
            layers.push(relu());
        }
        layers.extend([Layer::GPool, Layer::Dense, relu(), Layer::Dense]);
        ArchitectureSpec { layers, group: GroupParams::Planar { n_rot, padding: Padding::Circular } }
    }

    /// CNN baseline of [`ArchitectureSpec::classifier_gcnn`].
    pub fn classifier_cnn() -> Self {
        let s = Support::Square(3);
        let mut layers = Vec::new();
        for _ in 0..5 {
            layers.push(Layer::ConvCnn { support: s.clone() });
            layers.push(relu());
        }
        layers.extend([Layer::SumPoolCnn, Layer::Dense, relu(), Layer::Dense]);
        ArchitectureSpec { layers, group: GroupParams::Planar { n_rot: 1, padding: Padding::Circular } }
    }

    /// Per-atom SO(3) network summed over atoms.
    pub fn molecule_so3(bandlimit: usize, branches: usize) -> Self {
        ArchitectureSpec {
            layers: vec![
                Layer::Lifting { support: Support::Global },
                Layer::Nonlin { nonlin: NonlinKind::Erf },
                Layer::GConv { support: Support::Global },
                Layer::GPool,
                Layer::FanInSum { branches },
                Layer::Dense,
            ],
            group: GroupParams::So3 { bandlimit, work_band: None, quadrature: SphereQuadrature::default() },
        }
    }

    /// Per-atom MLP baseline summed over atoms.
    pub fn molecule_mlp(branches: usize) -> Self {
        ArchitectureSpec {
            layers: vec![Layer::Flatten, Layer::Dense, relu(), Layer::Dense, Layer::FanInSum { branches }, Layer::Dense],
            group: GroupParams::Trivial,
        }
    }
}

fn relu() -> Layer {
    Layer::Nonlin { nonlin: NonlinKind::Relu }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_validate() {
        for a in [
            ArchitectureSpec::mc_gcnn(NonlinKind::Relu),
            ArchitectureSpec::classifier_gcnn(4),
            ArchitectureSpec::classifier_cnn(),
            ArchitectureSpec::molecule_so3(3, 29),
            ArchitectureSpec::molecule_mlp(29),
            ArchitectureSpec::mlp(3, NonlinKind::Erf),
            ArchitectureSpec::cnn(2, Support::Square(1), NonlinKind::Relu, Padding::Zero),
        ] {
            a.validate().unwrap();
        }
    }

    #[test]
    fn validator_rejects_mismatches() {
        let group = GroupParams::Planar { n_rot: 4, padding: Padding::Circular };
        let bad = [
            vec![Layer::GConv { support: Support::Square(3) }, Layer::GPool],
            vec![Layer::Lifting { support: Support::Square(3) }],
            vec![Layer::Lifting { support: Support::Square(3) }, Layer::SumPoolCnn],
            vec![Layer::Dense],
            vec![Layer::Flatten, Layer::GPool],
            vec![Layer::Lifting { support: Support::Square(3) }, Layer::Dense],
        ];
        for layers in bad {
            let a = ArchitectureSpec { layers, group: group.clone() };
            assert!(a.validate().is_err(), "{a:?}");
        }
        let a = ArchitectureSpec {
            layers: vec![Layer::Lifting { support: Support::Square(3) }, Layer::GPool],
            group: GroupParams::Planar { n_rot: 3, padding: Padding::Circular },
        };
        assert!(a.validate().is_err());
        let a = ArchitectureSpec {
            layers: vec![Layer::Lifting { support: Support::Square(3) }, Layer::GPool],
            group: GroupParams::So3 { bandlimit: 3, work_band: None, quadrature: SphereQuadrature::default() },
        };
        assert!(a.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let a = ArchitectureSpec::classifier_gcnn(4);
        let s = serde_json::to_string(&a).unwrap();
        let b: ArchitectureSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
