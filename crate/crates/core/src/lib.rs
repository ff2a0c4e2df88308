//! Analytic infinite-width NNGP and NTK kernels for group convolutional
//! networks, with finite-width checks, kernel regression and the
//! data-augmentation equivalences.

pub mod data;
pub mod equivalence;
pub mod error;
pub mod experiment;
pub mod finite_net;
pub mod kernel;
pub mod planar;
pub mod predict;
pub mod quadrature;
pub mod selftest;
pub mod so3;

pub use error::{EntkError, Result};
pub use kernel::{run_pipeline, ArchitectureSpec, Domain, Gram, GroupParams, Input, KernelState, Layer, NonlinKind, Pipeline, Support};
pub use planar::{GridGeom, Image, Padding};
pub use so3::{FourierKernel, SphereQuadrature, SphereSignal};
