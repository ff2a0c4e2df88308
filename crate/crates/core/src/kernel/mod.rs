//! Kernel states, layer recursions and the architecture pipeline.

mod arch;
mod layers;
mod nonlin;
mod pipeline;
mod state;

pub use arch::{ArchitectureSpec, GroupParams, Layer, Support};
pub use layers::{apply_nonlinearity, fan_in_sum, fc_layer, flatten_input, pool_mean};
pub use nonlin::{derf, erf, nonlin_map, nonlin_map_clamped, quadrature_oracle, NonlinKind, PSD_SLACK};
pub use pipeline::{run_pipeline, Gram, Input, Pipeline, SelfValues};
pub use state::{Domain, KernelState};
