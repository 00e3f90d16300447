//! Training-free timbre transfer in a synthetic latent world.
//!
//! The crate implements MI-guided dimension-wise noise injection with early-step
//! structure clamping, partial-noise and inversion baselines, a noise-level
//! probe for choosing the partial-noise fraction, and an evaluation grid. All of
//! it runs against a Gaussian-mixture latent world whose denoiser is exact.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod edits;
pub mod error;
pub mod io;
pub mod mi;
pub mod probe;
pub mod sampler;
pub mod schedule;
pub mod world;

pub use bench::{run_grid, GridCell, GridParams, GridResult, MetricsReport};
pub use config::RunConfig;
pub use edits::{edit, ClampRule, EditConfig, EditRecord, EditResult, Strategy};
pub use error::{Error, Result};
pub use mi::{build_mask, ChannelMask, MiParams, MiReport};
pub use probe::{ProbeCurve, ProbeParams};
pub use sampler::{Denoiser, Guidance, Inversion, Solver, Stop, Trajectory};
pub use schedule::{DdimCoefficients, Schedule, ScheduleParams};
pub use world::{Conditioning, DatasetRecord, FrameSet, LatentClip, World, WorldParams, WorldSpec};
