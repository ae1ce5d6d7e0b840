//! Random probability distribution functions driven by increasing additive
//! jump processes: exact laws of their means by numerical inversion, path
//! simulation by the Ferguson–Klass construction, and full posterior
//! simulation through a latent-variable Gibbs sampler.
//!
//! The crate is organized around:
//! - [`measure`]: finite base measures (density part + atoms);
//! - [`kernel`]: convolution kernels k(t, x) with derivative and limit;
//! - [`functional`]: mean functionals and the transform h = ∫ g k' dt;
//! - [`process`]: (extended) gamma process specifications and validation;
//! - [`fk`]: Ferguson–Klass jump-path simulation and path evaluation;
//! - [`inversion`]: prior/posterior laws of means via oscillatory quadrature;
//! - [`gibbs`]: posterior simulation given observations;
//! - [`oracle`]: independent stick-breaking and partition references.
//!
//! With the default `parallel` feature, grid sweeps and Monte Carlo loops run
//! on rayon; the sequential fallback (`--no-default-features`) computes
//! identical results.

pub mod curve;
pub mod error;
mod exec;
pub mod fk;
pub mod functional;
pub mod gibbs;
pub mod inversion;
pub mod kernel;
pub mod measure;
pub mod oracle;
pub mod process;
pub mod quad;
pub mod special;

pub use curve::{CurveKind, DistCurve};
pub use error::{Error, Result};
pub use fk::{eval_process, levy_tail_mass, sample_jump_path, FkSampler, Jump, JumpPath};
pub use functional::{h_transform, FunctionalSpec, MeanFunctional};
pub use kernel::{Kernel, KernelPoint};
pub use measure::BaseMeasure;
pub use process::{validate_spec, BetaFn, FixedJump, ProcessSpec, ValidationReport};
