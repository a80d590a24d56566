//! Analytic removal-error quantification and pruning for 3D Gaussian Splatting scenes.
//!
//! The pipeline is render-once, compute-locally: a forward rasterization pass records the
//! front-to-back contribution list of every pixel, a prefix pass caches the cumulative color and
//! transmittance, and each contributor's squared removal error is then derived in closed form
//! from the final pixel color. Errors are accumulated per Gaussian over all pixels of all views
//! and drive ratio or budget pruning.

pub mod camera;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod prune;
pub mod quant;
pub mod raster;
pub mod real;
pub mod synth;

pub use camera::{CameraView, ProjectedGaussian, ViewSet};
pub use error::{Error, Result};
pub use model::{Gaussian, GaussianScene};
pub use quant::{ErrorBuffer, Execution, QuantConstants};
pub use raster::{PixelContribution, RenderOptions, RenderOutput};
pub use real::Real;
