//! Spectral reconstruction from RGB with a four-level multi-resolution
//! residual network.

mod binio;
pub mod error;
pub mod gradient_suite;
pub mod metrics;
pub mod model;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use spectral::{default_response, render_rgb, RgbImage, ResponseFunction, SpectralCube};
pub use model::{hrnet_forward, model_report, ArchConfig, ModelParams, ModelReport, WidthScale};
pub use tensor::{Activation, Backend, Combine, Eager, Graph, Padding, Shape, Tensor, Var};
