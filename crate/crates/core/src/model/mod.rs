//! The four-level multi-resolution reconstruction network.
//!
//! Level ℓ receives the RGB input pixel-unshuffled by 2^ℓ, lifts it to its
//! width with a 3×3 conv, merges the pixel-shuffled output of level ℓ+1,
//! then runs its residual dense / residual global blocks. The bottom level
//! ends with a 1×1 conv; the top level's final 3×3 conv emits the spectra.

pub mod arch;
pub mod checkpoint;
mod network;
pub mod params;
mod report;

pub use arch::{ArchConfig, BlockCount, WidthScale, LEVELS};
pub use network::{forward, hrnet_forward, reconstruct, res_dense_block, res_global_block, ParamMap};
pub use params::{layers, LayerKind, LayerSpec, ModelParams};
pub use report::{model_report, ModelReport, REPORT_HEIGHT, REPORT_WIDTH};
