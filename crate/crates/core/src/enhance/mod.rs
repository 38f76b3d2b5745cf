//! Classical enhancement operators.

mod clahe;
mod unsharp;

pub use clahe::{clahe, clahe_fast, clip_histogram, ClaheParams};
pub use unsharp::{unsharp_mask, unsharp_mask_unclamped, UnsharpParams};
