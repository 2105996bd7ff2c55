//! Landing-pad detection and autonomous landing.
//!
//! The vision pipeline runs greyscale conversion, a 5×5 Gaussian blur,
//! window-based adaptive thresholding with bilinear threshold interpolation,
//! 3×3 erosion, a 5×5 median, 3×3 dilation and connected component labeling,
//! then classifies components into the four marker figures and estimates the
//! marker pose. [`synth`] renders ground-truth scenes for evaluation and
//! [`lander`] closes the loop with a three-phase landing state machine.

// `!(x > 0.0)` must also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccl;
pub mod config;
pub mod error;
pub mod exec;
pub mod harness;
pub mod imgio;
pub mod lander;
pub mod marker;
pub mod pipeline;
pub mod preprocess;
pub mod shapes;
pub mod synth;
pub mod threshold;

pub use error::{Error, Result};
pub use exec::Exec;
pub use imgio::{Frame, FrameKind};
