//! Gerber-Shiu distribution at Parisian ruin with exponential implementation
//! delays for spectrally negative Levy risk processes.

// negated comparisons reject NaN alongside out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gerber_shiu;
pub mod levy_model;
pub mod mixture;
pub mod poly;
pub mod quadrature;
pub mod scale_functions;
pub mod simulator;
pub mod talbot;
pub mod validation;

pub use error::{Error, Result};
pub use levy_model::{Family, LevyModel, ModelSpec, VariationClass};
pub use scale_functions::{g_fn, g_fn_alt, h_aux, ScaleContext, ScaleMethod, ScalePair};
