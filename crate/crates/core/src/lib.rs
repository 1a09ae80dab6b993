#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod digest;
pub mod energy;
pub mod error;
pub mod exact1d;
pub mod geometry;
pub mod layerop;
pub mod oracle_pw;
pub mod quad;
pub mod spectral;
pub mod stressforce;
pub mod specfun;

pub use error::{CasimirError, Result};
