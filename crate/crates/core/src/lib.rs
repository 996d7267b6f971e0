#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod features;
pub mod io;
pub mod learner;
pub mod model;
pub mod numerics;
pub mod program;
pub mod tasks;

pub use dataset::{Dataset, SequenceSample};
pub use error::{Error, Result};
pub use model::MhlaParams;
