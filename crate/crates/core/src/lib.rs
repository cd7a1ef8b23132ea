#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod calendar;
pub mod error;
pub mod ingest;
pub mod rng;
pub mod sentiment;
pub mod series;
pub mod stats;
pub mod synth;
pub mod tails;

pub use error::{Error, Result};
