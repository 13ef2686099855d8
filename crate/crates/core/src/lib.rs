// Validation uses `!(x >= lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod model;
pub mod oracle;
pub mod risk;
pub mod train;
pub mod verify;
