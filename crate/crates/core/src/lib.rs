// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod catalog;
pub mod cli;
pub mod connection;
pub mod expr;
pub mod forms;
pub mod geometry;
pub mod invariants;
pub mod linalg;
pub mod report;
pub mod specfile;
pub mod symmat;
pub mod transport;
