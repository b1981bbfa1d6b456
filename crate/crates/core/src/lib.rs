//! Operation-based energy modeling for MiniJ programs.
#![no_std]
// `!(x > 0.0)` guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense linear algebra reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod accounting;
pub mod blocks;
pub mod device;
pub mod exact;
pub mod fixtures;
pub mod frontend;
pub mod fuzz;
pub mod opdict;
pub mod planner;
pub mod regress;
pub mod runner;
