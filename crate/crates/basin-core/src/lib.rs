//! Data-driven certification of regions of attraction.
//!
//! This crate learns a matrix approximation of the Koopman generator of an
//! unknown continuous-time system from low-frequency trajectory snapshots,
//! extracts a polynomial/feature model of the vector field, fits a Lyapunov
//! candidate by collocating a Zubov-type PDE, and then certifies a sublevel
//! set of the candidate as a region of attraction with an interval-arithmetic
//! branch-and-bound check.
//!
//! The crate is `no_std`-compatible (with `alloc`): enable the `libm` feature
//! instead of the default `std` feature to build for targets without a
//! standard library. File formats, configuration, and the command-line
//! pipeline live in the companion `basin` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("basin-core needs either the `std` feature or the `libm` feature");

extern crate alloc;

pub mod certificates;
pub mod dictionary;
pub mod dynamics;
mod fmath;
pub mod interval;
pub mod koopman;
pub mod linalg;
pub mod verify;

pub use interval::{Interval, IntervalBox};
