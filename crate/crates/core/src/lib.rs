//! Seedable scouting and foraging simulator for a honeybee colony on a
//! gridded crop landscape, with a closed-loop supervisor that places
//! artificial food patches and tunes temperature and light.
//!
//! Runs are fully determined by their inputs and a 64-bit seed.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod foraging;
pub mod landscape;
pub mod metrics;
pub mod monitor;
pub mod rng;
pub mod scouting;
pub mod supervisor;
pub mod weather;
