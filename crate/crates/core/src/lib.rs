//! Fractional maximal operators on weighted variable Lebesgue spaces over
//! finite quasi-metric measure spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`space`] — finite quasi-metric measure spaces, balls and their
//!   homogeneous-type constants (quasi-triangle `A0`, doubling `C_mu`).
//! * [`exponent`] — variable exponents `p(.)`, conjugates, log-Hölder
//!   constants and the fractional relation `1/p - 1/q = eta`.
//! * [`norm`] — modular, Luxemburg norm, weighted and weak-type norms.
//! * [`grid`] — nested dyadic grids built from greedy nets.
//! * [`maximal`] — fractional maximal operators over balls and cubes.
//! * [`weights`] — the `A_{p(.),q(.)}` constant and its relatives.
//! * [`czd`] — the fractional Calderón–Zygmund decomposition.
//! * [`experiment`] — generators, configs and the experiment drivers used by
//!   the `fracmax` binary.
//!
//! Every sweep over balls, cubes or test functions goes through [`exec`],
//! which runs on rayon when the `parallel` feature is enabled and falls back
//! to a plain loop otherwise. Reductions are always performed sequentially
//! on the collected results, so outputs are bit-identical in both modes.

// `!(x > 0.0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod czd;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod exponent;
pub mod grid;
pub mod io;
pub mod maximal;
pub mod norm;
pub mod numeric;
pub mod space;
pub mod weights;

pub use error::{Error, Result};
pub use exponent::Exponent;
pub use grid::DyadicGrid;
pub use space::{Ball, Space};
pub use weights::Weight;
