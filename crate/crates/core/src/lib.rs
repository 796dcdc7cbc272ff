//! Multi-objective Bayesian optimization when part of the input is an
//! uncontrolled random variable.
//!
//! The pieces compose bottom-up: [`pareto`] and [`hypervolume`] give dominance
//! and front measures, [`gp`] the surrogate, [`acquisition`] the uncertainty-aware
//! criteria, and [`engine`] the sequential loop. [`uncertainty`] and [`metrics`]
//! estimate and score conditional Pareto sets.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::needless_range_loop
)]

pub mod acquisition;
pub mod bench;
pub mod bounds;
pub mod cli;
pub mod engine;
pub mod error;
pub mod gp;
pub mod hypervolume;
pub mod metrics;
pub mod optimize;
pub mod pareto;
pub mod problems;
pub mod sampling;
pub mod uncertainty;
