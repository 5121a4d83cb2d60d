//! Analytical planner for large-model training on GPU clusters built from
//! high-bandwidth (HB) domains joined by a rail network.
//!
//! Each module maps to one runnable example under `examples/`:
//!
//! | module | example |
//! |---|---|
//! | [`model`] | `validate_plan` |
//! | [`compute`] | `compute_budget` |
//! | [`collective`] | `collective_costs` |
//! | [`iteration`] | `iteration_breakdown` |
//! | [`search`] | `plan_search`, `hb_domain_sweep` |
//! | [`traffic`] | `traffic_heatmap` |
//! | [`netcost`] | `network_cost` |
//!
//! The `railplan` binary wraps [`cli`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod collective;
pub mod compute;
pub mod error;
pub mod iteration;
pub mod model;
pub mod netcost;
pub mod numfmt;
pub mod search;
pub mod traffic;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
