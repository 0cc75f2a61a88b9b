//! Multi-unit auctions under discriminatory and uniform pricing, with
//! equilibrium search and numerical price-of-anarchy certificates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mechanism;
pub mod sampling;
pub mod smoothness;
pub mod tolerance;
pub mod valuation;
pub mod welfare;

pub use error::{Error, Result};
pub use mechanism::{
    allocate, allocate_rows, beta_minus_i, check_no_overbidding, expand_uniform,
    price_discriminatory, price_uniform, social_welfare, uniformize_profile, utility, Allocation,
    Auction, Bid, BidProfile, Interface, OpposingBids, Outcome, Pricing, StandardBid, TieBreakRule,
    UniformBid,
};
pub use valuation::{random_valuation, sample_valuation, Valuation, ValuationClass};
pub use welfare::{greedy_optimal_submodular, optimal_allocation, poa_ratio, OptimalAssignment};
