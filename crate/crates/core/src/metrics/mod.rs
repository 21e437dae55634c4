//! Communication accounting and the privacy-leakage bound.

mod comm;
mod privacy;

pub use comm::{baseline_cost, comm_cost, effective_rounds, feddisk_cost, CommLedger, CostSummary};
pub use privacy::{entropy_bits, leakage_bound, LeakageInput};
