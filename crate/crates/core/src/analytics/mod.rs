//! Exact per-request rate, its expectation over request profiles, and the
//! popularity-dependent upper and cut-set lower bounds on expected traffic.
//!
//! All rates are in units of `F` bits.

mod bounds;
mod probability;
mod rate;

pub use bounds::{
    cut_set_term, is_co_monotone, lower_bound_rate, upper_bound_detail, upper_bound_rate,
    UpperBound,
};
pub use probability::{
    expected_distinct, prob_a, prob_b, ProbB, ProbBMode, MAX_EXACT_PROB_B_CONTENTS,
};
pub use rate::{
    concentration_scale, expected_rate_exact, expected_rate_sampled, for_each_profile,
    per_case_identity_check, per_case_rate, profile_count, rate_exact, rate_exact_bruteforce,
    MAX_BRUTEFORCE_USERS, MAX_EXACT_USERS, MAX_PROFILES,
};
