//! Bit-level realization of the decentralized coded-caching scheme.
//!
//! Placement stores a uniformly random subset of `q_i M F` bits of every
//! content at every user. Delivery partitions each demanded content by the
//! exact set of users caching each bit, then for every user subset `U`
//! multicasts the XOR of the pieces `V_{k, U \ {k}}`, zero-padded to the
//! longest one. Each user cancels the pieces it caches and truncates.

mod delivery;
mod placement;
mod trials;

use serde::{Deserialize, Serialize};

pub use delivery::{
    decode_and_verify, deliver, partition_subfiles, Delivery, Subfile, SubfilePartition,
    TraceRecord, Transmission, MAX_SIM_USERS,
};
pub use placement::{place, round_repair, Bits, PlacementState};
pub use trials::{
    monte_carlo_rate, replay_trial, run_trials, summarize, DemandSource, RateEstimate, TrialRecord,
};

/// A set of users (zero-based ids below 32) as a bitmask.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct UserSet(pub u32);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn singleton(user: usize) -> Self {
        UserSet(1 << user)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(users: I) -> Self {
        UserSet(users.into_iter().fold(0, |m, u| m | (1 << u)))
    }

    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | 1 << user)
    }

    pub fn without(self, user: usize) -> Self {
        UserSet(self.0 & !(1 << user))
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let u = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(u)
        })
    }
}
