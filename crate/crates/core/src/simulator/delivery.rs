use std::cmp::Reverse;
use std::collections::BTreeMap;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use super::placement::{Bits, PlacementState};
use super::UserSet;
use crate::error::{Error, Result};
use crate::model::RequestVector;

/// Largest user count the bit-level simulator accepts.
pub const MAX_SIM_USERS: usize = 24;

/// Bits of `owner`'s demanded content cached at exactly the users in
/// `exclusivity_set` (positions ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subfile {
    pub owner: usize,
    pub exclusivity_set: UserSet,
    pub bits: Vec<usize>,
}

/// Exclusivity partition of every user's demanded content.
#[derive(Debug, Clone)]
pub struct SubfilePartition {
    users: usize,
    /// Per owner, nonempty pieces keyed by exclusivity set.
    pieces: Vec<BTreeMap<UserSet, Subfile>>,
}

impl SubfilePartition {
    pub fn users(&self) -> usize {
        self.users
    }

    /// Nonempty pieces of `owner`'s content, ordered by exclusivity mask.
    pub fn pieces(&self, owner: usize) -> impl Iterator<Item = &Subfile> {
        self.pieces[owner].values()
    }

    /// `V_{owner, set}`; empty when no bit has that exact cacher set.
    pub fn subfile(&self, owner: usize, set: UserSet) -> &[usize] {
        self.pieces[owner]
            .get(&set)
            .map(|s| s.bits.as_slice())
            .unwrap_or(&[])
    }

    pub fn len(&self, owner: usize, set: UserSet) -> usize {
        self.subfile(owner, set).len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Subfile> {
        self.pieces.iter().flat_map(|m| m.values())
    }
}

fn check_dimensions(pl: &PlacementState, d: &RequestVector) -> Result<()> {
    let inst = pl.instance();
    if d.users() != inst.k {
        return Err(Error::param(
            "d",
            format!("has {} entries but K = {}", d.users(), inst.k),
        ));
    }
    if let Some(&c) = d.demands().iter().find(|&&c| c >= inst.n) {
        return Err(Error::param(
            "d",
            format!("content {} outside 1..={}", c + 1, inst.n),
        ));
    }
    if inst.k > MAX_SIM_USERS {
        return Err(Error::Capacity {
            what: "simulated users K",
            limit: MAX_SIM_USERS as u64,
            got: inst.k as u64,
        });
    }
    Ok(())
}

/// Partitions each user's demanded content by the exact set of users caching each bit.
pub fn partition_subfiles(pl: &PlacementState, d: &RequestVector) -> Result<SubfilePartition> {
    check_dimensions(pl, d)?;
    let k = pl.instance().k;
    let f = pl.bits_per_content();

    // cacher masks for each requested content, computed once per content
    let mut masks: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for &c in d.demands() {
        masks.entry(c).or_insert_with(|| {
            let mut m = vec![0u32; f];
            for user in 0..k {
                for b in pl.cached_bits(user, c).iter_ones() {
                    m[b] |= 1 << user;
                }
            }
            m
        });
    }

    let pieces = d
        .demands()
        .iter()
        .enumerate()
        .map(|(owner, c)| {
            let mut by_set: BTreeMap<UserSet, Subfile> = BTreeMap::new();
            for (b, &mask) in masks[c].iter().enumerate() {
                let set = UserSet(mask);
                by_set
                    .entry(set)
                    .or_insert_with(|| Subfile {
                        owner,
                        exclusivity_set: set,
                        bits: Vec::new(),
                    })
                    .bits
                    .push(b);
            }
            by_set
        })
        .collect();

    Ok(SubfilePartition { users: k, pieces })
}

/// One coded multicast: the XOR of zero-padded `V_{k, U \ {k}}` over `k ∈ U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub subset: UserSet,
    pub payload_length: usize,
    pub payload: Bits,
}

/// Per-transmission trace line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// One-based user ids.
    pub subset: Vec<usize>,
    pub length_bits: usize,
}

impl Transmission {
    pub fn trace(&self) -> TraceRecord {
        TraceRecord {
            subset: self.subset.members().map(|u| u + 1).collect(),
            length_bits: self.payload_length,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Delivery {
    pub transmissions: Vec<Transmission>,
    pub traffic_bits: u64,
}

/// Delivery phase: for every subset `U` (largest first, lexicographic within a
/// size) the server multicasts the XOR of `V_{k, U \ {k}}` for `k ∈ U`.
///
/// Subsets whose constituent subfiles are all empty are skipped, so only
/// subsets formed by a nonempty piece plus its owner are visited.
pub fn deliver(pl: &PlacementState, d: &RequestVector) -> Result<Delivery> {
    let partition = partition_subfiles(pl, d)?;
    let demands = d.demands();

    let mut subsets: BTreeMap<(Reverse<u32>, Vec<usize>), UserSet> = BTreeMap::new();
    for piece in partition.iter() {
        if piece.exclusivity_set.contains(piece.owner) {
            continue;
        }
        let u = piece.exclusivity_set.with(piece.owner);
        subsets.insert((Reverse(u.len()), u.members().collect()), u);
    }

    let mut transmissions = Vec::with_capacity(subsets.len());
    let mut traffic_bits = 0u64;
    for u in subsets.into_values() {
        let length = u
            .members()
            .map(|k| partition.len(k, u.without(k)))
            .max()
            .unwrap_or(0);
        if length == 0 {
            continue;
        }
        let mut payload = bitvec![u64, Lsb0; 0; length];
        for k in u.members() {
            let content = pl.content(demands[k]);
            for (slot, &pos) in partition.subfile(k, u.without(k)).iter().enumerate() {
                if content[pos] {
                    let cur = payload[slot];
                    payload.set(slot, !cur);
                }
            }
        }
        traffic_bits += length as u64;
        transmissions.push(Transmission {
            subset: u,
            payload_length: length,
            payload,
        });
    }

    Ok(Delivery {
        transmissions,
        traffic_bits,
    })
}

/// Replays decoding at every user and checks that each reconstructs all `F`
/// bits of its demand. Interference is cancelled using only bits the decoding
/// user actually caches; `false` signals a scheme or channel fault.
pub fn decode_and_verify(pl: &PlacementState, d: &RequestVector, tx: &[Transmission]) -> bool {
    let Ok(partition) = partition_subfiles(pl, d) else {
        return false;
    };
    let demands = d.demands();
    let f = pl.bits_per_content();

    for (user, &want) in demands.iter().enumerate() {
        let mut recovered: Vec<Option<bool>> =
            (0..f).map(|b| pl.cached_value(user, want, b)).collect();

        for t in tx.iter().filter(|t| t.subset.contains(user)) {
            if t.payload.len() != t.payload_length {
                return false;
            }
            let mut acc = t.payload.clone();
            for other in t.subset.members().filter(|&j| j != user) {
                for (slot, &pos) in partition
                    .subfile(other, t.subset.without(other))
                    .iter()
                    .enumerate()
                {
                    let Some(bit) = pl.cached_value(user, demands[other], pos) else {
                        return false;
                    };
                    if slot >= acc.len() {
                        return false;
                    }
                    if bit {
                        let cur = acc[slot];
                        acc.set(slot, !cur);
                    }
                }
            }
            // the tail beyond this user's piece is padding; truncate
            for (slot, &pos) in partition
                .subfile(user, t.subset.without(user))
                .iter()
                .enumerate()
            {
                if slot >= acc.len() || recovered[pos].is_some() {
                    return false;
                }
                recovered[pos] = Some(acc[slot]);
            }
        }

        let truth = pl.content(want);
        for (b, r) in recovered.iter().enumerate() {
            if *r != Some(truth[b]) {
                return false;
            }
        }
    }
    true
}
