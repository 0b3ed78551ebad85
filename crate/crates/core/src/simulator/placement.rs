use bitvec::prelude::*;
use rand::seq::index;
use rand::RngCore;

use crate::error::Result;
use crate::model::{rng_for, CachingDist, ProblemInstance};

pub type Bits = BitVec<u64, Lsb0>;

/// Stream tag for the synthetic content library; users take streams `1..=K`.
const LIBRARY_STREAM: u64 = 0;

/// Random prefetching outcome plus the synthetic content library it was drawn from.
#[derive(Debug, Clone)]
pub struct PlacementState {
    instance: ProblemInstance,
    contents: Vec<Bits>,
    /// `cached[user][content]` has bit `b` set iff the user stores bit `b`.
    cached: Vec<Vec<Bits>>,
}

impl PlacementState {
    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn bits_per_content(&self) -> usize {
        self.instance.f as usize
    }

    pub fn content(&self, content: usize) -> &Bits {
        &self.contents[content]
    }

    pub fn cached_bits(&self, user: usize, content: usize) -> &Bits {
        &self.cached[user][content]
    }

    pub fn is_cached(&self, user: usize, content: usize, bit: usize) -> bool {
        self.cached[user][content][bit]
    }

    /// Value of a bit as seen from `user`'s cache, `None` when not stored there.
    pub fn cached_value(&self, user: usize, content: usize, bit: usize) -> Option<bool> {
        if self.is_cached(user, content, bit) {
            Some(self.contents[content][bit])
        } else {
            None
        }
    }

    /// Total number of bits stored by `user` across all contents.
    pub fn cache_load(&self, user: usize) -> usize {
        self.cached[user].iter().map(|b| b.count_ones()).sum()
    }
}

/// Integer cache sizes per content: `q_i M F` rounded by largest remainder
/// so that the per-user total is exactly `round(M F)`, each entry capped at `F`.
pub fn round_repair(q: &CachingDist, m: f64, f: u64) -> Vec<u64> {
    let targets: Vec<f64> = q
        .fractions()
        .iter()
        .map(|&x| (x * m * f as f64).clamp(0.0, f as f64))
        .collect();
    let total = (m * f as f64).round() as u64;
    let mut sizes: Vec<u64> = targets.iter().map(|t| t.floor() as u64).collect();
    let assigned: u64 = sizes.iter().sum();

    let mut order: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] > 0.0).collect();
    let remainder = |i: usize| targets[i] - targets[i].floor();
    if assigned < total {
        order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
        let mut missing = total - assigned;
        while missing > 0 {
            let before = missing;
            for &i in &order {
                if missing == 0 {
                    break;
                }
                if sizes[i] < f {
                    sizes[i] += 1;
                    missing -= 1;
                }
            }
            if missing == before {
                break;
            }
        }
    } else if assigned > total {
        order.sort_by(|&a, &b| remainder(a).total_cmp(&remainder(b)).then(a.cmp(&b)));
        let mut excess = assigned - total;
        while excess > 0 {
            let before = excess;
            for &i in &order {
                if excess == 0 {
                    break;
                }
                if sizes[i] > 0 {
                    sizes[i] -= 1;
                    excess -= 1;
                }
            }
            if excess == before {
                break;
            }
        }
    }
    sizes
}

fn random_bits<R: RngCore>(rng: &mut R, len: usize) -> Bits {
    let words = len.div_ceil(64);
    let mut raw = vec![0u64; words];
    raw.iter_mut().for_each(|w| *w = rng.next_u64());
    let mut bits = Bits::from_vec(raw);
    bits.truncate(len);
    bits
}

/// Uniform random prefetching: user `k` stores a uniformly random subset of
/// `round_repair(q_i M F)` bits of every content `i`, independently across
/// users and contents.
pub fn place(inst: &ProblemInstance, q: &CachingDist, seed: u64) -> Result<PlacementState> {
    q.check_for(inst)?;
    let f = inst.f as usize;
    let sizes = round_repair(q, inst.m, inst.f);

    let mut lib_rng = rng_for(seed, LIBRARY_STREAM);
    let contents = (0..inst.n).map(|_| random_bits(&mut lib_rng, f)).collect();

    let cached = (0..inst.k)
        .map(|user| {
            let mut rng = rng_for(seed, 1 + user as u64);
            sizes
                .iter()
                .map(|&size| {
                    let mut bits = bitvec![u64, Lsb0; 0; f];
                    for b in index::sample(&mut rng, f, size as usize).into_iter() {
                        bits.set(b, true);
                    }
                    bits
                })
                .collect()
        })
        .collect();

    Ok(PlacementState {
        instance: *inst,
        contents,
        cached,
    })
}
