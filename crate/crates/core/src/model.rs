//! Core domain types: the system instance, popularity and caching
//! distributions, request vectors and their multiplicity profiles.
//!
//! Distributions are validated and normalized once, at construction. Every
//! constructed [`PopularityDist`] and [`CachingDist`] sums to one within
//! [`SUM_TOLERANCE`].

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance guaranteed by every stored distribution.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Slack accepted on user-supplied probability lists before renormalizing.
/// Lists written out by hand (`0.3333, 0.6667`) rarely sum to one exactly.
pub const INPUT_SUM_TOLERANCE: f64 = 1e-6;

/// Slack on the per-content feasibility check `q_i * M <= 1`.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Compensated (Neumaier) summation.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// SplitMix64 finalizer applied to `(seed, stream)`.
///
/// Every random sub-stream in the crate (per trial, per user, per sweep row)
/// is seeded through this function so results do not depend on the order in
/// which parallel work is scheduled.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// System parameters: `N` contents, `K` users, cache size `M` (in content
/// units) and `F` bits per content.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct ProblemInstance {
    pub n: usize,
    pub k: usize,
    pub m: f64,
    pub f: u64,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "F")]
    f: u64,
}

impl TryFrom<InstanceJson> for ProblemInstance {
    type Error = Error;

    fn try_from(raw: InstanceJson) -> Result<Self> {
        ProblemInstance::new(raw.n, raw.k, raw.m, raw.f)
    }
}

impl From<ProblemInstance> for InstanceJson {
    fn from(inst: ProblemInstance) -> Self {
        InstanceJson {
            n: inst.n,
            k: inst.k,
            m: inst.m,
            f: inst.f,
        }
    }
}

impl ProblemInstance {
    pub fn new(n: usize, k: usize, m: f64, f: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if k == 0 {
            return Err(Error::param("K", "must be at least 1"));
        }
        if !m.is_finite() || m < 0.0 || m > n as f64 {
            return Err(Error::param(
                "M",
                format!("must lie in [0, N={n}], got {m}"),
            ));
        }
        if f == 0 {
            return Err(Error::param("F", "must be at least 1"));
        }
        Ok(ProblemInstance { n, k, m, f })
    }
}

/// Request probabilities `p_1..p_N` in storage order.
///
/// Alongside the probabilities the distribution keeps the permutation that
/// sorts them ascending (ties broken by index). Bounds that assume an
/// ascending popularity order work on that view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopularityJson", into = "PopularityJson")]
pub struct PopularityDist {
    p: Vec<f64>,
    ascending: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PopularityJson {
    p: Vec<f64>,
}

impl TryFrom<PopularityJson> for PopularityDist {
    type Error = Error;

    fn try_from(raw: PopularityJson) -> Result<Self> {
        PopularityDist::new(raw.p)
    }
}

impl From<PopularityDist> for PopularityJson {
    fn from(dist: PopularityDist) -> Self {
        PopularityJson { p: dist.p }
    }
}

fn normalize(field: &'static str, mut v: Vec<f64>, strictly_positive: bool) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::dist(field, "must contain at least one entry"));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::dist(field, format!("entry {} is not finite", i + 1)));
        }
        if x < 0.0 || (strictly_positive && x == 0.0) {
            let bound = if strictly_positive {
                "positive"
            } else {
                "nonnegative"
            };
            return Err(Error::dist(
                field,
                format!("entry {} = {x} is not {bound}", i + 1),
            ));
        }
    }
    let total = stable_sum(v.iter().copied());
    if (total - 1.0).abs() > INPUT_SUM_TOLERANCE {
        return Err(Error::dist(
            field,
            format!("entries sum to {total}, expected 1"),
        ));
    }
    v.iter_mut().for_each(|x| *x /= total);
    Ok(v)
}

impl PopularityDist {
    /// Validates and renormalizes an explicit probability list.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let p = normalize("p", p, true)?;
        let mut ascending: Vec<usize> = (0..p.len()).collect();
        ascending.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        Ok(PopularityDist { p, ascending })
    }

    /// Zipf popularity `p_i ∝ i^{-v}`, stored most popular first.
    pub fn zipf(n: usize, v: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(Error::param(
                "v",
                format!("Zipf exponent must be finite and >= 0, got {v}"),
            ));
        }
        let weights: Vec<f64> = (1..=n).map(|i| (-v * (i as f64).ln()).exp()).collect();
        // smallest terms first
        let total = stable_sum(weights.iter().rev().copied());
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// `ascending_order()[r]` is the storage index of the `r`-th least popular content.
    pub fn ascending_order(&self) -> &[usize] {
        &self.ascending
    }

    pub fn ascending_probs(&self) -> Vec<f64> {
        self.ascending.iter().map(|&i| self.p[i]).collect()
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.p[0];
        self.p.iter().all(|&x| (x - first).abs() <= SUM_TOLERANCE)
    }
}

/// Placement fractions `q_1..q_N`: content `i` receives `q_i * M * F` bits
/// of each user's cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CachingJson", into = "CachingJson")]
pub struct CachingDist {
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CachingJson {
    q: Vec<f64>,
}

impl TryFrom<CachingJson> for CachingDist {
    type Error = Error;

    fn try_from(raw: CachingJson) -> Result<Self> {
        CachingDist::new(raw.q)
    }
}

impl From<CachingDist> for CachingJson {
    fn from(dist: CachingDist) -> Self {
        CachingJson { q: dist.q }
    }
}

impl CachingDist {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        Ok(CachingDist {
            q: normalize("q", q, false)?,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.q
    }

    /// Checks `q_i * M <= 1` for every content.
    pub fn check_feasible(&self, m: f64) -> Result<()> {
        for (index, &q) in self.q.iter().enumerate() {
            let load = q * m;
            if load > 1.0 + FEASIBILITY_SLACK {
                return Err(Error::Infeasible {
                    index: index + 1,
                    load,
                });
            }
        }
        Ok(())
    }

    /// Checks dimensions against `inst` as well as feasibility.
    pub fn check_for(&self, inst: &ProblemInstance) -> Result<()> {
        if self.q.len() != inst.n {
            return Err(Error::dist(
                "q",
                format!("has {} entries but N = {}", self.q.len(), inst.n),
            ));
        }
        self.check_feasible(inst.m)
    }

    /// Per-content cache probability `q_i * M`, clamped into `[0, 1]`.
    pub fn cache_probability(&self, content: usize, m: f64) -> f64 {
        (self.q[content] * m).clamp(0.0, 1.0)
    }
}

/// Per-user demands, stored zero-based. JSON and the CLI use one-based ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestVector {
    d: Vec<usize>,
}

impl RequestVector {
    /// Zero-based constructor; every entry must be `< n`.
    pub fn new(d: Vec<usize>, n: usize) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::param(
                "d",
                "request vector must name at least one user",
            ));
        }
        if let Some((user, &c)) = d.iter().enumerate().find(|(_, &c)| c >= n) {
            return Err(Error::param(
                "d",
                format!(
                    "user {} requests content {} outside 1..={n}",
                    user + 1,
                    c + 1
                ),
            ));
        }
        Ok(RequestVector { d })
    }

    pub fn from_one_based(d: &[usize], n: usize) -> Result<Self> {
        if let Some((user, _)) = d.iter().enumerate().find(|(_, &c)| c == 0) {
            return Err(Error::param(
                "d",
                format!("user {} requests content 0; ids are one-based", user + 1),
            ));
        }
        Self::new(d.iter().map(|&c| c - 1).collect(), n)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.d.iter().map(|&c| c + 1).collect()
    }

    pub fn demands(&self) -> &[usize] {
        &self.d
    }

    pub fn users(&self) -> usize {
        self.d.len()
    }

    /// Applies a permutation of users: entry `j` of the result is `d[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> RequestVector {
        RequestVector {
            d: perm.iter().map(|&j| self.d[j]).collect(),
        }
    }
}

/// Multiplicity counts `alpha_i`: how many users request content `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestProfile {
    pub alpha: Vec<usize>,
}

impl RequestProfile {
    pub fn users(&self) -> usize {
        self.alpha.iter().sum()
    }

    /// Request vector repeating content `i` exactly `alpha_i` times, in content order.
    pub fn representative(&self) -> RequestVector {
        let d = self
            .alpha
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| std::iter::repeat_n(i, a))
            .collect();
        RequestVector { d }
    }
}

pub fn profile_of(d: &RequestVector, n: usize) -> RequestProfile {
    let mut alpha = vec![0; n];
    for &c in d.demands() {
        alpha[c] += 1;
    }
    RequestProfile { alpha }
}

/// Draws `k` i.i.d. demands from `p`; identical seeds give identical vectors.
pub fn sample_requests(p: &PopularityDist, k: usize, seed: u64) -> RequestVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(p, k, &mut rng)
}

pub(crate) fn sample_with<R: rand::Rng>(
    p: &PopularityDist,
    k: usize,
    rng: &mut R,
) -> RequestVector {
    // Weights were validated positive and finite at construction.
    let dist = WeightedIndex::new(p.probs()).expect("validated weights");
    RequestVector {
        d: (0..k).map(|_| dist.sample(rng)).collect(),
    }
}
