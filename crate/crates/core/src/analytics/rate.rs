use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    sample_with, stable_sum, CachingDist, PopularityDist, ProblemInstance, RequestProfile,
    RequestVector,
};
use crate::simulator::RateEstimate;

/// Largest `K` for which the sorted fast path keeps binomial weights finite.
pub const MAX_EXACT_USERS: usize = 1000;
/// Largest `K` for the `2^K` subset-enumeration oracle.
pub const MAX_BRUTEFORCE_USERS: usize = 20;
/// Largest number of request profiles `C(N+K-1, K)` enumerated exactly.
pub const MAX_PROFILES: u64 = 1_000_000;

/// Expected size, in units of `F`, of a piece needed by a user with cache
/// probability `x` and served in a subset of size `size` among `k` users:
/// `x^{size-1} (1-x)^{k-size+1}`.
pub(crate) fn piece_weight(x: f64, size: usize, k: usize) -> f64 {
    x.powi(size as i32 - 1) * (1.0 - x).powi((k - size + 1) as i32)
}

fn check_request(inst: &ProblemInstance, q: &CachingDist, d: &RequestVector) -> Result<Vec<f64>> {
    q.check_for(inst)?;
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
    Ok(d.demands()
        .iter()
        .map(|&c| q.cache_probability(c, inst.m))
        .collect())
}

/// Pascal triangle rows `0..=n` as `f64`.
fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for r in 0..=n {
        let mut row = vec![1.0; r + 1];
        for c in 1..r {
            row[c] = rows[r - 1][c - 1] + rows[r - 1][c];
        }
        rows.push(row);
    }
    rows
}

/// Per-request traffic of the scheme in units of `F`:
/// `Σ_i Σ_{|v|=i} max_{j∈v} (q_{d_j}M)^{i-1} (1-q_{d_j}M)^{K-i+1}`.
///
/// For each subset size the user weights are sorted descending (ties by user
/// index); the user at rank `r` is the maximum of exactly `C(K-1-r, i-1)`
/// subsets. The sorted-value sum depends only on the multiset of demands, so
/// the result is bitwise invariant under user permutations.
pub fn rate_exact(inst: &ProblemInstance, q: &CachingDist, d: &RequestVector) -> Result<f64> {
    let x = check_request(inst, q, d)?;
    let k = inst.k;
    if k > MAX_EXACT_USERS {
        return Err(Error::Capacity {
            what: "users K for exact rate",
            limit: MAX_EXACT_USERS as u64,
            got: k as u64,
        });
    }
    let binom = binomial_table(k - 1);
    let mut weights: Vec<(f64, usize)> = Vec::with_capacity(k);
    let mut total = 0.0;
    for size in 1..=k {
        weights.clear();
        weights.extend(
            x.iter()
                .enumerate()
                .map(|(j, &xj)| (piece_weight(xj, size, k), j)),
        );
        weights.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (rank, &(w, _)) in weights.iter().enumerate() {
            let below = k - 1 - rank;
            if below < size - 1 {
                break;
            }
            total += w * binom[below][size - 1];
        }
    }
    Ok(total)
}

/// Literal `2^K` subset enumeration of the per-request rate.
pub fn rate_exact_bruteforce(
    inst: &ProblemInstance,
    q: &CachingDist,
    d: &RequestVector,
) -> Result<f64> {
    let x = check_request(inst, q, d)?;
    let k = inst.k;
    if k > MAX_BRUTEFORCE_USERS {
        return Err(Error::Capacity {
            what: "users K for brute-force rate",
            limit: MAX_BRUTEFORCE_USERS as u64,
            got: k as u64,
        });
    }
    let mut total = 0.0;
    for mask in 1u32..(1u32 << k) {
        let size = mask.count_ones() as usize;
        let best = (0..k)
            .filter(|&j| mask >> j & 1 == 1)
            .map(|j| piece_weight(x[j], size, k))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total)
}

/// Number of multisets of size `k` over `n` contents, saturating at `u64::MAX`.
pub fn profile_count(n: usize, k: usize) -> u64 {
    // C(n+k-1, k) computed incrementally; every prefix product is itself a binomial
    let mut c: u128 = 1;
    for j in 1..=k as u128 {
        c = c * (n as u128 - 1 + j) / j;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// Visits every composition `alpha` of `k` into `n` nonnegative parts, in
/// lexicographically decreasing order of `alpha`.
pub fn for_each_profile<F: FnMut(&[usize])>(n: usize, k: usize, mut visit: F) {
    fn rec<F: FnMut(&[usize])>(alpha: &mut Vec<usize>, pos: usize, left: usize, visit: &mut F) {
        if pos + 1 == alpha.len() {
            alpha[pos] = left;
            visit(alpha);
            return;
        }
        for a in (0..=left).rev() {
            alpha[pos] = a;
            rec(alpha, pos + 1, left - a, visit);
        }
    }
    let mut alpha = vec![0; n];
    rec(&mut alpha, 0, k, &mut visit);
}

/// Exact `E[rate]` under i.i.d. demands, enumerating request profiles only.
///
/// Every request vector with profile `alpha` has the same rate, so one
/// representative per profile is evaluated and weighted by the multinomial
/// probability `K!/Π alpha_i! · Π p_i^{alpha_i}`.
pub fn expected_rate_exact(
    inst: &ProblemInstance,
    p: &PopularityDist,
    q: &CachingDist,
) -> Result<f64> {
    if p.len() != inst.n {
        return Err(Error::dist(
            "p",
            format!("has {} entries but N = {}", p.len(), inst.n),
        ));
    }
    q.check_for(inst)?;
    let count = profile_count(inst.n, inst.k);
    if count > MAX_PROFILES {
        return Err(Error::Capacity {
            what: "request profiles C(N+K-1, K)",
            limit: MAX_PROFILES,
            got: count,
        });
    }
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=inst.k).scan(0.0, |acc, j| {
            *acc += (j as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_p: Vec<f64> = p.probs().iter().map(|x| x.ln()).collect();

    let mut terms = Vec::with_capacity(count as usize);
    let mut failure = None;
    for_each_profile(inst.n, inst.k, |alpha| {
        if failure.is_some() {
            return;
        }
        let ln_w = ln_fact[inst.k]
            + alpha
                .iter()
                .zip(&ln_p)
                .map(|(&a, &lp)| a as f64 * lp - ln_fact[a])
                .sum::<f64>();
        let profile = RequestProfile {
            alpha: alpha.to_vec(),
        };
        match rate_exact(inst, q, &profile.representative()) {
            Ok(r) => terms.push(ln_w.exp() * r),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(stable_sum(terms))
}

/// Monte Carlo `E[rate]`: samples demand vectors and evaluates [`rate_exact`]
/// on each. Used when profile enumeration is out of reach.
pub fn expected_rate_sampled(
    inst: &ProblemInstance,
    p: &PopularityDist,
    q: &CachingDist,
    samples: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if samples == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if p.len() != inst.n {
        return Err(Error::dist(
            "p",
            format!("has {} entries but N = {}", p.len(), inst.n),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rates = Vec::with_capacity(samples);
    for _ in 0..samples {
        let d = sample_with(p, inst.k, &mut rng);
        rates.push(rate_exact(inst, q, &d)?);
    }
    let n = samples as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let std_error = if samples > 1 {
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(RateEstimate {
        mean_rate: mean,
        std_error,
    })
}

/// Binomial fluctuation scale of the measured per-request traffic, in units
/// of `F`: `Σ_U sqrt(Σ_{k∈U} w_k (1 - w_k) / F)` where `w_k` is the expected
/// fraction of `F` in piece `V_{k, U \ {k}}`. Measured traffic concentrates
/// on [`rate_exact`] within a few multiples of this scale.
pub fn concentration_scale(
    inst: &ProblemInstance,
    q: &CachingDist,
    d: &RequestVector,
) -> Result<f64> {
    let x = check_request(inst, q, d)?;
    let k = inst.k;
    if k > MAX_BRUTEFORCE_USERS {
        return Err(Error::Capacity {
            what: "users K for concentration scale",
            limit: MAX_BRUTEFORCE_USERS as u64,
            got: k as u64,
        });
    }
    // per-user variance for every subset size
    let var: Vec<Vec<f64>> = (0..=k)
        .map(|size| {
            x.iter()
                .map(|&xj| {
                    if size == 0 {
                        0.0
                    } else {
                        let w = piece_weight(xj, size, k);
                        w * (1.0 - w)
                    }
                })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for mask in 1u32..(1u32 << k) {
        let size = mask.count_ones() as usize;
        let v: f64 = (0..k)
            .filter(|&j| mask >> j & 1 == 1)
            .map(|j| var[size][j])
            .sum();
        total += v.sqrt();
    }
    Ok(total / (inst.f as f64).sqrt())
}

/// Rate when all `k` users request distinct contents with cache probability
/// `x`: `((1-x)/x)(1-(1-x)^k)`, extended continuously by `k` at `x = 0`.
pub fn per_case_rate(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return k as f64;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let miss_all = -(k as f64 * (-x).ln_1p()).exp_m1();
    (1.0 - x) / x * miss_all
}

/// Both sides of `Σ_{j=1}^{K} C(K,j) x^{j-1} (1-x)^{K-j+1} = ((1-x)/x)(1-(1-x)^K)`:
/// returns `(binomial_sum, closed_form)`.
pub fn per_case_identity_check(x: f64, k: usize) -> Result<(f64, f64)> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::param("qM", format!("must lie in (0, 1], got {x}")));
    }
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    let row = binomial_table(k).pop().expect("row k");
    let sum = (1..=k).map(|j| row[j] * piece_weight(x, j, k)).sum();
    Ok((sum, per_case_rate(x, k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, k: usize, m: f64) -> ProblemInstance {
        ProblemInstance::new(n, k, m, 1).unwrap()
    }

    fn d1(d: &[usize], n: usize) -> RequestVector {
        RequestVector::from_one_based(d, n).unwrap()
    }

    #[test]
    fn hand_values() {
        let i = inst(2, 2, 1.0);
        let uq = CachingDist::uniform(2).unwrap();
        assert!((rate_exact(&i, &uq, &d1(&[1, 2], 2)).unwrap() - 0.75).abs() < 1e-15);
        let q = CachingDist::new(vec![0.75, 0.25]).unwrap();
        assert!((rate_exact(&i, &q, &d1(&[1, 2], 2)).unwrap() - 0.8125).abs() < 1e-15);
        assert!((rate_exact_bruteforce(&i, &q, &d1(&[1, 2], 2)).unwrap() - 0.8125).abs() < 1e-15);
        assert!((rate_exact_bruteforce(&i, &q, &d1(&[1, 1], 2)).unwrap() - 0.3125).abs() < 1e-15);
        assert!((rate_exact(&i, &q, &d1(&[1, 1], 2)).unwrap() - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn zero_cache_gives_k() {
        for k in 1..=7 {
            let i = inst(3, k, 0.0);
            let q = CachingDist::new(vec![0.2, 0.5, 0.3]).unwrap();
            let d = RequestVector::new((0..k).map(|j| j % 3).collect(), 3).unwrap();
            assert_eq!(rate_exact(&i, &q, &d).unwrap(), k as f64);
            assert_eq!(rate_exact_bruteforce(&i, &q, &d).unwrap(), k as f64);
        }
    }

    #[test]
    fn bruteforce_guard() {
        let i = inst(1, 21, 0.0);
        let q = CachingDist::uniform(1).unwrap();
        let d = RequestVector::new(vec![0; 21], 1).unwrap();
        assert!(matches!(
            rate_exact_bruteforce(&i, &q, &d),
            Err(Error::Capacity { limit: 20, .. })
        ));
        assert!(rate_exact(&i, &q, &d).is_ok());
    }

    #[test]
    fn request_dimension_mismatch() {
        let i = inst(2, 3, 1.0);
        let q = CachingDist::uniform(2).unwrap();
        assert!(rate_exact(&i, &q, &d1(&[1, 2], 2)).is_err());
        let i = inst(2, 2, 2.0);
        let q = CachingDist::new(vec![0.9, 0.1]).unwrap();
        assert!(matches!(
            rate_exact(&i, &q, &d1(&[1, 2], 2)),
            Err(Error::Infeasible { index: 1, .. })
        ));
    }

    #[test]
    fn profile_enumeration() {
        assert_eq!(profile_count(2, 2), 3);
        assert_eq!(profile_count(3, 4), 15);
        assert_eq!(profile_count(1, 50), 1);
        let mut seen = Vec::new();
        for_each_profile(3, 2, |a| seen.push(a.to_vec()));
        assert_eq!(seen.len(), 6);
        assert!(seen.iter().all(|a| a.iter().sum::<usize>() == 2));
        assert_eq!(seen[0], vec![2, 0, 0]);
    }

    #[test]
    fn expected_rate_uniform_two_by_two() {
        let i = inst(2, 2, 1.0);
        let p = PopularityDist::uniform(2).unwrap();
        let q = CachingDist::uniform(2).unwrap();
        assert!((expected_rate_exact(&i, &p, &q).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn expected_rate_single_content() {
        let i = inst(1, 4, 0.5);
        let p = PopularityDist::uniform(1).unwrap();
        let q = CachingDist::uniform(1).unwrap();
        let expected = rate_exact(&i, &q, &d1(&[1, 1, 1, 1], 1)).unwrap();
        assert_eq!(expected_rate_exact(&i, &p, &q).unwrap(), expected);
    }

    #[test]
    fn expected_rate_guard() {
        let i = inst(30, 30, 1.0);
        let p = PopularityDist::uniform(30).unwrap();
        let q = CachingDist::uniform(30).unwrap();
        assert!(matches!(
            expected_rate_exact(&i, &p, &q),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn sampled_expectation_near_exact() {
        let i = inst(3, 4, 1.0);
        let p = PopularityDist::zipf(3, 1.0).unwrap();
        let q = CachingDist::new(vec![0.45, 0.3, 0.25]).unwrap();
        let exact = expected_rate_exact(&i, &p, &q).unwrap();
        let est = expected_rate_sampled(&i, &p, &q, 20_000, 9).unwrap();
        assert!((est.mean_rate - exact).abs() <= 4.0 * est.std_error + 1e-12);
    }

    #[test]
    fn identity_examples() {
        let (a, b) = per_case_identity_check(0.5, 2).unwrap();
        assert!((a - 0.75).abs() < 1e-15 && (b - 0.75).abs() < 1e-15);
        let (a, b) = per_case_identity_check(1.0, 9).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
        let (a, b) = per_case_identity_check(0.25, 4).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(per_case_identity_check(0.0, 3).is_err());
        assert!(per_case_identity_check(1.5, 3).is_err());
    }

    #[test]
    fn per_case_rate_limit_at_zero() {
        assert_eq!(per_case_rate(0.0, 7), 7.0);
        assert!((per_case_rate(1e-12, 7) - 7.0).abs() < 1e-9);
    }
}
