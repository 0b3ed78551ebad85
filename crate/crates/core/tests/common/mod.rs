//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's analytic code: every value is recomputed from the
//! definitions by exhaustive enumeration.
#![allow(dead_code)]

use rand::Rng;

/// Visits every request vector in `[0, n)^k`.
pub fn for_each_request(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut d = vec![0; k];
    loop {
        visit(&d);
        let mut pos = 0;
        loop {
            if pos == k {
                return;
            }
            d[pos] += 1;
            if d[pos] < n {
                break;
            }
            d[pos] = 0;
            pos += 1;
        }
    }
}

pub fn request_probability(p: &[f64], d: &[usize]) -> f64 {
    d.iter().map(|&c| p[c]).product()
}

/// Per-request traffic from the definition: for every nonempty user subset,
/// the largest expected piece `x^{|U|-1} (1-x)^{K-|U|+1}` among its members.
pub fn oracle_rate(x: &[f64]) -> f64 {
    let k = x.len();
    let mut total = 0.0;
    for mask in 1usize..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let s = members.len() as f64;
        let best = members
            .iter()
            .map(|&j| x[j].powf(s - 1.0) * (1.0 - x[j]).powf(k as f64 - s + 1.0))
            .fold(0.0, f64::max);
        total += best;
    }
    total
}

pub fn oracle_rate_for(q: &[f64], m: f64, d: &[usize]) -> f64 {
    let x: Vec<f64> = d.iter().map(|&c| (q[c] * m).min(1.0)).collect();
    oracle_rate(&x)
}

/// Binomial fluctuation scale of the traffic in units of `F`:
/// `Σ_U sqrt(Σ_{k∈U} w_k (1 - w_k)) / sqrt(F)` with `w_k` the expected piece fraction.
pub fn oracle_concentration(x: &[f64], f: u64) -> f64 {
    let k = x.len();
    let mut total = 0.0;
    for mask in 1usize..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let s = members.len() as f64;
        let var: f64 = members
            .iter()
            .map(|&j| {
                let w = x[j].powf(s - 1.0) * (1.0 - x[j]).powf(k as f64 - s + 1.0);
                w * (1.0 - w)
            })
            .sum();
        total += var.sqrt();
    }
    total / (f as f64).sqrt()
}

/// Expected rate by summing over all `N^K` request vectors.
pub fn oracle_expected_rate(p: &[f64], q: &[f64], m: f64, k: usize) -> f64 {
    let mut total = 0.0;
    for_each_request(p.len(), k, |d| {
        total += request_probability(p, d) * oracle_rate_for(q, m, d);
    });
    total
}

/// `P(A_r)`: probability that the least popular requested content sits at
/// rank `r` of `ascending` (storage indices, least popular first).
pub fn oracle_prob_a(p: &[f64], ascending: &[usize], k: usize) -> Vec<f64> {
    let mut rank = vec![0; p.len()];
    for (r, &i) in ascending.iter().enumerate() {
        rank[i] = r;
    }
    let mut out = vec![0.0; p.len()];
    for_each_request(p.len(), k, |d| {
        let lowest = d.iter().map(|&c| rank[c]).min().unwrap();
        out[lowest] += request_probability(p, d);
    });
    out
}

/// `P(B_i)`: probability that exactly `i` distinct contents are requested.
pub fn oracle_prob_b(p: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for_each_request(p.len(), k, |d| {
        let mut seen = vec![false; p.len()];
        d.iter().for_each(|&c| seen[c] = true);
        let distinct = seen.iter().filter(|&&s| s).count();
        out[distinct - 1] += request_probability(p, d);
    });
    out
}

/// All-distinct rate under uniform placement: `((1 - M/N) N/M)(1 - (1 - M/N)^K)`.
pub fn uniform_distinct_rate(n: usize, k: usize, m: f64) -> f64 {
    let t = m / n as f64;
    (1.0 - t) / t * (1.0 - (1.0 - t).powi(k as i32))
}

/// Zipf probabilities computed directly, most popular first.
pub fn zipf(n: usize, v: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-v)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Random caching vector with every `q_i M <= 1`: a random direction mixed
/// with uniform just enough to stay feasible.
pub fn random_feasible_q<R: Rng>(rng: &mut R, n: usize, m: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|x| x / total).collect();
    let u = 1.0 / n as f64;
    let cap = if m > 0.0 { 1.0 / m } else { f64::INFINITY };
    let worst = w.iter().cloned().fold(0.0, f64::max);
    let lambda = if worst <= cap {
        1.0
    } else {
        (cap - u) / (worst - u)
    };
    let lambda = lambda * rng.gen_range(0.5..=1.0);
    let q: Vec<f64> = w.iter().map(|x| lambda * x + (1.0 - lambda) * u).collect();
    let total: f64 = q.iter().sum();
    q.iter().map(|x| x / total).collect()
}

/// Rearranges `q` so it is non-decreasing along ascending `p`.
pub fn co_monotone(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = vec![0.0; q.len()];
    for (r, &i) in order.iter().enumerate() {
        out[i] = sorted[r];
    }
    out
}
