use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_with, stable_sum, PopularityDist};

/// Largest `N` for exact inclusion–exclusion of `P(B_i)` (`2^N` subset sums).
pub const MAX_EXACT_PROB_B_CONTENTS: usize = 20;

/// `(1 - x)^k` as `exp(k · ln(1 - x))`.
pub(crate) fn pow_complement(x: f64, k: usize) -> f64 {
    (k as f64 * (-x).ln_1p()).exp()
}

/// `P(A_i)` for ascending popularity `p_1 <= … <= p_N`: the probability that
/// no user requests contents `1..i-1` and at least one requests content `i`,
///
/// `P(A_i) = (1 - Σ_{j<i} p_j)^K · [1 - (1 - p_i / (1 - Σ_{j<i} p_j))^K]`.
///
/// The remaining mass `1 - Σ_{j<i} p_j` is accumulated from the tail so it
/// cannot cancel to zero before the last content.
pub fn prob_a(p_ascending: &[f64], k: usize) -> Result<Vec<f64>> {
    if p_ascending.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::HypothesisViolation(
            "P(A_i) requires popularity sorted ascending".into(),
        ));
    }
    let n = p_ascending.len();
    let mut tails = vec![0.0; n + 1];
    for i in (0..n).rev() {
        tails[i] = tails[i + 1] + p_ascending[i];
    }
    let mut out = Vec::with_capacity(n);
    for (i, &p) in p_ascending.iter().enumerate() {
        let remaining = tails[i];
        if !(remaining > 0.0) || !remaining.is_finite() {
            return Err(Error::NumericDegeneracy(format!(
                "remaining popularity mass vanished at content {} of {n}",
                i + 1
            )));
        }
        let conditional = (p / remaining).min(1.0);
        let none_of_rest = (k as f64 * remaining.ln()).exp();
        out.push(none_of_rest * -(k as f64 * (-conditional).ln_1p()).exp_m1());
    }
    Ok(out)
}

/// How `P(B_i)` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbBMode {
    /// Inclusion–exclusion over content subsets (`N <= 20`).
    Exact,
    MonteCarlo {
        trials: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbB {
    /// `values[i-1] = P(B_i)`, the probability that exactly `i` distinct contents are requested.
    pub values: Vec<f64>,
    /// Per-entry standard errors; `None` for exact mode.
    pub std_errors: Option<Vec<f64>>,
}

/// Distribution of the number of distinct requested contents.
///
/// Exact mode: `P(request set = S) = Σ_{T⊆S} (-1)^{|S|-|T|} p(T)^K`; summing
/// over `|S| = i` collapses to `Σ_T (-1)^{i-|T|} C(N-|T|, i-|T|) p(T)^K`, so
/// only the `2^N` subset sums are needed.
pub fn prob_b(p: &PopularityDist, k: usize, mode: ProbBMode) -> Result<ProbB> {
    match mode {
        ProbBMode::Exact => prob_b_exact(p.probs(), k).map(|values| ProbB {
            values,
            std_errors: None,
        }),
        ProbBMode::MonteCarlo { trials, seed } => prob_b_sampled(p, k, trials, seed),
    }
}

fn prob_b_exact(p: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = p.len();
    if n > MAX_EXACT_PROB_B_CONTENTS {
        return Err(Error::Capacity {
            what: "contents N for exact P(B_i)",
            limit: MAX_EXACT_PROB_B_CONTENTS as u64,
            got: n as u64,
        });
    }
    // powers[t] = Σ_{|T|=t} p(T)^K
    let mut subset_mass = vec![0.0f64; 1 << n];
    let mut powers: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        subset_mass[mask] = subset_mass[mask & (mask - 1)] + p[low];
        let mass = subset_mass[mask].min(1.0);
        powers[mask.count_ones() as usize].push((k as f64 * mass.ln()).exp());
    }
    let by_size: Vec<f64> = powers.into_iter().map(stable_sum).collect();

    let binom = |a: usize, b: usize| -> f64 {
        (0..b).fold(1.0, |acc, j| acc * (a - j) as f64 / (j + 1) as f64)
    };
    let values = (1..=n)
        .map(|i| {
            let signed = (1..=i).map(|t| {
                let sign = if (i - t) % 2 == 0 { 1.0 } else { -1.0 };
                sign * binom(n - t, i - t) * by_size[t]
            });
            stable_sum(signed).max(0.0)
        })
        .collect();
    Ok(values)
}

fn prob_b_sampled(p: &PopularityDist, k: usize, trials: usize, seed: u64) -> Result<ProbB> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let n = p.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; n];
    let mut stamp = vec![usize::MAX; n];
    for t in 0..trials {
        let d = sample_with(p, k, &mut rng);
        let mut distinct = 0;
        for &c in d.demands() {
            if stamp[c] != t {
                stamp[c] = t;
                distinct += 1;
            }
        }
        counts[distinct - 1] += 1;
    }
    let m = trials as f64;
    let values: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
    let std_errors = values.iter().map(|&v| (v * (1.0 - v) / m).sqrt()).collect();
    Ok(ProbB {
        values,
        std_errors: Some(std_errors),
    })
}

/// Expected number of distinct requested contents, `N - Σ_i (1 - p_i)^K`.
pub fn expected_distinct(p: &PopularityDist, k: usize) -> f64 {
    let missing = stable_sum(p.probs().iter().map(|&x| pow_complement(x, k)));
    p.len() as f64 - missing
}
