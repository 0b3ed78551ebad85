use serde::{Deserialize, Serialize};

use super::probability::prob_a;
use super::rate::per_case_rate;
use crate::error::{Error, Result};
use crate::model::{CachingDist, PopularityDist, ProblemInstance};

/// Absolute slack when checking that `q` is non-decreasing along ascending `p`.
const CO_MONOTONE_SLACK: f64 = 1e-12;

/// Upper bound together with the co-sorted view it was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    /// One-based content ids, least popular first.
    pub ascending_order: Vec<usize>,
    /// `P(A_i)` along `ascending_order`.
    pub prob_a: Vec<f64>,
}

/// Storage indices sorted by ascending `(p, q, index)`; ties in `p` are
/// ordered by `q` so any co-monotone pair is accepted.
fn co_sorted(p: &PopularityDist, q: &CachingDist) -> Vec<usize> {
    let (pp, qq) = (p.probs(), q.fractions());
    let mut order: Vec<usize> = (0..pp.len()).collect();
    order.sort_by(|&a, &b| {
        pp[a]
            .total_cmp(&pp[b])
            .then(qq[a].total_cmp(&qq[b]))
            .then(a.cmp(&b))
    });
    order
}

/// True when `q` is non-decreasing along ascending `p`.
pub fn is_co_monotone(p: &PopularityDist, q: &CachingDist) -> bool {
    let order = co_sorted(p, q);
    let qq = q.fractions();
    order
        .windows(2)
        .all(|w| qq[w[1]] >= qq[w[0]] - CO_MONOTONE_SLACK)
}

/// `R^ub = Σ_i P(A_i) · ((1 - q_i M)/(q_i M)) · [1 - (1 - q_i M)^K]` on the
/// co-sorted ascending `(p, q)`, in units of `F`.
///
/// Under `A_i` every requested content has `q >= q_i`; replacing all of them
/// by `q_i` gives the all-distinct per-case rate. Entries with `q_i M = 0` use
/// the continuous limit `K`.
pub fn upper_bound_rate(
    inst: &ProblemInstance,
    p: &PopularityDist,
    q: &CachingDist,
) -> Result<f64> {
    upper_bound_detail(inst, p, q).map(|ub| ub.value)
}

pub fn upper_bound_detail(
    inst: &ProblemInstance,
    p: &PopularityDist,
    q: &CachingDist,
) -> Result<UpperBound> {
    if p.len() != inst.n {
        return Err(Error::dist(
            "p",
            format!("has {} entries but N = {}", p.len(), inst.n),
        ));
    }
    q.check_for(inst)?;
    let order = co_sorted(p, q);
    let qq = q.fractions();
    if let Some(w) = order
        .windows(2)
        .find(|w| qq[w[1]] < qq[w[0]] - CO_MONOTONE_SLACK)
    {
        return Err(Error::HypothesisViolation(format!(
            "content {} is more popular than content {} but has smaller q ({} < {})",
            w[1] + 1,
            w[0] + 1,
            qq[w[1]],
            qq[w[0]]
        )));
    }
    let p_asc: Vec<f64> = order.iter().map(|&i| p.probs()[i]).collect();
    let pa = prob_a(&p_asc, inst.k)?;
    let value = if inst.m == 0.0 {
        inst.k as f64
    } else {
        pa.iter()
            .zip(&order)
            .map(|(&a, &i)| a * per_case_rate(q.cache_probability(i, inst.m), inst.k))
            .sum()
    };
    Ok(UpperBound {
        value,
        ascending_order: order.iter().map(|&i| i + 1).collect(),
        prob_a: pa,
    })
}

/// Cut-set value for `distinct` requested contents:
/// `max_{1<=s<=min(distinct,K)} (s - s/⌊distinct/s⌋ · M)`, clamped at zero.
pub fn cut_set_term(distinct: usize, k: usize, m: f64) -> f64 {
    (1..=distinct.min(k))
        .map(|s| s as f64 - s as f64 / (distinct / s) as f64 * m)
        .fold(0.0, f64::max)
}

/// `R^lb = Σ_i P(B_i) · cut_set_term(i, K, M)`.
pub fn lower_bound_rate(inst: &ProblemInstance, prob_b: &[f64]) -> Result<f64> {
    if prob_b.len() != inst.n {
        return Err(Error::param(
            "PB",
            format!("has {} entries but N = {}", prob_b.len(), inst.n),
        ));
    }
    Ok(prob_b
        .iter()
        .enumerate()
        .map(|(i, &pb)| pb * cut_set_term(i + 1, inst.k, inst.m))
        .sum())
}
