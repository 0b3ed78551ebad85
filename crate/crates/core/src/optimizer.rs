//! Approximate optimal caching distribution `Q†` and a numeric baseline.
//!
//! `Q†` sets `q_i M = 1 - (N - M) w_i / Σ_j w_j` with `w_i = p_i^{-1/(K-1)}`,
//! so more popular contents receive a larger share of every cache. Skewed
//! popularity with few users can push raw entries below zero; those are
//! projected back onto the feasible set and flagged.

use serde::{Deserialize, Serialize};

use crate::analytics::upper_bound_rate;
use crate::error::{Error, Result};
use crate::model::{stable_sum, CachingDist, PopularityDist, ProblemInstance, INPUT_SUM_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QDaggerResult {
    pub q_dagger: CachingDist,
    /// Closed-form values before projection.
    pub raw: Vec<f64>,
    pub clamped: bool,
    /// Zero-based indices moved onto a bound by the projection.
    pub clamp_report: Vec<usize>,
}

pub fn q_dagger(inst: &ProblemInstance, p: &PopularityDist) -> Result<QDaggerResult> {
    if inst.k < 2 {
        return Err(Error::UndefinedExponent);
    }
    let n = inst.n;
    if p.len() != n {
        return Err(Error::dist(
            "p",
            format!("has {} entries but N = {n}", p.len()),
        ));
    }
    let m = inst.m;
    if m == 0.0 || m >= n as f64 {
        // no deficit to distribute (M = N), or no cache at all (M = 0)
        let q = CachingDist::uniform(n)?;
        return Ok(QDaggerResult {
            raw: q.fractions().to_vec(),
            q_dagger: q,
            clamped: false,
            clamp_report: Vec::new(),
        });
    }

    // w_i / Σw evaluated as a softmax of -ln(p_i)/(K-1)
    let exponent = 1.0 / (inst.k - 1) as f64;
    let logs: Vec<f64> = p.probs().iter().map(|x| -x.ln() * exponent).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total = stable_sum(scaled.iter().copied());
    let deficit = n as f64 - m;
    let raw: Vec<f64> = scaled
        .iter()
        .map(|w| (1.0 - deficit * w / total) / m)
        .collect();

    let (q_dagger, clamp_report) = project_feasible(&raw, m)?;
    Ok(QDaggerResult {
        q_dagger,
        raw,
        clamped: !clamp_report.is_empty(),
        clamp_report,
    })
}

/// Projects a sum-one vector onto `{0 <= q_i <= 1/M, Σ q_i = 1}`.
///
/// Out-of-range entries are pinned to the violated bound and the leftover
/// mass is spread over the remaining entries in proportion to their values,
/// repeating until nothing new is pinned. If proportional redistribution
/// cannot restore `Σ = 1` (all remaining entries pinned) the vector is
/// instead shifted by a common threshold and clipped, which also keeps the
/// order of entries. Returns the projected distribution and the pinned
/// indices (zero-based, ascending).
pub fn project_feasible(raw: &[f64], m: f64) -> Result<(CachingDist, Vec<usize>)> {
    if raw.is_empty() || raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::dist("q", "must be a nonempty list of finite values"));
    }
    let total = stable_sum(raw.iter().copied());
    if (total - 1.0).abs() > INPUT_SUM_TOLERANCE {
        return Err(Error::dist(
            "q",
            format!("entries sum to {total}, expected 1"),
        ));
    }
    if !(m >= 0.0) {
        return Err(Error::param("M", format!("must be nonnegative, got {m}")));
    }
    let n = raw.len();
    if m > n as f64 {
        return Err(Error::param("M", format!("must not exceed N={n}, got {m}")));
    }
    let upper = if m > 0.0 { 1.0 / m } else { f64::INFINITY };

    let mut q = raw.to_vec();
    let mut pinned = vec![false; n];
    for _ in 0..=n {
        let mut newly = false;
        for i in 0..n {
            if pinned[i] {
                continue;
            }
            if q[i] < 0.0 {
                q[i] = 0.0;
            } else if q[i] > upper {
                q[i] = upper;
            } else {
                continue;
            }
            pinned[i] = true;
            newly = true;
        }
        if !newly {
            break;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        if free.is_empty() {
            break;
        }
        let remaining = 1.0 - stable_sum((0..n).filter(|&i| pinned[i]).map(|i| q[i]));
        let free_sum = stable_sum(free.iter().map(|&i| q[i]));
        if free_sum > 0.0 {
            let scale = remaining / free_sum;
            free.iter().for_each(|&i| q[i] *= scale);
        } else {
            let share = remaining / free.len() as f64;
            free.iter().for_each(|&i| q[i] = share);
        }
    }

    let in_bounds = q.iter().all(|&x| (0.0..=upper).contains(&x));
    if !in_bounds || (stable_sum(q.iter().copied()) - 1.0).abs() > 1e-12 {
        q = threshold_projection(raw, upper);
        for i in 0..n {
            pinned[i] = q[i] == 0.0 && raw[i] != 0.0 || q[i] == upper && raw[i] != upper;
        }
    }

    let report = (0..n).filter(|&i| pinned[i]).collect();
    Ok((CachingDist::new(q)?, report))
}

/// `q_i = clamp(raw_i - t, 0, upper)` with `t` chosen by bisection so `Σ q = 1`.
fn threshold_projection(raw: &[f64], upper: f64) -> Vec<f64> {
    let apply = |t: f64| -> Vec<f64> { raw.iter().map(|&x| (x - t).clamp(0.0, upper)).collect() };
    let mass = |t: f64| stable_sum(apply(t));
    let span = raw.iter().map(|x| x.abs()).fold(0.0, f64::max) + upper.min(1.0) + 1.0;
    let (mut lo, mut hi) = (-span - upper.min(1e6), span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    apply(0.5 * (lo + hi))
}

/// Outcome of the numeric minimization of the upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericOptimum {
    pub q: CachingDist,
    pub upper_bound: f64,
    /// `R^ub(Q†)`, when `Q†` is defined and satisfies the bound's hypothesis.
    pub q_dagger_upper_bound: Option<f64>,
    /// True when no searched point beat `Q†`.
    pub q_dagger_incumbent: bool,
}

/// Largest `N` for which the initial grid over sorted allocations is searched.
pub const MAX_GRID_CONTENTS: usize = 6;

/// Minimizes `R^ub` over co-monotone caching distributions.
///
/// Works on the allocation sorted along ascending popularity. A coarse grid
/// over non-decreasing multiples of `1/grid_resolution` (when `N <= 6`),
/// uniform `Q` and `Q†` seed the search; pairwise mass transfers of
/// shrinking size then refine the incumbent, re-sorting after each move so
/// it stays co-monotone.
pub fn minimize_ub_numeric(
    inst: &ProblemInstance,
    p: &PopularityDist,
    grid_resolution: usize,
) -> Result<NumericOptimum> {
    let n = inst.n;
    if p.len() != n {
        return Err(Error::dist(
            "p",
            format!("has {} entries but N = {n}", p.len()),
        ));
    }
    let order = p.ascending_order().to_vec();
    let upper = if inst.m > 0.0 {
        1.0 / inst.m
    } else {
        f64::INFINITY
    };

    let to_storage = |y: &[f64]| -> Vec<f64> {
        let mut q = vec![0.0; n];
        for (r, &i) in order.iter().enumerate() {
            q[i] = y[r];
        }
        q
    };
    let objective = |y: &[f64]| -> f64 {
        if y.iter().any(|&v| v < 0.0 || v > upper + 1e-15) {
            return f64::INFINITY;
        }
        CachingDist::new(to_storage(y))
            .and_then(|q| upper_bound_rate(inst, p, &q))
            .unwrap_or(f64::INFINITY)
    };

    let uniform = vec![1.0 / n as f64; n];
    let mut best_y = uniform.clone();
    let mut best = objective(&uniform);

    let dagger = if inst.k >= 2 {
        let qd = q_dagger(inst, p)?;
        let y: Vec<f64> = order.iter().map(|&i| qd.q_dagger.fractions()[i]).collect();
        let value = objective(&y);
        value.is_finite().then_some((y, value))
    } else {
        None
    };
    if let Some((y, value)) = &dagger {
        if *value <= best {
            best = *value;
            best_y = y.clone();
        }
    }

    if n <= MAX_GRID_CONTENTS && grid_resolution > 0 {
        let step = 1.0 / grid_resolution as f64;
        for_each_sorted_composition(grid_resolution, n, |parts| {
            let y: Vec<f64> = parts.iter().map(|&c| c as f64 * step).collect();
            let value = objective(&y);
            if value < best {
                best = value;
                best_y = y;
            }
        });
    }

    let mut delta = if grid_resolution > 0 {
        0.5 / grid_resolution as f64
    } else {
        0.05
    };
    while delta > 1e-10 && n > 1 {
        let mut improved = true;
        let mut rounds = 0;
        while improved && rounds < 10_000 {
            improved = false;
            rounds += 1;
            for a in 0..n {
                for b in 0..n {
                    if a == b || best_y[a] < delta {
                        continue;
                    }
                    let mut y = best_y.clone();
                    y[a] -= delta;
                    y[b] += delta;
                    y.sort_by(f64::total_cmp);
                    let value = objective(&y);
                    if value < best - 1e-15 {
                        best = value;
                        best_y = y;
                        improved = true;
                    }
                }
            }
        }
        delta *= 0.5;
    }

    let q_dagger_upper_bound = dagger.as_ref().map(|(_, v)| *v);
    let q_dagger_incumbent = q_dagger_upper_bound.is_some_and(|v| v <= best);
    let (q, upper_bound) = match (&dagger, q_dagger_incumbent) {
        (Some((y, v)), true) => (CachingDist::new(to_storage(y))?, *v),
        _ => (CachingDist::new(to_storage(&best_y))?, best),
    };
    Ok(NumericOptimum {
        q,
        upper_bound,
        q_dagger_upper_bound,
        q_dagger_incumbent,
    })
}

/// Non-decreasing sequences of `parts` nonnegative integers summing to `total`.
fn for_each_sorted_composition<F: FnMut(&[usize])>(total: usize, parts: usize, mut visit: F) {
    fn rec<F: FnMut(&[usize])>(
        buf: &mut Vec<usize>,
        left: usize,
        slots: usize,
        min: usize,
        visit: &mut F,
    ) {
        if slots == 1 {
            if left >= min {
                buf.push(left);
                visit(buf);
                buf.pop();
            }
            return;
        }
        // remaining slots each take at least `v`
        let mut v = min;
        while v * slots <= left {
            buf.push(v);
            rec(buf, left - v, slots - 1, v, visit);
            buf.pop();
            v += 1;
        }
    }
    let mut buf = Vec::with_capacity(parts);
    rec(&mut buf, total, parts, 0, &mut visit);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, k: usize, m: f64) -> ProblemInstance {
        ProblemInstance::new(n, k, m, 1).unwrap()
    }

    #[test]
    fn uniform_popularity_is_fixed_point() {
        for (n, k, m) in [(2, 2, 1.0), (5, 7, 2.5), (4, 3, 0.5)] {
            let r = q_dagger(&inst(n, k, m), &PopularityDist::uniform(n).unwrap()).unwrap();
            assert!(!r.clamped);
            let q = r.q_dagger.fractions();
            assert!(q.iter().all(|&x| x == q[0]));
            assert!((q[0] - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_value_two_contents() {
        let p = PopularityDist::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let r = q_dagger(&inst(2, 3, 1.0), &p).unwrap();
        let q = r.q_dagger.fractions();
        let w1 = 1.5f64.sqrt();
        let w2 = 3f64.sqrt();
        assert!((q[0] - (1.0 - w1 / (w1 + w2))).abs() < 1e-12);
        assert!((q[0] - 0.5858).abs() < 1e-3 && (q[1] - 0.4142).abs() < 1e-3);
    }

    #[test]
    fn full_cache_is_uniform() {
        let p = PopularityDist::zipf(3, 1.0).unwrap();
        let r = q_dagger(&inst(3, 4, 3.0), &p).unwrap();
        assert!(!r.clamped);
        assert!(r
            .q_dagger
            .fractions()
            .iter()
            .all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_user_undefined() {
        let p = PopularityDist::zipf(3, 1.0).unwrap();
        assert_eq!(
            q_dagger(&inst(3, 1, 1.0), &p).unwrap_err(),
            Error::UndefinedExponent
        );
    }

    #[test]
    fn skewed_popularity_gets_clamped() {
        let p = PopularityDist::zipf(4, 2.0).unwrap();
        let r = q_dagger(&inst(4, 2, 1.0), &p).unwrap();
        assert!(r.clamped);
        assert!(r.raw.iter().any(|&x| x < 0.0));
        let q = r.q_dagger.fractions();
        assert!(q.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((stable_sum(q.iter().copied()) - 1.0).abs() <= 1e-9);
        assert!(q.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn large_k_tends_to_uniform() {
        let p = PopularityDist::zipf(5, 1.0).unwrap();
        let r = q_dagger(&inst(5, 10_000, 2.0), &p).unwrap();
        assert!(r
            .q_dagger
            .fractions()
            .iter()
            .all(|&x| (x - 0.2).abs() < 1e-3));
    }

    #[test]
    fn projection_examples() {
        let (q, report) = project_feasible(&[0.3, 0.7], 1.0).unwrap();
        assert_eq!(q.fractions(), &[0.3, 0.7]);
        assert!(report.is_empty());

        let (q, report) = project_feasible(&[1.2, -0.2], 1.0).unwrap();
        assert_eq!(q.fractions(), &[1.0, 0.0]);
        assert_eq!(report, vec![0, 1]);
    }

    #[test]
    fn projection_falls_back_when_pinned_mass_overshoots() {
        let (q, _) = project_feasible(&[0.8, 0.8, 0.8, -1.4], 2.0).unwrap();
        let q = q.fractions();
        assert!(q.iter().all(|&x| (0.0..=0.5 + 1e-15).contains(&x)));
        assert!((stable_sum(q.iter().copied()) - 1.0).abs() <= 1e-9);
        assert!(q[0] == q[1] && q[1] == q[2]);
    }

    #[test]
    fn projection_rejects_bad_sum() {
        assert!(project_feasible(&[0.5, 0.2], 1.0).is_err());
    }

    #[test]
    fn sorted_compositions() {
        let mut seen = Vec::new();
        for_each_sorted_composition(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![0, 4], vec![1, 3], vec![2, 2]]);
    }

    #[test]
    fn numeric_degenerate_single_content() {
        let r = minimize_ub_numeric(&inst(1, 3, 1.0), &PopularityDist::uniform(1).unwrap(), 10)
            .unwrap();
        assert_eq!(r.q.fractions(), &[1.0]);
    }

    #[test]
    fn numeric_uniform_popularity_stays_uniform() {
        let r = minimize_ub_numeric(&inst(3, 3, 1.0), &PopularityDist::uniform(3).unwrap(), 12)
            .unwrap();
        assert!(r
            .q
            .fractions()
            .iter()
            .all(|&x| (x - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn numeric_never_worse_than_q_dagger() {
        let i = inst(2, 3, 1.0);
        let p = PopularityDist::zipf(2, 1.0).unwrap();
        let r = minimize_ub_numeric(&i, &p, 20).unwrap();
        let dagger = r.q_dagger_upper_bound.unwrap();
        assert!(r.upper_bound <= dagger + 1e-6);
        assert!((upper_bound_rate(&i, &p, &r.q).unwrap() - r.upper_bound).abs() < 1e-12);
    }
}
