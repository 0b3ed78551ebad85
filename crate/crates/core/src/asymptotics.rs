//! Riemann zeta, the asymptotic `R^ub / R^lb` ratio bounds under Zipf
//! popularity, and finite-size regime sweeps that compare the two.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    lower_bound_rate, prob_b, upper_bound_rate, ProbBMode, MAX_EXACT_PROB_B_CONTENTS,
};
use crate::error::{Error, Result};
use crate::model::{derive_seed, PopularityDist, ProblemInstance};
use crate::optimizer::q_dagger;

/// `ζ(v) = Σ_{j>=1} j^{-v}` for `v > 1`.
///
/// Sums the first `T` terms (smallest first) and adds the Euler–Maclaurin
/// tail `T^{1-v}/(v-1) - T^{-v}/2 + v T^{-v-1}/12`. `T` is the smallest
/// cutoff whose first omitted correction, `v(v+1)(v+2) T^{-v-3}/720`, is
/// below `tol`.
pub fn zeta(v: f64, tol: f64) -> Result<f64> {
    if !(v > 1.0) || !v.is_finite() {
        return Err(Error::Divergence { v });
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let leading = v * (v + 1.0) * (v + 2.0) / 720.0;
    let cutoff = ((leading / tol).powf(1.0 / (v + 3.0)).ceil() as u64).max(8);
    let t = cutoff as f64;
    let partial: f64 = (1..=cutoff).rev().map(|j| (j as f64).powf(-v)).sum();
    let tail = t.powf(1.0 - v) / (v - 1.0) - 0.5 * t.powf(-v) + v * t.powf(-v - 1.0) / 12.0;
    Ok(partial + tail)
}

const ZETA_TOL: f64 = 1e-12;

/// Default `λ'`: `e^{-1/ζ(v)}` for `v > 1`, `e^{v-1}` for `v < 1`.
pub fn default_lambda(v: f64) -> Result<f64> {
    if v > 1.0 {
        Ok((-1.0 / zeta(v, ZETA_TOL)?).exp())
    } else if (0.0..1.0).contains(&v) {
        Ok((v - 1.0).exp())
    } else {
        Err(Error::param(
            "v",
            format!("ratio bound undefined for v = {v}"),
        ))
    }
}

/// `(M - c)/(cM - c^2 - c^2 M) · 1/(1 - λ')`.
pub fn ratio_bound_with(m: f64, c: f64, lambda: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::param("c", format!("must lie in (0, 1), got {c}")));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::param(
            "lambda_prime",
            format!("must lie in [0, 1), got {lambda}"),
        ));
    }
    let quadratic = c * m - c * c - c * c * m;
    if !(quadratic > 0.0) {
        return Err(Error::ConstantChoice {
            c,
            m,
            value: quadratic,
        });
    }
    Ok((m - c) / quadratic / (1.0 - lambda))
}

/// Asymptotic ratio bound for Zipf exponent `v` (`v ≠ 1`) with the default `λ'`.
pub fn ratio_bound(m: f64, c: f64, v: f64) -> Result<f64> {
    ratio_bound_with(m, c, default_lambda(v)?)
}

/// Maximizer of `cM - c^2 - c^2 M`, i.e. `M / (2 + 2M)`.
pub fn best_c(m: f64) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::param("M", format!("must be positive, got {m}")));
    }
    Ok(m / (2.0 + 2.0 * m))
}

/// Parameters of a finite-size sweep along `K = ⌈a N^v⌉`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub v: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    pub n_list: Vec<usize>,
    /// Cut-set constant; `best_c(M)` when absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub lambda_prime: Option<f64>,
    /// Samples for Monte Carlo `P(B_i)` when `N` is beyond exact reach.
    #[serde(default = "default_mc_trials")]
    pub mc_trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_a() -> f64 {
    1.0
}

fn default_mc_trials() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R_ub")]
    pub r_ub: f64,
    #[serde(rename = "R_lb")]
    pub r_lb: f64,
    pub ratio: f64,
    pub bound: f64,
}

/// `⌈a N^v⌉`, ignoring floating-point excess below `1e-9`.
pub fn users_for(n: usize, a: f64, v: f64) -> usize {
    ((a * (n as f64).powf(v) - 1e-9).ceil() as usize).max(1)
}

/// One row per `N`: Zipf(`v`) popularity, `Q†` placement, upper and lower
/// bounds and their ratio next to the asymptotic bound. `P(B_i)` is exact up
/// to `N = 20` and sampled beyond, seeded per row from `(seed, N)`.
pub fn regime_sweep(spec: &RegimeSpec, m: f64) -> Result<Vec<SweepRow>> {
    if !spec.v.is_finite() || spec.v < 0.0 {
        return Err(Error::param(
            "v",
            format!("must be finite and >= 0, got {}", spec.v),
        ));
    }
    if !(spec.a > 0.0) || !spec.a.is_finite() {
        return Err(Error::param(
            "a",
            format!("must be positive, got {}", spec.a),
        ));
    }
    let c = match spec.c {
        Some(c) => c,
        None => best_c(m)?,
    };
    let lambda = match spec.lambda_prime {
        Some(l) => l,
        None => default_lambda(spec.v)?,
    };
    let bound = ratio_bound_with(m, c, lambda)?;

    let mut rows: Vec<SweepRow> = spec
        .n_list
        .par_iter()
        .map(|&n| {
            let k = users_for(n, spec.a, spec.v);
            let inst = ProblemInstance::new(n, k, m, 1)?;
            let p = PopularityDist::zipf(n, spec.v)?;
            let q = q_dagger(&inst, &p)?.q_dagger;
            let r_ub = upper_bound_rate(&inst, &p, &q)?;
            let mode = if n <= MAX_EXACT_PROB_B_CONTENTS {
                ProbBMode::Exact
            } else {
                ProbBMode::MonteCarlo {
                    trials: spec.mc_trials,
                    seed: derive_seed(spec.seed, n as u64),
                }
            };
            let pb = prob_b(&p, k, mode)?;
            let r_lb = lower_bound_rate(&inst, &pb.values)?;
            Ok(SweepRow {
                n,
                k,
                r_ub,
                r_lb,
                ratio: r_ub / r_lb,
                bound,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}
