use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decode_and_verify, deliver, place, Delivery, PlacementState};
use crate::error::{Error, Result};
use crate::model::{
    derive_seed, rng_for, sample_with, CachingDist, PopularityDist, ProblemInstance, RequestVector,
};

/// Where each trial's demand vector comes from.
#[derive(Debug, Clone, Copy)]
pub enum DemandSource<'a> {
    /// Fresh i.i.d. demands per trial.
    Sampled(&'a PopularityDist),
    /// The same demand vector in every trial; only placement is random.
    Fixed(&'a RequestVector),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    #[serde(skip)]
    pub demand: RequestVector,
    pub traffic_bits: u64,
    /// Traffic in units of `F`.
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoded: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean_rate: f64,
    pub std_error: f64,
}

/// Rebuilds trial `trial` of a [`run_trials`] call with the same `seed`:
/// its demand vector, placement and delivery.
pub fn replay_trial(
    inst: &ProblemInstance,
    demand: DemandSource<'_>,
    q: &CachingDist,
    trial: usize,
    seed: u64,
) -> Result<(RequestVector, PlacementState, Delivery)> {
    let trial_seed = derive_seed(seed, trial as u64);
    let d = match demand {
        DemandSource::Sampled(p) => sample_with(p, inst.k, &mut rng_for(trial_seed, 0)),
        DemandSource::Fixed(d) => d.clone(),
    };
    let pl = place(inst, q, derive_seed(trial_seed, 1))?;
    let delivery = deliver(&pl, &d)?;
    Ok((d, pl, delivery))
}

fn one_trial(
    inst: &ProblemInstance,
    demand: DemandSource<'_>,
    q: &CachingDist,
    trial: usize,
    seed: u64,
    verify: bool,
) -> Result<TrialRecord> {
    let (d, pl, delivery) = replay_trial(inst, demand, q, trial, seed)?;
    let decoded = verify.then(|| decode_and_verify(&pl, &d, &delivery.transmissions));
    Ok(TrialRecord {
        trial,
        demand: d,
        traffic_bits: delivery.traffic_bits,
        rate: delivery.traffic_bits as f64 / inst.f as f64,
        decoded,
    })
}

/// Runs `trials` independent place-and-deliver rounds in parallel.
///
/// Trial `t` is seeded from `(seed, t)` alone, and records come back sorted
/// by trial index, so the output does not depend on thread scheduling.
pub fn run_trials(
    inst: &ProblemInstance,
    demand: DemandSource<'_>,
    q: &CachingDist,
    trials: usize,
    seed: u64,
    verify: bool,
) -> Result<Vec<TrialRecord>> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    match demand {
        DemandSource::Sampled(p) if p.len() != inst.n => {
            return Err(Error::dist(
                "p",
                format!("has {} entries but N = {}", p.len(), inst.n),
            ));
        }
        DemandSource::Fixed(d) if d.users() != inst.k => {
            return Err(Error::param(
                "d",
                format!("has {} entries but K = {}", d.users(), inst.k),
            ));
        }
        _ => {}
    }
    q.check_for(inst)?;
    (0..trials)
        .into_par_iter()
        .map(|t| one_trial(inst, demand, q, t, seed, verify))
        .collect()
}

/// Sample mean and standard error of the per-trial rates, summed in trial order.
pub fn summarize(records: &[TrialRecord]) -> RateEstimate {
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.rate).sum::<f64>() / n;
    let std_error = if records.len() > 1 {
        let var = records.iter().map(|r| (r.rate - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    RateEstimate {
        mean_rate: mean,
        std_error,
    }
}

/// Empirical `E[traffic] / F` with demands drawn from `p`.
pub fn monte_carlo_rate(
    inst: &ProblemInstance,
    p: &PopularityDist,
    q: &CachingDist,
    trials: usize,
    seed: u64,
) -> Result<RateEstimate> {
    let records = run_trials(inst, DemandSource::Sampled(p), q, trials, seed, false)?;
    Ok(summarize(&records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_caching_rate_is_zero() {
        let inst = ProblemInstance::new(1, 2, 1.0, 64).unwrap();
        let p = PopularityDist::uniform(1).unwrap();
        let q = CachingDist::new(vec![1.0]).unwrap();
        let est = monte_carlo_rate(&inst, &p, &q, 5, 0).unwrap();
        assert_eq!(est.mean_rate, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn zero_cache_rate_is_k() {
        let inst = ProblemInstance::new(3, 4, 0.0, 32).unwrap();
        let p = PopularityDist::zipf(3, 1.0).unwrap();
        let q = CachingDist::uniform(3).unwrap();
        let est = monte_carlo_rate(&inst, &p, &q, 10, 3).unwrap();
        assert_eq!(est.mean_rate, 4.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let inst = ProblemInstance::new(3, 3, 1.0, 2000).unwrap();
        let p = PopularityDist::zipf(3, 0.7).unwrap();
        let q = CachingDist::new(vec![0.4, 0.35, 0.25]).unwrap();
        let a = monte_carlo_rate(&inst, &p, &q, 16, 42).unwrap();
        let b = monte_carlo_rate(&inst, &p, &q, 16, 42).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_rate(&inst, &p, &q, 16, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_trials_rejected() {
        let inst = ProblemInstance::new(1, 1, 0.0, 8).unwrap();
        let p = PopularityDist::uniform(1).unwrap();
        let q = CachingDist::uniform(1).unwrap();
        assert!(monte_carlo_rate(&inst, &p, &q, 0, 0).is_err());
    }
}
