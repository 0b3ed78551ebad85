use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::{CachingDist, PopularityDist, ProblemInstance, RequestVector};
use crate::optimizer::q_dagger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedPopularity {
    Uniform,
}

/// `"uniform"`, `{"zipf": v}` or `{"p": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PopularitySpec {
    Named(NamedPopularity),
    Zipf { zipf: f64 },
    Explicit { p: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NamedCaching {
    Uniform,
    QDagger,
}

/// `"uniform"`, `"q_dagger"` or `{"q": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CachingSpec {
    Named(NamedCaching),
    Explicit { q: Vec<f64> },
}

/// One experiment as read from a JSON config file. Every field is optional
/// here; commands check for the ones they need after flags are merged in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popularity: Option<PopularitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caching: Option<CachingSpec>,
    /// One-based content ids, one per user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON experiment config
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of contents N
    #[arg(long = "n", value_name = "N")]
    pub n: Option<usize>,
    /// Number of users K
    #[arg(long = "k", value_name = "K")]
    pub k: Option<usize>,
    /// Cache size M in units of contents
    #[arg(long = "m", value_name = "M")]
    pub m: Option<f64>,
    /// Bits per content F
    #[arg(long = "f", value_name = "F")]
    pub f: Option<u64>,
    /// Zipf popularity exponent
    #[arg(long, conflicts_with_all = ["p", "uniform_popularity"])]
    pub zipf_v: Option<f64>,
    /// Explicit popularity vector, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with = "uniform_popularity")]
    pub p: Option<Vec<f64>>,
    /// Uniform popularity
    #[arg(long)]
    pub uniform_popularity: bool,
    /// Named caching distribution
    #[arg(long, value_enum, conflicts_with = "q")]
    pub caching: Option<NamedCaching>,
    /// Explicit caching vector, comma separated
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Demand vector of one-based content ids, comma separated
    #[arg(long, value_delimiter = ',')]
    pub demand: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Cross-check against the subset-enumeration oracle
    #[arg(long)]
    pub oracle: bool,
    /// Skip per-trial decoding checks
    #[arg(long)]
    pub no_verify: bool,
    /// Write the transmissions of trial 0 as JSON lines
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Sweep scale: K = ceil(a N^v)
    #[arg(long)]
    pub a: Option<f64>,
    /// Sweep values of N, comma separated
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Cut-set constant c
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub lambda_prime: Option<f64>,
    /// Monte Carlo samples when exact enumeration is out of reach
    #[arg(long)]
    pub mc_trials: Option<usize>,
}

impl ConfigArgs {
    /// Config file contents with every flag given on the command line applied on top.
    pub fn merged(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
            if flag.is_some() {
                *slot = flag.clone();
            }
        }
        set(&mut cfg.n, &self.n);
        set(&mut cfg.k, &self.k);
        set(&mut cfg.m, &self.m);
        set(&mut cfg.f, &self.f);
        if let Some(v) = self.zipf_v {
            cfg.popularity = Some(PopularitySpec::Zipf { zipf: v });
        }
        if let Some(p) = &self.p {
            cfg.popularity = Some(PopularitySpec::Explicit { p: p.clone() });
        }
        if self.uniform_popularity {
            cfg.popularity = Some(PopularitySpec::Named(NamedPopularity::Uniform));
        }
        if let Some(c) = self.caching {
            cfg.caching = Some(CachingSpec::Named(c));
        }
        if let Some(q) = &self.q {
            cfg.caching = Some(CachingSpec::Explicit { q: q.clone() });
        }
        set(&mut cfg.demand, &self.demand);
        set(&mut cfg.trials, &self.trials);
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.output, &self.output);
        set(&mut cfg.format, &self.format);
        if self.oracle {
            cfg.oracle = Some(true);
        }
        if self.no_verify {
            cfg.verify = Some(false);
        }
        set(&mut cfg.trace, &self.trace);
        set(&mut cfg.a, &self.a);
        set(&mut cfg.n_list, &self.n_list);
        set(&mut cfg.c, &self.c);
        set(&mut cfg.lambda_prime, &self.lambda_prime);
        set(&mut cfg.mc_trials, &self.mc_trials);
        Ok(cfg)
    }
}

pub(crate) fn require<T: Clone>(value: &Option<T>, field: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::config(field, "missing required field"))
}

/// Validated model objects for one experiment.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub instance: ProblemInstance,
    pub popularity: PopularityDist,
    pub caching: CachingDist,
}

impl ExperimentConfig {
    /// Instance only; `F` defaults to 1 unless `default_f` says otherwise.
    pub fn instance(&mut self, default_f: u64) -> Result<ProblemInstance, CliError> {
        let n = require(&self.n, "N")?;
        let k = require(&self.k, "K")?;
        let m = require(&self.m, "M")?;
        let f = *self.f.get_or_insert(default_f);
        Ok(ProblemInstance::new(n, k, m, f)?)
    }

    /// Fills in default popularity and caching and builds the model objects.
    pub fn resolve(&mut self, default_f: u64) -> Result<Resolved, CliError> {
        let instance = self.instance(default_f)?;
        let n = instance.n;
        let popularity = match self
            .popularity
            .get_or_insert(PopularitySpec::Named(NamedPopularity::Uniform))
        {
            PopularitySpec::Named(NamedPopularity::Uniform) => PopularityDist::uniform(n)?,
            PopularitySpec::Zipf { zipf } => PopularityDist::zipf(n, *zipf)?,
            PopularitySpec::Explicit { p } => {
                if p.len() != n {
                    return Err(CliError::config(
                        "p",
                        format!("has {} entries but N = {n}", p.len()),
                    ));
                }
                PopularityDist::new(p.clone())?
            }
        };
        let caching = match self
            .caching
            .get_or_insert(CachingSpec::Named(NamedCaching::Uniform))
        {
            CachingSpec::Named(NamedCaching::Uniform) => CachingDist::uniform(n)?,
            CachingSpec::Named(NamedCaching::QDagger) => q_dagger(&instance, &popularity)?.q_dagger,
            CachingSpec::Explicit { q } => {
                if q.len() != n {
                    return Err(CliError::config(
                        "q",
                        format!("has {} entries but N = {n}", q.len()),
                    ));
                }
                let q = CachingDist::new(q.clone())?;
                q.check_feasible(instance.m)?;
                q
            }
        };
        Ok(Resolved {
            instance,
            popularity,
            caching,
        })
    }

    pub fn demand_vector(&self, n: usize) -> Result<Option<RequestVector>, CliError> {
        match &self.demand {
            None => Ok(None),
            Some(d) => RequestVector::from_one_based(d, n)
                .map(Some)
                .map_err(|e| CliError::config("demand", e.to_string())),
        }
    }
}
