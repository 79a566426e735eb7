use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ResolvedPolicy};
use crate::environments::{sample_round, Scenario};
use crate::error::{Error, Result};
use crate::policies::Policy;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "NONSTAT_THREADS";

const SCENARIO_STREAM: u64 = 0;
const ENVIRONMENT_STREAM: u64 = 1;

/// Stream used to build random scenario instances (pools, flip sets).
pub fn scenario_rng(base_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(SCENARIO_STREAM);
    rng
}

/// Stream of action sets and noise for one replication seed.
pub fn environment_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ENVIRONMENT_STREAM);
    rng
}

/// Parses [`THREADS_ENV`]. Unset, empty or invalid values yield `None`.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSnapshot {
    pub step: u64,
    pub theta: Vec<f64>,
}

/// Per-step outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub policy: String,
    /// `r_t = max_a ⟨a, θ*_t⟩ − ⟨A_t, θ*_t⟩`.
    pub instant: Vec<f64>,
    /// Running sum of `instant`.
    pub cumulative: Vec<f64>,
    pub chosen: Vec<usize>,
    pub snapshots: Vec<ThetaSnapshot>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Plays `policy` against `scenario` for its full horizon.
pub fn run_episode(
    policy: &mut dyn Policy<f64>,
    scenario: &Scenario,
    seed: u64,
    theta_stride: Option<u64>,
) -> Result<RegretTrace> {
    run_episode_with_rng(policy, scenario, &mut environment_rng(seed), theta_stride)
}

/// As [`run_episode`] with an explicit environment stream.
pub fn run_episode_with_rng(
    policy: &mut dyn Policy<f64>,
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
    theta_stride: Option<u64>,
) -> Result<RegretTrace> {
    if policy.dim() != scenario.dim() {
        return Err(Error::dim(scenario.dim(), policy.dim()));
    }
    let horizon = scenario.horizon();
    let n = horizon as usize;
    let mut trace = RegretTrace {
        policy: policy.name().to_string(),
        instant: Vec::with_capacity(n),
        cumulative: Vec::with_capacity(n),
        chosen: Vec::with_capacity(n),
        snapshots: Vec::new(),
    };
    let mut total = 0.0;
    for t in 1..=horizon {
        let wrap = |e: Error| Error::Episode {
            step: t as usize,
            source: Box::new(e),
        };
        let round = sample_round(&scenario.trajectory, &scenario.sampler, &scenario.noise, t, rng);
        let decision = policy.decide(t, &round.actions).map_err(wrap)?;
        let i = decision.chosen_index;
        let r = round.regret(i);
        policy.observe(&round.actions[i], round.reward(i)).map_err(wrap)?;
        total += r;
        trace.instant.push(r);
        trace.cumulative.push(total);
        trace.chosen.push(i);
        if let Some(stride) = theta_stride {
            if t % stride == 0 || t == horizon {
                trace.snapshots.push(ThetaSnapshot {
                    step: t,
                    theta: policy.theta_hat().to_vec(),
                });
            }
        }
    }
    Ok(trace)
}

/// Nearest-rank `p`-quantile of `sorted` (ascending): element of rank
/// `⌈p·N⌉`, at least 1.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Distribution of the final cumulative regret across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
}

impl FinalSummary {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            std: var.sqrt(),
            q05: nearest_rank(&sorted, 0.05),
            median: nearest_rank(&sorted, 0.5),
            q95: nearest_rank(&sorted, 0.95),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

/// Per-step band of one policy's cumulative regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub name: String,
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    pub final_regret: FinalSummary,
    /// Final regret of each replication, in replication order.
    pub finals: Vec<f64>,
    /// `θ̂` snapshots per replication, when requested.
    #[serde(skip)]
    pub snapshots: Vec<Vec<ThetaSnapshot>>,
}

/// Aggregated outcome of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub resolved: Vec<ResolvedPolicy>,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    pub policies: Vec<PolicyAggregate>,
}

impl AggregateResult {
    pub fn policy(&self, name: &str) -> Option<&PolicyAggregate> {
        self.policies.iter().find(|p| p.name == name)
    }
}

/// A validated experiment with its scenario built and its policies resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub resolved: Vec<ResolvedPolicy>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut scenario = config.scenario.build(&mut scenario_rng(config.seed))?;
        if let Some(h) = config.horizon {
            scenario = scenario.with_horizon(h);
        }
        let resolved = config
            .policies
            .iter()
            .map(|p| p.resolve(&scenario))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            scenario,
            resolved,
        })
    }

    pub fn seed(&self, replication: usize) -> u64 {
        self.config.seed.wrapping_add(replication as u64)
    }

    /// Every policy on replication `i`, in config order.
    pub fn run_replication(&self, i: usize) -> Result<Vec<RegretTrace>> {
        let stride = self
            .config
            .options
            .emit_theta_trace
            .then_some(self.config.options.theta_stride);
        self.resolved
            .iter()
            .map(|rp| {
                let mut policy = rp.build()?;
                run_episode(policy.as_mut(), &self.scenario, self.seed(i), stride).inspect_err(
                    |e| log::error!("replication {i} ({}) failed: {e}", rp.name),
                )
            })
            .collect()
    }

    /// Runs all replications, concurrently unless capped to one thread.
    pub fn run(&self) -> Result<AggregateResult> {
        let n = self.config.replications;
        let threads = self.config.options.threads.or_else(threads_from_env);
        let job = || {
            (0..n)
                .into_par_iter()
                .map(|i| self.run_replication(i).map(|t| (i, t)))
                .collect::<Result<Vec<_>>>()
        };
        let runs = match threads {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
                .install(job)?,
            None => job()?,
        };
        self.aggregate(runs)
    }

    /// Combines `(replication, traces)` pairs given in any order.
    pub fn aggregate(&self, mut runs: Vec<(usize, Vec<RegretTrace>)>) -> Result<AggregateResult> {
        runs.sort_by_key(|(i, _)| *i);
        let n = self.config.replications;
        if runs.len() != n || runs.iter().enumerate().any(|(k, (i, _))| k != *i) {
            return Err(Error::InvalidConfig(format!(
                "expected replications 0..{n}, got {} runs",
                runs.len()
            )));
        }
        let horizon = self.scenario.horizon() as usize;
        let mut policies = Vec::with_capacity(self.resolved.len());
        let mut column = vec![0.0; n];
        for (p, rp) in self.resolved.iter().enumerate() {
            let mut mean = Vec::with_capacity(horizon);
            let mut q05 = Vec::with_capacity(horizon);
            let mut q95 = Vec::with_capacity(horizon);
            for t in 0..horizon {
                for (slot, (_, traces)) in column.iter_mut().zip(&runs) {
                    *slot = traces[p].cumulative[t];
                }
                mean.push(column.iter().sum::<f64>() / n as f64);
                column.sort_by(f64::total_cmp);
                q05.push(nearest_rank(&column, 0.05));
                q95.push(nearest_rank(&column, 0.95));
            }
            let finals: Vec<f64> = runs.iter().map(|(_, t)| t[p].final_regret()).collect();
            policies.push(PolicyAggregate {
                name: rp.name.clone(),
                mean,
                q05,
                q95,
                final_regret: FinalSummary::from_values(&finals),
                finals,
                snapshots: runs.iter().map(|(_, t)| t[p].snapshots.clone()).collect(),
            });
        }
        Ok(AggregateResult {
            config: self.config.clone(),
            scenario: self.scenario.clone(),
            resolved: self.resolved.clone(),
            seeds: (0..n).map(|i| self.seed(i)).collect(),
            horizon: horizon as u64,
            policies,
        })
    }
}

/// Prepares and runs `cfg`.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    Experiment::prepare(cfg.clone())?.run()
}
