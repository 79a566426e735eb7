use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::unit_sphere_point;
use crate::error::{Error, Result};
use crate::estimator::{batch_wls, confidence_matrix, Estimator, HistoryLog};
use crate::linalg::{dot, quad_form_inv, sub_vec, SpdMatrix};
use crate::policies::{beta_dlinucb, beta_swlinucb, DLinUcb, Policy, PolicyConfig, SwLinUcb};

/// Relative slack on `deviation ≤ β` that absorbs floating point round-off.
pub const COVERAGE_SLACK: f64 = 1e-9;

/// How actions are picked during a coverage run. Both rules are predictable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// The optimistic rule of the policy under test.
    Optimistic,
    /// One uniform unit vector per round, independent of the data.
    Iid,
}

/// Forgetting scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Discounted { gamma: f64 },
    Window { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSpec {
    pub dim: usize,
    pub horizon: u64,
    pub weighting: Weighting,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    /// `‖θ*‖₂`, also used as `S` in the radius.
    pub param_bound: f64,
    pub runs: usize,
    /// Candidate actions per round in optimistic mode.
    pub arms: usize,
    pub action_mode: ActionMode,
}

impl CoverageSpec {
    pub fn discounted(dim: usize, horizon: u64, gamma: f64, runs: usize) -> Self {
        Self {
            dim,
            horizon,
            weighting: Weighting::Discounted { gamma },
            lambda: 1.0,
            delta: 0.05,
            sigma: 1.0,
            param_bound: 1.0,
            runs,
            arms: 10,
            action_mode: ActionMode::Optimistic,
        }
    }

    pub fn window(dim: usize, horizon: u64, window: usize, runs: usize) -> Self {
        Self {
            weighting: Weighting::Window { window },
            ..Self::discounted(dim, horizon, 1.0, runs)
        }
    }

    fn policy_config(&self) -> PolicyConfig<f64> {
        let mut cfg = PolicyConfig::new(self.dim);
        cfg.lambda = self.lambda;
        cfg.delta = self.delta;
        cfg.sigma = self.sigma;
        cfg.param_bound = self.param_bound;
        match self.weighting {
            Weighting::Discounted { gamma } => cfg.gamma = Some(gamma),
            Weighting::Window { window } => {
                cfg.window = Some(window);
                cfg.horizon = Some(self.horizon);
            }
        }
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.arms == 0 {
            return Err(Error::InvalidConfig(
                "coverage needs at least one run and one arm".into(),
            ));
        }
        if !(self.param_bound > 0.0) {
            return Err(Error::InvalidConfig("parameter norm must be positive".into()));
        }
        self.policy_config().validate_adaptive()
    }
}

/// Outcome of a Monte Carlo coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub spec: CoverageSpec,
    pub seed: u64,
    pub runs: usize,
    /// Runs where the deviation exceeded the radius at some step.
    pub failures: usize,
    pub empirical_failure_rate: f64,
    pub delta: f64,
    /// `min over runs of (β_t − deviation_t)` for `t = 1..=T`.
    pub worst_margin: Vec<f64>,
}

impl CoverageReport {
    /// `δ + 2·√(δ(1−δ)/runs)`.
    pub fn tolerance(&self) -> f64 {
        binomial_tolerance(self.delta, self.runs)
    }

    pub fn within_tolerance(&self) -> bool {
        self.empirical_failure_rate <= self.tolerance()
    }
}

/// Acceptance threshold for an empirical failure rate at level `delta`.
pub fn binomial_tolerance(delta: f64, runs: usize) -> f64 {
    delta + 2.0 * (delta * (1.0 - delta) / runs as f64).sqrt()
}

/// Monte Carlo check of the self-normalized deviation bound.
///
/// Each run draws `θ*` uniformly on the sphere of radius `S`, plays
/// `T` rounds and checks `‖θ̂_t − θ*‖_{V Ṽ⁻¹ V} ≤ β_t` for every `t ≥ 1`
/// (`‖θ̂_t − θ*‖_{V} ≤ β_t` for the sliding window). A run fails if the
/// bound breaks at any step.
pub fn coverage_test(spec: &CoverageSpec, seed: u64) -> Result<CoverageReport> {
    spec.validate()?;
    let results = (0..spec.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            coverage_run(spec, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = vec![f64::INFINITY; spec.horizon as usize];
    let mut failures = 0;
    for margins in &results {
        if margins.iter().any(|&m| m < 0.0) {
            failures += 1;
        }
        for (w, &m) in worst.iter_mut().zip(margins) {
            *w = w.min(m);
        }
    }
    Ok(CoverageReport {
        spec: spec.clone(),
        seed,
        runs: spec.runs,
        failures,
        empirical_failure_rate: failures as f64 / spec.runs as f64,
        delta: spec.delta,
        worst_margin: worst,
    })
}

enum Learner {
    Discounted(DLinUcb<f64>),
    Window(SwLinUcb<f64>),
}

impl Learner {
    fn policy(&mut self) -> &mut dyn Policy<f64> {
        match self {
            Learner::Discounted(p) => p,
            Learner::Window(p) => p,
        }
    }

    /// `(deviation, radius)` after the latest update.
    fn check(&self, theta: &[f64]) -> Result<(f64, f64)> {
        match self {
            Learner::Discounted(p) => {
                let s = p.state();
                let err = sub_vec(s.theta_hat(), theta);
                let y = s.v().mul_vec(&err)?;
                let dev = quad_form_inv(s.v_tilde(), &y)?.max(0.0).sqrt();
                Ok((dev, beta_dlinucb(s.steps(), p.config())?))
            }
            Learner::Window(p) => {
                let s = p.state();
                let err = sub_vec(s.theta_hat(), theta);
                let dev = quadratic(s.v(), &err)?.max(0.0).sqrt();
                Ok((dev, beta_swlinucb(s.steps(), p.config())?))
            }
        }
    }
}

fn quadratic(m: &SpdMatrix<f64>, x: &[f64]) -> Result<f64> {
    Ok(dot(x, &m.mul_vec(x)?))
}

/// Per-step margins `β_t − deviation_t` of one run; negative means violated
/// (after the relative slack).
fn coverage_run(spec: &CoverageSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let d = spec.dim;
    let theta: Vec<f64> = unit_sphere_point(d, rng)
        .into_iter()
        .map(|x| x * spec.param_bound)
        .collect();
    let cfg = spec.policy_config();
    let mut learner = match spec.weighting {
        Weighting::Discounted { .. } => Learner::Discounted(DLinUcb::new(cfg)?),
        Weighting::Window { .. } => Learner::Window(SwLinUcb::new(cfg)?),
    };
    let mut margins = Vec::with_capacity(spec.horizon as usize);
    for t in 1..=spec.horizon {
        let action = match spec.action_mode {
            ActionMode::Iid => unit_sphere_point(d, rng),
            ActionMode::Optimistic => {
                let actions: Vec<Vec<f64>> =
                    (0..spec.arms).map(|_| unit_sphere_point(d, rng)).collect();
                let i = learner.policy().decide(t, &actions)?.chosen_index;
                actions[i].clone()
            }
        };
        let z: f64 = rng.sample(StandardNormal);
        let reward = dot(&action, &theta) + spec.sigma * z;
        learner.policy().observe(&action, reward)?;
        let (dev, beta) = learner.check(&theta)?;
        let margin = beta - dev;
        margins.push(if dev <= beta * (1.0 + COVERAGE_SLACK) {
            margin.max(0.0)
        } else {
            margin
        });
    }
    Ok(margins)
}

/// Deviation and radius of the general weighted estimator at the end of
/// `history`, for arbitrary predictable weights:
/// `‖θ̂ − θ*‖_{V Ṽ⁻¹ V}` against
/// `(λ_t/√μ_t)·S + σ·√(2 ln(1/δ) + d·ln(1 + L²·Σw²/(d·μ_t)))`,
/// with `V = Σ w a aᵀ + λ_t I` and `Ṽ = Σ w² a aᵀ + μ_t I`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_deviation(
    history: &HistoryLog<f64>,
    dim: usize,
    weights: &[f64],
    lambda_t: f64,
    mu_t: f64,
    theta_star: &[f64],
    bounds: (f64, f64),
    sigma: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    let (action_bound, param_bound) = bounds;
    let theta_hat = batch_wls(history, dim, weights, lambda_t)?;
    let conf = confidence_matrix(history, dim, weights, lambda_t, mu_t)?;
    let err = sub_vec(&theta_hat, theta_star);
    let dev = quadratic(&conf, &err)?.max(0.0).sqrt();
    let d = dim as f64;
    let w2: f64 = weights.iter().map(|w| w * w).sum();
    let info = d * (1.0 + action_bound * action_bound * w2 / (d * mu_t)).ln();
    let radius =
        lambda_t / mu_t.sqrt() * param_bound + sigma * (2.0 * (1.0 / delta).ln() + info).sqrt();
    Ok((dev, radius))
}
