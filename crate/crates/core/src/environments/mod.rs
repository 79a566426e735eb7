//! Non-stationary reward generators.
//!
//! A [`Scenario`] bundles a parameter trajectory `θ*_t`, an action-set
//! sampler and a noise model. Rewards follow `X_t = ⟨A_t, θ*_t⟩ + η_t` with
//! Gaussian `η_t`.

mod pools;
mod scenarios;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use pools::{fit_theta_star, load_context_pool_files, load_context_pools, ContextPools};
pub use scenarios::{
    abrupt_scenario, highdim_flip_scenario, slowly_varying_scenario, stationary_scenario,
    synthetic_two_pools, Scenario, ScenarioSpec,
};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub_vec};

/// How `θ*_t` is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// Piecewise constant: `segments[i] = (start, θ)` applies from round
    /// `start` (inclusive) until the next segment starts.
    Piecewise { segments: Vec<(u64, Vec<f64>)> },
    /// `(r cos φ_t, r sin φ_t)` with `φ` moving linearly from `from` to `to`
    /// over rounds `1..=ramp`, then constant.
    Arc {
        radius: f64,
        from: f64,
        to: f64,
        ramp: u64,
    },
}

/// Parameter sequence `θ*_1 … θ*_T` with breakpoint metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaTrajectory {
    pub dim: usize,
    pub horizon: u64,
    pub breakpoints: Vec<u64>,
    pub generator: Trajectory,
}

impl ThetaTrajectory {
    pub fn constant(theta: Vec<f64>, horizon: u64) -> Self {
        Self {
            dim: theta.len(),
            horizon,
            breakpoints: Vec::new(),
            generator: Trajectory::Piecewise {
                segments: vec![(1, theta)],
            },
        }
    }

    /// Builds a piecewise-constant trajectory; breakpoints are the segment
    /// starts after the first.
    pub fn piecewise(segments: Vec<(u64, Vec<f64>)>, horizon: u64) -> Result<Self> {
        let dim = segments
            .first()
            .map(|(_, th)| th.len())
            .ok_or_else(|| Error::InvalidConfig("trajectory needs at least one segment".into()))?;
        if segments[0].0 != 1 {
            return Err(Error::InvalidConfig("first segment must start at round 1".into()));
        }
        if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidConfig(
                "segment starts must be strictly increasing".into(),
            ));
        }
        if let Some((_, th)) = segments.iter().find(|(_, th)| th.len() != dim) {
            return Err(Error::dim(dim, th.len()));
        }
        Ok(Self {
            dim,
            horizon,
            breakpoints: segments.iter().skip(1).map(|(s, _)| *s).collect(),
            generator: Trajectory::Piecewise { segments },
        })
    }

    /// `θ*_t` for 1-based round `t`. Rounds past the horizon extend the last
    /// value.
    pub fn theta(&self, t: u64) -> Vec<f64> {
        match &self.generator {
            Trajectory::Piecewise { segments } => segments
                .iter()
                .rev()
                .find(|(start, _)| *start <= t)
                .unwrap_or(&segments[0])
                .1
                .clone(),
            Trajectory::Arc {
                radius,
                from,
                to,
                ramp,
            } => {
                let frac = if *ramp <= 1 {
                    1.0
                } else {
                    (t.saturating_sub(1).min(ramp - 1)) as f64 / (ramp - 1) as f64
                };
                let phi = from + (to - from) * frac;
                vec![radius * phi.cos(), radius * phi.sin()]
            }
        }
    }

    /// `max_t ‖θ*_t‖₂` over the horizon.
    pub fn max_norm(&self) -> f64 {
        (1..=self.horizon.max(1))
            .map(|t| norm(&self.theta(t)))
            .fold(0.0, f64::max)
    }

    /// Same generator with a longer or shorter horizon.
    pub fn with_horizon(&self, horizon: u64) -> Self {
        let mut out = self.clone();
        out.horizon = horizon;
        out.breakpoints.retain(|&b| b <= horizon);
        out
    }
}

/// Variation budget `B_T = Σ_{s=1}^{T−1} ‖θ*_s − θ*_{s+1}‖₂`.
pub fn variation_budget(traj: &ThetaTrajectory) -> f64 {
    if traj.horizon < 2 {
        return 0.0;
    }
    let mut prev = traj.theta(1);
    let mut total = 0.0;
    for t in 2..=traj.horizon {
        let cur = traj.theta(t);
        total += norm(&sub_vec(&prev, &cur));
        prev = cur;
    }
    total
}

/// Source of the per-round candidate actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ActionSetSampler {
    /// `k` i.i.d. uniform vectors on the unit sphere.
    UnitSphere { dim: usize, k: usize },
    /// The same list every round.
    Fixed { actions: Vec<Vec<f64>> },
    /// One context drawn uniformly from each pool.
    TwoPool {
        positive: Vec<Vec<f64>>,
        negative: Vec<Vec<f64>>,
    },
}

impl ActionSetSampler {
    /// Canonical basis `{e_1, …, e_d}`: the multi-armed special case.
    pub fn canonical_basis(dim: usize) -> Self {
        let actions = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        ActionSetSampler::Fixed { actions }
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSetSampler::UnitSphere { dim, .. } => *dim,
            ActionSetSampler::Fixed { actions } => actions.first().map_or(0, Vec::len),
            ActionSetSampler::TwoPool { positive, .. } => positive.first().map_or(0, Vec::len),
        }
    }

    /// Bound `L` on every emitted action norm.
    pub fn norm_bound(&self) -> f64 {
        let max_norm = |v: &[Vec<f64>]| v.iter().map(|a| norm(a)).fold(0.0, f64::max);
        match self {
            ActionSetSampler::UnitSphere { .. } => 1.0,
            ActionSetSampler::Fixed { actions } => max_norm(actions),
            ActionSetSampler::TwoPool { positive, negative } => {
                max_norm(positive).max(max_norm(negative))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ActionSetSampler::UnitSphere { dim, k } if *dim == 0 || *k == 0 => Err(
                Error::InvalidConfig("unit-sphere sampler needs dim >= 1 and k >= 1".into()),
            ),
            ActionSetSampler::Fixed { actions } if actions.is_empty() => Err(Error::EmptyActionSet),
            ActionSetSampler::TwoPool { positive, .. } if positive.is_empty() => {
                Err(Error::EmptyPool("positive".into()))
            }
            ActionSetSampler::TwoPool { negative, .. } if negative.is_empty() => {
                Err(Error::EmptyPool("negative".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            ActionSetSampler::UnitSphere { dim, k } => {
                (0..*k).map(|_| unit_sphere_point(*dim, rng)).collect()
            }
            ActionSetSampler::Fixed { actions } => actions.clone(),
            ActionSetSampler::TwoPool { positive, negative } => {
                let p = rng.random_range(0..positive.len());
                let n = rng.random_range(0..negative.len());
                vec![positive[p].clone(), negative[n].clone()]
            }
        }
    }
}

/// Uniform point on the unit sphere in `R^dim`.
pub fn unit_sphere_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Gaussian reward noise with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise standard deviation must be nonnegative, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    /// One draw. Always consumes one normal variate, so the random stream
    /// does not depend on `sigma`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.sigma * z
    }
}

/// One round of interaction: the action set, the current parameter and the
/// round's noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub t: u64,
    pub actions: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    noise: f64,
}

impl Round {
    pub fn mean_reward(&self, index: usize) -> f64 {
        dot(&self.actions[index], &self.theta)
    }

    /// Realized reward `⟨a, θ*_t⟩ + η_t` of action `index`.
    pub fn reward(&self, index: usize) -> f64 {
        self.mean_reward(index) + self.noise
    }

    /// `max_a ⟨a, θ*_t⟩` over the round's actions.
    pub fn best_mean(&self) -> f64 {
        (0..self.actions.len())
            .map(|i| self.mean_reward(i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Instantaneous dynamic regret of playing `index`.
    pub fn regret(&self, index: usize) -> f64 {
        self.best_mean() - self.mean_reward(index)
    }
}

/// Draws round `t`: the action set first, then one noise variate.
pub fn sample_round<R: Rng + ?Sized>(
    traj: &ThetaTrajectory,
    sampler: &ActionSetSampler,
    noise: &NoiseModel,
    t: u64,
    rng: &mut R,
) -> Round {
    let actions = sampler.sample(rng);
    let eta = noise.sample(rng);
    Round {
        t,
        actions,
        theta: traj.theta(t),
        noise: eta,
    }
}
