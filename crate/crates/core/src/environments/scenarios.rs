use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    fit_theta_star, load_context_pool_files, load_context_pools, variation_budget,
    ActionSetSampler, NoiseModel, ThetaTrajectory, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::norm;

/// Piecewise-constant 2-d trajectory on the unit circle:
/// `(1,0)`, then `(−1,0)` from 1000, `(0,1)` from 2000, `(0,−1)` from 3000.
pub fn abrupt_scenario() -> ThetaTrajectory {
    ThetaTrajectory::piecewise(
        vec![
            (1, vec![1.0, 0.0]),
            (1000, vec![-1.0, 0.0]),
            (2000, vec![0.0, 1.0]),
            (3000, vec![0.0, -1.0]),
        ],
        6000,
    )
    .expect("static trajectory is well formed")
}

/// `θ*_t = (cos φ_t, sin φ_t)` with `φ` rising linearly from 0 to π/2 over
/// the first 3000 rounds, then constant until 6000.
pub fn slowly_varying_scenario() -> ThetaTrajectory {
    ThetaTrajectory {
        dim: 2,
        horizon: 6000,
        breakpoints: Vec::new(),
        generator: Trajectory::Arc {
            radius: 1.0,
            from: 0.0,
            to: FRAC_PI_2,
            ramp: 3000,
        },
    }
}

/// Stationary trajectory at `theta`.
pub fn stationary_scenario(theta: Vec<f64>, horizon: u64) -> ThetaTrajectory {
    ThetaTrajectory::constant(theta, horizon)
}

/// `θ*` until `flip_time`, then `θ*` with `⌈flip_fraction·d⌉` randomly chosen
/// coordinates negated.
pub fn highdim_flip_scenario<R: Rng + ?Sized>(
    theta_star: &[f64],
    flip_fraction: f64,
    flip_time: u64,
    horizon: u64,
    rng: &mut R,
) -> Result<ThetaTrajectory> {
    if !(0.0..=1.0).contains(&flip_fraction) {
        return Err(Error::InvalidConfig(format!(
            "flip fraction must lie in [0, 1], got {flip_fraction}"
        )));
    }
    let d = theta_star.len();
    // Guard against 0.6 * 50 landing a hair above 30.
    let count = ((flip_fraction * d as f64) - 1e-9).ceil().max(0.0) as usize;
    if count == 0 {
        return Ok(ThetaTrajectory::constant(theta_star.to_vec(), horizon));
    }
    let mut flipped = theta_star.to_vec();
    for i in sample(rng, d, count.min(d)) {
        flipped[i] = -flipped[i];
    }
    ThetaTrajectory::piecewise(vec![(1, theta_star.to_vec()), (flip_time, flipped)], horizon)
}

/// Two pools of unit-norm contexts separated along `theta`: each context is
/// `s·margin·θ̂ + g` normalized, with `s = +1` for the positive pool, `−1`
/// for the negative one, `θ̂ = θ/‖θ‖` and `g ~ N(0, I/d)`.
pub fn synthetic_two_pools<R: Rng + ?Sized>(
    theta: &[f64],
    pool_size: usize,
    margin: f64,
    rng: &mut R,
) -> Result<ActionSetSampler> {
    let d = theta.len();
    let n = norm(theta);
    if d == 0 || n == 0.0 {
        return Err(Error::InvalidConfig(
            "two-pool generator needs a nonzero parameter".into(),
        ));
    }
    if pool_size == 0 {
        return Err(Error::EmptyPool("synthetic".into()));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut draw = |sign: f64| -> Vec<f64> {
        loop {
            let v: Vec<f64> = theta
                .iter()
                .map(|&th| sign * margin * th / n + scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let vn = norm(&v);
            if vn > 1e-12 {
                return v.into_iter().map(|x| x / vn).collect();
            }
        }
    };
    let positive = (0..pool_size).map(|_| draw(1.0)).collect();
    let negative = (0..pool_size).map(|_| draw(-1.0)).collect();
    Ok(ActionSetSampler::TwoPool { positive, negative })
}

/// A ready-to-run environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub trajectory: ThetaTrajectory,
    pub sampler: ActionSetSampler,
    pub noise: NoiseModel,
    /// Bound `S` on `‖θ*_t‖₂`.
    pub param_bound: f64,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.trajectory.dim
    }

    pub fn horizon(&self) -> u64 {
        self.trajectory.horizon
    }

    /// Bound `L` on the action norms.
    pub fn action_bound(&self) -> f64 {
        self.sampler.norm_bound()
    }

    pub fn variation_budget(&self) -> f64 {
        variation_budget(&self.trajectory)
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.trajectory = self.trajectory.with_horizon(horizon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.sampler.dim() != self.dim() {
            return Err(Error::dim(self.dim(), self.sampler.dim()));
        }
        if self.horizon() == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

fn default_k() -> usize {
    10
}
fn default_sigma() -> f64 {
    1.0
}
fn default_dataset_sigma() -> f64 {
    0.15f64.sqrt()
}
fn default_dim() -> usize {
    50
}
fn default_flip_fraction() -> f64 {
    0.6
}
fn default_flip_time() -> u64 {
    4000
}
fn default_highdim_horizon() -> u64 {
    8000
}
fn default_pool_size() -> usize {
    10_000
}
fn default_margin() -> f64 {
    0.1
}

/// Serializable description of a scenario; [`ScenarioSpec::build`] turns it
/// into a [`Scenario`] using a seeded stream for any random construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Abrupt {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    SlowlyVarying {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// Synthetic sign-flip problem with two context pools.
    Highdim {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_flip_fraction")]
        flip_fraction: f64,
        #[serde(default = "default_flip_time")]
        flip_time: u64,
        #[serde(default = "default_highdim_horizon")]
        horizon: u64,
        #[serde(default = "default_pool_size")]
        pool_size: usize,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_dataset_sigma")]
        sigma: f64,
    },
    /// Sign-flip problem on CSV context pools, with `θ*` fitted by ridge
    /// regression on the pooled rows.
    ContextPools {
        /// Single file split by label, or
        path: Option<PathBuf>,
        /// one file per class.
        positive: Option<PathBuf>,
        negative: Option<PathBuf>,
        #[serde(default)]
        ridge: f64,
        #[serde(default = "default_flip_fraction")]
        flip_fraction: f64,
        #[serde(default = "default_flip_time")]
        flip_time: u64,
        #[serde(default = "default_highdim_horizon")]
        horizon: u64,
        #[serde(default = "default_dataset_sigma")]
        sigma: f64,
    },
}

impl ScenarioSpec {
    /// Short names accepted on the command line.
    pub const BUILTIN: [&'static str; 3] = ["abrupt", "slowly_varying", "highdim"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "abrupt" => Ok(ScenarioSpec::Abrupt {
                k: default_k(),
                sigma: default_sigma(),
            }),
            "slowly_varying" | "slow" => Ok(ScenarioSpec::SlowlyVarying {
                k: default_k(),
                sigma: default_sigma(),
            }),
            "highdim" | "highdim_flip" => Ok(ScenarioSpec::Highdim {
                dim: default_dim(),
                flip_fraction: default_flip_fraction(),
                flip_time: default_flip_time(),
                horizon: default_highdim_horizon(),
                pool_size: default_pool_size(),
                margin: default_margin(),
                sigma: default_dataset_sigma(),
            }),
            other => Err(Error::InvalidConfig(format!(
                "unknown scenario `{other}` (expected one of {})",
                Self::BUILTIN.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::Abrupt { .. } => "abrupt",
            ScenarioSpec::SlowlyVarying { .. } => "slowly_varying",
            ScenarioSpec::Highdim { .. } => "highdim",
            ScenarioSpec::ContextPools { .. } => "context_pools",
        }
    }

    /// One-line human description.
    pub fn describe(&self) -> String {
        match self {
            ScenarioSpec::Abrupt { k, sigma } => format!(
                "d=2, T=6000, θ* jumps at 1000/2000/3000 on the unit circle; {k} unit-sphere arms, σ={sigma}"
            ),
            ScenarioSpec::SlowlyVarying { k, sigma } => format!(
                "d=2, T=6000, θ* rotates (1,0)→(0,1) over 3000 rounds then holds; {k} unit-sphere arms, σ={sigma}"
            ),
            ScenarioSpec::Highdim {
                dim,
                flip_fraction,
                flip_time,
                horizon,
                pool_size,
                sigma,
                ..
            } => format!(
                "d={dim}, T={horizon}, {:.0}% of θ* negated at {flip_time}; two synthetic pools of {pool_size}, σ={sigma:.4}",
                flip_fraction * 100.0
            ),
            ScenarioSpec::ContextPools { horizon, .. } => {
                format!("CSV context pools, ridge-fitted θ*, T={horizon}")
            }
        }
    }

    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Scenario> {
        let sc = match self {
            ScenarioSpec::Abrupt { k, sigma } => Scenario {
                name: self.name().into(),
                trajectory: abrupt_scenario(),
                sampler: ActionSetSampler::UnitSphere { dim: 2, k: *k },
                noise: NoiseModel::gaussian(*sigma)?,
                param_bound: 1.0,
            },
            ScenarioSpec::SlowlyVarying { k, sigma } => Scenario {
                name: self.name().into(),
                trajectory: slowly_varying_scenario(),
                sampler: ActionSetSampler::UnitSphere { dim: 2, k: *k },
                noise: NoiseModel::gaussian(*sigma)?,
                param_bound: 1.0,
            },
            ScenarioSpec::Highdim {
                dim,
                flip_fraction,
                flip_time,
                horizon,
                pool_size,
                margin,
                sigma,
            } => {
                if *dim == 0 {
                    return Err(Error::InvalidConfig("dimension must be at least 1".into()));
                }
                let theta = super::unit_sphere_point(*dim, rng);
                let sampler = synthetic_two_pools(&theta, *pool_size, *margin, rng)?;
                let trajectory =
                    highdim_flip_scenario(&theta, *flip_fraction, *flip_time, *horizon, rng)?;
                Scenario {
                    name: self.name().into(),
                    trajectory,
                    sampler,
                    noise: NoiseModel::gaussian(*sigma)?,
                    param_bound: 1.0,
                }
            }
            ScenarioSpec::ContextPools {
                path,
                positive,
                negative,
                ridge,
                flip_fraction,
                flip_time,
                horizon,
                sigma,
            } => {
                let pools = match (path, positive, negative) {
                    (Some(p), None, None) => load_context_pools(p)?,
                    (None, Some(p), Some(n)) => load_context_pool_files(p, n)?,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "context pools need either `path` or both `positive` and `negative`"
                                .into(),
                        ))
                    }
                };
                let (features, labels) = pools.labelled_rows();
                let theta = fit_theta_star(&features, &labels, *ridge)?;
                let trajectory =
                    highdim_flip_scenario(&theta, *flip_fraction, *flip_time, *horizon, rng)?;
                Scenario {
                    name: self.name().into(),
                    param_bound: norm(&theta),
                    trajectory,
                    sampler: pools.into_sampler(),
                    noise: NoiseModel::gaussian(*sigma)?,
                }
            }
        };
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn abrupt_values() {
        let tr = abrupt_scenario();
        assert_eq!(tr.dim, 2);
        assert_eq!(tr.horizon, 6000);
        assert_eq!(tr.breakpoints, vec![1000, 2000, 3000]);
        assert_eq!(tr.theta(500), vec![1.0, 0.0]);
        assert_eq!(tr.theta(999), vec![1.0, 0.0]);
        assert_eq!(tr.theta(1000), vec![-1.0, 0.0]);
        assert_eq!(tr.theta(2500), vec![0.0, 1.0]);
        assert_eq!(tr.theta(6000), vec![0.0, -1.0]);
        assert_relative_eq!(variation_budget(&tr), 4.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn slowly_varying_values() {
        let tr = slowly_varying_scenario();
        assert_eq!(tr.theta(1), vec![1.0, 0.0]);
        let end = tr.theta(3000);
        assert_relative_eq!(end[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(end[1], 1.0, epsilon = 1e-15);
        assert_eq!(tr.theta(4500), end);
        let b = variation_budget(&tr);
        // Sum of 2999 chords subtending π/2 in total.
        let chord = 2.0 * (FRAC_PI_2 / 2999.0 / 2.0).sin();
        assert_relative_eq!(b, 2999.0 * chord, max_relative = 1e-10);
        assert!((b - 1.57).abs() < 0.005, "{b}");
    }

    #[test]
    fn builtin_trajectories_bounded() {
        for tr in [abrupt_scenario(), slowly_varying_scenario()] {
            assert!(tr.max_norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn flip_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let tr = highdim_flip_scenario(&theta, 0.6, 4000, 8000, &mut rng).unwrap();
        assert_eq!(tr.breakpoints, vec![4000]);
        let after = tr.theta(4000);
        let flipped = after.iter().zip(&theta).filter(|(a, b)| a != b).count();
        assert_eq!(flipped, 30);
        assert!(after.iter().zip(&theta).all(|(a, b)| a.abs() == b.abs()));
        assert_eq!(tr.theta(3999), theta);

        let none = highdim_flip_scenario(&theta, 0.0, 4000, 8000, &mut rng).unwrap();
        assert_eq!(variation_budget(&none), 0.0);
        assert!(none.breakpoints.is_empty());

        let all = highdim_flip_scenario(&theta, 1.0, 4000, 8000, &mut rng).unwrap();
        assert_eq!(all.theta(5000), theta.iter().map(|x| -x).collect::<Vec<_>>());
        assert_relative_eq!(variation_budget(&all), 2.0 * norm(&theta), max_relative = 1e-12);

        assert!(highdim_flip_scenario(&theta, 1.5, 4000, 8000, &mut rng).is_err());
    }

    #[test]
    fn flip_set_is_seeded() {
        let theta = vec![1.0; 20];
        let build = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            highdim_flip_scenario(&theta, 0.5, 10, 20, &mut rng).unwrap()
        };
        assert_eq!(build(3), build(3));
    }

    #[test]
    fn synthetic_pools_separate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = crate::environments::unit_sphere_point(50, &mut rng);
        let s = synthetic_two_pools(&theta, 200, 1.0, &mut rng).unwrap();
        let ActionSetSampler::TwoPool { positive, negative } = &s else {
            panic!("expected two pools")
        };
        let mean = |p: &[Vec<f64>]| p.iter().map(|x| dot(x, &theta)).sum::<f64>() / p.len() as f64;
        assert!(mean(positive) > 0.5);
        assert!(mean(negative) < -0.5);
        assert!((s.norm_bound() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn specs_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for name in ScenarioSpec::BUILTIN {
            let spec = ScenarioSpec::from_name(name).unwrap();
            let sc = spec.build(&mut rng).unwrap();
            assert_eq!(sc.name, name);
            assert!(sc.trajectory.max_norm() <= sc.param_bound + 1e-12);
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), spec);
        }
        assert!(ScenarioSpec::from_name("nope").is_err());
        let parsed: ScenarioSpec = serde_json::from_str(r#"{"name":"abrupt"}"#).unwrap();
        assert_eq!(parsed, ScenarioSpec::from_name("abrupt").unwrap());
    }
}
