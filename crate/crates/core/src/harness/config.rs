use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environments::Scenario;
use crate::environments::ScenarioSpec;
use crate::error::{Error, Result};
use crate::policies::{
    tune_gamma, tune_window, DLinUcb, LinUcb, OracleRestart, Policy, PolicyConfig, SwLinUcb,
    SwRadius,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "dlinucb", alias = "d-linucb")]
    DLinUcb,
    #[serde(rename = "linucb")]
    LinUcb,
    #[serde(rename = "swlinucb", alias = "sw-linucb")]
    SwLinUcb,
    #[serde(rename = "linucb-or", alias = "linucb_or")]
    LinUcbOr,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::DLinUcb => "dlinucb",
            PolicyKind::LinUcb => "linucb",
            PolicyKind::SwLinUcb => "swlinucb",
            PolicyKind::LinUcbOr => "linucb-or",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dlinucb" | "d-linucb" => Ok(PolicyKind::DLinUcb),
            "linucb" => Ok(PolicyKind::LinUcb),
            "swlinucb" | "sw-linucb" => Ok(PolicyKind::SwLinUcb),
            "linucb-or" | "linucb_or" => Ok(PolicyKind::LinUcbOr),
            other => Err(Error::InvalidConfig(format!(
                "unknown policy `{other}` (expected dlinucb, linucb, swlinucb or linucb-or)"
            ))),
        }
    }
}

/// One policy entry of an experiment. Unset constants are filled from the
/// scenario (`σ`, `L`, `S`, `d`) or tuned from its variation budget (`γ`, `l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyEntry")]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sw_radius: Option<SwRadius>,
    /// Restart rounds for `linucb-or`; defaults to the scenario's breakpoints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<u64>>,
}

#[derive(Deserialize)]
struct FullEntry {
    kind: PolicyKind,
    name: Option<String>,
    gamma: Option<f64>,
    window: Option<usize>,
    lambda: Option<f64>,
    delta: Option<f64>,
    sigma: Option<f64>,
    action_bound: Option<f64>,
    param_bound: Option<f64>,
    sw_radius: Option<SwRadius>,
    breakpoints: Option<Vec<u64>>,
}

/// Either a bare kind (`"dlinucb"`) or a full object.
#[derive(Deserialize)]
#[serde(untagged)]
enum PolicyEntry {
    Name(String),
    Full(FullEntry),
}

impl TryFrom<PolicyEntry> for PolicySpec {
    type Error = Error;

    fn try_from(e: PolicyEntry) -> Result<Self> {
        Ok(match e {
            PolicyEntry::Name(s) => PolicySpec::new(s.parse()?),
            PolicyEntry::Full(f) => PolicySpec {
                kind: f.kind,
                name: f.name,
                gamma: f.gamma,
                window: f.window,
                lambda: f.lambda,
                delta: f.delta,
                sigma: f.sigma,
                action_bound: f.action_bound,
                param_bound: f.param_bound,
                sw_radius: f.sw_radius,
                breakpoints: f.breakpoints,
            },
        })
    }
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            name: None,
            gamma: None,
            window: None,
            lambda: None,
            delta: None,
            sigma: None,
            action_bound: None,
            param_bound: None,
            sw_radius: None,
            breakpoints: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Parses a comma separated list such as `dlinucb,linucb`.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse().map(PolicySpec::new))
            .collect()
    }

    /// Fills every constant from `scenario` and validates the result.
    pub fn resolve(&self, scenario: &Scenario) -> Result<ResolvedPolicy> {
        let d = scenario.dim();
        let horizon = scenario.horizon();
        let budget = scenario.variation_budget();
        let mut cfg = PolicyConfig::<f64>::new(d);
        cfg.sigma = self.sigma.unwrap_or(scenario.noise.sigma);
        cfg.action_bound = self.action_bound.unwrap_or_else(|| scenario.action_bound());
        cfg.param_bound = self.param_bound.unwrap_or(scenario.param_bound);
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(dl) = self.delta {
            cfg.delta = dl;
        }
        cfg.sw_radius = self.sw_radius.unwrap_or_default();
        let mut breakpoints = Vec::new();
        match self.kind {
            PolicyKind::DLinUcb => {
                cfg.gamma = Some(self.gamma.unwrap_or_else(|| tune_gamma(budget, d, horizon)));
            }
            PolicyKind::SwLinUcb => {
                cfg.window = Some(self.window.unwrap_or_else(|| tune_window(budget, d, horizon)));
                cfg.horizon = Some(horizon);
            }
            PolicyKind::LinUcb => {}
            PolicyKind::LinUcbOr => {
                breakpoints = self
                    .breakpoints
                    .clone()
                    .unwrap_or_else(|| scenario.trajectory.breakpoints.clone());
            }
        }
        let resolved = ResolvedPolicy {
            name: self.name.clone().unwrap_or_else(|| self.kind.as_str().into()),
            kind: self.kind,
            config: cfg,
            breakpoints,
        };
        // Surface configuration problems before any episode runs.
        resolved.build()?;
        Ok(resolved)
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(PolicySpec::new)
    }
}

/// A policy entry with every constant fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPolicy {
    pub name: String,
    pub kind: PolicyKind,
    pub config: PolicyConfig<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub breakpoints: Vec<u64>,
}

impl ResolvedPolicy {
    /// Fresh policy instance.
    pub fn build(&self) -> Result<Box<dyn Policy<f64>>> {
        let cfg = self.config.clone();
        Ok(match self.kind {
            PolicyKind::DLinUcb => Box::new(DLinUcb::new(cfg)?.with_name(&self.name)),
            PolicyKind::SwLinUcb => Box::new(SwLinUcb::new(cfg)?.with_name(&self.name)),
            PolicyKind::LinUcb => Box::new(LinUcb::new(cfg)?.with_name(&self.name)),
            PolicyKind::LinUcbOr => {
                let inner = Box::new(LinUcb::new(cfg)?);
                Box::new(OracleRestart::new(inner, self.breakpoints.clone())?.with_name(&self.name))
            }
        })
    }
}

fn default_replications() -> usize {
    20
}

fn default_stride() -> u64 {
    100
}

/// Run options that do not change the scenario or the policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Options {
    #[serde(default)]
    pub emit_theta_trace: bool,
    /// Round stride of the `θ̂` snapshots.
    #[serde(default = "default_stride")]
    pub theta_stride: u64,
    /// Worker thread cap; `None` defers to the environment, then to rayon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            emit_theta_trace: false,
            theta_stride: default_stride(),
            threads: None,
        }
    }
}

/// Full description of an experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the scenario's own horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: Options,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec, policies: Vec<PolicySpec>) -> Self {
        Self {
            scenario,
            policies,
            replications: default_replications(),
            seed: 0,
            horizon: None,
            output: None,
            options: Options::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            row: e.line(),
            message: e.to_string(),
        })
    }

    /// Checks that do not need the scenario to be built.
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("policy list is empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.options.theta_stride == 0 {
            return Err(Error::InvalidConfig("theta stride must be at least 1".into()));
        }
        if self.options.threads == Some(0) {
            return Err(Error::InvalidConfig("thread count must be at least 1".into()));
        }
        let mut names: Vec<String> = self
            .policies
            .iter()
            .map(|p| p.name.clone().unwrap_or_else(|| p.kind.as_str().into()))
            .collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "policy name `{}` appears twice; give entries distinct names",
                w[0]
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_schema() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "scenario": {"name": "abrupt", "k": 5},
                "policies": ["dlinucb", {"kind": "swlinucb", "window": 50, "sw_radius": "legacy"}],
                "replications": 3,
                "seed": 9,
                "horizon": 100,
                "output": "out",
                "options": {"emit_theta_trace": true}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.policies[0], PolicySpec::new(PolicyKind::DLinUcb));
        assert_eq!(cfg.policies[1].window, Some(50));
        assert_eq!(cfg.policies[1].sw_radius, Some(SwRadius::Legacy));
        assert_eq!(cfg.options.theta_stride, 100);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"scenario": {"name": "abrupt"}, "policies": ["ucb9"]}"#).is_err());
        let mut cfg = ExperimentConfig::new(ScenarioSpec::from_name("abrupt").unwrap(), vec![]);
        assert!(cfg.validate().is_err());
        cfg.policies = PolicySpec::parse_list("linucb,linucb").unwrap();
        assert!(cfg.validate().is_err());
        cfg.policies = PolicySpec::parse_list("linucb").unwrap();
        cfg.replications = 0;
        assert!(cfg.validate().unwrap_err().is_config_error());
    }

    #[test]
    fn resolution_tunes_from_budget() {
        use rand::SeedableRng;
        let sc = ScenarioSpec::from_name("abrupt")
            .unwrap()
            .build(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let d = PolicySpec::new(PolicyKind::DLinUcb).resolve(&sc).unwrap();
        let g = d.config.gamma.unwrap();
        assert!((g - tune_gamma(4.0 + 2f64.sqrt(), 2, 6000)).abs() < 1e-12);
        let sw = PolicySpec::new(PolicyKind::SwLinUcb).resolve(&sc).unwrap();
        assert_eq!(sw.config.window, Some(tune_window(4.0 + 2f64.sqrt(), 2, 6000)));
        assert_eq!(sw.config.horizon, Some(6000));
        let or = PolicySpec::new(PolicyKind::LinUcbOr).resolve(&sc).unwrap();
        assert_eq!(or.breakpoints, vec![1000, 2000, 3000]);
        assert_eq!(or.build().unwrap().name(), "linucb-or");
        assert!(PolicySpec::new(PolicyKind::DLinUcb).with_gamma(1.5).resolve(&sc).is_err());
    }
}
