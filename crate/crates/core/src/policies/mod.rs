//! Arm-selection strategies.
//!
//! All optimistic policies share one shape: an [`Estimator`] holding the
//! regression state and a radius rule giving `β` as a function of the number
//! of absorbed updates. The score of an action is
//! `⟨a, θ̂⟩ + β·width(a)` and the highest score wins, ties going to the lowest
//! index.

mod radius;
mod tuning;

use serde::{Deserialize, Serialize};

pub use radius::{beta_dlinucb, beta_linucb, beta_swlinucb, squared_weight_mass, weight_mass};
pub use tuning::{
    tune_gamma, tune_gamma_unclamped, tune_window, tune_window_unknown, GAMMA_MAX, GAMMA_MIN,
};

use crate::error::{Error, Result};
use crate::estimator::{DiscountedState, Estimator, RidgeState, SlidingWindowState};
use crate::linalg::{check_len, dot, norm};
use crate::scalar::Real;

/// Which log-confidence term the sliding-window radius uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwRadius {
    /// `ln(T/δ)`: union bound over the horizon.
    #[default]
    Corrected,
    /// `ln(1/δ)`.
    Legacy,
}

impl std::str::FromStr for SwRadius {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(SwRadius::Corrected),
            "legacy" => Ok(SwRadius::Legacy),
            other => Err(Error::InvalidConfig(format!(
                "unknown sliding-window radius '{other}' (expected corrected or legacy)"
            ))),
        }
    }
}

/// Every constant entering a confidence radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig<T> {
    pub delta: T,
    pub sigma: T,
    pub dim: usize,
    pub lambda: T,
    /// Bound `L` on action norms.
    pub action_bound: T,
    /// Bound `S` on parameter norms.
    pub param_bound: T,
    pub gamma: Option<T>,
    pub window: Option<usize>,
    pub horizon: Option<u64>,
    #[serde(default)]
    pub sw_radius: SwRadius,
}

impl<T: Real> PolicyConfig<T> {
    /// Defaults `δ = 0.05`, `σ = 1`, `λ = 1`, `L = S = 1`, no discount or
    /// window.
    pub fn new(dim: usize) -> Self {
        Self {
            delta: T::lit(0.05),
            sigma: T::one(),
            dim,
            lambda: T::one(),
            action_bound: T::one(),
            param_bound: T::one(),
            gamma: None,
            window: None,
            horizon: None,
            sw_radius: SwRadius::Corrected,
        }
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_window(mut self, window: usize, horizon: u64) -> Self {
        self.window = Some(window);
        self.horizon = Some(horizon);
        self
    }

    /// Checks the shared constants.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.dim == 0 {
            return bad("dimension must be positive");
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.sigma >= T::zero()) {
            return bad("sigma must be nonnegative");
        }
        if !(self.lambda > T::zero()) {
            return bad("lambda must be positive");
        }
        if !(self.action_bound > T::zero() && self.param_bound > T::zero()) {
            return bad("action and parameter bounds must be positive");
        }
        if let Some(g) = self.gamma {
            if !(g > T::zero() && g <= T::one()) {
                return bad("gamma must lie in (0, 1]");
            }
        }
        if self.window == Some(0) {
            return bad("window length must be positive");
        }
        Ok(())
    }

    /// Validation for an adaptive policy: exactly one of `gamma`/`window`.
    pub fn validate_adaptive(&self) -> Result<()> {
        self.validate()?;
        match (self.gamma, self.window) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(Error::InvalidConfig(
                "exactly one of gamma or window must be set".into(),
            )),
        }
    }
}

/// Outcome of one selection, with every intermediate quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmDecision<T> {
    pub chosen_index: usize,
    pub ucb_values: Vec<T>,
    pub beta: T,
    pub exploration_bonus: Vec<T>,
}

/// Scores every action as `⟨a, θ̂⟩ + β·width(a)` and picks the maximum,
/// lowest index first on ties.
pub fn select_action<T: Real, E: Estimator<T> + ?Sized>(
    state: &E,
    actions: &[Vec<T>],
    beta: T,
) -> Result<ArmDecision<T>> {
    if actions.is_empty() {
        return Err(Error::EmptyActionSet);
    }
    for a in actions {
        check_len(state.dim(), a)?;
    }
    let widths = state.widths(actions)?;
    let theta = state.theta_hat();
    let exploration_bonus: Vec<T> = widths.iter().map(|&w| beta * w).collect();
    let ucb_values: Vec<T> = actions
        .iter()
        .zip(&exploration_bonus)
        .map(|(a, &bonus)| dot(a, theta) + bonus)
        .collect();
    Ok(ArmDecision {
        chosen_index: argmax(&ucb_values),
        ucb_values,
        beta,
        exploration_bonus,
    })
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A sequential decision maker facing a fresh action set every round.
pub trait Policy<T: Real>: Send {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Chooses among `actions` at 1-based `round`.
    fn decide(&mut self, round: u64, actions: &[Vec<T>]) -> Result<ArmDecision<T>>;

    /// Feeds back the reward of the action played this round.
    fn observe(&mut self, action: &[T], reward: T) -> Result<()>;

    fn theta_hat(&self) -> &[T];

    /// Returns to the initial state.
    fn reset(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RadiusRule {
    Discounted,
    SlidingWindow,
    Stationary,
}

/// Optimistic linear policy over a generic estimator.
#[derive(Debug, Clone)]
pub struct Ucb<T, E> {
    name: String,
    cfg: PolicyConfig<T>,
    rule: RadiusRule,
    state: E,
    warned_norm: bool,
}

/// Discounted LinUCB.
pub type DLinUcb<T> = Ucb<T, DiscountedState<T>>;
/// Sliding-window LinUCB.
pub type SwLinUcb<T> = Ucb<T, SlidingWindowState<T>>;
/// Stationary LinUCB (ridge regression, no forgetting).
pub type LinUcb<T> = Ucb<T, RidgeState<T>>;

impl<T: Real> Ucb<T, DiscountedState<T>> {
    pub fn new(cfg: PolicyConfig<T>) -> Result<Self> {
        cfg.validate_adaptive()?;
        let gamma = cfg
            .gamma
            .ok_or_else(|| Error::InvalidConfig("D-LinUCB needs a discount factor".into()))?;
        Ok(Self {
            name: "dlinucb".into(),
            state: DiscountedState::new(cfg.dim, gamma, cfg.lambda)?,
            rule: RadiusRule::Discounted,
            cfg,
            warned_norm: false,
        })
    }
}

impl<T: Real> Ucb<T, SlidingWindowState<T>> {
    pub fn new(cfg: PolicyConfig<T>) -> Result<Self> {
        cfg.validate_adaptive()?;
        let window = cfg
            .window
            .ok_or_else(|| Error::InvalidConfig("SW-LinUCB needs a window length".into()))?;
        if cfg.horizon.is_none() {
            return Err(Error::InvalidConfig("SW-LinUCB needs the horizon T".into()));
        }
        Ok(Self {
            name: "swlinucb".into(),
            state: SlidingWindowState::new(cfg.dim, window, cfg.lambda)?,
            rule: RadiusRule::SlidingWindow,
            cfg,
            warned_norm: false,
        })
    }
}

impl<T: Real> Ucb<T, RidgeState<T>> {
    pub fn new(cfg: PolicyConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            name: "linucb".into(),
            state: RidgeState::new(cfg.dim, cfg.lambda)?,
            rule: RadiusRule::Stationary,
            cfg,
            warned_norm: false,
        })
    }
}

impl<T: Real, E: Estimator<T>> Ucb<T, E> {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn config(&self) -> &PolicyConfig<T> {
        &self.cfg
    }

    pub fn state(&self) -> &E {
        &self.state
    }

    /// Radius for the next decision, i.e. `β_{t−1}` at round `t`.
    pub fn beta(&self) -> Result<T> {
        let t = self.state.steps();
        match self.rule {
            RadiusRule::Discounted => beta_dlinucb(t, &self.cfg),
            RadiusRule::SlidingWindow => beta_swlinucb(t, &self.cfg),
            RadiusRule::Stationary => Ok(beta_linucb(t, &self.cfg)),
        }
    }
}

impl<T: Real, E: Estimator<T> + Send> Policy<T> for Ucb<T, E> {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn decide(&mut self, _round: u64, actions: &[Vec<T>]) -> Result<ArmDecision<T>> {
        select_action(&self.state, actions, self.beta()?)
    }

    fn observe(&mut self, action: &[T], reward: T) -> Result<()> {
        if !self.warned_norm && norm(action) > self.cfg.action_bound * T::lit(1.0 + 1e-12) {
            log::warn!(
                "{}: action norm {} exceeds the bound L = {}; radius guarantees no longer apply",
                self.name,
                norm(action),
                self.cfg.action_bound
            );
            self.warned_norm = true;
        }
        self.state.observe(action, reward)
    }

    fn theta_hat(&self) -> &[T] {
        self.state.theta_hat()
    }

    fn reset(&mut self) {
        self.state.reset();
    }
}

/// Restarts a fresh inner policy at each known change-point (LinUCB-OR when
/// wrapping LinUCB).
///
/// A breakpoint `b` means the environment changes at round `b`; the inner
/// policy is reset just before deciding at round `b`.
pub struct OracleRestart<T> {
    name: String,
    inner: Box<dyn Policy<T>>,
    breakpoints: Vec<u64>,
    next: usize,
}

impl<T: Real> OracleRestart<T> {
    pub fn new(inner: Box<dyn Policy<T>>, breakpoints: Vec<u64>) -> Result<Self> {
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "restart breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            name: format!("{}-or", inner.name()),
            inner,
            breakpoints,
            next: 0,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn breakpoints(&self) -> &[u64] {
        &self.breakpoints
    }
}

impl<T: Real> Policy<T> for OracleRestart<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn decide(&mut self, round: u64, actions: &[Vec<T>]) -> Result<ArmDecision<T>> {
        let mut restart = false;
        while self.next < self.breakpoints.len() && self.breakpoints[self.next] <= round {
            restart = true;
            self.next += 1;
        }
        if restart {
            self.inner.reset();
        }
        self.inner.decide(round, actions)
    }

    fn observe(&mut self, action: &[T], reward: T) -> Result<()> {
        self.inner.observe(action, reward)
    }

    fn theta_hat(&self) -> &[T] {
        self.inner.theta_hat()
    }

    fn reset(&mut self) {
        self.inner.reset();
        self.next = 0;
    }
}

/// Convenience wrapper: LinUCB restarted at the given change-points.
pub fn oracle_restart_wrap<T: Real>(
    inner: Box<dyn Policy<T>>,
    breakpoints: &[u64],
) -> Result<OracleRestart<T>> {
    OracleRestart::new(inner, breakpoints.to_vec())
}
