use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::{sample_round, ActionSetSampler, NoiseModel, ThetaTrajectory};
use crate::error::{Error, Result};
use crate::linalg::{
    default_psd_tol, dot, log_det, min_eigenvalue, norm, quad_form_inv, sub_vec, Cholesky,
    SpdMatrix,
};
use crate::policies::{weight_mass, DLinUcb, Policy, PolicyConfig, SwLinUcb};

/// A D-LinUCB episode with its full matrix history.
///
/// `v[t]` and `v_tilde[t]` hold the normalized `V_t`, `Ṽ_t` after `t`
/// updates (so index 0 is `λI`); `actions[t−1]` and `thetas[t−1]` are `A_t`
/// and `θ*_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedTrace {
    pub dim: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub action_bound: f64,
    pub param_bound: f64,
    pub v: Vec<SpdMatrix<f64>>,
    pub v_tilde: Vec<SpdMatrix<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub thetas: Vec<Vec<f64>>,
}

impl DiscountedTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Plays D-LinUCB on `traj` for its horizon and records every matrix.
pub fn record_dlinucb_episode<R: Rng + ?Sized>(
    traj: &ThetaTrajectory,
    sampler: &ActionSetSampler,
    noise: &NoiseModel,
    cfg: PolicyConfig<f64>,
    rng: &mut R,
) -> Result<DiscountedTrace> {
    let mut policy = DLinUcb::new(cfg.clone())?;
    let gamma = cfg.gamma.unwrap_or(1.0);
    let s = policy.state();
    let mut trace = DiscountedTrace {
        dim: cfg.dim,
        gamma,
        lambda: cfg.lambda,
        action_bound: cfg.action_bound,
        param_bound: cfg.param_bound,
        v: vec![s.v().clone()],
        v_tilde: vec![s.v_tilde().clone()],
        actions: Vec::new(),
        thetas: Vec::new(),
    };
    for t in 1..=traj.horizon {
        let round = sample_round(traj, sampler, noise, t, rng);
        let i = policy.decide(t, &round.actions)?.chosen_index;
        policy.observe(&round.actions[i], round.reward(i))?;
        trace.v.push(policy.state().v().clone());
        trace.v_tilde.push(policy.state().v_tilde().clone());
        trace.actions.push(round.actions[i].clone());
        trace.thetas.push(round.theta);
    }
    Ok(trace)
}

/// A SW-LinUCB episode: `v[t]` is the windowed design after `t` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTrace {
    pub dim: usize,
    pub window: usize,
    pub lambda: f64,
    pub action_bound: f64,
    pub v: Vec<SpdMatrix<f64>>,
    pub actions: Vec<Vec<f64>>,
}

pub fn record_swlinucb_episode<R: Rng + ?Sized>(
    traj: &ThetaTrajectory,
    sampler: &ActionSetSampler,
    noise: &NoiseModel,
    cfg: PolicyConfig<f64>,
    rng: &mut R,
) -> Result<WindowTrace> {
    let mut policy = SwLinUcb::new(cfg.clone())?;
    let mut trace = WindowTrace {
        dim: cfg.dim,
        window: policy.state().window(),
        lambda: cfg.lambda,
        action_bound: cfg.action_bound,
        v: vec![policy.state().v().clone()],
        actions: Vec::new(),
    };
    for t in 1..=traj.horizon {
        let round = sample_round(traj, sampler, noise, t, rng);
        let i = policy.decide(t, &round.actions)?.chosen_index;
        policy.observe(&round.actions[i], round.reward(i))?;
        trace.v.push(policy.state().v().clone());
        trace.actions.push(round.actions[i].clone());
    }
    Ok(trace)
}

/// First step at which a check broke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub step: usize,
    pub margin: f64,
}

/// Margins of the three deterministic inequalities on one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub steps: usize,
    /// `min_t λ_min(V_t − Ṽ_t)` over all steps.
    pub psd_min_eigenvalue: f64,
    /// Same minimum restricted to `t > d`, where the data span can make
    /// the gap strictly positive (`Ṽ_1 = V_1` always).
    pub psd_margin_after_dim: f64,
    /// `min_t (bound_t − log det V_t)` over `t ≥ 1`.
    pub logdet_margin: f64,
    pub potential: f64,
    pub potential_bound: f64,
    /// The looser closed form `2d(T ln(1/γ) + ln(1 + L²/(dλ(1−γ))))`;
    /// infinite at `γ = 1`.
    pub potential_bound_loose: f64,
    pub violation: Option<Violation>,
}

impl MatrixReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }

    /// All three inequalities hold with room to spare. The PSD gap can
    /// only be strict once the actions span the space, and never at `γ = 1`.
    pub fn strict(&self) -> bool {
        self.passed()
            && (self.steps == 0
                || (self.psd_margin_after_dim > 0.0
                    && self.logdet_margin > 0.0
                    && self.potential < self.potential_bound))
    }
}

/// Checks on every step of a D-LinUCB trace:
/// (i) `Ṽ_t ≼ V_t`;
/// (ii) `log det V_t ≤ d·ln(λ + L²(1−γᵗ)/(d(1−γ)))`;
/// (iii) `Σ_t min(1, ‖A_t‖²_{V_{t−1}⁻¹ Ṽ_{t−1} V_{t−1}⁻¹}) ≤
///        2d(T ln(1/γ) + ln(1 + L²(1−γ^T)/(dλ(1−γ))))`.
///
/// The sums `(1−γᵏ)/(1−γ)` take their limit `k` at `γ = 1`.
pub fn assert_matrix_inequalities(trace: &DiscountedTrace) -> Result<MatrixReport> {
    let d = trace.dim;
    let df = d as f64;
    let (g, lambda, l2) = (trace.gamma, trace.lambda, trace.action_bound.powi(2));
    let n = trace.len();
    if trace.v.len() != n + 1 || trace.v_tilde.len() != n + 1 {
        return Err(Error::dim(n + 1, trace.v.len().min(trace.v_tilde.len())));
    }
    let mut violation: Option<Violation> = None;
    let mut flag = |check: &str, step: usize, margin: f64| {
        if violation.is_none() {
            violation = Some(Violation {
                check: check.into(),
                step,
                margin,
            });
        }
    };

    let mut psd_min = f64::INFINITY;
    let mut psd_after = f64::INFINITY;
    let mut logdet_margin = f64::INFINITY;
    let mut potential = 0.0;
    for t in 0..=n {
        let (v, vt) = (&trace.v[t], &trace.v_tilde[t]);
        let gap = min_eigenvalue(&v.sub(vt)?);
        psd_min = psd_min.min(gap);
        if t > d {
            psd_after = psd_after.min(gap);
        }
        if gap < -default_psd_tol(v) {
            flag("psd", t, gap);
        }
        if t >= 1 {
            let bound = df * (lambda + l2 * weight_mass(g, t as u64) / df).ln();
            let margin = bound - log_det(v)?;
            logdet_margin = logdet_margin.min(margin);
            // Relative tolerance for round-off in the log-determinant.
            if margin < -1e-9 * (1.0 + bound.abs()) {
                flag("logdet", t, margin);
            }
            let a = &trace.actions[t - 1];
            let prev = Cholesky::factor(&trace.v[t - 1])?;
            let z = prev.solve(a)?;
            let w = dot(&z, &trace.v_tilde[t - 1].mul_vec(&z)?);
            potential += w.min(1.0);
        }
    }
    let tf = n as f64;
    let log_inv_gamma = -g.ln();
    let potential_bound = 2.0
        * df
        * (tf * log_inv_gamma + (1.0 + l2 * weight_mass(g, n as u64) / (df * lambda)).ln());
    let potential_bound_loose = if g < 1.0 {
        2.0 * df * (tf * log_inv_gamma + (1.0 + l2 / (df * lambda * (1.0 - g))).ln())
    } else {
        f64::INFINITY
    };
    if n > 0 && potential > potential_bound * (1.0 + 1e-12) {
        flag("potential", n, potential_bound - potential);
    }
    Ok(MatrixReport {
        steps: n,
        psd_min_eigenvalue: psd_min,
        psd_margin_after_dim: psd_after,
        logdet_margin,
        potential,
        potential_bound,
        potential_bound_loose,
        violation,
    })
}

/// Block elliptical potential of a sliding-window trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub steps: usize,
    pub window: usize,
    pub potential: f64,
    pub potential_bound: f64,
    pub violation: Option<Violation>,
}

impl WindowReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// `Σ_t min(1, ‖A_t‖²_{V_{t−1}⁻¹}) ≤ 2d⌈T/l⌉ ln(1 + l L²/(λd))`.
pub fn assert_sw_inequalities(trace: &WindowTrace) -> Result<WindowReport> {
    let n = trace.actions.len();
    if trace.v.len() != n + 1 {
        return Err(Error::dim(n + 1, trace.v.len()));
    }
    let mut potential = 0.0;
    for t in 1..=n {
        potential += quad_form_inv(&trace.v[t - 1], &trace.actions[t - 1])?.min(1.0);
    }
    let df = trace.dim as f64;
    let l = trace.window as f64;
    let blocks = n.div_ceil(trace.window) as f64;
    let bound =
        2.0 * df * blocks * (1.0 + l * trace.action_bound.powi(2) / (trace.lambda * df)).ln();
    let violation = (potential > bound * (1.0 + 1e-12)).then(|| Violation {
        check: "sw_potential".into(),
        step: n,
        margin: bound - potential,
    });
    Ok(WindowReport {
        steps: n,
        window: trace.window,
        potential,
        potential_bound: bound,
        violation,
    })
}

/// Bias `‖θ*_t − θ̄_t‖₂` against its bound at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub step: usize,
    pub bias: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub window: usize,
    pub points: Vec<BiasPoint>,
    pub max_bias: f64,
    /// `min_t (bound_t − bias_t)`.
    pub min_margin: f64,
    pub violation: Option<Violation>,
}

impl BiasReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// `θ̄_t` for `t = 1..=T` from the recorded matrices, computed with the
/// recursion `N_{t+1} = γ N_t + A_t A_tᵀ θ*_t` and
/// `θ̄_t = V_{t−1}⁻¹ (N_t + λ θ*_t)`.
pub fn bar_theta_path(trace: &DiscountedTrace) -> Result<Vec<Vec<f64>>> {
    let d = trace.dim;
    let mut acc = vec![0.0; d];
    let mut out = Vec::with_capacity(trace.len());
    for t in 1..=trace.len() {
        let theta = &trace.thetas[t - 1];
        let rhs: Vec<f64> = acc
            .iter()
            .zip(theta)
            .map(|(n, th)| n + trace.lambda * th)
            .collect();
        out.push(Cholesky::factor(&trace.v[t - 1])?.solve(&rhs)?);
        let a = &trace.actions[t - 1];
        let proj = dot(a, theta);
        for (n, &ai) in acc.iter_mut().zip(a) {
            *n = trace.gamma * *n + proj * ai;
        }
    }
    Ok(out)
}

/// Checks, for every `t > D`,
/// `‖θ*_t − θ̄_t‖₂ ≤ Σ_{p=t−D}^{t−1} ‖θ*_p − θ*_{p+1}‖₂ + (2L²S/λ)·γᴰ/(1−γ)`.
pub fn bias_diagnostic(trace: &DiscountedTrace, window: usize) -> Result<BiasReport> {
    if trace.thetas.len() != trace.len() || (trace.thetas.is_empty() && !trace.is_empty()) {
        return Err(Error::MissingTruth);
    }
    if !(trace.gamma < 1.0) {
        return Err(Error::InvalidConfig(
            "the bias bound needs a discount factor below 1".into(),
        ));
    }
    let bars = bar_theta_path(trace)?;
    let tail = 2.0 * trace.action_bound.powi(2) * trace.param_bound / trace.lambda
        * trace.gamma.powi(window.min(i32::MAX as usize) as i32)
        / (1.0 - trace.gamma);
    // jumps[p] = ‖θ*_p − θ*_{p+1}‖ for 1-based p, stored at p − 1.
    let jumps: Vec<f64> = trace
        .thetas
        .windows(2)
        .map(|w| norm(&sub_vec(&w[0], &w[1])))
        .collect();
    let mut prefix = vec![0.0; jumps.len() + 1];
    for (i, j) in jumps.iter().enumerate() {
        prefix[i + 1] = prefix[i] + j;
    }
    let mut points = Vec::new();
    let mut violation = None;
    let mut max_bias: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for t in (window + 1)..=trace.len() {
        // Σ_{p=t−D}^{t−1} jumps, 1-based p.
        let drift = prefix[t - 1] - prefix[t - 1 - window];
        let bound = drift + tail;
        let bias = norm(&sub_vec(&trace.thetas[t - 1], &bars[t - 1]));
        max_bias = max_bias.max(bias);
        min_margin = min_margin.min(bound - bias);
        if bias > bound * (1.0 + 1e-9) + 1e-12 && violation.is_none() {
            violation = Some(Violation {
                check: "bias".into(),
                step: t,
                margin: bound - bias,
            });
        }
        points.push(BiasPoint {
            step: t,
            bias,
            bound,
        });
    }
    Ok(BiasReport {
        window,
        points,
        max_bias,
        min_margin,
        violation,
    })
}

/// Analysis window `D = ⌈ln T / (1 − γ)⌉`.
pub fn analysis_window(gamma: f64, horizon: u64) -> usize {
    ((horizon.max(2) as f64).ln() / (1.0 - gamma)).ceil() as usize
}
