//! Weighted regularized least-squares state.
//!
//! The discounted estimator is stored in normalized form: at step `t` the
//! observation from step `s` carries weight `γ^{t−s}` and both `V` and `Ṽ`
//! carry the regularizer `λI`. This is the same estimator as the
//! exponentially growing weights `w_s = γ^{−s}`, `λ_t = γ^{−t}λ`,
//! `μ_t = γ^{−2t}λ` after multiplying `V` by `γ^t` and `Ṽ` by `γ^{2t}`; the
//! least-squares solution is unchanged by that rescaling, and so is the
//! confidence matrix `V Ṽ⁻¹ V`. The normalized form never overflows.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, Cholesky, SpdMatrix};
use crate::scalar::Real;

/// Common surface of the recursive estimators used by the UCB policies.
pub trait Estimator<T: Real> {
    fn dim(&self) -> usize;

    /// Number of observations absorbed since the last reset.
    fn steps(&self) -> u64;

    fn theta_hat(&self) -> &[T];

    /// Absorbs one `(action, reward)` observation.
    fn observe(&mut self, action: &[T], reward: T) -> Result<()>;

    /// Width `‖a‖` of each action in the norm that scales the exploration
    /// bonus. One factorization serves the whole action set.
    fn widths(&self, actions: &[Vec<T>]) -> Result<Vec<T>>;

    fn reset(&mut self);
}

/// Discounted state: `V`, `Ṽ`, `b` and `θ̂ = V⁻¹ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedState<T> {
    gamma: T,
    lambda: T,
    t: u64,
    v: SpdMatrix<T>,
    v_tilde: SpdMatrix<T>,
    b: Vec<T>,
    theta_hat: Vec<T>,
}

impl<T: Real> DiscountedState<T> {
    pub fn new(dim: usize, gamma: T, lambda: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if !(gamma > T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidConfig(format!(
                "discount factor must lie in (0, 1], got {gamma}"
            )));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "regularization must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            gamma,
            lambda,
            t: 0,
            v: SpdMatrix::scaled_identity(dim, lambda),
            v_tilde: SpdMatrix::scaled_identity(dim, lambda),
            b: vec![T::zero(); dim],
            theta_hat: vec![T::zero(); dim],
        })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn v(&self) -> &SpdMatrix<T> {
        &self.v
    }

    pub fn v_tilde(&self) -> &SpdMatrix<T> {
        &self.v_tilde
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    /// In-place discounted update:
    /// `V ← γV + aaᵀ + (1−γ)λI`, `Ṽ ← γ²Ṽ + aaᵀ + (1−γ²)λI`,
    /// `b ← γb + x·a`, `θ̂ ← V⁻¹b`.
    pub fn update(&mut self, a: &[T], x: T) -> Result<()> {
        check_len(self.dim(), a)?;
        let g = self.gamma;
        let g2 = g * g;
        self.v
            .decay_add_outer(g, a, (T::one() - g) * self.lambda)?;
        self.v_tilde
            .decay_add_outer(g2, a, (T::one() - g2) * self.lambda)?;
        for (bi, &ai) in self.b.iter_mut().zip(a) {
            *bi = g * *bi + x * ai;
        }
        self.theta_hat = Cholesky::factor(&self.v)?.solve(&self.b)?;
        self.t += 1;
        Ok(())
    }
}

/// Functional form of [`DiscountedState::update`].
pub fn discounted_update<T: Real>(
    state: &DiscountedState<T>,
    a: &[T],
    x: T,
) -> Result<DiscountedState<T>> {
    let mut next = state.clone();
    next.update(a, x)?;
    Ok(next)
}

impl<T: Real> Estimator<T> for DiscountedState<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn theta_hat(&self) -> &[T] {
        &self.theta_hat
    }

    fn observe(&mut self, action: &[T], reward: T) -> Result<()> {
        self.update(action, reward)
    }

    /// `√(aᵀ V⁻¹ Ṽ V⁻¹ a)`; at `γ = 1` (where `Ṽ ≡ V`) this is `√(aᵀV⁻¹a)`.
    fn widths(&self, actions: &[Vec<T>]) -> Result<Vec<T>> {
        let chol = Cholesky::factor(&self.v)?;
        actions
            .iter()
            .map(|a| {
                if self.gamma == T::one() {
                    return Ok(chol.quad_form_inv(a)?.sqrt());
                }
                let z = chol.solve(a)?;
                let vz = self.v_tilde.mul_vec(&z)?;
                let q: T = z.iter().zip(&vz).map(|(&p, &q)| p * q).sum();
                Ok(q.max(T::zero()).sqrt())
            })
            .collect()
    }

    fn reset(&mut self) {
        let d = self.dim();
        self.t = 0;
        self.v = SpdMatrix::scaled_identity(d, self.lambda);
        self.v_tilde = SpdMatrix::scaled_identity(d, self.lambda);
        self.b = vec![T::zero(); d];
        self.theta_hat = vec![T::zero(); d];
    }
}

/// Plain ridge state for stationary LinUCB: `V ← V + aaᵀ`, `b ← b + x·a`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeState<T> {
    lambda: T,
    t: u64,
    v: SpdMatrix<T>,
    b: Vec<T>,
    theta_hat: Vec<T>,
}

impl<T: Real> RidgeState<T> {
    pub fn new(dim: usize, lambda: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if !(lambda > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "regularization must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            t: 0,
            v: SpdMatrix::scaled_identity(dim, lambda),
            b: vec![T::zero(); dim],
            theta_hat: vec![T::zero(); dim],
        })
    }

    pub fn v(&self) -> &SpdMatrix<T> {
        &self.v
    }
}

impl<T: Real> Estimator<T> for RidgeState<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn theta_hat(&self) -> &[T] {
        &self.theta_hat
    }

    fn observe(&mut self, a: &[T], x: T) -> Result<()> {
        check_len(self.dim(), a)?;
        // Same floating point sequence as the discounted update at γ = 1.
        self.v.decay_add_outer(T::one(), a, T::zero())?;
        for (bi, &ai) in self.b.iter_mut().zip(a) {
            *bi = T::one() * *bi + x * ai;
        }
        self.theta_hat = Cholesky::factor(&self.v)?.solve(&self.b)?;
        self.t += 1;
        Ok(())
    }

    fn widths(&self, actions: &[Vec<T>]) -> Result<Vec<T>> {
        let chol = Cholesky::factor(&self.v)?;
        actions
            .iter()
            .map(|a| Ok(chol.quad_form_inv(a)?.sqrt()))
            .collect()
    }

    fn reset(&mut self) {
        let d = self.dim();
        self.t = 0;
        self.v = SpdMatrix::scaled_identity(d, self.lambda);
        self.b = vec![T::zero(); d];
        self.theta_hat = vec![T::zero(); d];
    }
}

/// Sliding-window state over the last `window` observations.
///
/// `V` is maintained by add/subtract and rebuilt from the buffer every
/// `window` steps to bound round-off drift.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindowState<T> {
    window: usize,
    lambda: T,
    t: u64,
    buffer: VecDeque<(Vec<T>, T)>,
    v: SpdMatrix<T>,
    b: Vec<T>,
    theta_hat: Vec<T>,
    since_rebuild: usize,
}

impl<T: Real> SlidingWindowState<T> {
    pub fn new(dim: usize, window: usize, lambda: T) -> Result<Self> {
        if dim == 0 || window == 0 {
            return Err(Error::InvalidConfig(
                "dimension and window length must be positive".into(),
            ));
        }
        if !(lambda > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "regularization must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            window,
            lambda,
            t: 0,
            buffer: VecDeque::with_capacity(window + 1),
            v: SpdMatrix::scaled_identity(dim, lambda),
            b: vec![T::zero(); dim],
            theta_hat: vec![T::zero(); dim],
            since_rebuild: 0,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn v(&self) -> &SpdMatrix<T> {
        &self.v
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn buffer(&self) -> impl ExactSizeIterator<Item = (&[T], T)> {
        self.buffer.iter().map(|(a, x)| (a.as_slice(), *x))
    }

    /// `V` recomputed from scratch over the buffer.
    pub fn rebuilt_v(&self) -> SpdMatrix<T> {
        let mut v = SpdMatrix::scaled_identity(self.dim(), self.lambda);
        for (a, _) in &self.buffer {
            v.add_outer(a, T::one()).expect("buffer entries have state dimension");
        }
        v
    }

    fn rebuild(&mut self) {
        self.v = self.rebuilt_v();
        let mut b = vec![T::zero(); self.dim()];
        for (a, x) in &self.buffer {
            for (bi, &ai) in b.iter_mut().zip(a) {
                *bi = *bi + *x * ai;
            }
        }
        self.b = b;
        self.since_rebuild = 0;
    }

    /// `V ← V + a_t a_tᵀ − a_{t−l} a_{t−l}ᵀ` with the matching `b` update.
    pub fn update(&mut self, a: &[T], x: T) -> Result<()> {
        check_len(self.dim(), a)?;
        self.v.add_outer(a, T::one())?;
        for (bi, &ai) in self.b.iter_mut().zip(a) {
            *bi = *bi + x * ai;
        }
        self.buffer.push_back((a.to_vec(), x));
        if self.buffer.len() > self.window {
            let (old, x_old) = self.buffer.pop_front().expect("buffer is non-empty");
            self.v.add_outer(&old, -T::one())?;
            for (bi, &ai) in self.b.iter_mut().zip(&old) {
                *bi = *bi - x_old * ai;
            }
        }
        self.since_rebuild += 1;
        if self.since_rebuild >= self.window {
            self.rebuild();
        }
        self.theta_hat = Cholesky::factor(&self.v)?.solve(&self.b)?;
        self.t += 1;
        Ok(())
    }
}

/// Functional form of [`SlidingWindowState::update`].
pub fn sw_update<T: Real>(
    state: &SlidingWindowState<T>,
    a: &[T],
    x: T,
) -> Result<SlidingWindowState<T>> {
    let mut next = state.clone();
    next.update(a, x)?;
    Ok(next)
}

impl<T: Real> Estimator<T> for SlidingWindowState<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn steps(&self) -> u64 {
        self.t
    }

    fn theta_hat(&self) -> &[T] {
        &self.theta_hat
    }

    fn observe(&mut self, action: &[T], reward: T) -> Result<()> {
        self.update(action, reward)
    }

    fn widths(&self, actions: &[Vec<T>]) -> Result<Vec<T>> {
        let chol = Cholesky::factor(&self.v)?;
        actions
            .iter()
            .map(|a| Ok(chol.quad_form_inv(a)?.sqrt()))
            .collect()
    }

    fn reset(&mut self) {
        let d = self.dim();
        self.t = 0;
        self.buffer.clear();
        self.v = SpdMatrix::scaled_identity(d, self.lambda);
        self.b = vec![T::zero(); d];
        self.theta_hat = vec![T::zero(); d];
        self.since_rebuild = 0;
    }
}

/// Recorded actions, rewards and (optionally) the true parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryLog<T> {
    pub actions: Vec<Vec<T>>,
    pub rewards: Vec<T>,
    pub thetas: Option<Vec<Vec<T>>>,
}

impl<T: Real> HistoryLog<T> {
    pub fn new() -> Self {
        Self {
            actions: Vec::new(),
            rewards: Vec::new(),
            thetas: None,
        }
    }

    pub fn with_truth() -> Self {
        Self {
            thetas: Some(Vec::new()),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, action: Vec<T>, reward: T) {
        self.actions.push(action);
        self.rewards.push(reward);
    }

    pub fn push_with_truth(&mut self, action: Vec<T>, reward: T, theta: Vec<T>) {
        self.push(action, reward);
        self.thetas.get_or_insert_with(Vec::new).push(theta);
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.rewards.len() != self.actions.len() {
            return Err(Error::dim(self.actions.len(), self.rewards.len()));
        }
        if let Some(th) = &self.thetas {
            if th.len() != self.actions.len() {
                return Err(Error::dim(self.actions.len(), th.len()));
            }
        }
        for a in &self.actions {
            check_len(dim, a)?;
        }
        Ok(())
    }
}

/// `Σ w_s a_s a_sᵀ + λ_t I`.
pub fn weighted_design<T: Real>(
    history: &HistoryLog<T>,
    dim: usize,
    weights: &[T],
    lambda_t: T,
) -> Result<SpdMatrix<T>> {
    history.check(dim)?;
    if weights.len() != history.len() {
        return Err(Error::dim(history.len(), weights.len()));
    }
    SpdMatrix::gram(
        dim,
        history.actions.iter().map(Vec::as_slice).zip(weights.iter().copied()),
        lambda_t,
    )
}

/// `Σ w_s² a_s a_sᵀ + μ_t I`.
pub fn weighted_variance<T: Real>(
    history: &HistoryLog<T>,
    dim: usize,
    weights: &[T],
    mu_t: T,
) -> Result<SpdMatrix<T>> {
    let squared: Vec<T> = weights.iter().map(|&w| w * w).collect();
    weighted_design(history, dim, &squared, mu_t)
}

/// Batch regularized weighted least squares:
/// `θ̂ = (Σ w_s a_s a_sᵀ + λ_t I)⁻¹ Σ w_s a_s x_s`.
pub fn batch_wls<T: Real>(
    history: &HistoryLog<T>,
    dim: usize,
    weights: &[T],
    lambda_t: T,
) -> Result<Vec<T>> {
    let v = weighted_design(history, dim, weights, lambda_t)?;
    let mut rhs = vec![T::zero(); dim];
    for ((a, &x), &w) in history.actions.iter().zip(&history.rewards).zip(weights) {
        for (r, &ai) in rhs.iter_mut().zip(a) {
            *r = *r + w * x * ai;
        }
    }
    Cholesky::factor(&v)?.solve(&rhs)
}

/// Confidence matrix `V Ṽ⁻¹ V` for arbitrary weights and regularizers.
pub fn confidence_matrix<T: Real>(
    history: &HistoryLog<T>,
    dim: usize,
    weights: &[T],
    lambda_t: T,
    mu_t: T,
) -> Result<SpdMatrix<T>> {
    let v = weighted_design(history, dim, weights, lambda_t)?;
    let vt = Cholesky::factor(&weighted_variance(history, dim, weights, mu_t)?)?;
    // Column j of Ṽ⁻¹V, then V·(Ṽ⁻¹V).
    let cols: Vec<Vec<T>> = (0..dim)
        .map(|j| vt.solve(v.row(j)))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<T>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| crate::linalg::dot(v.row(i), &cols[j]))
                .collect()
        })
        .collect();
    // Symmetrize away round-off before validation.
    let sym: Vec<Vec<T>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| (rows[i][j] + rows[j][i]) * T::lit(0.5))
                .collect()
        })
        .collect();
    SpdMatrix::from_rows(&sym)
}

/// Geometric weights `γ^{t−s}` for `s = 1..=t`.
pub fn discount_weights<T: Real>(gamma: T, t: usize) -> Vec<T> {
    (1..=t).map(|s| gamma.powi((t - s) as i32)).collect()
}

/// Surrogate parameter `θ̄_t` of the discounted analysis, in normalized
/// coordinates:
/// `θ̄_t = V_{t−1}⁻¹ (Σ_{s<t} γ^{t−1−s} a_s a_sᵀ θ*_s + λ θ*_t)`
/// with `V_{t−1} = Σ_{s<t} γ^{t−1−s} a_s a_sᵀ + λI`.
///
/// Uses the first `t − 1` recorded actions and the truth at step `t`, so the
/// history must hold at least `t` steps with truths attached.
pub fn bar_theta<T: Real>(
    history: &HistoryLog<T>,
    dim: usize,
    gamma: T,
    lambda: T,
    t: usize,
) -> Result<Vec<T>> {
    let thetas = history.thetas.as_ref().ok_or(Error::MissingTruth)?;
    history.check(dim)?;
    if t == 0 {
        return Err(Error::InvalidConfig("bar_theta is defined for t >= 1".into()));
    }
    if thetas.len() < t {
        return Err(Error::dim(t, thetas.len()));
    }
    let past = t - 1;
    let mut v = SpdMatrix::scaled_identity(dim, lambda);
    let mut rhs: Vec<T> = thetas[t - 1].iter().map(|&x| lambda * x).collect();
    for s in 0..past {
        let w = gamma.powi((past - 1 - s) as i32);
        let a = &history.actions[s];
        v.add_outer(a, w)?;
        let proj = w * crate::linalg::dot(a, &thetas[s]);
        for (r, &ai) in rhs.iter_mut().zip(a) {
            *r = *r + proj * ai;
        }
    }
    Cholesky::factor(&v)?.solve(&rhs)
}
