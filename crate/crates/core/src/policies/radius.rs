//! Confidence radii `β_t` of the optimistic policies.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{PolicyConfig, SwRadius};

/// `√λ·S + σ·√(2·log_conf + d·ln(1 + L²·count/(λd)))`.
///
/// Shared by every radius so that D-LinUCB at `γ = 1` and LinUCB evaluate the
/// exact same floating point expression.
fn radius<T: Real>(cfg: &PolicyConfig<T>, log_conf: T, count: T) -> T {
    let d = T::from_count(cfg.dim as u64);
    let l2 = cfg.action_bound * cfg.action_bound;
    let info = d * (T::one() + l2 * count / (cfg.lambda * d)).ln();
    cfg.lambda.sqrt() * cfg.param_bound + cfg.sigma * (T::lit(2.0) * log_conf + info).sqrt()
}

/// `(1 − γ^{2t}) / (1 − γ²)`, the sum of squared normalized weights, with its
/// limit `t` at `γ = 1`.
pub fn squared_weight_mass<T: Real>(gamma: T, t: u64) -> T {
    if gamma == T::one() {
        return T::from_count(t);
    }
    let lg = gamma.ln();
    let num = -(T::lit(2.0) * T::from_count(t) * lg).exp_m1();
    let den = -(T::lit(2.0) * lg).exp_m1();
    num / den
}

/// `(1 − γ^t) / (1 − γ)`, with its limit `t` at `γ = 1`.
pub fn weight_mass<T: Real>(gamma: T, t: u64) -> T {
    if gamma == T::one() {
        return T::from_count(t);
    }
    let lg = gamma.ln();
    (T::from_count(t) * lg).exp_m1() / lg.exp_m1()
}

/// D-LinUCB radius after `t` absorbed updates:
/// `√λ·S + σ·√(2 ln(1/δ) + d·ln(1 + L²(1−γ^{2t})/(λd(1−γ²))))`.
pub fn beta_dlinucb<T: Real>(t: u64, cfg: &PolicyConfig<T>) -> Result<T> {
    let gamma = cfg
        .gamma
        .ok_or_else(|| Error::InvalidConfig("D-LinUCB radius needs a discount factor".into()))?;
    Ok(radius(cfg, (T::one() / cfg.delta).ln(), squared_weight_mass(gamma, t)))
}

/// SW-LinUCB radius after `t` absorbed updates:
/// `√λ·S + σ·√(2 ln(T/δ) + d·ln(1 + L² min(t,l)/(λd)))`.
///
/// With [`SwRadius::Legacy`] the union-bound term `ln(T/δ)` is replaced by
/// `ln(1/δ)`.
pub fn beta_swlinucb<T: Real>(t: u64, cfg: &PolicyConfig<T>) -> Result<T> {
    let window = cfg
        .window
        .ok_or_else(|| Error::InvalidConfig("SW-LinUCB radius needs a window length".into()))?;
    let horizon = cfg
        .horizon
        .ok_or_else(|| Error::InvalidConfig("SW-LinUCB radius needs the horizon T".into()))?;
    let log_conf = match cfg.sw_radius {
        SwRadius::Corrected => (T::from_count(horizon) / cfg.delta).ln(),
        SwRadius::Legacy => (T::one() / cfg.delta).ln(),
    };
    Ok(radius(cfg, log_conf, T::from_count(t.min(window as u64))))
}

/// Stationary LinUCB radius: `√λ·S + σ·√(2 ln(1/δ) + d·ln(1 + L²t/(λd)))`.
pub fn beta_linucb<T: Real>(t: u64, cfg: &PolicyConfig<T>) -> T {
    radius(cfg, (T::one() / cfg.delta).ln(), T::from_count(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> PolicyConfig<f64> {
        PolicyConfig {
            delta: 0.05,
            sigma: 1.0,
            dim: 2,
            lambda: 1.0,
            action_bound: 1.0,
            param_bound: 1.0,
            gamma: Some(0.99),
            window: Some(4),
            horizon: Some(1000),
            sw_radius: SwRadius::Corrected,
        }
    }

    #[test]
    fn dlinucb_at_zero_steps() {
        let c = cfg();
        let b0 = beta_dlinucb(0, &c).unwrap();
        assert_relative_eq!(b0, 1.0 + (2.0 * 20f64.ln()).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(b0, 3.4478, epsilon = 1e-4);
        let mut c2 = c.clone();
        c2.lambda = 4.0;
        c2.param_bound = 0.5;
        c2.sigma = 2.0;
        assert_relative_eq!(
            beta_dlinucb(0, &c2).unwrap(),
            2.0 * 0.5 + 2.0 * (2.0 * 20f64.ln()).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dlinucb_limit_at_gamma_one() {
        let mut c = cfg();
        c.gamma = Some(1.0);
        let expected = 1.0 + (2.0 * 20f64.ln() + 2.0 * (1.0 + 10.0 / 2.0f64).ln()).sqrt();
        assert_relative_eq!(beta_dlinucb(10, &c).unwrap(), expected, epsilon = 1e-12);
        // Continuity from below.
        c.gamma = Some(1.0 - 1e-9);
        assert_relative_eq!(beta_dlinucb(10, &c).unwrap(), expected, epsilon = 1e-7);
        c.gamma = Some(1.0);
        assert_eq!(beta_dlinucb(10, &c).unwrap(), beta_linucb(10, &c));
    }

    #[test]
    fn dlinucb_direct_formula() {
        let c = cfg();
        let g: f64 = 0.99;
        let t = 37;
        let mass = (1.0 - g.powi(2 * t)) / (1.0 - g * g);
        let expected = 1.0 + (2.0 * 20f64.ln() + 2.0 * (1.0 + mass / 2.0).ln()).sqrt();
        assert_relative_eq!(beta_dlinucb(t as u64, &c).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn swlinucb_examples() {
        let c = cfg();
        assert_relative_eq!(
            beta_swlinucb(0, &c).unwrap(),
            1.0 + (2.0 * (1000.0f64 / 0.05).ln()).sqrt(),
            epsilon = 1e-12
        );
        // min(10, 4) = 4 → d·ln(1 + 4/(1·2)) = 2 ln 3
        let expected = 1.0 + (2.0 * 20000f64.ln() + 2.0 * 3f64.ln()).sqrt();
        assert_relative_eq!(beta_swlinucb(10, &c).unwrap(), expected, epsilon = 1e-12);
        assert_eq!(beta_swlinucb(4, &c).unwrap(), beta_swlinucb(4000, &c).unwrap());

        let mut legacy = c.clone();
        legacy.sw_radius = SwRadius::Legacy;
        let expected = 1.0 + (2.0 * 20f64.ln() + 2.0 * 3f64.ln()).sqrt();
        assert_relative_eq!(beta_swlinucb(10, &legacy).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn missing_parameters() {
        let mut c = cfg();
        c.gamma = None;
        assert!(matches!(beta_dlinucb(1, &c), Err(Error::InvalidConfig(_))));
        let mut c = cfg();
        c.horizon = None;
        assert!(beta_swlinucb(1, &c).is_err());
        let mut c = cfg();
        c.window = None;
        assert!(beta_swlinucb(1, &c).is_err());
    }

    proptest! {
        #[test]
        fn radii_nondecreasing(
            gamma in 0.5f64..=1.0,
            window in 1usize..500,
            lambda in 0.1f64..10.0,
            dim in 1usize..60,
            t in 0u64..20_000,
        ) {
            let mut c = cfg();
            c.gamma = Some(gamma);
            c.window = Some(window);
            c.lambda = lambda;
            c.dim = dim;
            prop_assert!(beta_dlinucb(t + 1, &c).unwrap() >= beta_dlinucb(t, &c).unwrap());
            prop_assert!(beta_swlinucb(t + 1, &c).unwrap() >= beta_swlinucb(t, &c).unwrap());
            prop_assert!(beta_linucb(t + 1, &c) >= beta_linucb(t, &c));
        }

        #[test]
        fn weight_masses_match_sums(gamma in 0.5f64..0.9999, t in 0u64..300) {
            let direct: f64 = (0..t).map(|k| gamma.powi(k as i32)).sum();
            let direct_sq: f64 = (0..t).map(|k| gamma.powi(2 * k as i32)).sum();
            prop_assert!((weight_mass(gamma, t) - direct).abs() <= 1e-9 * (1.0 + direct));
            prop_assert!((squared_weight_mass(gamma, t) - direct_sq).abs() <= 1e-9 * (1.0 + direct_sq));
        }
    }
}
