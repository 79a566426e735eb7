//! Horizon-dependent tuning of the discount factor and the window length.

use crate::scalar::Real;

pub const GAMMA_MIN: f64 = 0.5;
pub const GAMMA_MAX: f64 = 1.0 - 1e-6;

/// `1 − (B_T/(dT))^{2/3}` without clamping. Non-positive budgets map to 1.
pub fn tune_gamma_unclamped<T: Real>(budget: T, dim: usize, horizon: u64) -> T {
    if !(budget > T::zero()) {
        return T::one();
    }
    let dt = T::from_count(dim as u64) * T::from_count(horizon);
    T::one() - (budget / dt).powf(T::lit(2.0 / 3.0))
}

/// Discount factor `γ = 1 − (B_T/(dT))^{2/3}`, clamped to
/// `[GAMMA_MIN, GAMMA_MAX]`.
pub fn tune_gamma<T: Real>(budget: T, dim: usize, horizon: u64) -> T {
    tune_gamma_unclamped(budget, dim, horizon)
        .max(T::lit(GAMMA_MIN))
        .min(T::lit(GAMMA_MAX))
}

fn round_window<T: Real>(x: T, horizon: u64) -> usize {
    let hi = horizon.max(1) as f64;
    let r = x.to_f64().unwrap_or(f64::INFINITY).round();
    r.clamp(1.0, hi) as usize
}

/// Window length `l = round((dT/B_T)^{2/3})` clamped to `[1, T]`.
/// A non-positive budget returns `T`.
pub fn tune_window<T: Real>(budget: T, dim: usize, horizon: u64) -> usize {
    if !(budget > T::zero()) {
        return horizon.max(1) as usize;
    }
    let dt = T::from_count(dim as u64) * T::from_count(horizon);
    round_window((dt / budget).powf(T::lit(2.0 / 3.0)), horizon)
}

/// Window length for an unknown budget: `round(d^{2/3} T^{2/3})`, clamped to
/// `[1, T]`.
pub fn tune_window_unknown(dim: usize, horizon: u64) -> usize {
    round_window((dim as f64 * horizon as f64).powf(2.0 / 3.0), horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        let g: f64 = tune_gamma(1.57, 2, 6000);
        assert!((g - 0.997423).abs() < 1e-6, "{g}");
        assert_eq!(tune_gamma(12000.0, 2, 6000), GAMMA_MIN);
        assert_eq!(tune_gamma(0.0, 2, 6000), GAMMA_MAX);
        assert_eq!(tune_gamma(1e-30, 2, 6000), GAMMA_MAX);
    }

    #[test]
    fn window_examples() {
        assert_eq!(tune_window(1.57, 2, 6000), 388);
        assert_eq!(tune_window(12000.0, 2, 6000), 1);
        assert_eq!(tune_window(0.0, 2, 6000), 6000);
        assert_eq!(tune_window_unknown(1, 1000), 100);
        assert_eq!(tune_window_unknown(1000, 10), 10);
    }
}
