//! Empirical checks of the confidence bound and of the deterministic matrix
//! inequalities behind the regret analysis.
//!
//! Everything is evaluated in the normalized coordinates of
//! [`crate::estimator`], where no quantity grows like `γ^{−t}`.

mod coverage;
mod inequalities;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use coverage::{
    binomial_tolerance, coverage_test, weighted_deviation, ActionMode, CoverageReport,
    CoverageSpec, Weighting, COVERAGE_SLACK,
};
pub use inequalities::{
    analysis_window, assert_matrix_inequalities, assert_sw_inequalities, bar_theta_path,
    bias_diagnostic, record_dlinucb_episode, record_swlinucb_episode, BiasPoint, BiasReport,
    DiscountedTrace, MatrixReport, Violation, WindowReport, WindowTrace,
};

use crate::environments::{
    abrupt_scenario, ActionSetSampler, NoiseModel, ThetaTrajectory,
};
use crate::error::{Error, Result};
use crate::policies::PolicyConfig;

/// Named groups of checks run by the command line and CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Coverage,
    Matrix,
    Sw,
    Bias,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(Suite::Coverage),
            "matrix" => Ok(Suite::Matrix),
            "sw" => Ok(Suite::Sw),
            "bias" => Ok(Suite::Bias),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown suite `{other}` (expected coverage, matrix, sw, bias or all)"
            ))),
        }
    }
}

/// Combined outcome of one or more suites.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub matrix: Vec<MatrixReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sw: Vec<WindowReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sw_coverage: Option<CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.coverage.as_ref().is_none_or(|c| c.within_tolerance())
            && self.matrix.iter().all(MatrixReport::passed)
            && self.sw.iter().all(WindowReport::passed)
            && self.sw_coverage.as_ref().is_none_or(|c| c.within_tolerance())
            && self.bias.as_ref().is_none_or(|b| b.passed())
    }

    /// One line per check, for terminals.
    pub fn lines(&self) -> Vec<String> {
        let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out = Vec::new();
        if let Some(c) = &self.coverage {
            out.push(format!(
                "{} coverage: {}/{} failures, rate {:.4} (tolerance {:.4})",
                mark(c.within_tolerance()),
                c.failures,
                c.runs,
                c.empirical_failure_rate,
                c.tolerance()
            ));
        }
        if !self.matrix.is_empty() {
            let ok = self.matrix.iter().all(MatrixReport::passed);
            let worst_ld = self.matrix.iter().map(|m| m.logdet_margin).fold(f64::INFINITY, f64::min);
            let worst_pot = self
                .matrix
                .iter()
                .map(|m| m.potential_bound - m.potential)
                .fold(f64::INFINITY, f64::min);
            out.push(format!(
                "{} matrix: {} episodes, min log-det margin {worst_ld:.4}, min potential margin {worst_pot:.4}",
                mark(ok),
                self.matrix.len()
            ));
        }
        if !self.sw.is_empty() {
            let ok = self.sw.iter().all(WindowReport::passed);
            let worst = self
                .sw
                .iter()
                .map(|m| m.potential_bound - m.potential)
                .fold(f64::INFINITY, f64::min);
            out.push(format!(
                "{} sw potential: {} episodes, min margin {worst:.4}",
                mark(ok),
                self.sw.len()
            ));
        }
        if let Some(c) = &self.sw_coverage {
            out.push(format!(
                "{} sw coverage: {}/{} failures, rate {:.4} (tolerance {:.4})",
                mark(c.within_tolerance()),
                c.failures,
                c.runs,
                c.empirical_failure_rate,
                c.tolerance()
            ));
        }
        if let Some(b) = &self.bias {
            out.push(format!(
                "{} bias: D = {}, max bias {:.4}, min margin {:.4}",
                mark(b.passed()),
                b.window,
                b.max_bias,
                b.min_margin
            ));
        }
        out
    }
}

fn unit_sphere(dim: usize) -> ActionSetSampler {
    ActionSetSampler::UnitSphere { dim, k: 10 }
}

/// `d = 2`, `T = 300`, `γ = 0.95`, 1000 optimistic runs.
pub fn default_coverage(seed: u64) -> Result<CoverageReport> {
    coverage_test(&CoverageSpec::discounted(2, 300, 0.95, 1000), seed)
}

/// `episodes` D-LinUCB runs of length `horizon` on a fixed random unit
/// parameter, alternating `γ = 0.9` and `γ = 0.99`.
pub fn default_matrix(seed: u64, episodes: usize, horizon: u64) -> Result<Vec<MatrixReport>> {
    (0..episodes)
        .map(|i| {
            let gamma = if i % 2 == 0 { 0.9 } else { 0.99 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let theta = crate::environments::unit_sphere_point(2, &mut rng);
            let traj = ThetaTrajectory::constant(theta, horizon);
            let tr = record_dlinucb_episode(
                &traj,
                &unit_sphere(2),
                &NoiseModel::gaussian(1.0)?,
                PolicyConfig::new(2).with_gamma(gamma),
                &mut rng,
            )?;
            assert_matrix_inequalities(&tr)
        })
        .collect()
}

/// SW potential on `l = 50`, `T = 1000` episodes, plus a window coverage run.
pub fn default_sw(seed: u64) -> Result<(Vec<WindowReport>, CoverageReport)> {
    let reports = (0..5)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let theta = crate::environments::unit_sphere_point(2, &mut rng);
            let traj = ThetaTrajectory::constant(theta, 1000);
            let tr = record_swlinucb_episode(
                &traj,
                &unit_sphere(2),
                &NoiseModel::gaussian(1.0)?,
                PolicyConfig::new(2).with_window(50, 1000),
                &mut rng,
            )?;
            assert_sw_inequalities(&tr)
        })
        .collect::<Result<Vec<_>>>()?;
    let coverage = coverage_test(&CoverageSpec::window(2, 300, 50, 300), seed)?;
    Ok((reports, coverage))
}

/// Abrupt scenario, `γ = 0.997`, `D = ⌈ln T/(1−γ)⌉`.
pub fn default_bias(seed: u64) -> Result<BiasReport> {
    let gamma = 0.997;
    let traj = abrupt_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tr = record_dlinucb_episode(
        &traj,
        &unit_sphere(2),
        &NoiseModel::gaussian(1.0)?,
        PolicyConfig::new(2).with_gamma(gamma),
        &mut rng,
    )?;
    bias_diagnostic(&tr, analysis_window(gamma, traj.horizon))
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport {
        seed,
        ..SuiteReport::default()
    };
    let all = suite == Suite::All;
    if all || suite == Suite::Coverage {
        report.coverage = Some(default_coverage(seed)?);
    }
    if all || suite == Suite::Matrix {
        report.matrix = default_matrix(seed, 20, 500)?;
    }
    if all || suite == Suite::Sw {
        let (sw, cov) = default_sw(seed)?;
        report.sw = sw;
        report.sw_coverage = Some(cov);
    }
    if all || suite == Suite::Bias {
        report.bias = Some(default_bias(seed)?);
    }
    Ok(report)
}
