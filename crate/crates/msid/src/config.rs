//! Monte Carlo scenario configurations with reproducible defaults.

use msid_core::files::{DesignFile, ExperimentFile, ModelFile};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// First-order case study under a single quadrature sinusoid: histogram of
/// the closed-form time-constant estimate against its normal approximation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig2Config {
    pub a1_true: f64,
    pub b0_true: f64,
    /// Noise standard deviation.
    pub noise_std: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    /// Record length in full periods of the excitation; the sampling period
    /// is `2π periods / (omega N)` so every listed `N` is leakage-free.
    pub periods: u32,
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            a1_true: 1.0,
            b0_true: 2.0,
            noise_std: 0.8,
            amplitude: 1.0,
            omega: FRAC_1_SQRT_2,
            phase: -PI / 2.0,
            periods: 1,
            n_list: vec![20, 60],
            runs: 20_000,
            seed: 1,
        }
    }
}

impl Fig2Config {
    /// Full-scale run count for final figures.
    pub fn full_scale(mut self) -> Self {
        self.runs = 200_000;
        self
    }
}

/// First-order case study with offset plus sinusoid: empirical versus
/// theoretical 90% confidence radii over a sweep of sample sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig3Config {
    pub a1_true: f64,
    pub b0_true: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub h: f64,
    /// Noise variance.
    pub noise_var: f64,
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub delta: f64,
    pub beta: f64,
    /// Relative size of the random perturbation applied to the true
    /// parameters when initializing the iterative fit.
    pub init_perturbation: f64,
    pub seed: u64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            a1_true: 1.0,
            b0_true: 2.0,
            offset: 0.5,
            amplitude: 1.0,
            omega: 2.0,
            phase: -PI / 2.0,
            h: PI / 10.0,
            noise_var: 0.25,
            n_list: (1..=15).map(|k| 20 * k).collect(),
            runs: 500,
            delta: 0.1,
            beta: 0.8,
            init_perturbation: 0.05,
            seed: 1,
        }
    }
}

impl Fig3Config {
    pub fn full_scale(mut self) -> Self {
        self.runs = 2000;
        self
    }

    pub fn design_file(&self) -> DesignFile {
        DesignFile {
            frequencies_rad_s: vec![self.omega],
            h: self.h,
            experiments: vec![ExperimentFile {
                offset: vec![self.offset],
                amplitudes: vec![vec![self.amplitude]],
                phases: vec![vec![self.phase]],
            }],
        }
    }
}

/// Generic estimator-statistics scenario: bias, covariance, and
/// cross-covariance of the line FRF estimate against the exact formulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FrfStatsConfig {
    pub design: DesignFile,
    pub system: ModelFile,
    pub sigma: Vec<Vec<f64>>,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for FrfStatsConfig {
    fn default() -> Self {
        // SISO with two sinusoids plus offset; every N multiple of 10 is
        // leakage-free at h = pi/10.
        Self {
            design: DesignFile {
                frequencies_rad_s: vec![2.0, 4.0],
                h: PI / 10.0,
                experiments: vec![ExperimentFile {
                    offset: vec![0.5],
                    amplitudes: vec![vec![1.0], vec![0.8]],
                    phases: vec![vec![-PI / 2.0], vec![0.4]],
                }],
            },
            system: ModelFile {
                n_y: 1,
                n_u: 1,
                d: vec![vec![vec![1.0]]],
                n: vec![vec![vec![2.0]]],
            },
            sigma: vec![vec![0.25]],
            n: 40,
            runs: 20_000,
            seed: 1,
        }
    }
}

impl FrfStatsConfig {
    pub fn full_scale(mut self) -> Self {
        self.runs = 100_000;
        self
    }
}
