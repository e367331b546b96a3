//! Statistical behavior of the estimator chain at moderate Monte Carlo
//! scale: unbiasedness, covariance, uncorrelatedness, consistency trend,
//! and the time/frequency equivalence on randomized leakage-free records.

use msid_core::fit::{cost_ml, pem_cost_time};
use msid_core::frf::{etfe_estimate, ls_estimate};
use msid_core::models::{frf_stack, FirstOrderSiso, LmfdModel, LmfdStructure};
use msid_core::multisine::{Experiment, ExcitationDesign, FrequencyGrid};
use msid_core::rng::derive_rng;
use msid_core::sim::{simulate_dataset, NoiseModel, TrueSystem};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

fn case_study_design() -> ExcitationDesign {
    let grid = FrequencyGrid::new(vec![2.0]).unwrap();
    ExcitationDesign::new(
        grid,
        PI / 10.0,
        vec![Experiment {
            offset: DVector::from_vec(vec![0.5]),
            amplitudes: DMatrix::from_vec(1, 1, vec![1.0]),
            phases: DMatrix::from_vec(1, 1, vec![-PI / 2.0]),
        }],
    )
    .unwrap()
}

/// A leakage-free design on two lines, `ω ∈ {2, 4}`, `h = π/10`: any sample
/// count that is a multiple of 10 spans integer periods of both.
fn two_line_design() -> ExcitationDesign {
    let grid = FrequencyGrid::new(vec![2.0, 4.0]).unwrap();
    ExcitationDesign::new(
        grid,
        PI / 10.0,
        vec![Experiment {
            offset: DVector::from_vec(vec![0.5]),
            amplitudes: DMatrix::from_vec(2, 1, vec![1.0, 0.8]),
            phases: DMatrix::from_vec(2, 1, vec![-PI / 2.0, 0.4]),
        }],
    )
    .unwrap()
}

#[test]
fn estimator_is_unbiased_on_two_output_system() {
    // 2-output/1-input truth; standardized bias below 4 at 4000 runs.
    let design = case_study_design();
    let truth = LmfdModel::new(
        2,
        1,
        vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 0.5])],
        vec![DMatrix::from_row_slice(2, 1, &[2.0, 1.0])],
    )
    .unwrap();
    let sys = TrueSystem::Lmfd(truth.clone());
    let sigma = DMatrix::from_row_slice(2, 2, &[0.09, 0.018, 0.018, 0.04]);
    let noise = NoiseModel::new(sigma).unwrap();
    let runs = 4000;
    let n = 40;
    let truth_stack = frf_stack(&sys, &design.line_set()).unwrap();
    let dim = truth_stack.values().len();
    let mut sum = vec![Complex64::ZERO; dim];
    let mut sumsq = vec![0.0f64; 2 * dim];
    for r in 0..runs {
        let ds = simulate_dataset(&sys, &design, &noise, n, derive_rng(42, &[r]).random()).unwrap();
        let est = ls_estimate(&ds).unwrap();
        for (k, v) in est.stack().values().iter().enumerate() {
            sum[k] += v;
            sumsq[2 * k] += v.re * v.re;
            sumsq[2 * k + 1] += v.im * v.im;
        }
    }
    let rf = runs as f64;
    for (k, t) in truth_stack.values().iter().enumerate() {
        let mean = sum[k] / rf;
        for (part, (m, t_part)) in [(0, (mean.re, t.re)), (1, (mean.im, t.im))] {
            let var = (sumsq[2 * k + part] / rf - m * m).max(1e-300);
            let se = (var / rf).sqrt();
            if se > 1e-12 {
                let z = (m - t_part) / se;
                assert!(z.abs() < 4.0, "entry {k} part {part}: z = {z}");
            } else {
                assert!((m - t_part).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn covariance_matches_kronecker_formula() {
    // Empirical vec-covariance of the stacked estimate against Sigma ⊗ Z⁻¹.
    let design = two_line_design();
    let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(1.0, 2.0));
    let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.25)).unwrap();
    let runs = 20_000;
    let n = 40;
    let mut reference = None;
    let dim = 5;
    let mut sum = DVector::<Complex64>::zeros(dim);
    let mut outer = DMatrix::<Complex64>::zeros(dim, dim);
    for r in 0..runs {
        let ds =
            simulate_dataset(&sys, &design, &noise, n, derive_rng(7, &[r as u64]).random()).unwrap();
        let est = ls_estimate(&ds).unwrap();
        let v = DVector::from_column_slice(est.stack().values().as_slice());
        outer += &v * v.adjoint();
        sum += v;
        if reference.is_none() {
            reference = Some(est.covariance().unwrap());
        }
    }
    let rf = runs as f64;
    let rfc = Complex64::new(rf, 0.0);
    let mean = sum / rfc;
    let emp = outer / rfc - &mean * mean.adjoint();
    let theory = reference.unwrap();
    let rel = (&emp - &theory).norm() / theory.norm();
    assert!(rel < 0.10, "relative covariance error {rel}");

    // Under integer-period sampling the off-diagonal blocks of Z vanish, so
    // estimates at distinct lines are uncorrelated: check the z-scores of
    // the empirical cross-covariances between different lines.
    for a in 0..dim {
        for b in 0..dim {
            if a == b {
                continue;
            }
            let se = (theory[(a, a)].re * theory[(b, b)].re / rf).sqrt();
            let cross = if theory[(a, b)].norm() < 1e-12 {
                emp[(a, b)].norm() / se
            } else {
                continue;
            };
            assert!(cross < 5.0, "lines {a},{b}: standardized cross-cov {cross}");
        }
    }
}

#[test]
fn z_gram_is_block_diagonal_under_integer_periods() {
    let design = two_line_design();
    let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(1.0, 2.0));
    let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.25)).unwrap();
    let ds = simulate_dataset(&sys, &design, &noise, 40, 3).unwrap();
    let est = ls_estimate(&ds).unwrap();
    let z = est.z();
    let scale = z.diagonal().map(|v| v.norm()).max();
    for a in 0..z.nrows() {
        for b in 0..z.ncols() {
            if a != b {
                assert!(
                    z[(a, b)].norm() < 1e-9 * scale,
                    "off-diagonal ({a},{b}) = {}",
                    z[(a, b)]
                );
            }
        }
    }
}

#[test]
fn error_norm_decays_as_inverse_sqrt_n() {
    // Median Frobenius error over N in {50,...,800} decays like N^{-1/2}:
    // log-log slope within [-0.6, -0.4].
    let design = case_study_design();
    let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(1.0, 2.0));
    let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.25)).unwrap();
    let truth = frf_stack(&sys, &design.line_set()).unwrap();
    let ns = [50usize, 100, 200, 400, 800];
    let runs = 150;
    let mut medians = Vec::new();
    for (ni, &n) in ns.iter().enumerate() {
        let mut errs: Vec<f64> = (0..runs)
            .map(|r| {
                let seed = derive_rng(99, &[ni as u64, r as u64]).random();
                let ds = simulate_dataset(&sys, &design, &noise, n, seed).unwrap();
                let est = ls_estimate(&ds).unwrap();
                (est.stack().values() - truth.values()).norm()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        medians.push(errs[runs / 2]);
    }
    // Least-squares slope of log(median) on log(N).
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
    assert!(
        (-0.6..=-0.4).contains(&slope),
        "decay slope {slope}, medians {medians:?}"
    );
}

#[test]
fn sub_nyquist_estimates_stay_unbiased() {
    // omega in {pi, 5pi} sampled at h = 4/7: well above Nyquist for the top
    // line, still unbiased at the excited lines.
    let grid = FrequencyGrid::new(vec![PI, 5.0 * PI]).unwrap();
    let design = ExcitationDesign::new(
        grid,
        4.0 / 7.0,
        vec![Experiment {
            offset: DVector::from_vec(vec![0.4]),
            amplitudes: DMatrix::from_vec(2, 1, vec![1.0, 0.9]),
            phases: DMatrix::from_vec(2, 1, vec![0.3, -0.9]),
        }],
    )
    .unwrap();
    let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(0.4, 1.5));
    let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.09)).unwrap();
    let truth = frf_stack(&sys, &design.line_set()).unwrap();
    let runs = 1500;
    let n = 28;
    let dim = truth.values().len();
    let mut sum = vec![Complex64::ZERO; dim];
    let mut sumsq = vec![0.0f64; dim];
    for r in 0..runs {
        let ds =
            simulate_dataset(&sys, &design, &noise, n, derive_rng(5, &[r as u64]).random()).unwrap();
        let est = ls_estimate(&ds).unwrap();
        for (k, v) in est.stack().values().iter().enumerate() {
            sum[k] += v;
            sumsq[k] += v.norm_sqr();
        }
    }
    let rf = runs as f64;
    for (k, t) in truth.values().iter().enumerate() {
        let mean = sum[k] / rf;
        let var = (sumsq[k] / rf - mean.norm_sqr()).max(1e-300);
        let se = (var / rf).sqrt();
        let z = (mean - t).norm() / se;
        assert!(z < 4.5, "entry {k}: standardized bias {z}");
    }
}

#[test]
fn time_and_frequency_routes_agree_on_random_records() {
    // Randomized leakage-free configurations (line frequencies built as
    // integer cycle counts over the record) plus the sub-Nyquist example.
    for seed in 0..6u64 {
        let mut rng = derive_rng(1234, &[seed]);
        let n = 30 + 10 * (seed as usize % 3);
        let h = 0.15 + 0.1 * rng.random::<f64>();
        let d1 = 1 + rng.random_range(0..3_u32) as i64;
        let d2 = d1 + 1 + rng.random_range(0..3_u32) as i64;
        let base = std::f64::consts::TAU / (n as f64 * h);
        let grid = FrequencyGrid::new(vec![d1 as f64 * base, d2 as f64 * base]).unwrap();
        if !msid_core::multisine::line_overlap_check(&grid, h, 1e-9).holds {
            continue;
        }
        let design = ExcitationDesign::new(
            grid,
            h,
            vec![Experiment {
                offset: DVector::from_vec(vec![0.3 + rng.random::<f64>()]),
                amplitudes: DMatrix::from_fn(2, 1, |_, _| 0.5 + rng.random::<f64>()),
                phases: DMatrix::from_fn(2, 1, |_, _| rng.random::<f64>() * std::f64::consts::TAU),
            }],
        )
        .unwrap();
        let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(0.7, 1.8));
        let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.2)).unwrap();
        let ds = simulate_dataset(&sys, &design, &noise, n, rng.random()).unwrap();
        let a = ls_estimate(&ds).unwrap();
        let b = etfe_estimate(&ds).unwrap();
        let rel = (a.stack().values() - b.stack().values()).norm() / a.stack().values().norm();
        assert!(rel < 1e-9, "seed {seed}: relative difference {rel}");
    }
}

#[test]
fn weighted_cost_shares_minimizer_slices_with_prediction_error() {
    // On a 1-D slice through the truth, both costs pick the same grid point.
    let design = case_study_design();
    let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(1.0, 2.0));
    let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.25)).unwrap();
    let ds = simulate_dataset(&sys, &design, &noise, 60, 31).unwrap();
    let est = ls_estimate(&ds).unwrap();
    let cov = est.covariance().unwrap();
    let structure = LmfdStructure::new(1, 1, 1, 0);
    let slice: Vec<f64> = (0..81).map(|k| 0.6 + 0.01 * k as f64).collect();
    let argmin_by = |f: &dyn Fn(f64) -> f64| {
        slice
            .iter()
            .copied()
            .min_by(|&a, &b| f(a).total_cmp(&f(b)))
            .unwrap()
    };
    let ml = argmin_by(&|a1| {
        cost_ml(
            est.stack(),
            &cov,
            &structure,
            &DVector::from_vec(vec![a1, 2.0]),
        )
        .unwrap()
    });
    let pem = argmin_by(&|a1| {
        pem_cost_time(
            &ds,
            &structure,
            &DVector::from_vec(vec![a1, 2.0]),
            ds.sigma(),
        )
        .unwrap()
    });
    assert_eq!(ml, pem);
}

#[test]
fn levy_baseline_never_beats_the_weighted_optimum() {
    // In the overconstrained case the unweighted linear fit differs from the
    // weighted optimum; over repeated noisy records its weighted cost is
    // strictly worse almost every time.
    use msid_core::fit::{fit_iterative, fit_levy, FitOptions};
    let design = case_study_design();
    let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(1.0, 2.0));
    let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.25)).unwrap();
    let structure = LmfdStructure::new(1, 1, 1, 0);
    let options = FitOptions {
        multistart: 0,
        ..FitOptions::default()
    };
    let mut strictly_better = 0;
    let runs = 100;
    for r in 0..runs {
        let seed = derive_rng(2211, &[r]).random();
        let ds = simulate_dataset(&sys, &design, &noise, 40, seed).unwrap();
        let est = ls_estimate(&ds).unwrap();
        let cov = est.covariance().unwrap();
        let levy = fit_levy(est.stack(), 1, 0, None).unwrap();
        let iter = fit_iterative(est.stack(), &cov, &structure, &levy.theta, &options).unwrap();
        let c_levy = cost_ml(est.stack(), &cov, &structure, &levy.theta).unwrap();
        let c_iter = cost_ml(est.stack(), &cov, &structure, &iter.theta).unwrap();
        assert!(
            c_levy >= c_iter - 1e-9 * c_iter.abs(),
            "run {r}: Levy cost {c_levy} below optimum {c_iter}"
        );
        if c_levy > c_iter * (1.0 + 1e-9) {
            strictly_better += 1;
        }
    }
    assert!(
        strictly_better >= 90,
        "weighted fit strictly better in only {strictly_better} of {runs} runs"
    );
}
