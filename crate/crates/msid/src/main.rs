//! `msid`: multisine frequency-domain system identification.
//!
//! Exit codes: 0 on success, 1 when a check or estimation fails on valid
//! inputs, 2 on usage or configuration errors (including unreadable files).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use msid::artifacts::{BoundsFile, DatasetFile, FitFile};
use msid::config::{Fig2Config, Fig3Config, FrfStatsConfig};
use msid::csvio::{read_csv, write_csv};
use msid::mc::{run_fig2, run_fig3, run_frf_stats};
use msid_core::bounds::{bound_report, BoundInputs};
use msid_core::files::{DesignFile, FrfFile, ModelFile, SigmaFile};
use msid_core::fit::{
    fit_iterative, fit_levy, fit_lmfd_closed_form, FitOptions, FitResult, FitStatus,
};
use msid_core::frf::ls_estimate;
use msid_core::models::{LmfdStructure, ParametricStructure};
use msid_core::multisine::{
    input_rank_check, leakage_check, line_overlap_check, line_overlap_check_exact,
    ExcitationDesign, LEAKAGE_TOL, OVERLAP_TOL, RANK_CHECK_TOL,
};
use msid_core::sim::{simulate_dataset, Dataset, NoiseModel, TrueSystem};

#[derive(Parser)]
#[command(name = "msid", version, about = "Multisine frequency-domain system identification")]
struct Cli {
    /// Root seed for all randomized commands (fallback: MSID_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo scenarios (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the excitation admissibility conditions of a design.
    DesignCheck {
        design: PathBuf,
        /// Sample count; enables the integer-period (leakage) check.
        #[arg(long = "N")]
        n: Option<usize>,
        /// Tolerance override applied to all three checks.
        #[arg(long)]
        tol: Option<f64>,
        /// Check line overlap in exact rational arithmetic (requires
        /// omega*h/pi to be rational within 1e-12).
        #[arg(long)]
        exact: bool,
    },
    /// Simulate noisy steady-state records of a system under a design.
    Simulate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the FRF at the excited lines from a dataset directory.
    EstimateFrf {
        #[arg(long)]
        data: PathBuf,
        /// Override the noise covariance recorded in the dataset.
        #[arg(long)]
        sigma: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write an interpolated sweep: omega_min omega_max points.
        #[arg(long, num_args = 3, value_names = ["W_MIN", "W_MAX", "POINTS"])]
        sweep: Option<Vec<f64>>,
    },
    /// Fit a parametric model to an FRF estimate.
    Fit {
        #[arg(long)]
        frf: PathBuf,
        /// Model structure; `lmfd` is the only supported value.
        #[arg(long, default_value = "lmfd")]
        structure: String,
        /// Denominator degree.
        #[arg(long)]
        nd: usize,
        /// Numerator degree.
        #[arg(long)]
        nn: usize,
        /// closed | iter | levy.
        #[arg(long, default_value = "closed")]
        method: String,
        /// Initial parameter vector for the iterative method
        /// (JSON: {"theta": [...]}).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-sample concentration radii for a design.
    Bounds {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        delta: f64,
        /// True model (matrix-fraction JSON) for the parameter radius.
        #[arg(long)]
        theta0: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo case-study scenarios.
    Montecarlo {
        /// fig2 | fig3 | frf-stats.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: current directory).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Full-scale run counts instead of the desk-scale defaults.
        #[arg(long)]
        full: bool,
    },
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type AppResult<T> = Result<T, Failure>;

trait Ctx<T> {
    /// Configuration/usage problem: exit 2.
    fn or_config(self, what: &str) -> AppResult<T>;
    /// Validation/estimation failure on valid inputs: exit 1.
    fn or_failed(self, what: &str) -> AppResult<T>;
}

impl<T, E: Into<anyhow::Error>> Ctx<T> for Result<T, E> {
    fn or_config(self, what: &str) -> AppResult<T> {
        self.map_err(|e| Failure {
            code: 2,
            error: e.into().context(what.to_string()),
        })
    }

    fn or_failed(self, what: &str) -> AppResult<T> {
        self.map_err(|e| Failure {
            code: 1,
            error: e.into().context(what.to_string()),
        })
    }
}

fn fail(code: u8, msg: String) -> Failure {
    Failure {
        code,
        error: anyhow!(msg),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_config("cannot read input file")?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .or_config("malformed JSON")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let text = serde_json::to_string_pretty(value).or_failed("serializing output")?;
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .or_config("cannot write output file")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let seed = cli.seed.unwrap_or_else(|| {
        std::env::var("MSID_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0)
    });
    match run(cli.command, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command, seed: u64) -> AppResult<()> {
    match command {
        Command::DesignCheck {
            design,
            n,
            tol,
            exact,
        } => design_check(&design, n, tol, exact),
        Command::Simulate {
            design,
            system,
            sigma,
            n,
            out,
        } => simulate(&design, &system, &sigma, n, &out, seed),
        Command::EstimateFrf {
            data,
            sigma,
            out,
            sweep,
        } => estimate_frf(&data, sigma.as_deref(), &out, sweep),
        Command::Fit {
            frf,
            structure,
            nd,
            nn,
            method,
            init,
            out,
        } => fit(&frf, &structure, nd, nn, &method, init.as_deref(), &out, seed),
        Command::Bounds {
            design,
            sigma,
            n,
            delta,
            theta0,
            beta,
            out,
        } => bounds(&design, &sigma, n, delta, theta0.as_deref(), beta, &out),
        Command::Montecarlo {
            scenario,
            config,
            out,
            full,
        } => montecarlo(&scenario, config.as_deref(), &out, full, seed),
    }
}

fn load_design(path: &Path) -> AppResult<ExcitationDesign> {
    let file: DesignFile = read_json(path)?;
    file.to_design()
        .or_config("design file fails basic validation")
}

fn design_check(path: &Path, n: Option<usize>, tol: Option<f64>, exact: bool) -> AppResult<()> {
    let design = load_design(path)?;
    let mut all_ok = true;
    let mut report = String::new();

    let rank = input_rank_check(&design, tol.unwrap_or(RANK_CHECK_TOL));
    let _ = writeln!(
        report,
        "input rank: {}{}",
        if rank.holds { "ok" } else { "FAILED" },
        if rank.dc_active { "" } else { " (DC line unexcited, ignored)" }
    );
    for line in &rank.lines {
        let _ = writeln!(
            report,
            "  line {:>2}: sigma_min = {:.6e}, sigma_max = {:.6e}{}",
            line.line,
            line.sigma_min,
            line.sigma_max,
            if line.full_rank { "" } else { "  <- rank deficient" }
        );
    }
    all_ok &= rank.holds;

    let overlap = if exact {
        let ratios: Vec<(i64, i64)> = design
            .grid()
            .omegas()
            .iter()
            .map(|&w| {
                rationalize(w * design.h() / std::f64::consts::PI).ok_or_else(|| {
                    fail(
                        2,
                        format!("--exact: omega {w} * h / pi is not rational within 1e-12"),
                    )
                })
            })
            .collect::<AppResult<_>>()?;
        line_overlap_check_exact(&ratios).or_config("exact overlap check")?
    } else {
        line_overlap_check(design.grid(), design.h(), tol.unwrap_or(OVERLAP_TOL))
    };
    let _ = writeln!(
        report,
        "line overlap after sampling: {}",
        if overlap.holds { "ok" } else { "FAILED" }
    );
    for v in &overlap.violations {
        let _ = writeln!(report, "  violation: {v}");
    }
    all_ok &= overlap.holds;

    match n {
        Some(n) => {
            let leak = leakage_check(design.grid(), design.h(), n, tol.unwrap_or(LEAKAGE_TOL))
                .or_config("leakage check")?;
            let _ = writeln!(
                report,
                "integer periods over N = {n}: {}",
                if leak.holds { "ok" } else { "FAILED" }
            );
            for (ell, frac) in leak.fractional_parts.iter().enumerate() {
                let _ = writeln!(report, "  line {}: fractional periods {frac:.3e}", ell + 1);
            }
            all_ok &= leak.holds;
        }
        None => {
            let _ = writeln!(report, "integer periods: skipped (no --N given)");
        }
    }

    print!("{report}");
    if all_ok {
        Ok(())
    } else {
        Err(fail(1, "design check failed".into()))
    }
}

/// Continued-fraction rationalization with denominators up to 10^6.
fn rationalize(x: f64) -> Option<(i64, i64)> {
    let mut h = (1i64, 0i64);
    let mut k = (0i64, 1i64);
    let mut v = x;
    for _ in 0..40 {
        let a = v.floor() as i64;
        h = (a.checked_mul(h.0)?.checked_add(h.1)?, h.0);
        k = (a.checked_mul(k.0)?.checked_add(k.1)?, k.0);
        if k.0 > 1_000_000 {
            return None;
        }
        let approx = h.0 as f64 / k.0 as f64;
        if (approx - x).abs() < 1e-12 * x.abs().max(1.0) {
            return Some((h.0, k.0));
        }
        let frac = v - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    None
}

fn simulate(
    design_path: &Path,
    system_path: &Path,
    sigma_path: &Path,
    n: usize,
    out: &Path,
    seed: u64,
) -> AppResult<()> {
    let design = load_design(design_path)?;
    let model: ModelFile = read_json(system_path)?;
    let system = TrueSystem::Lmfd(model.to_model().or_config("system model")?);
    let sigma: SigmaFile = read_json(sigma_path)?;
    let noise = NoiseModel::new(sigma.to_matrix().or_config("sigma file")?)
        .or_failed("noise covariance must be positive definite")?;
    let dataset =
        simulate_dataset(&system, &design, &noise, n, seed).or_failed("simulation failed")?;

    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .or_config("cannot create output directory")?;
    let mut files = Vec::new();
    for (i, y) in dataset.outputs().iter().enumerate() {
        let name = format!("experiment_{:03}.csv", i + 1);
        let mut header = vec!["t".to_string()];
        for q in 0..dataset.n_y() {
            header.push(format!("y{}", q + 1));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut row = vec![(k + 1) as f64 * design.h()];
                for q in 0..dataset.n_y() {
                    row.push(y[(k, q)]);
                }
                row
            })
            .collect();
        write_csv(&out.join(&name), &header_refs, &rows).or_config("writing record CSV")?;
        files.push(name);
    }
    let sidecar = DatasetFile {
        design: DesignFile::from_design(&design),
        sigma: msid_core::files::matrix_to_rows(dataset.sigma()),
        seed,
        n,
        files,
    };
    write_json(&out.join("dataset.json"), &sidecar)?;
    println!("wrote {} experiments to {}", dataset.outputs().len(), out.display());
    Ok(())
}

fn load_dataset(dir: &Path, sigma_override: Option<&Path>) -> AppResult<Dataset> {
    let sidecar: DatasetFile = read_json(&dir.join("dataset.json"))?;
    let design = sidecar
        .design
        .to_design()
        .or_config("design in dataset.json")?;
    let sigma = match sigma_override {
        Some(path) => read_json::<SigmaFile>(path)?
            .to_matrix()
            .or_config("sigma override")?,
        None => msid_core::files::rows_to_matrix(&sidecar.sigma, "sigma")
            .or_config("sigma in dataset.json")?,
    };
    let mut outputs = Vec::new();
    for name in &sidecar.files {
        let (_, rows) = read_csv(&dir.join(name)).or_config("reading record CSV")?;
        if rows.len() != sidecar.n {
            return Err(fail(
                2,
                format!("{name}: {} rows, sidecar says N = {}", rows.len(), sidecar.n),
            ));
        }
        let n_y = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        let y = DMatrix::from_fn(sidecar.n, n_y, |k, q| rows[k][q + 1]);
        outputs.push(y);
    }
    Dataset::from_records(design, sigma, outputs).or_config("dataset records inconsistent")
}

fn estimate_frf(
    data: &Path,
    sigma_override: Option<&Path>,
    out: &Path,
    sweep: Option<Vec<f64>>,
) -> AppResult<()> {
    let dataset = load_dataset(data, sigma_override)?;
    let est = ls_estimate(&dataset).or_failed("least-squares estimation failed")?;
    if est.is_ill_conditioned() {
        eprintln!(
            "warning: normal-equation condition number {:.3e} above 1e12; \
             estimates may be unreliable",
            est.normal_condition()
        );
    }
    let file = FrfFile::from_estimate(&est).or_failed("serializing estimate")?;
    write_json(out, &file)?;
    if let Some(args) = sweep {
        let (w_min, w_max, points) = (args[0], args[1], args[2] as usize);
        if points < 2 || w_max <= w_min || w_max.is_nan() || w_min.is_nan() {
            return Err(fail(2, "sweep needs w_min < w_max and points >= 2".into()));
        }
        let mut header = vec!["omega".to_string()];
        for q in 0..est.n_y() {
            for p in 0..est.n_u() {
                header.push(format!("re_{}{}", q + 1, p + 1));
                header.push(format!("im_{}{}", q + 1, p + 1));
            }
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = (0..points)
            .map(|k| {
                let w = w_min + (w_max - w_min) * k as f64 / (points - 1) as f64;
                let g = est.interpolate(w);
                let mut row = vec![w];
                for q in 0..est.n_y() {
                    for p in 0..est.n_u() {
                        row.push(g[(q, p)].re);
                        row.push(g[(q, p)].im);
                    }
                }
                row
            })
            .collect();
        let sweep_path = out.with_file_name(format!(
            "{}_sweep.csv",
            out.file_stem().and_then(|s| s.to_str()).unwrap_or("frf")
        ));
        write_csv(&sweep_path, &header_refs, &rows).or_config("writing sweep CSV")?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(serde::Deserialize)]
struct ThetaFile {
    theta: Vec<f64>,
}

fn fit_to_file(result: &FitResult) -> FitFile {
    FitFile {
        theta: result.theta.iter().copied().collect(),
        cost: result.cost,
        status: match result.status {
            FitStatus::ClosedForm => "closed_form".into(),
            FitStatus::Converged => "converged".into(),
            FitStatus::MaxIter => "max_iter".into(),
        },
        kernel: result.kernel.as_ref().map(|k| {
            (0..k.nrows())
                .map(|i| (0..k.ncols()).map(|j| k[(i, j)]).collect())
                .collect()
        }),
        iterations: result.iterations,
        gradient_norm: result.gradient_norm,
    }
}

#[allow(clippy::too_many_arguments)]
fn fit(
    frf_path: &Path,
    structure: &str,
    nd: usize,
    nn: usize,
    method: &str,
    init: Option<&Path>,
    out: &Path,
    seed: u64,
) -> AppResult<()> {
    if structure != "lmfd" {
        return Err(fail(2, format!("unsupported structure {structure:?}")));
    }
    let file: FrfFile = read_json(frf_path)?;
    let est = file.to_estimate().or_config("FRF file inconsistent")?;
    let gms = est.stack();
    let result = match method {
        "closed" => fit_lmfd_closed_form(gms, nd, nn).or_failed("closed-form fit failed")?,
        "levy" => fit_levy(gms, nd, nn, None).or_failed("Levy fit failed")?,
        "iter" => {
            let structure = LmfdStructure::new(est.n_y(), est.n_u(), nd, nn);
            let theta0 = match init {
                Some(path) => {
                    let t: ThetaFile = read_json(path)?;
                    if t.theta.len() != structure.n_theta() {
                        return Err(fail(
                            2,
                            format!(
                                "init has {} parameters, structure needs {}",
                                t.theta.len(),
                                structure.n_theta()
                            ),
                        ));
                    }
                    DVector::from_vec(t.theta)
                }
                // Without an explicit start, seed the iterations with the
                // Levy baseline.
                None => fit_levy(gms, nd, nn, None)
                    .or_failed("Levy initialization failed")?
                    .theta,
            };
            let cov = est.covariance().or_failed("estimate covariance")?;
            let options = FitOptions {
                seed,
                ..FitOptions::default()
            };
            fit_iterative(gms, &cov, &structure, &theta0, &options)
                .or_failed("iterative fit failed")?
        }
        other => return Err(fail(2, format!("unknown method {other:?}"))),
    };
    write_json(out, &fit_to_file(&result))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn bounds(
    design_path: &Path,
    sigma_path: &Path,
    n: usize,
    delta: f64,
    theta0: Option<&Path>,
    beta: Option<f64>,
    out: &Path,
) -> AppResult<()> {
    let design = load_design(design_path)?;
    let sigma = read_json::<SigmaFile>(sigma_path)?
        .to_matrix()
        .or_config("sigma file")?;
    let amps = msid_core::multisine::amplitude_matrices(&design);
    let sigma_min_j0 = match theta0 {
        Some(path) => {
            let model: ModelFile = read_json(path)?;
            let model = model.to_model().or_config("theta0 model")?;
            let structure = LmfdStructure::new(
                model.n_coeffs()[0].nrows(),
                model.n_coeffs()[0].ncols(),
                model.degree_d(),
                model.degree_n(),
            );
            let jac = structure
                .jacobian(&model.theta(), &design.line_set())
                .or_failed("Jacobian at theta0")?;
            Some(msid_core::linalg::min_singular_value(&jac))
        }
        None => None,
    };
    let inputs = BoundInputs {
        sigma: &sigma,
        amps: &amps,
        n,
        delta,
        sigma_min_j0,
        beta,
    };
    let report = bound_report(&inputs).or_failed("bound computation failed")?;
    write_json(
        out,
        &BoundsFile {
            frf_radius: report.frf_radius,
            theta_radius: report.theta_radius,
            mse_bound: report.mse_bound,
            gaussian_tail_radius: report.gaussian_tail_radius,
            delta: report.delta,
            n: report.n,
        },
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn montecarlo(
    scenario: &str,
    config: Option<&Path>,
    out: &Path,
    full: bool,
    seed: u64,
) -> AppResult<()> {
    match scenario {
        "fig2" => {
            let mut cfg: Fig2Config = match config {
                Some(path) => read_json(path)?,
                None => Fig2Config::default(),
            };
            if full {
                cfg = cfg.full_scale();
            }
            cfg.seed = seed;
            let summary = run_fig2(&cfg, Some(out)).or_failed("fig2 scenario failed")?;
            for row in &summary.per_n {
                println!(
                    "N = {:>4}: mean a1 = {:.4}, std = {:.4} (approx {:.4}), criterion {:.4}",
                    row.n, row.mean_a1, row.std_a1, row.approx_std, row.criterion
                );
            }
        }
        "fig3" => {
            let mut cfg: Fig3Config = match config {
                Some(path) => read_json(path)?,
                None => Fig3Config::default(),
            };
            if full {
                cfg = cfg.full_scale();
            }
            cfg.seed = seed;
            let summary = run_fig3(&cfg, Some(out)).or_failed("fig3 scenario failed")?;
            for row in &summary.rows {
                println!(
                    "N = {:>4}: q90 FRF = {:.4} (bound {:.4}), q90 theta = {:.4} (bound {:.4})",
                    row.n,
                    row.empirical_quantile_90_frf,
                    row.theoretical_frf_bound,
                    row.empirical_quantile_90_theta,
                    row.theoretical_theta_bound
                );
            }
        }
        "frf-stats" => {
            let mut cfg: FrfStatsConfig = match config {
                Some(path) => read_json(path)?,
                None => FrfStatsConfig::default(),
            };
            if full {
                cfg = cfg.full_scale();
            }
            cfg.seed = seed;
            let summary = run_frf_stats(&cfg, Some(out)).or_failed("frf-stats scenario failed")?;
            println!(
                "runs = {}: max standardized bias {:.3}, covariance error {:.4}, max cross z {:.3}",
                summary.runs,
                summary.max_standardized_bias,
                summary.covariance_rel_error,
                summary.max_cross_z
            );
        }
        other => return Err(fail(2, format!("unknown scenario {other:?}"))),
    }
    Ok(())
}
