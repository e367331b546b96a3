//! JSON representations of designs, models, covariances, and FRF estimates.
//!
//! Angles are radians, frequencies rad/s, matrices row-major nested arrays.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frf::FrfEstimate;
use crate::models::LmfdModel;
use crate::multisine::{ExcitationDesign, Experiment, FrequencyGrid};

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// One experiment of a design file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub offset: Vec<f64>,
    /// `M × n_u`, row per frequency line.
    pub amplitudes: Vec<Vec<f64>>,
    pub phases: Vec<Vec<f64>>,
}

/// Serialized excitation design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    pub frequencies_rad_s: Vec<f64>,
    pub h: f64,
    pub experiments: Vec<ExperimentFile>,
}

impl DesignFile {
    pub fn from_design(design: &ExcitationDesign) -> Self {
        Self {
            frequencies_rad_s: design.grid().omegas().to_vec(),
            h: design.h(),
            experiments: design
                .experiments()
                .iter()
                .map(|e| ExperimentFile {
                    offset: e.offset.iter().copied().collect(),
                    amplitudes: matrix_to_rows(&e.amplitudes),
                    phases: matrix_to_rows(&e.phases),
                })
                .collect(),
        }
    }

    pub fn to_design(&self) -> Result<ExcitationDesign> {
        let grid = FrequencyGrid::new(self.frequencies_rad_s.clone())?;
        let experiments = self
            .experiments
            .iter()
            .map(|e| {
                let n_u = e.offset.len();
                // An empty row list (DC-only design) still needs the input
                // dimension to shape up as 0 x n_u.
                let shape = |rows: &[Vec<f64>], what| {
                    if rows.is_empty() {
                        Ok(DMatrix::zeros(0, n_u))
                    } else {
                        rows_to_matrix(rows, what)
                    }
                };
                Ok(Experiment {
                    offset: DVector::from_vec(e.offset.clone()),
                    amplitudes: shape(&e.amplitudes, "amplitudes")?,
                    phases: shape(&e.phases, "phases")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ExcitationDesign::new(grid, self.h, experiments)
    }
}

/// Serialized matrix-fraction model; the polynomial degrees are implied by
/// the coefficient list lengths (`D` starts at degree 1, `N` at degree 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_y: usize,
    pub n_u: usize,
    #[serde(rename = "D")]
    pub d: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "N")]
    pub n: Vec<Vec<Vec<f64>>>,
}

impl ModelFile {
    pub fn from_model(model: &LmfdModel) -> Self {
        let (n_y, n_u) = (model.d_coeffs().first().map_or_else(
            || model.n_coeffs()[0].nrows(),
            |d| d.nrows(),
        ), model.n_coeffs()[0].ncols());
        Self {
            n_y,
            n_u,
            d: model.d_coeffs().iter().map(matrix_to_rows).collect(),
            n: model.n_coeffs().iter().map(matrix_to_rows).collect(),
        }
    }

    pub fn to_model(&self) -> Result<LmfdModel> {
        let d = self
            .d
            .iter()
            .map(|m| rows_to_matrix(m, "D coefficient"))
            .collect::<Result<Vec<_>>>()?;
        let n = self
            .n
            .iter()
            .map(|m| rows_to_matrix(m, "N coefficient"))
            .collect::<Result<Vec<_>>>()?;
        LmfdModel::new(self.n_y, self.n_u, d, n)
    }
}

/// Serialized noise covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaFile {
    pub sigma: Vec<Vec<f64>>,
}

impl SigmaFile {
    pub fn from_matrix(sigma: &DMatrix<f64>) -> Self {
        Self {
            sigma: matrix_to_rows(sigma),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.sigma, "sigma")
    }
}

/// Serialized FRF estimate: taps, line FRF (split into real and imaginary
/// parts), phasor Gram matrix, noise covariance, and per-line standard
/// deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrfFile {
    pub frequencies_rad_s: Vec<f64>,
    pub include_dc: bool,
    pub h: f64,
    pub n: usize,
    pub m: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub fir: Vec<Vec<f64>>,
    pub gms_re: Vec<Vec<f64>>,
    pub gms_im: Vec<Vec<f64>>,
    pub z_re: Vec<Vec<f64>>,
    pub z_im: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub line_std: Vec<Vec<f64>>,
    pub normal_condition: f64,
}

impl FrfFile {
    pub fn from_estimate(est: &FrfEstimate) -> Result<Self> {
        let gms = est.stack().values();
        Ok(Self {
            frequencies_rad_s: est.lines().grid().omegas().to_vec(),
            include_dc: est.lines().include_dc(),
            h: est.h(),
            n: est.n(),
            m: est.m(),
            n_u: est.n_u(),
            n_y: est.n_y(),
            fir: matrix_to_rows(est.fir()),
            gms_re: matrix_to_rows(&gms.map(|z| z.re)),
            gms_im: matrix_to_rows(&gms.map(|z| z.im)),
            z_re: matrix_to_rows(&est.z().map(|z| z.re)),
            z_im: matrix_to_rows(&est.z().map(|z| z.im)),
            sigma: matrix_to_rows(est.sigma()),
            line_std: matrix_to_rows(&est.line_std()?),
            normal_condition: est.normal_condition(),
        })
    }

    pub fn to_estimate(&self) -> Result<FrfEstimate> {
        let grid = FrequencyGrid::new(self.frequencies_rad_s.clone())?;
        let gms_re = rows_to_matrix(&self.gms_re, "gms_re")?;
        let gms_im = rows_to_matrix(&self.gms_im, "gms_im")?;
        let z_re = rows_to_matrix(&self.z_re, "z_re")?;
        let z_im = rows_to_matrix(&self.z_im, "z_im")?;
        let gms = DMatrix::from_fn(gms_re.nrows(), gms_re.ncols(), |i, j| {
            Complex64::new(gms_re[(i, j)], gms_im[(i, j)])
        });
        let z = DMatrix::from_fn(z_re.nrows(), z_re.ncols(), |i, j| {
            Complex64::new(z_re[(i, j)], z_im[(i, j)])
        });
        FrfEstimate::from_parts(
            grid,
            self.include_dc,
            self.h,
            self.n,
            self.m,
            rows_to_matrix(&self.fir, "fir")?,
            gms,
            z,
            rows_to_matrix(&self.sigma, "sigma")?,
            self.normal_condition,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FirstOrderSiso;
    use crate::sim::{simulate_dataset, NoiseModel, TrueSystem};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn sample_design() -> ExcitationDesign {
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

    #[test]
    fn dc_only_design_round_trips() {
        let grid = FrequencyGrid::new(vec![]).unwrap();
        let design = ExcitationDesign::new(
            grid,
            0.4,
            vec![
                Experiment {
                    offset: DVector::from_vec(vec![1.0, -0.5]),
                    amplitudes: DMatrix::zeros(0, 2),
                    phases: DMatrix::zeros(0, 2),
                },
                Experiment {
                    offset: DVector::from_vec(vec![0.2, 0.9]),
                    amplitudes: DMatrix::zeros(0, 2),
                    phases: DMatrix::zeros(0, 2),
                },
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&DesignFile::from_design(&design)).unwrap();
        let parsed: DesignFile = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_design().unwrap(), design);
    }

    #[test]
    fn design_json_round_trip() {
        let design = sample_design();
        let file = DesignFile::from_design(&design);
        let json = serde_json::to_string_pretty(&file).unwrap();
        let parsed: DesignFile = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_design().unwrap(), design);
    }

    #[test]
    fn model_json_round_trip_with_renamed_fields() {
        let model = LmfdModel::new(
            1,
            1,
            vec![DMatrix::from_element(1, 1, 1.0)],
            vec![DMatrix::from_element(1, 1, 2.0)],
        )
        .unwrap();
        let file = ModelFile::from_model(&model);
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.contains("\"D\""));
        assert!(json.contains("\"N\""));
        let parsed: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_model().unwrap(), model);
    }

    #[test]
    fn frf_json_round_trip() {
        let design = sample_design();
        let sys = TrueSystem::FirstOrder(FirstOrderSiso::new(1.0, 2.0));
        let noise = NoiseModel::new(DMatrix::from_element(1, 1, 0.25)).unwrap();
        let ds = simulate_dataset(&sys, &design, &noise, 30, 4).unwrap();
        let est = crate::frf::ls_estimate(&ds).unwrap();
        let file = FrfFile::from_estimate(&est).unwrap();
        let json = serde_json::to_string(&file).unwrap();
        let parsed: FrfFile = serde_json::from_str(&json).unwrap();
        let back = parsed.to_estimate().unwrap();
        assert!((back.stack().values() - est.stack().values()).norm() < 1e-12);
        assert!((back.z() - est.z()).norm() < 1e-12);
        assert!((back.fir() - est.fir()).norm() < 1e-12);
    }
}
