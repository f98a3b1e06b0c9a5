//! Orthonormal daily basis per modality and coefficient expansion.
//!
//! The basis diagonalizes the correlation matrix `C = (1/N) * sum(v * v^T)`
//! of the normalized training days. Working with the 144x144 correlation
//! matrix instead of the N x 144 data matrix keeps memory fixed regardless
//! of training-set size while producing the same spectrum.
//!
//! All inner products are taken in the RMS sense, `<x,y> = (1/144) * sum`,
//! and stored eigenvectors have unit RMS norm, so a day equal to eigenvector
//! `k` expands to a coefficient of exactly 1.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::ingest::Modality;
use crate::preprocess::{NormalizedDayVector, SLOTS_PER_DAY};

/// Components kept in the day expansion, after the daily mean.
pub const DEFAULT_COMPONENTS: usize = 4;

pub const MODEL_FORMAT: &str = "diurnal-day-basis";
pub const MODEL_VERSION: u32 = 1;

/// Provenance of a trained basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub modality: Modality,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub sensor_count: usize,
    pub day_count: usize,
}

/// Ordered eigenpairs of the daily correlation matrix for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub modality: Modality,
    pub dim: usize,
    /// Unit-RMS eigenvectors, descending eigenvalue order, sign-fixed.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Non-negative eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue over trace, sums to 1.
    pub variance_fraction: Vec<f64>,
    pub training_meta: TrainingMeta,
}

/// Expansion of one sensor-day over a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCoefficients {
    pub sensor_id: String,
    pub day: NaiveDate,
    /// Daily mean (zeroth coefficient).
    pub e0: f64,
    /// RMS divided out during normalization; needed to reconstruct.
    pub rms: f64,
    /// Projection coefficients onto the first K eigenvectors.
    pub e: Vec<f64>,
    /// RMS norm of the day minus its K-component reconstruction.
    pub residual_norm: f64,
}

fn rms_dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n
}

/// Builds the basis from normalized training days.
pub fn build_basis(days: &[NormalizedDayVector]) -> Result<PcaBasis> {
    if days.len() < 2 {
        return Err(Error::InsufficientData {
            need: 2,
            got: days.len(),
        });
    }
    let dim = SLOTS_PER_DAY;
    for d in days {
        if d.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.values.len(),
            });
        }
    }

    let n = days.len() as f64;
    let mut corr = vec![0.0f64; dim * dim];
    for d in days {
        let v = &d.values;
        for i in 0..dim {
            let vi = v[i];
            for j in i..dim {
                corr[i * dim + j] += vi * v[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let c = corr[i * dim + j] / n;
            corr[i * dim + j] = c;
            corr[j * dim + i] = c;
        }
    }

    let eig = eigen::eigen_symmetric(&corr, dim)?.into_sorted_descending();
    let eigenvalues: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let trace: f64 = eigenvalues.iter().sum();
    if trace <= 0.0 {
        return Err(Error::InvalidConfig(
            "training correlation matrix has zero trace".into(),
        ));
    }
    let variance_fraction: Vec<f64> = eigenvalues.iter().map(|&l| l / trace).collect();
    let scale = (dim as f64).sqrt();
    let eigenvectors: Vec<Vec<f64>> = eig
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * scale).collect())
        .collect();

    let mut sensors: Vec<&str> = days.iter().map(|d| d.sensor_id.as_str()).collect();
    sensors.sort_unstable();
    sensors.dedup();
    let training_meta = TrainingMeta {
        modality: days[0].modality,
        first_day: days.iter().map(|d| d.day).min().unwrap(),
        last_day: days.iter().map(|d| d.day).max().unwrap(),
        sensor_count: sensors.len(),
        day_count: days.len(),
    };

    Ok(PcaBasis {
        modality: days[0].modality,
        dim,
        eigenvectors,
        eigenvalues,
        variance_fraction,
        training_meta,
    })
}

/// Expands a normalized day over the first `k` eigenvectors.
pub fn project(day: &NormalizedDayVector, basis: &PcaBasis, k: usize) -> Result<DayCoefficients> {
    if day.values.len() != basis.dim {
        return Err(Error::DimensionMismatch {
            expected: basis.dim,
            got: day.values.len(),
        });
    }
    if k == 0 || k > basis.dim {
        return Err(Error::InvalidConfig(format!(
            "component count must be in 1..={}, got {k}",
            basis.dim
        )));
    }
    let e: Vec<f64> = (0..k)
        .map(|i| rms_dot(&day.values, &basis.eigenvectors[i]))
        .collect();
    let mut residual = day.values.clone();
    for (i, &coef) in e.iter().enumerate() {
        for (r, &v) in residual.iter_mut().zip(&basis.eigenvectors[i]) {
            *r -= coef * v;
        }
    }
    let residual_norm = rms_dot(&residual, &residual).max(0.0).sqrt();
    Ok(DayCoefficients {
        sensor_id: day.sensor_id.clone(),
        day: day.day,
        e0: day.daily_mean,
        rms: day.rms,
        e,
        residual_norm,
    })
}

/// Reconstructs a day in original units from its coefficients.
pub fn reconstruct(coeffs: &DayCoefficients, basis: &PcaBasis) -> Result<Vec<f64>> {
    if coeffs.e.len() > basis.dim {
        return Err(Error::DimensionMismatch {
            expected: basis.dim,
            got: coeffs.e.len(),
        });
    }
    let mut out = vec![coeffs.e0; basis.dim];
    for (i, &coef) in coeffs.e.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(&basis.eigenvectors[i]) {
            *o += coeffs.rms * coef * v;
        }
    }
    Ok(out)
}

/// Share of total variance captured by the first `k` components.
pub fn variance_explained(basis: &PcaBasis, k: usize) -> f64 {
    basis.variance_fraction.iter().take(k).sum()
}

/// Expands one raw day (slot means in original units) over the basis:
/// centering, normalization and projection in one step.
pub fn expand_raw_day(basis: &PcaBasis, slots: &[f64], k: usize) -> Result<DayCoefficients> {
    if slots.len() != basis.dim {
        return Err(Error::DimensionMismatch {
            expected: basis.dim,
            got: slots.len(),
        });
    }
    let (values, daily_mean, rms) =
        crate::preprocess::center_normalize_values(slots).map_err(|_| Error::DegenerateDay {
            sensor: String::new(),
            day: NaiveDate::MIN,
        })?;
    let day = NormalizedDayVector {
        sensor_id: String::new(),
        modality: basis.modality,
        day: NaiveDate::MIN,
        values,
        daily_mean,
        rms,
    };
    project(&day, basis, k)
}

impl PcaBasis {
    /// Checks structural invariants: dimensions, ordering, non-negativity,
    /// fraction sum, and pairwise RMS orthonormality.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim;
        if self.eigenvectors.len() != dim
            || self.eigenvalues.len() != dim
            || self.variance_fraction.len() != dim
        {
            return Err(Error::BadModel("inconsistent component counts".into()));
        }
        for v in &self.eigenvectors {
            if v.len() != dim {
                return Err(Error::BadModel("eigenvector of wrong length".into()));
            }
        }
        for w in self.eigenvalues.windows(2) {
            if w[0] < w[1] {
                return Err(Error::BadModel("eigenvalues not descending".into()));
            }
        }
        if self.eigenvalues.iter().any(|&l| l < 0.0) {
            return Err(Error::BadModel("negative eigenvalue".into()));
        }
        let s: f64 = self.variance_fraction.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::BadModel(format!(
                "variance fractions sum to {s}, expected 1"
            )));
        }
        for i in 0..dim {
            for j in i..dim {
                let dot = rms_dot(&self.eigenvectors[i], &self.eigenvectors[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-9 {
                    return Err(Error::BadModel(format!(
                        "eigenvectors {i},{j} not orthonormal (dot {dot})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_model_file(&self, config: Option<serde_json::Value>) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config,
            modality: self.modality,
            dim: self.dim,
            eigenvalues: self.eigenvalues.clone(),
            variance_fraction: self.variance_fraction.clone(),
            training_meta: self.training_meta.clone(),
            eigenvectors: self.eigenvectors.clone(),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<PcaBasis> {
        if file.format != MODEL_FORMAT {
            return Err(Error::BadModel(format!("unknown format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::BadModel(format!(
                "unsupported version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let basis = PcaBasis {
            modality: file.modality,
            dim: file.dim,
            eigenvectors: file.eigenvectors,
            eigenvalues: file.eigenvalues,
            variance_fraction: file.variance_fraction,
            training_meta: file.training_meta,
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn save_json(&self, path: &Path, config: Option<serde_json::Value>) -> Result<()> {
        let mut text = serde_json::to_string(&self.to_model_file(config))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<(PcaBasis, Option<serde_json::Value>)> {
        let file: ModelFile = serde_json::from_str(text)?;
        let config = file.config.clone();
        Ok((Self::from_model_file(file)?, config))
    }

    pub fn load_json(path: &Path) -> Result<(PcaBasis, Option<serde_json::Value>)> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model document. Numbers are written in shortest round-trip
/// decimal form, so loading restores the exact bit pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub modality: Modality,
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub variance_fraction: Vec<f64>,
    pub training_meta: TrainingMeta,
    pub eigenvectors: Vec<Vec<f64>>,
}
