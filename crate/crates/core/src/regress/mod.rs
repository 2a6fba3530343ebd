//! Property regression: ridge, lasso and RBF kernel ridge on standardized
//! features, with grid search by k-fold cross-validation.

mod cv;
mod fit;
mod train;

use serde::{Deserialize, Serialize};

use crate::features::FeatureSchema;
use crate::graph::MolGraph;

pub use cv::{cross_validate_select, CvEntry, CvOptions, CvReport, HyperGrid};
pub use fit::fit;
pub use train::{evaluate_on, train_property_model, TrainError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("linear system is singular (lambda = 0 on rank-deficient features)")]
    SingularSystem,
    #[error("coordinate descent did not converge in {0} sweeps")]
    NonConvergence(usize),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("targets have zero variance")]
    ZeroVariance,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model has no feature schema")]
    MissingSchema,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Lasso,
    KernelRidge,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ridge, ModelKind::Lasso, ModelKind::KernelRidge];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::KernelRidge => "kernel_ridge",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model kind {s:?} (expected ridge, lasso or kernel_ridge)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    /// RBF width; kernel ridge only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// Per-feature z-scoring. Zero-variance features are masked to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const CONSTANT_EPS: f64 = 1e-12;

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Scaler {
        let n = x.len() as f64;
        let d = x.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for row in x {
            for j in 0..d {
                std[j] += (row[j] - mean[j]).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
            if *s < CONSTANT_EPS {
                *s = 0.0;
            }
        }
        Scaler { mean, std }
    }

    pub fn is_masked(&self, j: usize) -> bool {
        self.std[j] == 0.0
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| if self.is_masked(j) { 0.0 } else { (v - self.mean[j]) / self.std[j] })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Weights {
    /// Coefficients on standardized features.
    Linear { coef: Vec<f64> },
    /// Dual weights and the standardized training matrix they refer to.
    Dual { alpha: Vec<f64>, train: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub kind: ModelKind,
    pub hyperparams: HyperParams,
    pub scaler: Scaler,
    pub intercept: f64,
    pub weights: Weights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<FeatureSchema>,
    /// Acceptable prediction interval used to gate generation output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_range: Option<[f64; 2]>,
    #[serde(default)]
    pub metrics: Metrics,
}

impl TrainedModel {
    pub fn dimension(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressError> {
        if x.len() != self.dimension() {
            return Err(RegressError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        self.intercept
            + match &self.weights {
                Weights::Linear { coef } => coef.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>(),
                Weights::Dual { alpha, train } => {
                    let gamma = self.hyperparams.gamma.unwrap_or(1.0);
                    alpha.iter().zip(train).map(|(a, t)| a * rbf(gamma, t, &z)).sum::<f64>()
                }
            }
    }

    /// Encodes `g` with the attached schema and predicts.
    pub fn predict_graph(&self, g: &MolGraph) -> Result<f64, RegressError> {
        let schema = self.schema.as_ref().ok_or(RegressError::MissingSchema)?;
        self.predict(&schema.encode(g))
    }

    pub fn in_target(&self, prediction: f64) -> bool {
        match self.target_range {
            Some([lo, hi]) => prediction >= lo && prediction <= hi,
            None => true,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, ModelLoadError> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(RegressError::UnsupportedVersion(m.version).into());
        }
        Ok(m)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelLoadError {
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] RegressError),
}

pub(crate) fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(y: &[f64], predicted: &[f64]) -> Result<f64, RegressError> {
    if y.len() != predicted.len() {
        return Err(RegressError::DimensionMismatch {
            expected: y.len(),
            got: predicted.len(),
        });
    }
    if y.len() < 2 {
        return Err(RegressError::TooFewSamples { needed: 2, got: y.len() });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(RegressError::ZeroVariance);
    }
    let ss_res: f64 = y.iter().zip(predicted).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn r2_score(m: &TrainedModel, x: &[Vec<f64>], y: &[f64]) -> Result<f64, RegressError> {
    let predicted = x.iter().map(|row| m.predict(row)).collect::<Result<Vec<_>, _>>()?;
    r2(y, &predicted)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_arithmetic() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(r2(&[1.0, 1.0], &[1.0, 1.0]), Err(RegressError::ZeroVariance));
    }

    #[test]
    fn log_space_endpoints() {
        let g = log_space(1e-3, 1e3, 7);
        assert_eq!(g.len(), 7);
        for (v, e) in g.iter().zip([1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]) {
            assert!((v / e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_masks_constants() {
        let s = Scaler::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert!(s.is_masked(1));
        assert_eq!(s.transform(&[3.0, 9.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svr".parse::<ModelKind>().is_err());
    }
}
