use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, log_space, r2, HyperParams, ModelKind, RegressError, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            lambdas: log_space(1e-3, 1e3, 7),
            gammas: log_space(1e-3, 1e1, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub kinds: Vec<ModelKind>,
    pub grid: HyperGrid,
    pub folds: usize,
    pub seed: u64,
    /// Pins lambda to `grid.lambdas[i]` (the single user-facing
    /// generalization knob); gamma is still searched.
    #[serde(default)]
    pub lambda_index: Option<usize>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            kinds: ModelKind::ALL.to_vec(),
            grid: HyperGrid::default(),
            folds: 10,
            seed: 0,
            lambda_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub kind: ModelKind,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Mean validation R² over folds; `None` when a fold failed to fit.
    pub mean_r2: Option<f64>,
    pub std_r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub entries: Vec<CvEntry>,
    /// Index into `entries` of the winning configuration.
    pub selected: usize,
}

impl CvReport {
    pub fn best(&self) -> &CvEntry {
        &self.entries[self.selected]
    }
}

/// Fold index per sample: a seeded shuffle dealt round-robin.
pub(crate) fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (i, &idx) in order.iter().enumerate() {
        fold[idx] = i % folds;
    }
    fold
}

/// Exhaustive grid search over kinds and hyperparameters by k-fold CV.
/// The best mean validation R² wins; ties go to ridge, then lasso, then
/// kernel ridge, then the larger lambda. The winner is refit on all data.
pub fn cross_validate_select(
    x: &[Vec<f64>],
    y: &[f64],
    options: &CvOptions,
) -> Result<(TrainedModel, CvReport), RegressError> {
    let n = x.len();
    if options.folds < 2 || n < options.folds {
        return Err(RegressError::TooFewSamples {
            needed: options.folds.max(2),
            got: n,
        });
    }
    let lambdas: Vec<f64> = match options.lambda_index {
        Some(i) => vec![*options
            .grid
            .lambdas
            .get(i)
            .ok_or_else(|| RegressError::InvalidHyperparameter(format!("lambda index {i} out of range")))?],
        None => options.grid.lambdas.clone(),
    };
    let mut configs: Vec<(ModelKind, HyperParams)> = Vec::new();
    for &kind in &options.kinds {
        for &lambda in &lambdas {
            if kind == ModelKind::KernelRidge {
                for &gamma in &options.grid.gammas {
                    configs.push((kind, HyperParams { lambda, gamma: Some(gamma) }));
                }
            } else {
                configs.push((kind, HyperParams { lambda, gamma: None }));
            }
        }
    }
    if configs.is_empty() {
        return Err(RegressError::InvalidHyperparameter("empty search grid".into()));
    }
    let fold = fold_assignment(n, options.folds, options.seed);
    let entries: Vec<CvEntry> = configs
        .par_iter()
        .map(|&(kind, hp)| evaluate(kind, hp, x, y, &fold, options.folds))
        .collect();

    let rank = |e: &CvEntry| e.kind as u8;
    let mut selected: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        let Some(score) = e.mean_r2 else { continue };
        let better = match selected {
            None => true,
            Some(j) => {
                let best = &entries[j];
                let best_score = best.mean_r2.unwrap();
                if (score - best_score).abs() > 1e-12 * score.abs().max(best_score.abs()).max(1.0) {
                    score > best_score
                } else if rank(e) != rank(best) {
                    rank(e) < rank(best)
                } else {
                    e.lambda > best.lambda
                }
            }
        };
        if better {
            selected = Some(i);
        }
    }
    let selected = selected.ok_or(RegressError::SingularSystem)?;
    let (kind, hp) = configs[selected];
    let mut model = fit(kind, x, y, hp)?;
    model.metrics.cv_r2 = entries[selected].mean_r2;
    let predicted: Vec<f64> = x.iter().map(|r| model.predict_unchecked(r)).collect();
    model.metrics.train_r2 = r2(y, &predicted).ok();
    Ok((
        model,
        CvReport {
            folds: options.folds,
            seed: options.seed,
            entries,
            selected,
        },
    ))
}

fn evaluate(kind: ModelKind, hp: HyperParams, x: &[Vec<f64>], y: &[f64], fold: &[usize], folds: usize) -> CvEntry {
    let mut scores = Vec::with_capacity(folds);
    let mut error = None;
    for k in 0..folds {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold[i] == k {
                vx.push(x[i].clone());
                vy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        match fit(kind, &tx, &ty, hp) {
            Ok(m) => {
                let p: Vec<f64> = vx.iter().map(|r| m.predict_unchecked(r)).collect();
                // A validation fold with constant targets has no defined R².
                if let Ok(s) = r2(&vy, &p) {
                    scores.push(s);
                }
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let (mean_r2, std_r2) = if error.is_none() && !scores.is_empty() {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
        (Some(mean), Some(var.sqrt()))
    } else {
        (None, None)
    };
    CvEntry {
        kind,
        lambda: hp.lambda,
        gamma: hp.gamma,
        mean_r2,
        std_r2,
        error,
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;

    fn problem(seed: u64, n: usize, f: impl Fn(&[f64]) -> f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let y = x.iter().map(|r| f(r)).collect();
        (x, y)
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = fold_assignment(23, 10, 1);
        for k in 0..10 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == 2 || c == 3);
        }
        assert_eq!(f, fold_assignment(23, 10, 1));
        assert_ne!(f, fold_assignment(23, 10, 2));
    }

    #[test]
    fn linear_target_selects_linear_kind() {
        let (x, y) = problem(1, 60, |r| 3.0 * r[0]);
        let (m, report) = cross_validate_select(&x, &y, &CvOptions::default()).unwrap();
        assert_ne!(m.kind, ModelKind::KernelRidge);
        assert!(report.best().mean_r2.unwrap() > 0.999);
        assert_eq!(report.entries.len(), 7 + 7 + 35);
    }

    #[test]
    fn nonlinear_target_prefers_kernel() {
        let (x, y) = problem(2, 80, |r| (1.5 * r[0]).sin() + (r[1] * r[2]).cos());
        let (m, report) = cross_validate_select(&x, &y, &CvOptions::default()).unwrap();
        assert_eq!(m.kind, ModelKind::KernelRidge);
        let best_ridge = report
            .entries
            .iter()
            .filter(|e| e.kind == ModelKind::Ridge)
            .filter_map(|e| e.mean_r2)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(report.best().mean_r2.unwrap() > best_ridge);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, y) = problem(3, 40, |r| r[0] * r[0] - r[1]);
        let opts = CvOptions {
            seed: 9,
            ..Default::default()
        };
        let (_, a) = cross_validate_select(&x, &y, &opts).unwrap();
        let (_, b) = cross_validate_select(&x, &y, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_prefer_simpler_kind_then_larger_lambda() {
        // Constant features everywhere: every model predicts the mean.
        let x = vec![vec![1.0, 2.0]; 20];
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let opts = CvOptions {
            folds: 4,
            ..Default::default()
        };
        let (m, report) = cross_validate_select(&x, &y, &opts).unwrap();
        assert_eq!(m.kind, ModelKind::Ridge);
        assert_eq!(report.best().lambda, *opts.grid.lambdas.last().unwrap());
    }

    #[test]
    fn lambda_index_pins_lambda() {
        let (x, y) = problem(4, 30, |r| r[0]);
        let opts = CvOptions {
            lambda_index: Some(2),
            folds: 5,
            ..Default::default()
        };
        let (m, report) = cross_validate_select(&x, &y, &opts).unwrap();
        assert!(report.entries.iter().all(|e| e.lambda == opts.grid.lambdas[2]));
        assert_eq!(m.hyperparams.lambda, opts.grid.lambdas[2]);
    }

    #[test]
    fn too_few_samples() {
        let (x, y) = problem(5, 5, |r| r[0]);
        assert!(matches!(
            cross_validate_select(&x, &y, &CvOptions::default()),
            Err(RegressError::TooFewSamples { .. })
        ));
    }
}
