use nalgebra::{DMatrix, DVector};

use super::{rbf, HyperParams, Metrics, ModelKind, RegressError, Scaler, TrainedModel, Weights, MODEL_FORMAT_VERSION};

pub const LASSO_TOLERANCE: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;
const RANK_TOLERANCE: f64 = 1e-10;

/// Fits one model. Features are z-scored internally and the intercept is
/// the target mean.
///
/// * ridge minimizes `||y - Xw||^2 + lambda ||w||^2`;
/// * lasso minimizes `(1/2n) ||y - Xw||^2 + lambda ||w||_1` by cyclic
///   coordinate descent;
/// * kernel ridge solves `(K + lambda I) alpha = y - mean(y)` with
///   `K = exp(-gamma ||x - x'||^2)`.
pub fn fit(kind: ModelKind, x: &[Vec<f64>], y: &[f64], hp: HyperParams) -> Result<TrainedModel, RegressError> {
    let n = x.len();
    if n != y.len() {
        return Err(RegressError::DimensionMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(RegressError::TooFewSamples { needed: 2, got: n });
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(RegressError::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    if !(hp.lambda >= 0.0 && hp.lambda.is_finite()) {
        return Err(RegressError::InvalidHyperparameter(format!("lambda = {}", hp.lambda)));
    }
    let scaler = Scaler::fit(x);
    let z: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
    let intercept = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let active: Vec<usize> = (0..d).filter(|&j| !scaler.is_masked(j)).collect();

    let (weights, hyperparams) = match kind {
        ModelKind::Ridge => (
            Weights::Linear {
                coef: ridge(&z, &yc, &active, d, hp.lambda)?,
            },
            HyperParams {
                lambda: hp.lambda,
                gamma: None,
            },
        ),
        ModelKind::Lasso => (
            Weights::Linear {
                coef: lasso(&z, &yc, &active, d, hp.lambda)?,
            },
            HyperParams {
                lambda: hp.lambda,
                gamma: None,
            },
        ),
        ModelKind::KernelRidge => {
            let gamma = hp.gamma.unwrap_or(1.0 / d.max(1) as f64);
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(RegressError::InvalidHyperparameter(format!("gamma = {gamma}")));
            }
            (
                Weights::Dual {
                    alpha: kernel_ridge(&z, &yc, gamma, hp.lambda)?,
                    train: z,
                },
                HyperParams {
                    lambda: hp.lambda,
                    gamma: Some(gamma),
                },
            )
        }
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        kind,
        hyperparams,
        scaler,
        intercept,
        weights,
        property: None,
        unit: None,
        schema: None,
        target_range: None,
        metrics: Metrics::default(),
    })
}

fn design(z: &[Vec<f64>], active: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(z.len(), active.len(), |i, j| z[i][active[j]])
}

fn ridge(z: &[Vec<f64>], yc: &[f64], active: &[usize], d: usize, lambda: f64) -> Result<Vec<f64>, RegressError> {
    let mut coef = vec![0.0; d];
    if active.is_empty() {
        return Ok(coef);
    }
    let a = design(z, active);
    let b = DVector::from_column_slice(yc);
    let w = if lambda == 0.0 {
        let svd = a.clone().svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        if active.len() > z.len() || max == 0.0 || min <= RANK_TOLERANCE * max {
            return Err(RegressError::SingularSystem);
        }
        svd.solve(&b, 0.0).map_err(|_| RegressError::SingularSystem)?
    } else {
        let mut gram = a.transpose() * &a;
        for i in 0..active.len() {
            gram[(i, i)] += lambda;
        }
        let rhs = a.transpose() * b;
        gram.cholesky().ok_or(RegressError::SingularSystem)?.solve(&rhs)
    };
    for (k, &j) in active.iter().enumerate() {
        coef[j] = w[k];
    }
    Ok(coef)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn lasso(z: &[Vec<f64>], yc: &[f64], active: &[usize], d: usize, lambda: f64) -> Result<Vec<f64>, RegressError> {
    let n = z.len() as f64;
    let mut coef = vec![0.0; d];
    // Column-major copy of the active features for cache-friendly sweeps.
    let cols: Vec<Vec<f64>> = active.iter().map(|&j| z.iter().map(|r| r[j]).collect()).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
    let mut residual = yc.to_vec();
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for (k, &j) in active.iter().enumerate() {
            let col = &cols[k];
            let old = coef[j];
            let rho = col.iter().zip(&residual).map(|(x, r)| x * r).sum::<f64>() / n + norms[k] * old;
            let new = soft_threshold(rho, lambda) / norms[k];
            if new != old {
                let delta = new - old;
                for (r, x) in residual.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                coef[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < LASSO_TOLERANCE {
            return Ok(coef);
        }
    }
    Err(RegressError::NonConvergence(LASSO_MAX_SWEEPS))
}

fn kernel_ridge(z: &[Vec<f64>], yc: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>, RegressError> {
    let n = z.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| rbf(gamma, &z[i], &z[j]));
    for i in 0..n {
        k[(i, i)] += lambda;
    }
    let b = DVector::from_column_slice(yc);
    let alpha = match k.clone().cholesky() {
        Some(c) => c.solve(&b),
        None => k.lu().solve(&b).ok_or(RegressError::SingularSystem)?,
    };
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(RegressError::SingularSystem);
    }
    Ok(alpha.iter().copied().collect())
}
