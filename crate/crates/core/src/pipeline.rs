//! Orchestration: dataset featurization, outer/inner cross-validation,
//! and report generation shared by the CLI.

use ndarray::Array2;
use rayon::prelude::*;

use crate::config::{Representation, RunConfig};
use crate::coulomb;
use crate::data::{assign_folds_labels, planarize, Dataset};
use crate::density::{rasterize, ProfileSet};
use crate::dict::{fourier, scattering, wavelet};
use crate::error::{DataError, PipelineError};
use crate::ols::{self, FeatureMatrix};
use crate::signal::{BankParams, FilterBank};

/// Featurization output: design matrix, labels, and how many molecules
/// were skipped as non-planar.
pub struct Featurized {
    pub matrix: FeatureMatrix<f64>,
    pub labels: Vec<f64>,
    pub skipped: usize,
}

/// Schema identifiers for the configured representation.
pub fn schema_for(cfg: &RunConfig) -> Result<Vec<String>, PipelineError> {
    let ids = match cfg.representation {
        Representation::Fourier => fourier::fourier_schema(cfg.resolution),
        Representation::Wavelet => wavelet::wavelet_schema(cfg.resolution),
        Representation::Scattering => scattering::scattering_schema(cfg.resolution, cfg.angles),
        Representation::Coulomb => {
            return Err(PipelineError::ConfigValue(
                "the coulomb baseline has no feature schema; use the krr pipeline".into(),
            ))
        }
    };
    Ok(ids.iter().map(|id| id.to_string()).collect())
}

/// Rasterize and extract features for every molecule, in parallel.
/// Non-planar molecules are skipped unless `strict` is set.
pub fn featurize_dataset(
    dataset: &Dataset,
    cfg: &RunConfig,
    strict: bool,
) -> Result<Featurized, PipelineError> {
    let schema = schema_for(cfg)?;
    let profiles = ProfileSet::<f64>::slater_defaults();
    let bank = match cfg.representation {
        Representation::Wavelet | Representation::Scattering => Some(FilterBank::<f64>::new(
            BankParams {
                resolution: cfg.resolution,
                angles: cfg.angles,
                slant: cfg.slant,
                xi: cfg.xi,
            },
        )?),
        _ => None,
    };

    let results: Vec<Result<Option<(Vec<f64>, f64)>, PipelineError>> = dataset
        .molecules
        .par_iter()
        .enumerate()
        .map(|(index, m)| {
            let label = m
                .label()
                .ok_or(PipelineError::Data(DataError::MissingLabel { index }))?;
            let planar = match planarize(m, cfg.planar_tol) {
                Ok(p) => p,
                Err(DataError::NonPlanar { deviation, tol }) => {
                    if strict {
                        return Err(DataError::NonPlanar { deviation, tol }.into());
                    }
                    return Ok(None);
                }
                Err(e) => return Err(e.into()),
            };
            let grid = rasterize(&planar, &profiles, cfg.box_half_width, cfg.resolution)?;
            let values = match cfg.representation {
                Representation::Fourier => {
                    let reduce = if cfg.fourier_bin_mean {
                        fourier::BinReduce::Mean
                    } else {
                        fourier::BinReduce::Sum
                    };
                    fourier::fourier_features_with(&grid, reduce)?.values
                }
                Representation::Wavelet => {
                    wavelet::wavelet_features(&grid, bank.as_ref().expect("bank"))?.values
                }
                Representation::Scattering => {
                    scattering::scattering_features(&grid, bank.as_ref().expect("bank"))?.values
                }
                Representation::Coulomb => unreachable!("rejected by schema_for"),
            };
            Ok(Some((values, label)))
        })
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = 0usize;
    for r in results {
        match r? {
            Some((v, y)) => {
                rows.push(v);
                labels.push(y);
            }
            None => skipped += 1,
        }
    }
    let d = schema.len();
    let mut flat = Vec::with_capacity(rows.len() * d);
    for r in &rows {
        debug_assert_eq!(r.len(), d);
        flat.extend_from_slice(r);
    }
    let matrix = Array2::from_shape_vec((rows.len(), d), flat)
        .map_err(|e| PipelineError::CorruptCache(e.to_string()))?;
    Ok(Featurized { matrix: FeatureMatrix::new(matrix, schema)?, labels, skipped })
}

/// Per-fold fitted hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSummary {
    pub fold: usize,
    pub chosen_m: Option<usize>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
}

/// Cross-validation outcome with per-molecule held-out predictions.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub truths: Vec<f64>,
    pub predictions: Vec<f64>,
    pub fold_of: Vec<usize>,
    pub folds: Vec<FoldSummary>,
    pub mae: f64,
    pub rmse: f64,
    /// (log2 M, 0.5 log2 mean squared validation error) rows.
    pub decay: Vec<(f64, f64)>,
}

/// Outer k-fold CV over the feature matrix; the inner CV on each training
/// remainder selects the model order.
pub fn cv_ols(x: &FeatureMatrix<f64>, y: &[f64], cfg: &RunConfig) -> Result<CvReport, PipelineError> {
    let n = x.rows.nrows();
    if y.len() != n {
        return Err(PipelineError::LabelMismatch { rows: n, labels: y.len() });
    }
    let outer = assign_folds_labels(y, cfg.n_folds, cfg.seed)?;
    let mut predictions = vec![0.0f64; n];
    let mut folds = Vec::new();
    let m_max = cfg.m_max;
    let mut decay_sq = vec![0.0f64; m_max];
    let mut decay_counts = vec![0usize; m_max];

    for fold in 0..outer.n_folds {
        let held = outer.fold_indices(fold);
        let train: Vec<usize> = (0..n).filter(|i| outer.fold_of[*i] != fold).collect();
        let x_train = FeatureMatrix::new(
            x.rows.select(ndarray::Axis(0), &train),
            x.schema.clone(),
        )?;
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let inner_k = (cfg.n_folds - 1).max(2);
        let inner = assign_folds_labels(&y_train, inner_k, cfg.seed.wrapping_add(1 + fold as u64))?;
        let (m_star, curve) = ols::select_model_order(&x_train, &y_train, &inner, m_max)?;
        for (m, c) in curve.iter().enumerate() {
            if *c > 0.0 {
                decay_sq[m] += c * c;
                decay_counts[m] += 1;
            }
        }
        let path = ols::ols_fit(&x_train, &y_train, m_star)?;
        let eff = m_star.min(path.len());
        let mut preds = Vec::with_capacity(held.len());
        for &i in &held {
            let p = path.predict_row(x.rows.row(i).to_slice().expect("contiguous row"), eff);
            predictions[i] = p;
            preds.push(p);
        }
        let truths: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        let (mae, rmse) = ols::metrics(&preds, &truths)?;
        folds.push(FoldSummary {
            fold,
            chosen_m: Some(eff),
            sigma: None,
            lambda: None,
            mae,
            rmse,
        });
    }

    let (mae, rmse) = ols::metrics(&predictions, y)?;
    let decay = (0..m_max)
        .filter(|&m| decay_counts[m] > 0)
        .map(|m| {
            let mean_sq = decay_sq[m] / decay_counts[m] as f64;
            (((m + 1) as f64).log2(), 0.5 * mean_sq.max(1e-300).log2())
        })
        .collect();
    Ok(CvReport {
        truths: y.to_vec(),
        predictions,
        fold_of: outer.fold_of,
        folds,
        mae,
        rmse,
        decay,
    })
}

/// Outer k-fold CV for the Coulomb/KRR baseline; the inner grid search
/// selects (sigma, lambda) per fold.
pub fn cv_krr(dataset: &Dataset, cfg: &RunConfig) -> Result<CvReport, PipelineError> {
    let y = dataset.labels()?;
    let n = y.len();
    let k_max = dataset.molecules.iter().map(|m| m.len()).max().unwrap_or(0);
    let copies: Vec<Vec<Vec<f64>>> = dataset
        .molecules
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let c = coulomb::coulomb_matrix::<f64>(m, k_max)?;
            Ok(coulomb::random_sorted_copies(
                &c,
                cfg.krr_copies,
                cfg.krr_noise,
                cfg.seed.wrapping_add(i as u64),
            ))
        })
        .collect::<Result<_, PipelineError>>()?;

    let outer = assign_folds_labels(&y, cfg.n_folds, cfg.seed)?;
    let mut predictions = vec![0.0f64; n];
    let mut folds = Vec::new();
    for fold in 0..outer.n_folds {
        let held = outer.fold_indices(fold);
        let train_idx: Vec<usize> = (0..n).filter(|i| outer.fold_of[*i] != fold).collect();
        let train_copies: Vec<Vec<Vec<f64>>> =
            train_idx.iter().map(|&i| copies[i].clone()).collect();
        let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let inner_k = (cfg.n_folds - 1).max(2);
        let inner = assign_folds_labels(&y_train, inner_k, cfg.seed.wrapping_add(1 + fold as u64))?;
        let (sigma, lambda) = coulomb::grid_search(
            &train_copies,
            &y_train,
            &inner,
            &cfg.krr_sigma_grid,
            &cfg.krr_lambda_grid,
        )?;
        let mut flat_train = Vec::new();
        let mut flat_y = Vec::new();
        for (c, &yy) in train_copies.iter().zip(&y_train) {
            for copy in c {
                flat_train.push(copy.clone());
                flat_y.push(yy);
            }
        }
        let model = coulomb::krr_fit(&flat_train, &flat_y, sigma, lambda)?;
        let mut preds = Vec::with_capacity(held.len());
        for &i in &held {
            let p = coulomb::krr_predict(&model, &copies[i]);
            predictions[i] = p;
            preds.push(p);
        }
        let truths: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        let (mae, rmse) = ols::metrics(&preds, &truths)?;
        folds.push(FoldSummary {
            fold,
            chosen_m: None,
            sigma: Some(sigma),
            lambda: Some(lambda),
            mae,
            rmse,
        });
    }
    let (mae, rmse) = ols::metrics(&predictions, &y)?;
    Ok(CvReport {
        truths: y,
        predictions,
        fold_of: outer.fold_of,
        folds,
        mae,
        rmse,
        decay: Vec::new(),
    })
}

impl CvReport {
    /// Per-molecule truth, prediction, absolute error.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("index,fold,truth,prediction,abs_error\n");
        for i in 0..self.truths.len() {
            out.push_str(&format!(
                "{},{},{:.10e},{:.10e},{:.10e}\n",
                i,
                self.fold_of[i],
                self.truths[i],
                self.predictions[i],
                (self.predictions[i] - self.truths[i]).abs()
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("fold,chosen_m,sigma,lambda,mae,rmse\n");
        for f in &self.folds {
            out.push_str(&format!(
                "{},{},{},{},{:.10e},{:.10e}\n",
                f.fold,
                f.chosen_m.map(|m| m.to_string()).unwrap_or_default(),
                f.sigma.map(|s| format!("{s:.10e}")).unwrap_or_default(),
                f.lambda.map(|l| format!("{l:.10e}")).unwrap_or_default(),
                f.mae,
                f.rmse
            ));
        }
        out.push_str(&format!(",,,,{:.10e},{:.10e}\n", self.mae, self.rmse));
        out
    }

    pub fn decay_csv(&self) -> String {
        let mut out = String::from("log2_m,half_log2_mse\n");
        for (a, b) in &self.decay {
            out.push_str(&format!("{a:.10e},{b:.10e}\n"));
        }
        out
    }

    /// Median chosen model order across folds, when applicable.
    pub fn median_m(&self) -> Option<usize> {
        let mut ms: Vec<usize> = self.folds.iter().filter_map(|f| f.chosen_m).collect();
        if ms.is_empty() {
            return None;
        }
        ms.sort_unstable();
        Some(ms[ms.len() / 2])
    }
}

/// Markdown comparison table, one row per completed run.
pub fn compare_table(rows: &[(String, CvReport)]) -> String {
    let mut out = String::from("| representation | M | MAE | RMSE |\n|---|---|---|---|\n");
    for (name, report) in rows {
        let m = report
            .median_m()
            .map(|m| m.to_string())
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "| {name} | {m} | {:.4} | {:.4} |\n",
            report.mae, report.rmse
        ));
    }
    out
}
