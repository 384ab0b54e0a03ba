//! Greedy orthogonal least squares forward selection with cross-validated
//! model order, plus the error metrics used throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;

use crate::data::FoldAssignment;
use crate::error::RegressionError;
use crate::scalar::{kdot, ksum, real, Real};

/// Squared-norm ratio under which a residualized candidate is considered
/// linearly dependent and permanently skipped.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-10;

/// Design matrix plus its feature identifiers.
#[derive(Debug, Clone)]
pub struct FeatureMatrix<T> {
    /// N molecules by D features; the intercept column is not stored.
    pub rows: Array2<T>,
    pub schema: Vec<String>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(rows: Array2<T>, schema: Vec<String>) -> Result<Self, RegressionError> {
        if schema.len() != rows.ncols() {
            return Err(RegressionError::LengthMismatch(schema.len(), rows.ncols()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFinite);
        }
        Ok(FeatureMatrix { rows, schema })
    }

    /// Per-column (mean, l2 norm) over rows.
    pub fn column_stats(&self) -> Vec<(T, T)> {
        let n = real::<T>(self.rows.nrows() as f64);
        (0..self.rows.ncols())
            .map(|j| {
                let col = self.rows.column(j);
                let mean = ksum(col.iter().copied()) / n;
                let norm = ksum(col.iter().map(|v| *v * *v)).sqrt();
                (mean, norm)
            })
            .collect()
    }
}

/// Result of the greedy forward selection over training rows. Column index
/// 0 is the implicit all-ones intercept; raw feature j sits at index j + 1.
#[derive(Debug, Clone)]
pub struct SelectionPath<T> {
    /// Selected augmented column indices, in selection order.
    pub selected: Vec<usize>,
    /// Orthonormal basis over training rows, one column per selection.
    pub q: Array2<T>,
    /// Upper-triangular `R = Q^T X_S` over the selected raw columns.
    pub r: Array2<T>,
    /// `w_m = <y, q_m>`.
    pub weights: Vec<T>,
    /// Training RMSE after each prefix.
    pub training_rmse: Vec<T>,
    /// Set when the path stopped before `M_max` (rank exhausted).
    pub truncation: Option<String>,
}

impl<T: Real> SelectionPath<T> {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Coefficients on the selected raw columns for the prefix of length
    /// `m`, by back substitution of `R beta = w`.
    pub fn prefix_coefficients(&self, m: usize) -> Vec<T> {
        assert!(m <= self.len());
        let mut beta = vec![T::zero(); m];
        for i in (0..m).rev() {
            let mut acc = self.weights[i];
            for j in (i + 1)..m {
                acc -= self.r[[i, j]] * beta[j];
            }
            beta[i] = acc / self.r[[i, i]];
        }
        beta
    }

    /// Prediction for one raw feature row (without intercept entry) using
    /// the length-`m` prefix.
    pub fn predict_row(&self, features: &[T], m: usize) -> T {
        let beta = self.prefix_coefficients(m);
        let mut acc = T::zero();
        for (pos, &col) in self.selected[..m].iter().enumerate() {
            let x = if col == 0 { T::one() } else { features[col - 1] };
            acc += beta[pos] * x;
        }
        acc
    }
}

/// Greedy orthogonal least squares with modified Gram-Schmidt
/// residualization. An all-ones intercept column is prepended at index 0
/// and competes like any feature. Candidates are unit-normalized before
/// the correlation comparison; ties break to the lowest column index.
pub fn ols_fit<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[T],
    m_max: usize,
) -> Result<SelectionPath<T>, RegressionError> {
    let n = x.rows.nrows();
    let d = x.rows.ncols();
    if n < 2 {
        return Err(RegressionError::TooFewRows { need: 2, got: n });
    }
    if y.len() != n {
        return Err(RegressionError::LengthMismatch(y.len(), n));
    }
    let m_max = m_max.min(n).min(d + 1);

    // Augmented candidate residuals, column-major.
    let mut resid: Vec<Vec<T>> = Vec::with_capacity(d + 1);
    resid.push(vec![T::one(); n]);
    for j in 0..d {
        resid.push(x.rows.column(j).to_vec());
    }
    let orig_sq: Vec<T> = resid.iter().map(|c| kdot(c, c)).collect();
    let threshold = real::<T>(DEPENDENCE_THRESHOLD);
    let mut active: Vec<bool> = orig_sq.iter().map(|&s| s > T::zero()).collect();

    let mut selected = Vec::new();
    let mut q_cols: Vec<Vec<T>> = Vec::new();
    let mut weights = Vec::new();
    let mut training_rmse = Vec::new();
    let mut truncation = None;
    let mut y_resid = y.to_vec();

    for _step in 0..m_max {
        let mut best: Option<(usize, T)> = None;
        for j in 0..=d {
            if !active[j] {
                continue;
            }
            let sq = kdot(&resid[j], &resid[j]);
            if sq <= threshold * orig_sq[j] {
                active[j] = false;
                continue;
            }
            let corr = (kdot(&y_resid, &resid[j]) / sq.sqrt()).abs();
            let better = match best {
                None => true,
                Some((_, b)) => corr > b,
            };
            if better {
                best = Some((j, corr));
            }
        }
        let Some((j, _)) = best else {
            truncation = Some("candidate rank exhausted".into());
            break;
        };

        let norm = kdot(&resid[j], &resid[j]).sqrt();
        let q: Vec<T> = resid[j].iter().map(|&v| v / norm).collect();
        let w = kdot(y, &q);
        for (yi, qi) in y_resid.iter_mut().zip(&q) {
            *yi -= w * *qi;
        }
        active[j] = false;
        selected.push(j);
        weights.push(w);
        training_rmse.push((kdot(&y_resid, &y_resid) / real::<T>(n as f64)).sqrt());

        for k in 0..=d {
            if !active[k] {
                continue;
            }
            let proj = kdot(&q, &resid[k]);
            for (rk, qi) in resid[k].iter_mut().zip(&q) {
                *rk -= proj * *qi;
            }
        }
        q_cols.push(q);
    }

    let m = selected.len();
    let mut q = Array2::zeros((n, m));
    for (c, col) in q_cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q[[i, c]] = v;
        }
    }
    let mut r = Array2::zeros((m, m));
    let ones = vec![T::one(); n];
    for (jpos, &col) in selected.iter().enumerate() {
        let raw: Vec<T> =
            if col == 0 { ones.clone() } else { x.rows.column(col - 1).to_vec() };
        for i in 0..=jpos {
            r[[i, jpos]] = kdot(&q_cols[i], &raw);
        }
    }

    Ok(SelectionPath { selected, q, r, weights, training_rmse, truncation })
}

/// Mean absolute error and root-mean-square error.
pub fn metrics<T: Real>(predictions: &[T], truths: &[T]) -> Result<(T, T), RegressionError> {
    if predictions.is_empty() {
        return Err(RegressionError::Empty);
    }
    if predictions.len() != truths.len() {
        return Err(RegressionError::LengthMismatch(predictions.len(), truths.len()));
    }
    let n = real::<T>(predictions.len() as f64);
    let mae = ksum(predictions.iter().zip(truths).map(|(&p, &t)| (p - t).abs())) / n;
    let rmse = (ksum(predictions.iter().zip(truths).map(|(&p, &t)| (p - t) * (p - t))) / n).sqrt();
    Ok((mae, rmse))
}

/// Cross-validated model-order selection: fit on each fold's complement,
/// score every prefix on the held-out fold, and take the argmin of the
/// mean validation RMSE (ties to the smallest order). Returns the chosen
/// order and the mean curve indexed by `m - 1`.
pub fn select_model_order<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[T],
    folds: &FoldAssignment,
    m_max: usize,
) -> Result<(usize, Vec<T>), RegressionError> {
    let n = x.rows.nrows();
    if folds.fold_of.len() != n {
        return Err(RegressionError::LengthMismatch(folds.fold_of.len(), n));
    }
    let mut curve = vec![T::zero(); m_max];
    let mut counts = vec![0usize; m_max];
    for fold in 0..folds.n_folds {
        let held: Vec<usize> = folds.fold_indices(fold);
        if held.is_empty() || held.len() == n {
            continue;
        }
        let train: Vec<usize> = (0..n).filter(|i| folds.fold_of[*i] != fold).collect();
        let sub = FeatureMatrix::new(
            x.rows.select(ndarray::Axis(0), &train),
            x.schema.clone(),
        )?;
        let y_train: Vec<T> = train.iter().map(|&i| y[i]).collect();
        let path = ols_fit(&sub, &y_train, m_max)?;
        for m in 1..=m_max {
            let eff = m.min(path.len());
            if eff == 0 {
                continue;
            }
            let preds: Vec<T> = held
                .iter()
                .map(|&i| {
                    path.predict_row(x.rows.row(i).to_slice().expect("contiguous row"), eff)
                })
                .collect();
            let truths: Vec<T> = held.iter().map(|&i| y[i]).collect();
            let (_, rmse) = metrics(&preds, &truths)?;
            curve[m - 1] += rmse;
            counts[m - 1] += 1;
        }
    }
    for (c, k) in curve.iter_mut().zip(&counts) {
        if *k > 0 {
            *c /= real::<T>(*k as f64);
        }
    }
    let mut best_m = 1;
    for m in 1..=m_max {
        if counts[m - 1] > 0 && curve[m - 1] < curve[best_m - 1] {
            best_m = m;
        }
    }
    Ok((best_m, curve))
}

/// Exported sparse linear model in a plain text format.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub offset: f64,
    pub metadata: BTreeMap<String, String>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;
const INTERCEPT_ID: &str = "const";

impl RegressionModel {
    /// Truncate a fitted path at order `m` against the matrix schema.
    pub fn from_path<T: Real>(
        path: &SelectionPath<T>,
        schema: &[String],
        m: usize,
    ) -> RegressionModel {
        let beta = path.prefix_coefficients(m);
        let mut features = Vec::with_capacity(m);
        let mut coefficients = Vec::with_capacity(m);
        for (pos, &col) in path.selected[..m].iter().enumerate() {
            features.push(if col == 0 {
                INTERCEPT_ID.to_string()
            } else {
                schema[col - 1].clone()
            });
            coefficients.push(beta[pos].to_f64_lossy());
        }
        RegressionModel { features, coefficients, offset: 0.0, metadata: BTreeMap::new() }
    }

    /// Evaluate on a raw feature row matched by schema position lookup.
    pub fn predict(&self, schema: &[String], features: &[f64]) -> Result<f64, RegressionError> {
        let mut acc = self.offset;
        for (id, c) in self.features.iter().zip(&self.coefficients) {
            if id == INTERCEPT_ID {
                acc += c;
                continue;
            }
            let pos = schema
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| RegressionError::ModelParse {
                    line: 0,
                    msg: format!("unknown feature {id}"),
                })?;
            acc += c * features[pos];
        }
        Ok(acc)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "molscat-model v{MODEL_FORMAT_VERSION}").unwrap();
        writeln!(out, "offset {:.17e}", self.offset).unwrap();
        for (k, v) in &self.metadata {
            writeln!(out, "meta {k}={v}").unwrap();
        }
        for (id, c) in self.features.iter().zip(&self.coefficients) {
            writeln!(out, "term {id} {c:.17e}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<RegressionModel, RegressionError> {
        let bad = |line: usize, msg: &str| RegressionError::ModelParse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty model"))?;
        if header != format!("molscat-model v{MODEL_FORMAT_VERSION}") {
            return Err(bad(1, &format!("unsupported header: {header}")));
        }
        let mut model = RegressionModel {
            features: Vec::new(),
            coefficients: Vec::new(),
            offset: 0.0,
            metadata: BTreeMap::new(),
        };
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (kind, rest) = line.split_once(' ').ok_or_else(|| bad(lineno, line))?;
            match kind {
                "offset" => {
                    model.offset = rest.parse().map_err(|_| bad(lineno, line))?;
                }
                "meta" => {
                    let (k, v) = rest.split_once('=').ok_or_else(|| bad(lineno, line))?;
                    model.metadata.insert(k.to_string(), v.to_string());
                }
                "term" => {
                    let (id, c) = rest.rsplit_once(' ').ok_or_else(|| bad(lineno, line))?;
                    model.features.push(id.to_string());
                    model.coefficients.push(c.parse().map_err(|_| bad(lineno, line))?);
                }
                _ => return Err(bad(lineno, line)),
            }
        }
        Ok(model)
    }
}
