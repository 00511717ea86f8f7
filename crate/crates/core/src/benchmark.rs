//! The comparison method: orthonormalize every monomial of total degree ≤ p,
//! sparsify with least angle regression, choose the model size by K-fold
//! cross-validation and refit the chosen members by least squares.
//!
//! Under-sampled runs (fewer observations than basis terms) still proceed on
//! whatever part of the basis survives the dependence check, with warnings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossval::{complement, kfold_partition};
use crate::dataset::Dataset;
use crate::error::{PceError, Result};
use crate::linalg::{axpy, least_squares, IncrementalQr};
use crate::polybasis::{
    binomial, modified_gram_schmidt_dropping, total_degree_indices, Candidate, InputScaling, MultiIndex,
    OrthonormalBasis, DEPENDENCE_TOLERANCE,
};
use crate::regression::{lar_path, PceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub order: u32,
    pub cv_folds: usize,
    pub dependence_tolerance: f64,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn new(order: u32) -> Self {
        Self {
            order,
            cv_folds: 5,
            dependence_tolerance: DEPENDENCE_TOLERANCE,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of monomials of total degree ≤ p in `n` inputs.
    pub fn basis_size(&self, n: usize) -> usize {
        binomial(n as u64 + self.order as u64, n as u64) as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTrace {
    /// Multi-indices dropped as numerically dependent during orthonormalization.
    pub dropped: Vec<MultiIndex>,
    /// Multi-indices in LAR entry order on the full data.
    pub entries: Vec<MultiIndex>,
    /// Summed held-out squared error for each path size 0, 1, 2, ...
    pub cv_errors: Vec<f64>,
    /// Chosen number of non-constant members.
    pub selected_size: usize,
    pub warnings: Vec<String>,
}

impl BenchmarkTrace {
    /// CSV with columns `step,multi_index,cv_error,selected`; step 0 is the
    /// constant-only model.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "multi_index", "cv_error", "selected"])?;
        let steps = self.entries.len().max(self.cv_errors.len().saturating_sub(1));
        for t in 0..=steps {
            let index = if t == 0 {
                String::new()
            } else {
                self.entries.get(t - 1).map_or(String::new(), ToString::to_string)
            };
            let err = self.cv_errors.get(t).map_or(String::new(), |&e| crate::dataset::format_f64(e));
            w.write_record([t.to_string(), index, err, (t <= self.selected_size).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkFit {
    pub model: PceModel,
    pub trace: BenchmarkTrace,
}

/// Cross-validation curve of LAR path prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct LarSelection {
    /// Summed held-out squared error for each prefix size 0, 1, 2, ...
    pub errors: Vec<f64>,
    /// Prefix size with the smallest error; the smaller size wins ties.
    pub size: usize,
}

/// One fold's training and held-out features.
pub struct FoldData {
    pub train_features: Vec<Vec<f64>>,
    pub train_response: Vec<f64>,
    pub test_features: Vec<Vec<f64>>,
    pub test_response: Vec<f64>,
}

/// Relative slack under which two CV errors count as tied.
const CV_TIE: f64 = 1e-9;

/// Held-out squared errors of every LAR prefix (plus intercept) refit by
/// least squares, summed over folds. Each fold runs its own LAR path on its
/// training features.
///
/// Folds whose path is shorter than the longest one keep contributing their
/// full-path error at the larger sizes.
pub fn cross_validate_lar(folds: &[FoldData]) -> Result<LarSelection> {
    let curves: Vec<Vec<f64>> = folds.par_iter().map(fold_prefix_errors).collect::<Result<_>>()?;
    let len = curves.iter().map(Vec::len).max().unwrap_or(1);
    let errors: Vec<f64> = (0..len)
        .map(|t| curves.iter().map(|c| c[t.min(c.len() - 1)]).sum())
        .collect();
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let size = errors
        .iter()
        .position(|&e| e <= best + CV_TIE * best.abs())
        .unwrap_or(0);
    Ok(LarSelection { errors, size })
}

fn fold_prefix_errors(fold: &FoldData) -> Result<Vec<f64>> {
    let path = lar_path(&fold.train_features, &fold.train_response)?;
    let mut qr = IncrementalQr::new(&fold.train_response);
    let ones = vec![1.0; fold.train_response.len()];
    qr.push(&ones);
    let mut columns = vec![usize::MAX];
    let mut errors = Vec::with_capacity(path.entries.len() + 1);
    errors.push(prefix_error(&qr, &columns, fold));
    for &j in &path.entries {
        if qr.push(&fold.train_features[j]) {
            columns.push(j);
        }
        errors.push(prefix_error(&qr, &columns, fold));
    }
    Ok(errors)
}

fn prefix_error(qr: &IncrementalQr, columns: &[usize], fold: &FoldData) -> f64 {
    let coef = qr.solve_prefix(columns.len());
    let mut pred = vec![coef[0]; fold.test_response.len()];
    for (c, &j) in coef[1..].iter().zip(&columns[1..]) {
        axpy(*c, &fold.test_features[j], &mut pred);
    }
    let e: f64 = pred.iter().zip(&fold.test_response).map(|(p, y)| (p - y) * (p - y)).sum();
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

/// Full basis of all monomials up to `order`, with dependent ones dropped.
fn full_basis(data: &Dataset, indices: &[MultiIndex], tolerance: f64) -> Result<(OrthonormalBasis, Vec<usize>)> {
    let scaling = InputScaling::fit(data.inputs());
    let scaled = scaling.apply(data.inputs())?;
    let candidates = Candidate::from_indices(indices, &scaled)?;
    modified_gram_schmidt_dropping(scaling, &candidates, tolerance)
}

/// Non-constant member values (the LAR features).
fn features(basis: &OrthonormalBasis) -> Vec<Vec<f64>> {
    basis.members()[1..].iter().map(|m| m.values.clone()).collect()
}

pub fn fit_benchmark_sparse_pce(data: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkFit> {
    let m = data.len();
    let n = data.input_dimension();
    let indices = total_degree_indices(n, config.order);
    let mut trace = BenchmarkTrace::default();
    if m < indices.len() {
        trace.warnings.push(format!(
            "under-sampled: {m} observations for {} basis terms",
            indices.len()
        ));
    }

    let (basis, dropped) = full_basis(data, &indices, config.dependence_tolerance)?;
    if !basis.starts_with_constant() {
        return Err(PceError::Numeric("constant column has no spread".into()));
    }
    trace.dropped = dropped.iter().map(|&i| indices[i].clone()).collect();
    if !dropped.is_empty() {
        trace
            .warnings
            .push(format!("{} dependent candidates dropped", dropped.len()));
    }

    let size = if basis.len() == 1 || m < 2 * config.cv_folds.max(2) {
        if basis.len() > 1 {
            trace.warnings.push(format!("too few observations for {}-fold CV; full path kept", config.cv_folds));
        }
        usize::MAX
    } else {
        // Each fold orthonormalizes the monomials on its own training rows.
        let parts = kfold_partition(m, config.cv_folds, config.seed)?;
        let folds: Vec<FoldData> = parts
            .par_iter()
            .map(|held| {
                let train = data.subset(&complement(m, held));
                let test = data.subset(held);
                let (b, _) = full_basis(&train, &indices, config.dependence_tolerance)?;
                let test_values = b.evaluate(test.inputs())?;
                Ok(FoldData {
                    train_features: features(&b),
                    train_response: train.outputs().to_vec(),
                    test_features: test_values[1..].to_vec(),
                    test_response: test.outputs().to_vec(),
                })
            })
            .collect::<Result<_>>()?;
        let sel = cross_validate_lar(&folds)?;
        trace.cv_errors = sel.errors;
        sel.size
    };

    let path = lar_path(&features(&basis), data.outputs())?;
    let chosen: Vec<usize> = path.entries.iter().take(size).map(|&j| j + 1).collect();
    trace.entries = path.entries.iter().map(|&j| basis.terms()[j + 1].clone()).collect();
    trace.selected_size = chosen.len();

    let coefficients = refit(&basis, &chosen, data.outputs(), &mut trace.warnings)?;
    let model = PceModel::new(basis, coefficients)?;
    Ok(BenchmarkFit { model, trace })
}

/// Least-squares coefficients on the constant plus `chosen` members, spread
/// over the full basis (zeros elsewhere). Columns the solver reports as
/// rank deficient are removed one at a time.
fn refit(basis: &OrthonormalBasis, chosen: &[usize], y: &[f64], warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let mut active: Vec<usize> = std::iter::once(0).chain(chosen.iter().copied()).collect();
    loop {
        let columns: Vec<Vec<f64>> = active.iter().map(|&k| basis.values(k).to_vec()).collect();
        match least_squares(&columns, y) {
            Ok(theta) => {
                let mut full = vec![0.0; basis.len()];
                for (&k, t) in active.iter().zip(theta) {
                    full[k] = t;
                }
                return Ok(full);
            }
            Err(PceError::Conditioning { column }) if column > 0 && column < active.len() => {
                warnings.push(format!("refit column {} is rank deficient; removed", basis.terms()[active[column]]));
                active.remove(column);
            }
            Err(e) => return Err(e),
        }
    }
}
