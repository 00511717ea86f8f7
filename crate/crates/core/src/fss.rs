//! Forward-selection sparse PCE.
//!
//! Starting from the constant polynomial, each iteration scores the surviving
//! monomials by their absolute Pearson correlation with the current residual,
//! drops every monomial scoring below the threshold ε for good, and moves the
//! best-scoring one into the basis after orthonormalizing it against the
//! members already there. The loop ends when nothing survives the threshold.
//! Coefficients of the selected basis are then fitted by least squares.
//!
//! ε is chosen by K-fold cross-validation over a grid when the configuration
//! asks for it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossval::{complement, kfold_partition};
use crate::dataset::Dataset;
use crate::error::{param, PceError, Result};
use crate::linalg::{axpy, dot, least_squares};
use crate::polybasis::{
    monomial_columns, total_degree_indices, Candidate, InputScaling, MultiIndex, OrthonormalBasis, Orthogonalized,
    DEPENDENCE_TOLERANCE,
};
use crate::regression::{least_squares_fit, PceModel};

/// What candidate monomials are correlated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreTarget {
    /// The output minus its projection on the selected basis.
    #[default]
    Residual,
    /// The output itself; scores never change between iterations.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Fixed(f64),
    /// Chosen by cross-validation over the configured grid.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FssConfig {
    pub order: u32,
    pub threshold: Threshold,
    pub cv_folds: usize,
    pub threshold_grid: Vec<f64>,
    pub dependence_tolerance: f64,
    pub score_target: ScoreTarget,
    /// Seed of the fold permutation.
    pub seed: u64,
}

impl FssConfig {
    pub fn new(order: u32) -> Self {
        Self {
            order,
            threshold: Threshold::Auto,
            cv_folds: 5,
            threshold_grid: default_threshold_grid(),
            dependence_tolerance: DEPENDENCE_TOLERANCE,
            score_target: ScoreTarget::Residual,
            seed: 0,
        }
    }

    pub fn with_threshold(mut self, epsilon: f64) -> Self {
        self.threshold = Threshold::Fixed(epsilon);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate_grid(&self) -> Result<()> {
        if self.threshold_grid.is_empty() {
            return param("threshold grid is empty");
        }
        if let Some(bad) = self.threshold_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return param(format!("threshold {bad} is outside (0, 1)"));
        }
        Ok(())
    }
}

/// 40 geometrically spaced thresholds from 0.01 to 0.8.
pub fn default_threshold_grid() -> Vec<f64> {
    geometric_grid(0.01, 0.8, 40)
}

pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo * (ratio * i as f64).exp() })
        .collect()
}

/// Empirical Pearson correlation; 0 when either vector has no spread.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(PceError::Shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return param("correlation needs at least two observations");
    }
    Ok(crate::stats::pearson(a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub iteration: usize,
    pub multi_index: MultiIndex,
    pub score: f64,
    /// Candidates still in play after pruning and removing the selected one.
    pub surviving_count: usize,
    /// Residual sum of squares after adding the new member.
    pub residual_rss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    /// Selected candidates skipped because they were numerically dependent.
    pub dependent: Vec<MultiIndex>,
    pub warnings: Vec<String>,
}

impl SelectionTrace {
    /// CSV with columns `iteration,multi_index,score,surviving_count,residual_rss`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "multi_index", "score", "surviving_count", "residual_rss"])?;
        for s in &self.steps {
            w.write_record([
                s.iteration.to_string(),
                s.multi_index.to_string(),
                crate::dataset::format_f64(s.score),
                s.surviving_count.to_string(),
                crate::dataset::format_f64(s.residual_rss),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Residual norms below this fraction of the centered output norm count as
/// zero: every correlation against them is 0 and selection stops.
const RESIDUAL_FLOOR: f64 = 1e-12;

/// Candidate monomials of one training set, evaluated once and reused for
/// every threshold.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    scaling: InputScaling,
    candidates: Vec<Candidate>,
    /// Norm of each candidate after removing its mean (0 for constants).
    centered_norms: Vec<f64>,
    outputs: Vec<f64>,
}

impl CandidatePool {
    /// All non-constant monomials of total degree ≤ `order`.
    pub fn new(data: &Dataset, order: u32) -> Result<Self> {
        let indices: Vec<MultiIndex> = total_degree_indices(data.input_dimension(), order)
            .into_iter()
            .filter(|ix| !ix.is_constant())
            .collect();
        Self::with_indices(data, &indices)
    }

    pub fn with_indices(data: &Dataset, indices: &[MultiIndex]) -> Result<Self> {
        let scaling = InputScaling::fit(data.inputs());
        let scaled = scaling.apply(data.inputs())?;
        let candidates = Candidate::from_indices(indices, &scaled)?;
        let centered_norms = candidates
            .iter()
            .map(|c| {
                let mean = c.values.iter().sum::<f64>() / c.values.len() as f64;
                let ss: f64 = c.values.iter().map(|v| (v - mean) * (v - mean)).sum();
                let raw = dot(&c.values, &c.values).sqrt();
                let norm = ss.sqrt();
                // Spread at rounding level is no spread.
                if norm <= 1e-13 * raw {
                    0.0
                } else {
                    norm
                }
            })
            .collect();
        Ok(Self {
            scaling,
            candidates,
            centered_norms,
            outputs: data.outputs().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = &MultiIndex> {
        self.candidates.iter().map(|c| &c.index)
    }

    pub fn scaling(&self) -> &InputScaling {
        &self.scaling
    }

    /// Runs the forward selection at threshold `epsilon`.
    ///
    /// Returns the basis (constant first) and, for each member after the
    /// constant, the pool position it came from.
    pub fn select(
        &self,
        epsilon: f64,
        target: ScoreTarget,
        tolerance: f64,
    ) -> Result<(OrthonormalBasis, Vec<usize>, SelectionTrace)> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return param(format!("threshold must lie in (0, 1), got {epsilon}"));
        }
        let m = self.outputs.len();
        if m < 2 {
            return param("forward selection needs at least two observations");
        }
        let mut basis = OrthonormalBasis::constant(self.scaling.clone(), m).with_tolerance(tolerance);
        let mean = self.outputs.iter().sum::<f64>() / m as f64;
        let centered: Vec<f64> = self.outputs.iter().map(|y| y - mean).collect();
        let mut residual = centered.clone();
        let floor = RESIDUAL_FLOOR * dot(&centered, &centered).sqrt();

        let mut surviving: Vec<usize> = (0..self.candidates.len()).collect();
        let mut scores = vec![0.0; self.candidates.len()];
        let mut selected = Vec::new();
        let mut trace = SelectionTrace::default();
        let mut work = vec![0.0; m];

        'outer: loop {
            if surviving.is_empty() {
                break;
            }
            let score_vec = match target {
                ScoreTarget::Residual => &residual,
                ScoreTarget::Raw => &centered,
            };
            // Center the target; candidate means then drop out of the dot product.
            let t_mean = score_vec.iter().sum::<f64>() / m as f64;
            work.iter_mut().zip(score_vec).for_each(|(w, v)| *w = v - t_mean);
            let t_norm = dot(&work, &work).sqrt();
            if t_norm <= floor || t_norm == 0.0 {
                break;
            }
            for &i in &surviving {
                let cn = self.centered_norms[i];
                scores[i] = if cn == 0.0 {
                    0.0
                } else {
                    (dot(&self.candidates[i].values, &work) / (cn * t_norm)).abs().min(1.0)
                };
            }
            surviving.retain(|&i| scores[i] >= epsilon);
            loop {
                // Highest score; ties go to the earliest (lowest-degree) candidate.
                let Some(pos) = (0..surviving.len()).reduce(|best, p| {
                    if scores[surviving[p]] > scores[surviving[best]] {
                        p
                    } else {
                        best
                    }
                }) else {
                    break 'outer;
                };
                let pick = surviving.remove(pos);
                let cand = &self.candidates[pick];
                match basis.orthogonalize(cand)? {
                    Orthogonalized::Member { member, .. } => {
                        let proj = dot(&residual, &member.values) / m as f64;
                        axpy(-proj, &member.values, &mut residual);
                        basis.push(cand.index.clone(), member);
                        selected.push(pick);
                        trace.steps.push(SelectionStep {
                            iteration: selected.len(),
                            multi_index: cand.index.clone(),
                            score: scores[pick],
                            surviving_count: surviving.len(),
                            residual_rss: dot(&residual, &residual),
                        });
                        break;
                    }
                    Orthogonalized::Dependent { .. } => {
                        trace.dependent.push(cand.index.clone());
                    }
                }
            }
            if basis.len() >= m {
                break;
            }
        }
        if selected.is_empty() {
            trace
                .warnings
                .push(format!("no candidate reached threshold {epsilon}; constant-only model"));
        }
        Ok((basis, selected, trace))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub epsilon: f64,
    /// Summed held-out squared error over all folds.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub epsilon: f64,
    pub curve: Vec<CvPoint>,
}

#[derive(Debug, Clone)]
pub struct FssFit {
    pub model: PceModel,
    pub trace: SelectionTrace,
    pub epsilon: f64,
    pub cross_validation: Option<ThresholdSelection>,
}

/// Fits at a fixed threshold (or runs the threshold search first when the
/// configuration says `Auto`).
pub fn fit_fss_pce(data: &Dataset, config: &FssConfig) -> Result<FssFit> {
    let (epsilon, cv) = match config.threshold {
        Threshold::Fixed(e) => (e, None),
        Threshold::Auto => {
            let sel = cross_validate_threshold(data, config)?;
            (sel.epsilon, Some(sel))
        }
    };
    let pool = CandidatePool::new(data, config.order)?;
    let (basis, _, trace) = pool.select(epsilon, config.score_target, config.dependence_tolerance)?;
    let model = least_squares_fit(&basis, data)?;
    Ok(FssFit {
        model,
        trace,
        epsilon,
        cross_validation: cv,
    })
}

/// Relative slack under which two CV errors count as tied.
const CV_TIE: f64 = 1e-9;

/// K-fold search of the threshold grid. The smallest summed held-out error
/// wins; among (near-)ties the largest threshold, i.e. the sparsest model.
pub fn cross_validate_threshold(data: &Dataset, config: &FssConfig) -> Result<ThresholdSelection> {
    config.validate_grid()?;
    let m = data.len();
    let folds = kfold_partition(m, config.cv_folds, config.seed)?;

    struct Fold {
        pool: CandidatePool,
        test_values: Vec<Vec<f64>>,
        test_outputs: Vec<f64>,
    }
    let prepared: Vec<Fold> = folds
        .iter()
        .map(|held| {
            let train = data.subset(&complement(m, held));
            let test = data.subset(held);
            let pool = CandidatePool::new(&train, config.order)?;
            let scaled = pool.scaling.apply(test.inputs())?;
            let indices: Vec<MultiIndex> = pool.indices().cloned().collect();
            let test_values = monomial_columns(&indices, &scaled)?;
            Ok(Fold {
                pool,
                test_values,
                test_outputs: test.outputs().to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..config.threshold_grid.len())
        .flat_map(|g| (0..prepared.len()).map(move |f| (g, f)))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let fold = &prepared[f];
            let eps = config.threshold_grid[g];
            held_out_error(fold.pool.select(eps, config.score_target, config.dependence_tolerance).and_then(
                |(basis, selected, _)| {
                    let columns: Vec<Vec<f64>> = basis.members().iter().map(|mb| mb.values.clone()).collect();
                    let theta = least_squares(&columns, &fold.pool.outputs)?;
                    let weights = basis.collapse(&theta);
                    let mut pred = vec![weights[0]; fold.test_outputs.len()];
                    for (w, &pi) in weights[1..].iter().zip(&selected) {
                        axpy(*w, &fold.test_values[pi], &mut pred);
                    }
                    Ok(pred.iter().zip(&fold.test_outputs).map(|(p, y)| (p - y) * (p - y)).sum::<f64>())
                },
            ))
        })
        .collect();

    let curve: Vec<CvPoint> = config
        .threshold_grid
        .iter()
        .enumerate()
        .map(|(g, &epsilon)| CvPoint {
            epsilon,
            error: errors[g * prepared.len()..(g + 1) * prepared.len()].iter().sum(),
        })
        .collect();
    let epsilon = choose_threshold(&curve, data.outputs());
    Ok(ThresholdSelection { epsilon, curve })
}

fn held_out_error(r: Result<f64>) -> f64 {
    match r {
        Ok(e) if e.is_finite() => e,
        _ => f64::INFINITY,
    }
}

fn choose_threshold(curve: &[CvPoint], outputs: &[f64]) -> f64 {
    let mean = outputs.iter().sum::<f64>() / outputs.len() as f64;
    let tss: f64 = outputs.iter().map(|y| (y - mean) * (y - mean)).sum();
    let best = curve.iter().map(|p| p.error).fold(f64::INFINITY, f64::min);
    let slack = CV_TIE * best.abs() + 1e-12 * tss;
    curve
        .iter()
        .filter(|p| p.error <= best + slack)
        .map(|p| p.epsilon)
        .fold(curve[0].epsilon, f64::max)
}
