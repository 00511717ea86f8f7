//! Coefficient estimation on an orthonormal basis, least angle regression,
//! prediction and moment recovery.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{PceError, Result};
use crate::linalg::{axpy, dot, least_squares, Matrix};
use crate::polybasis::{monomial_columns, AffineMap, InputScaling, MultiIndex, OrthonormalBasis};

/// An orthonormal basis with fitted expansion coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PceModel {
    basis: OrthonormalBasis,
    coefficients: Vec<f64>,
}

impl PceModel {
    pub fn new(basis: OrthonormalBasis, coefficients: Vec<f64>) -> Result<Self> {
        if basis.len() != coefficients.len() {
            return Err(PceError::Shape(format!(
                "{} coefficients for {} basis members",
                coefficients.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, coefficients })
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn terms(&self) -> &[MultiIndex] {
        self.basis.terms()
    }

    /// Values of the expansion on the training inputs.
    pub fn fitted_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.sample_count()];
        for (t, member) in self.coefficients.iter().zip(self.basis.members()) {
            axpy(*t, &member.values, &mut out);
        }
        out
    }

    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        predict(self, inputs)
    }

    /// `(θ_0, Σ_{i≥1} θ_i²)`; assumes member 0 is the constant polynomial.
    pub fn moments(&self) -> (f64, f64) {
        moments_from_coefficients(self)
    }

    pub fn sd_estimate(&self) -> f64 {
        self.moments().1.sqrt()
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            multi_indices: self.basis.terms().to_vec(),
            monomial_coefficients: self.basis.members().iter().map(|m| m.coefficients.clone()).collect(),
            rescale_map: self.basis.scaling().maps().to_vec(),
            theta: self.coefficients.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        let l = doc.multi_indices.len();
        if doc.monomial_coefficients.len() != l || doc.theta.len() != l {
            return Err(PceError::Shape(format!(
                "{} multi-indices, {} members, {} coefficients",
                l,
                doc.monomial_coefficients.len(),
                doc.theta.len()
            )));
        }
        for (k, c) in doc.monomial_coefficients.iter().enumerate() {
            if c.len() != k + 1 {
                return Err(PceError::Shape(format!("member {k} has {} coefficients, expected {}", c.len(), k + 1)));
            }
        }
        let n = doc.rescale_map.len();
        if doc.multi_indices.iter().any(|ix| ix.dimension() != n) {
            return Err(PceError::Shape("multi-index dimension differs from rescale map".into()));
        }
        let basis = OrthonormalBasis::from_parts(
            InputScaling::from_maps(doc.rescale_map),
            doc.multi_indices,
            doc.monomial_coefficients,
        );
        Self::new(basis, doc.theta)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// Serialized model. Floats are hexadecimal so the round trip is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub multi_indices: Vec<MultiIndex>,
    #[serde(with = "crate::hexfloat::nested")]
    pub monomial_coefficients: Vec<Vec<f64>>,
    pub rescale_map: Vec<AffineMap>,
    #[serde(with = "crate::hexfloat::vec")]
    pub theta: Vec<f64>,
}

/// Least-squares coefficients of `data.outputs()` on the basis members,
/// by Householder QR of the evaluation matrix.
pub fn least_squares_fit(basis: &OrthonormalBasis, data: &Dataset) -> Result<PceModel> {
    if data.len() != basis.sample_count() {
        return Err(PceError::Shape(format!(
            "basis built on {} points, dataset has {}",
            basis.sample_count(),
            data.len()
        )));
    }
    if basis.len() > data.len() {
        return Err(PceError::Conditioning { column: data.len() });
    }
    let columns: Vec<Vec<f64>> = basis.members().iter().map(|m| m.values.clone()).collect();
    let theta = least_squares(&columns, data.outputs())?;
    PceModel::new(basis.clone(), theta)
}

pub fn predict(model: &PceModel, inputs: &Matrix) -> Result<Vec<f64>> {
    let basis = model.basis();
    if inputs.ncols() != basis.input_dimension() {
        return Err(PceError::Shape(format!(
            "inputs have {} columns, model expects {}",
            inputs.ncols(),
            basis.input_dimension()
        )));
    }
    let scaled = basis.scaling().apply(inputs)?;
    let weights = basis.collapse(model.coefficients());
    let monomials = monomial_columns(basis.terms(), &scaled)?;
    let mut out = vec![0.0; inputs.nrows()];
    for (w, col) in weights.iter().zip(&monomials) {
        axpy(*w, col, &mut out);
    }
    Ok(out)
}

pub fn moments_from_coefficients(model: &PceModel) -> (f64, f64) {
    let theta = model.coefficients();
    let mean = theta.first().copied().unwrap_or(0.0);
    let variance = theta.iter().skip(1).fold(0.0, |acc, t| acc + t * t);
    (mean, variance)
}

/// One point on the LAR path.
#[derive(Debug, Clone, PartialEq)]
pub struct LarStep {
    /// Predictors active at this step, in order of entry.
    pub active: Vec<usize>,
    /// Coefficients on the original (unstandardized) feature scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarPath {
    /// Predictor indices in order of entry.
    pub entries: Vec<usize>,
    /// `steps[t]` has `t + 1` active predictors.
    pub steps: Vec<LarStep>,
    /// Columns left out because they have no variance.
    pub excluded: Vec<usize>,
    /// Columns that tied for entry but were collinear with the active set.
    pub collinear: Vec<usize>,
}

/// Relative column spread below which a predictor is treated as constant.
const ZERO_VARIANCE: f64 = 1e-12;

/// Least angle regression path of `response` on the given feature columns.
///
/// Features are centered and scaled to unit norm internally and the response
/// is centered; coefficients are reported on the original scale with an
/// intercept. The path has at most `min(q, m - 1)` steps.
pub fn lar_path(features: &[Vec<f64>], response: &[f64]) -> Result<LarPath> {
    let m = response.len();
    let q = features.len();
    if features.iter().any(|f| f.len() != m) {
        return Err(PceError::Shape("feature columns and response differ in length".into()));
    }
    if m < 2 {
        return Err(PceError::Parameter("LAR needs at least two observations".into()));
    }
    let y_mean = response.iter().sum::<f64>() / m as f64;
    let mut residual: Vec<f64> = response.iter().map(|y| y - y_mean).collect();

    let mut excluded = Vec::new();
    let mut usable = vec![false; q];
    let mut means = vec![0.0; q];
    let mut norms = vec![0.0; q];
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(q);
    for (j, f) in features.iter().enumerate() {
        let mean = f.iter().sum::<f64>() / m as f64;
        let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
        let norm = dot(&centered, &centered).sqrt();
        let size = dot(f, f).sqrt();
        means[j] = mean;
        if norm > ZERO_VARIANCE * size.max(f64::MIN_POSITIVE) && norm > 0.0 {
            usable[j] = true;
            norms[j] = norm;
            xs.push(centered.into_iter().map(|v| v / norm).collect());
        } else {
            excluded.push(j);
            xs.push(vec![0.0; m]);
        }
    }
    let q_usable = usable.iter().filter(|&&u| u).count();
    let max_steps = q_usable.min(m - 1);

    let mut corr: Vec<f64> = xs.iter().map(|x| dot(x, &residual)).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; q];
    let mut blocked = vec![false; q];
    let mut chol: Vec<Vec<f64>> = Vec::new(); // lower-triangular rows
    let mut beta = vec![0.0; q]; // standardized scale
    let mut steps: Vec<LarStep> = Vec::new();
    let mut collinear = Vec::new();

    let candidate_ok = |j: usize, in_active: &[bool], blocked: &[bool]| usable[j] && !in_active[j] && !blocked[j];

    // First entrant.
    let first = (0..q)
        .filter(|&j| candidate_ok(j, &in_active, &blocked))
        .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()).then(b.cmp(&a)));
    let Some(first) = first else {
        return Ok(LarPath {
            entries: Vec::new(),
            steps,
            excluded,
            collinear,
        });
    };
    let mut pending = Some(first);

    while let Some(j) = pending.take() {
        // Try to add j to the active set.
        let s = if corr[j] >= 0.0 { 1.0 } else { -1.0 };
        let g: Vec<f64> = active
            .iter()
            .zip(&signs)
            .map(|(&a, &sa)| sa * s * dot(&xs[a], &xs[j]))
            .collect();
        let mut l_row = vec![0.0; active.len() + 1];
        for i in 0..active.len() {
            let mut v = g[i];
            for k in 0..i {
                v -= chol[i][k] * l_row[k];
            }
            l_row[i] = v / chol[i][i];
        }
        let d = 1.0 - l_row[..active.len()].iter().map(|v| v * v).sum::<f64>();
        if d <= 1e-12 {
            blocked[j] = true;
            collinear.push(j);
        } else {
            l_row[active.len()] = d.sqrt();
            chol.push(l_row);
            active.push(j);
            signs.push(s);
            in_active[j] = true;
        }

        // Equiangular direction for the active set.
        let k = active.len();
        let mut w = vec![1.0; k];
        for i in 0..k {
            let mut v = w[i];
            for c in 0..i {
                v -= chol[i][c] * w[c];
            }
            w[i] = v / chol[i][i];
        }
        for i in (0..k).rev() {
            let mut v = w[i];
            for c in i + 1..k {
                v -= chol[c][i] * w[c];
            }
            w[i] = v / chol[i][i];
        }
        let a_norm = 1.0 / w.iter().sum::<f64>().sqrt();
        w.iter_mut().for_each(|v| *v *= a_norm);
        let mut u = vec![0.0; m];
        for ((&a, &sa), &wa) in active.iter().zip(&signs).zip(&w) {
            axpy(sa * wa, &xs[a], &mut u);
        }
        let c_max = active.iter().map(|&a| corr[a].abs()).fold(0.0, f64::max);

        let mut gamma = c_max / a_norm;
        let mut next = None;
        let mut a_proj = vec![0.0; q];
        for jj in 0..q {
            if usable[jj] {
                a_proj[jj] = dot(&xs[jj], &u);
            }
        }
        if k < max_steps {
            for jj in (0..q).filter(|&jj| candidate_ok(jj, &in_active, &blocked)) {
                for cand in [
                    (c_max - corr[jj]) / (a_norm - a_proj[jj]),
                    (c_max + corr[jj]) / (a_norm + a_proj[jj]),
                ] {
                    if cand > 1e-15 && cand < gamma {
                        gamma = cand;
                        next = Some(jj);
                    }
                }
            }
        }

        for ((&a, &sa), &wa) in active.iter().zip(&signs).zip(&w) {
            beta[a] += gamma * sa * wa;
        }
        axpy(-gamma, &u, &mut residual);
        for jj in 0..q {
            corr[jj] -= gamma * a_proj[jj];
        }

        let step = LarStep {
            active: active.clone(),
            coefficients: (0..q)
                .map(|jj| if in_active[jj] { beta[jj] / norms[jj] } else { 0.0 })
                .collect(),
            intercept: y_mean - (0..q).filter(|&jj| in_active[jj]).map(|jj| beta[jj] / norms[jj] * means[jj]).sum::<f64>(),
        };
        match steps.last_mut() {
            Some(last) if last.active.len() == step.active.len() => *last = step,
            _ => steps.push(step),
        }
        if k < max_steps {
            pending = next;
        }
    }

    Ok(LarPath {
        entries: active,
        steps,
        excluded,
        collinear,
    })
}
