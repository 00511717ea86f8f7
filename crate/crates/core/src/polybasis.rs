//! Monomial candidates and their orthonormalization under the empirical
//! measure of a dataset.
//!
//! Inner products are sample averages, `<a, b> = (1/m) Σ a_j b_j`, so the
//! constant polynomial has unit norm. Every basis member is kept in two forms
//! that are updated together: its values on the training inputs (used for all
//! inner products) and its coefficients over the monomials that entered the
//! basis so far (used to evaluate the member on new inputs).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{PceError, Result};
use crate::linalg::{axpy, dot, Matrix};

/// Default relative residual norm below which a candidate is treated as
/// linearly dependent on the current basis.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-10;

/// Exponent vector of a monomial `Π x_k^{j_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn constant(dimension: usize) -> Self {
        Self(vec![0; dimension])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&j| j == 0)
    }

    /// Monomial value at a single point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&j, _)| j > 0)
            .map(|(&j, &v)| v.powi(j as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of dimension `n` and total degree at most `p`, ordered by
/// total degree and, within a degree, by descending exponents from the first
/// coordinate on. The list has `C(n + p, n)` entries.
pub fn total_degree_indices(n: usize, p: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    for degree in 0..=p {
        fill_degree(&mut current, 0, degree, &mut out);
    }
    out
}

fn fill_degree(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for j in (0..=remaining).rev() {
        current[pos] = j;
        fill_degree(current, pos + 1, remaining - j, out);
    }
    current[pos] = 0;
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Per-column affine map `x -> (x - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    #[serde(with = "crate::hexfloat")]
    pub center: f64,
    #[serde(with = "crate::hexfloat")]
    pub scale: f64,
}

impl AffineMap {
    pub const IDENTITY: Self = Self {
        center: 0.0,
        scale: 1.0,
    };

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) * self.scale
    }
}

/// Per-column maps that bring the training inputs into [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputScaling {
    maps: Vec<AffineMap>,
}

impl InputScaling {
    pub fn identity(dimension: usize) -> Self {
        Self {
            maps: vec![AffineMap::IDENTITY; dimension],
        }
    }

    pub fn from_maps(maps: Vec<AffineMap>) -> Self {
        Self { maps }
    }

    /// Divides each column by its largest magnitude so values land in
    /// [-1, 1]. The origin stays put: a monomial of the scaled inputs is a
    /// multiple of the same monomial of the raw inputs. A zero column is
    /// left as is.
    pub fn fit(inputs: &Matrix) -> Self {
        let maps = (0..inputs.ncols())
            .map(|j| {
                let peak = inputs.rows_iter().map(|r| r[j].abs()).fold(0.0, f64::max);
                let scale = if peak > 0.0 && (1.0 / peak).is_finite() {
                    1.0 / peak
                } else {
                    1.0
                };
                AffineMap { center: 0.0, scale }
            })
            .collect();
        Self { maps }
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn dimension(&self) -> usize {
        self.maps.len()
    }

    pub fn apply(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.ncols() != self.maps.len() {
            return Err(PceError::Shape(format!(
                "inputs have {} columns, scaling expects {}",
                inputs.ncols(),
                self.maps.len()
            )));
        }
        let mut out = inputs.clone();
        for (j, map) in self.maps.iter().enumerate() {
            out.map_column(j, |x| map.apply(x));
        }
        Ok(out)
    }
}

/// Columns of monomial values, one `Vec` per multi-index.
pub fn monomial_columns(indices: &[MultiIndex], inputs: &Matrix) -> Result<Vec<Vec<f64>>> {
    let n = inputs.ncols();
    if let Some(bad) = indices.iter().find(|ix| ix.dimension() != n) {
        return Err(PceError::Shape(format!(
            "multi-index {bad} has dimension {}, inputs have {n} columns",
            bad.dimension()
        )));
    }
    let max_deg = indices
        .iter()
        .flat_map(|ix| ix.exponents().iter().copied())
        .max()
        .unwrap_or(0) as usize;
    let m = inputs.nrows();
    // powers[k][d] holds column k raised to power d.
    let powers: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|k| {
            let base = inputs.column(k);
            let mut p = Vec::with_capacity(max_deg + 1);
            p.push(vec![1.0; m]);
            for d in 1..=max_deg {
                let next: Vec<f64> = p[d - 1].iter().zip(&base).map(|(a, b)| a * b).collect();
                p.push(next);
            }
            p
        })
        .collect();
    Ok(indices
        .iter()
        .map(|ix| {
            let mut col = vec![1.0; m];
            for (k, &j) in ix.exponents().iter().enumerate() {
                if j > 0 {
                    for (c, v) in col.iter_mut().zip(&powers[k][j as usize]) {
                        *c *= v;
                    }
                }
            }
            col
        })
        .collect())
}

/// `m x |indices|` matrix of raw (unscaled) monomial values.
pub fn evaluate_monomials(indices: &[MultiIndex], data: &Dataset) -> Result<Matrix> {
    Matrix::from_columns(&monomial_columns(indices, data.inputs())?)
}

/// `(1/m) Σ a_j b_j`.
pub fn empirical_inner_product(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(PceError::Shape(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(PceError::Shape("empty vectors".into()));
    }
    Ok(dot(a, b) / a.len() as f64)
}

pub fn empirical_norm(a: &[f64]) -> f64 {
    (dot(a, a) / a.len() as f64).sqrt()
}

/// A monomial evaluated on the (scaled) training inputs.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub index: MultiIndex,
    pub values: Vec<f64>,
}

impl Candidate {
    /// One candidate per multi-index, evaluated on already scaled inputs.
    pub fn from_indices(indices: &[MultiIndex], scaled_inputs: &Matrix) -> Result<Vec<Self>> {
        Ok(indices
            .iter()
            .cloned()
            .zip(monomial_columns(indices, scaled_inputs)?)
            .map(|(index, values)| Self { index, values })
            .collect())
    }
}

/// One orthonormal polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMember {
    /// Coefficients over the basis terms `0..=k` for member `k`.
    pub coefficients: Vec<f64>,
    /// Values on the training inputs.
    pub values: Vec<f64>,
}

/// Outcome of orthogonalizing a candidate against a basis.
#[derive(Debug, Clone)]
pub enum Orthogonalized {
    Member {
        member: BasisMember,
        residual_norm: f64,
    },
    /// The residual fell below the tolerance; callers skip the candidate.
    Dependent { residual_norm: f64, initial_norm: f64 },
}

/// Polynomials orthonormal under the empirical measure of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    scaling: InputScaling,
    terms: Vec<MultiIndex>,
    members: Vec<BasisMember>,
    sample_count: usize,
    tolerance: f64,
}

impl OrthonormalBasis {
    /// Empty basis over `sample_count` training points.
    pub fn empty(scaling: InputScaling, sample_count: usize) -> Self {
        Self {
            scaling,
            terms: Vec::new(),
            members: Vec::new(),
            sample_count,
            tolerance: DEPENDENCE_TOLERANCE,
        }
    }

    /// Basis holding only the constant polynomial.
    pub fn constant(scaling: InputScaling, sample_count: usize) -> Self {
        let n = scaling.dimension();
        let mut b = Self::empty(scaling, sample_count);
        b.terms.push(MultiIndex::constant(n));
        b.members.push(BasisMember {
            coefficients: vec![1.0],
            values: vec![1.0; sample_count],
        });
        b
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Reassembles a basis from stored parts (no training values).
    pub(crate) fn from_parts(scaling: InputScaling, terms: Vec<MultiIndex>, coefficients: Vec<Vec<f64>>) -> Self {
        let members = coefficients
            .into_iter()
            .map(|c| BasisMember {
                coefficients: c,
                values: Vec::new(),
            })
            .collect();
        Self {
            scaling,
            terms,
            members,
            sample_count: 0,
            tolerance: DEPENDENCE_TOLERANCE,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn scaling(&self) -> &InputScaling {
        &self.scaling
    }

    pub fn terms(&self) -> &[MultiIndex] {
        &self.terms
    }

    pub fn members(&self) -> &[BasisMember] {
        &self.members
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn input_dimension(&self) -> usize {
        self.scaling.dimension()
    }

    /// Whether member 0 is the constant polynomial 1.
    pub fn starts_with_constant(&self) -> bool {
        self.terms.first().is_some_and(MultiIndex::is_constant)
            && self.members[0].coefficients.len() == 1
            && (self.members[0].coefficients[0] - 1.0).abs() < 1e-12
    }

    /// Gram-Schmidt steps for one candidate: subtract the projection on each
    /// member in turn, then normalize.
    pub fn orthogonalize(&self, candidate: &Candidate) -> Result<Orthogonalized> {
        if candidate.values.len() != self.sample_count {
            return Err(PceError::Shape(format!(
                "candidate has {} values, basis was built on {} points",
                candidate.values.len(),
                self.sample_count
            )));
        }
        let l = self.members.len();
        let m = self.sample_count as f64;
        let mut phi = candidate.values.clone();
        let mut coeffs = vec![0.0; l + 1];
        coeffs[l] = 1.0;
        let initial_norm = (dot(&phi, &phi) / m).sqrt();
        for member in &self.members {
            let proj = dot(&phi, &member.values) / m;
            axpy(-proj, &member.values, &mut phi);
            axpy(-proj, &member.coefficients, &mut coeffs[..member.coefficients.len()]);
        }
        let residual_norm = (dot(&phi, &phi) / m).sqrt();
        if !(initial_norm > 0.0) || !(residual_norm > self.tolerance * initial_norm) {
            return Ok(Orthogonalized::Dependent {
                residual_norm,
                initial_norm,
            });
        }
        let inv = 1.0 / residual_norm;
        phi.iter_mut().for_each(|v| *v *= inv);
        coeffs.iter_mut().for_each(|v| *v *= inv);
        Ok(Orthogonalized::Member {
            member: BasisMember {
                coefficients: coeffs,
                values: phi,
            },
            residual_norm,
        })
    }

    /// Appends a member produced by [`Self::orthogonalize`] for `index`.
    pub fn push(&mut self, index: MultiIndex, member: BasisMember) {
        debug_assert_eq!(member.coefficients.len(), self.members.len() + 1);
        self.terms.push(index);
        self.members.push(member);
    }

    /// Orthogonalizes and appends; returns `false` for a dependent candidate.
    pub fn try_extend(&mut self, candidate: &Candidate) -> Result<bool> {
        match self.orthogonalize(candidate)? {
            Orthogonalized::Member { member, .. } => {
                self.push(candidate.index.clone(), member);
                Ok(true)
            }
            Orthogonalized::Dependent { .. } => Ok(false),
        }
    }

    /// Values of member `k` on the training inputs.
    pub fn values(&self, k: usize) -> &[f64] {
        &self.members[k].values
    }

    /// Member-by-member empirical Gram matrix.
    pub fn gram_matrix(&self) -> Matrix {
        let l = self.len();
        let m = self.sample_count as f64;
        let mut g = Matrix::zeros(l, l);
        for i in 0..l {
            for j in 0..=i {
                let v = dot(&self.members[i].values, &self.members[j].values) / m;
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// Largest absolute deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.gram_matrix();
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    /// Values of every member at each row of raw `inputs` (`k x len`).
    pub fn evaluate(&self, inputs: &Matrix) -> Result<Vec<Vec<f64>>> {
        let scaled = self.scaling.apply(inputs)?;
        let monomials = monomial_columns(&self.terms, &scaled)?;
        Ok(self
            .members
            .iter()
            .map(|member| {
                let mut col = vec![0.0; inputs.nrows()];
                for (c, mono) in member.coefficients.iter().zip(&monomials) {
                    axpy(*c, mono, &mut col);
                }
                col
            })
            .collect())
    }

    /// Combined monomial coefficients of `Σ_k weights[k] ψ_k`.
    pub fn collapse(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.terms.len()];
        for (w, member) in weights.iter().zip(&self.members) {
            axpy(*w, &member.coefficients, &mut out[..member.coefficients.len()]);
        }
        out
    }
}

/// Orthonormalizes `candidates` in order. Fails on the first dependent one.
pub fn modified_gram_schmidt(scaling: InputScaling, candidates: &[Candidate]) -> Result<OrthonormalBasis> {
    let m = candidates.first().map_or(0, |c| c.values.len());
    let mut basis = OrthonormalBasis::empty(scaling, m);
    for (i, c) in candidates.iter().enumerate() {
        if !basis.try_extend(c)? {
            return Err(PceError::Dependence { index: i });
        }
    }
    Ok(basis)
}

/// Like [`modified_gram_schmidt`] but skips dependent candidates, returning
/// their positions.
pub fn modified_gram_schmidt_dropping(
    scaling: InputScaling,
    candidates: &[Candidate],
    tolerance: f64,
) -> Result<(OrthonormalBasis, Vec<usize>)> {
    let m = candidates.first().map_or(0, |c| c.values.len());
    let mut basis = OrthonormalBasis::empty(scaling, m).with_tolerance(tolerance);
    let mut dropped = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if !basis.try_extend(c)? {
            dropped.push(i);
        }
    }
    Ok((basis, dropped))
}

/// Full basis over `indices` for the dataset inputs, with fitted scaling.
pub fn orthonormal_basis_for(data: &Dataset, indices: &[MultiIndex]) -> Result<OrthonormalBasis> {
    let scaling = InputScaling::fit(data.inputs());
    let scaled = scaling.apply(data.inputs())?;
    let candidates = Candidate::from_indices(indices, &scaled)?;
    modified_gram_schmidt(scaling, &candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn idx(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn graded_order_two_inputs() {
        let got = total_degree_indices(2, 2);
        let want = vec![idx(&[0, 0]), idx(&[1, 0]), idx(&[0, 1]), idx(&[2, 0]), idx(&[1, 1]), idx(&[0, 2])];
        assert_eq!(got, want);
    }

    #[test]
    fn index_counts() {
        assert_eq!(total_degree_indices(3, 8).len(), 165);
        assert_eq!(total_degree_indices(1, 0), vec![idx(&[0])]);
        assert_eq!(total_degree_indices(10, 4).len(), 1001);
        for n in 1..6 {
            for p in 0..7 {
                assert_eq!(total_degree_indices(n, p).len() as u64, binomial(n as u64 + p as u64, n as u64));
            }
        }
    }

    #[test]
    fn graded_order_is_sorted_and_unique() {
        let ix = total_degree_indices(4, 5);
        for w in ix.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(a.degree() < b.degree() || (a.degree() == b.degree() && a.exponents() > b.exponents()));
        }
    }

    fn dataset(rows: &[Vec<f64>]) -> Dataset {
        let y = vec![0.0; rows.len()];
        Dataset::new(Matrix::from_rows(rows).unwrap(), y).unwrap()
    }

    #[test]
    fn monomial_evaluation() {
        let d = dataset(&[vec![2.0, 9.0], vec![3.0, 9.0]]);
        let m = evaluate_monomials(&[idx(&[0, 0]), idx(&[1, 0])], &d).unwrap();
        assert_eq!(m.column(0), vec![1.0, 1.0]);
        assert_eq!(m.column(1), vec![2.0, 3.0]);
        let d = dataset(&[vec![3.0, 5.0]]);
        assert_eq!(evaluate_monomials(&[idx(&[2, 1])], &d).unwrap().get(0, 0), 45.0);
        assert!(matches!(evaluate_monomials(&[idx(&[1])], &d), Err(PceError::Shape(_))));
    }

    #[test]
    fn inner_products() {
        assert_abs_diff_eq!(empirical_inner_product(&[1.0; 7], &[1.0; 7]).unwrap(), 1.0);
        assert_eq!(empirical_inner_product(&[1.0, -1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(empirical_inner_product(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 32.0 / 3.0, epsilon = 1e-15);
        assert!(empirical_inner_product(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn three_point_basis() -> OrthonormalBasis {
        let d = dataset(&[vec![-1.0], vec![0.0], vec![1.0]]);
        orthonormal_basis_for(&d, &total_degree_indices(1, 2)).unwrap()
    }

    #[test]
    fn hand_computed_three_point_basis() {
        let b = three_point_basis();
        // Inputs already span [-1, 1], so the scaling is the identity.
        assert_eq!(b.scaling().maps()[0], AffineMap::IDENTITY);
        let xs = [-1.0, 0.0, 1.0];
        let s1 = (2.0f64 / 3.0).sqrt();
        let s2 = (2.0f64 / 9.0).sqrt();
        for (j, &x) in xs.iter().enumerate() {
            assert_abs_diff_eq!(b.values(0)[j], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(b.values(1)[j], x / s1, epsilon = 1e-14);
            assert_abs_diff_eq!(b.values(2)[j], (x * x - 2.0 / 3.0) / s2, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(b.members()[2].coefficients[0], -2.0 / 3.0 / s2, epsilon = 1e-14);
        assert_abs_diff_eq!(b.members()[2].coefficients[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.members()[2].coefficients[2], 1.0 / s2, epsilon = 1e-14);
    }

    #[test]
    fn orthogonalize_against_partial_basis() {
        let full = three_point_basis();
        let d = dataset(&[vec![-1.0], vec![0.0], vec![1.0]]);
        let partial = orthonormal_basis_for(&d, &total_degree_indices(1, 1)).unwrap();
        let cand = Candidate { index: idx(&[2]), values: vec![1.0, 0.0, 1.0] };
        match partial.orthogonalize(&cand).unwrap() {
            Orthogonalized::Member { member, residual_norm } => {
                assert_abs_diff_eq!(residual_norm, (2.0f64 / 9.0).sqrt(), epsilon = 1e-14);
                for (a, b) in member.values.iter().zip(full.values(2)) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-14);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
        // A copy of an existing member is dependent.
        let dup = Candidate { index: idx(&[1]), values: full.values(1).to_vec() };
        assert!(matches!(partial.orthogonalize(&dup).unwrap(), Orthogonalized::Dependent { .. }));
    }

    #[test]
    fn already_orthonormal_input_is_unchanged() {
        // 1 and x are orthonormal on {-1, 1}.
        let cands = vec![
            Candidate { index: idx(&[0]), values: vec![1.0, 1.0] },
            Candidate { index: idx(&[1]), values: vec![-1.0, 1.0] },
        ];
        let b = modified_gram_schmidt(InputScaling::identity(1), &cands).unwrap();
        for (k, c) in cands.iter().enumerate() {
            for (a, v) in b.values(k).iter().zip(&c.values) {
                assert_abs_diff_eq!(a, v, epsilon = 1e-12);
            }
        }
        let orth = Candidate { index: idx(&[1]), values: vec![-1.0, 1.0] };
        let single = modified_gram_schmidt(InputScaling::identity(1), &cands[..1]).unwrap();
        match single.orthogonalize(&orth).unwrap() {
            Orthogonalized::Member { member, .. } => assert_eq!(member.values, orth.values),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collinear_candidates_fail() {
        let x = vec![0.3, -0.2, 0.9, 0.5];
        let cands = vec![
            Candidate { index: idx(&[1]), values: x.clone() },
            Candidate { index: idx(&[1]), values: x.iter().map(|v| 2.0 * v).collect() },
        ];
        match modified_gram_schmidt(InputScaling::identity(1), &cands) {
            Err(PceError::Dependence { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let (b, dropped) = modified_gram_schmidt_dropping(InputScaling::identity(1), &cands, DEPENDENCE_TOLERANCE).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(dropped, vec![1]);
    }

    #[test]
    fn scaling_maps_into_unit_interval() {
        let x = Matrix::from_rows(&[vec![1e11, 5.0, 0.0], vec![-4e11, 5.0, 0.0], vec![2e11, 5.0, 0.0]]).unwrap();
        let s = InputScaling::fit(&x);
        let y = s.apply(&x).unwrap();
        for (a, b) in y.column(0).iter().zip([0.25, -1.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(y.column(1), vec![1.0, 1.0, 1.0]);
        assert_eq!(y.column(2), vec![0.0, 0.0, 0.0]);
    }

    fn random_dataset(seed: u64, n: usize, m: usize) -> Dataset {
        let mut rng = stream(seed, 0);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..3.0)).collect()).collect();
        let y = vec![0.0; m];
        Dataset::new(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gram_matrix_is_identity(seed in 0u64..1000, n in 1usize..5, p in 1u32..5) {
            let indices = total_degree_indices(n, p);
            let d = random_dataset(seed, n, 2 * indices.len());
            let b = orthonormal_basis_for(&d, &indices).unwrap();
            prop_assert!(b.orthonormality_defect() < 1e-8);
        }

        #[test]
        fn coefficients_reproduce_training_values(seed in 0u64..1000, n in 1usize..4, p in 1u32..5) {
            let indices = total_degree_indices(n, p);
            let d = random_dataset(seed, n, 2 * indices.len());
            let b = orthonormal_basis_for(&d, &indices).unwrap();
            let vals = b.evaluate(d.inputs()).unwrap();
            for (k, col) in vals.iter().enumerate() {
                let stored = b.values(k);
                let scale = empirical_norm(stored);
                for (a, s) in col.iter().zip(stored) {
                    prop_assert!((a - s).abs() <= 1e-8 * scale);
                }
            }
        }
    }
}
