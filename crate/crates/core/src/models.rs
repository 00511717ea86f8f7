//! The four experiment generators and their reference output deviations.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distributions::{
    sample_mvn, CVineSpec, CorrelatedUniformPair, GaussianCovariance, MarginalSpec,
};
use crate::error::{param, Result};
use crate::linalg::Matrix;
use crate::metrics::{summarize_runs, Aggregate};
use crate::rng::stream;
use crate::stats::sample_sd;

/// `sin x1 + 7 sin² x2 + 0.1 x3⁴ sin x1`.
pub fn ishigami(x: &[f64]) -> f64 {
    let s1 = x[0].sin();
    let s2 = x[1].sin();
    s1 + 7.0 * s2 * s2 + 0.1 * x[2].powi(4) * s1
}

/// Exact standard deviation of the Ishigami function over `U(−π, π)³`.
pub fn ishigami_sd() -> f64 {
    let (a, b) = (7.0f64, 0.1f64);
    (a * a / 8.0 + b * PI.powi(4) / 5.0 + b * b * PI.powi(8) / 18.0 + 0.5).sqrt()
}

/// Where a reference standard deviation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    Analytic,
    Paper,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Ishigami,
    Example2,
    Truss,
    Hiv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestModel {
    pub name: &'static str,
    pub input_dimension: usize,
    pub reference_sd: f64,
    pub reference_source: ReferenceSource,
}

impl Example {
    pub const ALL: [Example; 4] = [Example::Ishigami, Example::Example2, Example::Truss, Example::Hiv];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ishigami => "ishigami",
            Self::Example2 => "example2",
            Self::Truss => "truss",
            Self::Hiv => "hiv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn model(self) -> TestModel {
        let (input_dimension, reference_sd, reference_source) = match self {
            Self::Ishigami => (3, ishigami_sd(), ReferenceSource::Analytic),
            Self::Example2 => (6, 1.655, ReferenceSource::Paper),
            Self::Truss => (10, 2.169, ReferenceSource::MonteCarlo),
            Self::Hiv => (10, 0.252, ReferenceSource::Paper),
        };
        TestModel {
            name: self.name(),
            input_dimension,
            reference_sd,
            reference_source,
        }
    }

    /// Output for one row of observed inputs.
    pub fn response(self, x: &[f64]) -> f64 {
        match self {
            Self::Ishigami => ishigami(x),
            Self::Example2 => example2_response(x),
            Self::Truss => truss_response(x),
            Self::Hiv => hiv_r0(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, count: usize, rng: &mut R) -> Result<Dataset> {
        match self {
            Self::Ishigami => ishigami_sample(count, rng),
            Self::Example2 => example2_sample(count, rng),
            Self::Truss => truss_sample(count, rng),
            Self::Hiv => hiv_sample(count, rng),
        }
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return param("sample count must be positive");
    }
    Ok(())
}

fn finish(rows: Vec<f64>, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Dataset> {
    let count = rows.len() / n;
    let x = Matrix::from_row_major(count, n, rows)?;
    let y = x.rows_iter().map(f).collect();
    Dataset::new(x, y)
}

pub fn ishigami_sample<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Dataset> {
    check_count(count)?;
    let rows: Vec<f64> = (0..3 * count).map(|_| rng.random_range(-PI..PI)).collect();
    finish(rows, 3, ishigami)
}

fn example2_response(x: &[f64]) -> f64 {
    x[0] * x[1] + x[2] * x[3] + x[4] * x[5]
}

/// Inputs X1..X6 and output of the dependent-input example. The latent
/// uniform shared by X5 and X6 is not returned.
pub fn example2_sample<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Dataset> {
    check_count(count)?;
    let mut sigma = Matrix::zeros(4, 4);
    for i in 0..4 {
        sigma.set(i, i, 1.0);
    }
    sigma.set(2, 3, 0.3);
    sigma.set(3, 2, 0.3);
    let cov = GaussianCovariance::new(sigma)?;
    let gauss = sample_mvn(&cov, &[0.0; 4], count, rng)?;
    let (t1, t2, t3) = (0.4, 0.6, 1.0);
    let mut rows = Vec::with_capacity(6 * count);
    for g in gauss.rows_iter() {
        let latent: f64 = rng.random();
        let e5: f64 = rng.random();
        let e6: f64 = rng.random();
        rows.extend_from_slice(g);
        rows.push(t1 * latent + e5);
        rows.push(t2 * latent + t3 * latent * latent + e6);
    }
    finish(rows, 6, example2_response)
}

const TRUSS_INTERCEPT: f64 = 2.8070;
const LOAD_MEAN: f64 = 5e4;
const LOAD_SD: f64 = 7.5e3;

/// Marginal means and standard deviations of E1, E2, A1, A2.
const TRUSS_SECTIONS: [(f64, f64); 4] = [(2.1e11, 2.1e10), (2.1e11, 2.1e10), (2.0e-3, 2.0e-4), (1.0e-3, 1.0e-4)];

/// Quadratic response surface of the truss deflection in the standardized
/// inputs (E1', E2', A1', A2', P1'..P6').
pub fn truss_response(x: &[f64]) -> f64 {
    let mut s = [0.0; 10];
    for (j, &(mu, sd)) in TRUSS_SECTIONS.iter().enumerate() {
        s[j] = (x[j] - mu) / sd;
    }
    for j in 4..10 {
        s[j] = (x[j] - LOAD_MEAN) / LOAD_SD;
    }
    let [e1, e2, a1, a2, p1, p2, p3, p4, p5, p6] = s;
    TRUSS_INTERCEPT + 1.2598 * e1 + 0.2147 * e2 + 1.2559 * a1 + 0.2133 * a2 - 0.1510 * p1 - 0.4238 * p2
        - 0.6100 * p3
        - 0.6100 * p4
        - 0.4238 * p5
        - 0.1510 * p6
        - 0.1978 * e1 * e1
        - 0.0362 * e2 * e2
        - 0.2016 * a1 * a1
        - 0.0346 * a2 * a2
        + 0.0023 * p1 * p1
        + 0.0008 * p2 * p2
        + 0.0036 * p3 * p3
        + 0.0036 * p4 * p4
        + 0.0008 * p5 * p5
        + 0.0023 * p6 * p6
        - 0.0042 * e1 * e2
        - 0.3022 * e1 * a1
        - 0.0110 * e1 * a2
        + 0.0381 * e1 * p1
        + 0.0871 * e1 * p2
        + 0.1232 * e1 * p3
        + 0.1232 * e1 * p4
        + 0.0871 * e1 * p5
        + 0.0346 * e1 * p6
        + 0.0041 * e2 * a1
        + 0.0110 * a1 * a2
        + 0.0261 * a1 * p1
        + 0.0831 * a1 * p2
        + 0.1172 * a1 * p3
        + 0.1172 * a1 * p4
        + 0.0832 * a1 * p5
        + 0.0296 * a1 * p6
}

/// Columns E1, E2, A1, A2 (lognormal) and loads P1..P6 (Gumbel marginals
/// joined by a C-vine with θ = 1.1 rooted at P1).
pub fn truss_sample<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Dataset> {
    check_count(count)?;
    let sections: Vec<MarginalSpec> = TRUSS_SECTIONS
        .iter()
        .map(|&(mean, sd)| MarginalSpec::LogNormal { mean, sd })
        .collect();
    let load = MarginalSpec::gumbel_from_moments(LOAD_MEAN, LOAD_SD)?;
    let vine = CVineSpec::uniform_theta(6, 1.1)?;
    let mut u = [0.0; 6];
    let mut rows = Vec::with_capacity(10 * count);
    for _ in 0..count {
        for s in &sections {
            rows.push(s.draw(rng));
        }
        vine.draw_into(rng, &mut u)?;
        rows.extend(u.iter().map(|&v| load.inverse_cdf(v)));
    }
    finish(rows, 10, truss_response)
}

/// Ranges of Q0, β0, γ, β1, β2, n1, n2, θd, α, κ.
pub const HIV_RANGES: [(f64, f64); 10] = [
    (0.0261, 0.0319),
    (0.027, 0.033),
    (0.36, 0.44),
    (0.18, 0.22),
    (0.072, 0.088),
    (1.8, 2.2),
    (1.8, 2.2),
    (0.018, 0.022),
    (0.54, 0.66),
    (0.09, 0.11),
];

/// Basic reproduction number for inputs ordered as in [`HIV_RANGES`]. The
/// factor multiplying the asymptomatic contact term is `θd − κ`.
pub fn hiv_r0(x: &[f64]) -> f64 {
    let [q0, b0, g, b1, b2, n1, n2, td, al, ka] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9]];
    let num = b0 * (1.0 - g) * td * td + b1 * n1 * q0 * (td - ka) + b2 * n2 * al * q0 + (1.0 - g) * (ka + al) * b0 * td;
    num / (td * (td + ka) * (td + al))
}

/// All inputs uniform on their ranges; (β1, n1) and (β2, n2) carry Pearson
/// correlations 0.3 and 0.5.
pub fn hiv_sample<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Dataset> {
    check_count(count)?;
    let pair1 = CorrelatedUniformPair::new(0.3)?;
    let pair2 = CorrelatedUniformPair::new(0.5)?;
    let to_range = |u: f64, j: usize| HIV_RANGES[j].0 + (HIV_RANGES[j].1 - HIV_RANGES[j].0) * u;
    let mut rows = Vec::with_capacity(10 * count);
    let mut u = [0.0; 10];
    for _ in 0..count {
        let (b1, n1) = pair1.draw(rng);
        let (b2, n2) = pair2.draw(rng);
        u[3] = b1;
        u[5] = n1;
        u[4] = b2;
        u[6] = n2;
        for j in [0, 1, 2, 7, 8, 9] {
            u[j] = rng.sample(Open01);
        }
        rows.extend((0..10).map(|j| to_range(u[j], j)));
    }
    finish(rows, 10, hiv_r0)
}

/// Mean and standard error over `runs` of the sample standard deviation of
/// `samples_per_run` fresh outputs. Run `r` draws from stream `r` of `seed`.
pub fn monte_carlo_reference(example: Example, runs: usize, samples_per_run: usize, seed: u64) -> Result<Aggregate> {
    if runs == 0 || samples_per_run < 2 {
        return param("need at least one run of at least two samples");
    }
    let sds: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let d = example.sample(samples_per_run, &mut stream(seed, r as u64))?;
            Ok(sample_sd(d.outputs()))
        })
        .collect::<Result<_>>()?;
    summarize_runs(&sds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{kendall_tau, mean, pearson};
    use approx::assert_abs_diff_eq;

    fn column(d: &Dataset, j: usize) -> Vec<f64> {
        d.inputs().column(j)
    }

    #[test]
    fn ishigami_values() {
        assert_eq!(ishigami(&[0.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(ishigami(&[PI / 2.0, 0.0, 0.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ishigami_sd(), 3.720831619506485, epsilon = 1e-12);
        assert_abs_diff_eq!(ishigami_sd().powi(2), 13.8446, epsilon = 1e-4);
    }

    #[test]
    fn ishigami_monte_carlo_matches_analytic() {
        let agg = monte_carlo_reference(Example::Ishigami, 4, 100_000, 1).unwrap();
        assert!((agg.mean() / ishigami_sd() - 1.0).abs() < 0.005);
    }

    #[test]
    fn example2_dependence() {
        let d = example2_sample(100_000, &mut stream(2, 0)).unwrap();
        assert!((pearson(&column(&d, 2), &column(&d, 3)) - 0.3).abs() < 0.02);
        assert!(pearson(&column(&d, 0), &column(&d, 1)).abs() < 0.02);
        assert!(pearson(&column(&d, 4), &column(&d, 5)) > 0.0);
        // X5 = 0.4 X + U has mean 0.7; X6 = 0.6 X + X² + U has mean 0.3 + 1/3 + 0.5.
        assert!((mean(&column(&d, 4)) - 0.7).abs() < 0.01);
        assert!((mean(&column(&d, 5)) - (0.8 + 1.0 / 3.0)).abs() < 0.01);
    }

    #[test]
    fn truss_intercept_at_mean_inputs() {
        let mut x = [0.0; 10];
        for (j, &(mu, _)) in TRUSS_SECTIONS.iter().enumerate() {
            x[j] = mu;
        }
        x[4..].fill(LOAD_MEAN);
        assert_eq!(truss_response(&x), 2.8070);
    }

    #[test]
    fn truss_marginals_and_dependence() {
        let d = truss_sample(100_000, &mut stream(3, 0)).unwrap();
        let se = |sd: f64| 3.0 * sd / (d.len() as f64).sqrt();
        for (j, &(mu, sd)) in TRUSS_SECTIONS.iter().enumerate() {
            assert!((mean(&column(&d, j)) - mu).abs() < se(sd));
        }
        let p1 = column(&d, 4);
        for j in 5..10 {
            let pj = column(&d, j);
            assert!((mean(&pj) - LOAD_MEAN).abs() < se(LOAD_SD));
            assert!((kendall_tau(&p1, &pj) - (1.0 - 1.0 / 1.1)).abs() < 0.02);
        }
    }

    #[test]
    fn hiv_midpoint_matches_hand_evaluation() {
        let mid: Vec<f64> = HIV_RANGES.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        // Q0 = 0.029, β0 = 0.03, γ = 0.4, β1 = 0.2, β2 = 0.08, n1 = n2 = 2,
        // θd = 0.02, α = 0.6, κ = 0.1.
        let term1 = 0.03 * 0.6 * 0.0004;
        let term2 = 0.2 * 2.0 * 0.029 * (0.02 - 0.1);
        let term3 = 0.08 * 2.0 * 0.6 * 0.029;
        let term4 = 0.6 * 0.7 * 0.03 * 0.02;
        let hand = (term1 + term2 + term3 + term4) / (0.02 * 0.12 * 0.62);
        assert!((hiv_r0(&mid) - hand).abs() < 1e-12 * hand.abs());
        assert_abs_diff_eq!(hand, 1.421505376344086, epsilon = 1e-12);
    }

    #[test]
    fn hiv_ranges_and_correlations() {
        let d = hiv_sample(100_000, &mut stream(4, 0)).unwrap();
        for (j, &(a, b)) in HIV_RANGES.iter().enumerate() {
            let c = column(&d, j);
            assert!(c.iter().all(|&v| v > a && v < b));
            let se = 3.0 * (b - a) / 12f64.sqrt() / (c.len() as f64).sqrt();
            assert!((mean(&c) - 0.5 * (a + b)).abs() < se);
        }
        assert!((pearson(&column(&d, 3), &column(&d, 5)) - 0.3).abs() < 0.02);
        assert!((pearson(&column(&d, 4), &column(&d, 6)) - 0.5).abs() < 0.02);
        assert!(pearson(&column(&d, 3), &column(&d, 4)).abs() < 0.02);
    }

    #[test]
    fn generators_are_deterministic() {
        for e in Example::ALL {
            let a = e.sample(50, &mut stream(7, 1)).unwrap();
            let b = e.sample(50, &mut stream(7, 1)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.input_dimension(), e.model().input_dimension);
            for (row, y) in a.inputs().rows_iter().zip(a.outputs()) {
                assert_eq!(e.response(row), *y);
            }
        }
    }

    #[test]
    fn tiny_monte_carlo_is_finite() {
        for e in Example::ALL {
            let agg = monte_carlo_reference(e, 5, 2, 0).unwrap();
            assert!(agg.mean().is_finite() && agg.standard_error() > 0.0);
        }
    }
}
