//! Input distributions for the experiment generators.
//!
//! Marginals are parameterized by the moments of the variable itself.
//! Dependence comes from three mechanisms: a Gaussian covariance, a C-vine of
//! Gumbel-Hougaard pair copulas sharing one root, and a bivariate Gaussian
//! copula tuned to a target Pearson correlation between uniforms.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{param, PceError, Result};
use crate::linalg::{cholesky_psd, Matrix};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MarginalSpec {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, sd: f64 },
    /// Mean and standard deviation of the lognormal variable, not of its log.
    LogNormal { mean: f64, sd: f64 },
    /// Location `alpha` and scale `beta` of the Gumbel (maximum) law.
    Gumbel { alpha: f64, beta: f64 },
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            Self::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Self::LogNormal { mean, sd } => mean.is_finite() && mean > 0.0 && sd.is_finite() && sd > 0.0,
            Self::Gumbel { alpha, beta } => alpha.is_finite() && beta.is_finite() && beta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            param(format!("invalid marginal parameters {self:?}"))
        }
    }

    /// Gumbel marginal with the given mean and standard deviation.
    pub fn gumbel_from_moments(mean: f64, sd: f64) -> Result<Self> {
        let (alpha, beta) = gumbel_params_from_moments(mean, sd)?;
        Ok(Self::Gumbel { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
            Self::Normal { mean, .. } | Self::LogNormal { mean, .. } => mean,
            Self::Gumbel { alpha, beta } => alpha + EULER_GAMMA * beta,
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => (upper - lower) / 12f64.sqrt(),
            Self::Normal { sd, .. } | Self::LogNormal { sd, .. } => sd,
            Self::Gumbel { beta, .. } => beta * std::f64::consts::PI / 6f64.sqrt(),
        }
    }

    /// Quantile function. `u` must lie in (0, 1).
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => lower + (upper - lower) * u,
            Self::Normal { mean, sd } => mean + sd * standard_normal_quantile(u),
            Self::LogNormal { mean, sd } => {
                let (mu, sigma) = lognormal_underlying(mean, sd);
                (mu + sigma * standard_normal_quantile(u)).exp()
            }
            Self::Gumbel { alpha, beta } => alpha - beta * (-(u.ln())).ln(),
        }
    }

    /// Draws one value; assumes the spec was validated.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
            Self::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            Self::LogNormal { mean, sd } => {
                let (mu, sigma) = lognormal_underlying(mean, sd);
                (mu + sigma * rng.sample::<f64, _>(StandardNormal)).exp()
            }
            Self::Gumbel { .. } => self.inverse_cdf(rng.sample(Open01)),
        }
    }
}

/// Parameters `(mu_N, sigma_N)` of the normal law underlying a lognormal with
/// the given mean and standard deviation.
pub fn lognormal_underlying(mean: f64, sd: f64) -> (f64, f64) {
    let var = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - 0.5 * var, var.sqrt())
}

pub fn sample_marginal<R: Rng + ?Sized>(spec: &MarginalSpec, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    if count == 0 {
        return param("sample count must be positive");
    }
    Ok((0..count).map(|_| spec.draw(rng)).collect())
}

/// `beta = sqrt(6) sd / pi`, `alpha = mean - gamma beta`.
pub fn gumbel_params_from_moments(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
        return param(format!("Gumbel moments need a positive finite sd, got {sd}"));
    }
    let beta = 6f64.sqrt() * sd / std::f64::consts::PI;
    Ok((mean - EULER_GAMMA * beta, beta))
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF (Acklam's rational approximation
/// refined with one Halley step).
pub fn standard_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let low = 0.02425;
    let x = if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = standard_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Covariance of a multivariate normal, factorized on construction.
#[derive(Debug, Clone)]
pub struct GaussianCovariance {
    sigma: Matrix,
    factor: Matrix,
}

impl GaussianCovariance {
    pub fn new(sigma: Matrix) -> Result<Self> {
        let factor = cholesky_psd(&sigma)?;
        Ok(Self { sigma, factor })
    }

    pub fn dimension(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.sigma
    }
}

/// `count` rows of i.i.d. `N(mean, cov)` draws.
pub fn sample_mvn<R: Rng + ?Sized>(
    cov: &GaussianCovariance,
    mean: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Matrix> {
    let n = cov.dimension();
    if mean.len() != n {
        return Err(PceError::Shape(format!(
            "mean has length {}, covariance is {n}x{n}",
            mean.len()
        )));
    }
    if count == 0 {
        return param("sample count must be positive");
    }
    let mut out = Matrix::zeros(count, n);
    let mut z = vec![0.0; n];
    for i in 0..count {
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
        }
        for r in 0..n {
            let mut s = mean[r];
            for (c, zc) in z.iter().enumerate().take(r + 1) {
                s += cov.factor.get(r, c) * zc;
            }
            out.set(i, r, s);
        }
    }
    Ok(out)
}

/// Gumbel-Hougaard copula `C(u,v) = exp(-((-ln u)^θ + (-ln v)^θ)^(1/θ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelHougaardCopula {
    theta: f64,
}

/// Bracket for the conditional inverse.
const H_LOWER: f64 = 1e-12;
const H_UPPER: f64 = 1.0 - 1e-12;

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(PceError::Domain(format!("{name} = {x}")))
    }
}

impl GumbelHougaardCopula {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return param(format!("Gumbel-Hougaard theta must be >= 1, got {theta}"));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kendall_tau(&self) -> f64 {
        1.0 - 1.0 / self.theta
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_open_unit("u", u)?;
        check_open_unit("v", v)?;
        Ok(self.cdf_unchecked(u, v))
    }

    fn cdf_unchecked(&self, u: f64, v: f64) -> f64 {
        let t = self.theta;
        let a = ((-u.ln()).powf(t) + (-v.ln()).powf(t)).powf(1.0 / t);
        (-a).exp()
    }

    /// Conditional distribution `h(v | u) = ∂C(u, v)/∂u`.
    pub fn h(&self, v: f64, u_cond: f64) -> Result<f64> {
        check_open_unit("v", v)?;
        check_open_unit("u", u_cond)?;
        Ok(self.h_unchecked(v, u_cond))
    }

    fn h_unchecked(&self, v: f64, u: f64) -> f64 {
        let t = self.theta;
        if t == 1.0 {
            return v;
        }
        let x = -u.ln();
        let y = -v.ln();
        // Factor the larger of x^θ, y^θ out of the sum to avoid overflow.
        let lx = t * x.ln();
        let ly = t * y.ln();
        let lmax = lx.max(ly);
        let ls = lmax + ((lx - lmax).exp() + (ly - lmax).exp()).ln();
        let ln_a = ls / t;
        let a = ln_a.exp();
        (-a + (1.0 - t) * ln_a + (t - 1.0) * x.ln() + x).exp()
    }

    /// Copula density `c(u, v)`.
    pub fn density(&self, u: f64, v: f64) -> f64 {
        let t = self.theta;
        let x = -u.ln();
        let y = -v.ln();
        let a = (x.powf(t) + y.powf(t)).powf(1.0 / t);
        let ln_c = -a + x + y + (t - 1.0) * (x.ln() + y.ln()) + (1.0 - 2.0 * t) * a.ln();
        ln_c.exp() * (a + t - 1.0)
    }

    /// Solves `h(v | u_cond) = w` for `v`.
    ///
    /// With `x = -ln u`, `y = -ln v` and `A = (x^θ + y^θ)^(1/θ)` the equation
    /// reads `A + (θ - 1) ln A = x + (θ - 1) ln x - ln w`, which is increasing
    /// and concave in `A`, so Newton from `A = x` climbs monotonically to the
    /// root. The result is clamped to `[1e-12, 1 - 1e-12]`.
    pub fn h_inverse(&self, w: f64, u_cond: f64) -> Result<f64> {
        check_open_unit("w", w)?;
        check_open_unit("u", u_cond)?;
        let t = self.theta;
        if t == 1.0 {
            return Ok(w);
        }
        let k = t - 1.0;
        let x = -u_cond.ln();
        let target = x + k * x.ln() - w.ln();
        let mut a = x;
        for _ in 0..100 {
            let step = (target - a - k * a.ln()) / (1.0 + k / a);
            a += step;
            if !(step > 1e-15 * a) {
                break;
            }
        }
        // y = (A^θ - x^θ)^(1/θ), written to keep precision when A is close to x.
        let ratio = ((a - x) / x).ln_1p();
        let y = x * ((t * ratio).exp_m1()).powf(1.0 / t);
        Ok((-y).exp().clamp(H_LOWER, H_UPPER))
    }
}

/// C-vine whose first tree joins every variable to variable 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVineSpec {
    pair_copulas: Vec<GumbelHougaardCopula>,
}

impl CVineSpec {
    /// `pair_copulas[j - 2]` links variable 1 with variable `j`.
    pub fn new(pair_copulas: Vec<GumbelHougaardCopula>) -> Self {
        Self { pair_copulas }
    }

    pub fn uniform_theta(dimension: usize, theta: f64) -> Result<Self> {
        if dimension < 1 {
            return param("C-vine needs at least one variable");
        }
        let c = GumbelHougaardCopula::new(theta)?;
        Ok(Self::new(vec![c; dimension - 1]))
    }

    pub fn dimension(&self) -> usize {
        self.pair_copulas.len() + 1
    }

    pub fn pair_copulas(&self) -> &[GumbelHougaardCopula] {
        &self.pair_copulas
    }

    /// Fills `out` (length `dimension`) with one draw.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        let u1: f64 = rng.sample(Open01);
        out[0] = u1;
        for (slot, c) in out[1..].iter_mut().zip(&self.pair_copulas) {
            let w: f64 = rng.sample(Open01);
            *slot = c.h_inverse(w, u1)?;
        }
        Ok(())
    }
}

pub fn sample_cvine<R: Rng + ?Sized>(spec: &CVineSpec, count: usize, rng: &mut R) -> Result<Matrix> {
    if count == 0 {
        return param("sample count must be positive");
    }
    let d = spec.dimension();
    let mut out = Matrix::zeros(count, d);
    let mut row = vec![0.0; d];
    for i in 0..count {
        spec.draw_into(rng, &mut row)?;
        for (j, &v) in row.iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Gaussian correlation that gives uniforms the requested Pearson correlation.
pub fn gaussian_correlation_for_uniform_pearson(target: f64) -> f64 {
    2.0 * (std::f64::consts::PI * target / 6.0).sin()
}

/// Bivariate uniforms from a Gaussian copula with `ρ_g = 2 sin(π target / 6)`.
#[derive(Debug, Clone, Copy)]
pub struct CorrelatedUniformPair {
    rho: f64,
}

impl CorrelatedUniformPair {
    pub fn new(pearson_target: f64) -> Result<Self> {
        if !(pearson_target.abs() < 1.0) {
            return param(format!("target correlation must lie in (-1, 1), got {pearson_target}"));
        }
        Ok(Self {
            rho: gaussian_correlation_for_uniform_pearson(pearson_target),
        })
    }

    pub fn gaussian_rho(&self) -> f64 {
        self.rho
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let w = self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * z2;
        (standard_normal_cdf(z1), standard_normal_cdf(w))
    }
}

pub fn sample_correlated_uniforms<R: Rng + ?Sized>(
    pearson_target: f64,
    count: usize,
    rng: &mut R,
) -> Result<Matrix> {
    let pair = CorrelatedUniformPair::new(pearson_target)?;
    if count == 0 {
        return param("sample count must be positive");
    }
    let mut out = Matrix::zeros(count, 2);
    for i in 0..count {
        let (a, b) = pair.draw(rng);
        out.set(i, 0, a);
        out.set(i, 1, b);
    }
    Ok(out)
}
