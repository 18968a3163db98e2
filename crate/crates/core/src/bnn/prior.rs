//! Parameter, noise-variance and width priors, and an executable form of the
//! uniform lower-bound condition on `[−κ, κ]^T`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{arg, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One-dimensional density used coordinate-wise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Density {
    Normal { mean: f64, sd: f64 },
    Laplace { loc: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Density {
    pub fn standard_normal() -> Self {
        Density::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Density::Normal { sd, .. } => sd > 0.0,
            Density::Laplace { scale, .. } => scale > 0.0,
            Density::Uniform { lo, hi } => lo < hi,
        };
        if ok {
            Ok(())
        } else {
            arg(format!("invalid density {self:?}"))
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Density::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * (LN_2PI + z * z) - sd.ln()
            }
            Density::Laplace { loc, scale } => -(x - loc).abs() / scale - (2.0 * scale).ln(),
            Density::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Density::Laplace { loc, scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Density::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// Covariance of the multivariate Gaussian prior, defined for every `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Covariance {
    /// Diagonal with variances spaced linearly from `lo` to `hi`.
    Diagonal { lo: f64, hi: f64 },
    /// `Σ_{st} = var·ρ^{|s−t|}`.
    Ar1 { var: f64, rho: f64 },
}

impl Covariance {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Covariance::Diagonal { lo, hi } => lo > 0.0 && hi >= lo,
            Covariance::Ar1 { var, rho } => var > 0.0 && rho.abs() < 1.0,
        };
        if ok {
            Ok(())
        } else {
            arg(format!("invalid covariance {self:?}"))
        }
    }

    /// Declared `[λ_min, λ_max]` valid for every `T`.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        match *self {
            Covariance::Diagonal { lo, hi } => (lo, hi),
            Covariance::Ar1 { var, rho } => {
                let r = rho.abs();
                (var * (1.0 - r) / (1.0 + r), var * (1.0 + r) / (1.0 - r))
            }
        }
    }

    pub fn matrix(&self, t: usize) -> DMatrix<f64> {
        match *self {
            Covariance::Diagonal { lo, hi } => {
                let step = if t > 1 { (hi - lo) / (t - 1) as f64 } else { 0.0 };
                DMatrix::from_diagonal(&DVector::from_fn(t, |i, _| lo + step * i as f64))
            }
            Covariance::Ar1 { var, rho } => DMatrix::from_fn(t, t, |i, j| var * rho.powi(i.abs_diff(j) as i32)),
        }
    }
}

/// Cholesky factor of a `T`-dimensional Gaussian, reusable across
/// evaluations.
#[derive(Clone, Debug)]
pub struct GaussianFactor {
    mean: f64,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianFactor {
    pub fn new(mean: f64, cov: &Covariance, t: usize) -> Result<Self> {
        let chol = Cholesky::new(cov.matrix(t)).ok_or_else(|| Error::Invariant("covariance is not positive definite".into()))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { mean, chol, log_det })
    }

    pub fn ln_pdf(&self, theta: &[f64]) -> f64 {
        let t = theta.len();
        let r = DVector::from_iterator(t, theta.iter().map(|v| v - self.mean));
        let z = self.chol.l().solve_lower_triangular(&r).expect("nonsingular factor");
        -0.5 * (t as f64 * LN_2PI + self.log_det + z.norm_squared())
    }
}

/// Distribution of `θ ∈ R^T`.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorFamily {
    /// Coordinates i.i.d. from one density.
    Independent(Density),
    /// `v ~ InvGamma(shape, scale)`, `θ | v ~ N(0, v I_T)`; one shared
    /// auxiliary variance.
    Hierarchical { shape: f64, scale: f64 },
    /// `N(mean·1, Σ)`.
    MultivariateGaussian { mean: f64, cov: Covariance },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaPrior {
    InverseGamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Default for SigmaPrior {
    fn default() -> Self {
        SigmaPrior::InverseGamma { shape: 2.0, scale: 1.0 }
    }
}

impl SigmaPrior {
    pub fn ln_pdf(&self, s2: f64) -> f64 {
        if !(s2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        match *self {
            SigmaPrior::InverseGamma { shape, scale } => {
                shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * s2.ln() - scale / s2
            }
            SigmaPrior::Uniform { lo, hi } => {
                if (lo..=hi).contains(&s2) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SigmaPrior::InverseGamma { shape, scale } => {
                let g: f64 = Gamma::new(shape, 1.0 / scale).expect("valid gamma").sample(rng);
                1.0 / g
            }
            SigmaPrior::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SigmaPrior::InverseGamma { shape, scale } => shape > 0.0 && scale > 0.0,
            SigmaPrior::Uniform { lo, hi } => lo >= 0.0 && hi > lo,
        };
        if ok {
            Ok(())
        } else {
            arg(format!("invalid noise-variance prior {self:?}"))
        }
    }
}

/// `Π_r(r) ∝ e^{−(ln n)^5 r²}` normalized over `r ∈ {1, …, r_max}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthPrior {
    pub n: u64,
    pub r_max: usize,
}

impl WidthPrior {
    pub fn new(n: u64, r_max: usize) -> Result<Self> {
        if n < 1 || r_max < 1 {
            return arg("width prior needs n >= 1 and r_max >= 1");
        }
        Ok(Self { n, r_max })
    }

    /// `(ln n)^5`.
    pub fn rate(&self) -> f64 {
        (self.n as f64).ln().powi(5)
    }

    fn log_norm(&self) -> f64 {
        let c = self.rate();
        // the r = 1 term is the largest
        let top = -c;
        top + (1..=self.r_max).map(|r| (-c * (r * r) as f64 - top).exp()).sum::<f64>().ln()
    }

    pub fn log_mass(&self, r: usize) -> f64 {
        if r == 0 || r > self.r_max {
            return f64::NEG_INFINITY;
        }
        -self.rate() * (r * r) as f64 - self.log_norm()
    }

    /// `ln Π_r(r+1) − ln Π_r(r) = −(ln n)^5 (2r+1)`.
    pub fn log_ratio_up(&self, r: usize) -> f64 {
        -self.rate() * (2 * r + 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub sigma2: SigmaPrior,
    pub width: Option<WidthPrior>,
}

impl PriorSpec {
    pub fn new(family: PriorFamily) -> Self {
        Self {
            family,
            sigma2: SigmaPrior::default(),
            width: None,
        }
    }

    pub fn standard_normal() -> Self {
        Self::new(PriorFamily::Independent(Density::standard_normal()))
    }

    pub fn with_sigma2(mut self, s: SigmaPrior) -> Self {
        self.sigma2 = s;
        self
    }

    pub fn with_width(mut self, w: WidthPrior) -> Self {
        self.width = Some(w);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            PriorFamily::Independent(d) => d.validate()?,
            PriorFamily::Hierarchical { shape, scale } => {
                if !(*shape > 0.0 && *scale > 0.0) {
                    return arg("hierarchical prior needs shape, scale > 0");
                }
            }
            PriorFamily::MultivariateGaussian { cov, .. } => cov.validate()?,
        }
        self.sigma2.validate()
    }

    /// `ln π(θ)`. The multivariate Gaussian factors its covariance on every
    /// call; use [`GaussianFactor`] for repeated evaluation.
    pub fn theta_ln_pdf(&self, theta: &[f64]) -> Result<f64> {
        Ok(match &self.family {
            PriorFamily::Independent(d) => theta.iter().map(|&v| d.ln_pdf(v)).sum(),
            PriorFamily::Hierarchical { shape, scale } => hierarchical_ln_pdf(*shape, *scale, theta),
            PriorFamily::MultivariateGaussian { mean, cov } => GaussianFactor::new(*mean, cov, theta.len())?.ln_pdf(theta),
        })
    }

    /// One draw of `θ ∈ R^t`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match &self.family {
            PriorFamily::Independent(d) => (0..t).map(|_| d.sample(rng)).collect(),
            PriorFamily::Hierarchical { shape, scale } => {
                let v = SigmaPrior::InverseGamma { shape: *shape, scale: *scale }.sample(rng);
                let nd = Normal::new(0.0, v.sqrt()).map_err(|e| Error::Argument(e.to_string()))?;
                (0..t).map(|_| nd.sample(rng)).collect()
            }
            PriorFamily::MultivariateGaussian { mean, cov } => {
                let chol = Cholesky::new(cov.matrix(t)).ok_or_else(|| Error::Invariant("covariance is not positive definite".into()))?;
                let z = DVector::from_fn(t, |_, _| rng.sample::<f64, _>(StandardNormal));
                (chol.l() * z).iter().map(|v| v + mean).collect()
            }
        })
    }
}

/// Multivariate-t marginal of `θ | v ~ N(0, vI)`, `v ~ InvGamma(α, β)`:
/// `Γ(α+T/2)/Γ(α) (2πβ)^{−T/2} (1 + |θ|²/(2β))^{−(α+T/2)}`.
fn hierarchical_ln_pdf(shape: f64, scale: f64, theta: &[f64]) -> f64 {
    let t = theta.len() as f64;
    let q: f64 = theta.iter().map(|v| v * v).sum();
    ln_gamma(shape + 0.5 * t) - ln_gamma(shape) - 0.5 * t * (LN_2PI + scale.ln()) - (shape + 0.5 * t) * (0.5 * q / scale).ln_1p()
}

/// `ln π(θ) + ln π(σ²) + ln Π_r(r)`; the σ² term is included when `sigma2`
/// is given and the width term when the prior carries a width prior and `r`
/// is given. `σ² ≤ 0` yields `−∞`.
pub fn log_prior(prior: &PriorSpec, theta: &[f64], sigma2: Option<f64>, r: Option<usize>) -> Result<f64> {
    let mut lp = prior.theta_ln_pdf(theta)?;
    if let Some(s2) = sigma2 {
        lp += prior.sigma2.ln_pdf(s2);
    }
    if let (Some(w), Some(r)) = (prior.width, r) {
        lp += w.log_mass(r);
    }
    Ok(lp)
}

/// Dimensions compared by [`check_prior_lower_bound`].
pub const BOUND_CHECK_DIMS: [usize; 3] = [10, 100, 1000];
/// Largest relative spread of `δ(T)` across dimensions that counts as
/// dimension-free.
pub const T_INDEPENDENCE_TOL: f64 = 1e-9;
/// Central mass of sampled auxiliary variances used as the hierarchical `Ψ`.
const PSI_MASS: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct PriorBoundReport {
    pub kappa: f64,
    /// `(T, δ(T))` with `δ(T) = (min density over the probes)^{1/T}`.
    pub deltas: Vec<(usize, f64)>,
    /// `(max δ − min δ)/max δ`.
    pub relative_spread: f64,
    pub t_independent: bool,
    /// Family-specific lower bound: analytic for the multivariate Gaussian,
    /// sampled for the hierarchical family.
    pub reference_bound: Option<f64>,
    pub passes: bool,
    pub reason: String,
}

/// Evaluates the joint density at the worst corner of `[−κ, κ]^T` (the
/// coordinate-wise arg-min over `±κ`, plus the alternating-sign corner for
/// correlated families) and at `samples` uniform points, for every `T` in
/// [`BOUND_CHECK_DIMS`].
pub fn check_prior_lower_bound(prior: &PriorSpec, kappa: f64, samples: usize, seed: u64) -> Result<PriorBoundReport> {
    if !(kappa > 0.0) {
        return arg(format!("kappa must be positive, got {kappa}"));
    }
    prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = Vec::new();
    for &t in &BOUND_CHECK_DIMS {
        let factor = match &prior.family {
            PriorFamily::MultivariateGaussian { mean, cov } => Some(GaussianFactor::new(*mean, cov, t)?),
            _ => None,
        };
        let density = |theta: &[f64]| -> Result<f64> {
            match &factor {
                Some(f) => Ok(f.ln_pdf(theta)),
                None => prior.theta_ln_pdf(theta),
            }
        };
        let mut probes: Vec<Vec<f64>> = Vec::with_capacity(samples + 2);
        probes.push(worst_corner(&prior.family, kappa, t));
        probes.push((0..t).map(|i| if i % 2 == 0 { kappa } else { -kappa }).collect());
        for _ in 0..samples {
            probes.push((0..t).map(|_| rng.random_range(-kappa..=kappa)).collect());
        }
        let mut min_ln = f64::INFINITY;
        for p in &probes {
            min_ln = min_ln.min(density(p)?);
        }
        let delta = if min_ln.is_finite() { (min_ln / t as f64).exp() } else { 0.0 };
        deltas.push((t, delta));
    }
    let hi = deltas.iter().map(|d| d.1).fold(0.0, f64::max);
    let lo = deltas.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let relative_spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    let positive = lo > 0.0;
    let t_independent = positive && relative_spread <= T_INDEPENDENCE_TOL;
    let reference_bound = match &prior.family {
        PriorFamily::Independent(_) => None,
        PriorFamily::MultivariateGaussian { mean, cov } => {
            let (lmin, lmax) = cov.eigen_bounds();
            let b = mean.abs();
            Some((2.0 * std::f64::consts::PI * lmax).powf(-0.5) * (-(b + kappa).powi(2) / (2.0 * lmin)).exp())
        }
        PriorFamily::Hierarchical { shape, scale } => Some(hierarchical_empirical_bound(*shape, *scale, kappa, samples.max(1000), &mut rng)),
    };
    let covered = reference_bound.is_some_and(|b| b > 0.0 && deltas.iter().all(|d| d.1 >= b * (1.0 - 1e-12)));
    let (passes, reason) = if !positive {
        (false, "density vanishes inside the cube".to_string())
    } else if t_independent {
        (true, "delta is independent of T".to_string())
    } else if covered {
        (true, "delta varies with T but stays above the family bound".to_string())
    } else {
        (false, "no T-independent lower bound found".to_string())
    };
    Ok(PriorBoundReport {
        kappa,
        deltas,
        relative_spread,
        t_independent,
        reference_bound,
        passes,
        reason,
    })
}

fn worst_corner(family: &PriorFamily, kappa: f64, t: usize) -> Vec<f64> {
    let coord = match family {
        PriorFamily::Independent(d) => {
            if d.ln_pdf(-kappa) < d.ln_pdf(kappa) {
                -kappa
            } else {
                kappa
            }
        }
        PriorFamily::MultivariateGaussian { mean, .. } if *mean > 0.0 => -kappa,
        _ => kappa,
    };
    vec![coord; t]
}

/// Sampled `Ψ = [v_lo, v_hi]` holding the central [`PSI_MASS`] of draws of
/// `v`; returns `Π(Ψ)^{1/T_min}·min_{v ∈ Ψ} N(κ; 0, v)`, the minimum taken at
/// the endpoints since `v ↦ N(κ; 0, v)` is unimodal.
fn hierarchical_empirical_bound(shape: f64, scale: f64, kappa: f64, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let ig = SigmaPrior::InverseGamma { shape, scale };
    let mut v: Vec<f64> = (0..draws).map(|_| ig.sample(rng)).collect();
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - PSI_MASS) / 2.0;
    let lo = v[(tail * draws as f64) as usize];
    let hi = v[((1.0 - tail) * draws as f64) as usize - 1];
    let inside = v.iter().filter(|&&x| x >= lo && x <= hi).count() as f64 / draws as f64;
    let dens = |var: f64| Density::Normal { mean: 0.0, sd: var.sqrt() }.ln_pdf(kappa).exp();
    let t_min = BOUND_CHECK_DIMS[0] as f64;
    inside.powf(1.0 / t_min) * dens(lo).min(dens(hi))
}
