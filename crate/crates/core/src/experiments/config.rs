//! Flat key-value run configurations (TOML).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bnn::{Covariance, Density, ModelKind, PriorFamily, PriorSpec, SigmaPrior};
use crate::error::{Error, Result};

pub const MAX_SWEEP_DIM: usize = 2;
pub const MAX_N: usize = 5000;
pub const MAX_STEPS: usize = 200_000;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_toml(&text)
}

pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn strictly_increasing<T: PartialOrd + Copy>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return config_err(format!("{name} grid is empty"));
    }
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return config_err(format!("{name} grid must be strictly increasing"));
    }
    Ok(())
}

fn distinct_seeds(seeds: &[u64]) -> Result<()> {
    let mut s = seeds.to_vec();
    s.sort_unstable();
    s.dedup();
    if seeds.is_empty() || s.len() != seeds.len() {
        return config_err("seeds must be nonempty and distinct");
    }
    Ok(())
}

pub fn parse_model(s: &str) -> Result<ModelKind> {
    match s {
        "gauss" | "gaussian" => Ok(ModelKind::Gaussian),
        "logit" | "logistic" => Ok(ModelKind::Logistic),
        other => config_err(format!("unknown model '{other}' (expected gauss or logit)")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GadgetConfig {
    pub gadgets: Vec<String>,
    pub a: Vec<f64>,
    pub r: Vec<usize>,
    pub nu: Vec<f64>,
    /// Input dimension for `mult_d`, `poly`, `indicator` and `test`.
    pub d: usize,
    pub grid: usize,
}

impl Default for GadgetConfig {
    fn default() -> Self {
        Self {
            gadgets: ["identity", "relu", "hat", "square", "mult"].map(String::from).to_vec(),
            a: vec![1.0, 2.0],
            r: vec![3, 4, 5, 6, 7, 8],
            nu: vec![0.0],
            d: 2,
            grid: 10_000,
        }
    }
}

impl GadgetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gadgets.is_empty() || self.nu.is_empty() || self.a.is_empty() {
            return config_err("gadget list, a-list and nu-list must be nonempty");
        }
        strictly_increasing("r", &self.r)?;
        if self.grid == 0 || self.d == 0 {
            return config_err("grid and d must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxSweepConfig {
    pub function: String,
    pub d: usize,
    pub a: f64,
    pub beta: f64,
    pub nu: f64,
    pub m: Vec<usize>,
    /// Number of score points.
    pub grid: usize,
}

impl Default for ApproxSweepConfig {
    fn default() -> Self {
        Self {
            function: "sin".into(),
            d: 1,
            a: 1.0,
            beta: 2.0,
            nu: 0.0,
            m: vec![4, 8, 16],
            grid: 10_000,
        }
    }
}

impl ApproxSweepConfig {
    pub fn validate(&self) -> Result<()> {
        strictly_increasing("M", &self.m)?;
        if self.d == 0 || self.d > MAX_SWEEP_DIM {
            return config_err(format!("approximation sweeps support 1 <= d <= {MAX_SWEEP_DIM}"));
        }
        if self.grid == 0 {
            return config_err("grid must be positive");
        }
        Ok(())
    }
}

/// Prior settings as one flat table. Unused keys are ignored by the chosen
/// family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// `normal`, `laplace`, `uniform`, `hierarchical` or `mvn`.
    pub family: String,
    pub mean: f64,
    /// Normal standard deviation, Laplace scale, or inverse-gamma scale of
    /// the hierarchical variance.
    pub scale: f64,
    /// Inverse-gamma shape of the hierarchical variance.
    pub shape: f64,
    pub lo: f64,
    pub hi: f64,
    /// `diagonal` or `ar1`.
    pub cov: String,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub var: f64,
    pub rho: f64,
    /// `inverse_gamma` or `uniform`.
    pub sigma2: String,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    pub sigma2_lo: f64,
    pub sigma2_hi: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            family: "normal".into(),
            mean: 0.0,
            scale: 1.0,
            shape: 2.0,
            lo: -1.0,
            hi: 1.0,
            cov: "diagonal".into(),
            lambda_lo: 1.0,
            lambda_hi: 1.0,
            var: 1.0,
            rho: 0.0,
            sigma2: "inverse_gamma".into(),
            sigma2_shape: 2.0,
            sigma2_scale: 1.0,
            sigma2_lo: 0.0,
            sigma2_hi: 10.0,
        }
    }
}

impl PriorConfig {
    pub fn to_spec(&self) -> Result<PriorSpec> {
        let family = match self.family.as_str() {
            "normal" => PriorFamily::Independent(Density::Normal { mean: self.mean, sd: self.scale }),
            "laplace" => PriorFamily::Independent(Density::Laplace { loc: self.mean, scale: self.scale }),
            "uniform" => PriorFamily::Independent(Density::Uniform { lo: self.lo, hi: self.hi }),
            "hierarchical" => PriorFamily::Hierarchical { shape: self.shape, scale: self.scale },
            "mvn" => {
                let cov = match self.cov.as_str() {
                    "diagonal" => Covariance::Diagonal { lo: self.lambda_lo, hi: self.lambda_hi },
                    "ar1" => Covariance::Ar1 { var: self.var, rho: self.rho },
                    other => return config_err(format!("unknown covariance '{other}'")),
                };
                PriorFamily::MultivariateGaussian { mean: self.mean, cov }
            }
            other => return config_err(format!("unknown prior family '{other}'")),
        };
        let sigma2 = match self.sigma2.as_str() {
            "inverse_gamma" => SigmaPrior::InverseGamma { shape: self.sigma2_shape, scale: self.sigma2_scale },
            "uniform" => SigmaPrior::Uniform { lo: self.sigma2_lo, hi: self.sigma2_hi },
            other => return config_err(format!("unknown noise-variance prior '{other}'")),
        };
        let spec = PriorSpec::new(family).with_sigma2(sigma2);
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    /// `gauss` or `logit`.
    pub model: String,
    pub function: String,
    pub d: usize,
    pub a: f64,
    pub beta: f64,
    pub nu: f64,
    pub sigma0_sq: f64,
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    pub c_l: f64,
    pub c_r: f64,
    pub steps: usize,
    /// Fraction of the chain used for step-size adaptation and discarded
    /// from the error summary.
    pub burn_in: f64,
    pub thin: usize,
    pub step_size: f64,
    pub px_samples: usize,
    /// Truncation level; defaults to `max(1, 2·sup|f_0|)`.
    pub f_bound: Option<f64>,
    pub adaptive: bool,
    pub r_max: usize,
    pub width_move_prob: f64,
    pub prior: PriorConfig,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            model: "gauss".into(),
            function: "sin".into(),
            d: 1,
            a: 1.0,
            beta: 2.0,
            nu: 0.0,
            sigma0_sq: 0.25,
            n: vec![200, 800, 3200],
            seeds: vec![1, 2, 3],
            c_l: 0.3,
            c_r: 2.0,
            steps: 200_000,
            burn_in: 0.5,
            thin: 100,
            step_size: 0.05,
            px_samples: 2000,
            f_bound: None,
            adaptive: false,
            r_max: 8,
            width_move_prob: 0.1,
            prior: PriorConfig::default(),
        }
    }
}

impl ConcentrationConfig {
    pub fn validate(&self) -> Result<()> {
        parse_model(&self.model)?;
        strictly_increasing("n", &self.n)?;
        distinct_seeds(&self.seeds)?;
        if self.n[0] < 2 || *self.n.last().expect("nonempty") > MAX_N {
            return config_err(format!("n must lie in [2, {MAX_N}]"));
        }
        if self.steps == 0 || self.steps > MAX_STEPS {
            return config_err(format!("steps must lie in [1, {MAX_STEPS}]"));
        }
        if !(0.0..1.0).contains(&self.burn_in) || self.thin == 0 || self.px_samples == 0 {
            return config_err("need burn_in in [0,1), thin >= 1, px_samples >= 1");
        }
        if self.d == 0 || !(self.c_l > 0.0 && self.c_r > 0.0 && self.beta > 0.0) {
            return config_err("need d >= 1 and positive beta, c_l, c_r");
        }
        self.prior.to_spec()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnnRunConfig {
    pub model: String,
    pub function: String,
    pub d: usize,
    pub a: f64,
    pub beta: f64,
    pub nu: f64,
    pub sigma0_sq: f64,
    pub n: usize,
    pub seed: u64,
    pub steps: usize,
    pub burn_in: f64,
    pub step_size: f64,
    pub c_l: f64,
    pub c_r: f64,
    pub f_bound: Option<f64>,
    pub adaptive: bool,
    pub r_max: usize,
    pub width_move_prob: f64,
    /// Emit one row every `every` steps.
    pub every: usize,
    pub px_samples: usize,
    pub prior: PriorConfig,
}

impl Default for BnnRunConfig {
    fn default() -> Self {
        Self {
            model: "gauss".into(),
            function: "sin".into(),
            d: 1,
            a: 1.0,
            beta: 2.0,
            nu: 0.0,
            sigma0_sq: 0.25,
            n: 200,
            seed: 0,
            steps: 10_000,
            burn_in: 0.5,
            step_size: 0.05,
            c_l: 0.3,
            c_r: 2.0,
            f_bound: None,
            adaptive: false,
            r_max: 8,
            width_move_prob: 0.1,
            every: 100,
            px_samples: 1000,
            prior: PriorConfig::default(),
        }
    }
}

impl BnnRunConfig {
    pub fn validate(&self) -> Result<()> {
        parse_model(&self.model)?;
        if self.n < 2 || self.n > MAX_N {
            return config_err(format!("n must lie in [2, {MAX_N}]"));
        }
        if self.steps == 0 || self.steps > MAX_STEPS || self.every == 0 || self.px_samples == 0 {
            return config_err(format!("need 1 <= steps <= {MAX_STEPS}, every >= 1, px_samples >= 1"));
        }
        if !(0.0..1.0).contains(&self.burn_in) || self.d == 0 {
            return config_err("need burn_in in [0,1) and d >= 1");
        }
        self.prior.to_spec()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        GadgetConfig::default().validate().unwrap();
        ApproxSweepConfig::default().validate().unwrap();
        ConcentrationConfig::default().validate().unwrap();
        BnnRunConfig::default().validate().unwrap();
    }

    #[test]
    fn flat_toml_round_trip() {
        let c: ConcentrationConfig = parse_toml("n = [100, 400, 1600]\nseeds = [7, 8]\n[prior]\nfamily = \"laplace\"\n").unwrap();
        assert_eq!(c.n, vec![100, 400, 1600]);
        assert_eq!(c.prior.family, "laplace");
        assert_eq!(c.steps, ConcentrationConfig::default().steps);
        let back: ConcentrationConfig = parse_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn grids_and_keys_are_checked() {
        let bad = ApproxSweepConfig { m: vec![8, 4], ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let dup = ConcentrationConfig { seeds: vec![1, 1], ..Default::default() };
        assert!(dup.validate().is_err());
        assert!(parse_toml::<ApproxSweepConfig>("unknown_key = 1").is_err());
        let p = PriorConfig { family: "cauchy".into(), ..Default::default() };
        assert!(matches!(p.to_spec(), Err(Error::Config(_))));
    }
}
