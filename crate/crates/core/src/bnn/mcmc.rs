//! Random-walk Metropolis samplers over network parameters, noise variance
//! and hidden width.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::{sigmoid, truncate, BatchEvaluator, Dataset, ModelKind, ModelSpec};
use super::prior::{GaussianFactor, PriorFamily, PriorSpec, SigmaPrior};
use crate::approximator::TargetFunction;
use crate::error::{arg, Error, Result};
use crate::net::{Architecture, DenseNetwork};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Steps between step-size updates during burn-in.
pub const ADAPT_WINDOW: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Zeros,
    /// `θ` and `σ²` drawn from the prior.
    Prior,
    Given { theta: Vec<f64>, sigma2: Option<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct McmcConfig {
    pub steps: usize,
    /// Per-coordinate standard deviation of the `θ` proposal.
    pub step_size: f64,
    /// Standard deviation of the `ln σ²` proposal.
    pub sigma2_step: f64,
    pub seed: u64,
    pub init: Init,
    /// Step sizes are adapted only during the first `burn_in` steps.
    pub burn_in: usize,
    pub adapt: bool,
    /// Keep every `thin`-th state.
    pub thin: usize,
    /// Skip `θ` moves; the network stays at its initial value.
    pub freeze_theta: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            step_size: 0.05,
            sigma2_step: 0.2,
            seed: 0,
            init: Init::Prior,
            burn_in: 0,
            adapt: true,
            thin: 1,
            freeze_theta: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub base: McmcConfig,
    pub r_init: usize,
    pub r_max: usize,
    pub width_move_prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub step: usize,
    pub theta: Vec<f64>,
    /// Present for the Gaussian model only.
    pub sigma2: Option<f64>,
    pub r: usize,
    pub log_post: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, ok: bool) {
        self.proposed += 1;
        self.accepted += ok as u64;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorChain {
    /// Model at the initial width; `states[i].r` gives each state's width.
    pub model: ModelSpec,
    pub states: Vec<ChainState>,
    pub theta_moves: MoveStats,
    pub sigma2_moves: MoveStats,
    pub width_moves: MoveStats,
    pub seed: u64,
    /// `θ` step size after adaptation.
    pub step_size: f64,
}

impl PosteriorChain {
    pub fn network(&self, i: usize) -> Result<DenseNetwork> {
        let s = &self.states[i];
        DenseNetwork::from_flat(&self.model.architecture_for(s.r)?, self.model.nu, &s.theta)
    }

    pub fn last(&self) -> &ChainState {
        self.states.last().expect("chains hold the initial state")
    }
}

/// Per-width cache for the parameter prior.
struct PriorEval<'a> {
    prior: &'a PriorSpec,
    factor: Option<(usize, GaussianFactor)>,
}

impl<'a> PriorEval<'a> {
    fn theta(&mut self, theta: &[f64]) -> Result<f64> {
        match &self.prior.family {
            PriorFamily::MultivariateGaussian { mean, cov } => {
                let t = theta.len();
                if self.factor.as_ref().map(|f| f.0) != Some(t) {
                    self.factor = Some((t, GaussianFactor::new(*mean, cov, t)?));
                }
                Ok(self.factor.as_ref().expect("factor").1.ln_pdf(theta))
            }
            _ => self.prior.theta_ln_pdf(theta),
        }
    }

    fn total(&mut self, theta: &[f64], sigma2: Option<f64>, r: usize, adaptive: bool) -> Result<f64> {
        let mut lp = self.theta(theta)?;
        if let Some(s2) = sigma2 {
            lp += self.prior.sigma2.ln_pdf(s2);
        }
        if adaptive {
            if let Some(w) = self.prior.width {
                lp += w.log_mass(r);
            }
        }
        Ok(lp)
    }
}

/// Data-dependent part of the likelihood: residual sum of squares for the
/// Gaussian model, the log-likelihood itself for the logistic one.
fn fit_stat(kind: ModelKind, f: f64, out: &[f64], y: &[f64]) -> f64 {
    match kind {
        ModelKind::Gaussian => y.iter().zip(out).map(|(yi, z)| (yi - truncate(*z, f)).powi(2)).sum(),
        ModelKind::Logistic => y
            .iter()
            .zip(out)
            .map(|(yi, z)| {
                let t = truncate(*z, f);
                yi * super::model::log_sigmoid(t) + (1.0 - yi) * super::model::log_sigmoid(-t)
            })
            .sum(),
    }
}

fn lik_from_stat(kind: ModelKind, stat: f64, sigma2: Option<f64>, n: usize) -> f64 {
    match (kind, sigma2) {
        (ModelKind::Gaussian, Some(s2)) if s2 > 0.0 => -0.5 * n as f64 * (LN_2PI + s2.ln()) - stat / (2.0 * s2),
        (ModelKind::Gaussian, _) => f64::NEG_INFINITY,
        (ModelKind::Logistic, _) => stat,
    }
}

/// Copies every weight/bias of `from` that also exists in `to` (same layer,
/// row and column) and fills the rest with `fill()`, visiting positions in
/// flat order.
pub fn transport_parameters(theta: &[f64], from: &Architecture, to: &Architecture, mut fill: impl FnMut() -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(to.param_count());
    let mut pos = 0;
    for (wf, wt) in from.widths().windows(2).zip(to.widths().windows(2)) {
        let (cf, rf) = (wf[0], wf[1]);
        let (ct, rt) = (wt[0], wt[1]);
        for i in 0..rt {
            for j in 0..ct {
                out.push(if i < rf && j < cf { theta[pos + i * cf + j] } else { fill() });
            }
        }
        for i in 0..rt {
            out.push(if i < rf { theta[pos + rf * cf + i] } else { fill() });
        }
        pos += rf * (cf + 1);
    }
    out
}

struct Sampler<'a> {
    model: &'a ModelSpec,
    prior: PriorEval<'a>,
    data: &'a Dataset,
    eval: BatchEvaluator,
    rng: ChaCha8Rng,
    adaptive: bool,
    theta: Vec<f64>,
    sigma2: Option<f64>,
    r: usize,
    arch: Architecture,
    stat: f64,
    log_lik: f64,
    log_prior: f64,
}

impl<'a> Sampler<'a> {
    fn log_post(&self) -> f64 {
        self.log_lik + self.log_prior
    }

    fn stat_for(&mut self, arch: &Architecture, theta: &[f64]) -> f64 {
        if self.eval.is_empty() {
            return fit_stat(self.model.kind, self.model.f_bound, &[], &[]);
        }
        let out = self.eval.eval(arch, self.model.nu, theta);
        fit_stat(self.model.kind, self.model.f_bound, out, &self.data.y)
    }

    fn accept(&mut self, log_alpha: f64) -> bool {
        let u: f64 = self.rng.random();
        log_alpha >= 0.0 || u.ln() < log_alpha
    }

    fn theta_move(&mut self, step: f64) -> Result<bool> {
        let prop: Vec<f64> = self
            .theta
            .iter()
            .map(|v| v + step * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        let arch = self.arch.clone();
        let stat = self.stat_for(&arch, &prop);
        let ll = lik_from_stat(self.model.kind, stat, self.sigma2, self.data.len());
        let lp = self.prior.total(&prop, self.sigma2, self.r, self.adaptive)?;
        let ok = self.accept(ll + lp - self.log_post());
        if ok && (ll + lp).is_finite() {
            self.theta = prop;
            self.stat = stat;
            self.log_lik = ll;
            self.log_prior = lp;
            return Ok(true);
        }
        Ok(false)
    }

    fn sigma2_move(&mut self, step: f64) -> Result<bool> {
        let s2 = self.sigma2.expect("gaussian model");
        let z: f64 = self.rng.sample(StandardNormal);
        let prop = s2 * (step * z).exp();
        let ll = lik_from_stat(self.model.kind, self.stat, Some(prop), self.data.len());
        let lp = self.prior.total(&self.theta, Some(prop), self.r, self.adaptive)?;
        // log-scale proposal: Jacobian ln σ²' − ln σ²
        let ok = self.accept(ll + lp - self.log_post() + prop.ln() - s2.ln());
        if ok && (ll + lp).is_finite() {
            self.sigma2 = Some(prop);
            self.log_lik = ll;
            self.log_prior = lp;
            return Ok(true);
        }
        Ok(false)
    }

    /// Birth/death of one neuron per hidden layer. New parameters are prior
    /// draws, so their density cancels and the ratio is the likelihood ratio
    /// times the width-prior ratio.
    fn width_move(&mut self, r_max: usize) -> Result<bool> {
        let density = match &self.prior.prior.family {
            PriorFamily::Independent(d) => *d,
            _ => return Err(Error::Capability("width moves need an independent parameter prior".into())),
        };
        let up = self.rng.random::<bool>();
        let new_r = if up { self.r + 1 } else { self.r - 1 };
        if new_r == 0 || new_r > r_max {
            return Ok(false);
        }
        let new_arch = self.model.architecture_for(new_r)?;
        let rng = &mut self.rng;
        let prop = transport_parameters(&self.theta, &self.arch, &new_arch, || density.sample(rng));
        let stat = self.stat_for(&new_arch, &prop);
        let ll = lik_from_stat(self.model.kind, stat, self.sigma2, self.data.len());
        let w = self.prior.prior.width.ok_or_else(|| Error::Argument("adaptive sampling needs a width prior".into()))?;
        let ok = self.accept(ll - self.log_lik + w.log_mass(new_r) - w.log_mass(self.r));
        if ok && ll.is_finite() {
            self.log_prior = self.prior.total(&prop, self.sigma2, new_r, true)?;
            self.theta = prop;
            self.arch = new_arch;
            self.r = new_r;
            self.stat = stat;
            self.log_lik = ll;
            return Ok(true);
        }
        Ok(false)
    }

    fn snapshot(&self, step: usize) -> ChainState {
        ChainState {
            step,
            theta: self.theta.clone(),
            sigma2: self.sigma2,
            r: self.r,
            log_post: self.log_post(),
        }
    }
}

fn adapt(step: f64, rate: f64) -> f64 {
    if rate < 0.2 {
        step * 0.8
    } else if rate > 0.5 {
        step * 1.2
    } else {
        step
    }
}

fn run(model: &ModelSpec, prior: &PriorSpec, data: &Dataset, cfg: &McmcConfig, width: Option<(usize, usize, f64)>) -> Result<PosteriorChain> {
    prior.validate()?;
    data.validate(Some(model.kind))?;
    if cfg.thin == 0 || !(cfg.step_size > 0.0) || !(cfg.sigma2_step > 0.0) {
        return arg("sampler needs thin >= 1 and positive step sizes");
    }
    if let Some(x) = data.x.first() {
        if x.len() != model.input_dim() {
            return Err(Error::Shape(format!("data has dimension {}, model expects {}", x.len(), model.input_dim())));
        }
    }
    let adaptive = width.is_some();
    let (r0, r_max, p_width) = match width {
        Some((r0, r_max, p)) => {
            if r_max < 1 || r0 < 1 || r0 > r_max || !(0.0..=1.0).contains(&p) {
                return arg("adaptive sampler needs 1 <= r_init <= r_max and width_move_prob in [0,1]");
            }
            if prior.width.is_none() {
                return arg("adaptive sampling needs a width prior");
            }
            (r0, r_max, p)
        }
        None => (model.architecture.max_width(), model.architecture.max_width(), 0.0),
    };
    let arch = if adaptive { model.architecture_for(r0)? } else { model.architecture.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t = arch.param_count();
    let (theta, sigma2) = match &cfg.init {
        Init::Zeros => (vec![0.0; t], 1.0),
        Init::Prior => {
            let th = prior.sample_theta(t, &mut rng)?;
            (th, prior.sigma2.sample(&mut rng))
        }
        Init::Given { theta, sigma2 } => {
            if theta.len() != t {
                return Err(Error::Shape(format!("initial theta has {} entries, expected {t}", theta.len())));
            }
            (theta.clone(), sigma2.unwrap_or(1.0))
        }
    };
    let sigma2 = model.kind.has_noise().then_some(sigma2);
    let mut s = Sampler {
        model,
        prior: PriorEval { prior, factor: None },
        data,
        eval: BatchEvaluator::new(&data.x, model.input_dim()),
        rng,
        adaptive,
        theta,
        sigma2,
        r: r0,
        arch,
        stat: 0.0,
        log_lik: 0.0,
        log_prior: 0.0,
    };
    let arch = s.arch.clone();
    let theta = s.theta.clone();
    s.stat = s.stat_for(&arch, &theta);
    s.log_lik = lik_from_stat(model.kind, s.stat, s.sigma2, data.len());
    s.log_prior = s.prior.total(&s.theta, s.sigma2, s.r, adaptive)?;
    if !s.log_post().is_finite() {
        return Err(Error::Init(format!("initial log-posterior is {}", s.log_post())));
    }
    let mut states = vec![s.snapshot(0)];
    let (mut tm, mut sm, mut wm) = (MoveStats::default(), MoveStats::default(), MoveStats::default());
    let (mut step, mut s2_step) = (cfg.step_size, cfg.sigma2_step);
    let (mut win_t, mut win_s) = (MoveStats::default(), MoveStats::default());
    for it in 1..=cfg.steps {
        if !cfg.freeze_theta {
            let ok = s.theta_move(step)?;
            tm.record(ok);
            win_t.record(ok);
        }
        if s.sigma2.is_some() {
            let ok = s.sigma2_move(s2_step)?;
            sm.record(ok);
            win_s.record(ok);
        }
        if p_width > 0.0 && s.rng.random::<f64>() < p_width {
            let ok = s.width_move(r_max)?;
            wm.record(ok);
        }
        if cfg.adapt && it <= cfg.burn_in && it % ADAPT_WINDOW == 0 {
            if win_t.proposed > 0 {
                step = adapt(step, win_t.rate());
            }
            if win_s.proposed > 0 {
                s2_step = adapt(s2_step, win_s.rate());
            }
            win_t = MoveStats::default();
            win_s = MoveStats::default();
        }
        if it % cfg.thin == 0 {
            states.push(s.snapshot(it));
        }
    }
    Ok(PosteriorChain {
        model: model.clone(),
        states,
        theta_moves: tm,
        sigma2_moves: sm,
        width_moves: wm,
        seed: cfg.seed,
        step_size: step,
    })
}

/// Random-walk Metropolis over `θ` with a log-scale Metropolis-within-Gibbs
/// move on `σ²` for the Gaussian model.
pub fn run_mcmc(model: &ModelSpec, prior: &PriorSpec, data: &Dataset, cfg: &McmcConfig) -> Result<PosteriorChain> {
    run(model, prior, data, cfg, None)
}

/// [`run_mcmc`] plus birth/death moves `r → r ± 1` on the common hidden
/// width, targeting the joint posterior including the width prior.
pub fn run_adaptive_mcmc(model: &ModelSpec, prior: &PriorSpec, data: &Dataset, cfg: &AdaptiveConfig) -> Result<PosteriorChain> {
    run(model, prior, data, &cfg.base, Some((cfg.r_init, cfg.r_max, cfg.width_move_prob)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct L2Summary {
    /// `‖T_F∘f_θ − f_0‖_{2,P_X}` (or the sigmoid version) per retained state.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    /// Median of `|σ² − σ_0²|` over retained states.
    pub sigma2_error: Option<f64>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Monte-Carlo `L2(P_X)` distance of every state after the first
/// `burn_in` fraction, with `P_X` uniform on `[−a, a]^d` (`a` from `f0`).
pub fn posterior_l2_error(
    chain: &PosteriorChain,
    f0: &TargetFunction,
    px_samples: usize,
    burn_in: f64,
    sigma0_sq: Option<f64>,
    seed: u64,
) -> Result<L2Summary> {
    if !(0.0..1.0).contains(&burn_in) || px_samples == 0 {
        return arg("need burn_in in [0,1) and px_samples >= 1");
    }
    let skip = (burn_in * chain.states.len() as f64).ceil() as usize;
    let kept = &chain.states[skip.min(chain.states.len())..];
    if kept.is_empty() {
        return arg(format!("chain of {} states is too short for burn-in {burn_in}", chain.states.len()));
    }
    let d = chain.model.input_dim();
    if f0.d != d {
        return Err(Error::Shape(format!("f0 has dimension {}, model {}", f0.d, d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..px_samples)
        .map(|_| (0..d).map(|_| rng.random_range(-f0.a..=f0.a)).collect())
        .collect();
    let logistic = chain.model.kind == ModelKind::Logistic;
    let link = |z: f64| if logistic { sigmoid(z) } else { z };
    let truth: Vec<f64> = xs.iter().map(|x| link(f0.eval(x))).collect();
    let mut be = BatchEvaluator::new(&xs, d);
    let f = chain.model.f_bound;
    let mut errors = Vec::with_capacity(kept.len());
    for s in kept {
        let arch = chain.model.architecture_for(s.r)?;
        let out = be.eval(&arch, chain.model.nu, &s.theta);
        let mse = out.iter().zip(&truth).map(|(z, t)| (link(truncate(*z, f)) - t).powi(2)).sum::<f64>() / px_samples as f64;
        errors.push(mse.sqrt());
    }
    let sigma2_error = match sigma0_sq {
        Some(s0) if chain.model.kind.has_noise() => {
            let e: Vec<f64> = kept.iter().filter_map(|s| s.sigma2).map(|s2| (s2 - s0).abs()).collect();
            Some(median(&e))
        }
        _ => None,
    };
    Ok(L2Summary {
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        median: median(&errors),
        errors,
        sigma2_error,
    })
}

/// Closed-form conditional `σ² | θ, D ~ InvGamma(α + n/2, β + RSS/2)` for the
/// inverse-gamma prior.
pub fn conjugate_sigma2_posterior(prior: &SigmaPrior, rss: f64, n: usize) -> Option<(f64, f64)> {
    match *prior {
        SigmaPrior::InverseGamma { shape, scale } => Some((shape + 0.5 * n as f64, scale + 0.5 * rss)),
        SigmaPrior::Uniform { .. } => None,
    }
}
