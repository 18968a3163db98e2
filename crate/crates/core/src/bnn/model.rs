//! Likelihood models with a truncated network mean, data sets and
//! architecture sizing.

use crate::error::{arg, Error, Result};
use crate::net::{leaky, Architecture, DenseNetwork};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// `Y ~ N(T_F(f(X)), σ²)`.
    Gaussian,
    /// `Y ~ Bernoulli(φ(T_F(f(X))))`.
    Logistic,
}

impl ModelKind {
    pub fn has_noise(self) -> bool {
        matches!(self, ModelKind::Gaussian)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Truncation level `F ≥ 1`.
    pub f_bound: f64,
    pub architecture: Architecture,
    pub nu: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, f_bound: f64, architecture: Architecture, nu: f64) -> Result<Self> {
        if !(f_bound >= 1.0) {
            return arg(format!("truncation level F={f_bound} must be >= 1"));
        }
        if !(0.0..1.0).contains(&nu) {
            return arg(format!("slope nu={nu} outside [0,1)"));
        }
        if architecture.output_dim() != 1 {
            return Err(Error::Shape("model networks have a scalar output".into()));
        }
        Ok(Self { kind, f_bound, architecture, nu })
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn depth(&self) -> usize {
        self.architecture.depth()
    }

    /// Same depth and input dimension with every hidden width set to `r`.
    pub fn architecture_for(&self, r: usize) -> Result<Architecture> {
        Architecture::uniform(self.input_dim(), self.depth(), r, 1)
    }

    pub fn with_width(&self, r: usize) -> Result<Self> {
        Ok(Self {
            architecture: self.architecture_for(r)?,
            ..self.clone()
        })
    }
}

/// `T_F(z) = clamp(z, −F, F)`.
#[inline]
pub fn truncate(z: f64, f: f64) -> f64 {
    z.clamp(-f, f)
}

/// `φ(z) = 1/(1 + e^{−z})`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln φ(z)` without overflow.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Provenance of a synthetic data set.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub f0: String,
    pub sigma0_sq: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub a: f64,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(a: f64, x: Vec<Vec<f64>>, y: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        let ds = Self { a, x, y, meta };
        ds.validate(None)?;
        Ok(ds)
    }

    /// Data set with no observations on `[−a, a]^d`; its likelihood is flat.
    pub fn empty(a: f64) -> Self {
        Self {
            a,
            x: Vec::new(),
            y: Vec::new(),
            meta: DatasetMeta {
                f0: "none".into(),
                sigma0_sq: 0.0,
                seed: 0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Checks `|X_i|_∞ ≤ a`, matching lengths, and binary responses when
    /// `kind` is logistic.
    pub fn validate(&self, kind: Option<ModelKind>) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::Shape(format!("{} inputs but {} responses", self.x.len(), self.y.len())));
        }
        if let Some(d) = self.x.first().map(|x| x.len()) {
            if self.x.iter().any(|x| x.len() != d) {
                return Err(Error::Shape("inputs have mixed dimensions".into()));
            }
        }
        if self.x.iter().flatten().any(|v| !(v.abs() <= self.a)) {
            return arg(format!("input outside [-{0}, {0}]", self.a));
        }
        if kind == Some(ModelKind::Logistic) && self.y.iter().any(|&y| y != 0.0 && y != 1.0) {
            return arg("logistic responses must be 0 or 1");
        }
        Ok(())
    }
}

fn log_lik_terms(kind: ModelKind, f_bound: f64, sigma2: f64, y: &[f64], out: impl Iterator<Item = f64>) -> f64 {
    match kind {
        ModelKind::Gaussian => {
            if !(sigma2 > 0.0) {
                return f64::NEG_INFINITY;
            }
            let rss: f64 = y.iter().zip(out).map(|(yi, z)| (yi - truncate(z, f_bound)).powi(2)).sum();
            -0.5 * y.len() as f64 * (LN_2PI + sigma2.ln()) - rss / (2.0 * sigma2)
        }
        ModelKind::Logistic => y
            .iter()
            .zip(out)
            .map(|(yi, z)| {
                let t = truncate(z, f_bound);
                yi * log_sigmoid(t) + (1.0 - yi) * log_sigmoid(-t)
            })
            .sum(),
    }
}

/// Gaussian: `−(n/2)ln(2πσ²) − Σ(Y_i − T_F(f(X_i)))²/(2σ²)`; logistic:
/// `Σ Y_i ln p_i + (1 − Y_i) ln(1 − p_i)` with `p_i = φ(T_F(f(X_i)))`.
/// `sigma2` is ignored for the logistic model.
pub fn log_likelihood(model: &ModelSpec, net: &DenseNetwork, sigma2: f64, data: &Dataset) -> Result<f64> {
    if net.output_dim() != 1 {
        return Err(Error::Shape("likelihood needs a scalar network".into()));
    }
    let out = data
        .x
        .iter()
        .map(|x| net.eval(x).map(|v| v[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_lik_terms(model.kind, model.f_bound, sigma2, &data.y, out.into_iter()))
}

/// Evaluates a network given as a flat parameter vector on a whole data set
/// at once, layer by layer.
#[derive(Clone, Debug)]
pub struct BatchEvaluator {
    n: usize,
    d: usize,
    /// Inputs stored feature-major: `xt[j·n + i] = X_i[j]`.
    xt: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BatchEvaluator {
    pub fn new(x: &[Vec<f64>], d: usize) -> Self {
        let n = x.len();
        let mut xt = vec![0.0; n * d];
        for (i, xi) in x.iter().enumerate() {
            for j in 0..d {
                xt[j * n + i] = xi[j];
            }
        }
        Self { n, d, xt, a: Vec::new(), b: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Network outputs for every stored input; `theta` uses the
    /// [`DenseNetwork::from_flat`] layout.
    pub fn eval(&mut self, arch: &Architecture, nu: f64, theta: &[f64]) -> &[f64] {
        let n = self.n;
        let widths = arch.widths();
        debug_assert_eq!(widths[0], self.d);
        debug_assert_eq!(theta.len(), arch.param_count());
        self.a.clear();
        self.a.extend_from_slice(&self.xt);
        let last = widths.len() - 2;
        let mut pos = 0;
        for (l, w) in widths.windows(2).enumerate() {
            let (cols, rows) = (w[0], w[1]);
            let wm = &theta[pos..pos + rows * cols];
            let bv = &theta[pos + rows * cols..pos + rows * cols + rows];
            pos += rows * (cols + 1);
            self.b.clear();
            self.b.resize(rows * n, 0.0);
            for i in 0..rows {
                let out = &mut self.b[i * n..(i + 1) * n];
                out.fill(bv[i]);
                for j in 0..cols {
                    let wij = wm[i * cols + j];
                    if wij == 0.0 {
                        continue;
                    }
                    for (o, v) in out.iter_mut().zip(&self.a[j * n..(j + 1) * n]) {
                        *o += wij * v;
                    }
                }
                if l < last {
                    for o in out.iter_mut() {
                        *o = leaky(*o, nu);
                    }
                }
            }
            std::mem::swap(&mut self.a, &mut self.b);
        }
        &self.a[..n]
    }

    pub fn log_likelihood(&mut self, model: &ModelSpec, arch: &Architecture, theta: &[f64], sigma2: f64, y: &[f64]) -> f64 {
        let (kind, f) = (model.kind, model.f_bound);
        if self.n == 0 {
            return log_lik_terms(kind, f, sigma2, y, std::iter::empty());
        }
        let out = self.eval(arch, model.nu, theta);
        log_lik_terms(kind, f, sigma2, y, out.iter().copied())
    }
}

fn depth_for(n: u64, c_l: f64, log: fn(f64) -> f64) -> usize {
    ((c_l * log(n as f64)).ceil() as usize).max(1)
}

fn width_for(n: u64, c_r: f64, exponent: f64) -> usize {
    ((c_r * (n as f64).powf(exponent)).ceil() as usize).max(1)
}

/// `L_n = ⌈C_L ln n⌉`, `r_n = ⌈C_r n^{d/(2(2β+d))}⌉`, widths `(d, r_n, …, r_n, 1)`.
/// Both are floored at one.
pub fn network_size_for(n: u64, beta: f64, d: usize, c_l: f64, c_r: f64) -> Result<Architecture> {
    if n < 2 {
        return arg(format!("network sizing needs n >= 2, got {n}"));
    }
    if !(beta > 0.0 && c_l > 0.0 && c_r > 0.0) || d == 0 {
        return arg("network sizing needs beta, C_L, C_r > 0 and d >= 1");
    }
    let df = d as f64;
    let l = depth_for(n, c_l, f64::ln);
    let r = width_for(n, c_r, df / (2.0 * (2.0 * beta + df)));
    Architecture::uniform(d, l, r, 1)
}

/// Composite sizing: `L_n = ⌈C̃_L log₂ n⌉`,
/// `r_n = ⌈C̃_r max_{(β', d') ∈ P} n^{d'/(2(2β'+d'))}⌉`.
pub fn network_size_composite(n: u64, constraints: &[(f64, usize)], d: usize, c_l: f64, c_r: f64) -> Result<Architecture> {
    if n < 2 {
        return arg(format!("network sizing needs n >= 2, got {n}"));
    }
    if constraints.is_empty() || constraints.iter().any(|&(b, dd)| !(b > 0.0) || dd == 0) {
        return arg("constraint set must be nonempty with beta > 0, d >= 1");
    }
    if !(c_l > 0.0 && c_r > 0.0) || d == 0 {
        return arg("network sizing needs C_L, C_r > 0 and d >= 1");
    }
    let exponent = constraints
        .iter()
        .map(|&(b, dd)| dd as f64 / (2.0 * (2.0 * b + dd as f64)))
        .fold(f64::NEG_INFINITY, f64::max);
    let l = depth_for(n, c_l, f64::log2);
    let r = width_for(n, c_r, exponent);
    Architecture::uniform(d, l, r, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;

    #[test]
    fn sizing_examples() {
        let a = network_size_for(10000, 1.0, 1, 1.0, 1.0).unwrap();
        assert_eq!(a.depth(), 10);
        assert_eq!(a.widths()[1], 5);
        assert_eq!(a.widths().last(), Some(&1));
        let two = network_size_for(2, 1.0, 1, 1.0, 1.0).unwrap();
        assert_eq!(two.depth(), 1);
        assert!(network_size_for(1, 1.0, 1, 1.0, 1.0).is_err());
        let c = network_size_composite(4096, &[(2.0, 1), (1.0, 2)], 3, 1.0, 1.5).unwrap();
        assert_eq!(c.widths()[1], 12);
        assert_eq!(c.depth(), 12);
        assert_eq!(c.input_dim(), 3);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate(1.5, 1.0), 1.0);
        assert_eq!(truncate(-2.0, 1.0), -1.0);
        assert_eq!(truncate(0.3, 1.0), 0.3);
    }

    fn constant_net(c: f64) -> DenseNetwork {
        DenseNetwork::new(
            0.0,
            vec![Layer::new(1, 1, vec![0.0], vec![0.0]).unwrap(), Layer::new(1, 1, vec![0.0], vec![c]).unwrap()],
        )
        .unwrap()
    }

    fn meta() -> DatasetMeta {
        DatasetMeta { f0: "test".into(), sigma0_sq: 1.0, seed: 0 }
    }

    #[test]
    fn gaussian_single_point() {
        let arch = Architecture::new(vec![1, 1, 1]).unwrap();
        let m = ModelSpec::new(ModelKind::Gaussian, 1.0, arch, 0.0).unwrap();
        let data = Dataset::new(1.0, vec![vec![0.2]], vec![0.0], meta()).unwrap();
        let ll = log_likelihood(&m, &constant_net(0.0), 1.0, &data).unwrap();
        assert!((ll + 0.5 * LN_2PI).abs() < 1e-15);
        assert_eq!(log_likelihood(&m, &constant_net(0.0), 0.0, &data).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn logistic_uses_truncated_probability() {
        let arch = Architecture::new(vec![1, 1, 1]).unwrap();
        let m = ModelSpec::new(ModelKind::Logistic, 1.0, arch, 0.0).unwrap();
        let data = Dataset::new(1.0, vec![vec![0.0]], vec![1.0], meta()).unwrap();
        let ll = log_likelihood(&m, &constant_net(100.0), 1.0, &data).unwrap();
        let p = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((p - 0.7311).abs() < 1e-4);
        assert!((ll - p.ln()).abs() < 1e-14);
        assert!(ModelSpec::new(ModelKind::Logistic, 0.5, Architecture::new(vec![1, 1, 1]).unwrap(), 0.0).is_err());
    }

    #[test]
    fn batch_matches_dense() {
        let arch = Architecture::new(vec![2, 3, 4, 1]).unwrap();
        let theta: Vec<f64> = (0..arch.param_count()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0).collect();
        let net = DenseNetwork::from_flat(&arch, 0.1, &theta).unwrap();
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 7.0 - 0.5, 0.3 - i as f64 / 9.0]).collect();
        let y: Vec<f64> = (0..7).map(|i| (i % 2) as f64).collect();
        let mut be = BatchEvaluator::new(&x, 2);
        let out = be.eval(&arch, 0.1, &theta).to_vec();
        for (xi, o) in x.iter().zip(&out) {
            assert!((net.eval(xi).unwrap()[0] - o).abs() < 1e-12);
        }
        let data = Dataset::new(1.0, x, y.clone(), meta()).unwrap();
        for kind in [ModelKind::Gaussian, ModelKind::Logistic] {
            let m = ModelSpec::new(kind, 1.0, arch.clone(), 0.1).unwrap();
            let want = log_likelihood(&m, &net, 0.7, &data).unwrap();
            let got = be.log_likelihood(&m, &arch, &theta, 0.7, &y);
            assert!((want - got).abs() < 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(1.0, vec![vec![1.5]], vec![0.0], meta()).is_err());
        let ds = Dataset::new(1.0, vec![vec![0.5]], vec![0.3], meta()).unwrap();
        assert!(ds.validate(Some(ModelKind::Logistic)).is_err());
        assert!(ds.validate(Some(ModelKind::Gaussian)).is_ok());
    }
}
