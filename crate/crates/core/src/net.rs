//! Dense leaky-ReLU networks: storage, evaluation, structural combinators,
//! layer re-scaling and parameter statistics.
//!
//! A network with `L` hidden layers is the map
//! `A_{L+1} ∘ ρ_ν ∘ A_L ∘ … ∘ ρ_ν ∘ A_1` where every `A_l(x) = W_l x + b_l`
//! and `ρ_ν(z) = max(z, νz)` acts coordinate-wise.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Widths `(d, r_1, …, r_L, out)` of a fully connected network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::Shape(format!(
                "need at least one hidden layer, got widths {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Shape(format!("zero width in {widths:?}")));
        }
        Ok(Self { widths })
    }

    /// `(d, r, …, r, out)` with `depth` hidden layers.
    pub fn uniform(d: usize, depth: usize, r: usize, out: usize) -> Result<Self> {
        let mut widths = vec![d];
        widths.extend(std::iter::repeat_n(r, depth));
        widths.push(out);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    /// Largest hidden width.
    pub fn max_width(&self) -> usize {
        self.widths[1..self.widths.len() - 1]
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// `T = Σ (r[l−1] + 1)·r[l]`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
}

/// One affine map `x ↦ W x + b`, `W` stored row-major with shape `rows × cols`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if w.len() != rows * cols || b.len() != rows {
            return Err(Error::Shape(format!(
                "layer {rows}x{cols} given {} weights and {} biases",
                w.len(),
                b.len()
            )));
        }
        Ok(Self { rows, cols, w, b })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.w[i * self.cols + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.w[i * self.cols + j] += v;
    }

    pub fn set_bias(&mut self, i: usize, v: f64) {
        self.b[i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.cols..(i + 1) * self.cols]
    }

    fn max_abs_weight(&self) -> f64 {
        self.w.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut s = self.b[i];
            for (wij, xj) in row.iter().zip(x) {
                s += wij * xj;
            }
            *o = s;
        }
    }

    /// The affine map `self ∘ inner`.
    pub fn after(&self, inner: &Layer) -> Result<Layer> {
        if self.cols != inner.rows {
            return Err(Error::Shape(format!(
                "cannot fuse {}x{} after {}x{}",
                self.rows, self.cols, inner.rows, inner.cols
            )));
        }
        let mut out = Layer::zeros(self.rows, inner.cols);
        for i in 0..self.rows {
            let mut bias = self.b[i];
            let dst = &mut out.w[i * inner.cols..(i + 1) * inner.cols];
            for k in 0..self.cols {
                let a = self.w[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                bias += a * inner.b[k];
                for (d, s) in dst.iter_mut().zip(inner.row(k)) {
                    *d += a * s;
                }
            }
            out.b[i] = bias;
        }
        Ok(out)
    }
}

#[inline]
pub fn leaky(z: f64, nu: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        nu * z
    }
}

/// Dense leaky-ReLU network. Immutable once built; every combinator returns a
/// fresh network.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork {
    nu: f64,
    layers: Vec<Layer>,
}

impl DenseNetwork {
    pub fn new(nu: f64, layers: Vec<Layer>) -> Result<Self> {
        if !(0.0..1.0).contains(&nu) {
            return arg(format!("slope nu={nu} outside [0,1)"));
        }
        if layers.len() < 2 {
            return Err(Error::Shape("need at least one hidden layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::Shape(format!(
                    "layer {} has {} columns but layer {} has {} rows",
                    l + 2,
                    pair[1].cols,
                    l + 1,
                    pair[0].rows
                )));
            }
        }
        Ok(Self { nu, layers })
    }

    /// Network with the given architecture whose parameters are read from
    /// `theta` layer by layer, `W_l` row-major followed by `b_l`.
    pub fn from_flat(arch: &Architecture, nu: f64, theta: &[f64]) -> Result<Self> {
        if theta.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                theta.len()
            )));
        }
        let mut layers = Vec::with_capacity(arch.depth() + 1);
        let mut pos = 0;
        for w in arch.widths().windows(2) {
            let (cols, rows) = (w[0], w[1]);
            let wv = theta[pos..pos + rows * cols].to_vec();
            pos += rows * cols;
            let bv = theta[pos..pos + rows].to_vec();
            pos += rows;
            layers.push(Layer::new(rows, cols, wv, bv)?);
        }
        Self::new(nu, layers)
    }

    /// Inverse of [`DenseNetwork::from_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.architecture().param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.rows));
        w
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            widths: self.widths(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_network(self, x)
    }

    /// `x ↦ self(map(x))`; fuses `map` into the first layer.
    pub fn precompose(&self, map: &Layer) -> Result<Self> {
        let mut layers = self.layers.clone();
        layers[0] = self.layers[0].after(map)?;
        Self::new(self.nu, layers)
    }

    /// `x ↦ map(self(x))`; fuses `map` into the output layer.
    pub fn postcompose(&self, map: &Layer) -> Result<Self> {
        let mut layers = self.layers.clone();
        let last = layers.len() - 1;
        layers[last] = map.after(&self.layers[last])?;
        Self::new(self.nu, layers)
    }

    /// Sparse evaluation plan for repeated evaluation of wide block-structured
    /// networks. Produces the same values as [`eval_network`] up to summation order.
    pub fn compile(&self) -> CompiledNetwork {
        CompiledNetwork::new(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&NetworkDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nu: f64,
    widths: Vec<usize>,
    layers: Vec<LayerDoc>,
}

impl From<&DenseNetwork> for NetworkDoc {
    fn from(net: &DenseNetwork) -> Self {
        Self {
            nu: net.nu,
            widths: net.widths(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerDoc {
                    w: l.w.clone(),
                    b: l.b.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkDoc> for DenseNetwork {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        let arch = Architecture::new(doc.widths)?;
        if doc.layers.len() != arch.depth() + 1 {
            return Err(Error::Shape("layer count does not match widths".into()));
        }
        let layers = arch
            .widths()
            .windows(2)
            .zip(doc.layers)
            .map(|(w, l)| Layer::new(w[1], w[0], l.w, l.b))
            .collect::<Result<Vec<_>>>()?;
        DenseNetwork::new(doc.nu, layers)
    }
}

/// Exact dense evaluation of `A_{L+1} ∘ ρ_ν ∘ … ∘ ρ_ν ∘ A_1 (x)`.
pub fn eval_network(net: &DenseNetwork, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "input has length {}, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    let mut cur = x.to_vec();
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.rows];
        layer.apply(&cur, &mut next);
        if l < last {
            for z in &mut next {
                *z = leaky(*z, net.nu);
            }
        }
        cur = next;
    }
    Ok(cur)
}

const ZETA_TOL: f64 = 1e-12;

/// Scale transfer between layers: `W̃_l = ζ_l W_l`, `b̃_l = (Π_{l'≤l} ζ_{l'}) b_l`.
/// Requires `Π ζ_l = 1`; the realized function is unchanged because `ρ_ν` is
/// positively homogeneous.
pub fn rescale(net: &DenseNetwork, zeta: &[f64]) -> Result<DenseNetwork> {
    if zeta.len() != net.layers.len() {
        return arg(format!(
            "need {} scale factors, got {}",
            net.layers.len(),
            zeta.len()
        ));
    }
    if zeta.iter().any(|z| !(z.is_finite() && *z > 0.0)) {
        return arg("scale factors must be positive and finite");
    }
    let prod: f64 = zeta.iter().product();
    if (prod - 1.0).abs() > ZETA_TOL {
        return Err(Error::Invariant(format!(
            "scale factors multiply to {prod}, not 1"
        )));
    }
    let mut prefix = 1.0;
    let layers = net
        .layers
        .iter()
        .zip(zeta)
        .map(|(layer, &z)| {
            prefix *= z;
            Layer {
                rows: layer.rows,
                cols: layer.cols,
                w: layer.w.iter().map(|v| v * z).collect(),
                b: layer.b.iter().map(|v| v * prefix).collect(),
            }
        })
        .collect();
    DenseNetwork::new(net.nu, layers)
}

/// Greedy scale schedule that keeps every `|W_l|_∞ ≤ bound` while all partial
/// products `Π_{l'≤l} ζ_{l'}` stay at most one, so biases never grow.
///
/// Layers above the bound are shrunk onto it; the deficit is paid back by the
/// following layers, each lifted at most to the bound. Returns `None` when the
/// output layer cannot absorb the remaining deficit.
pub fn bounded_schedule(net: &DenseNetwork, bound: f64) -> Option<Vec<f64>> {
    let n = net.layers.len();
    let mut zeta = Vec::with_capacity(n);
    let mut prefix = 1.0_f64;
    for layer in &net.layers[..n - 1] {
        let m = layer.max_abs_weight();
        let cap = if m > 0.0 { bound / m } else { f64::INFINITY };
        let z = cap.min(1.0 / prefix);
        prefix *= z;
        zeta.push(z);
    }
    let z_last = 1.0 / prefix;
    let m_last = net.layers[n - 1].max_abs_weight();
    if m_last * z_last > bound * (1.0 + 1e-12) {
        return None;
    }
    zeta.push(z_last);
    Some(zeta)
}

/// Re-scales `net` so that no weight exceeds `bound`, appending identity
/// layers when the depth is too small to absorb the large layers.
pub fn rescale_to_bound(net: &DenseNetwork, bound: f64) -> Result<DenseNetwork> {
    if !(bound > 1.0) {
        return arg(format!("weight bound must exceed 1, got {bound}"));
    }
    let mut cur = net.clone();
    for _ in 0..512 {
        if let Some(zeta) = bounded_schedule(&cur, bound) {
            if zeta.iter().all(|&z| z == 1.0) {
                return Ok(cur);
            }
            return rescale_unchecked(&cur, &zeta);
        }
        let target = cur.depth() + 1;
        cur = extend_depth(&cur, target)?;
    }
    Err(Error::Invariant(format!(
        "could not bring weights under {bound} within 512 extra layers"
    )))
}

// The greedy schedule multiplies to one only up to rounding of the final
// reciprocal, so skip the tolerance check of `rescale`.
fn rescale_unchecked(net: &DenseNetwork, zeta: &[f64]) -> Result<DenseNetwork> {
    let mut prefix = 1.0;
    let layers = net
        .layers
        .iter()
        .zip(zeta)
        .map(|(layer, &z)| {
            prefix *= z;
            Layer {
                rows: layer.rows,
                cols: layer.cols,
                w: layer.w.iter().map(|v| v * z).collect(),
                b: layer.b.iter().map(|v| v * prefix).collect(),
            }
        })
        .collect();
    DenseNetwork::new(net.nu, layers)
}

/// `outer ∘ inner` with the inner output layer fused into the outer input
/// layer; the result has `L_inner + L_outer` hidden layers.
pub fn compose(outer: &DenseNetwork, inner: &DenseNetwork) -> Result<DenseNetwork> {
    if outer.input_dim() != inner.output_dim() {
        return Err(Error::Shape(format!(
            "outer expects {} inputs, inner yields {}",
            outer.input_dim(),
            inner.output_dim()
        )));
    }
    if outer.nu != inner.nu {
        return Err(Error::Structure(format!(
            "slope mismatch {} vs {}",
            outer.nu, inner.nu
        )));
    }
    let li = inner.layers.len() - 1;
    let mut layers = inner.layers[..li].to_vec();
    layers.push(outer.layers[0].after(&inner.layers[li])?);
    layers.extend_from_slice(&outer.layers[1..]);
    DenseNetwork::new(outer.nu, layers)
}

/// Parallel placement: all members read the same input; outputs are
/// concatenated in order.
pub fn concat_parallel(nets: &[DenseNetwork]) -> Result<DenseNetwork> {
    let first = nets
        .first()
        .ok_or_else(|| Error::Argument("empty network list".into()))?;
    for n in nets {
        if n.nu != first.nu {
            return Err(Error::Structure("slope mismatch in concat".into()));
        }
        if n.depth() != first.depth() {
            return Err(Error::Structure(format!(
                "depth mismatch in concat: {} vs {}",
                n.depth(),
                first.depth()
            )));
        }
        if n.input_dim() != first.input_dim() {
            return Err(Error::Shape("input dimension mismatch in concat".into()));
        }
    }
    let mut layers = Vec::with_capacity(first.layers.len());
    for l in 0..first.layers.len() {
        let rows: usize = nets.iter().map(|n| n.layers[l].rows).sum();
        let cols: usize = if l == 0 {
            first.input_dim()
        } else {
            nets.iter().map(|n| n.layers[l].cols).sum()
        };
        let mut out = Layer::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for n in nets {
            let src = &n.layers[l];
            for i in 0..src.rows {
                let dst = (r0 + i) * cols + c0;
                out.w[dst..dst + src.cols].copy_from_slice(src.row(i));
                out.b[r0 + i] = src.b[i];
            }
            r0 += src.rows;
            if l > 0 {
                c0 += src.cols;
            }
        }
        layers.push(out);
    }
    DenseNetwork::new(first.nu, layers)
}

/// `x ↦ Σ coeffs_i · net_i(x) + bias` for scalar-output members.
pub fn affine_combine(coeffs: &[f64], nets: &[DenseNetwork], bias: f64) -> Result<DenseNetwork> {
    if coeffs.len() != nets.len() {
        return arg("one coefficient per network required");
    }
    if nets.iter().any(|n| n.output_dim() != 1) {
        return Err(Error::Shape("affine_combine needs scalar networks".into()));
    }
    let cat = concat_parallel(nets)?;
    let map = Layer::new(1, coeffs.len(), coeffs.to_vec(), vec![bias])?;
    cat.postcompose(&map)
}

/// `k`-dimensional identity with one hidden layer of `2k` neurons:
/// `x = (ρ_ν(x) − ρ_ν(−x)) / (1+ν)`.
pub fn identity_network(k: usize, nu: f64) -> Result<DenseNetwork> {
    if k == 0 {
        return arg("identity needs k >= 1");
    }
    let mut first = Layer::zeros(2 * k, k);
    let mut second = Layer::zeros(k, 2 * k);
    let c = 1.0 / (1.0 + nu);
    for i in 0..k {
        first.set(2 * i, i, 1.0);
        first.set(2 * i + 1, i, -1.0);
        second.set(i, 2 * i, c);
        second.set(i, 2 * i + 1, -c);
    }
    DenseNetwork::new(nu, vec![first, second])
}

/// Appends identity layers until the depth equals `target`.
pub fn extend_depth(net: &DenseNetwork, target: usize) -> Result<DenseNetwork> {
    if target < net.depth() {
        return arg(format!(
            "target depth {target} below current depth {}",
            net.depth()
        ));
    }
    let id = identity_network(net.output_dim(), net.nu)?;
    let mut cur = net.clone();
    while cur.depth() < target {
        cur = compose(&id, &cur)?;
    }
    Ok(cur)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamStats {
    pub max_abs_weight: f64,
    pub max_abs_bias: f64,
    pub max_abs_param: f64,
    pub nonzero_count: usize,
    pub total_count: usize,
}

pub fn param_stats(net: &DenseNetwork) -> ParamStats {
    let mut s = ParamStats {
        max_abs_weight: 0.0,
        max_abs_bias: 0.0,
        max_abs_param: 0.0,
        nonzero_count: 0,
        total_count: 0,
    };
    for l in &net.layers {
        for v in &l.w {
            s.max_abs_weight = s.max_abs_weight.max(v.abs());
            s.nonzero_count += usize::from(*v != 0.0);
        }
        for v in &l.b {
            s.max_abs_bias = s.max_abs_bias.max(v.abs());
            s.nonzero_count += usize::from(*v != 0.0);
        }
        s.total_count += l.w.len() + l.b.len();
    }
    s.max_abs_param = s.max_abs_weight.max(s.max_abs_bias);
    s
}

/// Sup-norm distance bound between two networks of architecture `(d, r, …, r, 1)`
/// with depth `L`, parameters bounded by `B` and differing by at most `δ`, on `[−a,a]^d`.
pub fn perturbation_bound(l: usize, r: usize, b: f64, d: usize, a: f64, delta: f64) -> Result<f64> {
    if l == 0 || r == 0 || d == 0 {
        return arg("L, r and d must be positive");
    }
    if !(b > 0.0) || !(a >= 1.0) || !(delta >= 0.0) {
        return arg(format!("need B>0, a>=1, delta>=0 (got {b}, {a}, {delta})"));
    }
    let li = l as i32;
    Ok(a * (d as f64 + 1.0) * (r as f64 + 1.0).powi(li) * b.powi(li) * (l as f64 + 1.0) * delta)
}

#[derive(Clone, Debug)]
struct CsrLayer {
    rows: usize,
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f64>,
    b: Vec<f64>,
}

/// Zero-skipping evaluation plan built from a [`DenseNetwork`].
#[derive(Clone, Debug)]
pub struct CompiledNetwork {
    nu: f64,
    input_dim: usize,
    layers: Vec<CsrLayer>,
    max_width: usize,
}

impl CompiledNetwork {
    fn new(net: &DenseNetwork) -> Self {
        let layers: Vec<CsrLayer> = net
            .layers
            .iter()
            .map(|l| {
                let mut ptr = Vec::with_capacity(l.rows + 1);
                let mut idx = Vec::new();
                let mut val = Vec::new();
                ptr.push(0);
                for i in 0..l.rows {
                    for (j, &v) in l.row(i).iter().enumerate() {
                        if v != 0.0 {
                            idx.push(j as u32);
                            val.push(v);
                        }
                    }
                    ptr.push(idx.len());
                }
                CsrLayer {
                    rows: l.rows,
                    ptr,
                    idx,
                    val,
                    b: l.b.clone(),
                }
            })
            .collect();
        let max_width = net
            .widths()
            .into_iter()
            .max()
            .unwrap_or(0);
        Self {
            nu: net.nu,
            input_dim: net.input_dim(),
            layers,
            max_width,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Scalar output `net(x)[0]`; panics on wrong input length.
    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        self.eval(x)[0]
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim, "input dimension mismatch");
        let mut a = Vec::with_capacity(self.max_width);
        a.extend_from_slice(x);
        let mut b = vec![0.0; self.max_width];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            b.resize(layer.rows, 0.0);
            for i in 0..layer.rows {
                let mut s = layer.b[i];
                for k in layer.ptr[i]..layer.ptr[i + 1] {
                    s += layer.val[k] * a[layer.idx[k] as usize];
                }
                b[i] = if l < last { leaky(s, self.nu) } else { s };
            }
            std::mem::swap(&mut a, &mut b);
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_net(nu: f64) -> DenseNetwork {
        DenseNetwork::new(
            nu,
            vec![
                Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
                Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let n = relu_net(0.0);
        assert_eq!(n.eval(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(n.eval(&[-3.0]).unwrap(), vec![0.0]);
        assert_eq!(relu_net(0.5).eval(&[-3.0]).unwrap(), vec![-1.5]);
        assert!(matches!(n.eval(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn rescale_examples() {
        let n = relu_net(0.0);
        let r = rescale(&n, &[0.5, 2.0]).unwrap();
        assert_eq!(r.layers()[0].weights(), &[0.5]);
        assert_eq!(r.layers()[1].weights(), &[2.0]);
        assert_eq!(r.eval(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(param_stats(&r).max_abs_weight, 2.0);
        assert_eq!(rescale(&n, &[1.0, 1.0]).unwrap(), n);
        assert!(matches!(rescale(&n, &[0.5, 3.0]), Err(Error::Invariant(_))));
    }

    #[test]
    fn compose_relu_with_itself() {
        let n = relu_net(0.0);
        let c = compose(&n, &n).unwrap();
        assert_eq!(c.depth(), 2);
        assert_eq!(c.eval(&[-3.0]).unwrap(), vec![0.0]);
        assert_eq!(c.eval(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn concat_and_combine() {
        let n = relu_net(0.0);
        let c = concat_parallel(&[n.clone(), n.clone()]).unwrap();
        assert_eq!(c.eval(&[2.0]).unwrap(), vec![2.0, 2.0]);
        let neg = n
            .precompose(&Layer::new(1, 1, vec![-1.0], vec![0.0]).unwrap())
            .unwrap();
        let abs = affine_combine(&[1.0, 1.0], &[n.clone(), neg], 0.0).unwrap();
        assert_eq!(abs.eval(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(abs.eval(&[-3.0]).unwrap(), vec![3.0]);
        let zero = affine_combine(&[1.0, -1.0], &[n.clone(), n], 0.0).unwrap();
        assert_eq!(zero.eval(&[1.7]).unwrap(), vec![0.0]);
    }

    #[test]
    fn concat_widths_add() {
        let a = DenseNetwork::new(
            0.0,
            vec![Layer::zeros(3, 2), Layer::zeros(1, 3)],
        )
        .unwrap();
        let b = DenseNetwork::new(
            0.0,
            vec![Layer::zeros(5, 2), Layer::zeros(1, 5)],
        )
        .unwrap();
        let c = concat_parallel(&[a, b.clone()]).unwrap();
        assert_eq!(c.widths(), vec![2, 8, 2]);
        let deep = extend_depth(&b, 2).unwrap();
        assert!(concat_parallel(&[b, deep]).is_err());
    }

    #[test]
    fn extend_depth_examples() {
        let n = relu_net(0.0);
        let e = extend_depth(&n, 5).unwrap();
        assert_eq!(e.depth(), 5);
        for x in [-3.0, 0.0, 2.0] {
            assert_eq!(e.eval(&[x]).unwrap(), n.eval(&[x]).unwrap());
        }
        assert!(param_stats(&e).max_abs_param <= 1.0);
        assert_eq!(extend_depth(&n, 1).unwrap(), n);
        assert!(extend_depth(&e, 2).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = param_stats(&relu_net(0.0));
        assert_eq!(s.max_abs_param, 1.0);
        assert_eq!(s.total_count, 4);
        let z = DenseNetwork::new(0.0, vec![Layer::zeros(2, 1), Layer::zeros(1, 2)]).unwrap();
        let s = param_stats(&z);
        assert_eq!(s.max_abs_param, 0.0);
        assert_eq!(s.nonzero_count, 0);
        assert_eq!(s.total_count, z.architecture().param_count());
    }

    #[test]
    fn perturbation_examples() {
        let v = perturbation_bound(1, 1, 1.0, 1, 1.0, 0.1).unwrap();
        assert!((v - 0.8).abs() < 1e-15);
        assert_eq!(perturbation_bound(1, 1, 1.0, 1, 1.0, 0.0).unwrap(), 0.0);
        assert!(perturbation_bound(1, 1, -1.0, 1, 1.0, 0.1).is_err());
    }

    #[test]
    fn bounded_rescale_pads_and_bounds() {
        let big = DenseNetwork::new(
            0.0,
            vec![
                Layer::new(1, 1, vec![1e6], vec![0.5]).unwrap(),
                Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
            ],
        )
        .unwrap();
        let r = rescale_to_bound(&big, 10.0).unwrap();
        let s = param_stats(&r);
        assert!(s.max_abs_weight <= 10.0 * (1.0 + 1e-12));
        assert!(s.max_abs_bias <= 0.5);
        assert!(r.depth() > 1);
        for x in [-1.0, 0.3, 2.0] {
            let a = big.eval(&[x]).unwrap()[0];
            let b = r.eval(&[x]).unwrap()[0];
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn json_round_trip() {
        let n = rescale(&relu_net(0.3), &[0.1, 10.0]).unwrap();
        let s = n.to_json().unwrap();
        assert!(s.contains("\"W\""));
        assert_eq!(DenseNetwork::from_json(&s).unwrap(), n);
    }

    #[test]
    fn compiled_matches_dense() {
        let n = relu_net(0.2);
        let c = n.compile();
        for x in [-2.0, 0.0, 1.5] {
            assert_eq!(c.eval(&[x]), n.eval(&[x]).unwrap());
        }
    }
}
