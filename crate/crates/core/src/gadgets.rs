//! Hand-wired gadget networks: identity, ReLU, hat, square, products,
//! polynomials, cube indicators and the gated test network.
//!
//! Every gadget is assembled from single-hidden-layer blocks of *units*. A unit
//! reads an affine form of the block input through a pair of neurons
//! `ρ_ν(z)`, `ρ_ν(−z)` and recombines them either into `z` (identity) or into
//! `max(z, 0)` (ReLU), both exactly.

use crate::error::{arg, Result};
use crate::grid::{scan_max, GridSpec};
use crate::net::{
    affine_combine, compose, concat_parallel, identity_network, param_stats, rescale_to_bound,
    DenseNetwork, Layer, ParamStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitKind {
    Identity,
    Relu,
}

/// One exact scalar primitive inside a hidden layer.
#[derive(Clone, Debug)]
pub struct Unit {
    pub kind: UnitKind,
    /// Sparse coefficients of the pre-activation over block inputs.
    pub pre: Vec<(usize, f64)>,
    pub bias: f64,
    /// Sparse coefficients of the unit value into block outputs.
    pub post: Vec<(usize, f64)>,
}

impl Unit {
    pub fn id(pre: Vec<(usize, f64)>, bias: f64, post: Vec<(usize, f64)>) -> Self {
        Self { kind: UnitKind::Identity, pre, bias, post }
    }

    pub fn relu(pre: Vec<(usize, f64)>, bias: f64, post: Vec<(usize, f64)>) -> Self {
        Self { kind: UnitKind::Relu, pre, bias, post }
    }
}

/// A one-hidden-layer network with `2·units.len()` neurons.
pub fn unit_layer(
    n_in: usize,
    n_out: usize,
    units: &[Unit],
    out_bias: &[f64],
    nu: f64,
) -> Result<DenseNetwork> {
    if units.is_empty() {
        return arg("a block needs at least one unit");
    }
    if out_bias.len() != n_out {
        return arg("output bias length mismatch");
    }
    let h = 2 * units.len();
    let mut first = Layer::zeros(h, n_in);
    let mut second = Layer::new(n_out, h, vec![0.0; n_out * h], out_bias.to_vec())?;
    let id = 1.0 / (1.0 + nu);
    let (rp, rm) = (1.0 / (1.0 - nu * nu), nu / (1.0 - nu * nu));
    for (u, unit) in units.iter().enumerate() {
        let (p, m) = (2 * u, 2 * u + 1);
        for &(j, c) in &unit.pre {
            if j >= n_in {
                return arg(format!("unit reads input {j} of {n_in}"));
            }
            first.add(p, j, c);
            first.add(m, j, -c);
        }
        first.set_bias(p, unit.bias);
        first.set_bias(m, -unit.bias);
        let (cp, cm) = match unit.kind {
            UnitKind::Identity => (id, -id),
            UnitKind::Relu => (rp, rm),
        };
        for &(o, c) in &unit.post {
            if o >= n_out {
                return arg(format!("unit writes output {o} of {n_out}"));
            }
            second.add(o, p, c * cp);
            second.add(o, m, c * cm);
        }
    }
    DenseNetwork::new(nu, vec![first, second])
}

/// Left-to-right composition of blocks.
pub fn chain(blocks: Vec<DenseNetwork>) -> Result<DenseNetwork> {
    let mut it = blocks.into_iter();
    let mut cur = it
        .next()
        .ok_or_else(|| crate::error::Error::Argument("empty chain".into()))?;
    for b in it {
        cur = compose(&b, &cur)?;
    }
    Ok(cur)
}

fn check_slope(nu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&nu) {
        return arg(format!("slope nu={nu} outside [0,1)"));
    }
    Ok(())
}

pub fn build_identity(k: usize, nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    identity_network(k, nu)
}

/// Coordinate-wise `max(x, 0)` with weights up to `1/(1−ν²)`.
pub fn build_relu(k: usize, nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    if k == 0 {
        return arg("relu needs k >= 1");
    }
    let units: Vec<Unit> = (0..k).map(|i| Unit::relu(vec![(i, 1.0)], 0.0, vec![(i, 1.0)])).collect();
    unit_layer(k, k, &units, &vec![0.0; k], nu)
}

fn hat_units(input: usize, scale: f64, shift: f64, post: &[(usize, f64)]) -> Vec<Unit> {
    // 2ρ(t) − 4ρ(t − 1/2) + 2ρ(t − 1) with t = scale·x + shift
    [(0.0, 2.0), (0.5, -4.0), (1.0, 2.0)]
        .iter()
        .map(|&(off, c)| {
            Unit::relu(
                vec![(input, scale)],
                shift - off,
                post.iter().map(|&(o, p)| (o, p * c)).collect(),
            )
        })
        .collect()
}

/// Tent on `[0, 1]` peaking at `1/2`, exact everywhere.
pub fn build_hat(nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    unit_layer(1, 1, &hat_units(0, 1.0, 0.0, &[(0, 1.0)]), &[0.0], nu)
}

/// Weight magnitude cap used for the square/product family.
pub fn square_weight_bound(a: f64, nu: f64) -> f64 {
    (16.0 * a * a).max(4.0 / (1.0 - nu * nu))
}

// Sawtooth telescoping: after layer l the block carries
// (t, g_l(t), −Σ_{s≤l} g_s(t)/4^s, x) with t = x/(4a) + 1/2, and the last
// layer emits 16a²(t − Σ_{s≤R} g_s/4^s) − 4a·x − 4a².
fn square_raw(a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    if r == 0 {
        return arg("square gadget needs R >= 1");
    }
    if !(a > 0.0) {
        return arg("square gadget needs a > 0");
    }
    check_slope(nu)?;
    let mut blocks = Vec::with_capacity(r);
    for l in 1..=r {
        let first = l == 1;
        let last = l == r;
        // input channels: first block reads x only
        let (t_pre, g_pre, s_pre, x_pre): (Vec<(usize, f64)>, (usize, f64, f64), Vec<(usize, f64)>, Vec<(usize, f64)>) =
            if first {
                (vec![(0, 1.0 / (4.0 * a))], (0, 1.0 / (4.0 * a), 0.5), vec![], vec![(0, 1.0)])
            } else {
                (vec![(0, 1.0)], (1, 1.0, 0.0), vec![(2, 1.0)], vec![(3, 1.0)])
            };
        let t_bias = if first { 0.5 } else { 0.0 };
        let w = 0.25_f64.powi(l as i32);
        let mut units = Vec::new();
        if last {
            let s = 16.0 * a * a;
            units.push(Unit::id(t_pre, t_bias, vec![(0, s)]));
            units.extend(hat_units(g_pre.0, g_pre.1, g_pre.2, &[(0, -s * w)]));
            units.push(Unit::id(s_pre, 0.0, vec![(0, s)]));
            units.push(Unit::id(x_pre, 0.0, vec![(0, -4.0 * a)]));
            blocks.push(unit_layer(
                if first { 1 } else { 4 },
                1,
                &units,
                &[-4.0 * a * a],
                nu,
            )?);
        } else {
            units.push(Unit::id(t_pre, t_bias, vec![(0, 1.0)]));
            units.extend(hat_units(g_pre.0, g_pre.1, g_pre.2, &[(1, 1.0), (2, -w)]));
            units.push(Unit::id(s_pre, 0.0, vec![(2, 1.0)]));
            units.push(Unit::id(x_pre, 0.0, vec![(3, 1.0)]));
            blocks.push(unit_layer(if first { 1 } else { 4 }, 4, &units, &[0.0; 4], nu)?);
        }
    }
    chain(blocks)
}

/// `|f_sq(x) − x²| ≤ 4a²·4^{−R}` on `[−2a, 2a]`; depth `R`, width 12.
pub fn build_square(a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    rescale_to_bound(&square_raw(a, r, nu)?, square_weight_bound(a, nu))
}

pub(crate) fn mult_raw(a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    let sq = square_raw(a, r, nu)?;
    let plus = sq.precompose(&Layer::new(1, 2, vec![1.0, 1.0], vec![0.0])?)?;
    let minus = sq.precompose(&Layer::new(1, 2, vec![1.0, -1.0], vec![0.0])?)?;
    affine_combine(&[0.25, -0.25], &[plus, minus], 0.0)
}

/// `(f_sq(x+y) − f_sq(x−y))/4`, error `≤ 2a²·4^{−R}` on `[−a, a]²`.
pub fn build_mult(a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    rescale_to_bound(&mult_raw(a, r, nu)?, square_weight_bound(a, nu))
}

/// `⌈log2 d⌉`.
pub fn ceil_log2(d: usize) -> usize {
    let mut q = 0;
    while (1usize << q) < d {
        q += 1;
    }
    q
}

// Binary product tree; inputs beyond `d` are the constant 1.
pub(crate) fn mult_d_raw(d: usize, a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    if d == 0 {
        return arg("product of zero inputs");
    }
    if d == 1 {
        return identity_network(1, nu);
    }
    let q = ceil_log2(d);
    let m = mult_raw(a, r, nu)?;
    let mut cur: Option<DenseNetwork> = None;
    let mut width = 1usize << q;
    for round in 0..q {
        let n_in = if round == 0 { d } else { width };
        let mut parts = Vec::with_capacity(width / 2);
        for p in 0..width / 2 {
            let mut sel = Layer::zeros(2, n_in);
            for (row, src) in [2 * p, 2 * p + 1].into_iter().enumerate() {
                if src < n_in {
                    sel.set(row, src, 1.0);
                } else {
                    sel.set_bias(row, 1.0);
                }
            }
            parts.push(m.precompose(&sel)?);
        }
        let stage = concat_parallel(&parts)?;
        cur = Some(match cur {
            None => stage,
            Some(prev) => compose(&stage, &prev)?,
        });
        width /= 2;
    }
    Ok(cur.expect("at least one round"))
}

/// Product of `d` inputs via a pairing tree of [`build_mult`] gadgets.
pub fn build_mult_d(d: usize, a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    let raw = mult_d_raw(d, a, r, nu)?;
    if d == 1 {
        return Ok(raw);
    }
    rescale_to_bound(&raw, square_weight_bound(a, nu))
}

/// Error bound of the product tree for inputs in `[−1, 1]^d`: each pairing
/// adds `2a²·4^{−R}` on top of the propagated error `2e + e²`.
pub fn mult_d_error_bound(d: usize, a: f64, r: usize) -> f64 {
    let node = 2.0 * a * a * 0.25_f64.powi(r as i32);
    let mut e = 0.0;
    for _ in 0..ceil_log2(d) {
        e = node + 2.0 * e + e * e;
    }
    e
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Exponent vectors with `|α| ≤ N`, by total degree, then lexicographically
/// descending (`x1² , x1x2, x2²`).
pub fn graded_lex_monomials(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn fill(d: usize, deg: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d - 1 {
            prefix.push(deg);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=deg).rev() {
            prefix.push(e);
            fill(d, deg - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=n {
        fill(d, deg, &mut Vec::new(), &mut out);
    }
    out
}

pub(crate) fn poly_raw(d: usize, n: usize, u: &[f64], a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    if d == 0 || n == 0 {
        return arg("polynomial gadget needs d >= 1 and N >= 1");
    }
    let monos = graded_lex_monomials(d, n);
    if u.len() != monos.len() {
        return arg(format!("expected {} coefficients, got {}", monos.len(), u.len()));
    }
    if u.iter().any(|c| c.abs() > 1.0) {
        return arg("coefficients must lie in [-1, 1]");
    }
    let q = monos.len();
    let tree = mult_d_raw(n + 1, a, r, nu)?;
    let mut parts = Vec::with_capacity(q);
    for (i, alpha) in monos.iter().enumerate() {
        let mut sel = Layer::zeros(n + 1, d + q);
        sel.set(0, d + i, 1.0);
        let mut row = 1;
        for (j, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                sel.set(row, j, 1.0);
                row += 1;
            }
        }
        for pad in row..=n {
            sel.set_bias(pad, 1.0);
        }
        parts.push(tree.precompose(&sel)?);
    }
    affine_combine(u, &parts, 0.0)
}

/// `Σ u_i·y_i·m_i(x)` over graded-lex monomials of degree ≤ N, inputs `(x, y)`.
pub fn build_poly(d: usize, n: usize, u: &[f64], a: f64, r: usize, nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    rescale_to_bound(&poly_raw(d, n, u, a, r, nu)?, square_weight_bound(a, nu))
}

/// Affine expression `Σ c_j·in_j + bias` used for cube corners read from
/// other channels.
#[derive(Clone, Debug, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub bias: f64,
}

impl Affine {
    pub fn constant(bias: f64) -> Self {
        Self { terms: vec![], bias }
    }

    pub fn var(j: usize, bias: f64) -> Self {
        Self { terms: vec![(j, 1.0)], bias }
    }
}

/// The two margin ReLUs `ρ(b1 + 1/R − x)`, `ρ(x − b2 + 1/R)` of one coordinate,
/// both written into output `out`.
pub fn margin_units(x: usize, lo: &Affine, hi: &Affine, inv_r: f64, out: usize) -> [Unit; 2] {
    let mut pre_lo: Vec<(usize, f64)> = lo.terms.clone();
    pre_lo.push((x, -1.0));
    let mut pre_hi: Vec<(usize, f64)> = hi.terms.iter().map(|&(j, c)| (j, -c)).collect();
    pre_hi.push((x, 1.0));
    [
        Unit::relu(pre_lo, lo.bias + inv_r, vec![(out, 1.0)]),
        Unit::relu(pre_hi, -hi.bias + inv_r, vec![(out, 1.0)]),
    ]
}

/// `ρ(1 − R·Σ_i [ρ(b1_i + 1/R − x_i) + ρ(x_i − b2_i + 1/R)])`: the indicator of
/// `[b1, b2)`, exact away from the inner margins of width `1/R`.
pub fn build_indicator(b1: &[f64], b2: &[f64], r: usize, nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    let d = b1.len();
    if d == 0 || b2.len() != d {
        return arg("cube corners must have equal positive length");
    }
    let rf = r as f64;
    if r == 0 || b1.iter().zip(b2).any(|(l, h)| h - l < 2.0 / rf) {
        return arg(format!("cube too small for R={r}"));
    }
    let units: Vec<Unit> = (0..d)
        .flat_map(|i| margin_units(i, &Affine::constant(b1[i]), &Affine::constant(b2[i]), 1.0 / rf, 0))
        .collect();
    let gate = unit_layer(d, 1, &units, &[0.0], nu)?;
    let out = unit_layer(1, 1, &[Unit::relu(vec![(0, -rf)], 1.0, vec![(0, 1.0)])], &[0.0], nu)?;
    compose(&out, &gate)
}

/// Gated payload network on inputs `(x, b1, b2, s_1..s_p)`: returns
/// `s_k·1[b1, b2)(x)` exactly off the margins, using gate coefficient `gate`.
pub fn test_network(d: usize, r: usize, gate: f64, payloads: usize, nu: f64) -> Result<DenseNetwork> {
    check_slope(nu)?;
    if d == 0 || r == 0 || payloads == 0 {
        return arg("test gadget needs d, R, payloads >= 1");
    }
    let inv_r = 1.0 / r as f64;
    let n_in = 3 * d + payloads;
    let mut units: Vec<Unit> = (0..d)
        .flat_map(|i| margin_units(i, &Affine::var(d + i, 0.0), &Affine::var(2 * d + i, 0.0), inv_r, 0))
        .collect();
    for k in 0..payloads {
        units.push(Unit::id(vec![(3 * d + k, 1.0)], 0.0, vec![(1 + k, 1.0)]));
    }
    let first = unit_layer(n_in, 1 + payloads, &units, &vec![0.0; 1 + payloads], nu)?;
    let mut second = Vec::with_capacity(2 * payloads);
    for k in 0..payloads {
        second.push(Unit::relu(vec![(1 + k, 1.0), (0, -gate)], 0.0, vec![(k, 1.0)]));
        second.push(Unit::relu(vec![(1 + k, -1.0), (0, -gate)], 0.0, vec![(k, -1.0)]));
    }
    let out = unit_layer(1 + payloads, payloads, &second, &vec![0.0; payloads], nu)?;
    compose(&out, &first)
}

/// `s·1[b1, b2)(x)` on inputs `(x, b1, b2, s)` with the `R²` gate; exact off the
/// margins when `|s| ≤ R`.
pub fn build_test(d: usize, r: usize, nu: f64) -> Result<DenseNetwork> {
    let rf = r as f64;
    test_network(d, r, rf * rf, 1, nu)
}

/// Which gadget to verify, with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum GadgetSpec {
    Identity { k: usize },
    Relu { k: usize },
    Hat,
    Square { a: f64, r: usize },
    Mult { a: f64, r: usize },
    MultD { d: usize, a: f64, r: usize },
    Poly { d: usize, n: usize, a: f64, r: usize },
    Indicator { d: usize, r: usize },
    Test { d: usize, r: usize },
}

impl GadgetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GadgetSpec::Identity { .. } => "identity",
            GadgetSpec::Relu { .. } => "relu",
            GadgetSpec::Hat => "hat",
            GadgetSpec::Square { .. } => "square",
            GadgetSpec::Mult { .. } => "mult",
            GadgetSpec::MultD { .. } => "mult_d",
            GadgetSpec::Poly { .. } => "poly",
            GadgetSpec::Indicator { .. } => "indicator",
            GadgetSpec::Test { .. } => "test",
        }
    }

    pub fn r(&self) -> usize {
        match self {
            GadgetSpec::Square { r, .. }
            | GadgetSpec::Mult { r, .. }
            | GadgetSpec::MultD { r, .. }
            | GadgetSpec::Poly { r, .. }
            | GadgetSpec::Indicator { r, .. }
            | GadgetSpec::Test { r, .. } => *r,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GadgetReport {
    pub gadget_name: String,
    pub r: usize,
    pub claimed_bound: f64,
    pub measured_sup_error: f64,
    pub grid_size: usize,
    pub params: ParamStats,
}

/// Floating-point allowance added to exactness claims.
pub const EXACT_SLACK: f64 = 1e-12;

impl GadgetReport {
    pub fn holds(&self) -> bool {
        self.measured_sup_error <= self.claimed_bound + EXACT_SLACK
    }
}

fn outside_margins(x: &[f64], lo: f64, hi: f64, margin: f64) -> bool {
    const EDGE: f64 = 1e-9;
    x.iter().all(|&v| {
        let in_lo = v >= lo - EDGE && v < lo + margin + EDGE;
        let in_hi = v > hi - margin - EDGE && v <= hi + EDGE;
        !(in_lo || in_hi)
    })
}

/// Builds the gadget and measures its sup error over a deterministic grid of
/// about `grid` points against the exact target.
pub fn verify_gadget(spec: &GadgetSpec, nu: f64, grid: usize) -> Result<GadgetReport> {
    if grid == 0 {
        return arg("grid must be nonempty");
    }
    let (net, claimed, points, target): (DenseNetwork, f64, Vec<Vec<f64>>, Box<dyn Fn(&[f64]) -> f64 + Sync>) =
        match *spec {
            GadgetSpec::Identity { k } => (
                build_identity(k, nu)?,
                0.0,
                GridSpec::cube(k, -10.0, 10.0, grid).points()?,
                Box::new(|x: &[f64]| x[0]),
            ),
            GadgetSpec::Relu { k } => (
                build_relu(k, nu)?,
                0.0,
                GridSpec::cube(k, -10.0, 10.0, grid).points()?,
                Box::new(|x: &[f64]| x[0].max(0.0)),
            ),
            GadgetSpec::Hat => (
                build_hat(nu)?,
                0.0,
                GridSpec::cube(1, -1.0, 2.0, grid).points()?,
                Box::new(|x: &[f64]| {
                    let t = x[0];
                    if (0.0..0.5).contains(&t) {
                        2.0 * t
                    } else if (0.5..1.0).contains(&t) {
                        2.0 * (1.0 - t)
                    } else {
                        0.0
                    }
                }),
            ),
            GadgetSpec::Square { a, r } => (
                build_square(a, r, nu)?,
                4.0 * a * a * 0.25_f64.powi(r as i32),
                GridSpec::cube(1, -2.0 * a, 2.0 * a, grid).points()?,
                Box::new(|x: &[f64]| x[0] * x[0]),
            ),
            GadgetSpec::Mult { a, r } => (
                build_mult(a, r, nu)?,
                2.0 * a * a * 0.25_f64.powi(r as i32),
                GridSpec::cube(2, -a, a, grid).points()?,
                Box::new(|x: &[f64]| x[0] * x[1]),
            ),
            GadgetSpec::MultD { d, a, r } => (
                build_mult_d(d, a, r, nu)?,
                mult_d_error_bound(d, a, r),
                GridSpec::cube(d, -1.0, 1.0, grid).points()?,
                Box::new(|x: &[f64]| x.iter().product()),
            ),
            GadgetSpec::Poly { d, n, a, r } => {
                let monos = graded_lex_monomials(d, n);
                let u: Vec<f64> = (0..monos.len())
                    .map(|i| if i % 2 == 0 { 1.0 } else { -0.5 })
                    .collect();
                let claimed: f64 =
                    u.iter().map(|c| c.abs()).sum::<f64>() * mult_d_error_bound(n + 1, a, r);
                let q = monos.len();
                let net = build_poly(d, n, &u, a, r, nu)?;
                // x on the grid, y fixed at alternating ±0.9
                let ys: Vec<f64> = (0..q).map(|i| if i % 2 == 0 { 0.9 } else { -0.9 }).collect();
                let pts: Vec<Vec<f64>> = GridSpec::cube(d, -1.0, 1.0, grid)
                    .points()?
                    .into_iter()
                    .map(|mut x| {
                        x.extend_from_slice(&ys);
                        x
                    })
                    .collect();
                let target = move |z: &[f64]| {
                    monos
                        .iter()
                        .enumerate()
                        .map(|(i, al)| {
                            let m: f64 = al.iter().enumerate().map(|(j, &e)| z[j].powi(e as i32)).product();
                            u[i] * z[d + i] * m
                        })
                        .sum()
                };
                (net, claimed, pts, Box::new(target))
            }
            GadgetSpec::Indicator { d, r } => {
                let margin = 1.0 / r as f64;
                let pts: Vec<Vec<f64>> = GridSpec::cube(d, -1.0, 2.0, grid)
                    .points()?
                    .into_iter()
                    .filter(|x| outside_margins(x, 0.0, 1.0, margin))
                    .collect();
                (
                    build_indicator(&vec![0.0; d], &vec![1.0; d], r, nu)?,
                    0.0,
                    pts,
                    Box::new(|x: &[f64]| {
                        if x.iter().all(|v| (0.0..1.0).contains(v)) {
                            1.0
                        } else {
                            0.0
                        }
                    }),
                )
            }
            GadgetSpec::Test { d, r } => {
                let margin = 1.0 / r as f64;
                let s = 0.5 * (r as f64).min(5.0);
                let pts: Vec<Vec<f64>> = GridSpec::cube(d, -1.0, 2.0, grid)
                    .points()?
                    .into_iter()
                    .filter(|x| outside_margins(x, 0.0, 1.0, margin))
                    .map(|mut x| {
                        x.extend(std::iter::repeat_n(0.0, d));
                        x.extend(std::iter::repeat_n(1.0, d));
                        x.push(s);
                        x
                    })
                    .collect();
                (
                    build_test(d, r, nu)?,
                    0.0,
                    pts,
                    Box::new(move |z: &[f64]| {
                        if z[..d].iter().all(|v| (0.0..1.0).contains(v)) {
                            s
                        } else {
                            0.0
                        }
                    }),
                )
            }
        };
    let compiled = net.compile();
    let measured = scan_max(&points, |x| (compiled.eval_scalar(x) - target(x)).abs());
    Ok(GadgetReport {
        gadget_name: spec.name().to_string(),
        r: spec.r(),
        claimed_bound: claimed,
        measured_sup_error: measured,
        grid_size: points.len(),
        params: param_stats(&net),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(n: &DenseNetwork, x: &[f64]) -> f64 {
        n.eval(x).unwrap()[0]
    }

    #[test]
    fn identity_examples() {
        assert_eq!(ev(&build_identity(1, 0.0).unwrap(), &[3.7]), 3.7);
        let n = build_identity(2, 0.3).unwrap();
        let y = n.eval(&[-1.5, 2.25]).unwrap();
        assert!((y[0] + 1.5).abs() < 1e-15 && (y[1] - 2.25).abs() < 1e-15);
        assert!(param_stats(&n).max_abs_weight <= 1.0);
    }

    #[test]
    fn relu_examples() {
        let n = build_relu(1, 0.5).unwrap();
        assert!(ev(&n, &[-4.0]).abs() < 1e-15);
        assert!((ev(&n, &[4.0]) - 4.0).abs() < 1e-15);
        assert!((param_stats(&n).max_abs_weight - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hat_examples() {
        let h = build_hat(0.0).unwrap();
        for (x, y) in [(0.5, 1.0), (0.25, 0.5), (0.75, 0.5), (-1.0, 0.0), (2.0, 0.0)] {
            assert!((ev(&h, &[x]) - y).abs() < 1e-15, "hat({x})");
        }
    }

    #[test]
    fn square_example_bound() {
        let s = build_square(1.0, 4, 0.0).unwrap();
        assert_eq!(s.depth(), 4);
        assert!(ev(&s, &[0.0]).abs() <= 1.0 / 64.0);
        let rep = verify_gadget(&GadgetSpec::Square { a: 1.0, r: 4 }, 0.0, 10_000).unwrap();
        assert!(rep.holds(), "{rep:?}");
    }

    #[test]
    fn mult_examples() {
        let m = build_mult(1.0, 5, 0.0).unwrap();
        assert!(ev(&m, &[0.6, 0.0]).abs() <= 2.0 * 0.25_f64.powi(5));
        let m6 = build_mult(1.0, 6, 0.0).unwrap();
        assert!((ev(&m6, &[0.7, -0.8]) + 0.56).abs() <= 2.0 * 0.25_f64.powi(6));
        assert_eq!(m.widths()[1], 24);
    }

    #[test]
    fn mult_d_examples() {
        let id = build_mult_d(1, 1.0, 3, 0.0).unwrap();
        assert_eq!(ev(&id, &[0.37]), 0.37);
        let m = build_mult_d(3, 1.0, 6, 0.0).unwrap();
        assert!((ev(&m, &[0.5, 0.5, 0.5]) - 0.125).abs() <= mult_d_error_bound(3, 1.0, 6));
        assert!(m.architecture().max_width() <= 24 * 3);
    }

    #[test]
    fn monomial_order() {
        assert_eq!(
            graded_lex_monomials(2, 2),
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(graded_lex_monomials(2, 1).len(), binomial(3, 2));
        assert_eq!(binomial(5, 2), 10);
    }

    #[test]
    fn poly_examples() {
        let p = build_poly(1, 1, &[1.0, 0.0], 1.0, 5, 0.0).unwrap();
        assert!((ev(&p, &[0.3, 1.0, 1.0]) - 1.0).abs() <= mult_d_error_bound(2, 1.0, 5));
        let p = build_poly(1, 2, &[0.0, 0.0, 1.0], 1.0, 6, 0.0).unwrap();
        assert!((ev(&p, &[0.5, 1.0, 1.0, 1.0]) - 0.25).abs() <= mult_d_error_bound(3, 1.0, 6));
        assert!(build_poly(1, 2, &[0.0, 1.0], 1.0, 6, 0.0).is_err());
    }

    #[test]
    fn indicator_examples() {
        let f = build_indicator(&[0.0], &[1.0], 10, 0.0).unwrap();
        assert_eq!(ev(&f, &[0.5]), 1.0);
        assert_eq!(ev(&f, &[2.0]), 0.0);
        let v = ev(&f, &[0.05]);
        assert!((0.0..=1.0).contains(&v));
        assert!(build_indicator(&[0.0], &[0.1], 10, 0.0).is_err());
    }

    #[test]
    fn test_examples() {
        let t = build_test(1, 10, 0.0).unwrap();
        assert_eq!(ev(&t, &[0.5, 0.0, 1.0, 3.0]), 3.0);
        assert_eq!(ev(&t, &[0.5, 0.0, 1.0, 0.0]), 0.0);
        assert_eq!(ev(&t, &[7.0, 0.0, 1.0, 5.0]), 0.0);
    }

    #[test]
    fn square_and_mult_rate_in_r() {
        let line: Vec<f64> = (0..=4000).map(|i| -2.0 + i as f64 / 1000.0).collect();
        let sq = |r: usize| {
            let n = build_square(1.0, r, 0.0).unwrap();
            line.iter().map(|&x| (ev(&n, &[x]) - x * x).abs()).fold(0.0, f64::max)
        };
        let mu = |r: usize| {
            let n = build_mult(1.0, r, 0.0).unwrap();
            let mut e: f64 = 0.0;
            for i in 0..=100 {
                for j in 0..=100 {
                    let (x, y) = (-1.0 + i as f64 / 50.0, -1.0 + j as f64 / 50.0);
                    e = e.max((ev(&n, &[x, y]) - x * y).abs());
                }
            }
            e
        };
        for err in [&sq as &dyn Fn(usize) -> f64, &mu] {
            let logs: Vec<f64> = (3..=8).map(|r| err(r).log(4.0)).collect();
            for w in logs.windows(2) {
                assert!(w[0] - w[1] >= 0.9, "log4 errors {logs:?}");
            }
        }
    }
}
