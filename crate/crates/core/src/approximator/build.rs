//! Localized Taylor networks and the shifted partition-of-unity sum.
//!
//! A patch network on `[−A, A)^d` has a shared localizer front end that maps
//! `x` to `(x, C_left(x), Taylor data at C_left(x), I(x))`, where `I` is one
//! deep inside a fine cube and zero near its faces. Three heads read that
//! vector: the tent weight, the Taylor polynomial, and the gate `1 − I`.

use rayon::prelude::*;

use super::partition::{shift_vector, unflatten};
use super::target::TargetFunction;
use crate::error::{arg, Error, Result};
use crate::gadgets::{
    ceil_log2, chain, graded_lex_monomials, margin_units, mult_d_raw, mult_raw, poly_raw,
    square_weight_bound, unit_layer, Affine, Unit,
};
use crate::grid::{scan_max, GridSpec};
use crate::net::{
    affine_combine, compose, concat_parallel, extend_depth, identity_network, rescale_to_bound,
    Architecture, DenseNetwork, Layer,
};

/// Gating level of the polynomial head, relative to its normalized bound 1.
pub const CHECK_LEVEL: f64 = 1.1;

/// Shape parameters shared by every network built for one `(d, M, β, A)`.
#[derive(Clone, Debug)]
pub struct Layout {
    pub d: usize,
    pub m: usize,
    pub a: f64,
    pub nu: f64,
    pub taylor_degree: usize,
    pub monomials: Vec<Vec<usize>>,
    /// Indicator sharpness; margins have width `1/r_ind = M^{−(2β+2)}`.
    pub r_ind: f64,
    /// Depth parameter of every product gadget, `⌈log2 M^β⌉`.
    pub r_mult: usize,
}

impl Layout {
    pub fn new(d: usize, m: usize, beta: f64, a: f64, nu: f64) -> Result<Self> {
        if m < 4 {
            return arg(format!("approximator needs M >= 4, got {m}"));
        }
        if d == 0 || !(a > 0.0) || !(beta > 0.0) {
            return arg("approximator needs d >= 1, a > 0, beta > 0");
        }
        if !(0.0..1.0).contains(&nu) {
            return arg(format!("slope nu={nu} outside [0,1)"));
        }
        let mf = m as f64;
        let taylor_degree = (beta.floor() as usize).max(1);
        let r_mult = ((beta * mf.log2() - 1e-9).ceil() as usize).max(1);
        Ok(Self {
            d,
            m,
            a,
            nu,
            taylor_degree,
            monomials: graded_lex_monomials(d, taylor_degree),
            r_ind: mf.powf(2.0 * beta + 2.0).ceil(),
            r_mult,
        })
    }

    pub fn coarse_count(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn coarse_side(&self) -> f64 {
        2.0 * self.a / self.m as f64
    }

    pub fn fine_side(&self) -> f64 {
        2.0 * self.a / (self.m * self.m) as f64
    }

    pub fn margin(&self) -> f64 {
        1.0 / self.r_ind
    }

    fn coarse_corner(&self, c: usize) -> Vec<f64> {
        let s = self.coarse_side();
        unflatten(c, self.d, self.m)
            .into_iter()
            .map(|t| -self.a + s * t as f64)
            .collect()
    }

    fn offset(&self, j: usize) -> Vec<f64> {
        let h = self.fine_side();
        unflatten(j, self.d, self.m)
            .into_iter()
            .map(|t| h * t as f64)
            .collect()
    }

    /// `1/α!` per monomial.
    pub fn coefficients(&self) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|al| 1.0 / al.iter().map(|&e| (1..=e).product::<usize>() as f64).product::<f64>())
            .collect()
    }

    /// Weight cap for the final re-scaling; independent of `M`.
    pub fn weight_bound(&self) -> f64 {
        square_weight_bound(1.0, self.nu).max(2.0 * (self.a + 1.0))
    }
}

/// Taylor data `∂^α f(C_left)·h^{|α|}/s_y` for every fine cube, indexed
/// `(coarse·M^d + offset)·Q + monomial`.
#[derive(Clone, Debug)]
pub struct TaylorTable {
    pub values: Vec<f64>,
    /// Power of two making every entry at most one in magnitude.
    pub scale: f64,
}

pub fn taylor_table(layout: &Layout, f: &TargetFunction) -> Result<TaylorTable> {
    if f.d != layout.d {
        return Err(Error::Shape(format!("target has d={}, layout d={}", f.d, layout.d)));
    }
    let mc = layout.coarse_count();
    let h = layout.fine_side();
    let mut values = Vec::with_capacity(mc * mc * layout.monomials.len());
    for c in 0..mc {
        let base = layout.coarse_corner(c);
        for j in 0..mc {
            let corner: Vec<f64> = base.iter().zip(layout.offset(j)).map(|(b, v)| b + v).collect();
            for al in &layout.monomials {
                let order: usize = al.iter().sum();
                values.push(f.derivative(al, &corner)? * h.powi(order as i32));
            }
        }
    }
    let peak = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if !peak.is_finite() {
        return Err(Error::Invariant(format!("non-finite Taylor data for '{}'", f.name)));
    }
    let scale = 2.0_f64.powi(peak.log2().ceil() as i32);
    for v in &mut values {
        *v /= scale;
    }
    Ok(TaylorTable { values, scale })
}

/// Index helpers for the localizer output `(x, C_left, payloads, I)`.
struct LocOut {
    d: usize,
    q: usize,
}

impl LocOut {
    fn corner(&self, i: usize) -> usize {
        self.d + i
    }
    fn payload(&self, k: usize) -> usize {
        2 * self.d + k
    }
    fn indicator(&self) -> usize {
        2 * self.d + self.q
    }
    fn len(&self) -> usize {
        2 * self.d + self.q + 1
    }
}

fn id_units(d: usize) -> Vec<Unit> {
    (0..d).map(|i| Unit::id(vec![(i, 1.0)], 0.0, vec![(i, 1.0)])).collect()
}

/// Two-stage localizer: coarse cube by indicators, fine cube inside it by
/// gated payload transport. Exact wherever `x` is at least one margin away
/// from every fine face; `I` is exactly zero within one margin of a face and
/// exactly one beyond two margins.
pub fn localizer(layout: &Layout, table: Option<&TaylorTable>) -> Result<DenseNetwork> {
    let (d, nu) = (layout.d, layout.nu);
    let mc = layout.coarse_count();
    let q = if table.is_some() { layout.monomials.len() } else { 0 };
    let (big_h, h, dl) = (layout.coarse_side(), layout.fine_side(), layout.margin());
    let r = layout.r_ind;

    // stage one, layer A: x, σ_c (cube margins), σ'_c (shrunk-cube margins)
    let (sig, sigp) = (d, d + mc);
    let mut units = id_units(d);
    for c in 0..mc {
        let lo = layout.coarse_corner(c);
        for i in 0..d {
            units.extend(margin_units(
                i,
                &Affine::constant(lo[i]),
                &Affine::constant(lo[i] + big_h),
                dl,
                sig + c,
            ));
            units.extend(margin_units(
                i,
                &Affine::constant(lo[i] + dl),
                &Affine::constant(lo[i] + big_h - dl),
                dl,
                sigp + c,
            ));
        }
    }
    let n1 = d + 2 * mc;
    let s1a = unit_layer(d, n1, &units, &vec![0.0; n1], nu)?;

    // stage one, layer B: x, φ2 = corner, φ3 = per-offset payloads, S
    let (phi2, phi3, s_out) = (d, 2 * d, 2 * d + mc * q);
    let n2 = s_out + 1;
    let mut units = id_units(d);
    for c in 0..mc {
        let lo = layout.coarse_corner(c);
        let mut post: Vec<(usize, f64)> = (0..d).map(|i| (phi2 + i, lo[i])).collect();
        if let Some(t) = table {
            let row = &t.values[c * mc * q..(c + 1) * mc * q];
            post.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, &v)| (phi3 + k, v)));
        }
        units.push(Unit::relu(vec![(sig + c, -r)], 1.0, post));
        units.push(Unit::relu(vec![(sigp + c, -r)], 1.0, vec![(s_out, 1.0)]));
    }
    let s1b = unit_layer(n1, n2, &units, &vec![0.0; n2], nu)?;

    // stage two, layer A: x, Σ_j, payloads (corner + v_j, φ3_j), Σ'_j, S
    let width = d + q;
    let (tsig, pay) = (d, d + mc);
    let tsigp = pay + mc * width;
    let s_mid = tsigp + mc;
    let n3 = s_mid + 1;
    let mut units = id_units(d);
    for j in 0..mc {
        let v = layout.offset(j);
        for i in 0..d {
            units.extend(margin_units(
                i,
                &Affine::var(phi2 + i, v[i]),
                &Affine::var(phi2 + i, v[i] + h),
                dl,
                tsig + j,
            ));
            units.extend(margin_units(
                i,
                &Affine::var(phi2 + i, v[i] + dl),
                &Affine::var(phi2 + i, v[i] + h - dl),
                dl,
                tsigp + j,
            ));
            units.push(Unit::id(vec![(phi2 + i, 1.0)], v[i], vec![(pay + j * width + i, 1.0)]));
        }
        for k in 0..q {
            units.push(Unit::id(
                vec![(phi3 + j * q + k, 1.0)],
                0.0,
                vec![(pay + j * width + d + k, 1.0)],
            ));
        }
    }
    units.push(Unit::id(vec![(s_out, 1.0)], 0.0, vec![(s_mid, 1.0)]));
    let s2a = unit_layer(n2, n3, &units, &vec![0.0; n3], nu)?;

    // stage two, layer B: gated sums over offsets
    let out = LocOut { d, q };
    let gate = r * layout.a.max(1.0);
    let mut units = id_units(d);
    for j in 0..mc {
        for ch in 0..width {
            let p = pay + j * width + ch;
            let o = d + ch;
            units.push(Unit::relu(vec![(p, 1.0), (tsig + j, -gate)], 0.0, vec![(o, 1.0)]));
            units.push(Unit::relu(vec![(p, -1.0), (tsig + j, -gate)], 0.0, vec![(o, -1.0)]));
        }
        units.push(Unit::relu(
            vec![(s_mid, 1.0), (tsigp + j, -r)],
            0.0,
            vec![(out.indicator(), 1.0)],
        ));
    }
    let s2b = unit_layer(n3, out.len(), &units, &vec![0.0; out.len()], nu)?;
    chain(vec![s1a, s1b, s2a, s2b])
}

fn weight_head(layout: &Layout, out: &LocOut) -> Result<DenseNetwork> {
    let d = layout.d;
    let s = 2.0 / layout.fine_side();
    let mut units = Vec::with_capacity(3 * d);
    for i in 0..d {
        for (off, c) in [(0.0, 1.0), (1.0, -2.0), (2.0, 1.0)] {
            units.push(Unit::relu(vec![(i, s), (out.corner(i), -s)], -off, vec![(i, c)]));
        }
    }
    let tents = unit_layer(out.len(), d, &units, &vec![0.0; d], layout.nu)?;
    compose(&mult_d_raw(d, 1.0, layout.r_mult, layout.nu)?, &tents)
}

fn poly_head(layout: &Layout, out: &LocOut) -> Result<DenseNetwork> {
    let (d, q) = (layout.d, layout.monomials.len());
    let inv_h = 1.0 / layout.fine_side();
    let mut sel = Layer::zeros(d + q, out.len());
    for i in 0..d {
        sel.set(i, i, inv_h);
        sel.set(i, out.corner(i), -inv_h);
    }
    for k in 0..q {
        sel.set(d + k, out.payload(k), 1.0);
    }
    let coeffs = layout.coefficients();
    poly_raw(d, layout.taylor_degree, &coeffs, 1.0, layout.r_mult, layout.nu)?.precompose(&sel)
}

fn scale_output(net: &DenseNetwork, c: f64) -> Result<DenseNetwork> {
    net.postcompose(&Layer::new(1, 1, vec![c], vec![0.0])?)
}

fn finish(layout: &Layout, raw: &DenseNetwork) -> Result<DenseNetwork> {
    let bound = layout.weight_bound();
    let peak = raw
        .layers()
        .iter()
        .flat_map(|l| l.biases())
        .fold(0.0_f64, |m, b| m.max(b.abs()));
    if peak > bound {
        return Err(Error::Invariant(format!("bias {peak} exceeds weight bound {bound}")));
    }
    rescale_to_bound(raw, bound)
}

fn layout_for(f: &TargetFunction, m: usize, a: f64, nu: f64) -> Result<Layout> {
    Layout::new(f.d, m, f.beta, a, nu)
}

/// Localized Taylor approximation of `f` on `[−a, a)^d`, accurate away from
/// the fine-cube faces.
pub fn build_inner_net(f: &TargetFunction, m: usize, nu: f64) -> Result<DenseNetwork> {
    let layout = layout_for(f, m, f.a, nu)?;
    let table = taylor_table(&layout, f)?;
    let loc = localizer(&layout, Some(&table))?;
    let out = LocOut { d: layout.d, q: layout.monomials.len() };
    let raw = compose(&poly_head(&layout, &out)?, &loc)?;
    finish(&layout, &scale_output(&raw, table.scale)?)
}

/// One on the face strips of the fine partition, zero deep inside each cube.
pub fn build_check_net(m: usize, beta: f64, a: f64, d: usize, nu: f64) -> Result<DenseNetwork> {
    let layout = Layout::new(d, m, beta, a, nu)?;
    let loc = localizer(&layout, None)?;
    let out = LocOut { d, q: 0 };
    let mut map = Layer::zeros(1, out.len());
    map.set(0, out.indicator(), -1.0);
    map.set_bias(0, 1.0);
    finish(&layout, &loc.postcompose(&map)?)
}

/// Tent-product weight of the fine partition.
pub fn build_weight_net(m: usize, beta: f64, a: f64, d: usize, nu: f64) -> Result<DenseNetwork> {
    let layout = Layout::new(d, m, beta, a, nu)?;
    let loc = localizer(&layout, None)?;
    let out = LocOut { d, q: 0 };
    finish(&layout, &compose(&weight_head(&layout, &out)?, &loc)?)
}

pub(crate) fn patch_raw(layout: &Layout, f: &TargetFunction) -> Result<DenseNetwork> {
    let table = taylor_table(layout, f)?;
    let loc = localizer(layout, Some(&table))?;
    let out = LocOut { d: layout.d, q: layout.monomials.len() };
    let mut sel = Layer::zeros(1, out.len());
    sel.set(0, out.indicator(), 1.0);
    let heads = [
        weight_head(layout, &out)?,
        poly_head(layout, &out)?,
        identity_network(1, layout.nu)?.precompose(&sel)?,
    ];
    let depth = heads.iter().map(|n| n.depth()).max().unwrap_or(1);
    let heads: Vec<DenseNetwork> = heads.iter().map(|n| extend_depth(n, depth)).collect::<Result<_>>()?;
    let heads = concat_parallel(&heads)?;
    let su: f64 = layout.coefficients().iter().sum();
    let c = CHECK_LEVEL;
    let gate = unit_layer(
        3,
        2,
        &[
            Unit::id(vec![(0, 1.0)], 0.0, vec![(0, 1.0)]),
            Unit::relu(vec![(1, 1.0 / su), (2, c)], -c, vec![(1, 1.0)]),
            Unit::relu(vec![(1, -1.0 / su), (2, c)], -c, vec![(1, -1.0)]),
        ],
        &[0.0, 0.0],
        layout.nu,
    )?;
    let product = scale_output(&mult_raw(1.0, layout.r_mult, layout.nu)?, table.scale * su)?;
    chain(vec![loc, heads, gate, product])
}

/// `w_{P2}·f` on all of `[−a, a)^d`: the inner net gated off the face strips
/// and multiplied by the weight net.
pub fn build_patch_net(f: &TargetFunction, m: usize, nu: f64) -> Result<DenseNetwork> {
    let layout = layout_for(f, m, f.a, nu)?;
    finish(&layout, &patch_raw(&layout, f)?)
}

pub(crate) fn holder_raw(f: &TargetFunction, m: usize, nu: f64) -> Result<(DenseNetwork, Layout)> {
    let big_a = 2.0 * f.a;
    let layout = layout_for(f, m, big_a, nu)?;
    let d = f.d;
    let s = big_a / (m * m) as f64;
    let patches: Vec<DenseNetwork> = (0..1usize << d)
        .into_par_iter()
        .map(|k| {
            let u = shift_vector(k, d, s);
            let mut shift = Layer::zeros(d, d);
            for i in 0..d {
                shift.set(i, i, 1.0);
                shift.set_bias(i, -u[i]);
            }
            patch_raw(&layout, &f.shifted(&u))?.precompose(&shift)
        })
        .collect::<Result<_>>()?;
    let raw = affine_combine(&vec![1.0; patches.len()], &patches, 0.0)?;
    Ok((raw, layout))
}

/// Sum of `2^d` patch networks over the shifted fine partitions of
/// `[−2a, 2a)^d`, re-scaled so that every parameter is at most a bound that
/// does not depend on `M`.
pub fn build_holder_approximator(f: &TargetFunction, m: usize, nu: f64) -> Result<DenseNetwork> {
    let (raw, layout) = holder_raw(f, m, nu)?;
    finish(&layout, &raw)
}

/// Weight cap used by [`build_holder_approximator`].
pub fn holder_weight_bound(f: &TargetFunction, nu: f64) -> f64 {
    square_weight_bound(1.0, nu).max(2.0 * (2.0 * f.a + 1.0))
}

fn tree_widths(inputs: usize, r: usize, copies: usize) -> Vec<usize> {
    let q = ceil_log2(inputs);
    if q == 0 {
        return vec![2 * copies];
    }
    (0..q)
        .flat_map(|round| std::iter::repeat_n(copies * 24 * (1usize << (q - round - 1)), r))
        .collect()
}

/// Widths of the holder approximator before its final re-scaling, from the
/// layout alone; re-scaling may append identity layers of width 2.
pub fn holder_architecture(d: usize, beta: f64, m: usize, a: f64) -> Result<Architecture> {
    let layout = Layout::new(d, m, beta, 2.0 * a, 0.0)?;
    let mc = layout.coarse_count();
    let q = layout.monomials.len();
    let mut patch = vec![
        2 * (d + 4 * d * mc),
        2 * (d + 2 * mc),
        2 * (d + 2 * d * mc + mc * (d + q) + 2 * d * mc + 1),
        2 * (d + 2 * mc * (d + q) + mc),
    ];
    let mut w = vec![6 * d];
    w.extend(tree_widths(d, layout.r_mult, 1));
    let p = tree_widths(layout.taylor_degree + 1, layout.r_mult, q);
    let depth = w.len().max(p.len()).max(1);
    for l in 0..depth {
        patch.push(w.get(l).copied().unwrap_or(2) + p.get(l).copied().unwrap_or(2) + 2);
    }
    patch.push(6);
    patch.extend(std::iter::repeat_n(24, layout.r_mult));
    let copies = 1usize << d;
    let mut widths = vec![d];
    widths.extend(patch.iter().map(|w| w * copies));
    widths.push(1);
    Architecture::new(widths)
}

/// Evaluation box `[−a, a − 1e−9]^d` with about `total` points.
pub fn score_grid(d: usize, a: f64, total: usize) -> GridSpec {
    let mut g = GridSpec::cube(d, -a, a - 1e-9, total);
    if let GridSpec::Latin { seed, .. } = &mut g {
        *seed = 17;
    }
    g
}

/// `max |net(x) − f(x)|` over the grid.
pub fn sup_error(net: &DenseNetwork, f: &TargetFunction, grid: &GridSpec) -> Result<f64> {
    if grid.dim() != net.input_dim() {
        return Err(Error::Shape("grid dimension differs from network input".into()));
    }
    let pts = grid.points()?;
    let c = net.compile();
    Ok(scan_max(&pts, |x| (c.eval_scalar(x) - f.eval(x)).abs()))
}
