//! Layered compositions of low-dimensional smooth functions.

use super::build::{build_holder_approximator, holder_architecture, holder_weight_bound};
use super::target::TargetFunction;
use crate::error::{arg, Error, Result};
use crate::net::{compose, concat_parallel, extend_depth, rescale_to_bound, Architecture, DenseNetwork, Layer};

/// `f = f_{q,1}` with `f_{l,i} = g_{l,i}(f_{l−1, s+1}, …, f_{l−1, s+d_{l,i}})`,
/// `s = Σ_{i'<i} d_{l,i'}` and `f_{0,i} = x_i`.
#[derive(Clone, Debug)]
pub struct HierarchicalComposition {
    /// Input dimension `N_0 = d`.
    pub d: usize,
    pub a: f64,
    /// Common sup bound `F` of every node function.
    pub f_bound: f64,
    pub c_lip: f64,
    /// `layers[l][i]` is `g_{l+1,i+1}`; its `d` and `beta` give `(β_{l,i}, d_{l,i})`.
    pub layers: Vec<Vec<TargetFunction>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodePlan {
    pub layer: usize,
    pub index: usize,
    pub m: usize,
    pub architecture: Architecture,
}

fn node_err(layer: usize, index: usize, e: Error) -> Error {
    Error::Node {
        layer,
        index,
        source: Box::new(e),
    }
}

impl HierarchicalComposition {
    pub fn new(d: usize, a: f64, f_bound: f64, c_lip: f64, layers: Vec<Vec<TargetFunction>>) -> Result<Self> {
        let h = Self { d, a, f_bound, c_lip, layers };
        h.validate()?;
        Ok(h)
    }

    /// `N_0, …, N_q`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.d)
            .chain(self.layers.iter().map(|l| l.len()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.d == 0 {
            return Err(Error::Structure("composition needs d >= 1 and q >= 1".into()));
        }
        if !(self.a > 0.0 && self.f_bound >= 0.0 && self.c_lip >= 1.0) {
            return arg("composition needs a > 0, F >= 0, C_Lip >= 1");
        }
        let sizes = self.sizes();
        for (l, nodes) in self.layers.iter().enumerate() {
            let total: usize = nodes.iter().map(|g| g.d).sum();
            if nodes.is_empty() || total != sizes[l] {
                return Err(Error::Structure(format!(
                    "layer {} node dimensions sum to {total}, previous layer has {}",
                    l + 1,
                    sizes[l]
                )));
            }
        }
        if sizes.last() != Some(&1) {
            return Err(Error::Structure("top layer must have a single node".into()));
        }
        Ok(())
    }

    /// `a' = max(a, 2F)`.
    pub fn node_domain(&self) -> f64 {
        self.a.max(2.0 * self.f_bound)
    }

    /// Exact composed value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        for nodes in &self.layers {
            let mut next = Vec::with_capacity(nodes.len());
            let mut s = 0;
            for g in nodes {
                next.push(g.eval(&cur[s..s + g.d]));
                s += g.d;
            }
            cur = next;
        }
        cur[0]
    }

    /// `M_{l,i} = ⌈n^{1/(2(2β+d))}⌉`.
    pub fn node_m(n: u64, g: &TargetFunction) -> usize {
        (n as f64).powf(1.0 / (2.0 * (2.0 * g.beta + g.d as f64))).ceil() as usize
    }

    /// Per-node grid parameters and architectures without building anything.
    pub fn plan(&self, n: u64) -> Result<Vec<NodePlan>> {
        self.validate()?;
        let a = self.node_domain();
        let mut out = Vec::new();
        for (l, nodes) in self.layers.iter().enumerate() {
            for (i, g) in nodes.iter().enumerate() {
                let m = Self::node_m(n, g);
                let architecture =
                    holder_architecture(g.d, g.beta, m, a).map_err(|e| node_err(l + 1, i + 1, e))?;
                out.push(NodePlan { layer: l + 1, index: i + 1, m, architecture });
            }
        }
        Ok(out)
    }
}

/// Composes per-node holder approximators on `[−a', a']` layer by layer. A
/// single node returns that node's approximator unchanged.
pub fn build_hierarchical_approximator(h: &HierarchicalComposition, n: u64, nu: f64) -> Result<DenseNetwork> {
    h.validate()?;
    let a = h.node_domain();
    let sizes = h.sizes();
    let mut bound: f64 = 0.0;
    let mut net: Option<DenseNetwork> = None;
    for (l, nodes) in h.layers.iter().enumerate() {
        let mut parts = Vec::with_capacity(nodes.len());
        let mut s = 0;
        for (i, g) in nodes.iter().enumerate() {
            let g = g.clone().with_domain(a);
            let m = HierarchicalComposition::node_m(n, &g);
            let mut part = build_holder_approximator(&g, m, nu).map_err(|e| node_err(l + 1, i + 1, e))?;
            bound = bound.max(holder_weight_bound(&g, nu));
            if !(s == 0 && g.d == sizes[l]) {
                let mut sel = Layer::zeros(g.d, sizes[l]);
                for k in 0..g.d {
                    sel.set(k, s + k, 1.0);
                }
                part = part.precompose(&sel)?;
            }
            s += g.d;
            parts.push(part);
        }
        let stage = if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            let depth = parts.iter().map(|p| p.depth()).max().unwrap_or(1);
            let parts: Vec<DenseNetwork> = parts.iter().map(|p| extend_depth(p, depth)).collect::<Result<_>>()?;
            concat_parallel(&parts)?
        };
        net = Some(match net {
            None => stage,
            Some(prev) => compose(&stage, &prev)?,
        });
    }
    let net = net.expect("at least one layer");
    if h.layers.iter().map(|l| l.len()).sum::<usize>() == 1 {
        return Ok(net);
    }
    // fused layers can multiply two bounded weights
    rescale_to_bound(&net, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::build::build_holder_approximator;

    fn node(name: &str, d: usize, beta: f64) -> TargetFunction {
        TargetFunction::builtin(name, d, 1.0, beta).unwrap()
    }

    #[test]
    fn wiring_is_checked() {
        let bad = HierarchicalComposition::new(3, 1.0, 1.0, 1.0, vec![vec![node("linear", 2, 1.0)], vec![node("square", 1, 1.0)]]);
        assert!(matches!(bad, Err(Error::Structure(_))));
        let two_top = HierarchicalComposition::new(2, 1.0, 1.0, 1.0, vec![vec![node("sin", 1, 1.0), node("sin", 1, 1.0)]]);
        assert!(two_top.is_err());
    }

    #[test]
    fn figure_shape_is_accepted_and_planned() {
        let h = HierarchicalComposition::new(
            8,
            1.0,
            0.5,
            4.0,
            vec![
                vec![node("sin", 3, 4.0), node("sin", 2, 4.0), node("sin", 3, 5.0)],
                vec![node("sin", 3, 4.0)],
            ],
        )
        .unwrap();
        assert_eq!(h.sizes(), vec![8, 3, 1]);
        let plan = h.plan(4u64.pow(26)).unwrap();
        assert_eq!(plan.len(), 4);
        assert!(plan.iter().all(|p| p.m >= 4));
        assert_eq!(plan[1].architecture.input_dim(), 2);
    }

    #[test]
    fn single_node_equals_flat_builder() {
        let g = node("sin", 1, 2.0);
        let h = HierarchicalComposition::new(1, 1.0, 0.5, 4.0, vec![vec![g.clone()]]).unwrap();
        let n = 4u64.pow(10);
        let net = build_hierarchical_approximator(&h, n, 0.0).unwrap();
        let m = HierarchicalComposition::node_m(n, &g);
        let flat = build_holder_approximator(&g.with_domain(h.node_domain()), m, 0.0).unwrap();
        assert_eq!(net, flat);
    }

    #[test]
    fn small_node_m_is_reported_with_coordinates() {
        let h = HierarchicalComposition::new(1, 1.0, 0.5, 1.0, vec![vec![node("sin", 1, 2.0)]]).unwrap();
        match build_hierarchical_approximator(&h, 100, 0.0) {
            Err(Error::Node { layer: 1, index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
