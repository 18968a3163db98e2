//! Coarse/fine cube partitions of `[−a, a)^d` and the tent partition of unity.

use crate::error::{arg, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// `M^d` cubes of side `2a/M`.
    Coarse,
    /// `M^{2d}` cubes of side `2a/M²`.
    Fine,
    /// The fine partition translated by `u_k`, `k ∈ [0, 2^d)`.
    Shifted(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    pub a: f64,
    pub d: usize,
    pub m: usize,
    pub level: Level,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partitions {
    pub coarse: PartitionSpec,
    pub fine: PartitionSpec,
}

pub fn make_partitions(a: f64, d: usize, m: usize) -> Result<Partitions> {
    if m < 2 {
        return arg(format!("partition needs M >= 2, got {m}"));
    }
    if d == 0 || !(a > 0.0) {
        return arg("partition needs d >= 1 and a > 0");
    }
    let spec = |level| PartitionSpec { a, d, m, level };
    Ok(Partitions {
        coarse: spec(Level::Coarse),
        fine: spec(Level::Fine),
    })
}

impl Partitions {
    pub fn shifted(&self, k: usize) -> Result<PartitionSpec> {
        if k >= 1 << self.fine.d {
            return arg(format!("shift index {k} out of range"));
        }
        Ok(PartitionSpec {
            level: Level::Shifted(k),
            ..self.fine.clone()
        })
    }

    /// Flat index of the fine cube at offset `j` inside coarse cube `c`.
    pub fn fine_in_coarse(&self, c: &[usize], j: &[usize]) -> Vec<usize> {
        c.iter().zip(j).map(|(ci, ji)| ci * self.fine.m + ji).collect()
    }

    /// `v_j`: the left corner of the `j`-th fine cube relative to its coarse
    /// cube, `j` enumerated row-major (first coordinate slowest).
    pub fn offset(&self, j: usize) -> Vec<f64> {
        let h = self.fine.side();
        unflatten(j, self.fine.d, self.fine.m)
            .into_iter()
            .map(|t| t as f64 * h)
            .collect()
    }
}

/// Row-major multi-index of `flat` in `{0..m−1}^d`.
pub fn unflatten(mut flat: usize, d: usize, m: usize) -> Vec<usize> {
    let mut idx = vec![0; d];
    for i in (0..d).rev() {
        idx[i] = flat % m;
        flat /= m;
    }
    idx
}

pub fn flatten(idx: &[usize], m: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * m + i)
}

impl PartitionSpec {
    pub fn side(&self) -> f64 {
        match self.level {
            Level::Coarse => 2.0 * self.a / self.m as f64,
            _ => 2.0 * self.a / (self.m * self.m) as f64,
        }
    }

    pub fn per_dim(&self) -> usize {
        match self.level {
            Level::Coarse => self.m,
            _ => self.m * self.m,
        }
    }

    pub fn count(&self) -> usize {
        self.per_dim().pow(self.d as u32)
    }

    /// `u_k`: half a fine side in the coordinates where bit `d−1−i` of `k`
    /// is set, zero otherwise.
    pub fn shift(&self) -> Vec<f64> {
        match self.level {
            Level::Shifted(k) => shift_vector(k, self.d, 0.5 * self.side()),
            _ => vec![0.0; self.d],
        }
    }

    fn origin(&self) -> Vec<f64> {
        self.shift().into_iter().map(|u| u - self.a).collect()
    }

    /// Lattice index of the cube containing `x`, extending the grid beyond the
    /// domain.
    fn lattice(&self, x: &[f64]) -> Vec<i64> {
        let s = self.side();
        x.iter()
            .zip(self.origin())
            .map(|(xi, o)| ((xi - o) / s).floor() as i64)
            .collect()
    }

    /// `C_P(x)`: multi-index of the half-open cube containing `x`, or `None`
    /// outside the (possibly shifted) domain.
    pub fn cube_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.d {
            return None;
        }
        let n = self.per_dim() as i64;
        self.lattice(x)
            .into_iter()
            .map(|t| (0..n).contains(&t).then_some(t as usize))
            .collect()
    }

    pub fn left_corner(&self, idx: &[usize]) -> Vec<f64> {
        let s = self.side();
        idx.iter()
            .zip(self.origin())
            .map(|(&i, o)| o + s * i as f64)
            .collect()
    }
}

pub fn shift_vector(k: usize, d: usize, s: f64) -> Vec<f64> {
    (0..d)
        .map(|i| if (k >> (d - 1 - i)) & 1 == 1 { s } else { 0.0 })
        .collect()
}

/// Tent-product weight `Π_j max(0, 1 − (M²/a)|C_left + a/M² − x|)` of the
/// fine (or shifted fine) partition; reference arithmetic, not a network.
pub fn weight_w(p2: &PartitionSpec, x: &[f64]) -> f64 {
    let s = p2.side();
    let half = 0.5 * s;
    p2.lattice(x)
        .iter()
        .zip(p2.origin())
        .zip(x)
        .map(|((&t, o), xi)| {
            let center = o + s * t as f64 + half;
            (1.0 - (center - xi).abs() / half).max(0.0)
        })
        .product()
}
