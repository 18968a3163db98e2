//! Deterministic verification grids and max-reduction scans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// Tensor grid with `per_dim` equispaced points per coordinate, endpoints included.
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
        per_dim: usize,
    },
    /// Latin-hypercube sample of `n` points, reproducible from `seed`.
    Latin {
        lo: Vec<f64>,
        hi: Vec<f64>,
        n: usize,
        seed: u64,
    },
}

impl GridSpec {
    /// Box `[lo, hi]^d` with roughly `total` points: a tensor grid for `d ≤ 2`,
    /// a Latin-hypercube sample above.
    pub fn cube(d: usize, lo: f64, hi: f64, total: usize) -> Self {
        let (lo, hi) = (vec![lo; d], vec![hi; d]);
        match d {
            1 => GridSpec::Uniform { lo, hi, per_dim: total },
            2 => GridSpec::Uniform {
                lo,
                hi,
                per_dim: (total as f64).sqrt().ceil() as usize,
            },
            _ => GridSpec::Latin { lo, hi, n: total, seed: 0 },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Uniform { lo, .. } | GridSpec::Latin { lo, .. } => lo.len(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridSpec::Uniform { lo, per_dim, .. } => per_dim.pow(lo.len() as u32),
            GridSpec::Latin { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        if self.is_empty() || self.dim() == 0 {
            return arg("empty grid");
        }
        match self {
            GridSpec::Uniform { lo, hi, per_dim } => {
                let d = lo.len();
                let axis = |j: usize, i: usize| {
                    if *per_dim == 1 {
                        0.5 * (lo[j] + hi[j])
                    } else {
                        lo[j] + (hi[j] - lo[j]) * i as f64 / (*per_dim - 1) as f64
                    }
                };
                let total = self.len();
                Ok((0..total)
                    .map(|mut flat| {
                        let mut x = vec![0.0; d];
                        for j in (0..d).rev() {
                            x[j] = axis(j, flat % per_dim);
                            flat /= per_dim;
                        }
                        x
                    })
                    .collect())
            }
            GridSpec::Latin { lo, hi, n, seed } => {
                let d = lo.len();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
                for j in 0..d {
                    let mut strata: Vec<usize> = (0..*n).collect();
                    for i in (1..*n).rev() {
                        let k = rng.random_range(0..=i);
                        strata.swap(i, k);
                    }
                    cols.push(
                        strata
                            .into_iter()
                            .map(|s| {
                                let u: f64 = rng.random();
                                lo[j] + (hi[j] - lo[j]) * (s as f64 + u) / *n as f64
                            })
                            .collect(),
                    );
                }
                Ok((0..*n).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
            }
        }
    }
}

/// `max_x f(x)` over the points; NaN values propagate as `+∞`.
pub fn scan_max<F>(points: &[Vec<f64>], f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|x| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_includes_endpoints() {
        let g = GridSpec::cube(1, -1.0, 1.0, 5);
        let p = g.points().unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], vec![-1.0]);
        assert_eq!(p[4], vec![1.0]);
        assert_eq!(GridSpec::cube(2, 0.0, 1.0, 100).len(), 100);
    }

    #[test]
    fn latin_is_stratified_and_reproducible() {
        let g = GridSpec::cube(3, 0.0, 1.0, 50);
        let p = g.points().unwrap();
        assert_eq!(p, g.points().unwrap());
        let mut bins = [0usize; 50];
        for x in &p {
            bins[(x[1] * 50.0) as usize] += 1;
        }
        assert!(bins.iter().all(|&c| c == 1));
    }
}
