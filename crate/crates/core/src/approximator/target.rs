//! Target functions with smoothness metadata and derivative access.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{arg, Error, Result};
use crate::grid::{scan_max, GridSpec};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DerivativeOracle = Arc<dyn Fn(&[usize], &[f64]) -> f64 + Send + Sync>;

/// Relative finite-difference step, multiplied by the domain width `2a`.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone)]
pub struct TargetFunction {
    pub name: String,
    pub d: usize,
    pub a: f64,
    pub beta: f64,
    /// Hölder norm bound `K`.
    pub k: f64,
    /// Sup bound `F` on `[−a, a]^d`.
    pub f_bound: f64,
    eval: Evaluator,
    deriv: Option<DerivativeOracle>,
    allow_fd: bool,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("a", &self.a)
            .field("beta", &self.beta)
            .field("k", &self.k)
            .field("f_bound", &self.f_bound)
            .field("analytic_derivatives", &self.deriv.is_some())
            .finish()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl TargetFunction {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        a: f64,
        beta: f64,
        k: f64,
        f_bound: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if d == 0 {
            return arg("target dimension must be positive");
        }
        if !(a > 0.0 && beta > 0.0 && k >= 0.0 && f_bound >= 0.0) {
            return arg("target needs a > 0, beta > 0, K >= 0, F >= 0");
        }
        Ok(Self {
            name: name.into(),
            d,
            a,
            beta,
            k,
            f_bound,
            eval: Arc::new(eval),
            deriv: None,
            allow_fd: true,
        })
    }

    pub fn with_derivatives(
        mut self,
        oracle: impl Fn(&[usize], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.deriv = Some(Arc::new(oracle));
        self
    }

    /// Disables the finite-difference fallback; derivative requests without
    /// an oracle then fail.
    pub fn without_fallback(mut self) -> Self {
        self.allow_fd = false;
        self
    }

    pub fn with_domain(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn has_oracle(&self) -> bool {
        self.deriv.is_some()
    }

    /// True when Taylor data would come from finite differences.
    pub fn uses_finite_differences(&self) -> bool {
        self.deriv.is_none() && self.taylor_degree() >= 1
    }

    /// Polynomial degree of the local Taylor pieces: `max(1, ⌊β⌋)`.
    pub fn taylor_degree(&self) -> usize {
        (self.beta.floor() as usize).max(1)
    }

    /// `∂^α f(x)`.
    pub fn derivative(&self, alpha: &[usize], x: &[f64]) -> Result<f64> {
        if alpha.len() != self.d || x.len() != self.d {
            return Err(Error::Shape("multi-index or point has wrong length".into()));
        }
        if alpha.iter().all(|&e| e == 0) {
            return Ok(self.eval(x));
        }
        if let Some(o) = &self.deriv {
            return Ok(o(alpha, x));
        }
        if !self.allow_fd {
            return Err(Error::Capability(format!(
                "target '{}' has no derivative oracle",
                self.name
            )));
        }
        Ok(self.finite_difference(alpha, x))
    }

    // Tensor product of central stencils `Σ_m (−1)^m C(e,m) f(x + (e/2 − m)h)/h^e`.
    fn finite_difference(&self, alpha: &[usize], x: &[f64]) -> f64 {
        let h = FD_STEP * 2.0 * self.a;
        let total: usize = alpha.iter().map(|e| e + 1).product();
        let mut acc = 0.0;
        let mut pt = x.to_vec();
        for flat in 0..total {
            let mut rest = flat;
            let mut coef = 1.0;
            for (i, &e) in alpha.iter().enumerate() {
                let m = rest % (e + 1);
                rest /= e + 1;
                coef *= if m % 2 == 0 { 1.0 } else { -1.0 } * binom(e, m);
                pt[i] = x[i] + (e as f64 / 2.0 - m as f64) * h;
            }
            acc += coef * self.eval(&pt);
        }
        let order: usize = alpha.iter().sum();
        acc / h.powi(order as i32)
    }

    /// `z ↦ f(z + u)` with the same metadata.
    pub fn shifted(&self, u: &[f64]) -> Self {
        let mut out = self.clone();
        let e = self.eval.clone();
        let shift = u.to_vec();
        let s1 = shift.clone();
        out.eval = Arc::new(move |z: &[f64]| {
            let x: Vec<f64> = z.iter().zip(&s1).map(|(a, b)| a + b).collect();
            e(&x)
        });
        if let Some(o) = self.deriv.clone() {
            out.deriv = Some(Arc::new(move |al: &[usize], z: &[f64]| {
                let x: Vec<f64> = z.iter().zip(&shift).map(|(a, b)| a + b).collect();
                o(al, &x)
            }));
        }
        out
    }

    /// Spot-checks `|f| ≤ F` on a grid of `[−a, a]^d`.
    pub fn validate(&self, grid: usize) -> Result<()> {
        let pts = GridSpec::cube(self.d, -self.a, self.a, grid).points()?;
        let sup = scan_max(&pts, |x| self.eval(x).abs());
        if sup > self.f_bound * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Invariant(format!(
                "target '{}' reaches {sup} above its bound F={}",
                self.name, self.f_bound
            )));
        }
        Ok(())
    }

    /// Built-in suite: `sin`, `linear`, `const`, `zero`, `poly`, `square`,
    /// `additive`, `bump`.
    pub fn builtin(name: &str, d: usize, a: f64, beta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("builtin needs d >= 1".into()));
        }
        let n = (beta.floor() as usize).max(1);
        let df = d as f64;
        let t = match name {
            "sin" => Self::new(name, d, a, beta, 0.5 * PI.powi(n as i32 + 1), 0.5, |x: &[f64]| {
                0.5 * (PI * x.iter().sum::<f64>()).sin()
            })?
            .with_derivatives(|al: &[usize], x: &[f64]| {
                let o: usize = al.iter().sum();
                0.5 * PI.powi(o as i32) * (PI * x.iter().sum::<f64>() + o as f64 * PI / 2.0).sin()
            }),
            "linear" => Self::new(name, d, a, beta, (df * a).max(1.0), df * a, |x: &[f64]| x.iter().sum())?
                .with_derivatives(|al: &[usize], x: &[f64]| match al.iter().sum::<usize>() {
                    0 => x.iter().sum(),
                    1 => 1.0,
                    _ => 0.0,
                }),
            "const" | "zero" => {
                let c = if name == "const" { 0.5 } else { 0.0 };
                Self::new(name, d, a, beta, c, c, move |_: &[f64]| c)?
                    .with_derivatives(move |al: &[usize], _: &[f64]| {
                        if al.iter().all(|&e| e == 0) {
                            c
                        } else {
                            0.0
                        }
                    })
            }
            "poly" => {
                let f_bound = a * a + 0.5 * a;
                Self::new(name, d, a, beta, f_bound.max(2.0 * a + 0.5).max(2.0), f_bound, move |x: &[f64]| {
                    x.iter().map(|v| v * v - 0.5 * v).sum::<f64>() / df
                })?
                .with_derivatives(move |al: &[usize], x: &[f64]| {
                    let o: usize = al.iter().sum();
                    let i = al.iter().position(|&e| e > 0);
                    match (o, i) {
                        (0, _) => x.iter().map(|v| v * v - 0.5 * v).sum::<f64>() / df,
                        (1, Some(i)) => (2.0 * x[i] - 0.5) / df,
                        (2, Some(i)) if al[i] == 2 => 2.0 / df,
                        _ => 0.0,
                    }
                })
            }
            "square" => Self::new(name, d, a, beta, (df * a).powi(2).max(2.0 * df * a).max(2.0), (df * a).powi(2), |x: &[f64]| {
                let s: f64 = x.iter().sum();
                s * s
            })?
            .with_derivatives(|al: &[usize], x: &[f64]| {
                let s: f64 = x.iter().sum();
                match al.iter().sum::<usize>() {
                    0 => s * s,
                    1 => 2.0 * s,
                    2 => 2.0,
                    _ => 0.0,
                }
            }),
            "additive" => Self::new(name, d, a, beta, 0.5 * PI.powi(n as i32 + 1), 0.5, move |x: &[f64]| {
                x.iter().map(|v| 0.5 * (PI * v).sin()).sum::<f64>() / df
            })?
            .with_derivatives(move |al: &[usize], x: &[f64]| {
                let o: usize = al.iter().sum();
                if o == 0 {
                    return x.iter().map(|v| 0.5 * (PI * v).sin()).sum::<f64>() / df;
                }
                match al.iter().position(|&e| e == o) {
                    Some(i) => 0.5 * PI.powi(o as i32) * (PI * x[i] + o as f64 * PI / 2.0).sin() / df,
                    None => 0.0,
                }
            }),
            // No oracle: Taylor data comes from finite differences.
            "bump" => Self::new(name, d, a, beta, 10.0, (-1.0f64).exp(), move |x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (a * a);
                if r2 < 1.0 {
                    (-1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            })?,
            other => return Err(Error::Config(format!("unknown builtin function '{other}'"))),
        };
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_oracles_match_finite_differences() {
        for name in ["sin", "linear", "poly", "square", "additive"] {
            let f = TargetFunction::builtin(name, 2, 1.0, 2.0).unwrap();
            let fd = TargetFunction::new("fd", 2, 1.0, 2.0, 1.0, 1.0, {
                let g = f.clone();
                move |x: &[f64]| g.eval(x)
            })
            .unwrap();
            assert!(fd.uses_finite_differences());
            let x = [0.31, -0.42];
            for al in [[1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
                let want = f.derivative(&al, &x).unwrap();
                let got = fd.derivative(&al, &x).unwrap();
                assert!((want - got).abs() < 1e-4, "{name} {al:?}: {want} vs {got}");
            }
        }
    }

    #[test]
    fn shifted_moves_argument() {
        let f = TargetFunction::builtin("sin", 1, 1.0, 2.0).unwrap();
        let g = f.shifted(&[0.25]);
        assert_eq!(g.eval(&[0.0]), f.eval(&[0.25]));
        assert_eq!(g.derivative(&[1], &[0.0]).unwrap(), f.derivative(&[1], &[0.25]).unwrap());
    }

    #[test]
    fn missing_oracle_without_fallback_is_capability_error() {
        let f = TargetFunction::builtin("bump", 1, 1.0, 2.0).unwrap().without_fallback();
        assert!(matches!(f.derivative(&[1], &[0.0]), Err(Error::Capability(_))));
        assert!(f.derivative(&[0], &[0.0]).is_ok());
    }

    #[test]
    fn builtins_respect_their_bounds() {
        for name in ["sin", "linear", "const", "zero", "poly", "square", "additive", "bump"] {
            TargetFunction::builtin(name, 2, 1.0, 2.0).unwrap().validate(400).unwrap();
        }
        assert!(matches!(TargetFunction::builtin("nope", 1, 1.0, 1.0), Err(Error::Config(_))));
    }
}
