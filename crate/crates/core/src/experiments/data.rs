//! Synthetic regression and classification data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::approximator::TargetFunction;
use crate::bnn::{sigmoid, Dataset, DatasetMeta, ModelKind};
use crate::error::{arg, Result};

/// `X_i` i.i.d. uniform on `[−a, a]^d`, then `Y_i = f_0(X_i) + σ_0 ε_i`
/// (Gaussian) or `Y_i ~ Bernoulli(φ(f_0(X_i)))` (logistic). All inputs are
/// drawn before any response.
pub fn generate_dataset_with(kind: ModelKind, f0: &TargetFunction, n: usize, sigma0_sq: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return arg("dataset needs n >= 1");
    }
    if !(sigma0_sq >= 0.0) {
        return arg("noise variance must be nonnegative");
    }
    let (a, d) = (f0.a, f0.d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-a..=a)).collect()).collect();
    let sd = sigma0_sq.sqrt();
    let y = x
        .iter()
        .map(|xi| {
            let m = f0.eval(xi);
            match kind {
                ModelKind::Gaussian => m + sd * rng.sample::<f64, _>(StandardNormal),
                ModelKind::Logistic => f64::from(rng.random::<f64>() < sigmoid(m)),
            }
        })
        .collect();
    let meta = DatasetMeta {
        f0: f0.name.clone(),
        sigma0_sq,
        seed,
    };
    Dataset::new(a, x, y, meta)
}

/// [`generate_dataset_with`] for a built-in function selected by name.
pub fn generate_dataset(kind: ModelKind, f0: &str, n: usize, sigma0_sq: f64, a: f64, d: usize, seed: u64) -> Result<Dataset> {
    let f = TargetFunction::builtin(f0, d, a, 1.0)?;
    generate_dataset_with(kind, &f, n, sigma0_sq, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn reproducible_and_exact_without_noise() {
        let a = generate_dataset(ModelKind::Gaussian, "sin", 3, 0.25, 1.0, 1, 5).unwrap();
        let b = generate_dataset(ModelKind::Gaussian, "sin", 3, 0.25, 1.0, 1, 5).unwrap();
        assert_eq!(a, b);
        let f = TargetFunction::builtin("poly", 2, 1.5, 1.0).unwrap();
        let c = generate_dataset_with(ModelKind::Gaussian, &f, 50, 0.0, 2).unwrap();
        for (x, y) in c.x.iter().zip(&c.y) {
            assert_eq!(*y, f.eval(x));
            assert!(x.iter().all(|v| v.abs() <= 1.5));
        }
    }

    #[test]
    fn logistic_zero_function_is_balanced() {
        let ds = generate_dataset(ModelKind::Logistic, "zero", 100_000, 0.0, 1.0, 1, 3).unwrap();
        let mean = ds.y.iter().sum::<f64>() / ds.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!(ds.validate(Some(ModelKind::Logistic)).is_ok());
    }

    #[test]
    fn unknown_selector() {
        assert!(matches!(generate_dataset(ModelKind::Gaussian, "nope", 3, 0.0, 1.0, 1, 0), Err(Error::Config(_))));
    }
}
