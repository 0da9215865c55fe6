//! Helpers shared by the integration suites.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use tvoir_core::var::{stability_report, TvVarModel};

/// A random stable model with a random SPD innovation covariance,
/// deterministic in `seed`. Coefficients are shrunk until the companion
/// matrix is stable at every step.
pub fn random_stable_model(seed: u64, max_m: usize, max_p: usize, t_len: usize) -> TvVarModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=max_m);
    let p = rng.random_range(1..=max_p);
    let mut sigma = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            sigma[(i, j)] = rng.random_range(-0.5..0.5);
        }
        sigma[(i, i)] = rng.random_range(0.5..1.5);
    }
    let sigma = &sigma * sigma.transpose() + DMatrix::<f64>::identity(m, m) * 0.1;

    let mut coeffs = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let mut a = DMatrix::from_fn(m, m * p, |_, _| rng.random_range(-0.6..0.6));
        loop {
            let trial = TvVarModel::new(vec![a.clone()], vec![sigma.clone()], 1.0).unwrap();
            if stability_report(&trial)[0] {
                break;
            }
            a *= 0.7;
        }
        coeffs.push(a);
    }
    TvVarModel::new(coeffs, vec![sigma; t_len], 1.0).unwrap()
}
