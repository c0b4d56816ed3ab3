//! Exact Gaussian-process regression with a squared-exponential kernel and
//! fixed hyperparameters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpHyper {
    /// Length scale in range-normalized units.
    pub length_scale: f64,
    pub signal_std: f64,
    pub noise_std: f64,
    pub prior_mean: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self {
            length_scale: 0.3,
            signal_std: 0.3,
            noise_std: 0.07,
            prior_mean: 0.5,
        }
    }
}

const INITIAL_JITTER: f64 = 1e-10;
const MAX_JITTER: f64 = 1e-4;

pub fn se_kernel(a: &[f64], b: &[f64], hyp: &GpHyper) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    hyp.signal_std.powi(2) * (-0.5 * d2 / hyp.length_scale.powi(2)).exp()
}

#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyper,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// Fits the posterior to normalized `inputs` and `targets`.
    pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, hyper: GpHyper) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::InvalidArgument(
                "inputs and targets differ in length".into(),
            ));
        }
        if !(hyper.length_scale > 0.0 && hyper.signal_std > 0.0 && hyper.noise_std >= 0.0) {
            return Err(Error::InvalidArgument(
                "GP hyperparameters must be positive".into(),
            ));
        }
        let n = inputs.len();
        if n == 0 {
            return Ok(Self {
                hyper,
                inputs,
                targets,
                chol: None,
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let base = DMatrix::from_fn(n, n, |i, j| se_kernel(&inputs[i], &inputs[j], &hyper));
        let noise = hyper.noise_std.powi(2);
        let resid = DVector::from_iterator(n, targets.iter().map(|y| y - hyper.prior_mean));
        let mut jitter = 0.0;
        loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += noise + jitter;
            }
            if let Some(chol) = k.cholesky() {
                let alpha = chol.solve(&resid);
                return Ok(Self {
                    hyper,
                    inputs,
                    targets,
                    chol: Some(chol),
                    alpha,
                    jitter,
                });
            }
            jitter = if jitter == 0.0 {
                INITIAL_JITTER
            } else {
                jitter * 10.0
            };
            if jitter > MAX_JITTER {
                return Err(Error::SingularKernel(jitter / 10.0));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior (mean, std) of the latent function at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (self.hyper.prior_mean, self.hyper.signal_std);
        };
        let kx = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|xi| se_kernel(xi, x, &self.hyper)),
        );
        let mean = self.hyper.prior_mean + kx.dot(&self.alpha);
        let v = chol
            .l()
            .solve_lower_triangular(&kx)
            .expect("triangular factor");
        let var = (self.hyper.signal_std.powi(2) - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_without_data() {
        let gp = GpModel::fit(vec![], vec![], GpHyper::default()).unwrap();
        assert_eq!(gp.predict(&[0.3, 0.1]), (0.5, 0.3));
    }

    #[test]
    fn interpolates_without_noise() {
        let hyp = GpHyper {
            noise_std: 0.0,
            ..GpHyper::default()
        };
        let xs = vec![vec![0.1, 0.2], vec![0.6, 0.9], vec![0.8, 0.1]];
        let ys = vec![0.4, 0.9, 0.55];
        let gp = GpModel::fit(xs.clone(), ys.clone(), hyp).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((gp.predict(x).0 - y).abs() < 1e-8);
        }
    }

    #[test]
    fn uncertainty_grows_between_points() {
        let gp = GpModel::fit(
            vec![vec![0.0], vec![1.0]],
            vec![0.6, 0.7],
            GpHyper::default(),
        )
        .unwrap();
        let (_, s0) = gp.predict(&[0.0]);
        let (_, s1) = gp.predict(&[1.0]);
        let (_, mid) = gp.predict(&[0.5]);
        assert!(mid > s0 && mid > s1);
        assert!(s0 * s0 <= 0.07f64.powi(2) + 1e-12);
    }

    #[test]
    fn duplicate_inputs_need_jitter() {
        let hyp = GpHyper {
            noise_std: 0.0,
            ..GpHyper::default()
        };
        let gp = GpModel::fit(vec![vec![0.5]; 3], vec![0.5, 0.6, 0.7], hyp).unwrap();
        assert!(gp.jitter() > 0.0);
    }
}
