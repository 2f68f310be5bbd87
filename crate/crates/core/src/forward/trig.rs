//! Orthonormal trigonometric basis on the unit circle.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// The `2N` functions `cos(j theta)/sqrt(pi)`, `sin(j theta)/sqrt(pi)` for
/// `j = 1..=N`, interleaved cos/sin. Index `i` (0-based) is basis function
/// `phi_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrigBasis {
    order: usize,
}

impl TrigBasis {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("trigonometric order must be positive".into()));
        }
        Ok(Self { order })
    }

    /// `N`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of basis functions, `2N`.
    pub fn len(&self) -> usize {
        2 * self.order
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency of basis function `i`.
    pub fn omega(&self, i: usize) -> usize {
        i / 2 + 1
    }

    /// True for the cosine members.
    pub fn is_cos(&self, i: usize) -> bool {
        i % 2 == 0
    }

    pub fn eval(&self, i: usize, theta: f64) -> f64 {
        let w = self.omega(i) as f64;
        let s = 1.0 / PI.sqrt();
        if self.is_cos(i) {
            s * (w * theta).cos()
        } else {
            s * (w * theta).sin()
        }
    }

    /// The `2N + 1` equispaced nodes `theta_m = (m - 1 - N) 2 pi / (2N + 1)`.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.order as f64;
        let count = 2 * self.order + 1;
        (1..=count)
            .map(|m| (m as f64 - 1.0 - n) * 2.0 * PI / count as f64)
            .collect()
    }

    /// `values[j][i] = phi_i(theta_j)` at the given angles.
    pub fn sample(&self, thetas: &[f64]) -> Vec<Vec<f64>> {
        thetas
            .iter()
            .map(|&t| (0..self.len()).map(|i| self.eval(i, t)).collect())
            .collect()
    }
}
