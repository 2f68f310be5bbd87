//! Scattering transform fields on the k-grid.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::KGrid;

/// Which of the two Beltrami CGO solutions, `f_{+mu}` or `f_{-mu}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Storage convention of a dumped scattering field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Beltrami scattering transform `tau(k)`.
    Tau,
    /// Schrodinger scattering transform `t(k) = -4 pi i conj(k) tau(k)`.
    T,
}

/// `t(k) = -4 pi i conj(k) tau(k)`.
pub fn t_from_tau(k: Complex64, tau: Complex64) -> Complex64 {
    Complex64::new(0.0, -4.0 * std::f64::consts::PI) * k.conj() * tau
}

/// `tau(k)` stored on a k-grid; `valid` marks the points where it was computed.
#[derive(Debug, Clone)]
pub struct ScatteringField {
    grid: Arc<KGrid>,
    tau: Vec<Complex64>,
    valid: Vec<bool>,
}

impl ScatteringField {
    pub fn zeros(grid: Arc<KGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            tau: vec![Complex64::new(0.0, 0.0); n],
            valid: vec![false; n],
        }
    }

    pub fn new(grid: Arc<KGrid>, tau: Vec<Complex64>, valid: Vec<bool>) -> Result<Self> {
        if tau.len() != grid.len() || valid.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "scattering field of {} values on a grid of {}",
                tau.len(),
                grid.len()
            )));
        }
        if tau.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::NonFinite("scattering data".into()));
        }
        let mut f = Self { grid, tau, valid };
        let z = f.grid.zero_index();
        f.tau[z] = Complex64::new(0.0, 0.0);
        Ok(f)
    }

    pub fn grid(&self) -> &Arc<KGrid> {
        &self.grid
    }

    pub fn tau(&self) -> &[Complex64] {
        &self.tau
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn set(&mut self, idx: usize, value: Complex64) {
        if !self.grid.is_zero(idx) {
            self.tau[idx] = value;
        }
        self.valid[idx] = true;
    }

    /// `t(k)` at every grid point; exactly zero at `k = 0`.
    pub fn t_values(&self) -> Vec<Complex64> {
        self.tau
            .iter()
            .enumerate()
            .map(|(i, &tau)| {
                if self.grid.is_zero(i) {
                    Complex64::new(0.0, 0.0)
                } else {
                    t_from_tau(self.grid.point(i), tau)
                }
            })
            .collect()
    }

    /// Copy with every value at `|k| >= radius` set to zero.
    pub fn truncated(&self, radius: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.tau.len() {
            if self.grid.point(i).norm() >= radius {
                out.tau[i] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Largest `|t(k)|` over `|k| < radius`.
    pub fn max_abs_t(&self, radius: f64) -> f64 {
        self.t_values()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.point(*i).norm() < radius)
            .map(|(_, t)| t.norm())
            .fold(0.0, f64::max)
    }

    /// Relative L2 distance `||self - other|| / ||other||` over points with `|k| <= radius`.
    pub fn relative_distance(&self, other: &ScatteringField, radius: f64) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::ShapeMismatch("scattering fields on different k-grids".into()));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.tau.len() {
            if self.grid.point(i).norm() <= radius {
                num += (self.tau[i] - other.tau[i]).norm_sqr();
                den += other.tau[i].norm_sqr();
            }
        }
        if den == 0.0 {
            return Err(Error::Degenerate("reference scattering field is zero".into()));
        }
        Ok((num / den).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_vanishes_at_origin() {
        let g = Arc::new(KGrid::new(4, 2.0, 3.0).unwrap());
        let tau = vec![Complex64::new(1.0, 1.0); g.len()];
        let f = ScatteringField::new(g.clone(), tau, vec![true; g.len()]).unwrap();
        assert_eq!(f.t_values()[g.zero_index()], Complex64::new(0.0, 0.0));
        assert_eq!(f.tau()[g.zero_index()], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn t_convention() {
        let k = Complex64::new(1.0, 2.0);
        let tau = Complex64::new(0.5, -0.25);
        let t = t_from_tau(k, tau);
        let expect = Complex64::new(0.0, -4.0 * std::f64::consts::PI) * Complex64::new(1.0, -2.0) * tau;
        assert!((t - expect).norm() < 1e-14);
    }

    #[test]
    fn truncation() {
        let g = Arc::new(KGrid::new(4, 2.0, 3.0).unwrap());
        let f = ScatteringField::new(g.clone(), vec![Complex64::new(1.0, 0.0); g.len()], vec![true; g.len()]).unwrap();
        let t = f.truncated(1.5);
        for i in 0..g.len() {
            let r = g.point(i).norm();
            if r >= 1.5 || g.is_zero(i) {
                assert_eq!(t.tau()[i], Complex64::new(0.0, 0.0));
            } else {
                assert_eq!(t.tau()[i], Complex64::new(1.0, 0.0));
            }
        }
    }
}
