//! D-bar integral equation in the spectral variable and `sigma = m(z, 0)^2`.
//!
//! For each `z` the equation
//!
//! ```text
//! m(k) = 1 + (1/pi) int_{|kappa| < R} a(kappa) conj(m(kappa)) / (k - kappa) dkappa,
//! a(kappa) = t(kappa) e(-z, kappa) / (4 pi conj(kappa)) = -i tau(kappa) e(-z, kappa)
//! ```
//!
//! is discretized on the k-grid points inside the cutoff disc. The kernel
//! `1/(pi k)` is point-sampled (zero at the origin) and applied as a linear,
//! non-aliased convolution through an FFT at least twice the width of the
//! cutoff window.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{kernel_spectrum, Fft2};
use crate::grids::{KGrid, ZGrid};
use crate::linalg::{gmres, to_complex, to_real, GmresConfig};
use crate::phantoms::ConductivityImage;
use crate::scattering::ScatteringField;

/// D-bar solver for one scattering field and cutoff radius.
#[derive(Debug, Clone)]
pub struct DbarSolver {
    kgrid: Arc<KGrid>,
    /// k-grid indices of the unknowns.
    support: Vec<usize>,
    /// positions of the unknowns inside the FFT buffer
    slots: Vec<usize>,
    zero_slot: usize,
    tau: Vec<Complex64>,
    points: Vec<Complex64>,
    fft: Fft2,
    kernel: Vec<Complex64>,
    cfg: GmresConfig,
}

/// Output of [`reconstruct_sigma`].
#[derive(Debug, Clone)]
pub struct DbarReconstruction {
    pub sigma: ConductivityImage,
    /// `||Im m(z,0)^2|| / ||Re m(z,0)^2||` over the disc.
    pub imag_residual: f64,
    /// Disc points where `Re m(z, 0) <= 0`.
    pub nonpositive: usize,
}

impl DbarSolver {
    pub fn new(field: &ScatteringField, cutoff: f64) -> Result<Self> {
        Self::with_config(
            field,
            cutoff,
            GmresConfig {
                tol: 1e-8,
                max_iter: 300,
                restart: 50,
            },
        )
    }

    pub fn with_config(field: &ScatteringField, cutoff: f64, cfg: GmresConfig) -> Result<Self> {
        let kgrid = field.grid().clone();
        if !(cutoff > 0.0) || cutoff > kgrid.radius_max() + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "D-bar cutoff {cutoff} outside (0, {}]",
                kgrid.radius_max()
            )));
        }
        let n = kgrid.n();
        let h = kgrid.h();
        let inside = |i: usize| kgrid.point(i).norm() < cutoff;
        let (mut lo, mut hi) = (n, 0usize);
        for i in 0..kgrid.len() {
            if inside(i) {
                for c in [i % n, i / n] {
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
        }
        let width = hi + 1 - lo;
        let size = (2 * width).next_power_of_two();
        let mut support = Vec::new();
        let mut slots = Vec::new();
        for i in 0..kgrid.len() {
            if inside(i) {
                support.push(i);
                slots.push((i / n - lo) * size + (i % n - lo));
            }
        }
        let zero = kgrid.zero_index();
        let zero_slot = slots[support.iter().position(|&i| i == zero).ok_or_else(|| {
            Error::InvalidParameter("cutoff disc does not contain k = 0".into())
        })?];
        let fft = Fft2::new(size);
        let w = h * h / PI;
        let kernel = kernel_spectrum(&fft, h, |x, y| {
            if x == 0.0 && y == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                w / Complex64::new(x, y)
            }
        });
        let tau = support.iter().map(|&i| field.tau()[i]).collect();
        let points = support.iter().map(|&i| kgrid.point(i)).collect();
        Ok(Self {
            kgrid,
            support,
            slots,
            zero_slot,
            tau,
            points,
            fft,
            kernel,
            cfg,
        })
    }

    pub fn kgrid(&self) -> &Arc<KGrid> {
        &self.kgrid
    }

    /// Number of k-points carrying unknowns.
    pub fn unknowns(&self) -> usize {
        self.support.len()
    }

    fn coefficients(&self, z: Complex64) -> Vec<Complex64> {
        self.tau
            .iter()
            .zip(&self.points)
            .map(|(t, k)| Complex64::new(0.0, -1.0) * t * Complex64::from_polar(1.0, -2.0 * (k * z).re))
            .collect()
    }

    fn convolve(&self, a: &[Complex64], m: &[Complex64], buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let size = self.fft.n();
        buf.clear();
        buf.resize(size * size, Complex64::new(0.0, 0.0));
        for ((&slot, ai), mi) in self.slots.iter().zip(a).zip(m) {
            buf[slot] = ai * mi.conj();
        }
        self.fft.forward(buf, scratch);
        buf.iter_mut().zip(&self.kernel).for_each(|(b, k)| *b *= k);
        self.fft.inverse(buf, scratch);
    }

    /// `m(z, k)` at every unknown point.
    pub fn solve_all(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let a = self.coefficients(z);
        let apply = |x: &[f64], y: &mut [f64]| {
            let m = to_complex(x);
            let mut buf = Vec::new();
            let mut scratch = Vec::new();
            self.convolve(&a, &m, &mut buf, &mut scratch);
            for (j, &slot) in self.slots.iter().enumerate() {
                let r = m[j] - buf[slot];
                y[2 * j] = r.re;
                y[2 * j + 1] = r.im;
            }
        };
        let ones = to_real(&vec![Complex64::new(1.0, 0.0); self.support.len()]);
        let out = gmres(apply, &ones, Some(&ones), &self.cfg).map_err(|e| match e {
            Error::NoConvergence(m) => Error::NoConvergence(format!("D-bar solve at z = {z}: {m}")),
            other => other,
        })?;
        Ok(to_complex(&out.x))
    }

    /// `m(z, 0)`.
    pub fn solve_at(&self, z: Complex64) -> Result<Complex64> {
        let m = self.solve_all(z)?;
        let j = self.slots.iter().position(|&s| s == self.zero_slot).unwrap_or(0);
        Ok(m[j])
    }

    /// Residual `||m - 1 - A[conj m]|| / ||1||` of a candidate solution.
    pub fn residual(&self, z: Complex64, m: &[Complex64]) -> f64 {
        let a = self.coefficients(z);
        let mut buf = Vec::new();
        let mut scratch = Vec::new();
        self.convolve(&a, m, &mut buf, &mut scratch);
        let num: f64 = self
            .slots
            .iter()
            .zip(m)
            .map(|(&s, mi)| (mi - 1.0 - buf[s]).norm_sqr())
            .sum();
        (num / self.support.len() as f64).sqrt()
    }
}

/// `m(z, 0)` for a single `z`.
pub fn solve_dbar(field: &ScatteringField, z: Complex64, cutoff: f64) -> Result<Complex64> {
    DbarSolver::new(&field.truncated(cutoff), cutoff)?.solve_at(z)
}

/// `sigma_R(z) = Re m(z, 0)^2` on the disc points of `zgrid`; exterior points are 1.
pub fn reconstruct_sigma(field: &ScatteringField, zgrid: Arc<ZGrid>, cutoff: f64) -> Result<DbarReconstruction> {
    let solver = DbarSolver::new(&field.truncated(cutoff), cutoff)?;
    let disc = zgrid.disc_points().to_vec();
    let values: Vec<Complex64> = disc
        .par_iter()
        .map(|&i| solver.solve_at(zgrid.point(i)))
        .collect::<Result<_>>()?;
    let mut re = Vec::with_capacity(values.len());
    let (mut num, mut den) = (0.0, 0.0);
    let mut nonpositive = 0;
    for m in &values {
        if !(m.re > 0.0) {
            nonpositive += 1;
        }
        let s = m * m;
        num += s.im * s.im;
        den += s.re * s.re;
        re.push(s.re);
    }
    if nonpositive > 0 {
        log::warn!("D-bar: Re m(z,0) <= 0 at {nonpositive} disc points");
    }
    let sigma = ConductivityImage::from_disc_values(zgrid, &re, 1.0)?;
    sigma.check_finite()?;
    Ok(DbarReconstruction {
        sigma,
        imag_residual: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        nonpositive,
    })
}
