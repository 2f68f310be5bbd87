//! CGO boundary traces from DN data, the scattering transform on `|k| < R`,
//! and CGO sinograms.
//!
//! For a real boundary function `g` the Hilbert-type operator
//! `H_mu = d_T^{-1} Lambda_sigma` maps `g` to the trace of the conjugate
//! function, so `g + i H_mu g` is the trace of a solution of the Beltrami
//! equation. With `P_mu g = (g + i H_mu g)/2 + avg(g)/2` (extended to complex
//! arguments by `P_mu(a + ib) = P_mu a + i P_{-mu} b`) the trace of
//! `M = exp(-ikz) f` solves
//!
//! ```text
//! M - exp(-ikz) P_{+-mu}(exp(ikz) M) - P_+ M = -1
//! ```
//!
//! where `P_+` keeps the non-negative Fourier modes. `H_{-mu} = -H_mu^{-1}`.
//! Modes above the measured order use the homogeneous operator.
//! Everything is discretized on an oversampled set of equispaced nodes that
//! contains the `2N + 1` measurement nodes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{BoundaryOpMatrix, OpKind};
use crate::grids::KGrid;
use crate::linalg::{gmres, to_complex, to_real, DenseMatrix, GmresConfig};
use crate::scattering::{ScatteringField, Sign};

/// Default oversampling factor of the boundary nodes.
pub const DEFAULT_OVERSAMPLE: usize = 3;

/// Boundary integral solver built from one DN matrix.
#[derive(Debug, Clone)]
pub struct TraceSolver {
    order: usize,
    nodes: Vec<f64>,
    modes: usize,
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    h_plus: DenseMatrix,
    h_minus: DenseMatrix,
    cfg: GmresConfig,
}

/// CGO traces at the `2N + 1` measurement nodes for one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgoBoundaryTraces {
    pub k: Complex64,
    pub theta: Vec<f64>,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl TraceSolver {
    pub fn new(dn: &BoundaryOpMatrix) -> Result<Self> {
        Self::with_config(
            dn,
            DEFAULT_OVERSAMPLE,
            GmresConfig {
                tol: 1e-8,
                max_iter: 500,
                restart: 100,
            },
        )
    }

    pub fn with_config(dn: &BoundaryOpMatrix, oversample: usize, cfg: GmresConfig) -> Result<Self> {
        if dn.kind != OpKind::Dn {
            return Err(Error::InvalidParameter("trace solver needs a DN matrix".into()));
        }
        if oversample == 0 {
            return Err(Error::InvalidParameter("oversampling factor must be positive".into()));
        }
        let order = dn.order;
        let coarse = 2 * order + 1;
        let count = coarse * oversample;
        let half = (count - 1) / 2;
        let nodes: Vec<f64> = (0..count)
            .map(|l| (l as f64 - half as f64) * 2.0 * PI / count as f64)
            .collect();
        let modes = half;
        let mut cos_tab = vec![0.0; modes * count];
        let mut sin_tab = vec![0.0; modes * count];
        for j in 0..modes {
            for (l, &t) in nodes.iter().enumerate() {
                let a = (j + 1) as f64 * t;
                cos_tab[j * count + l] = a.cos();
                sin_tab[j * count + l] = a.sin();
            }
        }
        // H = d_T^{-1} Lambda in (cos_j, sin_j) coefficient pairs
        let lambda = dn.block();
        let n = 2 * order;
        let mut h_plus = DenseMatrix::zeros(n);
        for j in 0..order {
            let w = (j + 1) as f64;
            for c in 0..n {
                h_plus[(2 * j, c)] = -lambda[(2 * j + 1, c)] / w;
                h_plus[(2 * j + 1, c)] = lambda[(2 * j, c)] / w;
            }
        }
        let h_minus = h_plus.inverse().map_err(|e| match e {
            Error::Singular(m) => Error::Singular(format!("DN block is not invertible: {m}")),
            other => other,
        })?;
        let h_minus = h_minus.scale(-1.0);
        Ok(Self {
            order,
            nodes,
            modes,
            cos_tab,
            sin_tab,
            h_plus,
            h_minus,
            cfg,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Stride between measurement nodes inside the oversampled node set.
    pub fn stride(&self) -> usize {
        self.nodes.len() / (2 * self.order + 1)
    }

    /// Applies `P_{sign mu}` to a real function sampled at the nodes; returns
    /// the real and imaginary parts of the result.
    fn project_real(&self, g: &[f64], sign: Sign, re: &mut [f64], im: &mut [f64]) {
        let count = self.nodes.len();
        let scale = 2.0 / count as f64;
        let avg = g.iter().sum::<f64>() / count as f64;
        let mut alpha = vec![0.0; self.modes];
        let mut beta = vec![0.0; self.modes];
        for j in 0..self.modes {
            let (c, s) = (&self.cos_tab[j * count..(j + 1) * count], &self.sin_tab[j * count..(j + 1) * count]);
            let mut a = 0.0;
            let mut b = 0.0;
            for l in 0..count {
                a += g[l] * c[l];
                b += g[l] * s[l];
            }
            alpha[j] = a * scale;
            beta[j] = b * scale;
        }
        let h = match sign {
            Sign::Plus => &self.h_plus,
            Sign::Minus => &self.h_minus,
        };
        let n = 2 * self.order;
        let mut low = vec![0.0; n];
        for j in 0..self.order {
            low[2 * j] = alpha[j];
            low[2 * j + 1] = beta[j];
        }
        let hl = h.matvec(&low);
        let mut ha = vec![0.0; self.modes];
        let mut hb = vec![0.0; self.modes];
        for j in 0..self.modes {
            if j < self.order {
                ha[j] = hl[2 * j];
                hb[j] = hl[2 * j + 1];
            } else {
                ha[j] = -beta[j];
                hb[j] = alpha[j];
            }
        }
        for l in 0..count {
            let mut hg = 0.0;
            for j in 0..self.modes {
                hg += ha[j] * self.cos_tab[j * count + l] + hb[j] * self.sin_tab[j * count + l];
            }
            re[l] = 0.5 * (g[l] + avg);
            im[l] = 0.5 * hg;
        }
    }

    /// `P_{sign mu}` on complex node values.
    fn project(&self, m: &[Complex64], sign: Sign) -> Vec<Complex64> {
        let count = m.len();
        let a: Vec<f64> = m.iter().map(|c| c.re).collect();
        let b: Vec<f64> = m.iter().map(|c| c.im).collect();
        let (mut ar, mut ai) = (vec![0.0; count], vec![0.0; count]);
        let (mut br, mut bi) = (vec![0.0; count], vec![0.0; count]);
        self.project_real(&a, sign, &mut ar, &mut ai);
        self.project_real(&b, sign.flip(), &mut br, &mut bi);
        (0..count)
            .map(|l| Complex64::new(ar[l] - bi[l], ai[l] + br[l]))
            .collect()
    }

    /// Keeps the non-negative Fourier modes.
    fn project_analytic(&self, m: &[Complex64]) -> Vec<Complex64> {
        let count = self.nodes.len();
        let mut coef = vec![Complex64::new(0.0, 0.0); self.modes + 1];
        for (n, c) in coef.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..count {
                let e = if n == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(self.cos_tab[(n - 1) * count + l], -self.sin_tab[(n - 1) * count + l])
                };
                acc += m[l] * e;
            }
            *c = acc / count as f64;
        }
        (0..count)
            .map(|l| {
                let mut v = coef[0];
                for n in 1..=self.modes {
                    v += coef[n] * Complex64::new(self.cos_tab[(n - 1) * count + l], self.sin_tab[(n - 1) * count + l]);
                }
                v
            })
            .collect()
    }

    /// Solves for `M_{sign mu}(e^{i theta}, k)` at all oversampled nodes.
    pub fn solve(&self, k: Complex64, sign: Sign) -> Result<Vec<Complex64>> {
        let count = self.nodes.len();
        let ekz: Vec<Complex64> = self
            .nodes
            .iter()
            .map(|&t| (Complex64::new(0.0, 1.0) * k * Complex64::from_polar(1.0, t)).exp())
            .collect();
        if ekz.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
            return Err(Error::NonFinite(format!("exp(ikz) overflows at k = {k}")));
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            let m = to_complex(x);
            let fm: Vec<Complex64> = m.iter().zip(&ekz).map(|(a, e)| a * e).collect();
            let pf = self.project(&fm, sign);
            let pa = self.project_analytic(&m);
            let out: Vec<Complex64> = (0..count).map(|l| m[l] - pf[l] / ekz[l] - pa[l]).collect();
            y.copy_from_slice(&to_real(&out));
        };
        let rhs = to_real(&vec![Complex64::new(-1.0, 0.0); count]);
        let x0 = to_real(&vec![Complex64::new(1.0, 0.0); count]);
        let out = gmres(apply, &rhs, Some(&x0), &self.cfg).map_err(|e| match e {
            Error::NoConvergence(m) => Error::NoConvergence(format!("boundary traces at k = {k}: {m}")),
            other => other,
        })?;
        Ok(to_complex(&out.x))
    }

    /// First negative-order Fourier coefficient, the `1/z` term of `M` outside the disc.
    pub fn a1(&self, m: &[Complex64]) -> Complex64 {
        let count = self.nodes.len() as f64;
        m.iter()
            .zip(&self.nodes)
            .map(|(v, &t)| v * Complex64::from_polar(1.0, t))
            .sum::<Complex64>()
            / count
    }

    /// `tau(k) = (conj a1+ - conj a1-) / 2`.
    pub fn tau(&self, k: Complex64) -> Result<Complex64> {
        if k.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let plus = self.solve(k, Sign::Plus)?;
        let minus = self.solve(k, Sign::Minus)?;
        Ok(0.5 * (self.a1(&plus).conj() - self.a1(&minus).conj()))
    }

    /// Traces of both solutions at the measurement nodes.
    pub fn traces(&self, k: Complex64) -> Result<CgoBoundaryTraces> {
        let stride = self.stride();
        let pick = |v: Vec<Complex64>| v.into_iter().step_by(stride).collect::<Vec<_>>();
        let plus = pick(self.solve(k, Sign::Plus)?);
        let minus = pick(self.solve(k, Sign::Minus)?);
        Ok(CgoBoundaryTraces {
            k,
            theta: self.nodes.iter().copied().step_by(stride).collect(),
            plus,
            minus,
        })
    }
}

/// CGO traces at the measurement nodes for a single `k`.
pub fn solve_boundary_traces(dn: &BoundaryOpMatrix, k: Complex64) -> Result<CgoBoundaryTraces> {
    TraceSolver::new(dn)?.traces(k)
}

/// Scattering transform from DN data on every k-grid point with `|k| < radius`.
///
/// Points are processed in order of increasing `|k|`; if the solver fails at
/// some `|k|`, everything from that modulus outward is left at zero and a
/// warning is logged, so the result is a clean truncation to a smaller disc.
pub fn scattering_from_dn(dn: &BoundaryOpMatrix, grid: Arc<KGrid>, radius: f64) -> Result<ScatteringField> {
    if !(radius > 0.0) || radius > grid.radius_max() {
        return Err(Error::InvalidParameter(format!(
            "scattering radius {radius} outside (0, {}]",
            grid.radius_max()
        )));
    }
    let solver = TraceSolver::new(dn)?;
    let mut points: Vec<usize> = (0..grid.len()).filter(|&i| grid.point(i).norm() < radius).collect();
    points.sort_by(|&a, &b| {
        grid.point(a)
            .norm()
            .partial_cmp(&grid.point(b).norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<Result<Complex64>> = points.par_iter().map(|&i| solver.tau(grid.point(i))).collect();
    let mut field = ScatteringField::zeros(grid.clone());
    let mut limit = f64::INFINITY;
    for (&i, v) in points.iter().zip(&values) {
        if let Err(e) = v {
            let r = grid.point(i).norm();
            if r < limit {
                limit = r;
                log::warn!("boundary traces failed at |k| = {r:.3}; truncating scattering data there ({e})");
            }
        }
    }
    for (&i, v) in points.iter().zip(values) {
        if grid.point(i).norm() >= limit {
            continue;
        }
        field.set(i, v?);
    }
    Ok(field)
}

/// `tau` from precomputed traces; the traces must come from a node set that
/// samples `e^{i theta}` uniformly.
pub fn tau_from_traces(traces: &CgoBoundaryTraces) -> Complex64 {
    let count = traces.theta.len() as f64;
    let a1 = |m: &[Complex64]| {
        m.iter()
            .zip(&traces.theta)
            .map(|(v, &t)| v * Complex64::from_polar(1.0, t))
            .sum::<Complex64>()
            / count
    };
    0.5 * (a1(&traces.plus).conj() - a1(&traces.minus).conj())
}

/// `S[m][l] = M_+(e^{i theta_m}, rho e^{i theta_l}) - 1` on the measurement nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub rho: f64,
    pub size: usize,
    /// Row-major, row index `m` (boundary angle), column index `l` (direction of `k`).
    pub values: Vec<Complex64>,
}

impl Sinogram {
    pub fn get(&self, m: usize, l: usize) -> Complex64 {
        self.values[m * self.size + l]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// CGO sinogram of a DN matrix at radius `rho`.
pub fn build_sinogram(dn: &BoundaryOpMatrix, rho: f64) -> Result<Sinogram> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("sinogram radius must be positive, got {rho}")));
    }
    let solver = TraceSolver::new(dn)?;
    let size = 2 * dn.order + 1;
    let stride = solver.stride();
    let dirs: Vec<f64> = solver.nodes().iter().copied().step_by(stride).collect();
    let columns: Vec<Vec<Complex64>> = dirs
        .par_iter()
        .map(|&phi| {
            let m = solver.solve(Complex64::from_polar(rho, phi), Sign::Plus)?;
            Ok(m.into_iter().step_by(stride).map(|v| v - 1.0).collect())
        })
        .collect::<Result<_>>()?;
    let mut values = vec![Complex64::new(0.0, 0.0); size * size];
    for (l, col) in columns.iter().enumerate() {
        for (m, v) in col.iter().enumerate() {
            values[m * size + l] = *v;
        }
    }
    Ok(Sinogram { rho, size, values })
}

/// Relative L2 distance `||a - b|| / ||b||` with uniform weights on the torus grid.
pub fn sinogram_discrepancy(a: &Sinogram, b: &Sinogram) -> Result<f64> {
    if a.size != b.size || a.rho != b.rho {
        return Err(Error::ShapeMismatch(format!(
            "sinograms {}x{} (rho {}) and {}x{} (rho {})",
            a.size, a.size, a.rho, b.size, b.size, b.rho
        )));
    }
    let den = b.norm();
    if den == 0.0 {
        return Err(Error::Degenerate("reference sinogram is identically zero".into()));
    }
    let num = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}
