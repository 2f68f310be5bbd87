//! Plane Beltrami CGO solutions and the scattering transform by area integral.
//!
//! Writing `M = exp(-ikz) f` and `v = dbar M`, the equation
//! `dbar f = +-mu conj(d f)` becomes the integral equation
//!
//! ```text
//! v -+ mu e_{-k} conj(i k C v + S v) = -+ i conj(k) mu e_{-k}
//! ```
//!
//! on the support of `mu`, where `C` is the Cauchy transform (kernel
//! `1/(pi z)`), `S` the Beurling transform (kernel `-1/(pi z^2)`) and
//! `e_{-k}(z) = exp(-2i Re(kz))`. `M = 1 + C v`, and
//! `conj(tau) = (1 / 2pi) int (v_+ - v_-)`.
//!
//! Both kernels are point-sampled (zero at the origin, which is the
//! principal value over a square cell) and truncated at `|z| < s`, then
//! applied as periodic convolutions on the z-grid. With `mu` supported in the
//! unit disc and `s > 2` this is alias-free on the disc.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{kernel_spectrum, Fft2};
use crate::grids::{KGrid, ZGrid};
use crate::linalg::{gmres, to_complex, to_real, GmresConfig};
use crate::scattering::{ScatteringField, Sign};

/// Solver for one Beltrami coefficient on one z-grid.
#[derive(Debug, Clone)]
pub struct BeltramiSolver {
    grid: Arc<ZGrid>,
    support: Vec<usize>,
    mu: Vec<f64>,
    fft: Fft2,
    cauchy: Vec<Complex64>,
    beurling: Vec<Complex64>,
    cfg: GmresConfig,
}

/// `M_{+mu}` and `M_{-mu}` on the full z-grid for one `k`.
#[derive(Debug, Clone)]
pub struct PlaneCgoSolution {
    pub k: Complex64,
    pub m_plus: Vec<Complex64>,
    pub m_minus: Vec<Complex64>,
}

/// `dbar M` on the support of `mu`.
#[derive(Debug, Clone)]
pub struct DbarDensity {
    pub k: Complex64,
    pub sign: Sign,
    pub v: Vec<Complex64>,
    pub iterations: usize,
}

impl BeltramiSolver {
    pub fn new(grid: Arc<ZGrid>, mu: &[f64]) -> Result<Self> {
        Self::with_config(
            grid,
            mu,
            GmresConfig {
                tol: 1e-8,
                max_iter: 500,
                restart: 80,
            },
        )
    }

    pub fn with_config(grid: Arc<ZGrid>, mu: &[f64], cfg: GmresConfig) -> Result<Self> {
        if mu.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "mu has {} values, grid has {}",
                mu.len(),
                grid.len()
            )));
        }
        let s = grid.half_width();
        if s <= 2.0 {
            return Err(Error::InvalidParameter(format!(
                "Beltrami solver needs a z-grid half width above 2, got {s}"
            )));
        }
        let mut support = Vec::new();
        let mut vals = Vec::new();
        for (i, &m) in mu.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("mu at index {i}")));
            }
            if m.abs() >= 1.0 {
                return Err(Error::InvalidParameter(format!("|mu| must stay below 1, got {m}")));
            }
            if m != 0.0 {
                if !grid.disc_mask()[i] {
                    return Err(Error::InvalidParameter(
                        "mu must vanish outside the closed unit disc".into(),
                    ));
                }
                support.push(i);
                vals.push(m);
            }
        }
        let n = grid.n();
        let h = grid.h();
        let fft = Fft2::new(n);
        let w = h * h / PI;
        let cauchy = kernel_spectrum(&fft, h, |x, y| {
            let r2 = x * x + y * y;
            if r2 == 0.0 || r2 >= s * s {
                Complex64::new(0.0, 0.0)
            } else {
                w / Complex64::new(x, y)
            }
        });
        let beurling = kernel_spectrum(&fft, h, |x, y| {
            let r2 = x * x + y * y;
            if r2 == 0.0 || r2 >= s * s {
                Complex64::new(0.0, 0.0)
            } else {
                let z = Complex64::new(x, y);
                -w / (z * z)
            }
        });
        Ok(Self {
            grid,
            support,
            mu: vals,
            fft,
            cauchy,
            beurling,
            cfg,
        })
    }

    pub fn grid(&self) -> &Arc<ZGrid> {
        &self.grid
    }

    /// Full-grid indices where `mu != 0`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    fn e_minus_k(&self, k: Complex64) -> Vec<Complex64> {
        self.support
            .iter()
            .map(|&i| {
                let z = self.grid.point(i);
                Complex64::from_polar(1.0, -2.0 * (k * z).re)
            })
            .collect()
    }

    /// Solves for `v = dbar M_{sign mu}(., k)` on the support of `mu`.
    pub fn solve_density(&self, k: Complex64, sign: Sign) -> Result<DbarDensity> {
        let ns = self.support.len();
        if ns == 0 {
            return Ok(DbarDensity {
                k,
                sign,
                v: Vec::new(),
                iterations: 0,
            });
        }
        let n = self.grid.n();
        let e = self.e_minus_k(k);
        let coef: Vec<Complex64> = self
            .mu
            .iter()
            .zip(&e)
            .map(|(m, e)| sign.factor() * m * e)
            .collect();
        let ik = Complex64::new(0.0, 1.0) * k;
        let combined: Vec<Complex64> = self
            .cauchy
            .iter()
            .zip(&self.beurling)
            .map(|(c, b)| ik * c + b)
            .collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
            let mut scratch = Vec::with_capacity(n * n);
            for (j, &i) in self.support.iter().enumerate() {
                buf[i] = Complex64::new(x[2 * j], x[2 * j + 1]);
            }
            self.fft.forward(&mut buf, &mut scratch);
            buf.iter_mut().zip(&combined).for_each(|(b, c)| *b *= c);
            self.fft.inverse(&mut buf, &mut scratch);
            for (j, &i) in self.support.iter().enumerate() {
                let r = Complex64::new(x[2 * j], x[2 * j + 1]) - coef[j] * buf[i].conj();
                y[2 * j] = r.re;
                y[2 * j + 1] = r.im;
            }
        };
        let rhs: Vec<Complex64> = coef.iter().map(|c| -Complex64::new(0.0, 1.0) * k.conj() * c).collect();
        let out = gmres(apply, &to_real(&rhs), None, &self.cfg).map_err(|e| match e {
            Error::NoConvergence(m) => Error::NoConvergence(format!("Beltrami solve at k = {k}: {m}")),
            other => other,
        })?;
        Ok(DbarDensity {
            k,
            sign,
            v: to_complex(&out.x),
            iterations: out.iterations,
        })
    }

    /// `tau(k)` from the area integral of `v_+ - v_-`.
    pub fn tau(&self, k: Complex64) -> Result<Complex64> {
        if k.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let plus = self.solve_density(k, Sign::Plus)?;
        let minus = self.solve_density(k, Sign::Minus)?;
        let h2 = self.grid.h() * self.grid.h();
        let integral: Complex64 = plus.v.iter().zip(&minus.v).map(|(a, b)| a - b).sum::<Complex64>() * h2;
        Ok((integral / (2.0 * PI)).conj())
    }

    /// `M = 1 + C v` on the full grid, using a zero-padded linear convolution.
    pub fn interior_field(&self, density: &DbarDensity) -> Vec<Complex64> {
        let n = self.grid.n();
        let big = 2 * n;
        let h = self.grid.h();
        let fft = Fft2::new(big);
        let w = h * h / PI;
        let kernel = kernel_spectrum(&fft, h, |x, y| {
            if x == 0.0 && y == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                w / Complex64::new(x, y)
            }
        });
        let mut buf = vec![Complex64::new(0.0, 0.0); big * big];
        for (j, &i) in self.support.iter().enumerate() {
            buf[(i / n) * big + i % n] = density.v[j];
        }
        let mut scratch = Vec::new();
        fft.forward(&mut buf, &mut scratch);
        buf.iter_mut().zip(&kernel).for_each(|(b, c)| *b *= c);
        fft.inverse(&mut buf, &mut scratch);
        (0..n * n)
            .map(|i| 1.0 + buf[(i / n) * big + i % n])
            .collect()
    }

    /// `M = 1 + C v` at arbitrary points by direct summation.
    pub fn field_at(&self, density: &DbarDensity, points: &[Complex64]) -> Vec<Complex64> {
        let w = self.grid.h() * self.grid.h() / PI;
        points
            .iter()
            .map(|&z| {
                let mut acc = Complex64::new(1.0, 0.0);
                for (j, &i) in self.support.iter().enumerate() {
                    let d = z - self.grid.point(i);
                    if d.norm_sqr() > 0.0 {
                        acc += w * density.v[j] / d;
                    }
                }
                acc
            })
            .collect()
    }

    /// Both CGO solutions on the full grid.
    pub fn solve(&self, k: Complex64) -> Result<PlaneCgoSolution> {
        let plus = self.solve_density(k, Sign::Plus)?;
        let minus = self.solve_density(k, Sign::Minus)?;
        Ok(PlaneCgoSolution {
            k,
            m_plus: self.interior_field(&plus),
            m_minus: self.interior_field(&minus),
        })
    }
}

/// Solves the Beltrami equation for `mu` and both signs at `k`.
pub fn solve_beltrami(grid: Arc<ZGrid>, mu: &[f64], k: Complex64) -> Result<PlaneCgoSolution> {
    BeltramiSolver::new(grid, mu)?.solve(k)
}

/// `tau(k)` at every k-grid point selected by `mask`; points outside the mask stay zero.
pub fn scattering_from_mu(grid: Arc<ZGrid>, mu: &[f64], kgrid: Arc<KGrid>, mask: &[bool]) -> Result<ScatteringField> {
    if mask.len() != kgrid.len() {
        return Err(Error::ShapeMismatch("k mask does not match the k-grid".into()));
    }
    let solver = BeltramiSolver::new(grid, mu)?;
    scattering_with_solver(&solver, kgrid, mask)
}

/// Like [`scattering_from_mu`] with a prepared solver.
pub fn scattering_with_solver(solver: &BeltramiSolver, kgrid: Arc<KGrid>, mask: &[bool]) -> Result<ScatteringField> {
    let points: Vec<usize> = (0..kgrid.len()).filter(|&i| mask[i]).collect();
    let values: Vec<Complex64> = points
        .par_iter()
        .map(|&i| solver.tau(kgrid.point(i)))
        .collect::<Result<_>>()?;
    let mut field = ScatteringField::zeros(kgrid);
    for (&i, v) in points.iter().zip(values) {
        field.set(i, v);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, Lu};

    fn radial_mu(grid: &ZGrid, r0: f64, value: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|i| if grid.point(i).norm() < r0 { value } else { 0.0 })
            .collect()
    }

    #[test]
    fn zero_mu_gives_unit_solution() {
        let g = Arc::new(ZGrid::new(5, 2.3).unwrap());
        let mu = vec![0.0; g.len()];
        let sol = solve_beltrami(g.clone(), &mu, Complex64::new(1.0, 2.0)).unwrap();
        assert!(sol.m_plus.iter().all(|m| (m - 1.0).norm() < 1e-14));
        let solver = BeltramiSolver::new(g, &mu).unwrap();
        assert_eq!(solver.tau(Complex64::new(3.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_small_box_and_large_mu() {
        let g = Arc::new(ZGrid::new(5, 1.8).unwrap());
        assert!(BeltramiSolver::new(g, &vec![0.0; 1024]).is_err());
        let g = Arc::new(ZGrid::new(5, 2.3).unwrap());
        let mut mu = vec![0.0; g.len()];
        mu[g.disc_points()[10]] = 1.0;
        assert!(BeltramiSolver::new(g, &mu).is_err());
    }

    #[test]
    fn sign_flip_swaps_solutions() {
        let g = Arc::new(ZGrid::new(5, 2.3).unwrap());
        let mu = radial_mu(&g, 0.5, 0.2);
        let neg: Vec<f64> = mu.iter().map(|m| -m).collect();
        let a = BeltramiSolver::new(g.clone(), &mu).unwrap();
        let b = BeltramiSolver::new(g, &neg).unwrap();
        let k = Complex64::new(1.0, -0.5);
        let pa = a.solve_density(k, Sign::Plus).unwrap();
        let mb = b.solve_density(k, Sign::Minus).unwrap();
        for (x, y) in pa.v.iter().zip(&mb.v) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_dense_quadrature() {
        // Same discretization assembled as a dense real system and solved by LU.
        let g = Arc::new(ZGrid::new(6, 2.3).unwrap());
        let mu = radial_mu(&g, 0.45, 0.1);
        let solver = BeltramiSolver::new(g.clone(), &mu).unwrap();
        let k = Complex64::new(1.0, 0.0);
        let fast = solver.solve_density(k, Sign::Plus).unwrap();
        let sup = solver.support().to_vec();
        let ns = sup.len();
        let w = g.h() * g.h() / PI;
        let ik = Complex64::new(0.0, 1.0) * k;
        let mut a = DenseMatrix::zeros(2 * ns);
        let mut rhs = vec![0.0; 2 * ns];
        for (p, &ip) in sup.iter().enumerate() {
            let zp = g.point(ip);
            let c = mu[ip] * Complex64::from_polar(1.0, -2.0 * (k * zp).re);
            let r = -Complex64::new(0.0, 1.0) * k.conj() * c;
            rhs[2 * p] = r.re;
            rhs[2 * p + 1] = r.im;
            a[(2 * p, 2 * p)] += 1.0;
            a[(2 * p + 1, 2 * p + 1)] += 1.0;
            for (q, &iq) in sup.iter().enumerate() {
                let d = zp - g.point(iq);
                if d.norm_sqr() == 0.0 {
                    continue;
                }
                let kern = ik * w / d - w / (d * d);
                // -c * conj(kern * v): derivative wrt Re v and Im v
                let dre = -c * kern.conj();
                let dim = -c * (kern * Complex64::new(0.0, 1.0)).conj();
                a[(2 * p, 2 * q)] += dre.re;
                a[(2 * p + 1, 2 * q)] += dre.im;
                a[(2 * p, 2 * q + 1)] += dim.re;
                a[(2 * p + 1, 2 * q + 1)] += dim.im;
            }
        }
        let x = Lu::factor(&a).unwrap().solve(&rhs);
        let dense = to_complex(&x);
        let num: f64 = dense.iter().zip(&fast.v).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = dense.iter().map(|a| a.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());
    }

    #[test]
    fn solution_tends_to_one_far_away() {
        let g = Arc::new(ZGrid::new(6, 2.3).unwrap());
        let mu = radial_mu(&g, 0.6, -0.3);
        let sol = solve_beltrami(g.clone(), &mu, Complex64::new(2.0, 1.0)).unwrap();
        let near = g.nearest(1.1, 0.0);
        let far = g.nearest(2.2, 0.0);
        let dn = (sol.m_plus[near] - 1.0).norm();
        let df = (sol.m_plus[far] - 1.0).norm();
        assert!(df < dn, "{df} vs {dn}");
    }
}
