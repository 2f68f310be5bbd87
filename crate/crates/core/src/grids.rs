//! Spatial (z) and spectral (k) grids.
//!
//! Both grids are square, equispaced and half-open: coordinate `i` maps to
//! `-half_width + i * h` for `i = 0..n`, so the right/top edge is excluded.
//! Fields are stored row-major with `y` as the outer index:
//! `index = iy * n + ix`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square `2^ell x 2^ell` grid on `[-s, s)^2` with the closed unit disc marked.
#[derive(Debug, Clone)]
pub struct ZGrid {
    ell: u32,
    s: f64,
    n: usize,
    h: f64,
    disc_mask: Vec<bool>,
    disc_points: Vec<usize>,
    disc_lookup: Vec<Option<usize>>,
}

/// JSON header describing a z-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGridHeader {
    pub ell: u32,
    pub s: f64,
}

impl ZGrid {
    pub fn new(ell: u32, s: f64) -> Result<Self> {
        if ell < 4 || ell > 12 {
            return Err(Error::InvalidParameter(format!(
                "z-grid exponent must be in 4..=12, got {ell}"
            )));
        }
        if !(s > 1.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "z-grid half width must exceed 1 to contain the unit disc, got {s}"
            )));
        }
        let n = 1usize << ell;
        let h = 2.0 * s / n as f64;
        let mut disc_mask = vec![false; n * n];
        let mut disc_points = Vec::new();
        let mut disc_lookup = vec![None; n * n];
        for iy in 0..n {
            let y = -s + iy as f64 * h;
            for ix in 0..n {
                let x = -s + ix as f64 * h;
                let idx = iy * n + ix;
                if x * x + y * y <= 1.0 {
                    disc_mask[idx] = true;
                    disc_lookup[idx] = Some(disc_points.len());
                    disc_points.push(idx);
                }
            }
        }
        Ok(Self {
            ell,
            s,
            n,
            h,
            disc_mask,
            disc_points,
            disc_lookup,
        })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn half_width(&self) -> f64 {
        self.s
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.s + i as f64 * self.h
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        Complex64::new(self.coord(idx % self.n), self.coord(idx / self.n))
    }

    pub fn disc_mask(&self) -> &[bool] {
        &self.disc_mask
    }

    /// Full-grid indices of the points with `|z| <= 1`, in storage order.
    pub fn disc_points(&self) -> &[usize] {
        &self.disc_points
    }

    /// Compact disc index of a full-grid index, if the point lies in the disc.
    pub fn disc_index(&self, idx: usize) -> Option<usize> {
        self.disc_lookup[idx]
    }

    /// Index of the grid point nearest to `(x, y)`, clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let to_i = |c: f64| {
            let i = ((c + self.s) / self.h).round();
            i.clamp(0.0, (self.n - 1) as f64) as usize
        };
        to_i(y) * self.n + to_i(x)
    }

    pub fn header(&self) -> ZGridHeader {
        ZGridHeader {
            ell: self.ell,
            s: self.s,
        }
    }

    pub fn same_as(&self, other: &ZGrid) -> bool {
        self.ell == other.ell && self.s == other.s
    }
}

/// Square `2^m x 2^m` grid on `[-R~, R~)^2` carrying scattering data.
#[derive(Debug, Clone)]
pub struct KGrid {
    m: u32,
    radius: f64,
    radius_max: f64,
    n: usize,
    h: f64,
    mask_r: Vec<bool>,
    mask_rtilde: Vec<bool>,
    mask_annulus: Vec<bool>,
    zero_index: usize,
}

/// JSON header describing a k-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGridHeader {
    pub m: u32,
    pub r: f64,
    pub r_tilde: f64,
}

impl KGrid {
    /// Builds the grid for truncation radius `radius` (R) and extended radius `radius_max` (R~).
    pub fn new(m: u32, radius: f64, radius_max: f64) -> Result<Self> {
        if m < 2 || m > 11 {
            return Err(Error::InvalidParameter(format!(
                "k-grid exponent must be in 2..=11, got {m}"
            )));
        }
        if !(radius > 1.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation radius R must exceed 1, got {radius}"
            )));
        }
        if !(radius_max > radius) || !radius_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "extended radius must exceed R = {radius}, got {radius_max}"
            )));
        }
        let n = 1usize << m;
        let h = 2.0 * radius_max / n as f64;
        let inner = radius - 1.0;
        let mut mask_r = vec![false; n * n];
        let mut mask_rtilde = vec![false; n * n];
        let mut mask_annulus = vec![false; n * n];
        for iy in 0..n {
            let y = -radius_max + iy as f64 * h;
            for ix in 0..n {
                let x = -radius_max + ix as f64 * h;
                let r = x.hypot(y);
                let idx = iy * n + ix;
                mask_r[idx] = r < radius;
                mask_rtilde[idx] = r < radius_max;
                mask_annulus[idx] = mask_rtilde[idx] && r >= inner;
            }
        }
        // n is even, so k = 0 sits exactly at (n/2, n/2).
        let zero_index = (n / 2) * n + n / 2;
        Ok(Self {
            m,
            radius,
            radius_max,
            n,
            h,
            mask_r,
            mask_rtilde,
            mask_annulus,
            zero_index,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn radius_max(&self) -> f64 {
        self.radius_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.radius_max + i as f64 * self.h
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        Complex64::new(self.coord(idx % self.n), self.coord(idx / self.n))
    }

    /// `|k| < R`.
    pub fn mask_r(&self) -> &[bool] {
        &self.mask_r
    }

    /// `|k| < R~`.
    pub fn mask_rtilde(&self) -> &[bool] {
        &self.mask_rtilde
    }

    /// `R - 1 <= |k| < R~`.
    pub fn mask_annulus(&self) -> &[bool] {
        &self.mask_annulus
    }

    /// Points with `|k| < radius`.
    pub fn disc_mask(&self, radius: f64) -> Vec<bool> {
        (0..self.len()).map(|i| self.point(i).norm() < radius).collect()
    }

    /// Points with `inner <= |k| < outer`.
    pub fn annulus_mask(&self, inner: f64, outer: f64) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                let r = self.point(i).norm();
                r >= inner && r < outer
            })
            .collect()
    }

    /// Storage index of `k = 0`; scattering data is pinned to zero there.
    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn is_zero(&self, idx: usize) -> bool {
        idx == self.zero_index
    }

    pub fn header(&self) -> KGridHeader {
        KGridHeader {
            m: self.m,
            r: self.radius,
            r_tilde: self.radius_max,
        }
    }

    pub fn same_as(&self, other: &KGrid) -> bool {
        self.m == other.m && self.radius == other.radius && self.radius_max == other.radius_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn production_zgrid_counts() {
        let g = ZGrid::new(8, 2.3).unwrap();
        assert_eq!(g.len(), 65536);
        assert_eq!(g.disc_points().len(), 9729);
    }

    #[test]
    fn zgrid_disc_count_matches_enumeration() {
        let g = ZGrid::new(5, 1.5).unwrap();
        let n = 32;
        let h = 3.0 / n as f64;
        let mut count = 0;
        for iy in 0..n {
            for ix in 0..n {
                let x = -1.5 + ix as f64 * h;
                let y = -1.5 + iy as f64 * h;
                if x * x + y * y <= 1.0 {
                    count += 1;
                }
            }
        }
        assert_eq!(g.disc_points().len(), count);
    }

    #[test]
    fn half_open_grid_is_symmetric_after_shift() {
        // On [-s, s) with an even point count, z -> -z maps index i to n - i,
        // so the symmetry holds for every point except the first row/column.
        let g = ZGrid::new(4, 2.0).unwrap();
        assert_eq!(g.len(), 256);
        let n = g.n();
        for iy in 1..n {
            for ix in 1..n {
                let a = g.disc_mask()[iy * n + ix];
                let b = g.disc_mask()[(n - iy) * n + (n - ix)];
                assert_eq!(a, b);
            }
        }
        assert!((g.coord(0) + 2.0).abs() < 1e-15);
        assert!((g.coord(n - 1) - (2.0 - g.h())).abs() < 1e-15);
    }

    #[test]
    fn disc_index_round_trip() {
        let g = ZGrid::new(6, 2.3).unwrap();
        for (c, &idx) in g.disc_points().iter().enumerate() {
            assert_eq!(g.disc_index(idx), Some(c));
        }
    }

    #[test]
    fn zgrid_rejects_bad_parameters() {
        assert!(ZGrid::new(3, 2.0).is_err());
        assert!(ZGrid::new(6, 1.0).is_err());
        assert!(ZGrid::new(6, 0.5).is_err());
    }

    #[test]
    fn kgrid_masks() {
        let g = KGrid::new(7, 5.0, 10.0).unwrap();
        for i in 0..g.len() {
            if g.mask_r()[i] {
                assert!(g.mask_rtilde()[i]);
            }
        }
        assert!(g.mask_r().iter().filter(|&&b| b).count() < g.mask_rtilde().iter().filter(|&&b| b).count());
        assert_eq!(g.point(g.zero_index()), Complex64::new(0.0, 0.0));
        assert!(KGrid::new(7, 4.0, 6.6).is_ok());
    }

    #[test]
    fn kgrid_annulus_partition() {
        let g = KGrid::new(3, 2.0, 3.0).unwrap();
        for i in 0..g.len() {
            let inner = g.point(i).norm() < 1.0;
            assert_eq!(g.mask_annulus()[i], g.mask_rtilde()[i] && !inner);
            // disjoint union
            assert_eq!(g.mask_rtilde()[i], g.mask_annulus()[i] || inner);
            assert!(!(g.mask_annulus()[i] && inner));
        }
    }

    #[test]
    fn kgrid_rejects_bad_radii() {
        assert!(KGrid::new(6, 1.0, 3.0).is_err());
        assert!(KGrid::new(6, 3.0, 3.0).is_err());
        assert!(KGrid::new(6, 3.0, 2.0).is_err());
    }

    #[test]
    fn disc_fraction_stable_under_refinement() {
        let mut prev: Option<f64> = None;
        for ell in 4..9 {
            let g = ZGrid::new(ell, 2.3).unwrap();
            let frac = g.disc_points().len() as f64 / g.len() as f64;
            if let Some(p) = prev {
                assert!(frac >= p - 2.0 * g.h());
            }
            prev = Some(frac);
        }
    }
}
