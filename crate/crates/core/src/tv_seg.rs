//! Multi-label piecewise-constant segmentation by convex-relaxed
//! Mumford-Shah with (optionally edge-weighted) total variation.
//!
//! For fixed region means `c_k` the relaxed labelling problem
//! `min_{u in S} sum_k int g |grad u_k| + <u, f>` is solved with a
//! primal-dual iteration; labels are then thresholded, the means updated and
//! the process repeated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grids::ZGrid;
use crate::phantoms::ConductivityImage;

/// Segmentation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Number of regions `K`.
    pub regions: usize,
    /// Data weight `lambda`.
    pub lambda: f64,
    /// Edge-weight strength `s`; 0 gives plain TV.
    pub edge_strength: f64,
    /// Gaussian smoothing width in pixels used for the edge weight.
    pub smoothing: f64,
    pub seed: u64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            regions: 4,
            lambda: 0.1,
            edge_strength: 0.0,
            smoothing: 2.0,
            seed: 0,
            max_outer: 20,
            max_inner: 2000,
            inner_tol: 1e-5,
            outer_tol: 1e-4,
        }
    }
}

/// Relaxed labels on the disc pixels plus the region means.
#[derive(Debug, Clone)]
pub struct LabelField {
    pub regions: usize,
    /// `u[k][p]` for disc pixel `p` (in [`ZGrid::disc_points`] order).
    pub u: Vec<Vec<f64>>,
    /// Thresholded label of each disc pixel.
    pub labels: Vec<usize>,
    pub means: Vec<f64>,
    pub lambda: f64,
    /// Edge weight per disc pixel.
    pub weight: Vec<f64>,
}

/// Feasibility and energy bookkeeping of one segmentation run.
#[derive(Debug, Clone, Default)]
pub struct SegmentDiagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: Vec<usize>,
    /// Largest `|sum_k u_k - 1|` or negative entry seen over all inner iterates.
    pub max_simplex_violation: f64,
    /// Largest `|p_k(x)| - g(x)` seen over all inner iterates.
    pub max_dual_violation: f64,
    /// Energy of the thresholded labels after each outer iteration.
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub image: ConductivityImage,
    pub labels: LabelField,
    pub diagnostics: SegmentDiagnostics,
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Radial projection onto the disc of radius `g`.
pub fn project_dual(p: [f64; 2], g: f64) -> [f64; 2] {
    let n = p[0].hypot(p[1]);
    if n <= g {
        p
    } else if n == 0.0 {
        [0.0, 0.0]
    } else {
        let s = g / n;
        [p[0] * s, p[1] * s]
    }
}

/// Neighbour table of the disc pixels: forward neighbours in x and y.
#[derive(Debug, Clone)]
struct Stencil {
    right: Vec<Option<usize>>,
    up: Vec<Option<usize>>,
}

impl Stencil {
    fn new(grid: &ZGrid) -> Self {
        let n = grid.n();
        let disc = grid.disc_points();
        let mut right = Vec::with_capacity(disc.len());
        let mut up = Vec::with_capacity(disc.len());
        for &i in disc {
            let (x, y) = (i % n, i / n);
            right.push(if x + 1 < n { grid.disc_index(i + 1) } else { None });
            up.push(if y + 1 < n { grid.disc_index(i + n) } else { None });
        }
        Self { right, up }
    }

    fn len(&self) -> usize {
        self.right.len()
    }

    /// Forward differences; zero across the mask boundary.
    fn grad(&self, u: &[f64], out: &mut [[f64; 2]]) {
        for p in 0..u.len() {
            let gx = self.right[p].map_or(0.0, |q| u[q] - u[p]);
            let gy = self.up[p].map_or(0.0, |q| u[q] - u[p]);
            out[p] = [gx, gy];
        }
    }

    /// `div = -grad^T`.
    fn div(&self, p: &[[f64; 2]], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..p.len() {
            if let Some(q) = self.right[i] {
                out[i] += p[i][0];
                out[q] -= p[i][0];
            }
            if let Some(q) = self.up[i] {
                out[i] += p[i][1];
                out[q] -= p[i][1];
            }
        }
    }
}

/// K-means++ seeding followed by Lloyd iterations on the disc values.
/// Returns `K` ascending means. With fewer than `K` distinct values the
/// distinct values are returned, padded with midpoints of the widest gaps.
pub fn kmeans_init(image: &ConductivityImage, regions: usize, seed: u64) -> Result<Vec<f64>> {
    if regions < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 regions, got {regions}")));
    }
    image.check_finite()?;
    let data = image.disc_values();
    let mut distinct = data.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate("image is constant on the disc; nothing to segment".into()));
    }
    if distinct.len() <= regions {
        let mut c = distinct;
        while c.len() < regions {
            let (i, _) = c
                .windows(2)
                .enumerate()
                .map(|(i, w)| (i, w[1] - w[0]))
                .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            let mid = 0.5 * (c[i] + c[i + 1]);
            c.insert(i + 1, mid);
        }
        return Ok(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![data[rng.gen_range(0..data.len())]];
    while centers.len() < regions {
        let d2: Vec<f64> = data
            .iter()
            .map(|x| centers.iter().map(|c| (x - c).powi(2)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = data.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            data[pick]
        } else {
            data[rng.gen_range(0..data.len())]
        };
        centers.push(next);
    }
    for _ in 0..200 {
        let mut sums = vec![0.0; regions];
        let mut counts = vec![0usize; regions];
        for x in &data {
            let k = nearest(&centers, *x);
            sums[k] += x;
            counts[k] += 1;
        }
        let mut moved = 0.0f64;
        for k in 0..regions {
            if counts[k] > 0 {
                let c = sums[k] / counts[k] as f64;
                moved = moved.max((c - centers[k]).abs());
                centers[k] = c;
            }
        }
        if moved == 0.0 {
            break;
        }
    }
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    // Lloyd can leave coincident centres when seeding picked duplicates; split them.
    for k in 1..regions {
        if centers[k] <= centers[k - 1] {
            centers[k] = centers[k - 1] + 1e-9 * (1.0 + centers[k - 1].abs());
        }
    }
    Ok(centers)
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, c) in centers.iter().enumerate() {
        if (x - c).abs() < (x - centers[best]).abs() {
            best = k;
        }
    }
    best
}

fn gaussian_smooth(values: &[f64], n: usize, width: f64) -> Vec<f64> {
    if width <= 0.0 {
        return values.to_vec();
    }
    let radius = (3.0 * width).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * width * width)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    let clamp = |i: i64| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            tmp[y * n + x] = taps
                .iter()
                .enumerate()
                .map(|(t, w)| w * values[y * n + clamp(x as i64 + t as i64 - radius)])
                .sum::<f64>()
                / norm;
        }
    }
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            out[y * n + x] = taps
                .iter()
                .enumerate()
                .map(|(t, w)| w * tmp[clamp(y as i64 + t as i64 - radius) * n + x])
                .sum::<f64>()
                / norm;
        }
    }
    out
}

/// `g = 1 / (1 + s |grad G * sigma|^2)` on the full grid, with a Gaussian of
/// `smoothing` pixels and central differences in physical units.
pub fn edge_weight(image: &ConductivityImage, strength: f64, smoothing: f64) -> Result<Vec<f64>> {
    if !(strength >= 0.0) || !(smoothing >= 0.0) {
        return Err(Error::InvalidParameter("edge weight parameters must be >= 0".into()));
    }
    let grid = image.grid();
    let n = grid.n();
    if strength == 0.0 {
        return Ok(vec![1.0; n * n]);
    }
    let smooth = gaussian_smooth(image.values(), n, smoothing);
    let h = grid.h();
    let at = |x: usize, y: usize| smooth[y * n + x];
    let mut g = vec![1.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let (x0, x1) = (x.saturating_sub(1), (x + 1).min(n - 1));
            let (y0, y1) = (y.saturating_sub(1), (y + 1).min(n - 1));
            let gx = (at(x1, y) - at(x0, y)) / ((x1 - x0) as f64 * h);
            let gy = (at(x, y1) - at(x, y0)) / ((y1 - y0) as f64 * h);
            g[y * n + x] = 1.0 / (1.0 + strength * (gx * gx + gy * gy));
        }
    }
    Ok(g)
}

/// Runs the alternating segmentation and returns `sigma_TV = sum_k u_k c_k`.
pub fn segment(image: &ConductivityImage, cfg: &SegmentConfig) -> Result<Segmentation> {
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    if cfg.max_inner == 0 || cfg.max_outer == 0 {
        return Err(Error::InvalidParameter("iteration limits must be positive".into()));
    }
    image.check_finite()?;
    let grid = image.grid().clone();
    let stencil = Stencil::new(&grid);
    let npix = stencil.len();
    let kreg = cfg.regions;
    let data = image.disc_values();
    let mut c = kmeans_init(image, kreg, cfg.seed)?;
    let full_g = edge_weight(image, cfg.edge_strength, cfg.smoothing)?;
    let weight: Vec<f64> = grid.disc_points().iter().map(|&i| full_g[i]).collect();
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    // data term is measured on an 8-bit intensity scale
    let intensity = 255.0 / (hi - lo);
    let tau = 1.0 / 8f64.sqrt();

    let data_term = |c: &[f64]| -> Vec<Vec<f64>> {
        c.iter()
            .map(|ck| {
                data.iter()
                    .map(|x| 0.5 * cfg.lambda * (intensity * (x - ck)).powi(2))
                    .collect()
            })
            .collect()
    };
    let mut f = data_term(&c);
    let mut u = vec![vec![0.0; npix]; kreg];
    for p in 0..npix {
        let k = argmin_k(&f, p);
        u[k][p] = 1.0;
    }
    let mut ubar = u.clone();
    let mut dual = vec![vec![[0.0; 2]; npix]; kreg];
    let mut diag = SegmentDiagnostics::default();
    let mut grad = vec![[0.0; 2]; npix];
    let mut divp = vec![0.0; npix];
    let mut labels = vec![0usize; npix];
    let mut prev_energy = f64::INFINITY;

    for _outer in 0..cfg.max_outer {
        let mut inner_done = 0;
        for it in 0..cfg.max_inner {
            for k in 0..kreg {
                stencil.grad(&ubar[k], &mut grad);
                for p in 0..npix {
                    let q = [dual[k][p][0] + tau * grad[p][0], dual[k][p][1] + tau * grad[p][1]];
                    let q = project_dual(q, weight[p]);
                    diag.max_dual_violation = diag.max_dual_violation.max(q[0].hypot(q[1]) - weight[p]);
                    dual[k][p] = q;
                }
            }
            let mut step = vec![vec![0.0; npix]; kreg];
            for k in 0..kreg {
                stencil.div(&dual[k], &mut divp);
                for p in 0..npix {
                    step[k][p] = u[k][p] + tau * (divp[p] - f[k][p]);
                }
            }
            let (mut num, mut den) = (0.0, 0.0);
            let mut col = vec![0.0; kreg];
            for p in 0..npix {
                for k in 0..kreg {
                    col[k] = step[k][p];
                }
                let proj = project_simplex(&col);
                let sum: f64 = proj.iter().sum();
                let neg = proj.iter().fold(0.0f64, |a, &v| a.max(-v));
                diag.max_simplex_violation = diag.max_simplex_violation.max((sum - 1.0).abs()).max(neg);
                for k in 0..kreg {
                    let old = u[k][p];
                    num += (proj[k] - old).powi(2);
                    den += old * old;
                    ubar[k][p] = 2.0 * proj[k] - old;
                    u[k][p] = proj[k];
                }
            }
            inner_done = it + 1;
            if den > 0.0 && (num / den).sqrt() < cfg.inner_tol {
                break;
            }
        }
        diag.inner_iterations.push(inner_done);
        diag.outer_iterations += 1;

        for p in 0..npix {
            let mut best = 0;
            for k in 1..kreg {
                if u[k][p] > u[best][p] {
                    best = k;
                }
            }
            labels[p] = best;
        }
        let mut sums = vec![0.0; kreg];
        let mut counts = vec![0usize; kreg];
        for p in 0..npix {
            sums[labels[p]] += data[p];
            counts[labels[p]] += 1;
        }
        let old_c = c.clone();
        for k in 0..kreg {
            if counts[k] > 0 {
                c[k] = sums[k] / counts[k] as f64;
            }
        }
        f = data_term(&c);
        let energy = thresholded_energy(&stencil, &labels, &weight, &f, kreg);
        if energy > prev_energy * (1.0 + 1e-6) + 1e-12 {
            log::warn!("segmentation energy increased from {prev_energy:.6e} to {energy:.6e}");
        }
        prev_energy = energy;
        diag.energies.push(energy);
        let change = c.iter().zip(&old_c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < cfg.outer_tol {
            break;
        }
    }

    let disc_values: Vec<f64> = labels.iter().map(|&l| c[l]).collect();
    let out = ConductivityImage::from_disc_values(grid, &disc_values, image.background())?;
    Ok(Segmentation {
        image: out,
        labels: LabelField {
            regions: kreg,
            u,
            labels,
            means: c,
            lambda: cfg.lambda,
            weight,
        },
        diagnostics: diag,
    })
}

fn argmin_k(f: &[Vec<f64>], p: usize) -> usize {
    let mut best = 0;
    for k in 1..f.len() {
        if f[k][p] < f[best][p] {
            best = k;
        }
    }
    best
}

fn thresholded_energy(stencil: &Stencil, labels: &[usize], weight: &[f64], f: &[Vec<f64>], kreg: usize) -> f64 {
    let npix = labels.len();
    let mut grad = vec![[0.0; 2]; npix];
    let mut e = 0.0;
    for k in 0..kreg {
        let uk: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }).collect();
        stencil.grad(&uk, &mut grad);
        for p in 0..npix {
            e += weight[p] * grad[p][0].hypot(grad[p][1]) + uk[p] * f[k][p];
        }
    }
    e
}
