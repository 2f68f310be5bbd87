//! Image quality metrics on the disc pixels.

use crate::error::{Error, Result};
use crate::phantoms::ConductivityImage;

/// SSIM window side in pixels.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_grids(a: &ConductivityImage, b: &ConductivityImage) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch("images live on different z-grids".into()))
    }
}

/// `||a - b|| / ||b||` over disc pixels.
pub fn relative_l2(a: &ConductivityImage, b: &ConductivityImage) -> Result<f64> {
    check_grids(a, b)?;
    let (mut num, mut den) = (0.0, 0.0);
    for &i in a.grid().disc_points() {
        let (x, y) = (a.values()[i], b.values()[i]);
        num += (x - y) * (x - y);
        den += y * y;
    }
    if den == 0.0 {
        return Err(Error::Degenerate("reference image is zero on the disc".into()));
    }
    Ok((num / den).sqrt())
}

/// Mean SSIM over disc pixels, Gaussian window restricted to the disc.
/// The dynamic range is that of `truth` on the disc (1 if `truth` is constant).
pub fn ssim(image: &ConductivityImage, truth: &ConductivityImage) -> Result<f64> {
    check_grids(image, truth)?;
    let grid = image.grid();
    let n = grid.n();
    let mask = grid.disc_mask();
    let range = truth.max_on_disc() - truth.min_on_disc();
    let l = if range > 0.0 { range } else { 1.0 };
    let c1 = (SSIM_K1 * l).powi(2);
    let c2 = (SSIM_K2 * l).powi(2);
    let half = (SSIM_WINDOW / 2) as i64;
    let taps: Vec<f64> = (-half..=half)
        .map(|d| (-((d * d) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let (a, b) = (image.values(), truth.values());
    let mut total = 0.0;
    for &i in grid.disc_points() {
        let (x0, y0) = ((i % n) as i64, (i / n) as i64);
        let (mut w, mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for dy in -half..=half {
            let y = y0 + dy;
            if y < 0 || y >= n as i64 {
                continue;
            }
            for dx in -half..=half {
                let x = x0 + dx;
                if x < 0 || x >= n as i64 {
                    continue;
                }
                let j = y as usize * n + x as usize;
                if !mask[j] {
                    continue;
                }
                let wt = taps[(dx + half) as usize] * taps[(dy + half) as usize];
                w += wt;
                ma += wt * a[j];
                mb += wt * b[j];
                aa += wt * a[j] * a[j];
                bb += wt * b[j] * b[j];
                ab += wt * a[j] * b[j];
            }
        }
        let (ma, mb) = (ma / w, mb / w);
        let va = aa / w - ma * ma;
        let vb = bb / w - mb * mb;
        let cov = ab / w - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / grid.disc_points().len() as f64)
}

/// True when the relative change between successive images is below `thresh`.
pub fn stop_check(current: &ConductivityImage, previous: &ConductivityImage, thresh: f64) -> Result<bool> {
    check_grids(current, previous)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in current.grid().disc_points() {
        num += (current.values()[i] - previous.values()[i]).powi(2);
        den += previous.values()[i].powi(2);
    }
    if num == 0.0 {
        return Ok(thresh > 0.0);
    }
    Ok(den > 0.0 && (num / den).sqrt() < thresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::ZGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn grid() -> Arc<ZGrid> {
        Arc::new(ZGrid::new(5, 1.1).unwrap())
    }

    fn image(f: impl Fn(f64, f64) -> f64) -> ConductivityImage {
        let g = grid();
        let vals = (0..g.len()).map(|i| f(g.point(i).re, g.point(i).im)).collect();
        ConductivityImage::new(g, vals, 1.0).unwrap()
    }

    #[test]
    fn l2_examples() {
        let b = image(|x, y| 1.0 + x * y);
        assert_eq!(relative_l2(&b, &b).unwrap(), 0.0);
        let a = image(|x, y| 1.1 * (1.0 + x * y));
        assert!((relative_l2(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        let c = image(|x, y| 1.0 + x * y + x);
        let g = grid();
        let (mut num, mut den) = (0.0, 0.0);
        for &i in g.disc_points() {
            let p = g.point(i);
            num += p.re * p.re;
            den += (1.0 + p.re * p.im).powi(2);
        }
        assert!((relative_l2(&c, &b).unwrap() - (num / den).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let b = image(|x, y| 1.0 + (4.0 * x).sin() * (3.0 * y).cos());
        assert!((ssim(&b, &b).unwrap() - 1.0).abs() < 1e-12);
        let neg = image(|x, y| 1.0 - (4.0 * x).sin() * (3.0 * y).cos());
        assert!(ssim(&neg, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_of_independent_noise_is_small() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut draw = || -> ConductivityImage {
                let v = (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                ConductivityImage::new(g.clone(), v, 0.0).unwrap()
            };
            let (a, b) = (draw(), draw());
            assert!(ssim(&a, &b).unwrap().abs() < 0.2);
        }
    }

    #[test]
    fn stop_examples() {
        let a = image(|x, _| 1.0 + x);
        assert!(stop_check(&a, &a, 1e-9).unwrap());
        let b = image(|x, _| 1.1 * (1.0 + x));
        assert!(!stop_check(&b, &a, 0.05).unwrap());
        assert!(!stop_check(&b, &a, 0.0).unwrap());
        assert!(stop_check(&b, &a, 0.2).unwrap());
    }
}
