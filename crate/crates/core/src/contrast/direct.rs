//! DIRECT global search over the unit square.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Value assigned to samples where the objective failed.
pub const FAILED_VALUE: f64 = 1e10;

const EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectSample {
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub evaluations: usize,
    /// Every sample in evaluation order.
    pub samples: Vec<DirectSample>,
}

#[derive(Debug, Clone)]
struct Rect {
    center: [f64; 2],
    /// Side of dimension `i` is `3^-level[i]`.
    level: [u32; 2],
    value: f64,
}

impl Rect {
    fn side(&self, i: usize) -> f64 {
        3f64.powi(-(self.level[i] as i32))
    }

    fn size(&self) -> f64 {
        0.5 * (self.side(0).powi(2) + self.side(1).powi(2)).sqrt()
    }
}

fn key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64)
}

/// Indices of the potentially optimal rectangles.
fn potentially_optimal(rects: &[Rect]) -> Vec<usize> {
    let fmin = rects.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    // best rectangle of every size class (ties broken by lowest index)
    let mut classes: Vec<(u32, usize)> = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        let cls = r.level[0] + r.level[1] * 1000;
        match classes.iter_mut().find(|(c, _)| *c == cls) {
            Some(entry) => {
                if r.value < rects[entry.1].value {
                    entry.1 = i;
                }
            }
            None => classes.push((cls, i)),
        }
    }
    let mut out = Vec::new();
    for &(_, j) in &classes {
        let (dj, fj) = (rects[j].size(), rects[j].value);
        let mut k_low = 0.0f64;
        let mut k_high = f64::INFINITY;
        for &(_, i) in &classes {
            let (di, fi) = (rects[i].size(), rects[i].value);
            if di < dj {
                k_low = k_low.max((fj - fi) / (dj - di));
            } else if di > dj {
                k_high = k_high.min((fi - fj) / (di - dj));
            } else if i != j && fi < fj {
                k_high = -1.0;
            }
        }
        if k_low > k_high {
            continue;
        }
        if k_high.is_finite() && fj - k_high * dj > fmin - EPSILON * fmin.abs() {
            continue;
        }
        out.push(j);
    }
    out.sort_unstable();
    out
}

/// Minimizes `objective` over `[0, 1]^2` with at most `budget` evaluations.
/// Failed evaluations are recorded and scored [`FAILED_VALUE`].
pub fn direct_minimize<F>(objective: F, budget: usize) -> Result<DirectResult>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if budget < 9 {
        return Err(Error::InvalidParameter(format!("DIRECT budget must be at least 9, got {budget}")));
    }
    let mut cache: HashMap<(i64, i64), f64> = HashMap::new();
    let mut samples = Vec::new();
    let evaluate = |points: &[[f64; 2]], cache: &mut HashMap<(i64, i64), f64>, samples: &mut Vec<DirectSample>| -> Vec<f64> {
        let fresh: Vec<[f64; 2]> = points.iter().copied().filter(|p| !cache.contains_key(&key(*p))).collect();
        let results: Vec<Result<f64>> = fresh.par_iter().map(|p| objective(p[0], p[1])).collect();
        for (p, r) in fresh.iter().zip(results) {
            let (value, failed) = match r {
                Ok(v) if v.is_finite() => (v, false),
                Ok(_) => (FAILED_VALUE, true),
                Err(e) => {
                    log::warn!("objective failed at ({:.6}, {:.6}): {e}", p[0], p[1]);
                    (FAILED_VALUE, true)
                }
            };
            cache.insert(key(*p), value);
            samples.push(DirectSample { s: p[0], t: p[1], value, failed });
        }
        points.iter().map(|p| cache[&key(*p)]).collect()
    };

    let first = evaluate(&[[0.5, 0.5]], &mut cache, &mut samples);
    let mut rects = vec![Rect { center: [0.5, 0.5], level: [0, 0], value: first[0] }];

    loop {
        let selected = potentially_optimal(&rects);
        // plan the whole generation within the remaining budget
        let mut plans = Vec::new();
        let mut planned = samples.len();
        for &j in &selected {
            let r = &rects[j];
            let min_level = r.level[0].min(r.level[1]);
            let dims: Vec<usize> = (0..2).filter(|&i| r.level[i] == min_level).collect();
            let need = 2 * dims.len();
            if planned + need > budget {
                break;
            }
            planned += need;
            let delta = r.side(dims[0]) / 3.0;
            let mut pts = Vec::new();
            for &i in &dims {
                let mut lo = r.center;
                let mut hi = r.center;
                lo[i] -= delta;
                hi[i] += delta;
                pts.push(lo);
                pts.push(hi);
            }
            plans.push((j, dims, pts));
        }
        if plans.is_empty() {
            break;
        }
        let all: Vec<[f64; 2]> = plans.iter().flat_map(|p| p.2.iter().copied()).collect();
        let values = evaluate(&all, &mut cache, &mut samples);
        let mut offset = 0;
        for (j, dims, pts) in plans {
            let vals = &values[offset..offset + pts.len()];
            offset += pts.len();
            let mut order: Vec<(usize, f64)> = dims
                .iter()
                .enumerate()
                .map(|(a, &i)| (i, vals[2 * a].min(vals[2 * a + 1])))
                .collect();
            order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
            for (i, _) in order {
                let a = dims.iter().position(|&d| d == i).expect("dimension in plan");
                rects[j].level[i] += 1;
                let level = rects[j].level;
                for (p, v) in [(pts[2 * a], vals[2 * a]), (pts[2 * a + 1], vals[2 * a + 1])] {
                    rects.push(Rect { center: p, level, value: v });
                }
            }
        }
    }

    let best = rects
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least one rectangle");
    Ok(DirectResult {
        s: best.center[0],
        t: best.center[1],
        value: best.value,
        evaluations: samples.len(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_min(f: impl Fn(f64, f64) -> f64) -> (f64, f64, f64) {
        let mut best = (0.0, 0.0, f64::INFINITY);
        for i in 0..=100 {
            for j in 0..=100 {
                let (s, t) = (i as f64 / 100.0, j as f64 / 100.0);
                let v = f(s, t);
                if v < best.2 {
                    best = (s, t, v);
                }
            }
        }
        best
    }

    #[test]
    fn quadratic_bowl() {
        let f = |s: f64, t: f64| (s - 0.3).powi(2) + (t - 0.7).powi(2);
        let (gs, gt, _) = grid_min(f);
        let r = direct_minimize(|s, t| Ok(f(s, t)), 100).unwrap();
        assert!(r.evaluations <= 100);
        assert!((r.s - gs).abs() < 0.05 && (r.t - gt).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn corner_minimum() {
        let f = |s: f64, t: f64| (s - 1.0).powi(2) + (t - 1.0).powi(2);
        let r = direct_minimize(|s, t| Ok(f(s, t)), 150).unwrap();
        assert!((r.s - 1.0).abs() < 0.05 && (r.t - 1.0).abs() < 0.05, "{} {}", r.s, r.t);
    }

    #[test]
    fn constant_objective() {
        let r = direct_minimize(|_, _| Ok(2.5), 30).unwrap();
        assert_eq!(r.value, 2.5);
        assert!(r.samples.iter().any(|p| p.s == r.s && p.t == r.t));
    }

    #[test]
    fn never_worse_than_samples() {
        let f = |s: f64, t: f64| (5.0 * s).sin() * (3.0 * t).cos() + s * t;
        let r = direct_minimize(|s, t| Ok(f(s, t)), 60).unwrap();
        for p in &r.samples {
            assert!(r.value <= p.value);
        }
        assert!(r.value <= f(0.5, 0.5));
    }

    #[test]
    fn failures_are_skipped() {
        let r = direct_minimize(
            |s, t| {
                if s > 0.6 {
                    Err(Error::NoConvergence("synthetic".into()))
                } else {
                    Ok((s - 0.2).powi(2) + (t - 0.5).powi(2))
                }
            },
            60,
        )
        .unwrap();
        assert!(r.samples.iter().any(|p| p.failed));
        assert!(!r.value.is_nan() && r.value < 1.0);
        assert!(r.s <= 0.6);
    }

    #[test]
    fn deterministic_and_rejects_small_budget() {
        let f = |s: f64, t: f64| Ok((s - 0.1).abs() + (t - 0.9).abs());
        assert_eq!(direct_minimize(f, 50).unwrap(), direct_minimize(f, 50).unwrap());
        assert!(direct_minimize(f, 8).is_err());
    }
}
