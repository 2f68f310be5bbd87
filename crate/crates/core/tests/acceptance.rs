//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line even when output capture is on.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvdbar_core::beltrami::scattering_from_mu;
use tvdbar_core::boundary_cgo::scattering_from_dn;
use tvdbar_core::contrast::{direct_minimize, ContrastBounds, ContrastFamily};
use tvdbar_core::forward::{assemble_nd_from_spec, assemble_nd_from_triangles};
use tvdbar_core::io::metrics_csv;
use tvdbar_core::phantoms::{beltrami_mu, build_phantom};
use tvdbar_core::pipeline::{blend_chi, run_pipeline, simulate_dn, PipelineConfig, PipelineOutcome};
use tvdbar_core::tv_seg::{segment, SegmentConfig};
use tvdbar_core::{ConductivityImage, FemMesh, PhantomSpec, Shape, TrigBasis, ZGrid};

// Pinned tolerances.
const HOMOGENEOUS_T_MAX: f64 = 0.05;
const HOMOGENEOUS_L2: f64 = 0.01;
const HOMOGENEOUS_SECONDS: f64 = 120.0;
const SHORTCUT_RADIUS: f64 = 3.0;
const SHORTCUT_TOL: f64 = 0.15;
// Measured 0.013 at ell = 7, m = 6; frozen with headroom.
const SHORTCUT_REGRESSION: f64 = 0.03;
const EXAMPLE1_DB: [f64; 3] = [0.1240, 0.1095, 0.1054];
const EXAMPLE1_BAND: f64 = 0.05;
const PIPE_L2: (f64, f64) = (0.15, 0.35);
const PIPE_SSIM: (f64, f64) = (0.5, 0.8);
const TV_FEASIBILITY: f64 = 1e-12;
const DIRECT_BUDGET: usize = 150;
const DIRECT_DIST: f64 = 0.05;
const FEM_DIAGONAL: f64 = 1e-3;
const FEM_TWO_LAYER: f64 = 1e-2;
const DETERMINISM_THREADS: usize = 2;

type Outcome = (bool, String);

fn fmt3(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn homogeneous() -> Outcome {
    let clock = Instant::now();
    let cfg = PipelineConfig::heart_and_lungs();
    let spec = PhantomSpec {
        name: None,
        background: 1.0,
        shapes: vec![],
    };
    let dn = simulate_dn(&spec, &cfg).unwrap();
    let truth = ConductivityImage::constant(cfg.zgrid().unwrap(), 1.0);
    let out = run_pipeline(&dn, &cfg, Some(&truth));
    let secs = clock.elapsed().as_secs_f64();
    if let Some(e) = out.failure {
        return (false, format!("pipeline failed: {e}"));
    }
    let t_max = out.tau0.as_ref().unwrap().max_abs_t(5.0);
    let worst = out
        .records
        .iter()
        .flat_map(|r| {
            let m = r.metrics.unwrap();
            [m.db.l2, m.tv.l2, m.ce.l2]
        })
        .fold(0.0, f64::max);
    (
        t_max < HOMOGENEOUS_T_MAX && worst < HOMOGENEOUS_L2 && secs < HOMOGENEOUS_SECONDS,
        format!("max|t| on |k|<5 = {t_max:.2e}, worst stage rel. L2 = {worst:.2e}, {secs:.1} s"),
    )
}

fn shortcut() -> Outcome {
    let cfg = PipelineConfig::heart_and_lungs();
    let spec = PhantomSpec::heart_and_lungs();
    let dn = simulate_dn(&spec, &cfg).unwrap();
    let kgrid = cfg.kgrid().unwrap();
    let radius = SHORTCUT_RADIUS + 1e-9;
    let from_dn = scattering_from_dn(&dn, kgrid.clone(), radius).unwrap();
    let sigma = build_phantom(&spec, cfg.zgrid().unwrap()).unwrap();
    let mu = beltrami_mu(&sigma).unwrap();
    let mask = kgrid.disc_mask(radius);
    let from_mu = scattering_from_mu(sigma.grid().clone(), &mu, kgrid, &mask).unwrap();
    let rel = from_dn.relative_distance(&from_mu, radius).unwrap();
    (
        rel < SHORTCUT_TOL && rel < SHORTCUT_REGRESSION,
        format!("relative L2 on |k|<=3 = {rel:.4} (limit {SHORTCUT_TOL}, regression {SHORTCUT_REGRESSION})"),
    )
}

fn example1_run() -> PipelineOutcome {
    let cfg = PipelineConfig::heart_and_lungs();
    let spec = PhantomSpec::heart_and_lungs();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(DETERMINISM_THREADS)
        .build()
        .unwrap();
    pool.install(|| {
        let dn = simulate_dn(&spec, &cfg).unwrap();
        let truth = build_phantom(&spec, cfg.zgrid().unwrap()).unwrap();
        run_pipeline(&dn, &cfg, Some(&truth))
    })
}

fn table(out: &PipelineOutcome) -> String {
    let rows: Vec<_> = out.records.iter().map(|r| (r.j, r.metrics.unwrap())).collect();
    metrics_csv(&rows)
}

fn example1_table(out: &PipelineOutcome) -> Outcome {
    if let Some(e) = &out.failure {
        return (false, format!("pipeline failed: {e}"));
    }
    let db: Vec<f64> = out.records.iter().map(|r| r.metrics.unwrap().db.l2).collect();
    let in_band = db.len() == 3 && db.iter().zip(EXAMPLE1_DB).all(|(a, b)| (a - b).abs() <= EXAMPLE1_BAND);
    let monotone = db.windows(2).all(|w| w[1] <= w[0]);
    (
        in_band && monotone,
        format!(
            "DB errors [{}] vs [{}] +-{EXAMPLE1_BAND}, monotone non-increasing: {monotone}",
            fmt3(&db),
            fmt3(&EXAMPLE1_DB)
        ),
    )
}

fn pipeline_noisy() -> Outcome {
    let cfg = PipelineConfig::pipeline();
    let spec = PhantomSpec::pipeline();
    let dn = simulate_dn(&spec, &cfg).unwrap();
    let truth = build_phantom(&spec, cfg.zgrid().unwrap()).unwrap();
    let out = run_pipeline(&dn, &cfg, Some(&truth));
    if let Some(e) = out.failure {
        return (false, format!("pipeline failed: {e}"));
    }
    let (mut l2, mut ss) = (Vec::new(), Vec::new());
    for r in &out.records {
        let m = r.metrics.unwrap();
        for s in [m.db, m.tv, m.ce] {
            l2.push(s.l2);
            ss.push(s.ssim);
        }
    }
    let within = |v: &[f64], (lo, hi): (f64, f64)| v.iter().all(|x| (lo..=hi).contains(x));
    let range = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(0.0, f64::max));
    let (l2lo, l2hi) = range(&l2);
    let (slo, shi) = range(&ss);
    (
        within(&l2, PIPE_L2) && within(&ss, PIPE_SSIM),
        format!("rel. L2 in [{l2lo:.4}, {l2hi:.4}], SSIM in [{slo:.4}, {shi:.4}] over {} stages", l2.len()),
    )
}

/// Three-valued test images on a 64^2 grid, values 0.5 / 1.0 / 1.5.
fn label_images() -> Vec<ConductivityImage> {
    let grid = Arc::new(ZGrid::new(6, 1.05).unwrap());
    let layouts: [fn(f64, f64) -> usize; 3] = [
        |x, _| if x < -0.3 { 0 } else if x < 0.35 { 1 } else { 2 },
        |x, y| if x * x + y * y < 0.16 { 2 } else if y < -0.1 { 0 } else { 1 },
        |x, y| if (x - 0.3).powi(2) + (y - 0.2).powi(2) < 0.09 { 0 } else if x + y < -0.4 { 2 } else { 1 },
    ];
    layouts
        .iter()
        .map(|f| {
            let values = (0..grid.len())
                .map(|i| {
                    let z = grid.point(i);
                    [0.5, 1.0, 1.5][f(z.re, z.im)]
                })
                .collect();
            ConductivityImage::new(grid.clone(), values, 1.0).unwrap()
        })
        .collect()
}

fn tv_exact() -> Outcome {
    let cfg = SegmentConfig {
        regions: 3,
        ..SegmentConfig::default()
    };
    let mut worst_feas: f64 = 0.0;
    let mut wrong = 0usize;
    let mut means_exact = true;
    for image in label_images() {
        let seg = segment(&image, &cfg).unwrap();
        let grid = image.grid();
        wrong += grid
            .disc_points()
            .iter()
            .filter(|&&i| seg.image.values()[i] != image.values()[i])
            .count();
        let mut means = seg.labels.means.clone();
        means.sort_by(f64::total_cmp);
        means_exact &= means == [0.5, 1.0, 1.5];
        worst_feas = worst_feas
            .max(seg.diagnostics.max_simplex_violation)
            .max(seg.diagnostics.max_dual_violation);
    }
    (
        wrong == 0 && means_exact && worst_feas <= TV_FEASIBILITY,
        format!("{wrong} misassigned pixels, exact means: {means_exact}, worst feasibility violation {worst_feas:.1e}"),
    )
}

fn direct_oracle() -> Outcome {
    type Objective = fn(f64, f64) -> f64;
    let objectives: [(&str, Objective); 3] = [
        ("rotated bowl", |s, t| {
            let (u, v) = (s - 0.71, t - 0.26);
            (u + v).powi(2) + 8.0 * (u - v).powi(2)
        }),
        ("Goldstein-Price", |s, t| {
            let (x, y) = (4.0 * s - 2.0, 4.0 * t - 2.0);
            let a = 1.0 + (x + y + 1.0).powi(2) * (19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y);
            let b = 30.0 + (2.0 * x - 3.0 * y).powi(2) * (18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y);
            a * b
        }),
        ("Branin", |s, t| {
            let (x, y) = (15.0 * s - 5.0, 15.0 * t);
            let pi = std::f64::consts::PI;
            let b = 5.1 / (4.0 * pi * pi);
            (y - b * x * x + 5.0 / pi * x - 6.0).powi(2) + 10.0 * (1.0 - 1.0 / (8.0 * pi)) * x.cos() + 10.0
        }),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f) in objectives {
        // ties within 1e-4 all count: grid sampling splits exactly equal minima
        let n = 1000;
        let grid: Vec<(f64, f64, f64)> = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| (i as f64 / n as f64, j as f64 / n as f64)))
            .map(|(s, t)| (f(s, t), s, t))
            .collect();
        let low = grid.iter().map(|g| g.0).fold(f64::INFINITY, f64::min);
        let argmins: Vec<_> = grid.iter().filter(|g| g.0 <= low + 1e-4 * low.abs().max(1.0)).collect();
        let res = direct_minimize(|s, t| Ok(f(s, t)), DIRECT_BUDGET).unwrap();
        let dist = argmins
            .iter()
            .map(|g| (res.s - g.1).hypot(res.t - g.2))
            .fold(f64::INFINITY, f64::min);
        ok &= dist <= DIRECT_DIST && res.evaluations <= DIRECT_BUDGET;
        parts.push(format!("{name} {dist:.4} (gap {:.1e}, {} evals)", res.value - low, res.evaluations));
    }
    (ok, format!("distance to grid argmin: {}", parts.join(", ")))
}

fn contrast_endpoints() -> Outcome {
    let grid = Arc::new(ZGrid::new(5, 1.2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ok = true;
    let mut checked = 0;
    for _ in 0..50 {
        let c = rng.gen_range(0.05..0.9);
        let big = rng.gen_range(1.1..4.0);
        let levels = [rng.gen_range(0.2..0.95), 1.0, rng.gen_range(1.05..3.0)];
        let values: Vec<f64> = (0..grid.len()).map(|_| levels[rng.gen_range(0..3)]).collect();
        let image = ConductivityImage::new(grid.clone(), values, 1.0).unwrap();
        let family = ContrastFamily::new(&image, ContrastBounds::new(c, big).unwrap(), 0.01).unwrap();
        let full = family.member(1.0, 1.0).unwrap();
        let none = family.member(0.0, 0.0).unwrap();
        ok &= full.min_on_disc() == c && full.max_on_disc() == big;
        ok &= none.values().iter().all(|&v| v == 1.0);
        checked += 1;
    }
    (ok, format!("{checked} random families: sigma_11 spans [c, C] exactly, sigma_00 == 1"))
}

fn chi_blend() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mid = true;
    for r in [3.0, 4.0, 5.0, 6.6, 10.0] {
        let at = |rad: f64| blend_chi(Complex64::from_polar(rad, 0.7), r);
        let eps = 1e-9;
        // a cubic with p(0) = 1, p'(0) = 0 moves by O(eps^2) across each join
        worst = worst
            .max((at(r - 1.0) - at(r - 1.0 + eps)).abs())
            .max((at(r - 1.0 - eps) - at(r - 1.0)).abs())
            .max((at(r) - at(r - eps)).abs())
            .max((at(r + eps) - at(r)).abs());
        mid &= blend_chi(Complex64::new(r - 0.5, 0.0), r) == 0.5;
    }
    (
        worst < 1e-15 && mid,
        format!("largest jump across |k| = R-1 and |k| = R: {worst:.1e}, p(0.5) = 0.5 exactly: {mid}"),
    )
}

fn fem_oracle() -> Outcome {
    let mesh = FemMesh::disc(PipelineConfig::default().mesh_rings).unwrap();
    let basis = TrigBasis::new(16).unwrap();
    let nd = assemble_nd_from_triangles(&vec![1.0; mesh.triangles().len()], &basis, &mesh).unwrap();
    let diag = (0..basis.len())
        .map(|i| (nd.matrix[(i, i)] - 1.0 / basis.omega(i) as f64).abs())
        .fold(0.0, f64::max);

    let (r0, s_in) = (0.5, 3.0);
    let spec = PhantomSpec {
        name: None,
        background: 1.0,
        shapes: vec![Shape::Ellipse { cx: 0.0, cy: 0.0, a: r0, b: r0, angle: 0.0, value: s_in }],
    };
    let basis = TrigBasis::new(6).unwrap();
    let nd = assemble_nd_from_spec(&spec, &basis, &mesh).unwrap();
    let kappa = (s_in - 1.0) / (s_in + 1.0);
    let two_layer = (0..basis.len())
        .map(|i| {
            let j = basis.omega(i) as f64;
            let rho = r0.powf(2.0 * j);
            let want = (1.0 - kappa * rho) / (j * (1.0 + kappa * rho));
            (nd.matrix[(i, i)] - want).abs()
        })
        .fold(0.0, f64::max);
    (
        diag < FEM_DIAGONAL && two_layer < FEM_TWO_LAYER,
        format!("homogeneous diagonal error {diag:.2e}, two-layer error {two_layer:.2e}"),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let clock = Instant::now();
    let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    println!(
        "criterion {id:>2} {}: {name}: {detail} [{:.1} s]",
        if ok { "PASS" } else { "FAIL" },
        clock.elapsed().as_secs_f64()
    );
    ok
}

fn main() {
    // `cargo test -- --list` and filters from libtest do not apply here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    // numeric arguments select criteria, e.g. `cargo test --test acceptance -- 6 9`
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: usize| picked.is_empty() || picked.contains(&id);
    let mut ok = true;
    if want(5) {
        ok &= run(5, "TV segmentation is exact on separated labels", tv_exact);
    }
    if want(6) {
        ok &= run(6, "DIRECT finds the grid argmin", direct_oracle);
    }
    if want(7) {
        ok &= run(7, "contrast family endpoints", contrast_endpoints);
    }
    if want(8) {
        ok &= run(8, "blending function", chi_blend);
    }
    if want(9) {
        ok &= run(9, "FEM against closed-form ND maps", fem_oracle);
    }
    if want(1) {
        ok &= run(1, "homogeneous fixed point", homogeneous);
    }
    if want(2) {
        ok &= run(2, "DN and Beltrami scattering agree", shortcut);
    }
    let mut runs = Vec::new();
    if want(3) {
        ok &= run(3, "heart-and-lungs D-bar errors", || {
            runs.push(example1_run());
            example1_table(&runs[0])
        });
    }
    if want(10) {
        ok &= run(10, "repeated runs give identical metrics.csv", || {
            while runs.len() < 2 {
                runs.push(example1_run());
            }
            let (a, b) = (table(&runs[0]), table(&runs[1]));
            (a == b && !a.is_empty(), format!("{} bytes, identical: {}", a.len(), a == b))
        });
    }
    if want(4) {
        ok &= run(4, "pipeline phantom at 0.75% noise", pipeline_noisy);
    }
    if !ok {
        std::process::exit(1);
    }
}
