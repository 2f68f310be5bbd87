use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::json;
use tvdbar_core::beltrami::scattering_from_mu;
use tvdbar_core::boundary_cgo::{build_sinogram, scattering_from_dn};
use tvdbar_core::contrast::{enhance, ContrastBounds, ContrastConfig, ContrastFamily};
use tvdbar_core::dbar::reconstruct_sigma;
use tvdbar_core::forward::{add_noise_on_nodes, assemble_nd_from_spec, nd_to_dn};
use tvdbar_core::io;
use tvdbar_core::phantoms::{beltrami_mu, build_phantom};
use tvdbar_core::pipeline::{relative_l2, run_pipeline, ssim, IterationMetrics, StageMetrics};
use tvdbar_core::scattering::Convention;
use tvdbar_core::tv_seg::{segment, SegmentConfig};
use tvdbar_core::{BoundaryOpMatrix, ConductivityImage, Error, FemMesh, KGrid, TrigBasis, ZGrid};

use crate::args::*;
use crate::config::{load_phantom, parse_config};
use crate::manifest::Recorder;
use crate::CliError;

type Res<T> = std::result::Result<T, CliError>;

pub fn dispatch(cmd: &Command) -> Res<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Scatter(a) => scatter(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Segment(a) => segment_cmd(a),
        Command::Enhance(a) => enhance_cmd(a),
        Command::Run(a) => run(a),
        Command::Metrics(a) => metrics(a),
        Command::Preview(a) => preview(a),
    }
}

fn out_err(e: Error) -> CliError {
    CliError::from_core(e, "write")
}

fn create_dir(dir: &Path) -> Res<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Parses `a:b` (or `a:b:c` for `n = 3`) into numbers.
pub fn parse_numbers(text: &str, n: usize, what: &str) -> Res<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Config(format!("{what}: cannot parse `{text}`")))?;
    if parts.len() != n {
        return Err(CliError::Config(format!("{what}: expected {n} numbers separated by `:`, got `{text}`")));
    }
    Ok(parts)
}

fn parse_scale(text: &str) -> Res<(f64, f64)> {
    let v = parse_numbers(text, 2, "color scale")?;
    if !(v[1] > v[0]) {
        return Err(CliError::Config(format!("color scale needs lo < hi, got `{text}`")));
    }
    Ok((v[0], v[1]))
}

/// Mask on the k-grid from `disc:R` or `annulus:R1:R2`.
pub fn parse_kmask(text: &str, grid: &KGrid) -> Res<Vec<bool>> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    match kind {
        "disc" => Ok(grid.disc_mask(parse_numbers(rest, 1, "kmask")?[0])),
        "annulus" => {
            let v = parse_numbers(rest, 2, "kmask")?;
            Ok(grid.annulus_mask(v[0], v[1]))
        }
        _ => Err(CliError::Config(format!("kmask must be `disc:R` or `annulus:R1:R2`, got `{text}`"))),
    }
}

fn read_image(path: &Path, rec: &mut Recorder) -> Res<ConductivityImage> {
    rec.input(path);
    io::read_image(path).map_err(|e| CliError::input(e, &path.display().to_string()))
}

fn read_matrix(path: &Path, rec: &mut Recorder) -> Res<BoundaryOpMatrix> {
    rec.input(path);
    io::read_matrix(path).map_err(|e| CliError::input(e, &path.display().to_string()))
}

fn write_image(path: &Path, image: &ConductivityImage, rec: &mut Recorder) -> Res<()> {
    io::write_image(path, image).map_err(out_err)?;
    rec.output(path);
    rec.output(&io::header_path(path));
    Ok(())
}

fn write_png(path: &Path, image: &ConductivityImage, scale: (f64, f64), rec: &mut Recorder) -> Res<()> {
    io::write_png(path, image, scale.0, scale.1).map_err(out_err)?;
    rec.output(path);
    Ok(())
}

fn write_matrix(path: &Path, op: &BoundaryOpMatrix, rec: &mut Recorder) -> Res<()> {
    io::write_matrix(path, op).map_err(out_err)?;
    let csv = path.with_extension("csv");
    io::write_matrix_csv(&csv, op).map_err(out_err)?;
    for p in [path.to_path_buf(), io::header_path(path), csv] {
        rec.output(&p);
    }
    Ok(())
}

fn finish(rec: &Recorder, manifest: Option<&PathBuf>) -> Res<()> {
    if let Some(p) = manifest {
        rec.write(p)?;
    }
    Ok(())
}

/// Shared preview range: the truth's values on the disc and its background.
fn truth_scale(truth: &ConductivityImage) -> (f64, f64) {
    let lo = truth.min_on_disc().min(truth.background());
    let hi = truth.max_on_disc().max(truth.background());
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn simulate(a: &SimulateArgs) -> Res<()> {
    let mut rec = Recorder::new("simulate", Some(&a.out));
    let spec = load_phantom(&a.phantom, Path::new("."))?;
    if !(a.noise >= 0.0) {
        return Err(CliError::Config(format!("noise must be >= 0, got {}", a.noise)));
    }
    let zgrid = Arc::new(ZGrid::new(a.grid.ell, a.grid.s).map_err(|e| CliError::input(e, "z-grid"))?);
    let basis = TrigBasis::new(a.order).map_err(|e| CliError::input(e, "order"))?;
    let mesh = FemMesh::disc(a.mesh_rings).map_err(|e| CliError::input(e, "mesh"))?;
    rec.config(json!({
        "phantom": spec, "noise": a.noise, "seed": a.seed, "order": a.order,
        "mesh_rings": a.mesh_rings, "ell": a.grid.ell, "s": a.grid.s,
    }));
    rec.seed("noise", a.seed);
    create_dir(&a.out)?;

    let clock = Instant::now();
    let nd = assemble_nd_from_spec(&spec, &basis, &mesh).map_err(|e| CliError::from_core(e, "forward"))?;
    let nd = add_noise_on_nodes(&nd, a.noise, a.seed, mesh.boundary().len()).map_err(|e| CliError::from_core(e, "noise"))?;
    let dn = nd_to_dn(&nd).map_err(|e| CliError::from_core(e, "ND inversion"))?;
    rec.stage("forward", clock.elapsed().as_secs_f64());

    let truth = build_phantom(&spec, zgrid.clone()).map_err(|e| CliError::from_core(e, "phantom"))?;
    let mu = beltrami_mu(&truth).map_err(|e| CliError::from_core(e, "phantom"))?;
    let mu = ConductivityImage::new(zgrid, mu, 0.0).map_err(|e| CliError::from_core(e, "phantom"))?;
    fs::write(a.out.join("phantom.json"), serde_json::to_string_pretty(&spec).expect("phantom serializes") + "\n")
        .map_err(|e| CliError::Io(e.to_string()))?;
    rec.output(&a.out.join("phantom.json"));
    write_image(&a.out.join("truth.bin"), &truth, &mut rec)?;
    write_image(&a.out.join("mu.bin"), &mu, &mut rec)?;
    write_png(&a.out.join("truth.png"), &truth, truth_scale(&truth), &mut rec)?;
    write_matrix(&a.out.join("nd.bin"), &nd, &mut rec)?;
    write_matrix(&a.out.join("dn.bin"), &dn, &mut rec)?;
    rec.write(&a.out.join("manifest.json"))?;
    Ok(())
}

fn scatter(a: &ScatterArgs) -> Res<()> {
    let mut rec = Recorder::new("scatter", None);
    let kgrid = Arc::new(KGrid::new(a.m, a.r, a.r_tilde).map_err(|e| CliError::input(e, "k-grid"))?);
    rec.config(json!({"m": a.m, "r": a.r, "r_tilde": a.r_tilde, "radius": a.radius, "kmask": a.kmask}));
    let clock = Instant::now();
    let field = match (&a.dn, &a.mu) {
        (Some(dn), None) => {
            let dn = read_matrix(dn, &mut rec)?;
            scattering_from_dn(&dn, kgrid, a.radius.unwrap_or(a.r)).map_err(|e| CliError::from_core(e, "scattering transform"))?
        }
        (None, Some(mu)) => {
            let mu = read_image(mu, &mut rec)?;
            let mask = match &a.kmask {
                Some(text) => parse_kmask(text, &kgrid)?,
                None => kgrid.disc_mask(a.r),
            };
            scattering_from_mu(mu.grid().clone(), mu.values(), kgrid, &mask)
                .map_err(|e| CliError::from_core(e, "Beltrami scattering"))?
        }
        _ => return Err(CliError::Config("give exactly one of --dn and --mu".into())),
    };
    rec.stage("scatter", clock.elapsed().as_secs_f64());
    let conv = match a.convention {
        ConventionArg::Tau => Convention::Tau,
        ConventionArg::T => Convention::T,
    };
    io::write_scattering(&a.out, &field, conv).map_err(out_err)?;
    rec.output(&a.out);
    rec.output(&io::header_path(&a.out));
    finish(&rec, a.manifest.as_ref())
}

fn reconstruct(a: &ReconstructArgs) -> Res<()> {
    let mut rec = Recorder::new("reconstruct", None);
    rec.input(&a.scattering);
    let field = io::read_scattering(&a.scattering).map_err(|e| CliError::input(e, "scattering"))?;
    let zgrid = Arc::new(ZGrid::new(a.grid.ell, a.grid.s).map_err(|e| CliError::input(e, "z-grid"))?);
    let scale = parse_scale(&a.scale)?;
    rec.config(json!({"cutoff": a.cutoff, "ell": a.grid.ell, "s": a.grid.s}));
    let clock = Instant::now();
    let db = reconstruct_sigma(&field, zgrid, a.cutoff).map_err(|e| CliError::from_core(e, "D-bar"))?;
    rec.stage("D-bar", clock.elapsed().as_secs_f64());
    log::info!("imaginary residual {:.3e}", db.imag_residual);
    write_image(&a.out, &db.sigma, &mut rec)?;
    if let Some(p) = &a.preview {
        write_png(p, &db.sigma, scale, &mut rec)?;
    }
    finish(&rec, a.manifest.as_ref())
}

fn segment_cmd(a: &SegmentArgs) -> Res<()> {
    let mut rec = Recorder::new("segment", None);
    let image = read_image(&a.input, &mut rec)?;
    let cfg = SegmentConfig {
        regions: a.regions,
        lambda: a.lambda,
        edge_strength: a.edge_strength,
        smoothing: a.smoothing,
        seed: a.seed,
        ..SegmentConfig::default()
    };
    rec.config(json!({"regions": a.regions, "lambda": a.lambda, "edge_strength": a.edge_strength, "smoothing": a.smoothing}));
    rec.seed("kmeans", a.seed);
    let clock = Instant::now();
    let seg = segment(&image, &cfg).map_err(|e| CliError::from_core(e, "TV segmentation"))?;
    rec.stage("TV", clock.elapsed().as_secs_f64());
    write_image(&a.out, &seg.image, &mut rec)?;
    if let Some(p) = &a.labels {
        let labels: Vec<f64> = seg.labels.labels.iter().map(|&l| l as f64).collect();
        let img = ConductivityImage::from_disc_values(image.grid().clone(), &labels, -1.0).map_err(out_err)?;
        write_image(p, &img, &mut rec)?;
    }
    finish(&rec, a.manifest.as_ref())
}

fn enhance_cmd(a: &EnhanceArgs) -> Res<()> {
    let mut rec = Recorder::new("enhance", None);
    let image = read_image(&a.input, &mut rec)?;
    let dn = read_matrix(&a.data, &mut rec)?;
    let b = parse_numbers(&a.bounds, 2, "bounds")?;
    let bounds = ContrastBounds::new(b[0], b[1]).map_err(|e| CliError::input(e, "bounds"))?;
    let cfg = ContrastConfig {
        rho: a.rho,
        budget: a.budget,
        order: dn.order,
        mesh_rings: a.mesh_rings,
    };
    rec.config(json!({"bounds": [b[0], b[1]], "budget": a.budget, "rho": a.rho, "mesh_rings": a.mesh_rings}));
    let family = ContrastFamily::new(&image, bounds, a.flat_tolerance).map_err(|e| CliError::from_core(e, "contrast"))?;
    let clock = Instant::now();
    let measured = build_sinogram(&dn, a.rho).map_err(|e| CliError::from_core(e, "measured sinogram"))?;
    let res = enhance(&family, &measured, &cfg).map_err(|e| CliError::from_core(e, "contrast"))?;
    rec.stage("contrast", clock.elapsed().as_secs_f64());
    println!("s={:.6} t={:.6} discrepancy={:.6e} evaluations={}", res.s, res.t, res.discrepancy, res.search.evaluations);
    write_image(&a.out, &res.image, &mut rec)?;
    if let Some(p) = &a.samples {
        io::write_samples_csv(p, &res.search.samples).map_err(out_err)?;
        rec.output(p);
    }
    finish(&rec, a.manifest.as_ref())
}

fn run(a: &RunArgs) -> Res<()> {
    let cfg = parse_config(&a.config)?;
    let p = &cfg.params;
    let mut rec = Recorder::new("run", Some(&a.out));
    rec.input(&a.config);
    rec.config(cfg.echo());
    rec.seed("noise", p.seed);
    rec.seed("kmeans", p.seed);
    create_dir(&a.out)?;
    let zgrid = p.zgrid().map_err(|e| CliError::input(e, "z-grid"))?;

    let (dn, truth) = match &a.data {
        Some(path) => {
            let dn = read_matrix(path, &mut rec)?;
            let truth = match &a.truth {
                Some(t) => Some(read_image(t, &mut rec)?),
                None => None,
            };
            (dn, truth)
        }
        None => {
            let clock = Instant::now();
            let dn = tvdbar_core::pipeline::simulate_dn(&cfg.phantom, p).map_err(|e| CliError::from_core(e, "simulate"))?;
            rec.stage("simulate", clock.elapsed().as_secs_f64());
            write_matrix(&a.out.join("dn.bin"), &dn, &mut rec)?;
            let truth = build_phantom(&cfg.phantom, zgrid.clone()).map_err(|e| CliError::from_core(e, "phantom"))?;
            (dn, Some(truth))
        }
    };
    let scale = match &truth {
        Some(t) => {
            write_image(&a.out.join("truth.bin"), t, &mut rec)?;
            let s = truth_scale(t);
            write_png(&a.out.join("truth.png"), t, s, &mut rec)?;
            s
        }
        None => (p.lower_bound, p.upper_bound),
    };

    let clock = Instant::now();
    let outcome = run_pipeline(&dn, p, truth.as_ref());
    rec.stage("pipeline", clock.elapsed().as_secs_f64());

    if let Some(tau0) = &outcome.tau0 {
        let path = a.out.join("tau0.bin");
        io::write_scattering(&path, tau0, Convention::Tau).map_err(out_err)?;
        rec.output(&path);
        rec.output(&io::header_path(&path));
    }
    let mut rows = Vec::new();
    let mut contrast = String::from("j,s,t,discrepancy\n");
    for r in &outcome.records {
        let dir = a.out.join(format!("j{}", r.j));
        create_dir(&dir)?;
        let tau = dir.join("tau.bin");
        io::write_scattering(&tau, &r.tau, Convention::Tau).map_err(out_err)?;
        rec.output(&tau);
        rec.output(&io::header_path(&tau));
        for (name, img) in [("sigma_db", &r.sigma_db), ("sigma_tv", &r.sigma_tv), ("sigma_ce", &r.sigma_ce)] {
            write_image(&dir.join(format!("{name}.bin")), img, &mut rec)?;
            write_png(&dir.join(format!("{name}.png")), img, scale, &mut rec)?;
        }
        for (stage, secs) in ["D-bar", "TV", "contrast"].iter().zip(r.seconds) {
            rec.stage(&format!("{stage} j={}", r.j), secs);
        }
        match r.contrast {
            Some((s, t, d)) => contrast += &format!("{},{s:.6},{t:.6},{d:.6e}\n", r.j),
            None => contrast += &format!("{},,,\n", r.j),
        }
        if let Some(m) = r.metrics {
            rows.push((r.j, m));
        }
    }
    let path = a.out.join("contrast.csv");
    fs::write(&path, contrast).map_err(|e| CliError::Io(e.to_string()))?;
    rec.output(&path);
    if truth.is_some() {
        let path = a.out.join("metrics.csv");
        fs::write(&path, io::metrics_csv(&rows)).map_err(|e| CliError::Io(e.to_string()))?;
        rec.output(&path);
    }
    rec.write(&a.out.join("manifest.json"))?;
    match outcome.failure {
        Some(e) => Err(CliError::from_core(e, "pipeline")),
        None => Ok(()),
    }
}

fn score(image: &ConductivityImage, truth: &ConductivityImage) -> Res<StageMetrics> {
    let err = |e| CliError::input(e, "metrics");
    Ok(StageMetrics {
        l2: relative_l2(image, truth).map_err(err)?,
        ssim: ssim(image, truth).map_err(err)?,
    })
}

/// Recomputes the metrics table from `j*/sigma_{db,tv,ce}.bin` under `results`.
pub fn metrics_table(truth: &Path, results: &Path) -> Res<String> {
    let truth = io::read_image(truth).map_err(|e| CliError::input(e, "truth"))?;
    let entries = fs::read_dir(results).map_err(|e| CliError::Config(format!("{}: {e}", results.display())))?;
    let mut iterations: Vec<usize> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_prefix('j')).and_then(|n| n.parse().ok()))
        .collect();
    iterations.sort_unstable();
    if iterations.is_empty() {
        return Err(CliError::Config(format!("no iteration directories under {}", results.display())));
    }
    let mut rows = Vec::new();
    for j in iterations {
        let dir = results.join(format!("j{j}"));
        let load = |name: &str| io::read_image(&dir.join(name)).map_err(|e| CliError::input(e, name));
        rows.push((
            j,
            IterationMetrics {
                db: score(&load("sigma_db.bin")?, &truth)?,
                tv: score(&load("sigma_tv.bin")?, &truth)?,
                ce: score(&load("sigma_ce.bin")?, &truth)?,
            },
        ));
    }
    Ok(io::metrics_csv(&rows))
}

fn metrics(a: &MetricsArgs) -> Res<()> {
    let table = metrics_table(&a.truth, &a.results)?;
    match &a.out {
        Some(p) => fs::write(p, table).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn preview(a: &PreviewArgs) -> Res<()> {
    let mut rec = Recorder::new("preview", None);
    let image = read_image(&a.input, &mut rec)?;
    let scale = match &a.scale {
        Some(s) => parse_scale(s)?,
        None => truth_scale(&image),
    };
    write_png(&a.out, &image, scale, &mut rec)
}
