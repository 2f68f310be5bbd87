//! The iterative reconstruction: D-bar, TV segmentation, contrast
//! enhancement and extension of the scattering transform.

mod metrics;

pub use metrics::{relative_l2, ssim, stop_check, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::beltrami::scattering_from_mu;
use crate::boundary_cgo::{build_sinogram, scattering_from_dn};
use crate::contrast::{enhance, ContrastBounds, ContrastConfig, ContrastFamily};
use crate::dbar::reconstruct_sigma;
use crate::error::{Error, Result};
use crate::forward::{add_noise_on_nodes, assemble_nd_from_spec, nd_to_dn, BoundaryOpMatrix, FemMesh, TrigBasis};
use crate::grids::{KGrid, ZGrid};
use crate::phantoms::{beltrami_mu, ConductivityImage, PhantomSpec};
use crate::scattering::ScatteringField;
use crate::tv_seg::{segment, SegmentConfig};

/// Constant-conductivity ring imposed on every reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeWall {
    pub inner_radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Radius of reliable scattering data.
    pub r: f64,
    /// Radius after extension.
    pub r_tilde: f64,
    pub iterations: usize,
    pub regions: usize,
    pub lambda: f64,
    pub edge_strength: f64,
    pub smoothing: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub noise: f64,
    pub seed: u64,
    pub ell: u32,
    pub s: f64,
    pub m: u32,
    pub order: usize,
    pub mesh_rings: usize,
    pub rho: f64,
    pub budget: usize,
    /// Grow the extension radius by this much per iteration instead of jumping to `r_tilde`.
    pub delta_r: Option<f64>,
    /// Stop once the relative change of `sigma_CE` falls below this.
    pub stop_threshold: Option<f64>,
    /// Images within this of a constant are passed through segmentation and enhancement.
    pub flat_tolerance: f64,
    pub pipe_wall: Option<PipeWall>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            r: 5.0,
            r_tilde: 10.0,
            iterations: 3,
            regions: 4,
            lambda: 0.1,
            edge_strength: 0.0,
            smoothing: 2.0,
            lower_bound: 0.3,
            upper_bound: 2.5,
            noise: 0.0,
            seed: 0,
            ell: 7,
            s: 2.3,
            m: 6,
            order: 16,
            mesh_rings: 64,
            rho: 2.0,
            budget: 60,
            delta_r: None,
            stop_threshold: None,
            flat_tolerance: 0.01,
            pipe_wall: None,
        }
    }
}

impl PipelineConfig {
    /// Settings for the heart-and-lungs phantom.
    pub fn heart_and_lungs() -> Self {
        Self::default()
    }

    /// Settings for the pipeline phantom at 0.75% noise.
    pub fn pipeline() -> Self {
        Self {
            r: 4.0,
            r_tilde: 6.6,
            regions: 5,
            lambda: 0.5,
            lower_bound: 0.1,
            upper_bound: 2.5,
            noise: 0.0075,
            pipe_wall: Some(PipeWall { inner_radius: 0.8, value: 1.0 }),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.r > 1.0) {
            return bad(format!("R must exceed 1, got {}", self.r));
        }
        if !(self.r_tilde > self.r) {
            return bad(format!("R~ must exceed R, got {} <= {}", self.r_tilde, self.r));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho < self.r) {
            return bad(format!("sinogram radius must lie in (0, R), got {}", self.rho));
        }
        if !(self.s > 2.0) {
            return bad(format!("z-grid half width must exceed 2, got {}", self.s));
        }
        if !(self.noise >= 0.0) {
            return bad(format!("noise level must be >= 0, got {}", self.noise));
        }
        if let Some(d) = self.delta_r {
            if !(d > 0.0) {
                return bad(format!("delta_r must be positive, got {d}"));
            }
        }
        if let Some(w) = self.pipe_wall {
            if !(w.inner_radius > 0.0 && w.inner_radius < 1.0 && w.value > 0.0) {
                return bad("pipe wall needs 0 < inner radius < 1 and positive value".into());
            }
        }
        ContrastBounds::new(self.lower_bound, self.upper_bound)?;
        ZGrid::new(self.ell, self.s)?;
        KGrid::new(self.m, self.r, self.r_tilde)?;
        TrigBasis::new(self.order)?;
        FemMesh::disc(self.mesh_rings)?;
        if self.budget < 9 {
            return bad(format!("DIRECT budget must be at least 9, got {}", self.budget));
        }
        Ok(())
    }

    pub fn zgrid(&self) -> Result<Arc<ZGrid>> {
        Ok(Arc::new(ZGrid::new(self.ell, self.s)?))
    }

    pub fn kgrid(&self) -> Result<Arc<KGrid>> {
        Ok(Arc::new(KGrid::new(self.m, self.r, self.r_tilde)?))
    }

    fn segment_config(&self) -> SegmentConfig {
        SegmentConfig {
            regions: self.regions,
            lambda: self.lambda,
            edge_strength: self.edge_strength,
            smoothing: self.smoothing,
            seed: self.seed,
            ..SegmentConfig::default()
        }
    }

    fn contrast_config(&self) -> ContrastConfig {
        ContrastConfig {
            rho: self.rho,
            budget: self.budget,
            order: self.order,
            mesh_rings: self.mesh_rings,
        }
    }

    /// Outer radius of the scattering data used at iteration `j >= 2`.
    fn extension_radius(&self, j: usize) -> f64 {
        match self.delta_r {
            Some(d) => (self.r + (j - 1) as f64 * d).min(self.r_tilde),
            None => self.r_tilde,
        }
    }
}

/// Noisy DN data of a phantom: ND by FEM on the exact geometry, noise on the
/// mesh boundary vertices, inversion.
pub fn simulate_dn(spec: &PhantomSpec, cfg: &PipelineConfig) -> Result<BoundaryOpMatrix> {
    let basis = TrigBasis::new(cfg.order)?;
    let mesh = FemMesh::disc(cfg.mesh_rings)?;
    let nd = assemble_nd_from_spec(spec, &basis, &mesh)?;
    let nd = add_noise_on_nodes(&nd, cfg.noise, cfg.seed, mesh.boundary().len())?;
    nd_to_dn(&nd)
}

/// `1` inside `R - 1`, `p(|k| - (R - 1))` with `p(t) = 1 - 3t^2 + 2t^3` up to `R`, then 0.
pub fn blend_chi(k: num_complex::Complex64, r: f64) -> f64 {
    let t = k.norm() - (r - 1.0);
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - 3.0 * t * t + 2.0 * t * t * t
    }
}

/// Blends `tau0` with Beltrami scattering data of `sigma_ce` computed on
/// `R - 1 <= |k| < outer`; zero beyond `outer`.
pub fn extend_scattering(tau0: &ScatteringField, sigma_ce: &ConductivityImage, r: f64, outer: f64) -> Result<ScatteringField> {
    let kgrid = tau0.grid().clone();
    let mu = beltrami_mu(sigma_ce)?;
    let mask = kgrid.annulus_mask(r - 1.0, outer);
    let tilde = scattering_from_mu(sigma_ce.grid().clone(), &mu, kgrid.clone(), &mask)?;
    Ok(blend_fields(tau0, &tilde, r, outer))
}

/// `chi tau0 + (1 - chi) tilde` on `|k| < outer`.
pub fn blend_fields(tau0: &ScatteringField, tilde: &ScatteringField, r: f64, outer: f64) -> ScatteringField {
    let kgrid = tau0.grid().clone();
    let mut out = ScatteringField::zeros(kgrid.clone());
    for i in 0..kgrid.len() {
        let k = kgrid.point(i);
        if k.norm() < outer {
            let chi = blend_chi(k, r);
            out.set(i, chi * tau0.tau()[i] + (1.0 - chi) * tilde.tau()[i]);
        }
    }
    out
}

/// Relative L2 error and SSIM against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub l2: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub db: StageMetrics,
    pub tv: StageMetrics,
    pub ce: StageMetrics,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub j: usize,
    pub cutoff: f64,
    pub tau: ScatteringField,
    pub sigma_db: ConductivityImage,
    pub sigma_tv: ConductivityImage,
    pub sigma_ce: ConductivityImage,
    /// `(s0, t0, discrepancy)`, absent when enhancement was skipped.
    pub contrast: Option<(f64, f64, f64)>,
    pub metrics: Option<IterationMetrics>,
    /// Wall-clock seconds of the D-bar, TV and contrast stages.
    pub seconds: [f64; 3],
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub tau0: Option<ScatteringField>,
    pub records: Vec<IterationRecord>,
    /// Set when a stage failed; `records` then holds the completed iterations.
    pub failure: Option<Error>,
}

fn spread(image: &ConductivityImage) -> f64 {
    image.max_on_disc() - image.min_on_disc()
}

fn impose_wall(image: ConductivityImage, wall: Option<PipeWall>) -> Result<ConductivityImage> {
    let Some(w) = wall else { return Ok(image) };
    let grid = image.grid().clone();
    let mut values = image.values().to_vec();
    for &i in grid.disc_points() {
        if grid.point(i).norm() >= w.inner_radius {
            values[i] = w.value;
        }
    }
    ConductivityImage::new(grid, values, image.background())
}

fn stage_metrics(image: &ConductivityImage, truth: &ConductivityImage) -> Result<StageMetrics> {
    Ok(StageMetrics {
        l2: relative_l2(image, truth)?,
        ssim: ssim(image, truth)?,
    })
}

/// Runs the iteration on measured DN data. With `truth` every stage is scored.
pub fn run_pipeline(dn: &BoundaryOpMatrix, cfg: &PipelineConfig, truth: Option<&ConductivityImage>) -> PipelineOutcome {
    let mut outcome = PipelineOutcome {
        tau0: None,
        records: Vec::new(),
        failure: None,
    };
    if let Err(e) = run_into(dn, cfg, truth, &mut outcome) {
        log::error!("pipeline aborted: {e}");
        outcome.failure = Some(e);
    }
    outcome
}

fn run_into(
    dn: &BoundaryOpMatrix,
    cfg: &PipelineConfig,
    truth: Option<&ConductivityImage>,
    out: &mut PipelineOutcome,
) -> Result<()> {
    cfg.validate()?;
    if dn.order != cfg.order {
        return Err(Error::ShapeMismatch(format!(
            "DN data of order {} but config order {}",
            dn.order, cfg.order
        )));
    }
    let zgrid = cfg.zgrid()?;
    let kgrid = cfg.kgrid()?;
    if let Some(t) = truth {
        if !t.grid().same_as(&zgrid) {
            return Err(Error::ShapeMismatch("truth image is not on the configured z-grid".into()));
        }
    }
    let tau0 = scattering_from_dn(dn, kgrid.clone(), cfg.r).map_err(|e| e.in_stage("scattering transform"))?;
    out.tau0 = Some(tau0.clone());
    let measured = build_sinogram(dn, cfg.rho).map_err(|e| e.in_stage("measured sinogram"))?;
    let bounds = ContrastBounds::new(cfg.lower_bound, cfg.upper_bound)?;

    let mut field = tau0.clone();
    let mut cutoff = cfg.r;
    for j in 1..=cfg.iterations {
        let clock = Instant::now();
        let db = reconstruct_sigma(&field, zgrid.clone(), cutoff).map_err(|e| e.in_stage(&format!("D-bar j={j}")))?;
        let sigma_db = impose_wall(db.sigma, cfg.pipe_wall)?;
        let t_db = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let sigma_tv = if spread(&sigma_db) < cfg.flat_tolerance {
            log::info!("j={j}: D-bar image is flat, segmentation skipped");
            sigma_db.clone()
        } else {
            let seg = segment(&sigma_db, &cfg.segment_config()).map_err(|e| e.in_stage(&format!("TV j={j}")))?;
            impose_wall(seg.image, cfg.pipe_wall)?
        };
        let t_tv = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let (sigma_ce, contrast) = match ContrastFamily::new(&sigma_tv, bounds, cfg.flat_tolerance) {
            Ok(family) => {
                let res = enhance(&family, &measured, &cfg.contrast_config())
                    .map_err(|e| e.in_stage(&format!("contrast j={j}")))?;
                (impose_wall(res.image, cfg.pipe_wall)?, Some((res.s, res.t, res.discrepancy)))
            }
            Err(Error::Degenerate(msg)) => {
                log::info!("j={j}: {msg}");
                (ConductivityImage::constant(zgrid.clone(), 1.0), None)
            }
            Err(e) => return Err(e.in_stage(&format!("contrast j={j}"))),
        };
        let t_ce = clock.elapsed().as_secs_f64();

        let metrics = match truth {
            Some(t) => Some(IterationMetrics {
                db: stage_metrics(&sigma_db, t)?,
                tv: stage_metrics(&sigma_tv, t)?,
                ce: stage_metrics(&sigma_ce, t)?,
            }),
            None => None,
        };
        if let Some(m) = &metrics {
            log::info!(
                "j={j} cutoff={cutoff:.2}: DB {:.4}/{:.4} TV {:.4}/{:.4} CE {:.4}/{:.4}",
                m.db.l2, m.db.ssim, m.tv.l2, m.tv.ssim, m.ce.l2, m.ce.ssim
            );
        }
        let converged = match (cfg.stop_threshold, out.records.last()) {
            (Some(th), Some(prev)) => stop_check(&sigma_ce, &prev.sigma_ce, th)?,
            _ => false,
        };
        out.records.push(IterationRecord {
            j,
            cutoff,
            tau: field.clone(),
            sigma_db,
            sigma_tv,
            sigma_ce: sigma_ce.clone(),
            contrast,
            metrics,
            seconds: [t_db, t_tv, t_ce],
        });
        if j == cfg.iterations || converged {
            break;
        }
        let outer = cfg.extension_radius(j + 1);
        field = extend_scattering(&tau0, &sigma_ce, cfg.r, outer).map_err(|e| e.in_stage(&format!("extension j={j}")))?;
        cutoff = outer;
    }
    Ok(())
}
