//! Contrast enhancement of a segmented image by a two-parameter rescaling
//! chosen to match the measured CGO sinogram.

mod direct;

pub use direct::{direct_minimize, DirectResult, DirectSample, FAILED_VALUE};

use serde::{Deserialize, Serialize};

use crate::boundary_cgo::{build_sinogram, sinogram_discrepancy, Sinogram};
use crate::error::{Error, Result};
use crate::forward::{assemble_nd, nd_to_dn, FemMesh, TrigBasis};
use crate::phantoms::ConductivityImage;

/// A priori bounds `c < min sigma`, `max sigma < C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ContrastBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower < 1.0) || !(upper > 1.0) || !upper.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "contrast bounds need 0 < c < 1 < C, got c = {lower}, C = {upper}"
            )));
        }
        Ok(Self { lower, upper })
    }
}

/// `sigma_{s,t} = 1 + t (C-1) f / M` where `f = sigma - 1 > 0`,
/// `1 + s (c-1) f / m` where `f < 0`, and 1 elsewhere.
#[derive(Debug, Clone)]
pub struct ContrastFamily {
    base: ConductivityImage,
    bounds: ContrastBounds,
    min_f: f64,
    max_f: f64,
    flat_tol: f64,
}

impl ContrastFamily {
    /// `flat_tol` is the smallest `|f|` extreme that keeps a branch active.
    pub fn new(sigma_tv: &ConductivityImage, bounds: ContrastBounds, flat_tol: f64) -> Result<Self> {
        sigma_tv.check_finite()?;
        let bounds = ContrastBounds::new(bounds.lower, bounds.upper)?;
        let min_f = sigma_tv.min_on_disc() - 1.0;
        let max_f = sigma_tv.max_on_disc() - 1.0;
        let fam = Self {
            base: sigma_tv.clone(),
            bounds,
            min_f,
            max_f,
            flat_tol: flat_tol.max(0.0),
        };
        if !fam.s_active() && !fam.t_active() {
            return Err(Error::Degenerate(format!(
                "image is within {} of 1 on the disc; nothing to enhance",
                fam.flat_tol
            )));
        }
        Ok(fam)
    }

    pub fn bounds(&self) -> ContrastBounds {
        self.bounds
    }

    /// `(m, M)`.
    pub fn extremes(&self) -> (f64, f64) {
        (self.min_f, self.max_f)
    }

    pub fn s_active(&self) -> bool {
        self.min_f < -self.flat_tol
    }

    pub fn t_active(&self) -> bool {
        self.max_f > self.flat_tol
    }

    pub fn value(&self, sigma: f64, s: f64, t: f64) -> f64 {
        let f = sigma - 1.0;
        // written as an interpolation so that w = 1 lands exactly on the bound
        if f > 0.0 && self.t_active() {
            let w = t * (f / self.max_f);
            (1.0 - w) + w * self.bounds.upper
        } else if f < 0.0 && self.s_active() {
            let w = s * (f / self.min_f);
            (1.0 - w) + w * self.bounds.lower
        } else {
            1.0
        }
    }

    pub fn member(&self, s: f64, t: f64) -> Result<ConductivityImage> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("(s, t) = ({s}, {t}) outside [0,1]^2")));
        }
        let disc: Vec<f64> = self.base.disc_values().iter().map(|&v| self.value(v, s, t)).collect();
        ConductivityImage::from_disc_values(self.base.grid().clone(), &disc, 1.0)
    }
}

/// Forward model used to score candidates.
#[derive(Debug, Clone)]
pub struct ContrastConfig {
    pub rho: f64,
    pub budget: usize,
    pub order: usize,
    pub mesh_rings: usize,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            rho: 2.0,
            budget: 60,
            order: 16,
            mesh_rings: 64,
        }
    }
}

/// Scores `(s, t)` by the relative sinogram discrepancy against measured data.
pub struct CandidateEvaluator<'a> {
    family: &'a ContrastFamily,
    measured: &'a Sinogram,
    basis: TrigBasis,
    mesh: FemMesh,
}

impl<'a> CandidateEvaluator<'a> {
    pub fn new(family: &'a ContrastFamily, measured: &'a Sinogram, cfg: &ContrastConfig) -> Result<Self> {
        if measured.norm() == 0.0 {
            return Err(Error::Degenerate("measured sinogram is identically zero".into()));
        }
        if measured.size != 2 * cfg.order + 1 {
            return Err(Error::ShapeMismatch(format!(
                "measured sinogram is {0}x{0}, order {1} needs {2}",
                measured.size,
                cfg.order,
                2 * cfg.order + 1
            )));
        }
        Ok(Self {
            family,
            measured,
            basis: TrigBasis::new(cfg.order)?,
            mesh: FemMesh::disc(cfg.mesh_rings)?,
        })
    }

    pub fn evaluate(&self, s: f64, t: f64) -> Result<f64> {
        let sigma = self.family.member(s, t)?;
        let run = || -> Result<f64> {
            let dn = nd_to_dn(&assemble_nd(&sigma, &self.basis, &self.mesh)?)?;
            let sino = build_sinogram(&dn, self.measured.rho)?;
            sinogram_discrepancy(&sino, self.measured)
        };
        run().map_err(|e| e.in_stage(&format!("contrast candidate (s, t) = ({s:.6}, {t:.6})")))
    }
}

#[derive(Debug, Clone)]
pub struct ContrastResult {
    pub s: f64,
    pub t: f64,
    pub discrepancy: f64,
    pub image: ConductivityImage,
    pub search: DirectResult,
}

/// Runs DIRECT over `(s, t)` and returns `sigma_CE = sigma_{s0,t0}`.
pub fn enhance(family: &ContrastFamily, measured: &Sinogram, cfg: &ContrastConfig) -> Result<ContrastResult> {
    let eval = CandidateEvaluator::new(family, measured, cfg)?;
    let search = direct_minimize(|s, t| eval.evaluate(s, t), cfg.budget)?;
    if search.value >= FAILED_VALUE {
        return Err(Error::NoConvergence("every contrast candidate failed".into()));
    }
    let image = family.member(search.s, search.t)?;
    Ok(ContrastResult {
        s: search.s,
        t: search.t,
        discrepancy: search.value,
        image,
        search,
    })
}
