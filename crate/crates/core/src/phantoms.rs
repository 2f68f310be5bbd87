//! Piecewise-constant conductivity phantoms and the Beltrami coefficient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::ZGrid;

/// Real conductivity sampled on a [`ZGrid`]. Values outside the unit disc
/// carry the background value.
#[derive(Debug, Clone)]
pub struct ConductivityImage {
    grid: Arc<ZGrid>,
    values: Vec<f64>,
    background: f64,
}

impl ConductivityImage {
    pub fn new(grid: Arc<ZGrid>, values: Vec<f64>, background: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "image has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            background,
        })
    }

    pub fn constant(grid: Arc<ZGrid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self {
            grid,
            values,
            background: value,
        }
    }

    /// Builds an image from disc values only; exterior points take `background`.
    pub fn from_disc_values(grid: Arc<ZGrid>, disc: &[f64], background: f64) -> Result<Self> {
        if disc.len() != grid.disc_points().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} disc values for {} disc points",
                disc.len(),
                grid.disc_points().len()
            )));
        }
        let mut values = vec![background; grid.len()];
        for (&idx, &v) in grid.disc_points().iter().zip(disc) {
            values[idx] = v;
        }
        Ok(Self {
            grid,
            values,
            background,
        })
    }

    pub fn grid(&self) -> &Arc<ZGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    /// Values at the disc points, in [`ZGrid::disc_points`] order.
    pub fn disc_values(&self) -> Vec<f64> {
        self.grid.disc_points().iter().map(|&i| self.values[i]).collect()
    }

    /// Nearest-pixel sample; points outside the closed disc return the background.
    pub fn sample_nearest(&self, x: f64, y: f64) -> f64 {
        if x * x + y * y > 1.0 {
            return self.background;
        }
        let idx = self.grid.nearest(x, y);
        if self.grid.disc_mask()[idx] {
            self.values[idx]
        } else {
            self.background
        }
    }

    pub fn min_on_disc(&self) -> f64 {
        self.grid
            .disc_points()
            .iter()
            .map(|&i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_on_disc(&self) -> f64 {
        self.grid
            .disc_points()
            .iter()
            .map(|&i| self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image value at index {i}")));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &ConductivityImage) -> bool {
        self.grid.same_as(&other.grid)
    }
}

/// One region of a piecewise-constant phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Rotated ellipse with semi-axes `a` (along the rotated x axis) and `b`.
    Ellipse {
        cx: f64,
        cy: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
        value: f64,
    },
    /// Horizontal layer `y_min <= y < y_max` clipped to `|z| < radius`.
    Strip {
        y_min: f64,
        y_max: f64,
        radius: f64,
        value: f64,
    },
    /// Ring `r_inner <= |z| < r_outer`.
    Annulus {
        r_inner: f64,
        r_outer: f64,
        value: f64,
    },
}

impl Shape {
    pub fn value(&self) -> f64 {
        match *self {
            Shape::Ellipse { value, .. } | Shape::Strip { value, .. } | Shape::Annulus { value, .. } => value,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Ellipse {
                cx,
                cy,
                a,
                b,
                angle,
                ..
            } => {
                let (s, c) = angle.sin_cos();
                let dx = x - cx;
                let dy = y - cy;
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                (u / a).powi(2) + (v / b).powi(2) < 1.0
            }
            Shape::Strip {
                y_min,
                y_max,
                radius,
                ..
            } => y >= y_min && y < y_max && x * x + y * y < radius * radius,
            Shape::Annulus {
                r_inner, r_outer, ..
            } => {
                let r2 = x * x + y * y;
                r2 >= r_inner * r_inner && r2 < r_outer * r_outer
            }
        }
    }

    /// Radius of a disc centred at the origin that contains the shape.
    fn outer_radius(&self) -> f64 {
        match *self {
            Shape::Ellipse { cx, cy, a, b, .. } => cx.hypot(cy) + a.max(b),
            Shape::Strip { radius, .. } => radius,
            Shape::Annulus { r_outer, .. } => r_outer,
        }
    }

    fn validate(&self) -> Result<()> {
        let v = self.value();
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "region value must be positive, got {v}"
            )));
        }
        let ok = match *self {
            Shape::Ellipse { a, b, .. } => a > 0.0 && b > 0.0,
            Shape::Strip {
                y_min,
                y_max,
                radius,
                ..
            } => y_max > y_min && radius > 0.0,
            Shape::Annulus {
                r_inner, r_outer, ..
            } => r_outer > r_inner && r_inner >= 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("degenerate shape {self:?}")));
        }
        if self.outer_radius() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "shape {self:?} reaches the boundary |z| = 1"
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant phantom: a background plus regions, later regions
/// overriding earlier ones where they overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub background: f64,
    #[serde(default)]
    pub shapes: Vec<Shape>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.background > 0.0) || !self.background.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "background must be positive, got {}",
                self.background
            )));
        }
        self.shapes.iter().try_for_each(Shape::validate)
    }

    /// Conductivity at `(x, y)`.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.shapes
            .iter()
            .rev()
            .find(|s| s.contains(x, y))
            .map(Shape::value)
            .unwrap_or(self.background)
    }

    /// Heart-and-lungs phantom: two elliptic lungs (0.5) and a circular heart (2.0)
/// in a unit background.
    pub fn heart_and_lungs() -> Self {
        Self {
            name: Some("heart-and-lungs".into()),
            background: 1.0,
            shapes: vec![
                Shape::Ellipse {
                    cx: -0.45,
                    cy: 0.05,
                    a: 0.25,
                    b: 0.45,
                    angle: -0.15,
                    value: 0.5,
                },
                Shape::Ellipse {
                    cx: 0.45,
                    cy: 0.05,
                    a: 0.25,
                    b: 0.45,
                    angle: 0.15,
                    value: 0.5,
                },
                Shape::Ellipse {
                    cx: 0.0,
                    cy: -0.4,
                    a: 0.25,
                    b: 0.25,
                    angle: 0.0,
                    value: 2.0,
                },
            ],
        }
    }

    /// Stratified oil pipeline: oil (1.2), water (2.0) and sand (0.3) layers
    /// inside a pipe wall of conductivity 1.0.
    pub fn pipeline() -> Self {
        let inner = 0.8;
        Self {
            name: Some("pipeline".into()),
            background: 1.0,
            shapes: vec![
                Shape::Annulus {
                    r_inner: inner,
                    r_outer: 0.95,
                    value: 1.0,
                },
                Shape::Strip {
                    y_min: 0.2,
                    y_max: inner,
                    radius: inner,
                    value: 1.2,
                },
                Shape::Strip {
                    y_min: -0.35,
                    y_max: 0.2,
                    radius: inner,
                    value: 2.0,
                },
                Shape::Strip {
                    y_min: -inner,
                    y_max: -0.35,
                    radius: inner,
                    value: 0.3,
                },
            ],
        }
    }
}

/// Samples a phantom on the grid. Every pixel equals one region value or the background.
pub fn build_phantom(spec: &PhantomSpec, grid: Arc<ZGrid>) -> Result<ConductivityImage> {
    spec.validate()?;
    let values = (0..grid.len())
        .map(|i| {
            let z = grid.point(i);
            if z.norm_sqr() <= 1.0 {
                spec.value_at(z.re, z.im)
            } else {
                spec.background
            }
        })
        .collect();
    ConductivityImage::new(grid, values, spec.background)
}

/// `mu = (1 - sigma) / (1 + sigma)`, pointwise over the full grid.
pub fn beltrami_mu(sigma: &ConductivityImage) -> Result<Vec<f64>> {
    sigma
        .values()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s > 0.0 && s.is_finite() {
                Ok((1.0 - s) / (1.0 + s))
            } else {
                Err(Error::InvalidParameter(format!(
                    "conductivity must be positive, got {s} at index {i}"
                )))
            }
        })
        .collect()
}

/// Inverse of [`beltrami_mu`].
pub fn sigma_from_mu(mu: f64) -> f64 {
    (1.0 - mu) / (1.0 + mu)
}

/// Divides by `sigma0` so that a background of `sigma0` becomes 1.
pub fn rescale_background(sigma: &ConductivityImage, sigma0: f64) -> Result<ConductivityImage> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "background scale must be positive, got {sigma0}"
        )));
    }
    let values = sigma.values().iter().map(|v| v / sigma0).collect();
    ConductivityImage::new(sigma.grid().clone(), values, sigma.background() / sigma0)
}

/// Multiplies back by `sigma0`; inverse of [`rescale_background`].
pub fn unrescale_background(sigma: &ConductivityImage, sigma0: f64) -> Result<ConductivityImage> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "background scale must be positive, got {sigma0}"
        )));
    }
    let values = sigma.values().iter().map(|v| v * sigma0).collect();
    ConductivityImage::new(sigma.grid().clone(), values, sigma.background() * sigma0)
}
