//! TV-enhanced D-bar reconstruction for 2-D electrical impedance tomography.
//!
//! The crate simulates boundary data for piecewise-constant conductivities on
//! the unit disc and reconstructs them by alternating D-bar inversion,
//! multi-label total-variation segmentation, sinogram-driven contrast
//! enhancement and extension of the scattering transform.

pub mod beltrami;
pub mod boundary_cgo;
pub mod contrast;
pub mod dbar;
pub mod error;
pub mod fft;
pub mod forward;
pub mod grids;
pub mod io;
pub mod linalg;
pub mod phantoms;
pub mod pipeline;
pub mod scattering;
pub mod tv_seg;

pub use error::{Error, Result};
pub use forward::{BoundaryOpMatrix, FemMesh, OpKind, TrigBasis};
pub use grids::{KGrid, ZGrid};
pub use phantoms::{ConductivityImage, PhantomSpec, Shape};

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
