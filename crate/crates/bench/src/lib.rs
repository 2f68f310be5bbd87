//! Shared inputs for the benchmarks.

use std::sync::Arc;

use tvdbar_core::phantoms::build_phantom;
use tvdbar_core::{ConductivityImage, PhantomSpec, ZGrid};

/// Heart-and-lungs phantom on a `2^ell` grid with half width 2.3.
pub fn heart_and_lungs(ell: u32) -> ConductivityImage {
    let grid = Arc::new(ZGrid::new(ell, 2.3).expect("valid grid"));
    build_phantom(&PhantomSpec::heart_and_lungs(), grid).expect("valid phantom")
}
