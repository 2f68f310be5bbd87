//! Piecewise-linear finite elements for the Neumann conductivity problem.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use super::mesh::FemMesh;
use crate::error::{Error, Result};
use crate::phantoms::{ConductivityImage, PhantomSpec};

/// Three-point Gauss rule on `[0, 1]`.
const GAUSS: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Per-triangle conductivity, one value per mesh triangle.
pub fn triangle_sigma_from_image(image: &ConductivityImage, mesh: &FemMesh) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| {
            let [x, y] = mesh.centroid(t);
            image.sample_nearest(x, y)
        })
        .collect()
}

/// Per-triangle conductivity evaluated from the exact phantom geometry.
pub fn triangle_sigma_from_spec(spec: &PhantomSpec, mesh: &FemMesh) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| {
            let [x, y] = mesh.centroid(t);
            spec.value_at(x, y)
        })
        .collect()
}

/// Factored stiffness matrix for one conductivity. The constant null space is
/// removed by fixing the potential at the centre vertex; traces are returned
/// with their boundary mean subtracted, so the pin never shows in the output.
pub struct NeumannSolver<'a> {
    mesh: &'a FemMesh,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for NeumannSolver<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannSolver").field("rings", &self.mesh.rings()).finish()
    }
}

impl<'a> NeumannSolver<'a> {
    pub fn new(mesh: &'a FemMesh, tri_sigma: &[f64]) -> Result<Self> {
        if tri_sigma.len() != mesh.triangles().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} conductivity values for {} triangles",
                tri_sigma.len(),
                mesh.triangles().len()
            )));
        }
        if let Some(v) = tri_sigma.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "conductivity must be positive and finite, got {v}"
            )));
        }
        let nv = mesh.vertices().len();
        let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
        for (t, &s) in mesh.triangles().iter().zip(tri_sigma) {
            let p = t.map(|i| mesh.vertices()[i]);
            let area = mesh.signed_area(t);
            // gradients of the barycentric hat functions times 2*area
            let g = [
                [p[1][1] - p[2][1], p[2][0] - p[1][0]],
                [p[2][1] - p[0][1], p[0][0] - p[2][0]],
                [p[0][1] - p[1][1], p[1][0] - p[0][0]],
            ];
            for a in 0..3 {
                for b in 0..3 {
                    let (ia, ib) = (t[a], t[b]);
                    if ia == 0 || ib == 0 {
                        continue;
                    }
                    let k = s * (g[a][0] * g[b][0] + g[a][1] * g[b][1]) / (4.0 * area);
                    triplets.push((ib - 1, ia - 1, k));
                }
            }
        }
        triplets.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut merged: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.row == r && last.col == c => last.val += v,
                _ => merged.push(Triplet::new(r, c, v)),
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(nv - 1, nv - 1, &merged)
            .map_err(|e| Error::InvalidParameter(format!("stiffness assembly: {e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Singular(format!("stiffness factorization: {e:?}")))?;
        Ok(Self { mesh, llt })
    }

    pub fn mesh(&self) -> &FemMesh {
        self.mesh
    }

    /// Consistent load vector `b_i = int g psi_i dtheta` over the boundary
    /// vertices, adjusted to sum to exactly zero.
    pub fn boundary_load<G: Fn(f64) -> f64>(&self, current: G) -> Result<Vec<f64>> {
        let range = self.mesh.boundary();
        let nb = range.len();
        let dtheta = 2.0 * std::f64::consts::PI / nb as f64;
        let mut load = vec![0.0; nb];
        let mut abs_total = 0.0;
        for j in 0..nb {
            let t0 = j as f64 * dtheta;
            for &(x, w) in &GAUSS {
                let g = current(t0 + x * dtheta) * w * dtheta;
                load[j] += g * (1.0 - x);
                load[(j + 1) % nb] += g * x;
                abs_total += g.abs();
            }
        }
        let total: f64 = load.iter().sum();
        if !total.is_finite() {
            return Err(Error::NonFinite("boundary current".into()));
        }
        if total.abs() > 1e-8 * abs_total.max(1e-300) {
            return Err(Error::InvalidParameter(format!(
                "boundary current must have zero mean, integral is {total:.3e}"
            )));
        }
        let shift = total / nb as f64;
        load.iter_mut().for_each(|v| *v -= shift);
        Ok(load)
    }

    /// Solves for several boundary loads at once; returns the full vertex
    /// potentials (mean-free on the boundary) for each load.
    pub fn solve_loads(&self, loads: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let nv = self.mesh.vertices().len();
        let b0 = self.mesh.boundary().start;
        let mut rhs = Mat::<f64>::zeros(nv - 1, loads.len());
        for (c, load) in loads.iter().enumerate() {
            for (j, v) in load.iter().enumerate() {
                rhs[(b0 + j - 1, c)] = *v;
            }
        }
        let sol = self.llt.solve(&rhs);
        let mut out = Vec::with_capacity(loads.len());
        for c in 0..loads.len() {
            let mut u = vec![0.0; nv];
            for i in 1..nv {
                u[i] = sol[(i - 1, c)];
            }
            let mean = u[b0..].iter().sum::<f64>() / (nv - b0) as f64;
            u.iter_mut().for_each(|v| *v -= mean);
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("finite element potential".into()));
            }
            out.push(u);
        }
        Ok(out)
    }

    /// Boundary trace of the potential for a single current pattern.
    pub fn boundary_trace<G: Fn(f64) -> f64>(&self, current: G) -> Result<Vec<f64>> {
        let load = self.boundary_load(current)?;
        let u = self.solve_loads(&[load])?.pop().unwrap_or_default();
        Ok(u[self.mesh.boundary()].to_vec())
    }
}

/// Solves the Neumann problem for an image conductivity and returns the
/// interior potential (all mesh vertices) and the boundary trace.
pub fn solve_neumann<G: Fn(f64) -> f64>(
    sigma: &ConductivityImage,
    current: G,
    mesh: &FemMesh,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tri = triangle_sigma_from_image(sigma, mesh);
    let solver = NeumannSolver::new(mesh, &tri)?;
    let load = solver.boundary_load(current)?;
    let u = solver.solve_loads(&[load])?.pop().unwrap_or_default();
    let trace = u[mesh.boundary()].to_vec();
    Ok((u, trace))
}

/// Loads of all basis currents, computed in parallel in column order.
pub(crate) fn basis_loads(
    solver: &NeumannSolver<'_>,
    basis: &super::trig::TrigBasis,
) -> Result<Vec<Vec<f64>>> {
    (0..basis.len())
        .into_par_iter()
        .map(|i| solver.boundary_load(|t| basis.eval(i, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn homogeneous_trace_is_scaled_current() {
        let mesh = FemMesh::disc(24).unwrap();
        let sigma = vec![1.0; mesh.triangles().len()];
        let solver = NeumannSolver::new(&mesh, &sigma).unwrap();
        let trace = solver.boundary_trace(|t| (2.0 * t).cos()).unwrap();
        for (j, v) in trace.iter().enumerate() {
            let t = mesh.boundary_angle(mesh.boundary().start + j);
            assert!((v - (2.0 * t).cos() / 2.0).abs() < 5e-3, "{v}");
        }
    }

    #[test]
    fn constant_sigma_scales_trace() {
        let mesh = FemMesh::disc(12).unwrap();
        let one = NeumannSolver::new(&mesh, &vec![1.0; mesh.triangles().len()]).unwrap();
        let three = NeumannSolver::new(&mesh, &vec![3.0; mesh.triangles().len()]).unwrap();
        let a = one.boundary_trace(|t| t.sin()).unwrap();
        let b = three.boundary_trace(|t| t.sin()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x / 3.0 - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_incompatible_current() {
        let mesh = FemMesh::disc(8).unwrap();
        let solver = NeumannSolver::new(&mesh, &vec![1.0; mesh.triangles().len()]).unwrap();
        assert!(solver.boundary_load(|t| 1.0 + t.cos()).is_err());
        assert!(solver.boundary_load(|t| (3.0 * t).sin() + PI.sin()).is_ok());
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let mesh = FemMesh::disc(4).unwrap();
        let mut s = vec![1.0; mesh.triangles().len()];
        s[3] = 0.0;
        assert!(NeumannSolver::new(&mesh, &s).is_err());
    }
}
