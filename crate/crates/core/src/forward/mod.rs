//! Simulated EIT measurements: Neumann-to-Dirichlet and Dirichlet-to-Neumann
//! matrices in the trigonometric basis.

mod fem;
mod mesh;
mod noise;
mod trig;

pub use fem::{
    solve_neumann, triangle_sigma_from_image, triangle_sigma_from_spec, NeumannSolver,
};
pub use mesh::FemMesh;
pub use noise::{add_noise, add_noise_on_nodes, column_node_values};
pub use trig::TrigBasis;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::phantoms::{ConductivityImage, PhantomSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    /// Neumann-to-Dirichlet, `2N x 2N`.
    Nd,
    /// Dirichlet-to-Neumann, `(2N+1) x (2N+1)` with a zero first row and column.
    Dn,
}

/// Boundary operator matrix in the trigonometric basis, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOpMatrix {
    pub kind: OpKind,
    pub order: usize,
    pub matrix: DenseMatrix,
    pub noise: f64,
    pub seed: Option<u64>,
    pub mesh_rings: Option<usize>,
}

/// JSON header stored next to a binary matrix dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOpHeader {
    pub kind: OpKind,
    pub order: usize,
    pub size: usize,
    pub noise: f64,
    pub seed: Option<u64>,
    pub mesh_rings: Option<usize>,
}

impl BoundaryOpMatrix {
    pub fn new(kind: OpKind, order: usize, matrix: DenseMatrix) -> Result<Self> {
        let expected = match kind {
            OpKind::Nd => 2 * order,
            OpKind::Dn => 2 * order + 1,
        };
        if matrix.n() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{kind:?} matrix of order {order} must be {expected}x{expected}, got {0}x{0}",
                matrix.n()
            )));
        }
        if matrix.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary operator entries".into()));
        }
        Ok(Self {
            kind,
            order,
            matrix,
            noise: 0.0,
            seed: None,
            mesh_rings: None,
        })
    }

    pub fn header(&self) -> BoundaryOpHeader {
        BoundaryOpHeader {
            kind: self.kind,
            order: self.order,
            size: self.matrix.n(),
            noise: self.noise,
            seed: self.seed,
            mesh_rings: self.mesh_rings,
        }
    }

    pub fn from_header(header: &BoundaryOpHeader, matrix: DenseMatrix) -> Result<Self> {
        let mut op = Self::new(header.kind, header.order, matrix)?;
        op.noise = header.noise;
        op.seed = header.seed;
        op.mesh_rings = header.mesh_rings;
        Ok(op)
    }

    /// The `2N x 2N` block acting on the non-constant basis functions.
    pub fn block(&self) -> DenseMatrix {
        match self.kind {
            OpKind::Nd => self.matrix.clone(),
            OpKind::Dn => {
                let n = 2 * self.order;
                let mut b = DenseMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        b[(i, j)] = self.matrix[(i + 1, j + 1)];
                    }
                }
                b
            }
        }
    }

    /// `||A - A^T||_F / ||A||_F`.
    pub fn asymmetry(&self) -> f64 {
        let f = self.matrix.frobenius();
        if f == 0.0 {
            0.0
        } else {
            self.matrix.sub(&self.matrix.transpose()).frobenius() / f
        }
    }

    /// Multiplies every entry by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            matrix: self.matrix.scale(a),
            ..self.clone()
        }
    }
}

/// `(R)_{m,n} = int (R phi_n) phi_m dtheta` for a per-triangle conductivity.
pub fn assemble_nd_from_triangles(
    tri_sigma: &[f64],
    basis: &TrigBasis,
    mesh: &FemMesh,
) -> Result<BoundaryOpMatrix> {
    let solver = NeumannSolver::new(mesh, tri_sigma)?;
    let loads = fem::basis_loads(&solver, basis)?;
    let potentials = solver.solve_loads(&loads)?;
    let b0 = mesh.boundary().start;
    let n = basis.len();
    let mut r = DenseMatrix::zeros(n);
    // The load vectors are exact integrals of phi_m against the boundary hat
    // functions, so b_m . u_n integrates the piecewise-linear trace exactly.
    for (col, u) in potentials.iter().enumerate() {
        for (row, load) in loads.iter().enumerate() {
            r[(row, col)] = load.iter().zip(&u[b0..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut op = BoundaryOpMatrix::new(OpKind::Nd, basis.order(), r)?;
    op.mesh_rings = Some(mesh.rings());
    Ok(op)
}

/// ND matrix of an image conductivity (nearest-pixel closure at triangle centroids).
pub fn assemble_nd(sigma: &ConductivityImage, basis: &TrigBasis, mesh: &FemMesh) -> Result<BoundaryOpMatrix> {
    sigma.check_finite()?;
    assemble_nd_from_triangles(&fem::triangle_sigma_from_image(sigma, mesh), basis, mesh)
}

/// ND matrix of a phantom evaluated with its exact geometry.
pub fn assemble_nd_from_spec(spec: &PhantomSpec, basis: &TrigBasis, mesh: &FemMesh) -> Result<BoundaryOpMatrix> {
    spec.validate()?;
    assemble_nd_from_triangles(&fem::triangle_sigma_from_spec(spec, mesh), basis, mesh)
}

/// Inverts the ND matrix and borders it with a zero first row and column.
pub fn nd_to_dn(nd: &BoundaryOpMatrix) -> Result<BoundaryOpMatrix> {
    if nd.kind != OpKind::Nd {
        return Err(Error::InvalidParameter("expected an ND matrix".into()));
    }
    let inv = nd.matrix.inverse().map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("ND matrix not invertible ({msg}); noise too large?")),
        other => other,
    })?;
    let n = nd.matrix.n();
    let mut dn = DenseMatrix::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            dn[(i + 1, j + 1)] = inv[(i, j)];
        }
    }
    let mut op = BoundaryOpMatrix::new(OpKind::Dn, nd.order, dn)?;
    op.noise = nd.noise;
    op.seed = nd.seed;
    op.mesh_rings = nd.mesh_rings;
    Ok(op)
}

/// Exact DN matrix of the homogeneous disc, `diag(0, omega_1, ..., omega_2N)`.
pub fn homogeneous_dn(order: usize) -> Result<BoundaryOpMatrix> {
    let basis = TrigBasis::new(order)?;
    let mut m = DenseMatrix::zeros(basis.len() + 1);
    for i in 0..basis.len() {
        m[(i + 1, i + 1)] = basis.omega(i) as f64;
    }
    BoundaryOpMatrix::new(OpKind::Dn, order, m)
}
