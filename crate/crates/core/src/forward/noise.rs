//! Relative Gaussian measurement noise on ND matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::trig::TrigBasis;
use super::{BoundaryOpMatrix, OpKind};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Perturbs each column response `R phi_n` by `eta * ||R phi_n||_inf * N_n`,
/// where `N_n` holds one standard normal draw per boundary node.
///
/// The column function is sampled at `nodes` equispaced boundary nodes
/// `theta_j = (j - floor(nodes/2)) 2 pi / nodes`, perturbed there and projected
/// back onto the basis with the trapezoid rule. With `nodes = 2N + 1` these
/// are the measurement nodes; with the vertex count of the forward mesh
/// boundary it is noise on the FEM boundary potentials. Draws are taken column
/// by column, node by node, from a ChaCha8 stream seeded with `seed`.
pub fn add_noise_on_nodes(nd: &BoundaryOpMatrix, eta: f64, seed: u64, nodes: usize) -> Result<BoundaryOpMatrix> {
    if nd.kind != OpKind::Nd {
        return Err(Error::InvalidParameter("noise is added to the ND matrix".into()));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {eta}")));
    }
    if nodes < 2 * nd.order + 1 {
        return Err(Error::InvalidParameter(format!(
            "noise needs at least {} boundary nodes, got {nodes}",
            2 * nd.order + 1
        )));
    }
    if eta == 0.0 {
        let mut out = nd.clone();
        out.seed = Some(seed);
        return Ok(out);
    }
    let basis = TrigBasis::new(nd.order)?;
    let w = 2.0 * std::f64::consts::PI / nodes as f64;
    let half = (nodes / 2) as f64;
    let theta: Vec<f64> = (0..nodes).map(|j| (j as f64 - half) * w).collect();
    let phi = basis.sample(&theta);
    let n = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = nd.matrix.clone();
    for col in 0..n {
        let linf = phi
            .iter()
            .map(|row| (0..n).map(|m| nd.matrix[(m, col)] * row[m]).sum::<f64>().abs())
            .fold(0.0f64, f64::max);
        let draws: Vec<f64> = (0..nodes).map(|_| StandardNormal.sample(&mut rng)).collect();
        for m in 0..n {
            let delta: f64 = draws.iter().zip(&phi).map(|(d, row)| d * row[m]).sum();
            out[(m, col)] += eta * linf * delta * w;
        }
    }
    let mut op = BoundaryOpMatrix::new(OpKind::Nd, nd.order, out)?;
    op.noise = eta;
    op.seed = Some(seed);
    op.mesh_rings = nd.mesh_rings;
    Ok(op)
}

/// [`add_noise_on_nodes`] at the `2N + 1` measurement nodes.
pub fn add_noise(nd: &BoundaryOpMatrix, eta: f64, seed: u64) -> Result<BoundaryOpMatrix> {
    add_noise_on_nodes(nd, eta, seed, 2 * nd.order + 1)
}

/// Column functions of a coefficient matrix sampled at the basis nodes;
/// `out[col][j]` is `sum_m A[m, col] phi_m(theta_j)`.
pub fn column_node_values(a: &DenseMatrix, basis: &TrigBasis) -> Vec<Vec<f64>> {
    let phi = basis.sample(&basis.nodes());
    (0..basis.len())
        .map(|col| {
            phi.iter()
                .map(|row| (0..basis.len()).map(|m| a[(m, col)] * row[m]).sum())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_nd(order: usize) -> BoundaryOpMatrix {
        let basis = TrigBasis::new(order).unwrap();
        let mut m = DenseMatrix::zeros(basis.len());
        for i in 0..basis.len() {
            m[(i, i)] = 1.0 / basis.omega(i) as f64;
        }
        BoundaryOpMatrix::new(OpKind::Nd, order, m).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let nd = diag_nd(16);
        let out = add_noise(&nd, 0.0, 11).unwrap();
        assert_eq!(out.matrix, nd.matrix);
    }

    #[test]
    fn same_seed_same_matrix() {
        let nd = diag_nd(16);
        let a = add_noise(&nd, 0.0075, 7).unwrap();
        let b = add_noise(&nd, 0.0075, 7).unwrap();
        let c = add_noise(&nd, 0.0075, 8).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn rejects_negative_level() {
        assert!(add_noise(&diag_nd(2), -1e-3, 0).is_err());
    }

    #[test]
    fn node_perturbation_matches_draws() {
        // After projection the node-space perturbation is eta * Linf * (N - mean N).
        let nd = diag_nd(16);
        let basis = TrigBasis::new(16).unwrap();
        let eta = 0.001;
        let before = column_node_values(&nd.matrix, &basis);
        let mut ratios = Vec::new();
        for seed in 0..100u64 {
            let noisy = add_noise(&nd, eta, seed).unwrap();
            let after = column_node_values(&noisy.matrix, &basis);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for col in 0..basis.len() {
                let draws: Vec<f64> = (0..33).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mean = draws.iter().sum::<f64>() / 33.0;
                let linf = before[col].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for j in 0..33 {
                    let d = (after[col][j] - before[col][j]) / (eta * linf);
                    assert!((d - (draws[j] - mean)).abs() < 1e-9);
                    ratios.push(d);
                }
            }
        }
        let var = ratios.iter().map(|r| r * r).sum::<f64>() / ratios.len() as f64;
        assert!((var - 32.0 / 33.0).abs() < 0.03, "{var}");
    }
}
