//! Structured triangulation of the closed unit disc by concentric rings.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Triangle mesh of the unit disc. Ring `i` (radius `i / rings`) carries
/// `6 i` vertices; neighbouring rings are stitched by merging their angles, so
/// the mesh is conforming and all triangles stay well shaped.
#[derive(Debug, Clone)]
pub struct FemMesh {
    rings: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    ring_start: Vec<usize>,
}

impl FemMesh {
    pub fn disc(rings: usize) -> Result<Self> {
        if rings < 2 {
            return Err(Error::InvalidParameter(format!(
                "disc mesh needs at least 2 rings, got {rings}"
            )));
        }
        let mut vertices = vec![[0.0, 0.0]];
        let mut ring_start = vec![0];
        for i in 1..=rings {
            ring_start.push(vertices.len());
            let r = i as f64 / rings as f64;
            let count = 6 * i;
            for j in 0..count {
                let a = 2.0 * PI * j as f64 / count as f64;
                vertices.push([r * a.cos(), r * a.sin()]);
            }
        }
        let mut triangles = Vec::new();
        // fan around the centre
        for j in 0..6 {
            triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
        }
        for i in 2..=rings {
            let inner = (ring_start[i - 1], 6 * (i - 1));
            let outer = (ring_start[i], 6 * i);
            let (mut a, mut b) = (0usize, 0usize);
            // walk both rings by angle, always advancing the one whose next vertex comes first
            while a < inner.1 || b < outer.1 {
                let next_a = (a + 1) as f64 / inner.1 as f64;
                let next_b = (b + 1) as f64 / outer.1 as f64;
                let ia = inner.0 + a % inner.1;
                let ib = outer.0 + b % outer.1;
                if b < outer.1 && (a >= inner.1 || next_b <= next_a) {
                    triangles.push([ia, ib, outer.0 + (b + 1) % outer.1]);
                    b += 1;
                } else {
                    triangles.push([ia, ib, inner.0 + (a + 1) % inner.1]);
                    a += 1;
                }
            }
        }
        let mesh = Self {
            rings,
            vertices,
            triangles,
            ring_start,
        };
        debug_assert!(mesh.triangles.iter().all(|t| mesh.signed_area(t) > 0.0));
        Ok(mesh)
    }

    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Indices of the boundary ring, ordered by angle starting at `theta = 0`.
    pub fn boundary(&self) -> std::ops::Range<usize> {
        self.ring_start[self.rings]..self.vertices.len()
    }

    pub fn boundary_angle(&self, vertex: usize) -> f64 {
        let b = self.boundary();
        2.0 * PI * (vertex - b.start) as f64 / b.len() as f64
    }

    pub fn signed_area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: &[usize; 3]) -> [f64; 2] {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}
