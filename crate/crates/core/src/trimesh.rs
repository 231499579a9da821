//! Plain indexed triangle mesh used for export, rasterization, and metrics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::{Point3, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    /// Vertex index triples; winding is preserved as given.
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v as usize >= n) {
                return Err(Error::InvalidConfig(format!("face {i} references a vertex beyond {n}")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        self.faces[i].map(|v| self.vertices[v as usize])
    }

    /// Right-hand normal of face `i`, unnormalized.
    pub fn face_cross(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, i: usize) -> f64 {
        0.5 * self.face_cross(i).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    /// `V - E + F` over vertices referenced by at least one face.
    pub fn euler_characteristic(&self) -> i64 {
        let mut verts = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                verts.insert(a);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        verts.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p + offset).collect(),
            faces: self.faces.clone(),
        }
    }
}
