//! Indexed triangle meshes with per-vertex and per-face normals.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::Vec3;

/// Faces with twice-area below this are rejected as degenerate (mm^2).
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        (min.x <= max.x && min.y <= max.y && min.z <= max.z).then_some(Aabb { min, max })
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let d = (self.min - p).sup(&(p - self.max)).sup(&Vec3::zeros());
        d.norm_squared()
    }
}

/// Triangle mesh in millimetres. Faces are counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_normals: Vec<Vec3>,
    pub face_normals: Vec<Vec3>,
}

impl TriMesh {
    /// Validates indices, rejects degenerate faces and computes normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (fi, f) in faces.iter().enumerate() {
            for &index in f {
                if index >= vertices.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index,
                        count: vertices.len(),
                    });
                }
            }
            let area = face_cross(&vertices, f).norm() * 0.5;
            if area < MIN_FACE_AREA || f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace { face: fi, area });
            }
        }
        let (vertex_normals, face_normals) = compute_normals(&vertices, &faces);
        Ok(TriMesh {
            vertices,
            faces,
            vertex_normals,
            face_normals,
        })
    }

    /// Same topology, new vertex positions. Degenerate faces are tolerated
    /// here because they contribute zero weight to the vertex normals.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        Error::check_len("vertex count", self.vertices.len(), vertices.len())?;
        let (vertex_normals, face_normals) = compute_normals(&vertices, &self.faces);
        Ok(TriMesh {
            vertices,
            faces: self.faces.clone(),
            vertex_normals,
            face_normals,
        })
    }

    /// The chosen vertices with their normals and no faces.
    pub fn vertex_subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::VertexIndexOutOfRange { index, count: self.len() });
        }
        Ok(TriMesh {
            vertices: indices.iter().map(|&i| self.vertices[i]).collect(),
            faces: Vec::new(),
            vertex_normals: indices.iter().map(|&i| self.vertex_normals[i]).collect(),
            face_normals: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        self.with_vertices(self.vertices.iter().map(f).collect())
    }

    pub fn face_area(&self, face: usize) -> f64 {
        face_cross(&self.vertices, &self.faces[face]).norm() * 0.5
    }

    /// Undirected edge -> number of incident faces.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge must be shared by exactly two faces.
    pub fn check_watertight(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let counts = self.edge_counts();
        let mut bad: Vec<_> = counts.into_iter().filter(|&(_, c)| c != 2).collect();
        bad.sort_unstable();
        match bad.first() {
            Some(&((a, b), c)) => Err(Error::NotWatertight(a, b, c)),
            None => Ok(()),
        }
    }

    /// Face indices grouped by edge-connected component, ordered by lowest face index.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for f in &self.faces {
            let r0 = find(&mut parent, f[0]);
            for &v in &f[1..] {
                let r = find(&mut parent, v);
                if r != r0 {
                    let (lo, hi) = (r.min(r0), r.max(r0));
                    parent[hi] = lo;
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            let root = find(&mut parent, f[0]);
            let next = groups.len();
            let g = *slot.entry(root).or_insert(next);
            if g == groups.len() {
                groups.push(Vec::new());
            }
            groups[g].push(fi);
        }
        groups
    }

    /// Vertex -> incident faces.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                out[v].push(fi);
            }
        }
        out
    }

    /// Enclosed volume in mm^3 by the divergence theorem (closed meshes only).
    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Concatenates meshes into one vertex/face list.
    pub fn merge(parts: &[TriMesh]) -> Result<TriMesh> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for part in parts {
            let offset = vertices.len();
            vertices.extend_from_slice(&part.vertices);
            faces.extend(part.faces.iter().map(|f| f.map(|i| i + offset)));
        }
        TriMesh::new(vertices, faces)
    }
}

/// `(b - a) x (c - a)`: twice the area-weighted face normal.
pub fn face_cross(vertices: &[Vec3], f: &[usize; 3]) -> Vec3 {
    let a = vertices[f[0]];
    (vertices[f[1]] - a).cross(&(vertices[f[2]] - a))
}

/// Area-weighted vertex normals and unit face normals.
///
/// A vertex whose incident faces all have zero area keeps a zero normal.
pub fn compute_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut accum = vec![Vec3::zeros(); vertices.len()];
    let mut face_normals = Vec::with_capacity(faces.len());
    for f in faces {
        let c = face_cross(vertices, f);
        for &v in f {
            accum[v] += c;
        }
        let n = c.norm();
        face_normals.push(if n > 0.0 { c / n } else { Vec3::zeros() });
    }
    let vertex_normals = accum
        .into_iter()
        .map(|m| {
            let n = m.norm();
            if n > 0.0 {
                m / n
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    (vertex_normals, face_normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;

    #[test]
    fn single_triangle_normals() {
        let m = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for n in m.vertex_normals.iter().chain(&m.face_normals) {
            assert!((n - Vec3::z()).norm() < 1e-15);
        }
    }

    #[test]
    fn cube_corner_normals() {
        let m = primitives::cube(10.0);
        assert_eq!(m.vertices.len(), 8);
        for (v, n) in m.vertices.iter().zip(&m.vertex_normals) {
            let expected = v.map(f64::signum).normalize();
            assert!((n - expected).norm() < 1e-12, "{v:?} {n:?}");
        }
        assert!((m.volume() - 8000.0).abs() < 1e-9);
        m.check_watertight().unwrap();
    }

    #[test]
    fn icosphere_normals_match_radial() {
        // area weighting on the midpoint icosphere converges at O(edge length)
        let m = primitives::icosphere(10.0, 7);
        for (v, n) in m.vertices.iter().zip(&m.vertex_normals) {
            assert!((n - v.normalize()).norm() < 1e-3);
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_face_rejected() {
        let err = TriMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            vec![[0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateFace { face: 0, .. }));
        let err = TriMesh::new(vec![Vec3::zeros()], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::FaceIndexOutOfRange { .. }));
    }

    #[test]
    fn open_mesh_not_watertight() {
        let mut m = primitives::cube(10.0);
        m.faces.pop();
        assert!(matches!(m.check_watertight(), Err(Error::NotWatertight(..))));
    }

    #[test]
    fn normals_invariant_under_vertex_permutation() {
        let m = primitives::icosphere(5.0, 1);
        let n = m.vertices.len();
        // reverse the vertex order and remap faces
        let perm: Vec<usize> = (0..n).rev().collect();
        let vertices: Vec<Vec3> = perm.iter().map(|&i| m.vertices[i]).collect();
        let faces: Vec<[usize; 3]> = m.faces.iter().map(|f| f.map(|i| n - 1 - i)).collect();
        let p = TriMesh::new(vertices, faces).unwrap();
        for (new_i, &old_i) in perm.iter().enumerate() {
            assert!((p.vertex_normals[new_i] - m.vertex_normals[old_i]).norm() < 1e-12);
        }
    }

    #[test]
    fn components_of_merged_meshes() {
        let a = primitives::cube(5.0);
        let b = a.transformed(|v| v + Vec3::new(20.0, 0.0, 0.0)).unwrap();
        let m = TriMesh::merge(&[a, b]).unwrap();
        let comps = m.connected_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 12);
        assert_eq!(comps[1][0], 12);
    }
}
