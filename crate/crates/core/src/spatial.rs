//! Spatial queries: exact nearest-neighbour over point sets, closest points
//! on triangle meshes, and signed distance with pseudonormal sign tests.

use std::collections::HashMap;

use crate::error::Result;
use crate::mesh::{Aabb, TriMesh};
use crate::Vec3;

const LEAF_SIZE: usize = 8;

/// Static kd-tree over a point set.
///
/// The tree is implicit: `order` is partitioned so that the median of every
/// range splits it along `depth % 3`.
#[derive(Debug, Clone)]
pub struct PointIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
}

impl PointIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_kd(points, &mut order, 0);
        PointIndex {
            points: points.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index and distance of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_in(query, 0, self.order.len(), 0, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_in(&self, q: &Vec3, lo: usize, hi: usize, depth: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                consider(i, (self.points[i] - q).norm_squared(), best);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 3;
        let pivot = self.order[mid];
        let diff = q[axis] - self.points[pivot][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, near.0, near.1, depth + 1, best);
        consider(pivot, (self.points[pivot] - q).norm_squared(), best);
        if diff * diff <= best.1 {
            self.nearest_in(q, far.0, far.1, depth + 1, best);
        }
    }

    /// Minimizes `cost(i)` over the points, given that
    /// `cost(i) >= |points[i] - center| - slack` for every `i`. Ties go to the
    /// lowest index.
    pub fn nearest_by(&self, center: &Vec3, slack: f64, cost: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_by_in(center, slack, &cost, 0, self.order.len(), 0, &mut best);
        Some(best)
    }

    #[allow(clippy::too_many_arguments)]
    fn nearest_by_in(
        &self,
        c: &Vec3,
        slack: f64,
        cost: &impl Fn(usize) -> f64,
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut (usize, f64),
    ) {
        let consider_cost = |i: usize, best: &mut (usize, f64)| {
            let v = cost(i);
            if v < best.1 || (v == best.1 && i < best.0) {
                *best = (i, v);
            }
        };
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                consider_cost(i, best);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 3;
        let pivot = self.order[mid];
        let diff = c[axis] - self.points[pivot][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_by_in(c, slack, cost, near.0, near.1, depth + 1, best);
        consider_cost(pivot, best);
        if diff.abs() - slack <= best.1 {
            self.nearest_by_in(c, slack, cost, far.0, far.1, depth + 1, best);
        }
    }

    /// Appends every index within `radius` (inclusive) to `out`, unordered.
    pub fn within(&self, query: &Vec3, radius: f64, out: &mut Vec<usize>) {
        if !self.points.is_empty() {
            self.within_in(query, radius * radius, 0, self.order.len(), 0, out);
        }
    }

    fn within_in(&self, q: &Vec3, r2: f64, lo: usize, hi: usize, depth: usize, out: &mut Vec<usize>) {
        if hi - lo <= LEAF_SIZE {
            out.extend(
                self.order[lo..hi]
                    .iter()
                    .filter(|&&i| (self.points[i] - q).norm_squared() <= r2),
            );
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = depth % 3;
        let pivot = self.order[mid];
        let diff = q[axis] - self.points[pivot][axis];
        if (self.points[pivot] - q).norm_squared() <= r2 {
            out.push(pivot);
        }
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, lo, mid, depth + 1, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, mid + 1, hi, depth + 1, out);
        }
    }
}

fn consider(i: usize, d2: f64, best: &mut (usize, f64)) {
    if d2 < best.1 || (d2 == best.1 && i < best.0) {
        *best = (i, d2);
    }
}

fn build_kd(points: &[Vec3], order: &mut [usize], depth: usize) {
    if order.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (left, rest) = order.split_at_mut(mid);
    build_kd(points, left, depth + 1);
    build_kd(points, &mut rest[1..], depth + 1);
}

/// Linear-scan nearest neighbour with the same tie-break as [`PointIndex::nearest`].
pub fn nearest_brute_force(points: &[Vec3], query: &Vec3) -> Option<(usize, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        consider(i, (p - query).norm_squared(), &mut best);
    }
    (best.0 != usize::MAX).then(|| (best.0, best.1.sqrt()))
}

/// Where on a triangle the closest point landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangleFeature {
    Vertex(usize),
    /// Edge from corner `k` to corner `(k + 1) % 3`.
    Edge(usize),
    Face,
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, TriangleFeature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, TriangleFeature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, TriangleFeature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, TriangleFeature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, TriangleFeature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, TriangleFeature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, TriangleFeature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, TriangleFeature::Face)
}

#[derive(Debug, Clone)]
struct BvhNode {
    aabb: Aabb,
    /// Leaf: `start..start+count` into `faces`. Inner: children at `start`, `start + 1`... see build.
    start: usize,
    count: usize,
    right: usize,
}

/// Bounding-volume hierarchy over a subset of a mesh's faces.
#[derive(Debug, Clone)]
struct TriangleBvh {
    nodes: Vec<BvhNode>,
    faces: Vec<usize>,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub face: usize,
    pub point: Vec3,
    pub feature: TriangleFeature,
    pub distance: f64,
}

impl TriangleBvh {
    fn new(mesh: &TriMesh, mut faces: Vec<usize>) -> Self {
        let boxes: Vec<Aabb> = mesh
            .faces
            .iter()
            .map(|f| Aabb::from_points(f.iter().map(|&i| &mesh.vertices[i])))
            .collect();
        let mut nodes = Vec::with_capacity(2 * faces.len() / LEAF_SIZE + 1);
        let n = faces.len();
        build_bvh(&boxes, &mut faces, 0, n, &mut nodes);
        TriangleBvh { nodes, faces }
    }

    fn closest(&self, mesh: &TriMesh, q: &Vec3, best: &mut Option<SurfacePoint>) {
        let mut stack = vec![0usize];
        let mut best_d2 = best.map_or(f64::INFINITY, |b| b.distance * b.distance);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.aabb.distance_squared(q) > best_d2 {
                continue;
            }
            if node.count > 0 {
                for &fi in &self.faces[node.start..node.start + node.count] {
                    let [a, b, c] = mesh.faces[fi].map(|i| &mesh.vertices[i]);
                    let (point, feature) = closest_point_on_triangle(q, a, b, c);
                    let d2 = (point - q).norm_squared();
                    let better = match best {
                        None => true,
                        Some(prev) => d2 < best_d2 || (d2 == best_d2 && fi < prev.face),
                    };
                    if better {
                        best_d2 = d2;
                        *best = Some(SurfacePoint {
                            face: fi,
                            point,
                            feature,
                            distance: d2.sqrt(),
                        });
                    }
                }
            } else {
                let (l, r) = (n + 1, node.right);
                let dl = self.nodes[l].aabb.distance_squared(q);
                let dr = self.nodes[r].aabb.distance_squared(q);
                // visit nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
    }
}

fn build_bvh(boxes: &[Aabb], faces: &mut [usize], start: usize, end: usize, nodes: &mut Vec<BvhNode>) {
    let aabb = faces[start..end]
        .iter()
        .fold(Aabb::empty(), |acc, &f| acc.merge(&boxes[f]));
    let me = nodes.len();
    nodes.push(BvhNode {
        aabb,
        start,
        count: end - start,
        right: 0,
    });
    if end - start <= LEAF_SIZE {
        return;
    }
    let centroid = |f: usize| (boxes[f].min + boxes[f].max) * 0.5;
    let extent = aabb.extent();
    let axis = extent.imax();
    let mid = start + (end - start) / 2;
    faces[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroid(a)[axis]
            .total_cmp(&centroid(b)[axis])
            .then(a.cmp(&b))
    });
    nodes[me].count = 0;
    build_bvh(boxes, faces, start, mid, nodes);
    nodes[me].right = nodes.len();
    build_bvh(boxes, faces, mid, end, nodes);
}

/// Unsigned closest-point queries against any triangle mesh.
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    mesh: TriMesh,
    bvh: TriangleBvh,
}

impl SurfaceIndex {
    pub fn new(mesh: &TriMesh) -> Self {
        SurfaceIndex {
            bvh: TriangleBvh::new(mesh, (0..mesh.faces.len()).collect()),
            mesh: mesh.clone(),
        }
    }

    pub fn closest(&self, query: &Vec3) -> Option<SurfacePoint> {
        let mut best = None;
        self.bvh.closest(&self.mesh, query, &mut best);
        best
    }

    pub fn distance(&self, query: &Vec3) -> f64 {
        self.closest(query).map_or(f64::INFINITY, |s| s.distance)
    }
}

/// Signed distance to a closed mesh, negative inside.
///
/// The sign comes from the angle-weighted pseudonormal of the closest
/// feature. A mesh made of several closed components is treated as their
/// union: the result is the minimum over components, which is exact outside
/// and correctly negative inside.
#[derive(Debug, Clone)]
pub struct SignedDistance {
    mesh: TriMesh,
    components: Vec<TriangleBvh>,
    vertex_pseudonormals: Vec<Vec3>,
    edge_pseudonormals: HashMap<(usize, usize), Vec3>,
    aabb: Aabb,
}

impl SignedDistance {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        mesh.check_watertight()?;
        let mut vertex_pseudonormals = vec![Vec3::zeros(); mesh.vertices.len()];
        let mut edge_pseudonormals: HashMap<(usize, usize), Vec3> = HashMap::new();
        for (fi, f) in mesh.faces.iter().enumerate() {
            let n = mesh.face_normals[fi];
            for k in 0..3 {
                let (v, next, prev) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let e1 = (mesh.vertices[next] - mesh.vertices[v]).normalize();
                let e2 = (mesh.vertices[prev] - mesh.vertices[v]).normalize();
                let angle = e1.dot(&e2).clamp(-1.0, 1.0).acos();
                vertex_pseudonormals[v] += n * angle;
                *edge_pseudonormals
                    .entry((v.min(next), v.max(next)))
                    .or_insert_with(Vec3::zeros) += n;
            }
        }
        let components = mesh
            .connected_components()
            .into_iter()
            .map(|faces| TriangleBvh::new(mesh, faces))
            .collect();
        Ok(SignedDistance {
            mesh: mesh.clone(),
            components,
            vertex_pseudonormals,
            edge_pseudonormals,
            aabb: mesh.aabb(),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn aabb(&self) -> Aabb {
        self.aabb
    }

    pub fn eval(&self, query: &Vec3) -> f64 {
        self.components
            .iter()
            .map(|bvh| {
                let mut best = None;
                bvh.closest(&self.mesh, query, &mut best);
                let s = best.expect("component has faces");
                let sign = self.pseudonormal(&s).dot(&(query - s.point));
                if sign < 0.0 {
                    -s.distance
                } else {
                    s.distance
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, query: &Vec3) -> bool {
        self.aabb.distance_squared(query) == 0.0 && self.eval(query) < 0.0
    }

    fn pseudonormal(&self, s: &SurfacePoint) -> Vec3 {
        let f = self.mesh.faces[s.face];
        match s.feature {
            TriangleFeature::Face => self.mesh.face_normals[s.face],
            TriangleFeature::Vertex(k) => self.vertex_pseudonormals[f[k]],
            TriangleFeature::Edge(k) => {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                self.edge_pseudonormals[&(a.min(b), a.max(b))]
            }
        }
    }
}

/// Signed distance from `query` to a closed mesh (negative inside).
pub fn signed_distance(query: &Vec3, mesh: &TriMesh) -> Result<f64> {
    Ok(SignedDistance::new(mesh)?.eval(query))
}

/// Regular occupancy grid of cell centres.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    /// Grid covering `bounds` padded by one cell on every side.
    pub fn covering(bounds: &Aabb, cell_size: f64) -> Self {
        let origin = bounds.min - Vec3::repeat(cell_size);
        let ext = bounds.extent();
        let dims = [0, 1, 2].map(|c| (ext[c] / cell_size).ceil() as usize + 2);
        VoxelGrid {
            origin,
            cell_size,
            dims,
            occupancy: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    /// Occupied volume in cm^3.
    pub fn volume_cm3(&self) -> f64 {
        self.occupied_count() as f64 * self.cell_size.powi(3) / 1000.0
    }

    /// Marks cells whose centres lie inside both solids.
    pub fn intersection(a: &SignedDistance, b: &SignedDistance, cell_size: f64) -> Option<Self> {
        use rayon::prelude::*;
        let bounds = a.aabb().intersection(&b.aabb())?;
        let mut grid = VoxelGrid::covering(&bounds, cell_size);
        let [nx, ny, _] = grid.dims;
        let slab = nx * ny;
        let template = grid.clone();
        grid.occupancy
            .par_chunks_mut(slab)
            .enumerate()
            .for_each(|(k, cells)| {
                for j in 0..ny {
                    for i in 0..nx {
                        let p = template.center(i, j, k);
                        cells[j * nx + i] = a.contains(&p) && b.contains(&p);
                    }
                }
            });
        Some(grid)
    }
}

/// Volume (cm^3) of the region inside both closed meshes, by voxel counting.
pub fn intersection_volume(a: &TriMesh, b: &TriMesh, cell_size: f64) -> Result<f64> {
    let a = SignedDistance::new(a)?;
    let b = SignedDistance::new(b)?;
    Ok(intersection_volume_sdf(&a, &b, cell_size))
}

pub fn intersection_volume_sdf(a: &SignedDistance, b: &SignedDistance, cell_size: f64) -> f64 {
    VoxelGrid::intersection(a, b, cell_size).map_or(0.0, |g| g.volume_cm3())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    #[test]
    fn nearest_identity_and_pair() {
        let pts = vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)];
        let idx = PointIndex::new(&pts);
        assert_eq!(idx.nearest(&Vec3::new(4.0, 0.0, 0.0)), Some((0, 4.0)));
        assert_eq!(idx.nearest(&pts[1]), Some((1, 0.0)));
        // equidistant: lowest index wins
        assert_eq!(idx.nearest(&Vec3::new(5.0, 0.0, 0.0)).unwrap().0, 0);
        assert!(PointIndex::new(&[]).nearest(&Vec3::zeros()).is_none());
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec3> = (0..1000).map(|_| random_point(&mut rng, 50.0)).collect();
        let idx = PointIndex::new(&pts);
        for _ in 0..100 {
            let q = random_point(&mut rng, 60.0);
            assert_eq!(idx.nearest(&q), nearest_brute_force(&pts, &q));
        }
    }

    #[test]
    fn nearest_ties_on_duplicates() {
        let pts = vec![Vec3::new(1.0, 1.0, 1.0); 40];
        let idx = PointIndex::new(&pts);
        assert_eq!(idx.nearest(&Vec3::zeros()).unwrap().0, 0);
    }

    #[test]
    fn within_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> = (0..500).map(|_| random_point(&mut rng, 20.0)).collect();
        let idx = PointIndex::new(&pts);
        for _ in 0..50 {
            let q = random_point(&mut rng, 20.0);
            let mut got = Vec::new();
            idx.within(&q, 6.0, &mut got);
            got.sort_unstable();
            let want: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - q).norm() <= 6.0)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn cube_center_signed_distance() {
        let cube = primitives::cube(10.0);
        assert!((signed_distance(&Vec3::zeros(), &cube).unwrap() + 10.0).abs() < 1e-12);
        let on = Vec3::new(10.0, 3.0, -2.0);
        assert!(signed_distance(&on, &cube).unwrap().abs() < 1e-9);
        let corner_out = Vec3::new(11.0, 11.0, 11.0);
        assert!((signed_distance(&corner_out, &cube).unwrap() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sphere_signed_distance_matches_analytic() {
        let sphere = primitives::icosphere(10.0, 4);
        let sdf = SignedDistance::new(&sphere).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = random_point(&mut rng, 20.0);
            let exact = p.norm() - 10.0;
            let got = sdf.eval(&p);
            assert!((got - exact).abs() < 0.2, "{p:?}: {got} vs {exact}");
            if exact.abs() > 0.2 {
                assert_eq!(got.signum(), exact.signum());
            }
        }
    }

    #[test]
    fn open_mesh_rejected() {
        let patch = primitives::grid_patch(5.0, 2);
        assert!(SignedDistance::new(&patch).is_err());
        // unsigned queries still work
        let s = SurfaceIndex::new(&patch);
        assert!((s.distance(&Vec3::new(0.0, 0.0, 3.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn union_of_components_is_inside() {
        let a = primitives::cube(10.0);
        let b = a.transformed(|v| v + Vec3::new(15.0, 0.0, 0.0)).unwrap();
        let sdf = SignedDistance::new(&TriMesh::merge(&[a, b]).unwrap()).unwrap();
        // inside both, inside only the second, outside
        assert!(sdf.eval(&Vec3::new(7.0, 0.0, 0.0)) < 0.0);
        assert!(sdf.eval(&Vec3::new(20.0, 0.0, 0.0)) < 0.0);
        assert!((sdf.eval(&Vec3::new(30.0, 0.0, 0.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cube_volumes() {
        let a = primitives::cube(10.0);
        let v = intersection_volume(&a, &a, 1.0).unwrap();
        assert!((v - 8.0).abs() / 8.0 < 0.05, "{v}");
        let b = a.transformed(|v| v + Vec3::new(10.0, 0.0, 0.0)).unwrap();
        let v = intersection_volume(&a, &b, 1.0).unwrap();
        assert!((v - 4.0).abs() / 4.0 < 0.05, "{v}");
        let far = a.transformed(|v| v + Vec3::new(25.0, 0.0, 0.0)).unwrap();
        assert_eq!(intersection_volume(&a, &far, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        let (p, f) = closest_point_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!((p, f), (a, TriangleFeature::Vertex(0)));
        let (p, f) = closest_point_on_triangle(&Vec3::new(0.5, -1.0, 2.0), &a, &b, &c);
        assert_eq!(f, TriangleFeature::Edge(0));
        assert!((p - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        let (p, f) = closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert_eq!(f, TriangleFeature::Edge(1));
        assert!((p - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        let (_, f) = closest_point_on_triangle(&Vec3::new(0.2, 0.2, 1.0), &a, &b, &c);
        assert_eq!(f, TriangleFeature::Face);
    }
}
