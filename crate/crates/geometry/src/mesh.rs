//! Triangle meshes, exact nearest-surface queries, and an OBJ subset reader.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::GeometryError;
use worldgrip_core::ObjectTemplate;

/// Meshes below this face count use brute-force queries; larger ones get a
/// bounding-volume hierarchy.
const BVH_FACE_THRESHOLD: usize = 1000;

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn from_template(template: &ObjectTemplate) -> Result<Self, GeometryError> {
        let vertices = template
            .vertices
            .iter()
            .map(|v| Vector3::new(v[0], v[1], v[2]))
            .collect();
        TriMesh::new(vertices, template.faces.clone())
    }

    /// Parses the ASCII OBJ subset: `v x y z` and `f i j k` lines with
    /// 1-based indices (`f i/…/…` forms accepted). Everything else ignored.
    pub fn parse_obj(text: &str) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(|p| {
                            p.parse::<f64>().map_err(|e| GeometryError::MeshParse {
                                line: lineno + 1,
                                reason: e.to_string(),
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if coords.len() != 3 {
                        return Err(GeometryError::MeshParse {
                            line: lineno + 1,
                            reason: "vertex needs 3 coordinates".into(),
                        });
                    }
                    vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = parts
                        .map(|p| {
                            let first = p.split('/').next().unwrap_or(p);
                            first
                                .parse::<usize>()
                                .map_err(|e| GeometryError::MeshParse {
                                    line: lineno + 1,
                                    reason: e.to_string(),
                                })
                        })
                        .collect::<Result<_, _>>()?;
                    if idx.len() < 3 {
                        return Err(GeometryError::MeshParse {
                            line: lineno + 1,
                            reason: "face needs at least 3 indices".into(),
                        });
                    }
                    // Fan-triangulate polygons.
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0] - 1, idx[k] - 1, idx[k + 1] - 1]);
                    }
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, faces)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for f in &self.faces {
            out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        out
    }

    pub fn triangle(&self, i: usize) -> [Vector3<f64>; 3] {
        let f = self.faces[i];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    pub fn face_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let mut sum = Vector3::zeros();
        for v in &self.vertices {
            sum += v;
        }
        sum / self.vertices.len() as f64
    }

    /// Deterministic area-weighted surface samples.
    ///
    /// A mesh without faces degrades to cycling its vertices, which keeps
    /// point-cloud templates usable.
    pub fn surface_samples(&self, n: usize, seed: u64) -> Vec<Vector3<f64>> {
        if self.faces.is_empty() {
            return (0..n).map(|i| self.vertices[i % self.vertices.len()]).collect();
        }
        let mut cumulative = Vec::with_capacity(self.faces.len());
        let mut acc = 0.0;
        for i in 0..self.faces.len() {
            acc += self.face_area(i);
            cumulative.push(acc);
        }
        let total = acc.max(1e-300);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let pick = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c < pick).min(self.faces.len() - 1);
                let [a, b, c] = self.triangle(idx);
                let mut u: f64 = rng.random();
                let mut v: f64 = rng.random();
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                a + (b - a) * u + (c - a) * v
            })
            .collect()
    }
}

/// Closest point on triangle `[a, b, c]` to `p` (Ericson, Real-Time
/// Collision Detection, 5.1.5).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    fn merge(&mut self, other: &Aabb) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(other.min[k]);
            self.max[k] = self.max[k].max(other.max[k]);
        }
    }

    fn distance_sq(&self, p: &Vector3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Debug)]
enum BvhNode {
    Leaf {
        bounds: Aabb,
        faces: Vec<usize>,
    },
    Inner {
        bounds: Aabb,
        left: Box<BvhNode>,
        right: Box<BvhNode>,
    },
}

/// Read-only nearest-surface query structure over one mesh.
#[derive(Debug)]
pub struct MeshQuery {
    mesh: TriMesh,
    bvh: Option<BvhNode>,
}

impl MeshQuery {
    pub fn new(mesh: TriMesh) -> Self {
        let bvh = if mesh.faces.len() > BVH_FACE_THRESHOLD {
            Some(build_bvh(&mesh))
        } else {
            None
        };
        MeshQuery { mesh, bvh }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Closest surface point to `p`. A faceless mesh answers with its
    /// nearest vertex.
    pub fn closest_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        if self.mesh.faces.is_empty() {
            let mut best = self.mesh.vertices[0];
            let mut best_d = (p - best).norm_squared();
            for v in &self.mesh.vertices[1..] {
                let d = (p - v).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = *v;
                }
            }
            return best;
        }
        match &self.bvh {
            None => {
                let mut best = Vector3::zeros();
                let mut best_d = f64::INFINITY;
                for i in 0..self.mesh.faces.len() {
                    let [a, b, c] = self.mesh.triangle(i);
                    let q = closest_point_on_triangle(p, &a, &b, &c);
                    let d = (p - q).norm_squared();
                    if d < best_d {
                        best_d = d;
                        best = q;
                    }
                }
                best
            }
            Some(root) => {
                let mut best = Vector3::zeros();
                let mut best_d = f64::INFINITY;
                query_bvh(&self.mesh, root, p, &mut best_d, &mut best);
                best
            }
        }
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        (p - self.closest_point(p)).norm()
    }
}

fn build_bvh(mesh: &TriMesh) -> BvhNode {
    let indices: Vec<usize> = (0..mesh.faces.len()).collect();
    build_node(mesh, indices)
}

fn face_bounds(mesh: &TriMesh, i: usize) -> Aabb {
    let mut b = Aabb::empty();
    for v in mesh.triangle(i) {
        b.grow(&v);
    }
    b
}

fn build_node(mesh: &TriMesh, mut faces: Vec<usize>) -> BvhNode {
    let mut bounds = Aabb::empty();
    for &f in &faces {
        bounds.merge(&face_bounds(mesh, f));
    }
    if faces.len() <= 8 {
        return BvhNode::Leaf { bounds, faces };
    }
    let extent = bounds.max - bounds.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let centroid = |f: usize| {
        let [a, b, c] = mesh.triangle(f);
        (a[axis] + b[axis] + c[axis]) / 3.0
    };
    faces.sort_by(|&x, &y| centroid(x).partial_cmp(&centroid(y)).unwrap());
    let right = faces.split_off(faces.len() / 2);
    BvhNode::Inner {
        bounds,
        left: Box::new(build_node(mesh, faces)),
        right: Box::new(build_node(mesh, right)),
    }
}

fn query_bvh(
    mesh: &TriMesh,
    node: &BvhNode,
    p: &Vector3<f64>,
    best_d: &mut f64,
    best: &mut Vector3<f64>,
) {
    match node {
        BvhNode::Leaf { faces, .. } => {
            for &i in faces {
                let [a, b, c] = mesh.triangle(i);
                let q = closest_point_on_triangle(p, &a, &b, &c);
                let d = (p - q).norm_squared();
                if d < *best_d {
                    *best_d = d;
                    *best = q;
                }
            }
        }
        BvhNode::Inner { left, right, .. } => {
            let (lb, rb) = (node_bounds(left), node_bounds(right));
            let dl = lb.distance_sq(p);
            let dr = rb.distance_sq(p);
            let (first, second, d_first, d_second) = if dl <= dr {
                (left, right, dl, dr)
            } else {
                (right, left, dr, dl)
            };
            if d_first < *best_d {
                query_bvh(mesh, first, p, best_d, best);
            }
            if d_second < *best_d {
                query_bvh(mesh, second, p, best_d, best);
            }
        }
    }
}

fn node_bounds(node: &BvhNode) -> Aabb {
    match node {
        BvhNode::Leaf { bounds, .. } => *bounds,
        BvhNode::Inner { bounds, .. } => *bounds,
    }
}

/// Axis-aligned box mesh centered at the origin, 12 triangles.
pub fn box_mesh(sx: f64, sy: f64, sz: f64) -> TriMesh {
    let (x, y, z) = (sx / 2.0, sy / 2.0, sz / 2.0);
    let v = vec![
        Vector3::new(-x, -y, -z),
        Vector3::new(x, -y, -z),
        Vector3::new(x, y, -z),
        Vector3::new(-x, y, -z),
        Vector3::new(-x, -y, z),
        Vector3::new(x, -y, z),
        Vector3::new(x, y, z),
        Vector3::new(-x, y, z),
    ];
    let f = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [1, 2, 6],
        [1, 6, 5],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh::new(v, f).unwrap()
}

/// Icosphere with `subdivisions` refinement levels.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints = std::collections::BTreeMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((vertices[a] + vertices[b]) / 2.0).normalize();
                vertices.push(m);
                vertices.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            new_faces.push([f[0], ab, ca]);
            new_faces.push([f[1], bc, ab]);
            new_faces.push([f[2], ca, bc]);
            new_faces.push([ab, bc, ca]);
        }
        faces = new_faces;
    }
    for v in vertices.iter_mut() {
        *v *= radius;
    }
    TriMesh::new(vertices, faces).unwrap()
}
