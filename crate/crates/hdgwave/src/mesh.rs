//! Simplicial meshes: triangles in 2D, tetrahedra in 3D.
//!
//! Faces are enumerated once per mesh with a canonical identity (the sorted
//! tuple of vertex indices) and globally ordered by that key, so face
//! numbering does not depend on the order in which cells are listed. The
//! positive side of an interior face is the lower-indexed adjacent cell.
//! Stored normals are unit length and outward of the positive side.

use crate::{Error, Result};
use std::collections::HashMap;

/// Local face `i` of a simplex is the face opposite local vertex `i`.
fn local_face_vertices(dim: usize, cell: &[usize], local: usize) -> Vec<usize> {
    (0..=dim)
        .filter(|&k| k != local)
        .map(|k| cell[k])
        .collect()
}

/// One mesh face with adjacency and geometry.
#[derive(Clone, Debug)]
pub struct Face {
    /// Global vertex indices, sorted ascending (canonical identity).
    pub vertices: Vec<usize>,
    /// Positive-side cell and its local face index.
    pub owner: (usize, usize),
    /// Negative-side cell and local face index; `None` on the boundary.
    pub neighbor: Option<(usize, usize)>,
    /// Unit normal, outward of the owner cell.
    pub normal: [f64; 3],
    /// Face measure (length in 2D, area in 3D).
    pub area: f64,
    /// Boundary tag index into `SimplicialMesh::tag_names`; boundary faces only.
    pub tag: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

/// Simplicial mesh with face connectivity.
#[derive(Debug)]
pub struct SimplicialMesh {
    pub dim: usize,
    vertices: Vec<[f64; 3]>,
    /// Flat cell-vertex list, stride `dim + 1`.
    cells: Vec<usize>,
    pub faces: Vec<Face>,
    /// Per cell, the global face index of each local face (length `dim + 1`).
    cell_faces: Vec<Vec<usize>>,
    pub tag_names: Vec<String>,
}

impl SimplicialMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn interior_face_count(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn boundary_face_count(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn vertex(&self, v: usize) -> [f64; 3] {
        self.vertices[v]
    }

    pub fn cell(&self, e: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[e * s..(e + 1) * s]
    }

    /// Global face indices of cell `e`, in local face order.
    pub fn faces_of_cell(&self, e: usize) -> &[usize] {
        &self.cell_faces[e]
    }

    /// Outward unit normal of face `f` as seen from cell `e`.
    pub fn outward_normal(&self, f: usize, e: usize) -> [f64; 3] {
        let face = &self.faces[f];
        let n = face.normal;
        if face.owner.0 == e {
            n
        } else {
            [-n[0], -n[1], -n[2]]
        }
    }

    /// Columns of the affine reference-to-physical Jacobian (`v_i - v_0`).
    pub fn jacobian(&self, e: usize) -> [[f64; 3]; 3] {
        let cell = self.cell(e);
        let v0 = self.vertices[cell[0]];
        let mut j = [[0.0; 3]; 3];
        for c in 0..self.dim {
            let vc = self.vertices[cell[c + 1]];
            for r in 0..3 {
                j[c][r] = vc[r] - v0[r];
            }
        }
        if self.dim == 2 {
            j[2] = [0.0, 0.0, 1.0];
        }
        j
    }

    pub fn jacobian_det(&self, e: usize) -> f64 {
        let j = self.jacobian(e);
        det3(&j)
    }

    /// Signed volume of cell `e` (area in 2D).
    pub fn cell_volume(&self, e: usize) -> f64 {
        let factor = if self.dim == 2 { 2.0 } else { 6.0 };
        self.jacobian_det(e) / factor
    }

    pub fn cell_centroid(&self, e: usize) -> [f64; 3] {
        let cell = self.cell(e);
        let mut c = [0.0; 3];
        for &v in cell {
            let p = self.vertices[v];
            for d in 0..3 {
                c[d] += p[d];
            }
        }
        for d in 0..3 {
            c[d] /= cell.len() as f64;
        }
        c
    }

    /// Longest edge of cell `e`.
    pub fn cell_diameter(&self, e: usize) -> f64 {
        let cell = self.cell(e);
        let mut h: f64 = 0.0;
        for i in 0..cell.len() {
            for j in (i + 1)..cell.len() {
                h = h.max(dist(self.vertices[cell[i]], self.vertices[cell[j]]));
            }
        }
        h
    }

    pub fn ref_to_phys(&self, e: usize, r: [f64; 3]) -> [f64; 3] {
        let cell = self.cell(e);
        let v0 = self.vertices[cell[0]];
        let j = self.jacobian(e);
        let mut x = v0;
        for c in 0..self.dim {
            for d in 0..3 {
                x[d] += j[c][d] * r[c];
            }
        }
        x
    }

    pub fn phys_to_ref(&self, e: usize, x: [f64; 3]) -> [f64; 3] {
        let cell = self.cell(e);
        let v0 = self.vertices[cell[0]];
        let j = self.jacobian(e);
        let inv = inv3(&j);
        let rhs = [x[0] - v0[0], x[1] - v0[1], x[2] - v0[2]];
        let mut r = [0.0; 3];
        for d in 0..self.dim {
            r[d] = inv[d][0] * rhs[0] + inv[d][1] * rhs[1] + inv[d][2] * rhs[2];
        }
        r
    }

    /// Cell containing `x`, with its reference coordinates. Points on shared
    /// faces resolve to the lowest cell index.
    pub fn find_cell(&self, x: [f64; 3]) -> Option<(usize, [f64; 3])> {
        for e in 0..self.n_cells() {
            let r = self.phys_to_ref(e, x);
            let tol = 1e-10;
            let sum: f64 = r.iter().take(self.dim).sum();
            if r.iter().take(self.dim).all(|&c| c >= -tol) && sum <= 1.0 + tol {
                return Some((e, r));
            }
        }
        None
    }

    pub fn tag_index(&self, name: &str) -> Option<usize> {
        self.tag_names.iter().position(|t| t == name)
    }

    /// Assemble a mesh from raw vertex and cell lists: fixes negatively
    /// oriented cells, builds the face list and checks the manifold property.
    pub fn from_raw(
        dim: usize,
        vertices: Vec<[f64; 3]>,
        cells: Vec<usize>,
        tag_names: Vec<String>,
        boundary_tagger: impl Fn(&[usize], &[[f64; 3]]) -> Option<usize>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Mesh(format!("unsupported dimension {dim}")));
        }
        let stride = dim + 1;
        if cells.len() % stride != 0 {
            return Err(Error::Mesh("cell list length mismatch".into()));
        }
        let n_cells = cells.len() / stride;
        for (e, chunk) in cells.chunks(stride).enumerate() {
            for &v in chunk {
                if v >= vertices.len() {
                    return Err(Error::Mesh(format!(
                        "dangling vertex: cell {e} references vertex {v} beyond table of {}",
                        vertices.len()
                    )));
                }
            }
        }
        let mut mesh = SimplicialMesh {
            dim,
            vertices,
            cells,
            faces: Vec::new(),
            cell_faces: Vec::new(),
            tag_names,
        };
        // orientation fix: swap the last two vertices of inverted cells
        for e in 0..n_cells {
            let vol = mesh.cell_volume(e);
            if vol == 0.0 || !vol.is_finite() {
                return Err(Error::Mesh(format!("degenerate cell {e} (zero volume)")));
            }
            if vol < 0.0 {
                let s = e * stride;
                mesh.cells.swap(s + dim - 1, s + dim);
            }
        }
        mesh.build_faces()?;
        for f in 0..mesh.faces.len() {
            if mesh.faces[f].is_boundary() {
                mesh.faces[f].tag = boundary_tagger(&mesh.faces[f].vertices, &mesh.vertices);
            }
        }
        Ok(mesh)
    }

    fn build_faces(&mut self) -> Result<()> {
        let dim = self.dim;
        let n_cells = self.n_cells();
        let mut by_key: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for e in 0..n_cells {
            let cell: Vec<usize> = self.cell(e).to_vec();
            for local in 0..=dim {
                let mut key = local_face_vertices(dim, &cell, local);
                key.sort_unstable();
                by_key.entry(key).or_default().push((e, local));
            }
        }
        // canonical global ordering: lexicographic in the sorted vertex key
        let mut keys: Vec<Vec<usize>> = by_key.keys().cloned().collect();
        keys.sort_unstable();

        self.faces = Vec::with_capacity(keys.len());
        self.cell_faces = vec![vec![usize::MAX; dim + 1]; n_cells];
        for key in keys {
            let mut sides = by_key.remove(&key).unwrap();
            if sides.len() > 2 {
                return Err(Error::Mesh(format!(
                    "nonmanifold mesh: face {key:?} shared by {} cells",
                    sides.len()
                )));
            }
            sides.sort_unstable();
            let owner = sides[0];
            let neighbor = sides.get(1).copied();
            let (normal, area) = self.face_geometry(&key, owner.0);
            let fid = self.faces.len();
            for &(e, local) in &sides {
                self.cell_faces[e][local] = fid;
            }
            self.faces.push(Face {
                vertices: key,
                owner,
                neighbor,
                normal,
                area,
                tag: None,
            });
        }
        Ok(())
    }

    /// Unit outward normal with respect to `cell`, and the face measure.
    fn face_geometry(&self, verts: &[usize], cell: usize) -> ([f64; 3], f64) {
        let (mut n, area) = match self.dim {
            2 => {
                let a = self.vertices[verts[0]];
                let b = self.vertices[verts[1]];
                let t = [b[0] - a[0], b[1] - a[1], 0.0];
                let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
                ([t[1] / len, -t[0] / len, 0.0], len)
            }
            _ => {
                let a = self.vertices[verts[0]];
                let b = self.vertices[verts[1]];
                let c = self.vertices[verts[2]];
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let cr = cross(u, v);
                let len = norm(cr);
                ([cr[0] / len, cr[1] / len, cr[2] / len], 0.5 * len)
            }
        };
        // orient away from the opposite vertex of `cell`
        let opposite = self
            .cell(cell)
            .iter()
            .copied()
            .find(|v| !verts.contains(v))
            .expect("cell has a vertex opposite each face");
        let center = self.face_centroid_of(verts);
        let op = self.vertices[opposite];
        let d = [center[0] - op[0], center[1] - op[1], center[2] - op[2]];
        if n[0] * d[0] + n[1] * d[1] + n[2] * d[2] < 0.0 {
            n = [-n[0], -n[1], -n[2]];
        }
        (n, area)
    }

    fn face_centroid_of(&self, verts: &[usize]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for &v in verts {
            let p = self.vertices[v];
            for d in 0..3 {
                c[d] += p[d];
            }
        }
        for d in 0..3 {
            c[d] /= verts.len() as f64;
        }
        c
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm([b[0] - a[0], b[1] - a[1], b[2] - a[2]])
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

fn det3(j: &[[f64; 3]; 3]) -> f64 {
    j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[1][0] * (j[0][1] * j[2][2] - j[0][2] * j[2][1])
        + j[2][0] * (j[0][1] * j[1][2] - j[0][2] * j[1][1])
}

/// Row-major inverse of the column-major Jacobian: `inv[r]` dotted with a
/// physical vector gives reference coordinate `r`.
fn inv3(j: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let d = det3(j);
    let m = |r: usize, c: usize| j[c][r];
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
    [
        [cof(1, 2, 1, 2) / d, -cof(0, 2, 1, 2) / d, cof(0, 1, 1, 2) / d],
        [-cof(1, 2, 0, 2) / d, cof(0, 2, 0, 2) / d, -cof(0, 1, 0, 2) / d],
        [cof(1, 2, 0, 1) / d, -cof(0, 2, 0, 1) / d, cof(0, 1, 0, 1) / d],
    ]
}

// ---------------------------------------------------------------------------
// Structured generators
// ---------------------------------------------------------------------------

/// Axis-aligned box extent in meters.
#[derive(Clone, Copy, Debug)]
pub struct Extent {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Extent {
    pub fn new_2d(x: (f64, f64), y: (f64, f64)) -> Self {
        Extent {
            min: [x.0, y.0, 0.0],
            max: [x.1, y.1, 0.0],
        }
    }

    pub fn new_3d(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Self {
        Extent {
            min: [x.0, y.0, z.0],
            max: [x.1, y.1, z.1],
        }
    }
}

const SIDE_TAGS_2D: [&str; 4] = ["xmin", "xmax", "ymin", "ymax"];
const SIDE_TAGS_3D: [&str; 6] = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"];

fn box_tagger(dim: usize, extent: Extent) -> impl Fn(&[usize], &[[f64; 3]]) -> Option<usize> {
    move |verts, coords| {
        let tol = 1e-9
            * (0..dim)
                .map(|d| extent.max[d] - extent.min[d])
                .fold(0.0f64, f64::max);
        for d in 0..dim {
            if verts
                .iter()
                .all(|&v| (coords[v][d] - extent.min[d]).abs() < tol)
            {
                return Some(2 * d);
            }
            if verts
                .iter()
                .all(|&v| (coords[v][d] - extent.max[d]).abs() < tol)
            {
                return Some(2 * d + 1);
            }
        }
        None
    }
}

/// Structured simplicial mesh of a box: each quad splits into 2 triangles,
/// each hex into 6 tetrahedra (Kuhn subdivision, conforming across hexes).
pub fn build_structured_mesh(extent: Extent, cells_per_axis: &[usize]) -> Result<SimplicialMesh> {
    let dim = cells_per_axis.len();
    if dim != 2 && dim != 3 {
        return Err(Error::Mesh(format!(
            "cells_per_axis must have 2 or 3 entries, got {dim}"
        )));
    }
    for d in 0..dim {
        if cells_per_axis[d] < 1 {
            return Err(Error::Mesh("cells_per_axis entries must be >= 1".into()));
        }
        if !(extent.max[d] - extent.min[d]).is_finite() || extent.max[d] <= extent.min[d] {
            return Err(Error::Mesh(format!(
                "degenerate extent on axis {d}: [{}, {}]",
                extent.min[d], extent.max[d]
            )));
        }
    }
    let tags: Vec<String> = if dim == 2 {
        SIDE_TAGS_2D.iter().map(|s| s.to_string()).collect()
    } else {
        SIDE_TAGS_3D.iter().map(|s| s.to_string()).collect()
    };

    if dim == 2 {
        let (nx, ny) = (cells_per_axis[0], cells_per_axis[1]);
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    extent.min[0] + (extent.max[0] - extent.min[0]) * i as f64 / nx as f64,
                    extent.min[1] + (extent.max[1] - extent.min[1]) * j as f64 / ny as f64,
                    0.0,
                ]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(6 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.extend_from_slice(&[a, b, c]);
                cells.extend_from_slice(&[a, c, d]);
            }
        }
        SimplicialMesh::from_raw(2, vertices, cells, tags, box_tagger(2, extent))
    } else {
        let (nx, ny, nz) = (cells_per_axis[0], cells_per_axis[1], cells_per_axis[2]);
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    vertices.push([
                        extent.min[0] + (extent.max[0] - extent.min[0]) * i as f64 / nx as f64,
                        extent.min[1] + (extent.max[1] - extent.min[1]) * j as f64 / ny as f64,
                        extent.min[2] + (extent.max[2] - extent.min[2]) * k as f64 / nz as f64,
                    ]);
                }
            }
        }
        let vid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
        // Kuhn subdivision: one tet per permutation of the unit steps, all
        // sharing the main diagonal of the hex
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut cells = Vec::with_capacity(24 * nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    for perm in PERMS {
                        let mut corner = [i, j, k];
                        cells.push(vid(corner[0], corner[1], corner[2]));
                        for &axis in &perm {
                            corner[axis] += 1;
                            cells.push(vid(corner[0], corner[1], corner[2]));
                        }
                    }
                }
            }
        }
        SimplicialMesh::from_raw(3, vertices, cells, tags, box_tagger(3, extent))
    }
}

// ---------------------------------------------------------------------------
// Connectivity map (trace selection/scatter)
// ---------------------------------------------------------------------------

/// Per-cell selection of global trace dof: applying it to the global trace
/// vector yields the dof on the cell boundary, in local face order.
pub struct ConnectivityMap {
    /// Global dof range of each face, in face-id order.
    pub face_ranges: Vec<std::ops::Range<usize>>,
    /// Per cell, per local face, the global dof range.
    per_cell: Vec<Vec<std::ops::Range<usize>>>,
    total: usize,
}

impl ConnectivityMap {
    /// Lay out face dof contiguously in canonical face order.
    pub fn build(mesh: &SimplicialMesh, face_dof_counts: &[usize]) -> ConnectivityMap {
        assert_eq!(face_dof_counts.len(), mesh.n_faces());
        let mut face_ranges = Vec::with_capacity(mesh.n_faces());
        let mut offset = 0usize;
        for &n in face_dof_counts {
            face_ranges.push(offset..offset + n);
            offset += n;
        }
        let per_cell = (0..mesh.n_cells())
            .map(|e| {
                mesh.faces_of_cell(e)
                    .iter()
                    .map(|&f| face_ranges[f].clone())
                    .collect()
            })
            .collect();
        ConnectivityMap {
            face_ranges,
            per_cell,
            total: offset,
        }
    }

    /// Total number of global trace dof.
    pub fn total_dofs(&self) -> usize {
        self.total
    }

    /// Number of trace dof on the boundary of cell `e`.
    pub fn cell_trace_len(&self, e: usize) -> usize {
        self.per_cell[e].iter().map(|r| r.len()).sum()
    }

    /// Global dof ranges of cell `e` in local face order.
    pub fn cell_ranges(&self, e: usize) -> &[std::ops::Range<usize>] {
        &self.per_cell[e]
    }

    /// `R_e x`: gather the global values on the boundary of cell `e`.
    pub fn select<T: Copy>(&self, e: usize, global: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.cell_trace_len(e));
        for r in &self.per_cell[e] {
            out.extend_from_slice(&global[r.clone()]);
        }
        out
    }

    /// `R_e^T x`: scatter-add local boundary values into the global vector.
    pub fn scatter_add<T: Copy + std::ops::AddAssign>(
        &self,
        e: usize,
        local: &[T],
        global: &mut [T],
    ) {
        let mut k = 0;
        for r in &self.per_cell[e] {
            for g in r.clone() {
                global[g] += local[k];
                k += 1;
            }
        }
    }
}
