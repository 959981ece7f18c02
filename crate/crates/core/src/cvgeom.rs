//! Barycentric dual control volumes.
//!
//! Every triangle is cut into three quadrilateral sub-control volumes by the
//! segments joining its barycenter to its edge midpoints. Around vertex `v0`
//! of a counter-clockwise triangle `(v0, v1, v2)` the control volume boundary
//! runs `mid(v0,v1) -> Q -> mid(v0,v2)`, which keeps each owner's face loop
//! anticlockwise.

use thiserror::Error;

use crate::mesh::{Mesh, Point};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlFace {
    pub owner_node: usize,
    pub midpoint: Point,
    /// `x_b - x_a` along the anticlockwise traversal.
    pub dx: f64,
    /// `y_b - y_a` along the anticlockwise traversal.
    pub dy: f64,
    pub element: usize,
}

#[derive(Debug, Clone)]
pub struct CvGeometry {
    cv_area: Vec<f64>,
    sub_cv_area: Vec<[f64; 3]>,
    faces: Vec<ControlFace>,
    face_offsets: Vec<usize>,
    m: Vec<usize>,
}

impl CvGeometry {
    /// Control volume area `ΔV_i` for every node.
    pub fn cv_area(&self) -> &[f64] {
        &self.cv_area
    }

    /// Sub-control volume areas, indexed by triangle and local vertex.
    pub fn sub_cv_area(&self) -> &[[f64; 3]] {
        &self.sub_cv_area
    }

    pub fn faces(&self) -> &[ControlFace] {
        &self.faces
    }

    pub fn faces_of(&self, node: usize) -> &[ControlFace] {
        &self.faces[self.face_offsets[node]..self.face_offsets[node + 1]]
    }

    /// Number of sub-control volumes making up node `i`'s control volume.
    pub fn m(&self, node: usize) -> usize {
        self.m[node]
    }

    pub fn total_area(&self) -> f64 {
        self.cv_area.iter().sum()
    }
}

fn mid(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

fn face(owner_node: usize, element: usize, a: Point, b: Point) -> ControlFace {
    ControlFace {
        owner_node,
        midpoint: mid(a, b),
        dx: b[0] - a[0],
        dy: b[1] - a[1],
        element,
    }
}

pub fn build_control_volumes(mesh: &Mesh) -> Result<CvGeometry, GeometryError> {
    let n = mesh.n_vertices();
    let scale = mesh.h();
    let min_area = 1e-14 * scale * scale;

    let mut sub_cv_area = Vec::with_capacity(mesh.n_triangles());
    let mut per_tri_faces = Vec::with_capacity(mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        if area <= min_area {
            return Err(GeometryError::DegenerateTriangle { triangle: t, area });
        }
        let p = mesh.triangle_points(t);
        let q = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let mut areas = [0.0; 3];
        let mut faces = [[face(0, 0, q, q); 2]; 3];
        for j in 0..3 {
            let (v, next, prev) = (p[j], p[(j + 1) % 3], p[(j + 2) % 3]);
            let (s_next, s_prev) = (mid(v, next), mid(v, prev));
            areas[j] = shoelace(&[v, s_next, q, s_prev]);
            faces[j] = [face(tri[j], t, s_next, q), face(tri[j], t, q, s_prev)];
        }
        sub_cv_area.push(areas);
        per_tri_faces.push(faces);
    }

    let mut cv_area = vec![0.0; n];
    let mut m = vec![0usize; n];
    for (tri, areas) in mesh.triangles().iter().zip(&sub_cv_area) {
        for j in 0..3 {
            cv_area[tri[j]] += areas[j];
            m[tri[j]] += 1;
        }
    }

    let mut face_offsets = vec![0usize; n + 1];
    for i in 0..n {
        face_offsets[i + 1] = face_offsets[i] + 2 * m[i];
    }
    let mut cursor = face_offsets.clone();
    let mut faces = vec![face(0, 0, [0.0; 2], [0.0; 2]); face_offsets[n]];
    for (tri, tri_faces) in mesh.triangles().iter().zip(&per_tri_faces) {
        for j in 0..3 {
            let slot = &mut cursor[tri[j]];
            faces[*slot] = tri_faces[j][0];
            faces[*slot + 1] = tri_faces[j][1];
            *slot += 2;
        }
    }

    Ok(CvGeometry {
        cv_area,
        sub_cv_area,
        faces,
        face_offsets,
        m,
    })
}
