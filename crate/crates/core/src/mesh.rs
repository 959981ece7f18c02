//! Conforming triangulations of convex domains.
//!
//! A [`Mesh`] owns its vertex coordinates and counter-clockwise triangle
//! connectivity. Boundary classification is always derived from edge
//! adjacency: an edge belonging to exactly one triangle is a boundary edge,
//! and its endpoints are boundary nodes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {triangle} repeats vertex {index}")]
    RepeatedVertex { triangle: usize, index: usize },
    #[error("triangle {triangle} is degenerate (signed area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by two triangles")]
    InconsistentEdge(usize, usize),
    #[error("interior node {0} does not have a single closed fan of triangles")]
    OpenFan(usize),
    #[error("vertex {0} is not referenced by any triangle")]
    UnusedVertex(usize),
    #[error("mesh has no triangles")]
    Empty,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
}

/// Analytic description of the solution domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainDescriptor {
    /// `(a, b) x (c, d)`.
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
    Disk { cx: f64, cy: f64, radius: f64 },
    MeshFileOnly,
}

impl DomainDescriptor {
    pub fn unit_square() -> Self {
        DomainDescriptor::Rectangle {
            a: 0.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn unit_disk() -> Self {
        DomainDescriptor::Disk {
            cx: 0.0,
            cy: 0.0,
            radius: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        match *self {
            DomainDescriptor::Rectangle { a, b, c, d } => {
                if !(a < b && c < d) {
                    return Err(MeshError::InvalidDomain(format!(
                        "rectangle needs a < b and c < d, got ({a}, {b}) x ({c}, {d})"
                    )));
                }
            }
            DomainDescriptor::Disk { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(MeshError::InvalidDomain(format!(
                        "disk radius must be positive, got {radius}"
                    )));
                }
            }
            DomainDescriptor::MeshFileOnly => {}
        }
        Ok(())
    }

    /// Left and right limits `a(y)`, `b(y)` of the horizontal chord at height `y`.
    pub fn x_limits(&self, y: f64) -> Option<(f64, f64)> {
        match *self {
            DomainDescriptor::Rectangle { a, b, c, d } => (c..=d).contains(&y).then_some((a, b)),
            DomainDescriptor::Disk { cx, cy, radius } => {
                let dy = y - cy;
                let w2 = radius * radius - dy * dy;
                (w2 >= 0.0).then(|| (cx - w2.sqrt(), cx + w2.sqrt()))
            }
            DomainDescriptor::MeshFileOnly => None,
        }
    }

    /// Lower and upper limits `c(x)`, `d(x)` of the vertical chord at `x`.
    pub fn y_limits(&self, x: f64) -> Option<(f64, f64)> {
        match *self {
            DomainDescriptor::Rectangle { a, b, c, d } => (a..=b).contains(&x).then_some((c, d)),
            DomainDescriptor::Disk { cx, cy, radius } => {
                let dx = x - cx;
                let w2 = radius * radius - dx * dx;
                (w2 >= 0.0).then(|| (cy - w2.sqrt(), cy + w2.sqrt()))
            }
            DomainDescriptor::MeshFileOnly => None,
        }
    }
}

/// Twice the signed area of the triangle `(p0, p1, p2)`.
#[inline]
pub fn signed_area2(p0: Point, p1: Point, p2: Point) -> f64 {
    (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    node_class: Vec<NodeClass>,
}

impl Mesh {
    /// Builds a mesh, repairing clockwise triangles and validating the rest.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for (j, &v) in tri.iter().enumerate() {
                if v >= n {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index: v,
                        count: n,
                    });
                }
                if tri[..j].contains(&v) {
                    return Err(MeshError::RepeatedVertex {
                        triangle: t,
                        index: v,
                    });
                }
            }
        }

        let scale = bbox_diagonal(&vertices);
        let min_area2 = 2.0e-14 * scale * scale;
        for (t, tri) in triangles.iter_mut().enumerate() {
            let a2 = signed_area2(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a2.abs() <= min_area2 {
                return Err(MeshError::Degenerate {
                    triangle: t,
                    area: 0.5 * a2,
                });
            }
            if a2 < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut used = vec![false; n];
        for tri in &triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|&u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }

        // directed edge -> owning triangle count, keyed by the undirected pair
        let mut edges: HashMap<(usize, usize), (usize, bool)> = HashMap::new();
        for tri in &triangles {
            for j in 0..3 {
                let (a, b) = (tri[j], tri[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let forward = a < b;
                match edges.get_mut(&key) {
                    None => {
                        edges.insert(key, (1, forward));
                    }
                    Some(entry) => {
                        if entry.0 >= 2 {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        if entry.1 == forward {
                            return Err(MeshError::InconsistentEdge(key.0, key.1));
                        }
                        entry.0 += 1;
                    }
                }
            }
        }

        let mut node_class = vec![NodeClass::Interior; n];
        for (&(a, b), &(count, _)) in &edges {
            if count == 1 {
                node_class[a] = NodeClass::Boundary;
                node_class[b] = NodeClass::Boundary;
            }
        }

        let mesh = Mesh {
            vertices,
            triangles,
            node_class,
        };
        mesh.check_interior_fans()?;
        Ok(mesh)
    }

    /// Every interior node must be surrounded by one closed cycle of
    /// neighbours (the opposite edges of its incident triangles).
    fn check_interior_fans(&self) -> Result<(), MeshError> {
        let incident = self.node_triangles();
        for (node, tris) in incident.iter().enumerate() {
            if self.node_class[node] != NodeClass::Interior {
                continue;
            }
            // opposite edge of each incident triangle, in CCW order around `node`
            let mut next: HashMap<usize, usize> = HashMap::with_capacity(tris.len());
            for &t in tris {
                let tri = self.triangles[t];
                let j = tri.iter().position(|&v| v == node).unwrap();
                next.insert(tri[(j + 1) % 3], tri[(j + 2) % 3]);
            }
            let start = *next.keys().next().ok_or(MeshError::OpenFan(node))?;
            let mut cur = start;
            let mut steps = 0;
            loop {
                cur = *next.get(&cur).ok_or(MeshError::OpenFan(node))?;
                steps += 1;
                if cur == start || steps > tris.len() {
                    break;
                }
            }
            if cur != start || steps != tris.len() {
                return Err(MeshError::OpenFan(node));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_class(&self) -> &[NodeClass] {
        &self.node_class
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.node_class[i] == NodeClass::Boundary
    }

    pub fn n_interior(&self) -> usize {
        self.node_class
            .iter()
            .filter(|c| **c == NodeClass::Interior)
            .count()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * signed_area2(p0, p1, p2)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Incident triangle indices for every vertex, in ascending order.
    pub fn node_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Maximum triangle edge length.
    pub fn h(&self) -> f64 {
        mesh_h(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "nodes {}", self.vertices.len()).unwrap();
        for p in &self.vertices {
            writeln!(s, "{} {}", p[0], p[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn bbox_diagonal(vertices: &[Point]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

pub fn mesh_h(mesh: &Mesh) -> f64 {
    let mut h: f64 = 0.0;
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_points(t);
        for j in 0..3 {
            let (a, b) = (p[j], p[(j + 1) % 3]);
            h = h.max((b[0] - a[0]).hypot(b[1] - a[1]));
        }
    }
    h
}

/// Structured triangulation of a rectangle; each cell is split along its
/// lower-left to upper-right diagonal.
pub fn generate_rect_mesh(nx: usize, ny: usize, rect: DomainDescriptor) -> Result<Mesh, MeshError> {
    let DomainDescriptor::Rectangle { a, b, c, d } = rect else {
        return Err(MeshError::InvalidDomain(
            "rectangle generator needs a Rectangle domain".into(),
        ));
    };
    rect.validate()?;
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidDomain(format!(
            "grid needs nx, ny >= 1, got {nx} x {ny}"
        )));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { d } else { c + (d - c) * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { b } else { a + (b - a) * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::new(vertices, triangles)
}

/// Concentric-ring triangulation of a disk.
///
/// Ring `k` sits at radius `k * dr` and carries `6k` equally spaced nodes;
/// the outermost ring lies on the circle. Adjacent rings are stitched by
/// advancing along whichever ring has the smaller next angle.
fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub fn generate_disk_mesh(target_h: f64, disk: DomainDescriptor) -> Result<Mesh, MeshError> {
    let DomainDescriptor::Disk { cx, cy, radius } = disk else {
        return Err(MeshError::InvalidDomain(
            "disk generator needs a Disk domain".into(),
        ));
    };
    disk.validate()?;
    if !(target_h > 0.0 && target_h < radius) {
        return Err(MeshError::InvalidDomain(format!(
            "target h must lie in (0, radius), got {target_h}"
        )));
    }
    let rings = (1.2 * radius / target_h).ceil() as usize;
    if rings < 1 {
        return Err(MeshError::InvalidDomain("fewer than one ring".into()));
    }
    let dr = radius / rings as f64;

    let mut vertices = vec![[cx, cy]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=rings {
        let n = 6 * k;
        let r = if k == rings { radius } else { k as f64 * dr };
        ring_start.push(vertices.len());
        ring_len.push(n);
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            vertices.push([cx + r * theta.cos(), cy + r * theta.sin()]);
        }
    }

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for k in 1..=rings {
        let (is, m) = (ring_start[k - 1], ring_len[k - 1]);
        let (os, n) = (ring_start[k], ring_len[k]);
        if m == 1 {
            for j in 0..n {
                triangles.push([is, os + j, os + (j + 1) % n]);
            }
            continue;
        }
        let (mut i, mut j) = (0usize, 0usize);
        while i < m || j < n {
            let inner = is + i % m;
            let outer = os + j % n;
            let (inner_next, outer_next) = (is + (i + 1) % m, os + (j + 1) % n);
            let advance_outer = j < n
                && (i >= m
                    || dist2(vertices[inner], vertices[outer_next])
                        <= dist2(vertices[inner_next], vertices[outer]));
            if advance_outer {
                triangles.push([inner, outer, outer_next]);
                j += 1;
            } else {
                triangles.push([inner, outer, inner_next]);
                i += 1;
            }
        }
    }
    Mesh::new(vertices, triangles)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_fields<const N: usize, T: std::str::FromStr>(
    line: usize,
    l: &str,
) -> Result<[T; N], MeshError> {
    let parsed: Vec<T> = l
        .split_whitespace()
        .map(|f| f.parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(line, format!("cannot parse `{l}`")))?;
    parsed
        .try_into()
        .map_err(|_| parse_err(line, format!("expected {N} fields, found `{l}`")))
}

fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    keyword: &str,
    last_line: usize,
) -> Result<usize, MeshError> {
    let (line, l) = lines
        .next()
        .ok_or_else(|| parse_err(last_line, format!("missing `{keyword}` header")))?;
    match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        [k, c] if *k == keyword => c
            .parse()
            .map_err(|_| parse_err(line, format!("bad {keyword} count `{c}`"))),
        _ => Err(parse_err(
            line,
            format!("expected `{keyword} <count>`, found `{l}`"),
        )),
    }
}

/// Parses the line-oriented mesh text format (`nodes`/`triangles` blocks,
/// `#` comments).
pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let last_line = text.lines().count();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let n_nodes = parse_header(&mut lines, "nodes", last_line)?;
    let mut vertices = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, l) = lines
            .next()
            .ok_or_else(|| parse_err(last_line, "unexpected end of file in node block"))?;
        let [x, y]: [f64; 2] = parse_fields(line, l)?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(line, "non-finite coordinate"));
        }
        vertices.push([x, y]);
    }

    let n_tris = parse_header(&mut lines, "triangles", last_line)?;
    let mut triangles = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let (line, l) = lines
            .next()
            .ok_or_else(|| parse_err(last_line, "unexpected end of file in triangle block"))?;
        triangles.push(parse_fields::<3, usize>(line, l)?);
    }
    if let Some((line, l)) = lines.next() {
        return Err(parse_err(line, format!("trailing content `{l}`")));
    }
    Mesh::new(vertices, triangles)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    parse_mesh(&std::fs::read_to_string(path)?)
}
