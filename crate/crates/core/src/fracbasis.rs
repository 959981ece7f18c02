//! Riemann–Liouville derivatives of the global piecewise-linear basis.
//!
//! The basis function `l_k` restricted to a horizontal (or vertical) line is
//! piecewise linear with compact support, so its left and right fractional
//! derivatives of order `α ∈ (0,1)` reduce to a sum of closed-form
//! per-segment kernels. Pieces on the far side of the evaluation point and
//! lines that miss the support contribute nothing.

use thiserror::Error;

use crate::mesh::{Mesh, Point};
use crate::special::gamma;

#[derive(Debug, Error, PartialEq)]
pub enum FracError {
    #[error("fractional order must lie in (0, 1), got {0}")]
    OrderOutOfRange(f64),
    #[error("segment [{s0}, {s1}] is not on the required side of x = {x}")]
    WrongSide { s0: f64, s1: f64, x: f64 },
}

/// A validated fractional order `α ∈ (0,1)` with its `1/Γ(1-α)` prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    inv_gamma: f64,
}

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self, FracError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(FracError::OrderOutOfRange(alpha));
        }
        Ok(FracOrder {
            alpha,
            inv_gamma: 1.0 / gamma(1.0 - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// The line `y = level`; profile coordinates are `x`.
    Horizontal,
    /// The line `x = level`; profile coordinates are `y`.
    Vertical,
}

impl Axis {
    #[inline]
    fn along(self, p: Point) -> f64 {
        match self {
            Axis::Horizontal => p[0],
            Axis::Vertical => p[1],
        }
    }

    #[inline]
    fn across(self, p: Point) -> f64 {
        match self {
            Axis::Horizontal => p[1],
            Axis::Vertical => p[0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of_points(points: impl IntoIterator<Item = Point>) -> Self {
        let mut b = BBox {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        };
        for p in points {
            for k in 0..2 {
                b.min[k] = b.min[k].min(p[k]);
                b.max[k] = b.max[k].max(p[k]);
            }
        }
        b
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    /// Whether the line `axis = level` crosses the box.
    pub fn stabbed_by(&self, axis: Axis, level: f64) -> bool {
        let k = match axis {
            Axis::Horizontal => 1,
            Axis::Vertical => 0,
        };
        self.min[k] <= level && level <= self.max[k]
    }
}

/// The union of triangles incident to a node: where its basis function lives.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDomain {
    pub node: usize,
    pub elements: Vec<usize>,
    pub bbox: BBox,
    /// Longest edge among `elements`; sets the grazing tolerance.
    pub scale: f64,
}

fn support_from_elements(mesh: &Mesh, node: usize, elements: Vec<usize>) -> SupportDomain {
    let bbox = BBox::of_points(
        elements
            .iter()
            .flat_map(|&t| mesh.triangle_points(t)),
    );
    let mut scale: f64 = 0.0;
    for &t in &elements {
        let p = mesh.triangle_points(t);
        for j in 0..3 {
            let (a, b) = (p[j], p[(j + 1) % 3]);
            scale = scale.max((b[0] - a[0]).hypot(b[1] - a[1]));
        }
    }
    SupportDomain {
        node,
        elements,
        bbox,
        scale,
    }
}

pub fn support_domain(mesh: &Mesh, k: usize) -> SupportDomain {
    let elements = mesh
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, tri)| tri.contains(&k))
        .map(|(t, _)| t)
        .collect();
    support_from_elements(mesh, k, elements)
}

/// Support domains of every vertex, built from one adjacency pass.
pub fn support_domains(mesh: &Mesh) -> Vec<SupportDomain> {
    mesh.node_triangles()
        .into_iter()
        .enumerate()
        .map(|(k, elements)| support_from_elements(mesh, k, elements))
        .collect()
}

/// Direct evaluation of the global basis function `l_k` at `point`.
pub fn eval_basis(mesh: &Mesh, support: &SupportDomain, point: Point) -> f64 {
    for &t in &support.elements {
        let tri = mesh.triangles()[t];
        let p = mesh.triangle_points(t);
        let area2 = crate::mesh::signed_area2(p[0], p[1], p[2]);
        let mut lambda = [0.0; 3];
        for j in 0..3 {
            lambda[j] = crate::mesh::signed_area2(point, p[(j + 1) % 3], p[(j + 2) % 3]) / area2;
        }
        let eps = 1e-14;
        if lambda.iter().all(|&l| l >= -eps) {
            let j = tri.iter().position(|&v| v == support.node).unwrap();
            return lambda[j].max(0.0);
        }
    }
    0.0
}

/// `slope * s + intercept` on one interval of a [`LineProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearPiece {
    const ZERO: LinearPiece = LinearPiece {
        slope: 0.0,
        intercept: 0.0,
    };

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        self.slope * s + self.intercept
    }

    fn is_zero(&self) -> bool {
        self.slope == 0.0 && self.intercept == 0.0
    }
}

/// Piecewise-linear restriction of a basis function to an axis-aligned line.
///
/// `pieces[j]` is valid on `[breakpoints[j], breakpoints[j + 1]]`; the
/// function is zero outside `[breakpoints[0], breakpoints[last]]`. Gaps
/// between disjoint parts of the support are filled with zero pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    pub axis: Axis,
    pub level: f64,
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<LinearPiece>,
}

impl LineProfile {
    pub fn empty(axis: Axis, level: f64) -> Self {
        LineProfile {
            axis,
            level,
            breakpoints: Vec::new(),
            pieces: Vec::new(),
        }
    }

    /// Builds a profile from breakpoints and the values at them.
    pub fn from_values(axis: Axis, level: f64, breakpoints: Vec<f64>, values: &[f64]) -> Self {
        assert_eq!(breakpoints.len(), values.len());
        let pieces = breakpoints
            .windows(2)
            .zip(values.windows(2))
            .map(|(s, v)| {
                let slope = (v[1] - v[0]) / (s[1] - s[0]);
                LinearPiece {
                    slope,
                    intercept: v[0] - slope * s[0],
                }
            })
            .collect();
        LineProfile {
            axis,
            level,
            breakpoints,
            pieces,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn value_at(&self, s: f64) -> f64 {
        if self.is_empty() || s < self.breakpoints[0] || s > *self.breakpoints.last().unwrap() {
            return 0.0;
        }
        let j = self.breakpoints.partition_point(|&b| b <= s);
        let j = j.saturating_sub(1).min(self.pieces.len() - 1);
        self.pieces[j].eval(s)
    }

    /// Returns a copy with every piece multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.slope *= factor;
            p.intercept *= factor;
        }
        out
    }
}

/// Restricts `l_k` (the basis function of `support.node`) to the line
/// `axis = level`.
pub fn line_restriction(mesh: &Mesh, support: &SupportDomain, axis: Axis, level: f64) -> LineProfile {
    if !support.bbox.stabbed_by(axis, level) {
        return LineProfile::empty(axis, level);
    }
    let tol = 1e-12 * support.scale;
    let mut segments: Vec<(f64, f64, LinearPiece)> = Vec::with_capacity(support.elements.len());
    for &t in &support.elements {
        let tri = mesh.triangles()[t];
        let pts = mesh.triangle_points(t);
        let s = pts.map(|p| axis.along(p));
        let d = pts.map(|p| axis.across(p) - level);

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut hits = 0;
        for j in 0..3 {
            if d[j] == 0.0 {
                lo = lo.min(s[j]);
                hi = hi.max(s[j]);
                hits += 1;
            }
            // canonical endpoint order so a shared edge gives the same crossing
            let (a, b) = if tri[j] < tri[(j + 1) % 3] {
                (j, (j + 1) % 3)
            } else {
                ((j + 1) % 3, j)
            };
            if (d[a] < 0.0 && d[b] > 0.0) || (d[a] > 0.0 && d[b] < 0.0) {
                let x = s[a] + (s[b] - s[a]) * (d[a] / (d[a] - d[b]));
                lo = lo.min(x);
                hi = hi.max(x);
                hits += 1;
            }
        }
        if hits < 2 || hi - lo <= tol {
            continue;
        }

        // φ_j = (a_j s + b_j t + c_j) / (2Δ) in the (along, across) frame
        let j = tri.iter().position(|&v| v == support.node).unwrap();
        let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
        let across = pts.map(|p| axis.across(p));
        let a = across[j1] - across[j2];
        let b = s[j2] - s[j1];
        let c = s[j1] * across[j2] - s[j2] * across[j1];
        let area2 = (s[j1] - s[j]) * (across[j2] - across[j]) - (s[j2] - s[j]) * (across[j1] - across[j]);
        segments.push((
            lo,
            hi,
            LinearPiece {
                slope: a / area2,
                intercept: (b * level + c) / area2,
            },
        ));
    }
    if segments.is_empty() {
        return LineProfile::empty(axis, level);
    }
    segments.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let mut breakpoints = vec![segments[0].0];
    let mut pieces = Vec::with_capacity(segments.len() + 2);
    for (lo, hi, piece) in segments {
        let last = *breakpoints.last().unwrap();
        let start = if lo > last + tol {
            pieces.push(LinearPiece::ZERO);
            breakpoints.push(lo);
            lo
        } else {
            last
        };
        // overlapping segments come from a line running along a shared edge
        if hi <= start + tol {
            continue;
        }
        pieces.push(piece);
        breakpoints.push(hi);
    }
    LineProfile {
        axis,
        level,
        breakpoints,
        pieces,
    }
}

#[inline]
fn left_boundary_term(p: f64, q: f64, s: f64, x: f64, ord: FracOrder) -> f64 {
    let u = x - s;
    if u == 0.0 {
        return 0.0;
    }
    let w = u.powf(-ord.alpha);
    (p * s + q) * w + p * u * w / (1.0 - ord.alpha)
}

/// Closed form of `(1/Γ(1-α)) d/dx ∫_{s0}^{s1} (x-ξ)^{-α} (pξ+q) dξ`.
///
/// With `u = x - ξ` the antiderivative is
/// `(px+q) u^{1-α}/(1-α) - p u^{2-α}/(2-α)`; its total x-derivative at an
/// endpoint `s` is `l(s) u^{-α} + p u^{1-α}/(1-α)`. When `s1 == x` the upper
/// limit moves with `x` and its term vanishes.
#[inline]
fn left_kernel(p: f64, q: f64, s0: f64, s1: f64, x: f64, ord: FracOrder) -> f64 {
    (left_boundary_term(p, q, s0, x, ord) - left_boundary_term(p, q, s1, x, ord)) * ord.inv_gamma
}

/// Mirror of [`left_kernel`] under `ξ -> -ξ`.
#[inline]
fn right_kernel(p: f64, q: f64, s0: f64, s1: f64, x: f64, ord: FracOrder) -> f64 {
    left_kernel(-p, q, -s1, -s0, -x, ord)
}

pub fn rl_segment_kernel_left(
    p: f64,
    q: f64,
    s0: f64,
    s1: f64,
    x: f64,
    alpha: f64,
) -> Result<f64, FracError> {
    let ord = FracOrder::new(alpha)?;
    if !(s0 <= s1 && s1 <= x) {
        return Err(FracError::WrongSide { s0, s1, x });
    }
    Ok(left_kernel(p, q, s0, s1, x, ord))
}

/// Closed form of `(-1/Γ(1-α)) d/dx ∫_{s0}^{s1} (ξ-x)^{-α} (pξ+q) dξ`.
pub fn rl_segment_kernel_right(
    p: f64,
    q: f64,
    s0: f64,
    s1: f64,
    x: f64,
    alpha: f64,
) -> Result<f64, FracError> {
    let ord = FracOrder::new(alpha)?;
    if !(x <= s0 && s0 <= s1) {
        return Err(FracError::WrongSide { s0, s1, x });
    }
    Ok(right_kernel(p, q, s0, s1, x, ord))
}

/// Left or right RL derivative of a profile at `point`.
pub fn frac_deriv_at(profile: &LineProfile, order: FracOrder, point: f64, side: Side) -> f64 {
    let mut sum = 0.0;
    let bp = &profile.breakpoints;
    match side {
        Side::Left => {
            for (j, piece) in profile.pieces.iter().enumerate() {
                let s0 = bp[j];
                if s0 >= point {
                    break;
                }
                if piece.is_zero() {
                    continue;
                }
                let s1 = bp[j + 1].min(point);
                sum += left_kernel(piece.slope, piece.intercept, s0, s1, point, order);
            }
        }
        Side::Right => {
            for (j, piece) in profile.pieces.iter().enumerate().rev() {
                let s1 = bp[j + 1];
                if s1 <= point {
                    break;
                }
                if piece.is_zero() {
                    continue;
                }
                let s0 = bp[j].max(point);
                sum += right_kernel(piece.slope, piece.intercept, s0, s1, point, order);
            }
        }
    }
    sum
}
