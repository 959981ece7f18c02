//! Independent reference computations used only by the tests.
#![allow(dead_code)]

use frac_cvm::assembly::{Discretization, ProblemSpec};
use frac_cvm::mesh::{Mesh, Point};

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Grünwald weights `(-1)^j C(order, j)`.
pub fn gl_weights(order: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n + 1);
    g.push(1.0);
    for j in 1..=n {
        let prev = g[j - 1];
        g.push(prev * (1.0 - (order + 1.0) / j as f64));
    }
    g
}

fn gl_sum(f: &dyn Fn(f64) -> f64, x: f64, h: f64, dir: f64, order: f64, n: usize) -> f64 {
    let g = gl_weights(order, n);
    let s: f64 = g.iter().enumerate().map(|(j, w)| w * f(x + dir * j as f64 * h)).sum();
    s / h.powf(order)
}

/// Left Riemann–Liouville derivative from `a` by Grünwald–Letnikov with one
/// Richardson step on grids aligned to `[a, x]`.
pub fn gl_left(f: &dyn Fn(f64) -> f64, a: f64, x: f64, order: f64, n: usize) -> f64 {
    let h = (x - a) / n as f64;
    2.0 * gl_sum(f, x, h / 2.0, -1.0, order, 2 * n) - gl_sum(f, x, h, -1.0, order, n)
}

/// Right Riemann–Liouville derivative up to `b` (sign convention of the
/// reflected left derivative).
pub fn gl_right(f: &dyn Fn(f64) -> f64, b: f64, x: f64, order: f64, n: usize) -> f64 {
    let h = (b - x) / n as f64;
    2.0 * gl_sum(f, x, h / 2.0, 1.0, order, 2 * n) - gl_sum(f, x, h, 1.0, order, n)
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = z;
        ws[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (xs, ws)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let (xs, ws) = gauss_legendre(20);
    let w = (hi - lo) / panels as f64;
    (0..panels)
        .map(|k| {
            let (a, b) = (lo + k as f64 * w, lo + (k + 1) as f64 * w);
            let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
            xs.iter().zip(&ws).map(|(x, wt)| wt * f(c + r * x)).sum::<f64>() * r
        })
        .sum()
}

/// `∫_{s0}^{s1} (x−ξ)^{−α}(pξ+q) dξ` for `s1 < x`, via `v = (x−ξ)^{1−α}`.
fn left_integral(p: f64, q: f64, s0: f64, s1: f64, x: f64, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    let (v_lo, v_hi) = ((x - s1).powf(e), (x - s0).powf(e));
    integrate(&|v| p * (x - v.powf(1.0 / e)) + q, v_lo, v_hi, 40) / e
}

/// `∫_{s0}^{s1} (ξ−x)^{−α}(pξ+q) dξ` for `x < s0`.
fn right_integral(p: f64, q: f64, s0: f64, s1: f64, x: f64, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    let (v_lo, v_hi) = ((s0 - x).powf(e), (s1 - x).powf(e));
    integrate(&|v| p * (x + v.powf(1.0 / e)) + q, v_lo, v_hi, 40) / e
}

pub fn quad_kernel_left(p: f64, q: f64, s0: f64, s1: f64, x: f64, alpha: f64) -> f64 {
    let d = 1e-5 * (x - s1);
    (left_integral(p, q, s0, s1, x + d, alpha) - left_integral(p, q, s0, s1, x - d, alpha)) / (2.0 * d)
        / gamma(1.0 - alpha)
}

pub fn quad_kernel_right(p: f64, q: f64, s0: f64, s1: f64, x: f64, alpha: f64) -> f64 {
    let d = 1e-5 * (s0 - x);
    -(right_integral(p, q, s0, s1, x + d, alpha) - right_integral(p, q, s0, s1, x - d, alpha)) / (2.0 * d)
        / gamma(1.0 - alpha)
}

/// Linear piece of one basis function along a line: `[lo, hi]` with slope.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
}

fn barycentric(p: Point, tri: [Point; 3]) -> [f64; 3] {
    let [a, b, c] = tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det;
    let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det;
    [l1, l2, 1.0 - l1 - l2]
}

/// Hat function of `node` at `p`, scanning every triangle.
pub fn hat(mesh: &Mesh, node: usize, p: Point) -> f64 {
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if let Some(j) = tri.iter().position(|&v| v == node) {
            let l = barycentric(p, mesh.triangle_points(t));
            if l.iter().all(|&v| v >= -1e-12) {
                return l[j].max(0.0);
            }
        }
    }
    0.0
}

/// Pieces of the hat function of `node` on the line `coord[across] = level`,
/// parametrized by `coord[along]`.
pub fn hat_segments(mesh: &Mesh, node: usize, along: usize, level: f64) -> Vec<Segment> {
    let across = 1 - along;
    let mut out = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let Some(j) = tri.iter().position(|&v| v == node) else { continue };
        let pts = mesh.triangle_points(t);
        let mut hits: Vec<f64> = Vec::new();
        for e in 0..3 {
            let (a, b) = (pts[e], pts[(e + 1) % 3]);
            let (da, db) = (a[across] - level, b[across] - level);
            if da * db < 0.0 {
                let s = da / (da - db);
                hits.push(a[along] + s * (b[along] - a[along]));
            } else if da == 0.0 {
                hits.push(a[along]);
            }
        }
        if hits.len() < 2 {
            continue;
        }
        let lo = hits.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = hits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-12 {
            continue;
        }
        let at = |s: f64| {
            let mut p = [0.0; 2];
            p[along] = s;
            p[across] = level;
            barycentric(p, pts)[j]
        };
        out.push(Segment {
            lo,
            hi,
            slope: (at(hi) - at(lo)) / (hi - lo),
        });
    }
    out
}

/// Left derivative of a continuous piecewise-linear function vanishing at its
/// left end, written as a fractional integral of its derivative.
pub fn caputo_left(segs: &[Segment], x: f64, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    segs.iter()
        .filter(|s| s.lo < x)
        .map(|s| s.slope * ((x - s.lo).powf(e) - (x - s.hi.min(x)).powf(e)))
        .sum::<f64>()
        / gamma(2.0 - alpha)
}

/// Right counterpart of [`caputo_left`].
pub fn caputo_right(segs: &[Segment], x: f64, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    -segs
        .iter()
        .filter(|s| s.hi > x)
        .map(|s| s.slope * ((s.hi - x).powf(e) - (s.lo.max(x) - x).powf(e)))
        .sum::<f64>()
        / gamma(2.0 - alpha)
}

/// Dense stiffness matrix from every (face, interior node) pair.
pub fn dense_stiffness(disc: &Discretization, problem: &ProblemSpec, t: f64) -> Vec<Vec<f64>> {
    let mesh = disc.mesh();
    let n = disc.n_dofs();
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for face in disc.cv().faces_of(disc.dofs().node(i)) {
            let [x, y] = face.midpoint;
            let k = problem.coefficients(x, y, t);
            for (col, entry) in row.iter_mut().enumerate() {
                let node = disc.dofs().node(col);
                let h = hat_segments(mesh, node, 0, y);
                let v = hat_segments(mesh, node, 1, x);
                let dxl = caputo_left(&h, x, problem.alpha);
                let dxr = caputo_right(&h, x, problem.alpha);
                let dyl = caputo_left(&v, y, problem.beta);
                let dyr = caputo_right(&v, y, problem.beta);
                *entry += (k[0] * dxl - k[1] * dxr) * face.dy - (k[2] * dyl - k[3] * dyr) * face.dx;
            }
        }
    }
    m
}

/// `u_t − ∂x[K1 D⁺u − K2 D⁻u] − ∂y[K3 D⁺u − K4 D⁻u] − f` at `(x, y, t)`, with
/// Grünwald–Letnikov fluxes between the domain limits and central differences.
pub fn pde_residual(
    problem: &ProblemSpec,
    exact: &dyn Fn(f64, f64, f64) -> f64,
    x: f64,
    y: f64,
    t: f64,
    n_gl: usize,
) -> f64 {
    let (a, b) = problem.domain.x_limits(y).expect("inside");
    let (c, d) = problem.domain.y_limits(x).expect("inside");
    let delta = 1e-3;
    let ut = (exact(x, y, t + 1e-5) - exact(x, y, t - 1e-5)) / 2e-5;
    let inside = |z: f64, lo: f64, hi: f64| z > lo && z < hi;
    let flux_x = |xx: f64| {
        let f = |s: f64| if inside(s, a, b) { exact(s, y, t) } else { 0.0 };
        (problem.k1)(xx, y, t) * gl_left(&f, a, xx, problem.alpha, n_gl)
            - (problem.k2)(xx, y, t) * gl_right(&f, b, xx, problem.alpha, n_gl)
    };
    let flux_y = |yy: f64| {
        let f = |s: f64| if inside(s, c, d) { exact(x, s, t) } else { 0.0 };
        (problem.k3)(x, yy, t) * gl_left(&f, c, yy, problem.beta, n_gl)
            - (problem.k4)(x, yy, t) * gl_right(&f, d, yy, problem.beta, n_gl)
    };
    let div = (flux_x(x + delta) - flux_x(x - delta)) / (2.0 * delta)
        + (flux_y(y + delta) - flux_y(y - delta)) / (2.0 * delta);
    ut - div - (problem.forcing)(x, y, t)
}
