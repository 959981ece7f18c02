//! Manufactured-solution problems on the unit square and the unit disk.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{riesz_to_two_sided, ProblemSpec, SpaceTimeFn};
use crate::fracbasis::Side;
use crate::mesh::{generate_disk_mesh, generate_rect_mesh, DomainDescriptor, Mesh};
use crate::special::{binomial, gamma, recip_gamma};

use super::HarnessError;

/// `p(z, r)`: order-`r` left derivative of `z²(1−z)²` from 0.
pub fn p_helper(z: f64, r: f64) -> f64 {
    gamma(3.0) / gamma(3.0 - r) * z.powf(2.0 - r) - 2.0 * gamma(4.0) / gamma(4.0 - r) * z.powf(3.0 - r)
        + gamma(5.0) / gamma(5.0 - r) * z.powf(4.0 - r)
}

fn rl_monomial_unchecked(n: u32, limit: f64, mu: f64, x: f64, side: Side) -> f64 {
    let (dist, sign): (f64, f64) = match side {
        Side::Left => (x - limit, 1.0),
        Side::Right => (limit - x, -1.0),
    };
    (0..=n)
        .map(|m| {
            let m_f = f64::from(m);
            binomial(n, m)
                * limit.powi((n - m) as i32)
                * sign.powi(m as i32)
                * gamma(m_f + 1.0)
                * recip_gamma(m_f + 1.0 - mu)
                * dist.powf(m_f - mu)
        })
        .sum()
}

/// Riemann–Liouville derivative of order `mu` of `xⁿ` with the given lower
/// (`Left`) or upper (`Right`) limit, evaluated at `x`.
pub fn rl_monomial(n: u32, limit: f64, mu: f64, x: f64, side: Side) -> Result<f64, HarnessError> {
    let ok = match side {
        Side::Left => x > limit,
        Side::Right => x < limit,
    };
    if !ok || !mu.is_finite() || mu <= 0.0 {
        return Err(HarnessError::InvalidInput(format!(
            "rl_monomial needs x strictly inside the limit (x = {x}, limit = {limit}, mu = {mu})"
        )));
    }
    Ok(rl_monomial_unchecked(n, limit, mu, x, side))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Example1Linear,
    Example1Quadratic,
    Example1Exponential,
    Example2RieszDisk,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Example1Linear,
        PresetName::Example1Quadratic,
        PresetName::Example1Exponential,
        PresetName::Example2RieszDisk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Example1Linear => "example1-linear",
            PresetName::Example1Quadratic => "example1-quadratic",
            PresetName::Example1Exponential => "example1-exponential",
            PresetName::Example2RieszDisk => "example2-riesz-disk",
        }
    }

    pub fn default_orders(self) -> (f64, f64) {
        match self {
            PresetName::Example2RieszDisk => (0.8, 0.8),
            _ => (0.3, 0.5),
        }
    }

    pub fn domain(self) -> DomainDescriptor {
        match self {
            PresetName::Example2RieszDisk => DomainDescriptor::unit_disk(),
            _ => DomainDescriptor::unit_square(),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownPreset(s.to_string()))
    }
}

/// Optional overrides of a preset's defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct PresetOptions {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub t_final: Option<f64>,
}

/// A ready-to-run problem together with its exact solution.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    pub mesh: Mesh,
    pub spec: ProblemSpec,
    pub exact: ExactSolution,
    /// `(Kx, Ky)` when the problem is posed in Riesz form.
    pub riesz: Option<(f64, f64)>,
}

#[derive(Clone)]
pub struct ExactSolution(pub SpaceTimeFn);

impl ExactSolution {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.0)(x, y, t)
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution(..)")
    }
}

/// Mesh for a preset at target edge length `h_target`.
pub fn preset_mesh(name: PresetName, h_target: f64) -> Result<Mesh, HarnessError> {
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(HarnessError::InvalidInput(format!("h must be positive, got {h_target}")));
    }
    Ok(match name.domain() {
        d @ DomainDescriptor::Rectangle { a, b, c, d: top } => {
            let diag = ((b - a).powi(2) + (top - c).powi(2)).sqrt();
            let n = (diag / h_target - 1e-9).ceil().max(1.0) as usize;
            generate_rect_mesh(n, n, d)?
        }
        d => generate_disk_mesh(h_target, d)?,
    })
}

type ScalarFn = fn(f64) -> f64;

/// `(K, dK/dz)` for the decreasing and the increasing coefficient of one axis.
fn example1_coefficients(name: PresetName) -> [(ScalarFn, ScalarFn); 2] {
    match name {
        PresetName::Example1Linear => [(|z| 2.0 - z, |_| -1.0), (|z| 2.0 + z, |_| 1.0)],
        PresetName::Example1Quadratic => [(|z| 2.0 - z * z, |z| -2.0 * z), (|z| 2.0 + z * z, |z| 2.0 * z)],
        PresetName::Example1Exponential => [(|z| 3.0 - z.exp(), |z| -z.exp()), (|z| 3.0 + z.exp(), |z| z.exp())],
        PresetName::Example2RieszDisk => unreachable!("not an Example 1 case"),
    }
}

fn example1(name: PresetName, tau: f64, alpha: f64, beta: f64, t_final: f64) -> (ProblemSpec, ExactSolution) {
    let [(km, dkm), (kp, dkp)] = example1_coefficients(name);
    let bump = |z: f64| z * z * (1.0 - z) * (1.0 - z);
    // ∂z[K⁻ D_L^r w − K⁺ D_R^r w] for w = z²(1−z)² on [0, 1]
    let flux_div = move |z: f64, r: f64| {
        dkm(z) * p_helper(z, r) + km(z) * p_helper(z, 1.0 + r) - dkp(z) * p_helper(1.0 - z, r)
            + kp(z) * p_helper(1.0 - z, 1.0 + r)
    };
    let forcing: SpaceTimeFn = Arc::new(move |x, y, t| {
        let (bx, by) = (bump(x), bump(y));
        let g = t * t + 1.0;
        2.0 * t * bx * by - flux_div(x, alpha) * by * g - flux_div(y, beta) * bx * g
    });
    let exact: SpaceTimeFn = Arc::new(move |x, y, t| (t * t + 1.0) * bump(x) * bump(y));
    let initial = {
        let exact = exact.clone();
        Arc::new(move |x, y| exact(x, y, 0.0))
    };
    let spec = ProblemSpec {
        alpha,
        beta,
        k1: Arc::new(move |x, _, _| km(x)),
        k2: Arc::new(move |x, _, _| kp(x)),
        k3: Arc::new(move |_, y, _| km(y)),
        k4: Arc::new(move |_, y, _| kp(y)),
        forcing,
        initial,
        domain: name.domain(),
        t_final,
        tau,
        coefficients_time_dependent: false,
    };
    (spec, ExactSolution(exact))
}

/// Left plus right derivative of order `mu` of `z⁴ + c₂z² + c₀` on `[lo, hi]`.
fn two_sided_quartic(z: f64, lo: f64, hi: f64, mu: f64, c2: f64, c0: f64) -> f64 {
    let both = |n| {
        rl_monomial_unchecked(n, lo, mu, z, Side::Left) + rl_monomial_unchecked(n, hi, mu, z, Side::Right)
    };
    both(4) + c2 * both(2) + c0 * both(0)
}

fn example2(tau: f64, alpha: f64, beta: f64, t_final: f64) -> Result<(ProblemSpec, ExactSolution, (f64, f64)), HarnessError> {
    let (kx, ky) = (1.0, 1.0);
    let [k1, k2, k3, k4] = riesz_to_two_sided(kx, ky, alpha, beta)?;
    let cos_a = (0.5 * (1.0 + alpha) * PI).cos();
    let cos_b = (0.5 * (1.0 + beta) * PI).cos();
    let exact: SpaceTimeFn = Arc::new(|x, y, t| (-t).exp() * (x * x + y * y - 1.0).powi(2));
    let forcing: SpaceTimeFn = {
        let exact = exact.clone();
        Arc::new(move |x, y, t| {
            let b0 = (1.0 - y * y).max(0.0).sqrt();
            let d0 = (1.0 - x * x).max(0.0).sqrt();
            let fx = two_sided_quartic(x, -b0, b0, 1.0 + alpha, 2.0 * y * y - 2.0, (y * y - 1.0).powi(2));
            let fy = two_sided_quartic(y, -d0, d0, 1.0 + beta, 2.0 * x * x - 2.0, (x * x - 1.0).powi(2));
            let e = (-t).exp();
            -exact(x, y, t) + kx * e / (2.0 * cos_a) * fx + ky * e / (2.0 * cos_b) * fy
        })
    };
    let initial = {
        let exact = exact.clone();
        Arc::new(move |x, y| exact(x, y, 0.0))
    };
    let spec = ProblemSpec {
        alpha,
        beta,
        k1: Arc::new(move |_, _, _| k1),
        k2: Arc::new(move |_, _, _| k2),
        k3: Arc::new(move |_, _, _| k3),
        k4: Arc::new(move |_, _, _| k4),
        forcing,
        initial,
        domain: PresetName::Example2RieszDisk.domain(),
        t_final,
        tau,
        coefficients_time_dependent: false,
    };
    Ok((spec, ExactSolution(exact), (kx, ky)))
}

pub fn build_preset(name: PresetName, h_target: f64, tau: f64, opts: PresetOptions) -> Result<Preset, HarnessError> {
    let (a0, b0) = name.default_orders();
    let alpha = opts.alpha.unwrap_or(a0);
    let beta = opts.beta.unwrap_or(b0);
    let t_final = opts.t_final.unwrap_or(1.0);
    let mesh = preset_mesh(name, h_target)?;
    let (spec, exact, riesz) = match name {
        PresetName::Example2RieszDisk => {
            let (spec, exact, k) = example2(tau, alpha, beta, t_final)?;
            (spec, exact, Some(k))
        }
        _ => {
            let (spec, exact) = example1(name, tau, alpha, beta, t_final);
            (spec, exact, None)
        }
    };
    spec.validate()?;
    Ok(Preset {
        name,
        mesh,
        spec,
        exact,
        riesz,
    })
}
