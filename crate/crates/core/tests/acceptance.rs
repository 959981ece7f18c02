//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use frac_cvm::assembly::{
    assemble_mass, assemble_rhs, assemble_riesz_stiffness, assemble_stiffness, initial_state, riesz_to_two_sided,
    system_matrix, Discretization, ProblemSpec, SolverChoice,
};
use frac_cvm::cvgeom::build_control_volumes;
use frac_cvm::fracbasis::{
    frac_deriv_at, rl_segment_kernel_left, rl_segment_kernel_right, Axis, FracOrder, LineProfile, Side,
};
use frac_cvm::harness::{
    build_preset, run_convergence, run_density, solve_preset, ConvergenceRow, PresetName,
    PresetOptions,
};
use frac_cvm::mesh::{generate_disk_mesh, generate_rect_mesh, DomainDescriptor, Mesh};
use frac_cvm::solver::{bicgstab, dense_solve, BicgstabParams};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_profile(rng: &mut StdRng) -> LineProfile {
    let n = rng.gen_range(3..=7);
    let a = rng.gen_range(-1.0..1.0);
    let mut bps = vec![a];
    for _ in 1..n {
        let last = *bps.last().unwrap();
        bps.push(last + rng.gen_range(0.1..0.5));
    }
    let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    values[0] = 0.0;
    values[n - 1] = 0.0;
    LineProfile::from_values(Axis::Horizontal, 0.0, bps, &values)
}

fn criterion_1() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst_gl = 0.0f64;
    for _ in 0..100 {
        let profile = random_profile(&mut rng);
        let (lo, hi) = (profile.breakpoints[0], *profile.breakpoints.last().unwrap());
        let f = |s: f64| profile.value_at(s);
        for alpha in [0.3, 0.5, 0.7, 0.9] {
            let order = FracOrder::new(alpha).unwrap();
            let x = rng.gen_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo));
            let left = frac_deriv_at(&profile, order, x, Side::Left);
            let right = frac_deriv_at(&profile, order, x, Side::Right);
            let gl_l = common::gl_left(&f, lo, x, alpha, 20000);
            let gl_r = common::gl_right(&f, hi, x, alpha, 20000);
            worst_gl = worst_gl.max((left - gl_l).abs()).max((right - gl_r).abs());
        }
    }
    let mut worst_quad = 0.0f64;
    for _ in 0..100 {
        let alpha = [0.3, 0.5, 0.7, 0.9][rng.gen_range(0..4)];
        let (p, q) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let s0 = rng.gen_range(-1.0..0.5);
        let s1 = s0 + rng.gen_range(0.05..0.5);
        let x = s1 + rng.gen_range(0.02..0.5);
        let k = rl_segment_kernel_left(p, q, s0, s1, x, alpha).unwrap();
        let o = common::quad_kernel_left(p, q, s0, s1, x, alpha);
        worst_quad = worst_quad.max((k - o).abs() / o.abs().max(1e-300));
        let xr = s0 - rng.gen_range(0.02..0.5);
        let k = rl_segment_kernel_right(p, q, s0, s1, xr, alpha).unwrap();
        let o = common::quad_kernel_right(p, q, s0, s1, xr, alpha);
        worst_quad = worst_quad.max((k - o).abs() / o.abs().max(1e-300));
    }
    check(
        worst_gl <= 1e-4 && worst_quad <= 1e-6,
        format!("max |closed form - GL| = {worst_gl:.2e} (<= 1e-4), max rel vs quadrature = {worst_quad:.2e} (<= 1e-6)"),
    )
}

fn generated_meshes() -> Vec<Mesh> {
    let mut meshes = Vec::new();
    for n in [1, 2, 3, 5, 8, 13, 21] {
        meshes.push(generate_rect_mesh(n, n, DomainDescriptor::unit_square()).unwrap());
    }
    let rect = DomainDescriptor::Rectangle {
        a: -1.0,
        b: 2.0,
        c: 0.0,
        d: 0.5,
    };
    meshes.push(generate_rect_mesh(7, 3, rect).unwrap());
    for h in [0.6, 0.3, 0.15, 0.1, 0.05] {
        meshes.push(generate_disk_mesh(h, DomainDescriptor::unit_disk()).unwrap());
    }
    meshes
}

fn criterion_2() -> Outcome {
    let (mut thirds, mut area, mut closure) = (0.0f64, 0.0f64, 0.0f64);
    let meshes = generated_meshes();
    for mesh in &meshes {
        let cv = build_control_volumes(mesh).unwrap();
        for (t, sub) in cv.sub_cv_area().iter().enumerate() {
            let tri = mesh.triangle_area(t);
            for a in sub {
                thirds = thirds.max((a - tri / 3.0).abs() / tri);
            }
        }
        area = area.max((cv.total_area() - mesh.total_area()).abs() / mesh.total_area());
        for i in (0..mesh.n_vertices()).filter(|&i| !mesh.is_boundary(i)) {
            let (sx, sy) = cv.faces_of(i).iter().fold((0.0, 0.0), |(sx, sy), f| (sx + f.dx, sy + f.dy));
            closure = closure.max(sx.abs()).max(sy.abs());
        }
    }
    check(
        thirds <= 1e-12 && area <= 1e-12 && closure <= 1e-13,
        format!(
            "{} meshes: thirds {thirds:.1e}, area {area:.1e}, closure {closure:.1e}",
            meshes.len()
        ),
    )
}

fn max_dense_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for name in PresetName::ALL {
        let hs: &[f64] = match name {
            PresetName::Example2RieszDisk => &[0.6, 0.3],
            _ => &[2f64.sqrt() / 6.0, 2f64.sqrt() / 9.0],
        };
        for &h in hs {
            let preset = build_preset(name, h, 1e-3, PresetOptions::default()).unwrap();
            assert!(preset.mesh.n_vertices() <= 100);
            let disc = Discretization::new(preset.mesh).unwrap();
            let sparse = assemble_stiffness(&disc, &preset.spec, 0.0).unwrap().to_dense();
            let dense = common::dense_stiffness(&disc, &preset.spec, 0.0);
            worst = worst.max(max_dense_diff(&sparse, &dense));
            cases += 1;
        }
    }
    check(worst <= 1e-13, format!("{cases} meshes, max entry difference {worst:.2e} (<= 1e-13)"))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for (name, alpha, beta) in [
        (PresetName::Example2RieszDisk, 0.8, 0.8),
        (PresetName::Example2RieszDisk, 0.3, 0.6),
        (PresetName::Example1Linear, 0.5, 0.9),
    ] {
        let mut preset = build_preset(name, 0.2, 1e-3, PresetOptions::default()).unwrap();
        let (kx, ky) = (1.0, 2.5);
        let k = riesz_to_two_sided(kx, ky, alpha, beta).unwrap();
        preset.spec.alpha = alpha;
        preset.spec.beta = beta;
        preset.spec.k1 = std::sync::Arc::new(move |_, _, _| k[0]);
        preset.spec.k2 = std::sync::Arc::new(move |_, _, _| k[1]);
        preset.spec.k3 = std::sync::Arc::new(move |_, _, _| k[2]);
        preset.spec.k4 = std::sync::Arc::new(move |_, _, _| k[3]);
        let disc = Discretization::new(preset.mesh).unwrap();
        let via_constants = assemble_stiffness(&disc, &preset.spec, 0.0).unwrap().to_dense();
        let direct = assemble_riesz_stiffness(&disc, kx, ky, alpha, beta).unwrap().to_dense();
        worst = worst.max(max_dense_diff(&via_constants, &direct));
    }
    check(worst <= 1e-12, format!("max entry difference {worst:.2e} (<= 1e-12)"))
}

fn describe(rows: &[ConvergenceRow]) -> String {
    rows.iter()
        .map(|r| {
            format!(
                "h={:.3e} L2={:.3e} Linf={:.3e} orders L2/Linf={}/{}",
                r.h,
                r.l2_error,
                r.linf_error,
                r.order_l2.map_or("-".into(), |o| format!("{o:.2}")),
                r.order_linf.map_or("-".into(), |o| format!("{o:.2}")),
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

const LEVELS: [f64; 3] = [0.3, 0.15, 0.075];

fn finest_linf_order(name: PresetName, alpha: f64, beta: f64, lo: f64, hi: f64) -> Outcome {
    let opts = PresetOptions {
        alpha: Some(alpha),
        beta: Some(beta),
        t_final: Some(1.0),
    };
    let rows = run_convergence(name, &LEVELS, 1e-3, opts, SolverChoice::BiCgStab).map_err(|e| e.to_string())?;
    let order = rows.last().unwrap().order_linf.unwrap_or(f64::NAN);
    check(
        (lo..=hi).contains(&order),
        format!("{name} a={alpha} b={beta}: finest Linf order {order:.3} in [{lo}, {hi}]; {}", describe(&rows)),
    )
}

fn criterion_5() -> Outcome {
    finest_linf_order(PresetName::Example1Linear, 0.3, 0.5, 1.3, 2.3)
}

fn criterion_6() -> Outcome {
    let a = finest_linf_order(PresetName::Example1Quadratic, 0.7, 0.9, 1.2, 2.4);
    let b = finest_linf_order(PresetName::Example1Exponential, 0.7, 0.9, 1.2, 2.4);
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(format!("{a} | {b}")),
        (a, b) => Err(format!("{} | {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e))),
    }
}

fn criterion_7() -> Outcome {
    let opts = PresetOptions {
        alpha: Some(0.8),
        beta: Some(0.8),
        t_final: Some(1.0),
    };
    let rows = run_convergence(PresetName::Example2RieszDisk, &LEVELS, 1e-3, opts, SolverChoice::BiCgStab)
        .map_err(|e| e.to_string())?;
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order_l2).collect();
    check(
        orders.len() == 2 && orders.iter().all(|o| (1.7..=2.4).contains(o)),
        format!("L2 orders {orders:.3?} in [1.7, 2.4]; {}", describe(&rows)),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut systems = 0;
    for name in PresetName::ALL {
        let hs: &[f64] = match name {
            PresetName::Example2RieszDisk => &[0.3, 0.15],
            _ => &[0.3, 0.15, 0.08],
        };
        for &h in hs {
            for tau in [1e-3, 1e-2, 1e-1] {
                let preset = build_preset(name, h, tau, PresetOptions::default()).unwrap();
                let spec: &ProblemSpec = &preset.spec;
                let disc = Discretization::new(preset.mesh.clone()).unwrap();
                if disc.n_dofs() > 300 {
                    continue;
                }
                let mass = assemble_mass(disc.cv(), disc.dofs()).unwrap();
                let m = assemble_stiffness(&disc, spec, 0.0).unwrap();
                let a0 = system_matrix(&mass, &m, tau);
                let u0 = initial_state(&disc, spec).u;
                let f = assemble_rhs(&disc, spec, tau).unwrap();
                let b: Vec<f64> = (0..u0.len()).map(|i| mass[i] * (u0[i] + tau * f[i])).collect();
                let (x, report) = bicgstab(&a0, &b, &u0, BicgstabParams::default()).map_err(|e| e.to_string())?;
                if !report.converged {
                    return Err(format!("{name} h={h} tau={tau}: Bi-CGSTAB did not converge"));
                }
                let xd = dense_solve(&a0.to_dense(), &b).map_err(|e| e.to_string())?;
                let diff = x.iter().zip(&xd).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                worst = worst.max(diff);
                systems += 1;
            }
        }
    }
    let mut iters = Vec::new();
    for name in [PresetName::Example1Linear, PresetName::Example1Quadratic, PresetName::Example1Exponential] {
        let out = solve_preset(name, 0.17, 1e-3, PresetOptions::default(), SolverChoice::BiCgStab)
            .map_err(|e| e.to_string())?;
        iters.push(out.iters_avg);
    }
    check(
        worst <= 1e-8 && iters.iter().all(|&i| i <= 30.0),
        format!("{systems} systems, max |x_bicgstab - x_dense| = {worst:.2e}; average iterations {iters:.2?} (<= 30)"),
    )
}

fn criterion_9() -> Outcome {
    let levels: Vec<f64> = [4.0, 8.0, 16.0, 32.0].iter().map(|n| 2f64.sqrt() / n).collect();
    let rows = run_density(PresetName::Example1Linear, &levels, PresetOptions::default()).map_err(|e| e.to_string())?;
    let d: Vec<f64> = rows.iter().map(|r| r.density_percent).collect();
    check(
        d.windows(2).all(|w| w[1] < w[0]),
        format!(
            "sizes {:?}, densities {d:.3?} %",
            rows.iter().map(|r| r.n_dofs).collect::<Vec<_>>()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let mut report = Vec::new();
    let mut ok = true;
    for name in PresetName::ALL {
        let preset = build_preset(name, 0.3, 1e-3, PresetOptions::default()).unwrap();
        let exact = preset.exact.clone();
        let u = move |x: f64, y: f64, t: f64| exact.eval(x, y, t);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (x, y) = match name {
                PresetName::Example2RieszDisk => {
                    let r = rng.gen_range(0.0f64..0.9).sqrt();
                    let th = rng.gen_range(0.0..std::f64::consts::TAU);
                    (r * th.cos(), r * th.sin())
                }
                _ => (rng.gen_range(0.02..0.98), rng.gen_range(0.02..0.98)),
            };
            let t = rng.gen_range(0.0..1.0);
            let r = common::pde_residual(&preset.spec, &u, x, y, t, 4000);
            worst = worst.max(r.abs());
        }
        ok &= worst <= 1e-4;
        report.push(format!("{name} {worst:.2e}"));
    }
    check(ok, format!("max |residual| (<= 1e-4): {}", report.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("kernel oracles", criterion_1),
        ("control volume geometry", criterion_2),
        ("sparse vs dense assembly", criterion_3),
        ("Riesz equivalence", criterion_4),
        ("convergence, linear coefficients", criterion_5),
        ("convergence, quadratic and exponential coefficients", criterion_6),
        ("convergence, Riesz on the disk", criterion_7),
        ("Bi-CGSTAB vs dense solve", criterion_8),
        ("stiffness density trend", criterion_9),
        ("manufactured-solution residuals", criterion_10),
    ];
    let mut failed = 0;
    for (i, (label, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {label} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {label} ({secs:.1}s): {detail}", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
