//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so every criterion reports even when an
//! earlier one fails; the process exits non-zero if any criterion fails.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vortex_core::field2d::*;
use vortex_core::gpflow::*;
use vortex_core::lattice::{build_lattice, build_lattice_with, riemann_check};
use vortex_core::mustar::{harmonic_radii_ratio, mu_star, support_radii, VortexDensity};
use vortex_core::renorm::*;
use vortex_core::{TfModel64, VortexError};

type Outcome = Result<(bool, String), VortexError>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn(&mut Shared) -> Outcome,
}

/// State reused between criteria (the ε = 0.05 ground state feeds both 8 and 9).
#[derive(Default)]
struct Shared {
    gap_005: Option<f64>,
}

fn model() -> TfModel64 {
    TfModel64::with_critical_multiple(2.0, 2.0).unwrap()
}

fn density(m: &TfModel64) -> VortexDensity<f64> {
    mu_star(m, 2048).unwrap()
}

fn c1_harmonic(_: &mut Shared) -> Outcome {
    let m = model();
    let a = m.omega0() * m.r_tf * m.r_tf;
    let radii = support_radii(&m)?;
    let (r1, r2) = (radii.r1 / m.r_tf, radii.r2 / m.r_tf);
    let printed_r2 = (1.0 - ((1.0 + 1.5 / a).sqrt() - 1.0) / (4.0 * a)).sqrt();
    let (_, derived_r2) = harmonic_radii_ratio(a);
    let e1 = (r1 - 0.5f64.sqrt()).abs();
    let e2 = (r2 - printed_r2).abs();
    Ok((
        e1 <= 1e-10 && e2 <= 1e-10,
        format!(
            "r1/R={r1:.12} (err {e1:.1e}); r2/R={r2:.12} vs printed closed form {printed_r2:.6} (err {e2:.1e}); \
             root agrees with sqrt(1-1/sqrt(A))={derived_r2:.12} to {:.1e}",
            (r2 - derived_r2).abs()
        ),
    ))
}

fn c2_minimizer(_: &mut Shared) -> Outcome {
    let m = model();
    let d = density(&m);
    let n = 2048;
    let target = RadialMeasure::from_density(&d, m.r_tf, n)?;
    let mut inits = vec![("zero".to_string(), RadialMeasure::zeros(m.r_tf, n)?)];
    for seed in 1..=2 {
        inits.push((format!("random{seed}"), RadialMeasure::random_smooth(m.r_tf, n, 5.0, seed)?));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, init) in inits {
        let out = minimize(&m, &init, MinimizeOptions::default())?;
        let gap = out.measure.l1_distance(&target)? / d.total_mass;
        let de = (out.report.total - d.i_tf).abs() / d.i_tf.abs();
        ok &= out.converged && gap <= 0.02 && de <= 1e-3;
        parts.push(format!("{name}: L1 gap {:.3}, energy {:.6} vs I^TF {:.6} (rel {de:.2e})", gap, out.report.total, d.i_tf));
    }
    Ok((ok, parts.join("; ")))
}

fn c3_stability(_: &mut Shared) -> Outcome {
    let m = model();
    let d = density(&m);
    let n = 2048;
    let base = RadialMeasure::from_density(&d, m.r_tf, n)?;
    // perturbations as large as μ⋆ itself
    let amp = base.density.iter().cloned().fold(0.0, f64::max);
    let mut worst = f64::INFINITY;
    for seed in 0..100 {
        let p = RadialMeasure::random_smooth(m.r_tf, n, amp, seed)?;
        worst = worst.min(check_stability(&base.add(&p)?, &d)?);
    }
    Ok((worst >= -1e-8, format!("min deficit {worst:.6e} over 100 perturbations of sup-amplitude {amp:.4}")))
}

fn c4_green(_: &mut Shared) -> Outcome {
    let m = model();
    let disc = DiscDomain::new(&m, 0.01)?.r_inner;
    let coarse = Grid2D::new(513, m.r_tf)?;
    let pairs = sample_pairs(disc, 50, 4.0 * coarse.spacing, 7);
    let opts = GreenCheckOptions {
        n_coarse: 513,
        extent: m.r_tf,
        smoothing_radius: None,
        symmetry: false,
        solve: SolveOptions::multigrid(),
    };
    let c = green_singularity_check(&m, disc, &pairs, opts)?;
    let ok = c.sup_coarse.is_finite() && c.sup_fine.is_finite() && c.relative_change <= 0.2;
    Ok((
        ok,
        format!(
            "sup {:.5} (513) -> {:.5} (1025), change {:.2e}; min G {:.4}",
            c.sup_coarse, c.sup_fine, c.relative_change, c.min_g
        ),
    ))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c5_riemann(_: &mut Shared) -> Outcome {
    let m = model();
    let mut logl = Vec::new();
    let (mut e1, mut eh) = (Vec::new(), Vec::new());
    for k in 2..=6 {
        let eps = 10f64.powi(-k);
        let lat = build_lattice(&m, eps, None)?;
        logl.push((-eps.ln()).ln());
        e1.push(riemann_check(&lat, &m, |_| 1.0)?.error.ln());
        eh.push(riemann_check(&lat, &m, |r| m.h_tf(r))?.error.ln());
    }
    let (s1, sh) = (slope(&logl, &e1), slope(&logl, &eh));
    Ok((s1 <= 0.6 && sh <= 0.6, format!("log-log slope {s1:.3} (Phi=1), {sh:.3} (Phi=H)")))
}

fn c6_upper_bound(_: &mut Shared) -> Outcome {
    let m = model();
    let d = density(&m);
    let mut ratios = Vec::new();
    let mut notes = Vec::new();
    for eps in [0.05, 0.02, 0.01, 0.005] {
        let lat = match build_lattice(&m, eps, None) {
            Ok(l) => l,
            Err(VortexError::EmptyLattice { .. }) => {
                notes.push(format!("eps={eps}: sparse circles kept"));
                build_lattice_with(&m, eps, None, 1)?
            }
            Err(e) => return Err(e),
        };
        ratios.push(upper_bound_energy(Some(&lat), &d, eps, 2048)?.ratio);
    }
    let gaps: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let last = *gaps.last().unwrap();
    let mut msg = format!("ratios {:?}, final gap {last:.3}", ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>());
    if !notes.is_empty() {
        msg.push_str(&format!(" ({})", notes.join(", ")));
    }
    Ok((monotone && last <= 0.2, msg))
}

fn c7_profile(_: &mut Shared) -> Outcome {
    let m = model();
    let mut checks = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let p = solve_radial_profile(eps, 2.0, ProfileOptions::default())?;
        checks.push(p.check(&m)?);
    }
    let c: Vec<f64> = checks.iter().map(|k| k.c_eps).collect();
    let bounded = c.iter().all(|&v| v <= 1.0) && c[2] <= 1.5 * c[0];
    let tails = checks.iter().all(|k| k.tail_r2 >= 0.98);
    let detail: Vec<String> = checks
        .iter()
        .map(|k| format!("eps={}: C={:.4} R2={:.4} |lambda gap|={:.4}", k.eps, k.c_eps, k.tail_r2, k.lambda_gap))
        .collect();
    Ok((bounded && tails, detail.join("; ")))
}

struct GpRun {
    n_bulk: usize,
    vortices: Vec<Vortex>,
    report: EnergyReport,
    gap: f64,
    spacing: f64,
}

fn gp_run(m: &TfModel64, d: &VortexDensity<f64>, eps: f64) -> Result<GpRun, VortexError> {
    let profile = solve_radial_profile(eps, 2.0, ProfileOptions::default())?;
    let grid = gp_grid(m, eps, 256)?;
    let state = minimize_gp(m, eps, grid, &profile, GpSchedule::default())?;
    let report = energy_decompose(m, &state, &profile)?;
    let mut v = extract_vorticity(m, &state, &profile, default_bin_width(m))?;
    let gap = compare_to_mustar(&mut v, d, eps)?.norm_gap;
    let (r_bulk, _) = bulk_radius(m, eps)?;
    let n_bulk = v.vortices.iter().filter(|p| p.x.hypot(p.y) < r_bulk).count();
    Ok(GpRun {
        n_bulk,
        vortices: v.vortices,
        report,
        gap,
        spacing: grid.spacing,
    })
}

fn c8_phase_transition(shared: &mut Shared) -> Outcome {
    let eps = 0.05;
    let slow = TfModel64::with_critical_multiple(2.0, 0.5)?;
    let sub = gp_run(&slow, &mu_star(&slow, 2048)?, eps)?;
    let m = model();
    let d = density(&m);
    let fast = gp_run(&m, &d, eps)?;
    shared.gap_005 = Some(fast.gap);
    let expected = -eps.ln() / TAU * d.total_mass;
    let count = fast.vortices.len() as f64;
    let count_ok = (count - expected).abs() <= 0.3 * expected;
    let windings_ok = fast.vortices.iter().all(|v| v.winding == 1);
    let margin = d.r1 + 3.0 * (fast.spacing + eps);
    let inside = fast.vortices.iter().all(|v| v.x.hypot(v.y) <= margin);
    let ok = sub.n_bulk == 0
        && count_ok
        && windings_ok
        && inside
        && fast.report.reduced < 0.0
        && fast.report.relative_error <= 5e-3;
    Ok((
        ok,
        format!(
            "slow: {} bulk vortices; fast: {} vortices (expected {expected:.2}), windings {:?}, max |a| {:.3} (limit {margin:.3}), \
             reduced energy {:.4}, identity error {:.2e}",
            sub.n_bulk,
            fast.vortices.len(),
            fast.vortices.iter().map(|v| v.winding).collect::<Vec<_>>(),
            fast.vortices.iter().map(|v| v.x.hypot(v.y)).fold(0.0, f64::max),
            fast.report.reduced,
            fast.report.relative_error
        ),
    ))
}

fn c9_vorticity_trend(shared: &mut Shared) -> Outcome {
    let m = model();
    let d = density(&m);
    let mut gaps = Vec::new();
    for eps in [0.08, 0.05, 0.03] {
        let g = match (eps, shared.gap_005) {
            (e, Some(g)) if e == 0.05 => g,
            _ => gp_run(&m, &d, eps)?.gap,
        };
        gaps.push(g);
    }
    let ok = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((ok, format!("norm gaps {:.4} (0.08), {:.4} (0.05), {:.4} (0.03)", gaps[0], gaps[1], gaps[2])))
}

fn c10_invariants(_: &mut Shared) -> Outcome {
    let m = model();
    let mut fails = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    // GP mass and gradient
    let grid = gp_grid(&m, 0.08, 129)?;
    let p = GpProblem::new(&m, 0.08, grid)?;
    let n = grid.n;
    let mut psi: Vec<Complex64> = (0..grid.len())
        .map(|k| {
            let (i, j) = (k % n, k / n);
            if i == 0 || j == 0 || i + 1 == n || j + 1 == n {
                return Complex64::new(0.0, 0.0);
            }
            let (x, y) = (grid.coord(i), grid.coord(j));
            Complex64::from_polar((-(x * x + y * y)).exp() * rng.gen_range(0.5..1.5), rng.gen_range(0.0..TAU))
        })
        .collect();
    p.normalize(&mut psi);
    let mass_err = (p.mass(&psi) - 1.0).abs();
    let schedule = GpSchedule { max_iter: 25, ..GpSchedule::default() };
    let (after, ..) = run_flow(&p, psi.clone(), &schedule);
    let flow_mass_err = (p.mass(&after) - 1.0).abs();
    if mass_err.max(flow_mass_err) > 1e-14 {
        fails.push(format!("mass error {:.1e}", mass_err.max(flow_mass_err)));
    }
    let grad = p.gradient(&psi);
    let delta = 1e-4;
    let mut worst_fd = 0.0f64;
    for _ in 0..20 {
        let k = rng.gen_range(2..n - 2) * n + rng.gen_range(2..n - 2);
        for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let mut plus = psi.clone();
            let mut minus = psi.clone();
            plus[k] += dir * delta;
            minus[k] -= dir * delta;
            let fd = (p.energy(&plus).total - p.energy(&minus).total) / (2.0 * delta);
            let exact = if dir.re != 0.0 { grad[k].re } else { grad[k].im };
            worst_fd = worst_fd.max((fd - exact).abs() / grad[k].norm());
        }
    }
    if worst_fd > 1e-6 {
        fails.push(format!("gradient rel error {worst_fd:.1e}"));
    }

    // field2d maximum principle and self-adjointness
    let disc = 0.9;
    let g = Grid2D::new(129, m.r_tf)?;
    let mask = disc_mask(&g, disc);
    let solver = WeightedSolver::new(&m, g, disc, SolveOptions { tol: 1e-12, ..SolveOptions::multigrid() })?;
    let mut src = |lo: f64| -> Vec<f64> { mask.iter().map(|&k| if k { rng.gen_range(lo..1.0) } else { 0.0 }).collect() };
    let pos = src(0.0);
    let (f, k) = (src(-1.0), src(-1.0));
    let hp = solver.solve(&pos)?.field.values;
    let hmin = hp.iter().cloned().fold(0.0, f64::min);
    if hmin < 0.0 {
        fails.push(format!("maximum principle violated: min h {hmin:.1e}"));
    }
    let (hf, hk) = (solver.solve(&f)?.field.values, solver.solve(&k)?.field.values);
    let (a, b) = (solver.pairing(&f, &hk), solver.pairing(&k, &hf));
    let sym = (a - b).abs() / a.abs().max(b.abs());
    if sym > 1e-9 {
        fails.push(format!("self-adjointness error {sym:.1e}"));
    }

    // renorm bilinearity
    let mut worst_bil = 0.0f64;
    for seed in 0..10 {
        let x = RadialMeasure::random_smooth(m.r_tf, 1024, 3.0, seed)?;
        let y = RadialMeasure::random_smooth(m.r_tf, 1024, 1.0, seed + 100)?;
        let (ix, iy, bxy) = (interaction(&x, &m)?, interaction(&y, &m)?, bilinear(&x, &y, &m)?);
        let lhs = interaction(&x.add(&y)?, &m)?;
        worst_bil = worst_bil.max((lhs - ix - iy - bxy).abs() / (ix.abs() + iy.abs() + bxy.abs()));
    }
    if worst_bil > 1e-10 {
        fails.push(format!("bilinearity error {worst_bil:.1e}"));
    }
    let summary = format!(
        "mass {:.1e}, gradient {worst_fd:.1e}, min h {hmin:.1e}, symmetry {sym:.1e}, bilinearity {worst_bil:.1e}",
        mass_err.max(flow_mass_err)
    );
    Ok((fails.is_empty(), if fails.is_empty() { summary } else { format!("{}; {summary}", fails.join(", ")) }))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "harmonic closed forms", budget: Duration::from_secs(1), run: c1_harmonic },
        Criterion { id: 2, name: "minimizer recovery", budget: Duration::from_secs(30), run: c2_minimizer },
        Criterion { id: 3, name: "stability inequality", budget: Duration::from_secs(30), run: c3_stability },
        Criterion { id: 4, name: "Green log-singularity", budget: Duration::from_secs(600), run: c4_green },
        Criterion { id: 5, name: "lattice Riemann consistency", budget: Duration::from_secs(5), run: c5_riemann },
        Criterion { id: 6, name: "upper-bound trend", budget: Duration::from_secs(900), run: c6_upper_bound },
        Criterion { id: 7, name: "profile estimates", budget: Duration::from_secs(60), run: c7_profile },
        Criterion { id: 8, name: "GP phase transition", budget: Duration::from_secs(1200), run: c8_phase_transition },
        Criterion { id: 9, name: "vorticity convergence trend", budget: Duration::from_secs(2700), run: c9_vorticity_trend },
        Criterion { id: 10, name: "invariant suites", budget: Duration::from_secs(300), run: c10_invariants },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t = Instant::now();
        let result = (c.run)(&mut shared);
        let dt = t.elapsed();
        let (ok, detail) = match result {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = dt <= c.budget;
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time {
            format!("{:.1}s", dt.as_secs_f64())
        } else {
            format!("{:.1}s over budget {}s", dt.as_secs_f64(), c.budget.as_secs())
        };
        println!(
            "criterion {:>2} {}: {} [{timing}] {detail}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
