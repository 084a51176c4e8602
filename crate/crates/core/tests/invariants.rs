use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vortex_core::field2d::*;
use vortex_core::gpflow::*;
use vortex_core::renorm::{bilinear, interaction, pairing, RadialMeasure};
use vortex_core::TfModel64;

const DISC: f64 = 0.9;

fn model() -> TfModel64 {
    TfModel64::with_critical_multiple(2.0, 2.0).unwrap()
}

fn random_source(g: &Grid2D<f64>, seed: u64, nonneg: bool) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = disc_mask(g, DISC);
    mask.iter()
        .map(|&m| {
            if !m {
                0.0
            } else if nonneg {
                rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

/// Random smooth-modulus state with a random phase on the GP grid.
fn random_state(p: &GpProblem<f64>, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.grid.n;
    let mut psi: Vec<Complex64> = (0..p.grid.len())
        .map(|k| {
            let (i, j) = (k % n, k / n);
            if i == 0 || j == 0 || i + 1 == n || j + 1 == n {
                return Complex64::new(0.0, 0.0);
            }
            let (x, y) = (p.grid.coord(i), p.grid.coord(j));
            let a = (-(x * x + y * y)).exp() * rng.gen_range(0.5..1.5);
            Complex64::from_polar(a, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    p.normalize(&mut psi);
    psi
}

fn gp_problem() -> GpProblem<f64> {
    let m = model();
    let grid = gp_grid(&m, 0.08, 129).unwrap();
    GpProblem::new(&m, 0.08, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn renorm_bilinearity(sa in 0u64..1000, sb in 0u64..1000, amp_a in 0.1f64..5.0, amp_b in 0.1f64..5.0) {
        let m = model();
        let a = RadialMeasure::random_smooth(m.r_tf, 1024, amp_a, sa).unwrap();
        let b = RadialMeasure::random_smooth(m.r_tf, 1024, amp_b, sb).unwrap();
        let lhs = interaction(&a.add(&b).unwrap(), &m).unwrap();
        let ia = interaction(&a, &m).unwrap();
        let ib = interaction(&b, &m).unwrap();
        let ab = bilinear(&a, &b, &m).unwrap();
        let scale = ia.abs() + ib.abs() + ab.abs();
        prop_assert!((lhs - ia - ib - ab).abs() <= 1e-10 * scale);
        prop_assert!((ab - bilinear(&b, &a, &m).unwrap()).abs() <= 1e-12 * scale);
        // integration by parts: ∫a h_b = ∫ρ⁻¹∇h_a·∇h_b
        let pab = pairing(&a, &b, &m).unwrap();
        prop_assert!((pab - ab).abs() <= 1e-3 * scale, "pairing {} bilinear {}", pab, ab);
    }

    #[test]
    fn weighted_operator_is_self_adjoint(seed in 0u64..10_000) {
        let m = model();
        let g = Grid2D::new(129, m.r_tf).unwrap();
        let solver = WeightedSolver::new(&m, g, DISC, SolveOptions { tol: 1e-12, ..SolveOptions::multigrid() }).unwrap();
        let f = random_source(&g, seed, false);
        let k = random_source(&g, seed.wrapping_add(7919), false);
        let hf = solver.solve(&f).unwrap().field.values;
        let hk = solver.solve(&k).unwrap().field.values;
        let a = solver.pairing(&f, &hk);
        let b = solver.pairing(&k, &hf);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn discrete_maximum_principle(seed in 0u64..10_000) {
        let m = model();
        let g = Grid2D::new(129, m.r_tf).unwrap();
        let f = random_source(&g, seed, true);
        let src = ScalarField2D { grid: g, values: f, mask: disc_mask(&g, DISC) };
        let h = solve_weighted_poisson(&src, &m, DISC, SolveOptions { tol: 1e-12, ..SolveOptions::multigrid() }).unwrap();
        let max = h.field.values.iter().cloned().fold(0.0, f64::max);
        let min = h.field.values.iter().cloned().fold(0.0, f64::min);
        prop_assert!(min >= -1e-10 * max, "min {} max {}", min, max);
    }

    #[test]
    fn projection_restores_unit_mass(seed in 0u64..10_000, scale in 1e-3f64..1e3) {
        let p = gp_problem();
        let mut psi = random_state(&p, seed);
        for z in psi.iter_mut() {
            *z *= scale;
        }
        p.normalize(&mut psi);
        prop_assert!((p.mass(&psi) - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn flow_steps_keep_unit_mass() {
    let p = gp_problem();
    let psi = random_state(&p, 3);
    let schedule = GpSchedule {
        max_iter: 25,
        ..GpSchedule::default()
    };
    let (out, trace, ..) = run_flow(&p, psi, &schedule);
    assert!((p.mass(&out) - 1.0).abs() <= 1e-14, "mass {}", p.mass(&out));
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "energy rose {} -> {}", w[0], w[1]);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let p = gp_problem();
    let psi = random_state(&p, 5);
    let grad = p.gradient(&psi);
    let n = p.grid.n;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // rounding (|E|·ulp/δ) and the quartic truncation term balance near 1e-4
    let delta = 1e-4;
    let e = |v: &[Complex64]| p.energy(v).total;
    for _ in 0..20 {
        let k = rng.gen_range(2..n - 2) * n + rng.gen_range(2..n - 2);
        for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let mut plus = psi.clone();
            let mut minus = psi.clone();
            plus[k] += dir * delta;
            minus[k] -= dir * delta;
            let fd = (e(&plus) - e(&minus)) / (2.0 * delta);
            let exact = if dir.re != 0.0 { grad[k].re } else { grad[k].im };
            let rel = (fd - exact).abs() / exact.abs().max(grad[k].norm());
            assert!(rel <= 1e-6, "node {k}: fd {fd} vs gradient {exact} (rel {rel})");
        }
    }
}
