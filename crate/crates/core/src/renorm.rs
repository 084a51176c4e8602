//! Renormalized energy of radial vorticity measures
//!
//! `𝓘[ν] = ½∫ρ⁻¹|∇h_ν|² + ∫½ρ|ν| + ∫Fν`, where `−∇·(ρ⁻¹∇h_ν) = ν` in `B(r_dom)`
//! and `h_ν = 0` on the boundary. For radial `ν` the potential reduces to two
//! quadratures: `M(r) = ∫₀^r tν`, `h' = −ρM/r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{cumtrapz, RadialGrid};
use crate::mustar::{self, VortexDensity};
use crate::roots::brent;
use crate::scalar::Real;
use crate::tfcore::TfModel;

/// Radial density `ν(r)` sampled on a uniform grid over `[0, r_dom]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialMeasure<T> {
    pub grid: RadialGrid<T>,
    pub density: Vec<T>,
    pub r_dom: T,
}

impl<T: Real> RadialMeasure<T> {
    pub fn new(grid: RadialGrid<T>, density: Vec<T>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(invalid("density", "length differs from grid"));
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(invalid("density", "non-finite sample"));
        }
        Ok(Self {
            r_dom: grid.r_max,
            grid,
            density,
        })
    }

    pub fn zeros(r_dom: T, n: usize) -> Result<Self> {
        let grid = RadialGrid::uniform(r_dom, n)?;
        Self::new(grid.clone(), vec![T::zero(); n])
    }

    pub fn from_fn(r_dom: T, n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let grid = RadialGrid::uniform(r_dom, n)?;
        let d = grid.sample(f);
        Self::new(grid, d)
    }

    /// `μ⋆` resampled on `[0, r_dom]`.
    pub fn from_density(density: &VortexDensity<T>, r_dom: T, n: usize) -> Result<Self> {
        Self::from_fn(r_dom, n, |r| density.density_at(r))
    }

    /// Smooth random measure: a few random cosine modes with amplitude ≤ `amp`.
    pub fn random_smooth(r_dom: T, n: usize, amp: T, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = 6;
        let coef: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = coef.iter().map(|c| c.abs()).sum::<f64>().max(1e-300);
        let rd = r_dom.f64();
        Self::from_fn(r_dom, n, |r| {
            let x = r.f64() / rd;
            let v: f64 = coef
                .iter()
                .enumerate()
                .map(|(k, c)| c * (std::f64::consts::PI * k as f64 * x).cos())
                .sum();
            amp * T::lit(v / norm)
        })
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            density: self.density.iter().map(|&v| v * a).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            density: self.density.iter().zip(&other.density).map(|(&a, &b)| a + b).collect(),
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-T::one()))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(invalid("grid", "measures live on different grids"));
        }
        Ok(())
    }

    /// `∫ν dA`.
    pub fn mass(&self) -> T {
        self.grid.integrate_area(&self.density)
    }

    /// `∫|ν| dA`.
    pub fn abs_mass(&self) -> T {
        let a: Vec<T> = self.density.iter().map(|v| v.abs()).collect();
        self.grid.integrate_area(&a)
    }

    /// `∫ν⁻ dA`.
    pub fn negative_mass(&self) -> T {
        let a: Vec<T> = self.density.iter().map(|v| (-*v).max(T::zero())).collect();
        self.grid.integrate_area(&a)
    }

    /// Area-weighted L¹ distance.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.abs_mass())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W, pot: &PotentialH<T>) -> Result<()> {
        crate::io::write_columns(w, &["r", "nu", "h"], &[&self.grid.nodes, &self.density, &pot.h])
    }
}

/// Potential `h_ν` with the flux `M(r) = ∫₀^r tν dt`.
#[derive(Clone, Debug)]
pub struct PotentialH<T> {
    pub grid: RadialGrid<T>,
    pub h: Vec<T>,
    pub flux: Vec<T>,
}

fn check_domain<T: Real>(nu: &RadialMeasure<T>, model: &TfModel<T>) -> Result<()> {
    if nu.r_dom > model.r_tf * (T::one() + T::lit(1e-12)) {
        return Err(invalid(
            "r_dom",
            format!("domain radius {} exceeds R^TF = {}", nu.r_dom, model.r_tf),
        ));
    }
    Ok(())
}

/// `ρM/r`, extended by zero at the origin.
fn flux_integrand<T: Real>(model: &TfModel<T>, grid: &RadialGrid<T>, m: &[T]) -> Vec<T> {
    grid.nodes
        .iter()
        .zip(m)
        .map(|(&r, &mm)| if r > T::zero() { model.rho(r) * mm / r } else { T::zero() })
        .collect()
}

pub fn solve_potential<T: Real>(nu: &RadialMeasure<T>, model: &TfModel<T>) -> Result<PotentialH<T>> {
    check_domain(nu, model)?;
    let grid = &nu.grid;
    let dr = grid.dr();
    let rn: Vec<T> = grid.nodes.iter().zip(&nu.density).map(|(&r, &v)| r * v).collect();
    let flux = cumtrapz(&rn, dr);
    let q = flux_integrand(model, grid, &flux);
    let cq = cumtrapz(&q, dr);
    let total = *cq.last().unwrap_or(&T::zero());
    let h = cq.iter().map(|&c| total - c).collect();
    Ok(PotentialH {
        grid: grid.clone(),
        h,
        flux,
    })
}

/// `max |∇·(ρ⁻¹∇h) + ν|` over interior nodes, using centered differences of `h`.
pub fn residual_inf<T: Real>(nu: &RadialMeasure<T>, pot: &PotentialH<T>, model: &TfModel<T>) -> T {
    let g = &nu.grid;
    let dr = g.dr();
    let half = T::lit(0.5);
    let n = g.len();
    let mut worst = T::zero();
    for i in 1..n - 1 {
        let r = g.nodes[i];
        let rp = r + half * dr;
        let rm = r - half * dr;
        let (pp, pm) = (model.rho(rp), model.rho(rm));
        if pp <= T::zero() || pm <= T::zero() {
            continue;
        }
        let up = rp / pp * (pot.h[i + 1] - pot.h[i]) / dr;
        let dn = rm / pm * (pot.h[i] - pot.h[i - 1]) / dr;
        let res = (up - dn) / (dr * r) + nu.density[i];
        worst = worst.max(res.abs());
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormReport<T> {
    /// `½∫ρ⁻¹|∇h_ν|²`.
    pub interaction: T,
    /// `∫½ρ|ν|`.
    pub cost: T,
    /// `∫Fν`.
    pub gain: T,
    pub total: T,
}

/// `½∫ρ⁻¹|∇h_ν|² = π∫ρM²/r dr`.
pub fn interaction<T: Real>(nu: &RadialMeasure<T>, model: &TfModel<T>) -> Result<T> {
    let pot = solve_potential(nu, model)?;
    Ok(interaction_from_flux(model, &nu.grid, &pot.flux))
}

fn interaction_from_flux<T: Real>(model: &TfModel<T>, grid: &RadialGrid<T>, flux: &[T]) -> T {
    let m2: Vec<T> = flux.iter().map(|&m| m * m).collect();
    T::PI() * grid.trapz(&flux_integrand(model, grid, &m2))
}

/// `∫ρ⁻¹∇h₁·∇h₂ = 2π∫ρM₁M₂/r dr`.
pub fn bilinear<T: Real>(a: &RadialMeasure<T>, b: &RadialMeasure<T>, model: &TfModel<T>) -> Result<T> {
    a.check_compatible(b)?;
    let pa = solve_potential(a, model)?;
    let pb = solve_potential(b, model)?;
    let prod: Vec<T> = pa.flux.iter().zip(&pb.flux).map(|(&x, &y)| x * y).collect();
    Ok(T::TAU() * a.grid.trapz(&flux_integrand(model, &a.grid, &prod)))
}

/// `∫ν₁ h_{ν₂} dA`.
pub fn pairing<T: Real>(a: &RadialMeasure<T>, b: &RadialMeasure<T>, model: &TfModel<T>) -> Result<T> {
    a.check_compatible(b)?;
    let pb = solve_potential(b, model)?;
    let prod: Vec<T> = a.density.iter().zip(&pb.h).map(|(&x, &y)| x * y).collect();
    Ok(a.grid.integrate_area(&prod))
}

pub fn energy<T: Real>(nu: &RadialMeasure<T>, model: &TfModel<T>) -> Result<RenormReport<T>> {
    let pot = solve_potential(nu, model)?;
    let inter = interaction_from_flux(model, &nu.grid, &pot.flux);
    let half = T::lit(0.5);
    let c: Vec<T> = nu.grid.nodes.iter().zip(&nu.density).map(|(&r, &v)| half * model.rho(r) * v.abs()).collect();
    let gn: Vec<T> = nu.grid.nodes.iter().zip(&nu.density).map(|(&r, &v)| model.f_tf(r) * v).collect();
    let cost = nu.grid.integrate_area(&c);
    let gain = nu.grid.integrate_area(&gn);
    Ok(RenormReport {
        interaction: inter,
        cost,
        gain,
        total: inter + cost + gain,
    })
}

/// `𝓘[ν] − I^TF − ½∫ρ⁻¹|∇h_{ν−μ⋆}|²`, with `I^TF` and `μ⋆` from the explicit density.
pub fn check_stability<T: Real>(nu: &RadialMeasure<T>, density: &VortexDensity<T>) -> Result<T> {
    let model = &density.model;
    let ms = RadialMeasure::from_density(density, nu.r_dom, nu.grid.len())?;
    let e = energy(nu, model)?;
    let q = interaction(&nu.sub(&ms)?, model)?;
    Ok(e.total - density.i_tf - q)
}

#[derive(Clone, Copy, Debug)]
pub struct MinimizeOptions<T> {
    pub max_iter: usize,
    /// Relative energy change below which the iteration stops.
    pub tol: T,
}

impl<T: Real> Default for MinimizeOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol: T::lit(1e-10),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOutcome<T> {
    pub measure: RadialMeasure<T>,
    pub report: RenormReport<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every iteration.
    pub trace: Vec<T>,
    pub step: T,
}

/// Discretized functional: `π Σ D_i M_i² + Σ w_j (F_j ν_j + ½ρ_j|ν_j|)`.
struct Discrete<T> {
    n: usize,
    dr: T,
    r: Vec<T>,
    rho: Vec<T>,
    f: Vec<T>,
    /// Trapezoid area weights.
    w: Vec<T>,
    /// Trapezoid weights times `ρ/r` (zero at the origin).
    d: Vec<T>,
    /// Per-node trapezoid fraction (½ at the outer node).
    omega: Vec<T>,
}

impl<T: Real> Discrete<T> {
    fn new(grid: &RadialGrid<T>, model: &TfModel<T>) -> Self {
        let n = grid.len();
        let dr = grid.dr();
        let half = T::lit(0.5);
        let omega: Vec<T> = (0..n).map(|i| if i == 0 || i == n - 1 { half } else { T::one() }).collect();
        let r = grid.nodes.clone();
        let rho: Vec<T> = r.iter().map(|&x| model.rho(x)).collect();
        let w = (0..n).map(|i| T::TAU() * r[i] * dr * omega[i]).collect();
        let d = (0..n)
            .map(|i| if i == 0 { T::zero() } else { dr * omega[i] * rho[i] / r[i] })
            .collect();
        Self {
            n,
            dr,
            f: r.iter().map(|&x| model.f_tf(x)).collect(),
            r,
            rho,
            w,
            d,
            omega,
        }
    }

    fn flux(&self, nu: &[T]) -> Vec<T> {
        let half = T::lit(0.5);
        let mut m = vec![T::zero(); self.n];
        for i in 1..self.n {
            m[i] = m[i - 1] + half * self.dr * (self.r[i - 1] * nu[i - 1] + self.r[i] * nu[i]);
        }
        m
    }

    /// `W⁻¹Kν`, the discrete potential seen by the gradient; node 0 uses the
    /// same adjoint sum without the vanishing weight.
    fn potential(&self, m: &[T]) -> Vec<T> {
        let half = T::lit(0.5);
        let mut out = vec![T::zero(); self.n];
        let mut tail = T::zero();
        for j in (0..self.n).rev() {
            let dm = self.d[j] * m[j];
            let om = if j == 0 { T::one() } else { self.omega[j] };
            out[j] = (tail + half * dm) / om;
            tail = tail + dm;
        }
        out
    }

    fn energy(&self, nu: &[T]) -> T {
        let m = self.flux(nu);
        let half = T::lit(0.5);
        let quad: T = self.d.iter().zip(&m).map(|(&d, &mm)| d * mm * mm).sum();
        let lin: T = (0..self.n)
            .map(|j| self.w[j] * (self.f[j] * nu[j] + half * self.rho[j] * nu[j].abs()))
            .sum();
        T::PI() * quad + lin
    }

    fn w_dot(&self, a: &[T], b: &[T]) -> T {
        (1..self.n).map(|j| self.w[j] * a[j] * b[j]).sum()
    }

    /// Largest eigenvalue of `W⁻¹K` by power iteration.
    fn lipschitz(&self) -> T {
        let mut v: Vec<T> = (0..self.n).map(|j| T::one() + T::lit(0.1) * T::from_usize_(j % 7)).collect();
        let mut est = T::zero();
        for _ in 0..200 {
            let kv = self.apply_k(&v);
            let nrm = self.w_dot(&kv, &kv).sqrt();
            if nrm <= T::zero() {
                return T::one();
            }
            let new_est = self.w_dot(&v, &kv) / self.w_dot(&v, &v);
            v = kv.iter().map(|&x| x / nrm).collect();
            if (new_est - est).abs() <= T::lit(1e-10) * new_est.abs() {
                est = new_est;
                break;
            }
            est = new_est;
        }
        est
    }

    fn apply_k(&self, nu: &[T]) -> Vec<T> {
        self.potential(&self.flux(nu))
    }

    /// Gradient of the smooth part in the area-weighted metric: `h̃ + F`.
    fn grad(&self, nu: &[T]) -> Vec<T> {
        let k = self.apply_k(nu);
        k.iter().zip(&self.f).map(|(&a, &b)| a + b).collect()
    }

    fn prox_step(&self, y: &[T], g: &[T], step: T) -> Vec<T> {
        let half = T::lit(0.5);
        (0..self.n)
            .map(|j| {
                let z = y[j] - step * g[j];
                let th = step * half * self.rho[j];
                if z > th {
                    z - th
                } else if z < -th {
                    z + th
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

/// Iterations over which the relative energy decrease is measured.
const WINDOW: usize = 500;

/// Accelerated proximal gradient (FISTA with gradient restart) on the discretized functional.
pub fn minimize<T: Real>(
    model: &TfModel<T>,
    init: &RadialMeasure<T>,
    opts: MinimizeOptions<T>,
) -> Result<MinimizeOutcome<T>> {
    check_domain(init, model)?;
    let disc = Discrete::new(&init.grid, model);
    let step = T::lit(0.9) / disc.lipschitz();
    // the outermost node carries no energy on B(R^TF); mass there is pinned to zero
    let mut x = init.density.clone();
    let last = x.len() - 1;
    x[last] = T::zero();
    let mut y = x.clone();
    let mut t = T::one();
    let mut trace = Vec::with_capacity(opts.max_iter.min(100_000));
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let g = disc.grad(&y);
        let mut x_new = disc.prox_step(&y, &g, step);
        x_new[last] = T::zero();
        let t_new = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
        // restart when the momentum direction opposes the gradient mapping
        let diff_yx: Vec<T> = y.iter().zip(&x_new).map(|(&a, &b)| a - b).collect();
        let diff_xx: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let restart = disc.w_dot(&diff_yx, &diff_xx) > T::zero();
        if restart {
            t = T::one();
            y = x_new.clone();
        } else {
            let beta = (t - T::one()) / t_new;
            y = x_new.iter().zip(&diff_xx).map(|(&a, &d)| a + beta * d).collect();
            t = t_new;
        }
        x = x_new;
        let e = disc.energy(&x);
        trace.push(e);
        // the energy is flat along fine-scale modes, so progress is judged over a window
        if it > WINDOW {
            let past = trace[it - 1 - WINDOW];
            let scale = e.abs().max(T::lit(1e-300));
            if (past - e).abs() < opts.tol * scale {
                converged = true;
                break;
            }
        }
    }
    let measure = RadialMeasure::new(init.grid.clone(), x)?;
    let report = energy(&measure, model)?;
    Ok(MinimizeOutcome {
        measure,
        report,
        iterations,
        converged,
        trace,
        step,
    })
}

/// Exact radial minimizer on `B(r_dom)`.
///
/// The minimizer is `m⋆` restricted to a ball `B(a)`; `a` balances the constant
/// picked up by `h` across the vortex-free annulus `(a, r_dom)`:
/// `−H(a) = M(a) ∫_a^{r_dom} ρ/t dt` with `M(a) = aH'(a)/ρ(a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeBoundary<T> {
    pub a: T,
    pub total_mass: T,
    pub energy: T,
}

/// `∫_a^{b} ρ(t)/t dt` in closed form (`b ≤ R^TF`).
fn log_weight<T: Real>(model: &TfModel<T>, a: T, b: T) -> T {
    let s = model.s();
    T::lit(0.5) * (model.lambda_tf * (b / a).ln() - (b.pow_s(s) - a.pow_s(s)) / s)
}

pub fn free_boundary_minimizer<T: Real>(model: &TfModel<T>, r_dom: T) -> Result<FreeBoundary<T>> {
    if r_dom > model.r_tf * (T::one() + T::lit(1e-12)) || !(r_dom > T::zero()) {
        return Err(invalid("r_dom", format!("need 0 < r_dom <= R^TF, got {r_dom}")));
    }
    let radii = mustar::support_radii(model)?;
    let r_dom = r_dom.min(model.r_tf);
    let hi = radii.r_star.min(r_dom);
    let balance = |a: T| {
        let m = a * model.dh_tf(a) / model.rho(a);
        model.h_tf(a) + m * log_weight(model, a, r_dom)
    };
    let lo = hi * T::lit(1e-6);
    let a = if balance(hi) <= T::zero() {
        hi
    } else {
        brent(balance, lo, hi, T::lit(1e-13).max(T::epsilon() * T::lit(8.0)))?
    };
    let tol = T::lit(1e-13).max(T::epsilon() * T::lit(16.0));
    let ms = |r: T| mustar::m_star_of_r(model, r).unwrap_or(T::zero()).max(T::zero());
    let total_mass = T::TAU() * a * model.dh_tf(a) / model.rho(a);
    let energy = T::PI() * crate::grid::adaptive_simpson(&|r: T| r * model.h_tf(r) * ms(r), T::zero(), a, tol);
    Ok(FreeBoundary { a, total_mass, energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mustar::mu_star;

    fn model() -> TfModel<f64> {
        TfModel::with_critical_multiple(2.0, 2.0).unwrap()
    }

    #[test]
    fn zero_measure_has_zero_potential_and_energy() {
        let m = model();
        let nu = RadialMeasure::zeros(m.r_tf, 512).unwrap();
        let p = solve_potential(&nu, &m).unwrap();
        assert!(p.h.iter().all(|&v| v == 0.0));
        assert_eq!(energy(&nu, &m).unwrap().total, 0.0);
    }

    #[test]
    fn potential_satisfies_dirichlet_and_derivative_law() {
        let m = model();
        let nu = RadialMeasure::from_fn(m.r_tf, 2048, |r| (-(r * r) * 4.0).exp()).unwrap();
        let p = solve_potential(&nu, &m).unwrap();
        assert_eq!(*p.h.last().unwrap(), 0.0);
        let dr = nu.grid.dr();
        for i in (100..1900).step_by(100) {
            let r = nu.grid.nodes[i];
            let fd = (p.h[i + 1] - p.h[i - 1]) / (2.0 * dr);
            let law = -m.rho(r) * p.flux[i] / r;
            assert!((fd - law).abs() < 1e-5, "r={r}");
        }
    }

    #[test]
    fn residual_converges_at_second_order() {
        let m = model();
        let mut res = Vec::new();
        for n in [1024, 2048, 4096] {
            let nu = RadialMeasure::from_fn(m.r_tf * 0.9, n, |r| (3.0 * r).cos() + r * r).unwrap();
            let p = solve_potential(&nu, &m).unwrap();
            res.push(residual_inf(&nu, &p, &m));
        }
        let o1 = (res[0] / res[1]).log2();
        let o2 = (res[1] / res[2]).log2();
        assert!(o1 > 1.8 && o2 > 1.8, "orders {o1} {o2} residuals {res:?}");
    }

    #[test]
    fn energy_identity_holds() {
        let m = model();
        let nu = RadialMeasure::from_fn(m.r_tf, 4096, |r| 2.0 - r).unwrap();
        let twice = 2.0 * interaction(&nu, &m).unwrap();
        let paired = pairing(&nu, &nu, &m).unwrap();
        assert!((twice - paired).abs() < 1e-5 * paired.abs());
    }

    #[test]
    fn bilinear_is_symmetric() {
        let m = model();
        let a = RadialMeasure::from_fn(m.r_tf, 4096, |r| 1.0 + r).unwrap();
        let b = RadialMeasure::from_fn(m.r_tf, 4096, |r| (5.0 * r).sin()).unwrap();
        let ab = pairing(&a, &b, &m).unwrap();
        let ba = pairing(&b, &a, &m).unwrap();
        let bl = bilinear(&a, &b, &m).unwrap();
        assert!((ab - ba).abs() < 1e-5 * bl.abs().max(1e-3));
        assert!((ab - bl).abs() < 1e-5 * bl.abs().max(1e-3));
    }

    #[test]
    fn rejects_domain_beyond_support() {
        let m = model();
        let nu = RadialMeasure::zeros(m.r_tf * 1.1, 64).unwrap();
        assert!(solve_potential(&nu, &m).is_err());
    }

    #[test]
    fn explicit_density_potential_is_shifted_cost() {
        // on B(R^TF), h + H is constant on the support, equal to the value of h at R⋆
        let m = model();
        let d = mu_star(&m, 4096).unwrap();
        let nu = RadialMeasure::from_density(&d, m.r_tf, 8192).unwrap();
        let p = solve_potential(&nu, &m).unwrap();
        let k = (d.r_star / nu.grid.dr()) as usize;
        let shift = p.h[k] + m.h_tf(nu.grid.nodes[k]);
        for i in (0..k).step_by(97) {
            let v = p.h[i] + m.h_tf(nu.grid.nodes[i]);
            assert!((v - shift).abs() < 1e-5, "r={} shift={shift} v={v}", nu.grid.nodes[i]);
        }
        assert!(shift > 0.05);
    }

    #[test]
    fn explicit_density_potential_on_its_own_support() {
        // with the boundary placed at R⋆ = R₁ the potential is exactly −H
        let m = model();
        let d = mu_star(&m, 4096).unwrap();
        let nu = RadialMeasure::from_density(&d, d.r_star, 8192).unwrap();
        let p = solve_potential(&nu, &m).unwrap();
        for i in (0..8192).step_by(331) {
            let r = nu.grid.nodes[i];
            assert!((p.h[i] + m.h_tf(r)).abs() < 1e-5, "r={r}");
        }
        let e = energy(&nu, &m).unwrap();
        assert!((e.total - d.i_tf).abs() < 1e-5 * d.i_tf.abs());
    }

    #[test]
    fn doubling_raises_energy() {
        let m = model();
        let d = mu_star(&m, 2048).unwrap();
        let nu = RadialMeasure::from_density(&d, m.r_tf, 2048).unwrap();
        let e1 = energy(&nu, &m).unwrap().total;
        let e2 = energy(&nu.scaled(2.0), &m).unwrap().total;
        assert!(e2 > e1);
    }

    #[test]
    fn free_boundary_balances_potential() {
        let m = model();
        let fb = free_boundary_minimizer(&m, m.r_tf).unwrap();
        let nu = RadialMeasure::from_fn(m.r_tf, 8192, |r| {
            if r <= fb.a {
                mustar::m_star_of_r(&m, r).unwrap()
            } else {
                0.0
            }
        })
        .unwrap();
        let p = solve_potential(&nu, &m).unwrap();
        let k = (fb.a / nu.grid.dr()) as usize;
        for i in (0..k).step_by(53) {
            assert!((p.h[i] + m.h_tf(nu.grid.nodes[i])).abs() < 2e-4);
        }
        // off the support the variational inequality h + H ≥ 0 holds
        for i in (k + 1..8192).step_by(53) {
            assert!(p.h[i] + m.h_tf(nu.grid.nodes[i]) > -2e-4);
        }
        let e = energy(&nu, &m).unwrap().total;
        assert!((e - fb.energy).abs() < 1e-3 * fb.energy.abs());
        assert!((nu.mass() - fb.total_mass).abs() < 1e-3 * fb.total_mass);
    }

    #[test]
    fn free_boundary_on_inner_ball_is_explicit_density() {
        let m = model();
        let d = mu_star(&m, 1024).unwrap();
        let fb = free_boundary_minimizer(&m, d.r_star).unwrap();
        assert!((fb.a - d.r_star).abs() < 1e-9);
        assert!((fb.energy - d.i_tf).abs() < 1e-9 * d.i_tf.abs());
        assert!((fb.total_mass - d.total_mass).abs() < 1e-8 * d.total_mass);
    }

    #[test]
    fn minimize_from_zero_reaches_free_boundary_solution() {
        let m = model();
        let fb = free_boundary_minimizer(&m, m.r_tf).unwrap();
        let init = RadialMeasure::zeros(m.r_tf, 1024).unwrap();
        let out = minimize(&m, &init, MinimizeOptions::default()).unwrap();
        assert!((out.report.total - fb.energy).abs() < 1e-3 * fb.energy.abs(), "{} vs {}", out.report.total, fb.energy);
        assert!(out.measure.negative_mass() < 1e-6);
    }

    #[test]
    fn f32_energy_matches_f64() {
        let m64 = model();
        let m32 = TfModel::<f32>::with_critical_multiple(2.0, 2.0).unwrap();
        let nu64 = RadialMeasure::from_fn(m64.r_tf, 512, |r| 1.0 - r).unwrap();
        let nu32 = RadialMeasure::from_fn(m32.r_tf, 512, |r| 1.0 - r).unwrap();
        let a = energy(&nu64, &m64).unwrap().total;
        let b = energy(&nu32, &m32).unwrap().total as f64;
        assert!((a - b).abs() < 1e-4 * a.abs());
    }
}
