//! The explicit vortex density `μ⋆ = [m⋆]₊ 1_{H ≤ 0}` with
//! `m⋆ = ∇·(ρ⁻¹∇H) = ½Δ log ρ + 2Ω₀`, its support radii and the associated
//! limit energy `½∫H μ⋆`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VortexError};
use crate::grid::{adaptive_simpson, RadialGrid};
use crate::roots::brent;
use crate::scalar::Real;
use crate::tfcore::TfModel;

/// Largest radius (relative to `R^TF`) where `m⋆` is evaluated.
const EDGE_GUARD: f64 = 1e-10;
/// Bracket offset (relative to `R^TF`) used for the root searches.
const BRACKET_DELTA: f64 = 1e-8;

fn check_radius<T: Real>(model: &TfModel<T>, r: T) -> Result<()> {
    if !(r >= T::zero()) || r >= model.r_tf {
        return Err(invalid("r", format!("need 0 <= r < R^TF = {}, got {r}", model.r_tf)));
    }
    Ok(())
}

/// `m⋆` via the planar Laplacian of `log ρ`: `½(ρ''/ρ − (ρ'/ρ)² + ρ'/(rρ)) + 2Ω₀`.
pub fn m_star_log_form<T: Real>(model: &TfModel<T>, r: T) -> Result<T> {
    check_radius(model, r)?;
    let s = model.s();
    let half = T::lit(0.5);
    let rho = model.rho(r);
    let drho = model.drho(r);
    let d2rho = -half * s * (s - T::one()) * r.pow_s(s - T::lit(2.0));
    // ρ'/r stays finite at the origin
    let drho_over_r = -half * s * r.pow_s(s - T::lit(2.0));
    let lap_log = d2rho / rho - (drho / rho) * (drho / rho) + drho_over_r / rho;
    Ok(half * lap_log + T::lit(2.0) * model.omega0())
}

/// `m⋆` in rational form: `2Ω₀ − s² λ r^{s−2} / (8ρ²)`.
pub fn m_star_rational<T: Real>(model: &TfModel<T>, r: T) -> Result<T> {
    check_radius(model, r)?;
    let s = model.s();
    let rho = model.rho(r);
    Ok(T::lit(2.0) * model.omega0()
        - s * s * model.lambda_tf * r.pow_s(s - T::lit(2.0)) / (T::lit(8.0) * rho * rho))
}

pub fn m_star_of_r<T: Real>(model: &TfModel<T>, r: T) -> Result<T> {
    m_star_rational(model, r)
}

/// `m⋆` with the edge guard: `−∞` past `R^TF(1 − 1e−10)`.
fn m_star_guarded<T: Real>(model: &TfModel<T>, r: T) -> T {
    if r > model.r_tf * (T::one() - T::lit(EDGE_GUARD)) {
        T::neg_infinity()
    } else {
        m_star_rational(model, r).unwrap_or(T::neg_infinity())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportRadii<T> {
    /// Zero of `H`.
    pub r1: T,
    /// Zero of `m⋆`.
    pub r2: T,
    pub r_star: T,
}

pub fn support_radii<T: Real>(model: &TfModel<T>) -> Result<SupportRadii<T>> {
    let omega1 = model.omega1();
    if model.omega0() <= omega1 {
        return Err(VortexError::NoNucleation {
            omega0: model.omega0().f64(),
            omega1: omega1.f64(),
        });
    }
    let big = model.r_tf;
    let delta = T::lit(BRACKET_DELTA) * big;
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
    let r1 = brent(|r| model.h_tf(r), delta, big - delta, tol)?;
    let hi = big * (T::one() - T::lit(EDGE_GUARD));
    let r2 = brent(|r| m_star_guarded(model, r).max(-T::max_value()), delta, hi, tol)?;
    Ok(SupportRadii {
        r1,
        r2,
        r_star: r1.min(r2),
    })
}

/// Harmonic (`s = 2`) closed forms with `A = Ω₀(R^TF)²`: `r1/R = √(1 − 2/A)`, `r2/R = √(1 − 1/√A)`.
pub fn harmonic_radii_ratio(a: f64) -> (f64, f64) {
    ((1.0 - 2.0 / a).sqrt(), (1.0 - 1.0 / a.sqrt()).sqrt())
}

#[derive(Clone, Debug)]
pub struct VortexDensity<T> {
    pub grid: RadialGrid<T>,
    /// `m⋆` at the nodes (`−∞` at the support edge of `ρ`).
    pub m_star: Vec<T>,
    /// `[m⋆]₊ 1_{r ≤ R⋆}` at the nodes.
    pub mu_star: Vec<T>,
    pub r1: T,
    pub r2: T,
    pub r_star: T,
    pub total_mass: T,
    pub i_tf: T,
    pub model: TfModel<T>,
}

pub fn mu_star<T: Real>(model: &TfModel<T>, n_nodes: usize) -> Result<VortexDensity<T>> {
    if n_nodes < 256 {
        return Err(invalid("n_nodes", format!("need at least 256 nodes, got {n_nodes}")));
    }
    let grid = RadialGrid::uniform(model.r_tf, n_nodes)?;
    let m_star = grid.sample(|r| m_star_guarded(model, r));
    let radii = match support_radii(model) {
        Ok(r) => r,
        Err(VortexError::NoNucleation { .. }) => {
            return Ok(VortexDensity {
                mu_star: vec![T::zero(); grid.len()],
                grid,
                m_star,
                r1: T::zero(),
                r2: T::zero(),
                r_star: T::zero(),
                total_mass: T::zero(),
                i_tf: T::zero(),
                model: *model,
            })
        }
        Err(e) => return Err(e),
    };
    let rs = radii.r_star;
    let mu: Vec<T> = grid
        .nodes
        .iter()
        .zip(&m_star)
        .map(|(&r, &m)| if r <= rs { m.max(T::zero()) } else { T::zero() })
        .collect();
    let tol = T::lit(1e-13).max(T::epsilon() * T::lit(16.0));
    let mass_integrand = |r: T| r * m_star_guarded(model, r).max(T::zero());
    let total_mass = T::TAU() * adaptive_simpson(&mass_integrand, T::zero(), rs, tol);
    let energy_integrand = |r: T| r * model.h_tf(r) * m_star_guarded(model, r).max(T::zero());
    let i_tf = T::PI() * adaptive_simpson(&energy_integrand, T::zero(), rs, tol);
    Ok(VortexDensity {
        grid,
        m_star,
        mu_star: mu,
        r1: radii.r1,
        r2: radii.r2,
        r_star: rs,
        total_mass,
        i_tf,
        model: *model,
    })
}

impl<T: Real> VortexDensity<T> {
    /// Analytic value of the density at any radius.
    pub fn density_at(&self, r: T) -> T {
        if self.total_mass == T::zero() || r > self.r_star {
            return T::zero();
        }
        m_star_guarded(&self.model, r).max(T::zero())
    }

    pub fn summary(&self) -> MuStarSummary {
        MuStarSummary {
            s: self.model.s().f64(),
            omega0: self.model.omega0().f64(),
            lambda_tf: self.model.lambda_tf.f64(),
            r_tf: self.model.r_tf.f64(),
            r1: self.r1.f64(),
            r2: self.r2.f64(),
            r_star: self.r_star.f64(),
            total_mass: self.total_mass.f64(),
            i_tf: self.i_tf.f64(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(w, &["r", "m_star", "mu_star"], &[&self.grid.nodes, &self.m_star, &self.mu_star])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuStarSummary {
    pub s: f64,
    pub omega0: f64,
    pub lambda_tf: f64,
    pub r_tf: f64,
    pub r1: f64,
    pub r2: f64,
    pub r_star: f64,
    pub total_mass: f64,
    pub i_tf: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twice_critical() -> TfModel<f64> {
        TfModel::with_critical_multiple(2.0, 2.0).unwrap()
    }

    #[test]
    fn forms_agree() {
        for s in [2.0, 3.0, 4.5] {
            let m = TfModel::with_critical_multiple(s, 2.0).unwrap();
            for i in 0..200 {
                let r = m.r_tf * 0.999 * i as f64 / 199.0;
                let a = m_star_log_form(&m, r).unwrap();
                let b = m_star_rational(&m, r).unwrap();
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "s={s} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn center_value_harmonic() {
        let m = twice_critical();
        let v = m_star_of_r(&m, 0.0).unwrap();
        assert!((v - (2.0 * m.omega0() - 2.0 / m.lambda_tf)).abs() < 1e-12);
    }

    #[test]
    fn rejects_edge() {
        let m = twice_critical();
        assert!(m_star_of_r(&m, m.r_tf).is_err());
        assert!(m_star_of_r(&m, -0.1).is_err());
    }

    #[test]
    fn decreasing_toward_edge() {
        let m = twice_critical();
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let r = m.r_tf * (1.0 - 1e-6) * i as f64 / 99.0;
            let v = m_star_of_r(&m, r).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < -1e6);
    }

    #[test]
    fn subcritical_is_empty() {
        let m = TfModel::with_critical_multiple(2.0, 0.9).unwrap();
        assert!(matches!(support_radii(&m), Err(VortexError::NoNucleation { .. })));
        let d = mu_star(&m, 512).unwrap();
        assert_eq!(d.total_mass, 0.0);
        assert_eq!(d.i_tf, 0.0);
        assert!(d.mu_star.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn harmonic_radii_match_closed_forms() {
        for k in [1.2, 1.5, 2.0, 3.0, 5.0] {
            let m = TfModel::with_critical_multiple(2.0, k).unwrap();
            let rad = support_radii(&m).unwrap();
            let (a1, a2) = harmonic_radii_ratio(m.omega0() * m.r_tf * m.r_tf);
            assert!((rad.r1 / m.r_tf - a1).abs() < 1e-10, "k={k}");
            assert!((rad.r2 / m.r_tf - a2).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn radii_tend_to_edge() {
        let mut prev = (0.0, 0.0);
        for k in [2.0, 4.0, 8.0, 16.0] {
            let m = TfModel::with_critical_multiple(3.0, k).unwrap();
            let r = support_radii(&m).unwrap();
            assert!(r.r1 > prev.0 && r.r2 > prev.1);
            prev = (r.r1, r.r2);
        }
    }

    #[test]
    fn density_nonnegative_and_supported() {
        let d = mu_star(&TfModel::with_critical_multiple(2.0, 3.0).unwrap(), 1024).unwrap();
        for (&r, &v) in d.grid.nodes.iter().zip(&d.mu_star) {
            assert!(v >= 0.0);
            if r < d.r_star * 0.999 {
                assert!(v > 0.0);
            }
            if r > d.r_star {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn mass_grows_with_rotation() {
        let mut prev = 0.0;
        for k in [1.2, 1.5, 2.0, 3.0, 5.0] {
            let d = mu_star(&TfModel::with_critical_multiple(2.0, k).unwrap(), 512).unwrap();
            assert!(d.total_mass >= prev);
            assert!(d.i_tf < 0.0);
            prev = d.total_mass;
        }
    }
}
