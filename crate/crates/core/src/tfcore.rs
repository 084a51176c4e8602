//! Thomas–Fermi profile of the trapped condensate, the first critical speed and the
//! vortex cost/gain functions `F` and `H = ½ρ + F`.

use crate::error::{invalid, Result};
use crate::grid::{adaptive_simpson, RadialGrid};
use crate::scalar::Real;

/// Trap exponent and rotation coefficient (`Ω = Ω₀|log ε|`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapParams<T> {
    pub s: T,
    pub omega0: T,
}

impl<T: Real> TrapParams<T> {
    pub fn new(s: T, omega0: T) -> Result<Self> {
        let p = Self { s, omega0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= T::lit(2.0)) || !self.s.is_finite() {
            return Err(invalid("s", format!("trap exponent must satisfy s >= 2, got {}", self.s)));
        }
        if !(self.omega0 > T::zero()) || !self.omega0.is_finite() {
            return Err(invalid("omega0", format!("must be positive, got {}", self.omega0)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TfModel<T> {
    pub params: TrapParams<T>,
    /// Chemical potential of the profile, fixed by unit mass.
    pub lambda_tf: T,
    /// Support radius, `λ^{1/s}`.
    pub r_tf: T,
    /// `E^TF = etf_coeff / ε²`.
    pub etf_coeff: T,
}

pub fn build_tf_model<T: Real>(params: TrapParams<T>) -> Result<TfModel<T>> {
    params.validate()?;
    let s = params.s;
    let two = T::lit(2.0);
    let pi = T::PI();
    let lambda_tf = (two * (s + two) / (pi * s)).powf(s / (s + two));
    let r_tf = lambda_tf.powf(T::one() / s);
    let etf_coeff =
        pi * s / (T::lit(4.0) * (s + T::one())) * lambda_tf.powf(two * (s + T::one()) / s);
    Ok(TfModel {
        params,
        lambda_tf,
        r_tf,
        etf_coeff,
    })
}

impl<T: Real> TfModel<T> {
    /// Convenience constructor for a model whose rotation is a multiple of `Ω₁`.
    pub fn with_critical_multiple(s: T, k: T) -> Result<Self> {
        let base = build_tf_model(TrapParams::new(s, T::one())?)?;
        let omega0 = k * base.omega1();
        if !(omega0 > T::zero()) {
            return Err(invalid("omega0", format!("multiple of the critical speed must be positive, got {k}")));
        }
        Ok(Self {
            params: TrapParams { s, omega0 },
            ..base
        })
    }

    #[inline]
    pub fn s(&self) -> T {
        self.params.s
    }

    #[inline]
    pub fn omega0(&self) -> T {
        self.params.omega0
    }

    /// Same trap, different rotation.
    pub fn with_omega0(&self, omega0: T) -> Result<Self> {
        let params = TrapParams::new(self.params.s, omega0)?;
        Ok(Self { params, ..*self })
    }

    /// `½[λ − r^s]₊`.
    #[inline]
    pub fn rho(&self, r: T) -> T {
        if r.abs() >= self.r_tf {
            return T::zero();
        }
        let v = T::lit(0.5) * (self.lambda_tf - r.abs().pow_s(self.s()));
        v.max(T::zero())
    }

    /// `ρ'(r)` inside the support.
    #[inline]
    pub fn drho(&self, r: T) -> T {
        if r >= self.r_tf {
            return T::zero();
        }
        let s = self.s();
        -T::lit(0.5) * s * r.pow_s(s - T::one())
    }

    /// First critical speed coefficient `Ω₁ = (π/2)λ`.
    #[inline]
    pub fn omega1(&self) -> T {
        T::FRAC_PI_2() * self.lambda_tf
    }

    /// Closed form of `F(r) = −Ω₀ ∫_r^R t ρ(t) dt`; zero beyond the support.
    pub fn f_tf(&self, r: T) -> T {
        let r = r.min(self.r_tf);
        let s = self.s();
        let big = self.r_tf;
        let two = T::lit(2.0);
        let rs2 = big.pow_s(s + two) - r.pow_s(s + two);
        -T::lit(0.25)
            * self.omega0()
            * (big.pow_s(s) * (big * big - r * r) - two / (s + two) * rs2)
    }

    /// Quadrature route for `F`, independent of the closed form.
    pub fn f_tf_quadrature(&self, r: T, tol: T) -> T {
        let r = r.min(self.r_tf);
        let integrand = |t: T| t * self.rho(t);
        -self.omega0() * adaptive_simpson(&integrand, r, self.r_tf, tol)
    }

    /// `H = ½ρ + F`.
    #[inline]
    pub fn h_tf(&self, r: T) -> T {
        T::lit(0.5) * self.rho(r) + self.f_tf(r)
    }

    /// `H'(r) = (r/2)(−(s/2) r^{s−2} + Ω₀(λ − r^s))` on the support.
    pub fn dh_tf(&self, r: T) -> T {
        if r >= self.r_tf {
            return T::zero();
        }
        let s = self.s();
        let half = T::lit(0.5);
        half * r * (-(half * s) * r.pow_s(s - T::lit(2.0)) + self.omega0() * (self.lambda_tf - r.pow_s(s)))
    }

    /// Total TF mass `2π∫ρ r dr` by adaptive quadrature (should be one).
    pub fn mass(&self) -> T {
        let f = |r: T| r * self.rho(r);
        T::TAU() * adaptive_simpson(&f, T::zero(), self.r_tf, T::lit(1e-14))
    }
}

pub fn rho_tf<T: Real>(model: &TfModel<T>, r: T) -> T {
    model.rho(r)
}

pub fn omega_c1<T: Real>(model: &TfModel<T>) -> T {
    model.omega1()
}

/// `F` and `H` sampled on a uniform grid over `[0, R^TF]`.
#[derive(Clone, Debug)]
pub struct CostProfile<T> {
    pub grid: RadialGrid<T>,
    pub rho_tf: Vec<T>,
    pub f_tf: Vec<T>,
    pub h_tf: Vec<T>,
    pub omega0: T,
    pub omega1: T,
}

pub fn cost_profile<T: Real>(model: &TfModel<T>, omega0: T, n_nodes: usize) -> Result<CostProfile<T>> {
    if n_nodes < 64 {
        return Err(invalid("n_nodes", format!("need at least 64 nodes, got {n_nodes}")));
    }
    let m = model.with_omega0(omega0)?;
    let grid = RadialGrid::uniform(m.r_tf, n_nodes)?;
    let rho_tf = grid.sample(|r| m.rho(r));
    let f_tf = grid.sample(|r| m.f_tf(r));
    let h_tf = grid.sample(|r| m.h_tf(r));
    Ok(CostProfile {
        grid,
        rho_tf,
        f_tf,
        h_tf,
        omega0,
        omega1: m.omega1(),
    })
}

impl<T: Real> CostProfile<T> {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let cols = [&self.grid.nodes, &self.rho_tf, &self.f_tf, &self.h_tf];
        crate::io::write_columns(w, &["r", "rho_tf", "f_tf", "h_tf"], &cols)
    }
}
