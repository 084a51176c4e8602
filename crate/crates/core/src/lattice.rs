//! Trial vortex configurations: concentric circles `ϱ_k = k/√|log ε|` carrying
//! `N_k = ⌊√|log ε| ϱ_k m⋆(ϱ_k)⌋` equally spaced points, and the smoothed
//! measure that replaces each point by a uniform ball of mass `2π`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VortexError};
use crate::grid::adaptive_simpson;
use crate::mustar::{self, m_star_of_r};
use crate::scalar::Real;
use crate::tfcore::TfModel;

/// Circles with fewer points than this are discarded.
pub const MIN_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Circle<T> {
    pub k: usize,
    pub radius: T,
    pub n_points: usize,
    /// Angular spacing `2π/N_k`.
    pub theta: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VortexLattice<T> {
    pub eps: T,
    pub k0: usize,
    pub circles: Vec<Circle<T>>,
    pub points: Vec<[T; 2]>,
    /// Circle index `k` of every point.
    pub point_circle: Vec<usize>,
    pub n_total: usize,
}

/// `|log ε|` after checking `0 < ε < 1/e`.
pub fn log_eps<T: Real>(eps: T) -> Result<T> {
    if !(eps > T::zero()) || eps >= (-T::one()).exp() {
        return Err(invalid("eps", format!("need 0 < eps < 1/e, got {eps}")));
    }
    Ok(-eps.ln())
}

/// Point count on the circle of index `k` (before the `N_k ≥ 4` filter).
pub fn circle_count<T: Real>(model: &TfModel<T>, k: usize, sqrt_l: T) -> Result<usize> {
    let rho_k = T::from_usize_(k) / sqrt_l;
    let m = m_star_of_r(model, rho_k)?;
    let n = (sqrt_l * rho_k * m).floor();
    Ok(if n > T::zero() { n.to_usize().unwrap_or(0) } else { 0 })
}

/// Builds the configuration. `k0 = None` picks the smallest index with at
/// least [`MIN_POINTS`] points; `min_points` lowers that threshold (used only
/// for seeding field solves at large `ε`).
pub fn build_lattice_with<T: Real>(
    model: &TfModel<T>,
    eps: T,
    k0: Option<usize>,
    min_points: usize,
) -> Result<VortexLattice<T>> {
    let l = log_eps(eps)?;
    let sqrt_l = l.sqrt();
    let radii = match mustar::support_radii(model) {
        Ok(r) => Some(r),
        Err(VortexError::NoNucleation { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut circles = Vec::new();
    if let Some(radii) = radii {
        let k_max = (radii.r_star * sqrt_l).floor().to_usize().unwrap_or(0);
        let start = k0.unwrap_or(1).max(1);
        for k in start..=k_max {
            let rho_k = T::from_usize_(k) / sqrt_l;
            // support of μ⋆ is the intersection of {m⋆ > 0} and {H ≤ 0}
            if rho_k > radii.r_star || model.h_tf(rho_k) > T::zero() {
                continue;
            }
            let n = circle_count(model, k, sqrt_l)?;
            if n < min_points {
                continue;
            }
            circles.push(Circle {
                k,
                radius: rho_k,
                n_points: n,
                theta: T::TAU() / T::from_usize_(n),
            });
        }
    }
    if circles.is_empty() {
        return Err(VortexError::EmptyLattice { min_points });
    }
    let mut points = Vec::new();
    let mut point_circle = Vec::new();
    for c in &circles {
        for i in 0..c.n_points {
            let th = (T::from_usize_(i) + T::lit(0.5)) * c.theta;
            points.push([c.radius * th.cos(), c.radius * th.sin()]);
            point_circle.push(c.k);
        }
    }
    let k0 = circles[0].k;
    Ok(VortexLattice {
        eps,
        k0,
        n_total: points.len(),
        circles,
        points,
        point_circle,
    })
}

pub fn build_lattice<T: Real>(model: &TfModel<T>, eps: T, k0: Option<usize>) -> Result<VortexLattice<T>> {
    build_lattice_with(model, eps, k0, MIN_POINTS)
}

impl<T: Real> VortexLattice<T> {
    pub fn log_eps(&self) -> T {
        -self.eps.ln()
    }

    /// Smallest pairwise distance (brute force; lattices hold `O(|log ε|)` points).
    pub fn min_separation(&self) -> Option<(usize, usize, T)> {
        let mut best: Option<(usize, usize, T)> = None;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d = dist(self.points[i], self.points[j]);
                if best.map_or(true, |b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }

    /// `(2π/|log ε|)` times the point count per annulus, divided by its area.
    ///
    /// Bin `b` covers `[(b − ½)w, (b + ½)w) ∩ [0, ∞)` so that circles at multiples
    /// of `w` sit at bin centres; returns (centres `b·w`, density).
    pub fn radial_density(&self, r_max: T, bin_width: T) -> (Vec<T>, Vec<T>) {
        let half = T::lit(0.5);
        let nb = (r_max / bin_width + half).ceil().to_usize().unwrap_or(1).max(1);
        let mut counts = vec![0usize; nb];
        for p in &self.points {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let b = (r / bin_width + half).floor().to_usize().unwrap_or(0);
            if b < nb {
                counts[b] += 1;
            }
        }
        let l = self.log_eps();
        let centres = (0..nb).map(|b| T::from_usize_(b) * bin_width).collect();
        let dens = (0..nb)
            .map(|b| {
                let c = T::from_usize_(b) * bin_width;
                let lo = (c - half * bin_width).max(T::zero());
                let hi = c + half * bin_width;
                let area = T::PI() * (hi * hi - lo * lo);
                T::TAU() * T::from_usize_(counts[b]) / (l * area)
            })
            .collect();
        (centres, dens)
    }

    pub fn summary(&self) -> LatticeSummary {
        LatticeSummary {
            eps: self.eps.f64(),
            n_total: self.n_total,
            circles: self
                .circles
                .iter()
                .map(|c| CircleSummary {
                    k: c.k,
                    rho_k: c.radius.f64(),
                    n_k: c.n_points,
                })
                .collect(),
        }
    }

    pub fn write_points_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .points
            .iter()
            .zip(&self.point_circle)
            .map(|(p, &k)| vec![p[0].f64(), p[1].f64(), k as f64])
            .collect();
        crate::io::write_rows(w, &["x", "y", "k"], &rows)
    }
}

fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    ((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSummary {
    pub k: usize,
    pub rho_k: f64,
    pub n_k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub eps: f64,
    pub n_total: usize,
    pub circles: Vec<CircleSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannCheck<T> {
    pub discrete_sum: T,
    pub continuum_integral: T,
    pub error: T,
}

/// Compares `2π Σ Φ(|a_i|)` with `|log ε| ∫ Φ μ⋆` for a radial test function.
pub fn riemann_check<T: Real>(
    lattice: &VortexLattice<T>,
    model: &TfModel<T>,
    phi: impl Fn(T) -> T,
) -> Result<RiemannCheck<T>> {
    let l = log_eps(lattice.eps)?;
    let discrete_sum = T::TAU()
        * lattice
            .points
            .iter()
            .map(|p| phi((p[0] * p[0] + p[1] * p[1]).sqrt()))
            .sum::<T>();
    let radii = mustar::support_radii(model)?;
    let integrand = |r: T| r * phi(r) * m_star_of_r(model, r).unwrap_or(T::zero()).max(T::zero());
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let continuum_integral = l * T::TAU() * adaptive_simpson(&integrand, T::zero(), radii.r_star, tol);
    Ok(RiemannCheck {
        discrete_sum,
        continuum_integral,
        error: (discrete_sum - continuum_integral).abs(),
    })
}

/// Uniform balls `B(a_i, ε)` of density `2/ε²`, i.e. mass `2π` each.
#[derive(Clone, Debug)]
pub struct TrialMeasure<T> {
    pub lattice: VortexLattice<T>,
    pub ball_radius: T,
    pub amplitude: T,
}

pub fn trial_measure<T: Real>(lattice: &VortexLattice<T>) -> Result<TrialMeasure<T>> {
    if lattice.points.is_empty() {
        return Err(VortexError::EmptyLattice { min_points: MIN_POINTS });
    }
    let eps = lattice.eps;
    if let Some((i, j, d)) = lattice.min_separation() {
        if d <= T::lit(2.0) * eps {
            return Err(VortexError::Overlap {
                i,
                j,
                distance: d.f64(),
                radius: eps.f64(),
            });
        }
    }
    Ok(TrialMeasure {
        lattice: lattice.clone(),
        ball_radius: eps,
        amplitude: T::lit(2.0) / (eps * eps),
    })
}

impl<T: Real> TrialMeasure<T> {
    /// Exact mass of one ball, `amplitude · π ε²`.
    pub fn ball_mass(&self) -> T {
        self.amplitude * T::PI() * self.ball_radius * self.ball_radius
    }

    pub fn total_mass(&self) -> T {
        self.ball_mass() * T::from_usize_(self.lattice.n_total)
    }

    pub fn density_at(&self, x: T, y: T) -> T {
        let r2 = self.ball_radius * self.ball_radius;
        if self
            .lattice
            .points
            .iter()
            .any(|p| (x - p[0]) * (x - p[0]) + (y - p[1]) * (y - p[1]) < r2)
        {
            self.amplitude
        } else {
            T::zero()
        }
    }
}
