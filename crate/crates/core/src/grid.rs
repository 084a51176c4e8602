//! Uniform radial grids and the quadratures used on them.

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Uniform nodes `r_i = r_max · i/(n−1)`, both endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid<T> {
    pub r_max: T,
    pub nodes: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub fn uniform(r_max: T, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid("n_nodes", format!("need at least 3 nodes, got {n}")));
        }
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return Err(invalid("r_max", format!("must be positive and finite, got {r_max}")));
        }
        let dr = r_max / T::from_usize_(n - 1);
        let mut nodes: Vec<T> = (0..n).map(|i| dr * T::from_usize_(i)).collect();
        nodes[n - 1] = r_max;
        Ok(Self { r_max, nodes })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn dr(&self) -> T {
        self.r_max / T::from_usize_(self.len() - 1)
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    /// Trapezoid rule for `∫₀^{r_max} f dr`.
    pub fn trapz(&self, f: &[T]) -> T {
        trapz(f, self.dr())
    }

    /// Trapezoid rule for the planar integral `2π∫ f(r) r dr`.
    pub fn integrate_area(&self, f: &[T]) -> T {
        let w: Vec<T> = f.iter().zip(&self.nodes).map(|(&v, &r)| v * r).collect();
        T::TAU() * self.trapz(&w)
    }

    /// Linear interpolation of nodal values; constant extension outside `[0, r_max]`.
    pub fn interp(&self, f: &[T], r: T) -> T {
        let n = self.len();
        if r <= T::zero() {
            return f[0];
        }
        if r >= self.r_max {
            return f[n - 1];
        }
        let x = r / self.dr();
        let i = x.floor().to_usize().unwrap_or(0).min(n - 2);
        let t = x - T::from_usize_(i);
        f[i] * (T::one() - t) + f[i + 1] * t
    }
}

pub fn trapz<T: Real>(f: &[T], h: T) -> T {
    let n = f.len();
    if n < 2 {
        return T::zero();
    }
    let inner: T = f[1..n - 1].iter().copied().sum();
    h * (inner + (f[0] + f[n - 1]) * T::lit(0.5))
}

/// Running trapezoid integral, `out[0] = 0`.
pub fn cumtrapz<T: Real>(f: &[T], h: T) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in f.windows(2) {
        acc = acc + (w[0] + w[1]) * h * T::lit(0.5);
        out.push(acc);
    }
    out
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    fn rec<T: Real>(
        f: &impl Fn(T) -> T,
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: u32,
    ) -> T {
        let half = T::lit(0.5);
        let m = (a + b) * half;
        let lm = (a + m) * half;
        let rm = (m + b) * half;
        let flm = f(lm);
        let frm = f(rm);
        let six = T::lit(6.0);
        let left = (m - a) / six * (fa + T::lit(4.0) * flm + fm);
        let right = (b - m) / six * (fm + T::lit(4.0) * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= T::lit(15.0) * tol {
            return left + right + diff / T::lit(15.0);
        }
        rec(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
    }
    if a == b {
        return T::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * T::lit(0.5);
    let fm = f(m);
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}
