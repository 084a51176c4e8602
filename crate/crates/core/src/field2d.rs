//! Weighted elliptic solves `−∇·(ρ⁻¹∇h) = f` on a disc embedded in a Cartesian grid.
//!
//! The disc is carved out of the grid by a node mask. Faces that cross the
//! circle use the distance to the boundary along the grid line, which keeps the
//! matrix symmetric and the solution second-order accurate. Applications and
//! reductions run over grid rows; row partial sums are combined in a fixed
//! pairwise order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VortexError};
use crate::lattice::{log_eps, TrialMeasure};
use crate::mustar::VortexDensity;
use crate::renorm::{interaction, RadialMeasure};
use crate::scalar::Real;
use crate::tfcore::TfModel;

/// Square `[−extent, extent]²` sampled by `n × n` nodes, stored row-major (`idx = j·n + i`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D<T> {
    pub n: usize,
    pub extent: T,
    pub spacing: T,
}

impl<T: Real> Grid2D<T> {
    pub fn new(n: usize, extent: T) -> Result<Self> {
        if n < 65 {
            return Err(invalid("n", format!("need at least 65 nodes per side, got {n}")));
        }
        if !(extent > T::zero()) || !extent.is_finite() {
            return Err(invalid("extent", format!("must be positive, got {extent}")));
        }
        Ok(Self {
            n,
            extent,
            spacing: T::lit(2.0) * extent / T::from_usize_(n - 1),
        })
    }

    /// Same extent, twice the resolution.
    pub fn refined(&self) -> Result<Self> {
        Self::new(2 * self.n - 1, self.extent)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> T {
        -self.extent + self.spacing * T::from_usize_(i)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cell_area(&self) -> T {
        self.spacing * self.spacing
    }

    /// Bilinear interpolation of nodal values at `(x, y)`.
    pub fn interp(&self, values: &[T], x: T, y: T) -> T {
        let h = self.spacing;
        let fx = ((x + self.extent) / h).max(T::zero());
        let fy = ((y + self.extent) / h).max(T::zero());
        let i = fx.floor().to_usize().unwrap_or(0).min(self.n - 2);
        let j = fy.floor().to_usize().unwrap_or(0).min(self.n - 2);
        let tx = fx - T::from_usize_(i);
        let ty = fy - T::from_usize_(j);
        let v = |a: usize, b: usize| values[b * self.n + a];
        let one = T::one();
        (one - tx) * (one - ty) * v(i, j)
            + tx * (one - ty) * v(i + 1, j)
            + (one - tx) * ty * v(i, j + 1)
            + tx * ty * v(i + 1, j + 1)
    }
}

/// Real samples on a [`Grid2D`] with the working-disc mask.
#[derive(Clone, Debug)]
pub struct ScalarField2D<T> {
    pub grid: Grid2D<T>,
    pub values: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Real> ScalarField2D<T> {
    pub fn zeros(grid: Grid2D<T>, disc_radius: T) -> Self {
        Self {
            values: vec![T::zero(); grid.len()],
            mask: disc_mask(&grid, disc_radius),
            grid,
        }
    }

    pub fn from_fn(grid: Grid2D<T>, disc_radius: T, f: impl Fn(T, T) -> T) -> Self {
        let mut out = Self::zeros(grid, disc_radius);
        for j in 0..grid.n {
            for i in 0..grid.n {
                out.values[j * grid.n + i] = f(grid.coord(i), grid.coord(j));
            }
        }
        out
    }

    /// `∫ f dA` with the nodal (midpoint) rule.
    pub fn integral(&self) -> T {
        pairwise_sum(&row_sums(&self.values, self.grid.n, |v| v)) * self.grid.cell_area()
    }

    pub fn at(&self, x: T, y: T) -> T {
        self.grid.interp(&self.values, x, y)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let n = self.grid.n;
        let rows: Vec<Vec<f64>> = (0..self.grid.len())
            .map(|k| {
                vec![
                    self.grid.coord(k % n).f64(),
                    self.grid.coord(k / n).f64(),
                    self.values[k].f64(),
                ]
            })
            .collect();
        crate::io::write_rows(w, &["x", "y", "value"], &rows)
    }

    pub fn write_block<W: std::io::Write>(&self, w: W) -> Result<()> {
        let v: Vec<f64> = self.values.iter().map(|x| x.f64()).collect();
        crate::io::write_block(w, self.grid.n, self.grid.extent.f64(), &v)
    }
}

/// Working discs `R_< = R − ε^{2/3}|log ε|^{2/3}` and `R_> = R + ε^{2/3}|log ε|^{4/3}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscDomain<T> {
    pub r_inner: T,
    pub r_outer: T,
}

impl<T: Real> DiscDomain<T> {
    pub fn new(model: &TfModel<T>, eps: T) -> Result<Self> {
        let l = log_eps(eps)?;
        let e23 = eps.powf(T::lit(2.0 / 3.0));
        let r_inner = model.r_tf - e23 * l.powf(T::lit(2.0 / 3.0));
        let r_outer = model.r_tf + e23 * l.powf(T::lit(4.0 / 3.0));
        if !(r_inner > T::zero()) {
            return Err(invalid("eps", format!("inner radius {r_inner} is not positive")));
        }
        Ok(Self { r_inner, r_outer })
    }
}

pub fn disc_mask<T: Real>(grid: &Grid2D<T>, radius: T) -> Vec<bool> {
    let r2 = radius * radius;
    let n = grid.n;
    (0..grid.len())
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let (x, y) = (grid.coord(i), grid.coord(j));
            i > 0 && j > 0 && i + 1 < n && j + 1 < n && x * x + y * y < r2
        })
        .collect()
}

/// Per-row sums of `f(v)`, one entry per row.
fn row_sums<T: Real>(v: &[T], n: usize, f: impl Fn(T) -> T + Sync) -> Vec<T> {
    v.par_chunks(n).map(|row| row.iter().map(|&x| f(x)).sum()).collect()
}

/// Fixed-order pairwise reduction.
pub fn pairwise_sum<T: Real>(v: &[T]) -> T {
    match v.len() {
        0 => T::zero(),
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T], n: usize) -> T {
    let parts: Vec<T> = a
        .par_chunks(n)
        .zip(b.par_chunks(n))
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| p * q).sum())
        .collect();
    pairwise_sum(&parts)
}

/// Five-point operator `−∇·(ρ⁻¹∇·)` on the masked disc, scaled by `1/h²`.
#[derive(Clone, Debug)]
pub struct WeightedOperator<T> {
    pub grid: Grid2D<T>,
    pub radius: T,
    pub mask: Vec<bool>,
    diag: Vec<T>,
    /// Couplings to the east, west, north and south neighbours (zero across the boundary).
    coef: [Vec<T>; 4],
}

const DIRS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl<T: Real> WeightedOperator<T> {
    pub fn new(model: &TfModel<T>, grid: Grid2D<T>, radius: T) -> Result<Self> {
        let floor = T::lit(1e-6) * model.lambda_tf;
        if !(radius > T::zero()) || model.rho(radius) < floor {
            return Err(invalid(
                "disc_radius",
                format!("density at the disc edge must exceed {floor}; radius {radius}"),
            ));
        }
        if radius > grid.extent {
            return Err(invalid("disc_radius", "disc does not fit inside the grid"));
        }
        let n = grid.n;
        let h = grid.spacing;
        let h2 = h * h;
        let mask = disc_mask(&grid, radius);
        let r2 = radius * radius;
        let half = T::lit(0.5);
        let theta_min = T::lit(1e-3);
        let rows: Vec<(Vec<T>, [Vec<T>; 4])> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut diag = vec![T::zero(); n];
                let mut c: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); n]);
                let y = grid.coord(j);
                for i in 0..n {
                    if !mask[j * n + i] {
                        continue;
                    }
                    let x = grid.coord(i);
                    for (d, &(dx, dy)) in DIRS.iter().enumerate() {
                        let ni = (i as isize + dx) as usize;
                        let nj = (j as isize + dy) as usize;
                        let (ex, ey) = (T::lit(dx as f64), T::lit(dy as f64));
                        if mask[nj * n + ni] {
                            let mx = x + half * h * ex;
                            let my = y + half * h * ey;
                            let beta = T::one() / model.rho((mx * mx + my * my).sqrt());
                            c[d][i] = beta / h2;
                            diag[i] = diag[i] + beta / h2;
                        } else {
                            // distance to the circle along this grid line
                            let (along, across) = if dx != 0 { (x * ex, y) } else { (y * ey, x) };
                            let t = (-along + (r2 - across * across).max(T::zero()).sqrt()).max(T::zero());
                            let theta = (t / h).min(T::one()).max(theta_min);
                            let mx = x + half * theta * h * ex;
                            let my = y + half * theta * h * ey;
                            let beta = T::one() / model.rho((mx * mx + my * my).sqrt());
                            diag[i] = diag[i] + beta / (theta * h2);
                        }
                    }
                }
                (diag, c)
            })
            .collect();
        let mut diag = Vec::with_capacity(grid.len());
        let mut coef: [Vec<T>; 4] = std::array::from_fn(|_| Vec::with_capacity(grid.len()));
        for (d, c) in rows {
            diag.extend(d);
            for (k, ck) in c.into_iter().enumerate() {
                coef[k].extend(ck);
            }
        }
        Ok(Self {
            grid,
            radius,
            mask,
            diag,
            coef,
        })
    }

    pub fn apply(&self, u: &[T], out: &mut [T]) {
        let n = self.grid.n;
        out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for i in 0..n {
                let k = j * n + i;
                row[i] = if self.mask[k] {
                    self.diag[k] * u[k]
                        - self.coef[0][k] * u[k + 1]
                        - self.coef[1][k] * u[k - 1]
                        - self.coef[2][k] * u[k + n]
                        - self.coef[3][k] * u[k - n]
                } else {
                    T::zero()
                };
            }
        });
    }

    /// Damped Jacobi sweeps.
    fn smooth(&self, u: &mut Vec<T>, f: &[T], sweeps: usize, scratch: &mut Vec<T>) {
        let omega = T::lit(0.8);
        for _ in 0..sweeps {
            self.apply(u, scratch);
            u.par_iter_mut()
                .zip(scratch.par_iter())
                .zip(f.par_iter())
                .zip(self.diag.par_iter().zip(self.mask.par_iter()))
                .for_each(|(((uk, &au), &fk), (&dk, &mk))| {
                    if mk {
                        *uk = *uk + omega * (fk - au) / dk;
                    }
                });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preconditioner {
    Jacobi,
    Multigrid,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T> {
    /// Relative residual target.
    pub tol: T,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            max_iter: 100_000,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl<T: Real> SolveOptions<T> {
    pub fn multigrid() -> Self {
        Self {
            preconditioner: Preconditioner::Multigrid,
            max_iter: 2_000,
            ..Self::default()
        }
    }
}

/// Geometric V-cycle on a hierarchy of rediscretized operators.
struct Multigrid<T> {
    levels: Vec<WeightedOperator<T>>,
}

impl<T: Real> Multigrid<T> {
    fn new(model: &TfModel<T>, fine: &WeightedOperator<T>) -> Result<Self> {
        let mut levels = vec![fine.clone()];
        loop {
            let g = levels.last().unwrap().grid;
            if (g.n - 1) % 2 != 0 || (g.n - 1) / 2 + 1 < 9 {
                break;
            }
            let coarse = Grid2D {
                n: (g.n - 1) / 2 + 1,
                extent: g.extent,
                spacing: g.spacing * T::lit(2.0),
            };
            levels.push(WeightedOperator::new(model, coarse, fine.radius)?);
        }
        Ok(Self { levels })
    }

    fn apply(&self, r: &[T]) -> Vec<T> {
        self.vcycle(0, r)
    }

    fn vcycle(&self, lev: usize, f: &[T]) -> Vec<T> {
        let op = &self.levels[lev];
        let len = op.grid.len();
        let mut u = vec![T::zero(); len];
        let mut scratch = vec![T::zero(); len];
        if lev + 1 == self.levels.len() {
            return coarse_solve(op, f);
        }
        op.smooth(&mut u, f, 2, &mut scratch);
        op.apply(&u, &mut scratch);
        let res: Vec<T> = f.iter().zip(&scratch).map(|(&a, &b)| a - b).collect();
        let coarse = &self.levels[lev + 1];
        let rc = restrict(&res, op.grid.n, coarse);
        let ec = self.vcycle(lev + 1, &rc);
        let ef = prolong(&ec, coarse.grid.n, op);
        u.iter_mut().zip(&ef).for_each(|(a, &b)| *a = *a + b);
        op.smooth(&mut u, f, 2, &mut scratch);
        u
    }
}

/// Full weighting, masked to the coarse disc.
fn restrict<T: Real>(fine: &[T], nf: usize, coarse: &WeightedOperator<T>) -> Vec<T> {
    let nc = coarse.grid.n;
    let w = T::lit(1.0 / 16.0);
    let mut out = vec![T::zero(); nc * nc];
    out.par_chunks_mut(nc).enumerate().for_each(|(jc, row)| {
        for ic in 0..nc {
            if !coarse.mask[jc * nc + ic] {
                continue;
            }
            let (i, j) = (2 * ic, 2 * jc);
            let v = |a: usize, b: usize| fine[b * nf + a];
            let s = T::lit(4.0) * v(i, j)
                + T::lit(2.0) * (v(i + 1, j) + v(i - 1, j) + v(i, j + 1) + v(i, j - 1))
                + v(i + 1, j + 1)
                + v(i - 1, j + 1)
                + v(i + 1, j - 1)
                + v(i - 1, j - 1);
            row[ic] = w * s;
        }
    });
    out
}

/// Bilinear interpolation, masked to the fine disc.
fn prolong<T: Real>(coarse: &[T], nc: usize, fine: &WeightedOperator<T>) -> Vec<T> {
    let nf = fine.grid.n;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); nf * nf];
    out.par_chunks_mut(nf).enumerate().for_each(|(j, row)| {
        for i in 0..nf {
            if !fine.mask[j * nf + i] {
                continue;
            }
            let c = |a: usize, b: usize| coarse[b * nc + a];
            let (ic, jc) = (i / 2, j / 2);
            row[i] = match (i % 2, j % 2) {
                (0, 0) => c(ic, jc),
                (1, 0) => half * (c(ic, jc) + c(ic + 1, jc)),
                (0, 1) => half * (c(ic, jc) + c(ic, jc + 1)),
                _ => quarter * (c(ic, jc) + c(ic + 1, jc) + c(ic, jc + 1) + c(ic + 1, jc + 1)),
            };
        }
    });
    out
}

/// Unpreconditioned CG run to round-off on the (small) coarsest level.
fn coarse_solve<T: Real>(op: &WeightedOperator<T>, f: &[T]) -> Vec<T> {
    let n = op.grid.n;
    let unknowns = op.mask.iter().filter(|&&m| m).count().max(1);
    let mut x = vec![T::zero(); f.len()];
    let mut r = f.to_vec();
    let mut p = r.clone();
    let mut ap = vec![T::zero(); f.len()];
    let mut rr = dot(&r, &r, n);
    let stop = rr * T::lit(1e-28);
    for _ in 0..4 * unknowns {
        if rr <= stop || rr == T::zero() {
            break;
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap, n);
        for k in 0..f.len() {
            x[k] = x[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        let rr_new = dot(&r, &r, n);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..f.len() {
            p[k] = r[k] + beta * p[k];
        }
    }
    x
}

#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub field: ScalarField2D<T>,
    pub iterations: usize,
    pub residual: T,
    /// Relative residual after every iteration.
    pub history: Vec<T>,
}

/// Preconditioned conjugate gradients for `A h = f` on a prebuilt operator.
pub fn pcg<T: Real>(
    op: &WeightedOperator<T>,
    mg: Option<&MultigridHandle<T>>,
    f: &[T],
    opts: &SolveOptions<T>,
) -> Result<SolveOutcome<T>> {
    let n = op.grid.n;
    let len = op.grid.len();
    let rhs: Vec<T> = f.iter().zip(&op.mask).map(|(&v, &m)| if m { v } else { T::zero() }).collect();
    let fnorm = dot(&rhs, &rhs, n).sqrt();
    let mut x = vec![T::zero(); len];
    let mut history = Vec::new();
    let field = |x: Vec<T>| ScalarField2D {
        grid: op.grid,
        values: x,
        mask: op.mask.clone(),
    };
    if fnorm == T::zero() {
        return Ok(SolveOutcome {
            field: field(x),
            iterations: 0,
            residual: T::zero(),
            history,
        });
    }
    let precond = |r: &[T]| -> Vec<T> {
        match mg {
            Some(m) => m.inner.apply(r),
            None => r
                .par_iter()
                .zip(op.diag.par_iter().zip(op.mask.par_iter()))
                .map(|(&v, (&d, &m))| if m { v / d } else { T::zero() })
                .collect(),
        }
    };
    let mut r = rhs.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut ap = vec![T::zero(); len];
    let mut rz = dot(&r, &z, n);
    let mut rel = T::one();
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap, n);
        let alpha = rz / pap;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(a, &b)| *a = *a + alpha * b);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(a, &b)| *a = *a - alpha * b);
        rel = dot(&r, &r, n).sqrt() / fnorm;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(SolveOutcome {
                field: field(x),
                iterations: it,
                residual: rel,
                history,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z, n);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(a, &b)| *a = b + beta * *a);
    }
    Err(VortexError::NonConvergence {
        method: "pcg",
        iterations: opts.max_iter,
        residual: rel.f64(),
        trace: history.iter().map(|v| v.f64()).collect(),
    })
}

/// Opaque multigrid preconditioner, reusable across right-hand sides.
pub struct MultigridHandle<T> {
    inner: Multigrid<T>,
}

/// Operator plus (optional) preconditioner, built once for many solves.
pub struct WeightedSolver<T> {
    pub op: WeightedOperator<T>,
    mg: Option<MultigridHandle<T>>,
    pub opts: SolveOptions<T>,
}

impl<T: Real> WeightedSolver<T> {
    pub fn new(model: &TfModel<T>, grid: Grid2D<T>, disc_radius: T, opts: SolveOptions<T>) -> Result<Self> {
        let op = WeightedOperator::new(model, grid, disc_radius)?;
        let mg = match opts.preconditioner {
            Preconditioner::Multigrid => Some(MultigridHandle {
                inner: Multigrid::new(model, &op)?,
            }),
            Preconditioner::Jacobi => None,
        };
        Ok(Self { op, mg, opts })
    }

    pub fn solve(&self, source: &[T]) -> Result<SolveOutcome<T>> {
        pcg(&self.op, self.mg.as_ref(), source, &self.opts)
    }

    /// `∫ f h dA`.
    pub fn pairing(&self, f: &[T], h: &[T]) -> T {
        dot(f, h, self.op.grid.n) * self.op.grid.cell_area()
    }
}

/// Solves `−∇·(ρ⁻¹∇h) = source` with `h = 0` outside `B(disc_radius)`.
pub fn solve_weighted_poisson<T: Real>(
    source: &ScalarField2D<T>,
    model: &TfModel<T>,
    disc_radius: T,
    opts: SolveOptions<T>,
) -> Result<SolveOutcome<T>> {
    let solver = WeightedSolver::new(model, source.grid, disc_radius, opts)?;
    // the source must vanish outside the disc
    let leak = source
        .values
        .iter()
        .zip(&solver.op.mask)
        .any(|(&v, &m)| !m && v != T::zero());
    if leak {
        return Err(invalid("source", "source is supported outside the working disc"));
    }
    solver.solve(&source.values)
}

/// Uniform ball `amplitude · 1_{B(c, radius)}` sampled by cell-area fractions;
/// returns sparse `(node, value)` pairs.
pub fn sample_ball<T: Real>(grid: &Grid2D<T>, centre: [T; 2], radius: T, amplitude: T) -> Vec<(usize, T)> {
    const SUB: usize = 16;
    let h = grid.spacing;
    let n = grid.n;
    let half = T::lit(0.5);
    let to_idx = |x: T| ((x + grid.extent) / h).round().to_isize().unwrap_or(0);
    let span = (radius / h).ceil().to_isize().unwrap_or(0) + 2;
    let (ci, cj) = (to_idx(centre[0]), to_idx(centre[1]));
    let r2 = radius * radius;
    let diag = half * h * T::SQRT_2();
    let mut out = Vec::new();
    for j in (cj - span).max(0)..=(cj + span).min(n as isize - 1) {
        for i in (ci - span).max(0)..=(ci + span).min(n as isize - 1) {
            let (x, y) = (grid.coord(i as usize), grid.coord(j as usize));
            let d = ((x - centre[0]).powi(2) + (y - centre[1]).powi(2)).sqrt();
            let frac = if d + diag <= radius {
                T::one()
            } else if d - diag >= radius {
                T::zero()
            } else {
                let mut hits = 0usize;
                for b in 0..SUB {
                    for a in 0..SUB {
                        let sx = x + h * ((T::from_usize_(a) + half) / T::from_usize_(SUB) - half);
                        let sy = y + h * ((T::from_usize_(b) + half) / T::from_usize_(SUB) - half);
                        if (sx - centre[0]).powi(2) + (sy - centre[1]).powi(2) < r2 {
                            hits += 1;
                        }
                    }
                }
                T::from_usize_(hits) / T::from_usize_(SUB * SUB)
            };
            if frac > T::zero() {
                out.push((j as usize * n + i as usize, amplitude * frac));
            }
        }
    }
    out
}

/// Unit-mass smoothed delta at `y` (the same uniform-ball profile as the trial
/// measure), renormalized so its discrete integral is exactly one.
pub fn smoothed_delta<T: Real>(grid: &Grid2D<T>, y: [T; 2], radius: T) -> Vec<T> {
    let mut f = vec![T::zero(); grid.len()];
    let amp = T::one() / (T::PI() * radius * radius);
    let cells = sample_ball(grid, y, radius, amp);
    let mass: T = cells.iter().map(|&(_, v)| v).sum::<T>() * grid.cell_area();
    for (k, v) in cells {
        f[k] = v / mass;
    }
    f
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenPair {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub g_coarse: f64,
    pub g_fine: f64,
    /// `G(y, x)` on the fine grid, when requested.
    pub g_fine_swapped: Option<f64>,
    pub deviation_coarse: f64,
    pub deviation_fine: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenCheck {
    pub disc_radius: f64,
    pub smoothing_radius: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub sup_coarse: f64,
    pub sup_fine: f64,
    /// `|sup_fine − sup_coarse| / sup_coarse`.
    pub relative_change: f64,
    pub min_g: f64,
    pub max_symmetry_error: Option<f64>,
    pub warnings: Vec<String>,
    pub pairs: Vec<GreenPair>,
}

/// Pseudo-random pairs in `B(0.9·radius)` at least `min_sep` apart.
pub fn sample_pairs<T: Real>(radius: T, count: usize, min_sep: T, seed: u64) -> Vec<([T; 2], [T; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = 0.9 * radius.f64();
    let point = |rng: &mut ChaCha8Rng| loop {
        let x: f64 = rng.gen_range(-r..r);
        let y: f64 = rng.gen_range(-r..r);
        if x * x + y * y < r * r {
            return [T::lit(x), T::lit(y)];
        }
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = point(&mut rng);
        let b = point(&mut rng);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if d >= min_sep {
            out.push((a, b));
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct GreenCheckOptions<T> {
    pub n_coarse: usize,
    pub extent: T,
    /// Radius of the smoothed delta; defaults to two coarse cells.
    pub smoothing_radius: Option<T>,
    pub symmetry: bool,
    pub solve: SolveOptions<T>,
}

/// Measures `sup |G(x,y) + ρ(y) log|x−y| / 2π|` over the pairs on one grid and its refinement.
pub fn green_singularity_check<T: Real>(
    model: &TfModel<T>,
    disc_radius: T,
    pairs: &[([T; 2], [T; 2])],
    opts: GreenCheckOptions<T>,
) -> Result<GreenCheck> {
    let coarse = Grid2D::new(opts.n_coarse, opts.extent)?;
    let fine = coarse.refined()?;
    let rs = opts.smoothing_radius.unwrap_or(T::lit(2.0) * coarse.spacing);
    let mut warnings = Vec::new();
    if rs < T::lit(2.0) * coarse.spacing {
        warnings.push(format!(
            "smoothing radius {rs} is resolved by fewer than 4 coarse cells across (spacing {})",
            coarse.spacing
        ));
    }
    for (x, y) in pairs {
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        if d < T::lit(4.0) * coarse.spacing {
            return Err(invalid("sample_pairs", format!("pair separation {d} below four grid spacings")));
        }
        for p in [x, y] {
            if (p[0] * p[0] + p[1] * p[1]).sqrt() + rs >= disc_radius {
                return Err(invalid("sample_pairs", "pair point (plus smoothing) leaves the disc"));
            }
        }
    }
    let eval = |grid: Grid2D<T>, swapped: bool| -> Result<Vec<T>> {
        let solver = WeightedSolver::new(model, grid, disc_radius, opts.solve)?;
        pairs
            .iter()
            .map(|(x, y)| {
                let (src, at) = if swapped { (x, y) } else { (y, x) };
                let sol = solver.solve(&smoothed_delta(&grid, *src, rs))?;
                Ok(sol.field.at(at[0], at[1]))
            })
            .collect()
    };
    let gc = eval(coarse, false)?;
    let gf = eval(fine, false)?;
    let gs = if opts.symmetry { Some(eval(fine, true)?) } else { None };
    let dev = |g: T, x: [T; 2], y: [T; 2]| {
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        (g + model.rho((y[0] * y[0] + y[1] * y[1]).sqrt()) * d.ln() / T::TAU()).abs()
    };
    let mut out_pairs = Vec::with_capacity(pairs.len());
    let (mut sc, mut sf, mut gmin, mut sym) = (0.0_f64, 0.0_f64, f64::INFINITY, 0.0_f64);
    for (k, (x, y)) in pairs.iter().enumerate() {
        let dc = dev(gc[k], *x, *y).f64();
        let df = dev(gf[k], *x, *y).f64();
        sc = sc.max(dc);
        sf = sf.max(df);
        gmin = gmin.min(gc[k].f64()).min(gf[k].f64());
        let swapped = gs.as_ref().map(|g| g[k].f64());
        if let Some(s) = swapped {
            sym = sym.max((s - gf[k].f64()).abs() / gf[k].f64().abs().max(1e-300));
        }
        out_pairs.push(GreenPair {
            x: [x[0].f64(), x[1].f64()],
            y: [y[0].f64(), y[1].f64()],
            g_coarse: gc[k].f64(),
            g_fine: gf[k].f64(),
            g_fine_swapped: swapped,
            deviation_coarse: dc,
            deviation_fine: df,
        });
    }
    Ok(GreenCheck {
        disc_radius: disc_radius.f64(),
        smoothing_radius: rs.f64(),
        n_coarse: coarse.n,
        n_fine: fine.n,
        sup_coarse: sc,
        sup_fine: sf,
        relative_change: (sf - sc).abs() / sc.max(1e-300),
        min_g: gmin,
        max_symmetry_error: opts.symmetry.then_some(sym),
        warnings,
        pairs: out_pairs,
    })
}

#[derive(Clone, Debug)]
pub struct TrialEnergy<T> {
    /// `½∫ρ⁻¹|∇h|²` of the whole trial measure.
    pub total: T,
    /// Single-ball energies, one per vortex.
    pub self_energies: Vec<T>,
    pub diagonal: T,
    /// `total − diagonal`: the pairwise part.
    pub interaction: T,
}

/// Energy of the smoothed lattice measure, split into self and pair contributions.
pub fn trial_interaction_energy<T: Real>(
    trial: &TrialMeasure<T>,
    model: &TfModel<T>,
    grid: Grid2D<T>,
    disc_radius: T,
    opts: SolveOptions<T>,
) -> Result<TrialEnergy<T>> {
    let eps = trial.ball_radius;
    if T::lit(2.0) * eps / grid.spacing < T::lit(6.0) {
        return Err(VortexError::UnderResolved {
            what: format!(
                "ball diameter {} spans fewer than 6 cells of width {}",
                T::lit(2.0) * eps,
                grid.spacing
            ),
        });
    }
    let solver = WeightedSolver::new(model, grid, disc_radius, opts)?;
    let mut total_f = vec![T::zero(); grid.len()];
    let mut total_h = vec![T::zero(); grid.len()];
    let mut self_energies = Vec::with_capacity(trial.lattice.n_total);
    for p in &trial.lattice.points {
        if (p[0] * p[0] + p[1] * p[1]).sqrt() + eps >= disc_radius {
            return Err(invalid("lattice", "vortex ball leaves the working disc"));
        }
        let mut f = vec![T::zero(); grid.len()];
        for (k, v) in sample_ball(&grid, *p, eps, trial.amplitude) {
            f[k] = v;
        }
        let h = solver.solve(&f)?.field.values;
        self_energies.push(T::lit(0.5) * solver.pairing(&f, &h));
        for k in 0..grid.len() {
            total_f[k] = total_f[k] + f[k];
            total_h[k] = total_h[k] + h[k];
        }
    }
    let total = T::lit(0.5) * solver.pairing(&total_f, &total_h);
    let diagonal = self_energies.iter().copied().sum::<T>();
    Ok(TrialEnergy {
        total,
        self_energies,
        diagonal,
        interaction: total - diagonal,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub eps: f64,
    pub n_vortices: usize,
    /// `2π|log ε| Σ H(a_i)`.
    pub vortex_term: f64,
    /// `|log ε|² · ½∫ρ⁻¹|∇h_{μ⋆}|²` on `B(R_<)`.
    pub interaction_term: f64,
    pub estimate: f64,
    /// `estimate / (I^TF |log ε|²)`.
    pub ratio: f64,
}

/// Lattice upper-bound estimate `2π|log ε|ΣH(a_i) + |log ε|²·½∫ρ⁻¹|∇h_{μ⋆}|²`.
pub fn upper_bound_energy<T: Real>(
    lattice: Option<&crate::lattice::VortexLattice<T>>,
    density: &VortexDensity<T>,
    eps: T,
    n_radial: usize,
) -> Result<UpperBound> {
    let model = &density.model;
    let l = log_eps(eps)?;
    let Some(lattice) = lattice else {
        return Ok(UpperBound {
            eps: eps.f64(),
            n_vortices: 0,
            vortex_term: 0.0,
            interaction_term: 0.0,
            estimate: 0.0,
            ratio: 0.0,
        });
    };
    let sum_h: T = lattice
        .points
        .iter()
        .map(|p| model.h_tf((p[0] * p[0] + p[1] * p[1]).sqrt()))
        .sum();
    let vortex_term = T::TAU() * l * sum_h;
    let r_in = DiscDomain::new(model, eps)?.r_inner;
    let mu = RadialMeasure::from_density(density, r_in, n_radial)?;
    let interaction_term = l * l * interaction(&mu, model)?;
    let estimate = vortex_term + interaction_term;
    let target = density.i_tf * l * l;
    Ok(UpperBound {
        eps: eps.f64(),
        n_vortices: lattice.n_total,
        vortex_term: vortex_term.f64(),
        interaction_term: interaction_term.f64(),
        estimate: estimate.f64(),
        ratio: (estimate / target).f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TfModel<f64> {
        TfModel::with_critical_multiple(2.0, 2.0).unwrap()
    }

    #[test]
    fn zero_source_gives_zero() {
        let m = model();
        let g = Grid2D::new(65, m.r_tf).unwrap();
        let src = ScalarField2D::zeros(g, 0.9);
        let out = solve_weighted_poisson(&src, &m, 0.9, SolveOptions::default()).unwrap();
        assert!(out.field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_disc_at_support_edge() {
        let m = model();
        let g = Grid2D::new(65, 1.2).unwrap();
        assert!(WeightedOperator::new(&m, g, m.r_tf).is_err());
    }

    #[test]
    fn rejects_leaking_source() {
        let m = model();
        let g = Grid2D::new(65, m.r_tf).unwrap();
        let src = ScalarField2D::from_fn(g, 0.5, |_, _| 1.0);
        assert!(solve_weighted_poisson(&src, &m, 0.5, SolveOptions::default()).is_err());
    }

    #[test]
    fn multigrid_and_jacobi_agree() {
        let m = model();
        let g = Grid2D::new(129, m.r_tf).unwrap();
        let src = ScalarField2D::from_fn(g, 0.9, |x, y| if x * x + y * y < 0.81 { 1.0 + x } else { 0.0 });
        let a = solve_weighted_poisson(&src, &m, 0.9, SolveOptions { tol: 1e-11, ..Default::default() }).unwrap();
        let b = solve_weighted_poisson(&src, &m, 0.9, SolveOptions { tol: 1e-11, ..SolveOptions::multigrid() }).unwrap();
        assert!(b.iterations < a.iterations);
        let diff = a.field.values.iter().zip(&b.field.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn ball_sampling_mass() {
        let g = Grid2D::new(257, 1.0).unwrap();
        // eight cells across the ball
        let r = 4.0 * g.spacing;
        let cells = sample_ball(&g, [0.1234, -0.0567], r, 1.0);
        let mass: f64 = cells.iter().map(|c| c.1).sum::<f64>() * g.cell_area();
        let exact = std::f64::consts::PI * r * r;
        assert!((mass - exact).abs() < 0.02 * exact);
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        assert_eq!(pairwise_sum(&v), pairwise_sum(&v.clone()));
    }

    #[test]
    fn disc_domain_radii_bracket_support() {
        let m = model();
        let d = DiscDomain::new(&m, 0.01).unwrap();
        assert!(d.r_inner < m.r_tf && m.r_tf < d.r_outer);
    }

    #[test]
    fn empty_lattice_upper_bound_is_zero() {
        let m = TfModel::with_critical_multiple(2.0, 0.8).unwrap();
        let d = crate::mustar::mu_star(&m, 512).unwrap();
        let ub = upper_bound_energy(None, &d, 0.01, 512).unwrap();
        assert_eq!(ub.estimate, 0.0);
    }
}
