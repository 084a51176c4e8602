use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use vortex_core::field2d::{
    green_singularity_check, sample_pairs, upper_bound_energy, DiscDomain, Grid2D, GreenCheckOptions, SolveOptions,
};
use vortex_core::gpflow::{
    bulk_radius, compare_to_mustar, default_bin_width, energy_decompose, extract_vorticity, gp_grid, minimize_gp,
    radial_norm_gap, solve_radial_profile, write_vortices_csv, GpSchedule, ProfileOptions, RadialMu,
};
use vortex_core::lattice::{build_lattice, riemann_check};
use vortex_core::mustar::{mu_star, VortexDensity};
use vortex_core::renorm::{free_boundary_minimizer, minimize, MinimizeOptions, RadialMeasure};
use vortex_core::tfcore::{cost_profile, omega_c1};
use vortex_core::{io, TfModel64, TrapParams64};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{eps_dir, read_manifest, Run};

fn model(cfg: &RunConfig) -> Result<TfModel64, CliError> {
    Ok(vortex_core::tfcore::build_tf_model(TrapParams64::new(cfg.s, cfg.omega0)?)?)
}

fn csv<F>(f: F) -> impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> vortex_core::Result<()>,
{
    move |b| f(b).map_err(CliError::from)
}

/// Runs `body` once per ε; a sweep writes each value to its own subdirectory.
fn per_eps(
    cfg: &RunConfig,
    command: &str,
    mut body: impl FnMut(&mut Run, f64) -> Result<(), CliError>,
) -> Result<Vec<PathBuf>, CliError> {
    let root = cfg.out.join(command);
    let mut dirs = Vec::new();
    for &eps in &cfg.eps {
        let dir = if cfg.eps.len() > 1 { root.join(eps_dir(eps)) } else { root.clone() };
        let mut run = Run::new(dir.clone(), command)?;
        body(&mut run, eps)?;
        run.finish(cfg)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

fn single(cfg: &RunConfig, command: &str, body: impl FnOnce(&mut Run) -> Result<(), CliError>) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.out.join(command);
    let mut run = Run::new(dir.clone(), command)?;
    body(&mut run)?;
    run.finish(cfg)?;
    Ok(vec![dir])
}

#[derive(Serialize, Deserialize)]
pub struct TfSummary {
    pub s: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub lambda_tf: f64,
    pub r_tf: f64,
    pub etf_coeff: f64,
    pub h_at_origin: f64,
}

pub fn cmd_tf(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = model(cfg)?;
    single(cfg, "tf", |run| {
        let profile = run.stage("profile", || cost_profile(&m, cfg.omega0, cfg.n_nodes))?;
        run.write("tf_profile.csv", csv(|b| profile.write_csv(b)))?;
        let summary = TfSummary {
            s: cfg.s,
            omega0: cfg.omega0,
            omega1: omega_c1(&m),
            lambda_tf: m.lambda_tf,
            r_tf: m.r_tf,
            etf_coeff: m.etf_coeff,
            h_at_origin: m.h_tf(0.0),
        };
        run.write_json("tf_summary.json", &summary)?;
        Ok(())
    })
}

pub fn cmd_mustar(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = model(cfg)?;
    single(cfg, "mustar", |run| {
        let d = run.stage("mu_star", || mu_star(&m, cfg.n_nodes))?;
        run.write("mustar.csv", csv(|b| d.write_csv(b)))?;
        let s = d.summary();
        let v = json!({
            "summary": s,
            "r1_over_rtf": s.r1 / s.r_tf,
            "r2_over_rtf": s.r2 / s.r_tf,
            "omega1": omega_c1(&m),
        });
        run.write_json("mustar.json", &v)?;
        Ok(())
    })
}

pub fn cmd_renorm_min(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = model(cfg)?;
    single(cfg, "renorm-min", |run| {
        let d = mu_star(&m, cfg.n_nodes)?;
        let r_dom = m.r_tf;
        let n = cfg.n_nodes;
        let target = RadialMeasure::from_density(&d, r_dom, n)?;
        let init = match cfg.init.as_str() {
            "mustar" => target.clone(),
            "random" => RadialMeasure::random_smooth(r_dom, n, 5.0, cfg.seed)?,
            _ => RadialMeasure::zeros(r_dom, n)?,
        };
        let mut opts = MinimizeOptions::default();
        if let Some(t) = cfg.tol {
            opts.tol = t;
        }
        if let Some(k) = cfg.max_iter {
            opts.max_iter = k;
        }
        let out = run.stage("minimize", || minimize(&m, &init, opts))?;
        let fb = free_boundary_minimizer(&m, r_dom).ok();
        let pot = vortex_core::renorm::solve_potential(&out.measure, &m)?;
        run.write("renorm.csv", csv(|b| out.measure.write_csv(b, &pot)))?;
        let l1 = out.measure.l1_distance(&target)?;
        let v = json!({
            "init": cfg.init,
            "converged": out.converged,
            "iterations": out.iterations,
            "report": out.report,
            "mass": out.measure.mass(),
            "l1_gap_vs_mustar": l1,
            "l1_gap_relative": l1 / d.total_mass,
            "i_tf": d.i_tf,
            "energy_relative_to_i_tf": (out.report.total - d.i_tf) / d.i_tf.abs(),
            "free_boundary": fb.map(|f| json!({"a": f.a, "mass": f.total_mass, "energy": f.energy})),
        });
        run.write_json("renorm.json", &v)?;
        Ok(())
    })
}

pub fn cmd_lattice(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = model(cfg)?;
    let d = mu_star(&m, cfg.n_nodes.max(256))?;
    per_eps(cfg, "lattice", |run, eps| {
        let lat = run.stage("lattice", || build_lattice(&m, eps, None))?;
        run.write("lattice_points.csv", csv(|b| lat.write_points_csv(b)))?;
        let one = riemann_check(&lat, &m, |_| 1.0)?;
        let hh = riemann_check(&lat, &m, |r| m.h_tf(r))?;
        let ub = run.stage("upper_bound", || upper_bound_energy(Some(&lat), &d, eps, cfg.n_nodes))?;
        let v = json!({
            "summary": lat.summary(),
            "min_separation": lat.min_separation().map(|x| x.2),
            "riemann_one": {"discrete": one.discrete_sum, "continuum": one.continuum_integral, "error": one.error},
            "riemann_h": {"discrete": hh.discrete_sum, "continuum": hh.continuum_integral, "error": hh.error},
            "upper_bound": ub,
        });
        run.write_json("lattice.json", &v)?;
        Ok(())
    })
}

pub fn cmd_green(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = model(cfg)?;
    per_eps(cfg, "green", |run, eps| {
        let disc = DiscDomain::new(&m, eps)?.r_inner;
        let n_coarse = cfg.grid_n.unwrap_or(513);
        let coarse = Grid2D::new(n_coarse, m.r_tf)?;
        let pairs = sample_pairs(disc, cfg.n_pairs, 4.0 * coarse.spacing, cfg.seed);
        let mut solve = SolveOptions::multigrid();
        if let Some(t) = cfg.tol {
            solve.tol = t;
        }
        let opts = GreenCheckOptions {
            n_coarse,
            extent: m.r_tf,
            smoothing_radius: None,
            symmetry: false,
            solve,
        };
        let check = run.stage("green", || green_singularity_check(&m, disc, &pairs, opts))?;
        let rows: Vec<Vec<f64>> = check
            .pairs
            .iter()
            .map(|p| vec![p.x[0], p.x[1], p.y[0], p.y[1], p.g_coarse, p.g_fine, p.deviation_coarse, p.deviation_fine])
            .collect();
        run.write(
            "green_pairs.csv",
            csv(|b| io::write_rows(b, &["x1", "x2", "y1", "y2", "g_coarse", "g_fine", "dev_coarse", "dev_fine"], &rows)),
        )?;
        let mut summary = serde_json::to_value(&check)?;
        if let Some(o) = summary.as_object_mut() {
            o.remove("pairs");
        }
        run.write_json("green.json", &summary)?;
        Ok(())
    })
}

pub fn cmd_gp(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let m = model(cfg)?;
    let d = mu_star(&m, cfg.n_nodes.max(256))?;
    per_eps(cfg, "gp", |run, eps| {
        if eps > 0.2 {
            return Err(CliError::validation("eps", "gp needs eps <= 0.2"));
        }
        let profile = run.stage("profile", || solve_radial_profile(eps, cfg.s, ProfileOptions::default()))?;
        let grid = gp_grid(&m, eps, cfg.grid_n.unwrap_or(256))?;
        let mut schedule = GpSchedule {
            seed: cfg.seed,
            n_starts: cfg.n_starts,
            ..GpSchedule::default()
        };
        if let Some(t) = cfg.tol {
            schedule.tol = t;
        }
        if let Some(k) = cfg.max_iter {
            schedule.max_iter = k;
        }
        let state = run.stage("flow", || minimize_gp(&m, eps, grid, &profile, schedule))?;
        let report = energy_decompose(&m, &state, &profile)?;
        let mut vort = extract_vorticity(&m, &state, &profile, default_bin_width(&m))?;
        let gap = compare_to_mustar(&mut vort, &d, eps)?;
        let (r_bulk, _) = bulk_radius(&m, eps)?;

        run.write("profile.csv", csv(|b| profile.write_csv(b)))?;
        run.write("state.bin", csv(|b| state.write_snapshot(b)))?;
        run.write("vortices.csv", csv(|b| write_vortices_csv(b, &vort.vortices)))?;
        run.write("radial_mu.csv", csv(|b| vort.radial_mu.write_csv(b, |r| d.density_at(r))))?;
        // plot-ready density heatmap, every other node
        let n = grid.n;
        let rows: Vec<Vec<f64>> = (0..n)
            .step_by(2)
            .flat_map(|j| (0..n).step_by(2).map(move |i| (i, j)))
            .map(|(i, j)| vec![grid.coord(i), grid.coord(j), state.psi[j * n + i].norm_sqr()])
            .collect();
        run.write("density.csv", csv(|b| io::write_rows(b, &["x", "y", "value"], &rows)))?;
        let trace: Vec<Vec<f64>> = state.energy_trace.iter().enumerate().map(|(k, e)| vec![k as f64, *e]).collect();
        run.write("energy_trace.csv", csv(|b| io::write_rows(b, &["iteration", "energy"], &trace)))?;

        let l = -eps.ln();
        let v = json!({
            "eps": eps,
            "s": cfg.s,
            "omega0": cfg.omega0,
            "omega": cfg.omega0 * l,
            "grid_n": grid.n,
            "extent": grid.extent,
            "spacing": grid.spacing,
            "iterations": state.iterations,
            "converged": state.converged,
            "residual": state.residual,
            "start": state.start,
            "energy": state.energy_trace.last(),
            "lambda_hat": profile.lambda_hat,
            "e_hat_radial": profile.e_hat,
            "decomposition": report,
            "n_vortices": vort.vortices.len(),
            "expected_count": l / std::f64::consts::TAU * d.total_mass,
            "r1": d.r1,
            "r_bulk": r_bulk,
            "mass_in_bulk": state.mass_within(r_bulk),
            "max_modulus": state.max_modulus(),
            "excluded_fraction": vort.excluded_fraction,
            "norm_gap": gap.norm_gap,
        });
        run.write_json("gp.json", &v)?;
        Ok(())
    })
}

#[derive(Deserialize)]
struct GpJson {
    eps: f64,
}

fn require(dir: Option<&Path>, what: &str, file: &str) -> Result<PathBuf, CliError> {
    let dir = dir.ok_or_else(|| CliError::missing(format!("{what} directory not given")))?;
    let path = dir.join(file);
    if !path.is_file() {
        return Err(CliError::missing(format!("{} not found; run `{what}` first", path.display())));
    }
    read_manifest(dir)?;
    Ok(path)
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let gp_dir = cfg.gp_dir.clone().unwrap_or_else(|| cfg.out.join("gp"));
    let mustar_dir = cfg.mustar_dir.clone().unwrap_or_else(|| cfg.out.join("mustar"));
    let gp_json = require(Some(&gp_dir), "gp", "gp.json")?;
    let radial_csv = require(Some(&gp_dir), "gp", "radial_mu.csv")?;
    let mustar_json = require(Some(&mustar_dir), "mustar", "mustar.json")?;

    let gp: GpJson = serde_json::from_str(&std::fs::read_to_string(gp_json)?)?;
    let ms: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(mustar_json)?)?;
    let s = ms["summary"]["s"].as_f64().ok_or_else(|| CliError::missing("mustar.json lacks summary.s"))?;
    let omega0 = ms["summary"]["omega0"].as_f64().ok_or_else(|| CliError::missing("mustar.json lacks summary.omega0"))?;
    let m = vortex_core::tfcore::build_tf_model(TrapParams64::new(s, omega0)?)?;
    let d: VortexDensity<f64> = mu_star(&m, cfg.n_nodes.max(256))?;
    let (header, cols) = io::read_columns(std::fs::File::open(&radial_csv)?)?;
    if header.first().map(String::as_str) != Some("r") || cols.len() < 2 || cols[0].len() < 2 {
        return Err(CliError::missing(format!("{} is not a radial vorticity table", radial_csv.display())));
    }
    let width = cols[0][1] - cols[0][0];
    let radial = RadialMu {
        width,
        centres: cols[0].clone(),
        values: cols[1].clone(),
    };
    single(cfg, "compare", |run| {
        let gap = run.stage("norm_gap", || radial_norm_gap(&radial, &d, gp.eps, cfg.n_nodes))?;
        run.write_json("compare.json", &json!({"eps": gp.eps, "s": s, "omega0": omega0, "norm_gap": gap}))?;
        Ok(())
    })
}
