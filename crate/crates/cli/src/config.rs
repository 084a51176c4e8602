//! Run configuration: defaults, then a `key = value` file, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vortex_core::tfcore::omega_c1;
use vortex_core::TfModel64;

use crate::error::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "VORTEX_OUT";

/// Raw values before validation; `None` means "not given at this layer".
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ConfigArgs {
    /// key=value configuration file (overridden by flags)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trap exponent (s >= 2)
    #[arg(long)]
    pub s: Option<f64>,
    /// Rotation: a number or `<k>x-crit` for k times the critical speed
    #[arg(long)]
    pub omega0: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated sweep, each value written to its own subdirectory
    #[arg(long = "eps-list")]
    pub eps_list: Option<String>,
    /// Radial nodes
    #[arg(long = "n-nodes")]
    pub n_nodes: Option<usize>,
    /// Nodes per side of 2D grids
    #[arg(long = "grid-n")]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $VORTEX_OUT or ./vortex-out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// renorm-min start: zero, mustar or random
    #[arg(long)]
    pub init: Option<String>,
    /// green: number of sampled pairs
    #[arg(long = "n-pairs")]
    pub n_pairs: Option<usize>,
    /// gp: number of multi-starts
    #[arg(long = "n-starts")]
    pub n_starts: Option<usize>,
    /// compare: directory of a previous gp run
    #[arg(long = "gp-dir")]
    pub gp_dir: Option<PathBuf>,
    /// compare: directory of a previous mustar run
    #[arg(long = "mustar-dir")]
    pub mustar_dir: Option<PathBuf>,
}

/// Validated configuration echoed into every manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub s: f64,
    pub omega0: f64,
    pub omega0_input: String,
    pub eps: Vec<f64>,
    pub n_nodes: usize,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub init: String,
    pub n_pairs: usize,
    pub n_starts: usize,
    pub gp_dir: Option<PathBuf>,
    pub mustar_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "s", "omega0", "eps", "eps_list", "n_nodes", "grid_n", "tol", "max_iter", "seed", "out", "init", "n_pairs",
    "n_starts", "gp_dir", "mustar_dir",
];

pub fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::missing(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::validation("config", format!("line {}: expected key = value", no + 1)));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::validation("config", format!("line {}: unknown key `{key}`", no + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn parse_num<V: std::str::FromStr>(field: &str, v: &str) -> Result<V, CliError> {
    v.parse()
        .map_err(|_| CliError::validation(field, format!("cannot parse `{v}`")))
}

/// Accepts `3.5`, or `2x-crit` for twice the critical speed.
pub fn parse_omega0(s: f64, raw: &str) -> Result<f64, CliError> {
    let raw = raw.trim();
    if let Some(k) = raw.strip_suffix("x-crit") {
        let k: f64 = parse_num("omega0", k)?;
        let model = TfModel64::with_critical_multiple(s, 1.0).map_err(CliError::from)?;
        return Ok(k * omega_c1(&model));
    }
    parse_num("omega0", raw)
}

impl ConfigArgs {
    /// Fills unset fields from the config file, if any.
    fn layered(&self) -> Result<ConfigArgs, CliError> {
        let mut merged = self.clone();
        let Some(path) = &self.config else {
            return Ok(merged);
        };
        let file = parse_file(path)?;
        let get = |k: &str| file.get(k).map(String::as_str);
        macro_rules! fill {
            ($field:ident, $key:literal) => {
                if merged.$field.is_none() {
                    if let Some(v) = get($key) {
                        merged.$field = Some(parse_num($key, v)?);
                    }
                }
            };
        }
        fill!(s, "s");
        fill!(eps, "eps");
        fill!(n_nodes, "n_nodes");
        fill!(grid_n, "grid_n");
        fill!(tol, "tol");
        fill!(max_iter, "max_iter");
        fill!(seed, "seed");
        fill!(n_pairs, "n_pairs");
        fill!(n_starts, "n_starts");
        if merged.omega0.is_none() {
            merged.omega0 = get("omega0").map(str::to_string);
        }
        if merged.eps_list.is_none() {
            merged.eps_list = get("eps_list").map(str::to_string);
        }
        if merged.init.is_none() {
            merged.init = get("init").map(str::to_string);
        }
        if merged.out.is_none() {
            merged.out = get("out").map(PathBuf::from);
        }
        if merged.gp_dir.is_none() {
            merged.gp_dir = get("gp_dir").map(PathBuf::from);
        }
        if merged.mustar_dir.is_none() {
            merged.mustar_dir = get("mustar_dir").map(PathBuf::from);
        }
        Ok(merged)
    }

    pub fn resolve(&self, default_eps: f64) -> Result<RunConfig, CliError> {
        let a = self.layered()?;
        let s = a.s.unwrap_or(2.0);
        if !(s >= 2.0) || !s.is_finite() {
            return Err(CliError::validation("s", format!("need s >= 2, got {s}")));
        }
        let omega0_input = a.omega0.clone().unwrap_or_else(|| "2x-crit".into());
        let omega0 = parse_omega0(s, &omega0_input)?;
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(CliError::validation("omega0", format!("need omega0 > 0, got {omega0}")));
        }
        let eps = match (&a.eps_list, a.eps) {
            (Some(list), _) => list
                .split(',')
                .map(|v| parse_num::<f64>("eps_list", v.trim()))
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(e)) => vec![e],
            (None, None) => vec![default_eps],
        };
        if eps.is_empty() {
            return Err(CliError::validation("eps_list", "empty sweep"));
        }
        for &e in &eps {
            if !(e > 0.0 && e < (-1.0f64).exp()) {
                return Err(CliError::validation("eps", format!("need 0 < eps < 1/e, got {e}")));
            }
        }
        let n_nodes = a.n_nodes.unwrap_or(2048);
        if n_nodes < 64 {
            return Err(CliError::validation("n_nodes", format!("need at least 64 radial nodes, got {n_nodes}")));
        }
        if let Some(t) = a.tol {
            if !(t > 0.0) {
                return Err(CliError::validation("tol", format!("need tol > 0, got {t}")));
            }
        }
        let init = a.init.clone().unwrap_or_else(|| "zero".into());
        if !["zero", "mustar", "random"].contains(&init.as_str()) {
            return Err(CliError::validation("init", format!("expected zero, mustar or random, got `{init}`")));
        }
        let out = a
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("vortex-out"));
        Ok(RunConfig {
            s,
            omega0,
            omega0_input,
            eps,
            n_nodes,
            grid_n: a.grid_n,
            tol: a.tol,
            max_iter: a.max_iter,
            seed: a.seed.unwrap_or(7),
            out,
            init,
            n_pairs: a.n_pairs.unwrap_or(50),
            n_starts: a.n_starts.unwrap_or(3),
            gp_dir: a.gp_dir.clone(),
            mustar_dir: a.mustar_dir.clone(),
        })
    }
}
