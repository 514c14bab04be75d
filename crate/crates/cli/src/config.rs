use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use rabs_core::baselines::EnumLimits;
use rabs_core::conic::SolverConfig;
use rabs_core::harness::Method;
use rabs_core::refinement::AssignmentMode;
use rabs_core::scenario::{GenConfig, MbsPlacement};

/// Flat TOML file; every key mirrors a command-line flag with `-` spelled `_`.
/// `seed` is the seed of whichever subcommand reads the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub area: Option<f64>,
    pub candidates: Option<usize>,
    pub users: Option<usize>,
    pub subcarriers: Option<usize>,
    pub subcarrier_bw: Option<f64>,
    pub psd: Option<f64>,
    pub backhaul_bw: Option<f64>,
    pub pmbs: Option<f64>,
    pub prabs: Option<f64>,
    pub pback: Option<f64>,
    pub noise_psd: Option<f64>,
    pub mbs: Option<String>,

    pub seed: Option<u64>,
    pub tmax: Option<usize>,
    pub mode: Option<String>,
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_nodes: Option<f64>,

    pub method: Option<String>,
    pub site: Option<usize>,
    pub scenario: Option<PathBuf>,

    pub replications: Option<usize>,
    pub sweep: Option<String>,
    pub values: Option<Vec<usize>>,
    pub methods: Option<Vec<String>>,

    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn parse_mbs(s: &str) -> Result<MbsPlacement, String> {
    match s {
        "origin" => Ok(MbsPlacement::Origin),
        "center" => Ok(MbsPlacement::Center),
        _ => Err(format!("unknown MBS placement `{s}` (expected origin or center)")),
    }
}

pub fn parse_method(s: &str) -> Result<Method> {
    s.parse().map_err(anyhow::Error::msg)
}

#[derive(Args, Debug, Default)]
pub struct ScenarioArgs {
    /// Side of the square area in metres.
    #[arg(long)]
    pub area: Option<f64>,
    /// Number of candidate sites (a perfect square).
    #[arg(long)]
    pub candidates: Option<usize>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub subcarriers: Option<usize>,
    /// Subcarrier bandwidth in Hz.
    #[arg(long)]
    pub subcarrier_bw: Option<f64>,
    /// Transmit power spectral density in W/Hz.
    #[arg(long)]
    pub psd: Option<f64>,
    /// Backhaul bandwidth in Hz.
    #[arg(long)]
    pub backhaul_bw: Option<f64>,
    /// MBS power budget in W.
    #[arg(long)]
    pub pmbs: Option<f64>,
    /// RABS power budget in W.
    #[arg(long)]
    pub prabs: Option<f64>,
    /// Backhaul power in W; defaults to backhaul bandwidth times PSD.
    #[arg(long)]
    pub pback: Option<f64>,
    /// Noise PSD in dBm/Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_psd: Option<f64>,
    /// MBS placement: origin or center.
    #[arg(long)]
    pub mbs: Option<String>,
}

impl ScenarioArgs {
    pub fn resolve(&self, f: &FileConfig) -> Result<GenConfig> {
        let mut g = GenConfig::default();
        macro_rules! pick {
            ($field:ident, $target:expr) => {
                if let Some(v) = self.$field.clone().or(f.$field.clone()) {
                    $target = v;
                }
            };
        }
        pick!(area, g.area_side_m);
        pick!(candidates, g.candidate_grid);
        pick!(users, g.num_users);
        pick!(subcarriers, g.num_subcarriers);
        pick!(subcarrier_bw, g.subcarrier_bw_hz);
        pick!(psd, g.channel.psd_zeta);
        pick!(backhaul_bw, g.backhaul_bw_hz);
        pick!(pmbs, g.p_mbs_max_w);
        pick!(prabs, g.p_rabs_max_w);
        pick!(noise_psd, g.channel.noise_psd_dbm_per_hz);
        g.p_back_w = self.pback.or(f.pback);
        if let Some(m) = self.mbs.as_deref().or(f.mbs.as_deref()) {
            g.mbs = parse_mbs(m).map_err(anyhow::Error::msg)?;
        }
        g.validate()?;
        Ok(g)
    }
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Rounding repetitions.
    #[arg(long)]
    pub tmax: Option<usize>,
    /// Subcarrier assignment mode: paper_faithful or skip_and_continue.
    #[arg(long)]
    pub mode: Option<String>,
    /// Solver tolerance (absolute and relative).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Node budget of the exact search.
    #[arg(long)]
    pub max_nodes: Option<f64>,
}

pub struct RunSettings {
    pub solver: SolverConfig,
    pub t_max: usize,
    pub mode: AssignmentMode,
    pub limits: EnumLimits,
}

impl RunArgs {
    pub fn resolve(&self, f: &FileConfig) -> Result<RunSettings> {
        let mut solver = SolverConfig::default();
        if let Some(eps) = self.eps.or(f.eps) {
            if !(eps > 0.0) {
                bail!("--eps must be positive");
            }
            solver.eps_abs = eps;
            solver.eps_rel = eps;
        }
        if let Some(n) = self.max_iter.or(f.max_iter) {
            solver.max_iter = n;
        }
        let t_max = self.tmax.or(f.tmax).unwrap_or(10);
        if t_max == 0 {
            bail!("--tmax must be at least 1");
        }
        let mode = match self.mode.as_deref().or(f.mode.as_deref()) {
            Some(m) => m.parse().map_err(anyhow::Error::msg)?,
            None => AssignmentMode::default(),
        };
        let mut limits = EnumLimits::default();
        if let Some(n) = self.max_nodes.or(f.max_nodes) {
            limits.max_nodes = n;
        }
        Ok(RunSettings {
            solver,
            t_max,
            mode,
            limits,
        })
    }
}
