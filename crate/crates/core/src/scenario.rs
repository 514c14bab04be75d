//! Problem instances: geometry, subcarrier plan and power budgets, plus the
//! precomputed per-link rates every formulation consumes.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    backhaul_capacity_bps, channel_gain, link_rate_bps, pathloss_macro_db, pathloss_small_db,
    ChannelParams, LinkGeometry,
};
use crate::error::ScenarioError;

pub const FORMAT_VERSION: u32 = 1;

/// Stream id reserved for Bernoulli backhaul draws inside [`rate_tables`].
const BACKHAUL_STREAM: u64 = 0xBAC4;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    #[serde(rename = "p_mbs_max_w")]
    pub p_mbs_max: f64,
    #[serde(rename = "p_rabs_max_w")]
    pub p_rabs_max: f64,
    #[serde(rename = "p_back_w")]
    pub p_back: f64,
}

impl Default for PowerBudget {
    fn default() -> Self {
        Self {
            p_mbs_max: 3.0,
            p_rabs_max: 1.0,
            p_back: 0.7,
        }
    }
}

impl PowerBudget {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let all_positive = [self.p_mbs_max, self.p_rabs_max, self.p_back]
            .iter()
            .all(|p| p.is_finite() && *p > 0.0);
        if !all_positive {
            return Err(ScenarioError::Config("power budgets must be positive".into()));
        }
        if self.p_back >= self.p_mbs_max {
            return Err(ScenarioError::Config(
                "backhaul power must be below the MBS power budget".into(),
            ));
        }
        Ok(())
    }

    /// Power left for MBS access links once the backhaul is fed.
    pub fn mbs_access_budget(&self) -> f64 {
        self.p_mbs_max - self.p_back
    }
}

/// Where the macro base station sits inside the square area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MbsPlacement {
    #[default]
    Origin,
    Center,
}

/// Spatial distribution of users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UserLayout {
    /// i.i.d. uniform over the whole area.
    #[default]
    Uniform,
    /// i.i.d. uniform over an axis-aligned box, coordinates in metres.
    Box { min_m: Point, max_m: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub area_side_m: f64,
    /// Total number of candidate sites; laid out as a square grid.
    pub candidate_grid: usize,
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub subcarrier_bw_hz: f64,
    pub backhaul_bw_hz: f64,
    pub p_mbs_max_w: f64,
    pub p_rabs_max_w: f64,
    /// Defaults to `backhaul_bw_hz * psd_zeta` when absent.
    pub p_back_w: Option<f64>,
    pub mbs: MbsPlacement,
    pub users: UserLayout,
    pub channel: ChannelParams,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            area_side_m: 1000.0,
            candidate_grid: 121,
            num_users: 8,
            num_subcarriers: 20,
            subcarrier_bw_hz: 180e3,
            backhaul_bw_hz: 700e3,
            p_mbs_max_w: 3.0,
            p_rabs_max_w: 1.0,
            p_back_w: None,
            mbs: MbsPlacement::Origin,
            users: UserLayout::Uniform,
            channel: ChannelParams::default(),
        }
    }
}

impl GenConfig {
    pub fn budgets(&self) -> PowerBudget {
        PowerBudget {
            p_mbs_max: self.p_mbs_max_w,
            p_rabs_max: self.p_rabs_max_w,
            p_back: self
                .p_back_w
                .unwrap_or(self.backhaul_bw_hz * self.channel.psd_zeta),
        }
    }

    fn grid_side(&self) -> Result<usize, ScenarioError> {
        let side = (self.candidate_grid as f64).sqrt().round() as usize;
        if self.candidate_grid == 0 || side * side != self.candidate_grid {
            return Err(ScenarioError::Config(format!(
                "candidate grid count {} is not a positive perfect square",
                self.candidate_grid
            )));
        }
        Ok(side)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.area_side_m > 0.0) {
            return Err(ScenarioError::Config("area side must be positive".into()));
        }
        self.grid_side()?;
        if self.num_users == 0 {
            return Err(ScenarioError::Config("at least one user is required".into()));
        }
        if self.num_subcarriers == 0 {
            return Err(ScenarioError::Config("at least one subcarrier is required".into()));
        }
        if !(self.subcarrier_bw_hz > 0.0) || !(self.backhaul_bw_hz > 0.0) {
            return Err(ScenarioError::Config("bandwidths must be positive".into()));
        }
        if let UserLayout::Box { min_m, max_m } = self.users {
            if min_m[0] > max_m[0] || min_m[1] > max_m[1] {
                return Err(ScenarioError::Config("user box has min > max".into()));
            }
        }
        self.channel.validate()?;
        self.budgets().validate()
    }
}

/// Evenly spaced `side x side` grid covering `[0, area]^2`, boundaries included.
pub fn grid_positions(area_side_m: f64, side: usize) -> Vec<Point> {
    if side == 1 {
        return vec![[area_side_m / 2.0; 2]];
    }
    let step = area_side_m / (side - 1) as f64;
    (0..side)
        .flat_map(|r| (0..side).map(move |c| [c as f64 * step, r as f64 * step]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "mbs_position_m")]
    pub mbs_position: Point,
    #[serde(rename = "candidate_positions_m")]
    pub candidate_positions: Vec<Point>,
    #[serde(rename = "user_positions_m")]
    pub user_positions: Vec<Point>,
    #[serde(rename = "subcarrier_bandwidths_hz")]
    pub subcarriers: Vec<f64>,
    #[serde(rename = "backhaul_bandwidth_hz")]
    pub b_back: f64,
    #[serde(rename = "power")]
    pub budgets: PowerBudget,
    pub channel: ChannelParams,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    format_version: u32,
    #[serde(flatten)]
    scenario: Scenario,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

impl Scenario {
    pub fn num_candidates(&self) -> usize {
        self.candidate_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.candidate_positions.is_empty()
            || self.user_positions.is_empty()
            || self.subcarriers.is_empty()
        {
            return Err(ScenarioError::Config(
                "scenario needs at least one candidate, user and subcarrier".into(),
            ));
        }
        if self.subcarriers.iter().any(|b| !(*b > 0.0)) || !(self.b_back > 0.0) {
            return Err(ScenarioError::Config("bandwidths must be positive".into()));
        }
        self.channel.validate()?;
        self.budgets.validate()
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            format_version: FORMAT_VERSION,
            scenario: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let parse_err = |e: serde_json::Error| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(parse_err)?;
        match probe.format_version {
            Some(FORMAT_VERSION) => {}
            Some(found) => {
                return Err(ScenarioError::Version {
                    found,
                    expected: FORMAT_VERSION,
                })
            }
            None => {
                return Err(ScenarioError::Parse {
                    line: 1,
                    column: 1,
                    message: "missing field `format_version`".into(),
                })
            }
        }
        let file: ScenarioFile = serde_json::from_str(text).map_err(parse_err)?;
        file.scenario.validate()?;
        Ok(file.scenario)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Draws a scenario. Candidates form an even grid, users are i.i.d. uniform
/// over the configured region; everything is a function of `seed`.
pub fn generate(config: &GenConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    let side = config.grid_side()?;
    let area = config.area_side_m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = match config.users {
        UserLayout::Uniform => ([0.0, 0.0], [area, area]),
        UserLayout::Box { min_m, max_m } => (min_m, max_m),
    };
    let user_positions = (0..config.num_users)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            [lo[0] + u * (hi[0] - lo[0]), lo[1] + v * (hi[1] - lo[1])]
        })
        .collect();
    let mbs_position = match config.mbs {
        MbsPlacement::Origin => [0.0, 0.0],
        MbsPlacement::Center => [area / 2.0, area / 2.0],
    };
    Ok(Scenario {
        mbs_position,
        candidate_positions: grid_positions(area, side),
        user_positions,
        subcarriers: vec![config.subcarrier_bw_hz; config.num_subcarriers],
        b_back: config.backhaul_bw_hz,
        budgets: config.budgets(),
        channel: config.channel.clone(),
        seed,
    })
}

/// Per-link rates and path losses for one scenario. Rates in bit/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTables {
    /// `r_mbs[j][k]`
    pub r_mbs: Vec<Vec<f64>>,
    /// `r_rabs[i][j][k]`
    pub r_rabs: Vec<Vec<Vec<f64>>>,
    pub c_back: Vec<f64>,
    /// Per-subcarrier transmit power `b_k * zeta`.
    pub p_k: Vec<f64>,
    pub bandwidth_hz: Vec<f64>,
    pub pl_mbs_db: Vec<f64>,
    /// `pl_rabs_db[i][j]`
    pub pl_rabs_db: Vec<Vec<f64>>,
}

impl RateTables {
    pub fn num_candidates(&self) -> usize {
        self.r_rabs.len()
    }

    pub fn num_users(&self) -> usize {
        self.r_mbs.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.p_k.len()
    }
}

fn distance(a: Point, b: Point, dh: f64) -> LinkGeometry<f64> {
    LinkGeometry::between_m(a[0] - b[0], a[1] - b[1], dh)
        .expect("height separation keeps every link distance positive")
}

pub fn rate_tables(s: &Scenario) -> Result<RateTables, ScenarioError> {
    s.validate()?;
    let ch = &s.channel;
    if ch.mbs_height_m == ch.user_height_m || ch.rabs_height_m == ch.user_height_m {
        // A zero height gap lets a co-located user hit the log singularity.
        let colocated = s.user_positions.iter().any(|u| {
            *u == s.mbs_position || s.candidate_positions.iter().any(|c| c == u)
        });
        if colocated {
            return Err(ScenarioError::Config(
                "user co-located with a station at equal height".into(),
            ));
        }
    }
    if ch.mbs_height_m == ch.rabs_height_m && s.candidate_positions.contains(&s.mbs_position) {
        return Err(ScenarioError::Config(
            "candidate co-located with the MBS at equal height".into(),
        ));
    }

    let p_k: Vec<f64> = s.subcarriers.iter().map(|b| b * ch.psd_zeta).collect();
    let noise: Vec<f64> = s.subcarriers.iter().map(|b| ch.noise_power_w(*b)).collect();
    let rates = |pl: f64| -> Vec<f64> {
        let g = channel_gain(pl);
        s.subcarriers
            .iter()
            .zip(&p_k)
            .zip(&noise)
            .map(|((b, p), n)| link_rate_bps(*b, *p, g, *n))
            .collect()
    };

    let pl_mbs_db: Vec<f64> = s
        .user_positions
        .iter()
        .map(|u| pathloss_macro_db(distance(s.mbs_position, *u, ch.mbs_height_m - ch.user_height_m)))
        .collect();
    let r_mbs = pl_mbs_db.iter().map(|pl| rates(*pl)).collect();

    let pl_rabs_db: Vec<Vec<f64>> = s
        .candidate_positions
        .iter()
        .map(|c| {
            s.user_positions
                .iter()
                .map(|u| pathloss_small_db(distance(*c, *u, ch.rabs_height_m - ch.user_height_m)))
                .collect()
        })
        .collect();
    let r_rabs = pl_rabs_db
        .iter()
        .map(|row| row.iter().map(|pl| rates(*pl)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(BACKHAUL_STREAM);
    let c_back = s
        .candidate_positions
        .iter()
        .map(|c| {
            let d = distance(s.mbs_position, *c, ch.mbs_height_m - ch.rabs_height_m);
            backhaul_capacity_bps(d, s.b_back, s.budgets.p_back, ch, &mut rng)
        })
        .collect();

    Ok(RateTables {
        r_mbs,
        r_rabs,
        c_back,
        p_k,
        bandwidth_hz: s.subcarriers.clone(),
        pl_mbs_db,
        pl_rabs_db,
    })
}
