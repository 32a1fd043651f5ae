//! Scenario configuration: one strict JSON document per run.

use std::fmt;
use std::path::Path;

use firetrack_core::coordinator::PlannerConfig;
use firetrack_core::coverage::CoverageConfig;
use firetrack_core::fire::ScenarioCase;
use firetrack_core::qos::{BoundConvention, ClassifyConfig, ConfidenceConfig};
use firetrack_core::tour::TWO_OPT_PASSES;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub terrain: TerrainConfig,
    pub areas: Vec<AreaConfig>,
    pub fire: FireConfig,
    pub uavs: UavConfig,
    #[serde(default)]
    pub planner: PlannerSettings,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainConfig {
    pub width: f64,
    pub height: f64,
}

/// A patch of fire: spots are drawn uniformly in the disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    pub center: [f64; 2],
    pub radius: f64,
    /// Inclusive range for the initial spot count.
    pub n_spots: [usize; 2],
    /// Prioritized areas are tracked with service guarantees; the rest are
    /// left to the coverage planner.
    #[serde(default = "yes")]
    pub prioritized: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvNoiseConfig {
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub wind: f64,
    #[serde(default)]
    pub azimuth: f64,
}

/// Distortion of the ground-truth length-to-breadth ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbAdjustConfig {
    pub scale: f64,
    pub offset: f64,
}

/// Switches the fire regime at a given step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeChange {
    pub at: u64,
    pub case: ScenarioCase,
    /// New spread rate for every spot, if given.
    #[serde(default)]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireConfig {
    pub case: ScenarioCase,
    pub rate: f64,
    pub wind: f64,
    pub azimuth: f64,
    /// Per-step random-walk standard deviations of the environment.
    #[serde(default)]
    pub noise: EnvNoiseConfig,
    /// Azimuth jitter between spots at ignition (uniform half-width, rad).
    #[serde(default)]
    pub azimuth_spread: f64,
    /// Child-spawn probability; only used while the fire is spreading.
    #[serde(default)]
    pub spawn_prob: f64,
    #[serde(default = "default_spawn_max")]
    pub spawn_max: u32,
    #[serde(default)]
    pub lb_adjust: Option<LbAdjustConfig>,
    #[serde(default)]
    pub schedule: Vec<RegimeChange>,
}

fn default_spawn_max() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementNoise {
    pub angle: f64,
    pub rate: f64,
    pub wind: f64,
    pub azimuth: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self { angle: 0.01, rate: 0.01, wind: 0.02, azimuth: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    pub count: usize,
    pub v_max: f64,
    pub altitude: f64,
    pub half_angle: f64,
    /// Launch point; UAV `i` starts `i` units east of it.
    #[serde(default)]
    pub base: [f64; 2],
    #[serde(default)]
    pub measurement_noise: MeasurementNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSettings {
    pub alpha: f64,
    pub mc_samples: usize,
    pub gamma_step: f64,
    pub two_opt_passes: usize,
    /// Merge-disk radius; `None` uses half the footprint width.
    pub merge_radius: Option<f64>,
    pub k_max: usize,
    pub eps_v: f64,
    pub classify_window: usize,
    pub dismissal_interval: u64,
    pub literal_bounds: bool,
    pub max_splits_per_round: Option<usize>,
    /// Evaluate a subgraph only once its UAV has reached it.
    pub arrival_gate: bool,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mc_samples: 256,
            gamma_step: 0.95,
            two_opt_passes: TWO_OPT_PASSES,
            merge_radius: None,
            k_max: 5,
            eps_v: 0.05,
            classify_window: 10,
            dismissal_interval: 20,
            literal_bounds: false,
            max_splits_per_round: None,
            arrival_gate: true,
        }
    }
}

impl PlannerSettings {
    pub fn convention(&self) -> BoundConvention {
        if self.literal_bounds {
            BoundConvention::Literal
        } else {
            BoundConvention::Combined
        }
    }

    pub fn planner_config(&self, seed: u64) -> PlannerConfig {
        PlannerConfig {
            confidence: ConfidenceConfig { alpha: self.alpha, mc_samples: self.mc_samples },
            classify: self.classify_config(),
            convention: self.convention(),
            two_opt_passes: self.two_opt_passes,
            merge_radius: self.merge_radius,
            k_max: self.k_max,
            dismissal_interval: self.dismissal_interval,
            max_splits_per_round: self.max_splits_per_round,
            seed,
        }
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig { eps_v: self.eps_v, window: self.classify_window }
    }

    pub fn coverage_config(&self, seed: u64) -> CoverageConfig {
        CoverageConfig {
            two_opt_passes: self.two_opt_passes,
            merge_radius: self.merge_radius,
            k_max: self.k_max,
            convention: self.convention(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub steps: u64,
    pub seed: u64,
    /// Leading steps left out of the summary statistics.
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
}

fn default_burn_in() -> u64 {
    10
}

/// One offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldIssue {
    pub field: String,
    pub problem: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {}", IssueList(.0))]
    Invalid(Vec<FieldIssue>),
}

struct IssueList<'a>(&'a [FieldIssue]);

impl fmt::Display for IssueList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} {}", issue.field, issue.problem)?;
        }
        Ok(())
    }
}

struct Checker(Vec<FieldIssue>);

impl Checker {
    fn require(&mut self, ok: bool, field: impl Into<String>, problem: &str) {
        if !ok {
            self.0.push(FieldIssue { field: field.into(), problem: problem.to_string() });
        }
    }

    fn positive(&mut self, v: f64, field: impl Into<String>) {
        self.require(v.is_finite() && v > 0.0, field, "must be a finite number > 0");
    }

    fn non_negative(&mut self, v: f64, field: impl Into<String>) {
        self.require(v.is_finite() && v >= 0.0, field, "must be a finite number >= 0");
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker(Vec::new());
        c.positive(self.terrain.width, "terrain.width");
        c.positive(self.terrain.height, "terrain.height");

        c.require(!self.areas.is_empty(), "areas", "must list at least one area");
        for (i, a) in self.areas.iter().enumerate() {
            let inside = (0.0..self.terrain.width).contains(&a.center[0]) && (0.0..self.terrain.height).contains(&a.center[1]);
            c.require(inside, format!("areas[{i}].center"), "must lie inside the terrain");
            c.non_negative(a.radius, format!("areas[{i}].radius"));
            c.require(a.n_spots[0] >= 1, format!("areas[{i}].n_spots"), "lower end must be >= 1");
            c.require(a.n_spots[0] <= a.n_spots[1], format!("areas[{i}].n_spots"), "must be an ordered [lo, hi] pair");
        }

        let f = &self.fire;
        c.non_negative(f.rate, "fire.rate");
        c.non_negative(f.wind, "fire.wind");
        c.require(f.azimuth.is_finite(), "fire.azimuth", "must be finite");
        c.non_negative(f.noise.rate, "fire.noise.rate");
        c.non_negative(f.noise.wind, "fire.noise.wind");
        c.non_negative(f.noise.azimuth, "fire.noise.azimuth");
        c.non_negative(f.azimuth_spread, "fire.azimuth_spread");
        c.require((0.0..=1.0).contains(&f.spawn_prob), "fire.spawn_prob", "must lie in [0, 1]");
        if let Some(adj) = f.lb_adjust {
            c.require(adj.scale.is_finite() && adj.offset.is_finite(), "fire.lb_adjust", "must be finite");
        }
        for (i, r) in f.schedule.iter().enumerate() {
            if let Some(rate) = r.rate {
                c.non_negative(rate, format!("fire.schedule[{i}].rate"));
            }
        }
        c.require(f.schedule.windows(2).all(|w| w[0].at < w[1].at), "fire.schedule", "must be strictly ordered in time");

        let u = &self.uavs;
        c.require(u.count >= 1, "uavs.count", "must be >= 1");
        c.positive(u.v_max, "uavs.v_max");
        c.positive(u.altitude, "uavs.altitude");
        c.require(
            u.half_angle.is_finite() && u.half_angle > 0.0 && u.half_angle < std::f64::consts::FRAC_PI_2,
            "uavs.half_angle",
            "must lie in (0, π/2)",
        );
        let n = &u.measurement_noise;
        c.non_negative(n.angle, "uavs.measurement_noise.angle");
        c.non_negative(n.rate, "uavs.measurement_noise.rate");
        c.non_negative(n.wind, "uavs.measurement_noise.wind");
        c.non_negative(n.azimuth, "uavs.measurement_noise.azimuth");

        let p = &self.planner;
        c.require(p.alpha > 0.0 && p.alpha < 1.0, "planner.alpha", "must lie in (0, 1)");
        c.require(p.mc_samples >= 1, "planner.mc_samples", "must be >= 1");
        c.require((0.0..=1.0).contains(&p.gamma_step), "planner.gamma_step", "must lie in [0, 1]");
        if let Some(r) = p.merge_radius {
            c.non_negative(r, "planner.merge_radius");
        }
        c.require(p.k_max >= 1, "planner.k_max", "must be >= 1");
        c.positive(p.eps_v, "planner.eps_v");
        c.require(p.classify_window >= 1, "planner.classify_window", "must be >= 1");
        if let Some(m) = p.max_splits_per_round {
            c.require(m >= 1, "planner.max_splits_per_round", "must be >= 1");
        }

        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(c.0))
        }
    }

    /// Ground footprint width of every UAV.
    pub fn fov(&self) -> f64 {
        2.0 * self.uavs.altitude * self.uavs.half_angle.tan()
    }
}
