//! The six named experiment grids. Every trial owns its seed, derived from
//! the base seed, the trial's grid key and the experiment name, so results
//! do not depend on how trials are spread over workers.

use std::fmt;
use std::str::FromStr;

use firetrack_core::filter::{state, state_vector, FilterConfig, FilterState};
use firetrack_core::fire::{spread_factor, ScenarioCase};
use firetrack_core::qos::{bound_confidence, service_time, zeta_alpha, BoundConvention, BoundInputs, ConfidenceConfig};
use firetrack_core::seed::stream_seed;
use firetrack_core::tour::{build_mst, mst_weight, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    AreaConfig, EnvNoiseConfig, FireConfig, LbAdjustConfig, MeasurementNoise, PlannerSettings, RegimeChange,
    ScenarioConfig, SimConfig, TerrainConfig, UavConfig,
};
use crate::oracle::t_star_oracle;
use crate::plot::{line_chart, Series};
use crate::scenario::{run_scenario, MetricsRecord, SUMMARY_SCHEMA_VERSION};

pub const ALTITUDE: f64 = 10.0;
pub const HALF_ANGLE: f64 = std::f64::consts::FRAC_PI_4;
/// UAV speed of the tracking experiments, in distance units per step.
pub const TRACKING_V_MAX: f64 = 500.0;
/// UAV speed of the coverage experiment; slow enough that a tour takes
/// several steps.
pub const COVERAGE_V_MAX: f64 = 20.0;
pub const NOMINAL_WIND: f64 = 1.0;
pub const NOMINAL_AZIMUTH: f64 = 0.6;

/// Firefront speed of each regime.
pub fn case_speed(case: ScenarioCase) -> f64 {
    match case {
        ScenarioCase::Stationary => 0.0,
        ScenarioCase::Moving => 0.5,
        ScenarioCase::MovingSpreading => 1.0,
    }
}

/// Spread rate giving [`case_speed`] at the nominal wind.
pub fn case_rate(case: ScenarioCase) -> f64 {
    case_speed(case) / spread_factor(NOMINAL_WIND)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    UavRequirements,
    CoverageVsN,
    TubConvergence,
    TubTightness,
    EvolvingFire,
    ModelMismatch,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::UavRequirements,
        Experiment::CoverageVsN,
        Experiment::TubConvergence,
        Experiment::TubTightness,
        Experiment::EvolvingFire,
        Experiment::ModelMismatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::UavRequirements => "uav_requirements",
            Experiment::CoverageVsN => "coverage_vs_n",
            Experiment::TubConvergence => "tub_convergence",
            Experiment::TubTightness => "tub_tightness",
            Experiment::EvolvingFire => "evolving_fire",
            Experiment::ModelMismatch => "model_mismatch",
        }
    }

    /// Seeds (or trials, for the tightness grid) when not overridden.
    pub fn default_seeds(self) -> usize {
        match self {
            Experiment::TubTightness => 500,
            _ => 10,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown experiment `{0}`; valid names: {}", Experiment::ALL.map(|e| e.name()).join(", "))]
pub struct UnknownExperiment(pub String);

impl FromStr for Experiment {
    type Err = UnknownExperiment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentOptions {
    pub seeds: Option<usize>,
    pub workers: usize,
    pub base_seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { seeds: None, workers: 1, base_seed: 2024 }
    }
}

impl ExperimentOptions {
    fn seeds_for(&self, e: Experiment) -> usize {
        self.seeds.unwrap_or_else(|| e.default_seeds())
    }
}

/// Files an experiment writes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: &'static str,
    pub trials_csv: Vec<u8>,
    pub summary: serde_json::Value,
    pub svg: String,
    /// Whether any trial ran out of UAVs.
    pub insufficient: bool,
}

/// Runs `count` independent trials on `workers` threads; results come back
/// in trial order.
pub fn run_trials<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn to_csv<R: Serialize>(rows: &[R]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn case_label(case: ScenarioCase) -> String {
    format!("case {}", case.index())
}

/// Circular fire areas with centres drawn away from the terrain edge.
pub fn random_areas(count: usize, terrain: f64, radius: f64, spots: [usize; 2], prioritized: bool, seed: u64) -> Vec<AreaConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = radius + 40.0;
    (0..count)
        .map(|_| AreaConfig {
            center: [rng.gen_range(margin..terrain - margin), rng.gen_range(margin..terrain - margin)],
            radius,
            n_spots: spots,
            prioritized,
        })
        .collect()
}

/// Shared scenario template: square terrain, nominal wind, regime speed.
pub fn scenario(case: ScenarioCase, terrain: f64, areas: Vec<AreaConfig>, uavs: usize, v_max: f64, steps: u64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        terrain: TerrainConfig { width: terrain, height: terrain },
        areas,
        fire: FireConfig {
            case,
            rate: case_rate(case),
            wind: NOMINAL_WIND,
            azimuth: NOMINAL_AZIMUTH,
            noise: EnvNoiseConfig { rate: 0.0, wind: 0.01, azimuth: 0.01 },
            azimuth_spread: 0.3,
            spawn_prob: 0.02,
            spawn_max: 3,
            lb_adjust: None,
            schedule: Vec::new(),
        },
        uavs: UavConfig {
            count: uavs,
            v_max,
            altitude: ALTITUDE,
            half_angle: HALF_ANGLE,
            base: [0.0, 0.0],
            measurement_noise: MeasurementNoise::default(),
        },
        planner: PlannerSettings::default(),
        sim: SimConfig { steps, seed, burn_in: 10 },
    }
}

fn run(cfg: &ScenarioConfig) -> MetricsRecord {
    run_scenario(cfg).expect("experiment configs are valid")
}

// ---------------------------------------------------------------- requirements

pub const REQUIREMENT_AREAS: usize = 10;
pub const REQUIREMENT_STEPS: u64 = 25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementTrial {
    pub case: ScenarioCase,
    pub areas: usize,
    pub seed_index: usize,
    pub required_uavs: usize,
    pub peak_allocated: usize,
    pub insufficient_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequirementResult {
    pub trials: Vec<RequirementTrial>,
}

impl RequirementResult {
    /// Mean required UAVs per area count, for one case.
    pub fn means(&self, case: ScenarioCase) -> Vec<(usize, f64)> {
        (1..=REQUIREMENT_AREAS)
            .map(|n| {
                let xs: Vec<f64> = self
                    .trials
                    .iter()
                    .filter(|t| t.case == case && t.areas == n)
                    .map(|t| t.required_uavs as f64)
                    .collect();
                (n, mean(&xs))
            })
            .collect()
    }

    pub fn report(&self) -> ExperimentReport {
        let per_case: serde_json::Map<String, serde_json::Value> = ScenarioCase::ALL
            .iter()
            .map(|&c| {
                let stats: Vec<_> = (1..=REQUIREMENT_AREAS)
                    .map(|n| {
                        let xs: Vec<f64> = self
                            .trials
                            .iter()
                            .filter(|t| t.case == c && t.areas == n)
                            .map(|t| t.required_uavs as f64)
                            .collect();
                        json!({"areas": n, "mean": mean(&xs), "std_err": std_err(&xs)})
                    })
                    .collect();
                (case_label(c), json!(stats))
            })
            .collect();
        let series = ScenarioCase::ALL
            .iter()
            .map(|&c| Series { label: case_label(c), points: self.means(c).into_iter().map(|(n, m)| (n as f64, m)).collect() })
            .collect::<Vec<_>>();
        ExperimentReport {
            name: Experiment::UavRequirements.name(),
            trials_csv: to_csv(&self.trials),
            summary: json!({"schema_version": SUMMARY_SCHEMA_VERSION, "experiment": "uav_requirements", "required_uavs": per_case}),
            svg: line_chart("UAVs required", "fire areas", "UAVs", &series),
            insufficient: false,
        }
    }
}

pub fn uav_requirements(opts: &ExperimentOptions) -> RequirementResult {
    let seeds = opts.seeds_for(Experiment::UavRequirements);
    let grid: Vec<(ScenarioCase, usize, usize)> = ScenarioCase::ALL
        .iter()
        .flat_map(|&c| (1..=REQUIREMENT_AREAS).flat_map(move |n| (0..seeds).map(move |s| (c, n, s))))
        .collect();
    let trials = run_trials(grid.len(), opts.workers, |i| {
        let (case, n, s) = grid[i];
        let seed = stream_seed(opts.base_seed, s as u64, "uav_requirements");
        let mut areas = random_areas(REQUIREMENT_AREAS, 500.0, 20.0, [20, 30], true, stream_seed(seed, 0, "areas"));
        areas.truncate(n);
        let cfg = scenario(case, 500.0, areas, 30, TRACKING_V_MAX, REQUIREMENT_STEPS, seed);
        let rec = run(&cfg);
        RequirementTrial {
            case,
            areas: n,
            seed_index: s,
            required_uavs: rec.summary.required_uavs,
            peak_allocated: rec.summary.peak_allocated,
            insufficient_rounds: rec.summary.insufficient_rounds,
        }
    });
    RequirementResult { trials }
}

// -------------------------------------------------------------------- coverage

pub const COVERAGE_MAX_UAVS: usize = 5;
pub const COVERAGE_STEPS: u64 = 100;
/// Steps over which the residual slope is measured.
pub const SLOPE_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageTrial {
    pub case: ScenarioCase,
    pub uavs: usize,
    pub seed_index: usize,
    pub cumulative_residual: f64,
    /// Cumulative residual at every step.
    #[serde(skip)]
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub trials: Vec<CoverageTrial>,
}

impl CoverageResult {
    /// Mean final cumulative residual for 1..=5 UAVs.
    pub fn means(&self, case: ScenarioCase) -> Vec<f64> {
        (1..=COVERAGE_MAX_UAVS)
            .map(|u| {
                let xs: Vec<f64> =
                    self.trials.iter().filter(|t| t.case == case && t.uavs == u).map(|t| t.cumulative_residual).collect();
                mean(&xs)
            })
            .collect()
    }

    /// Seed-mean cumulative residual series for a case and team size.
    pub fn mean_series(&self, case: ScenarioCase, uavs: usize) -> Vec<f64> {
        let runs: Vec<&CoverageTrial> = self.trials.iter().filter(|t| t.case == case && t.uavs == uavs).collect();
        let len = runs.iter().map(|t| t.series.len()).min().unwrap_or(0);
        (0..len).map(|k| mean(&runs.iter().map(|t| t.series[k]).collect::<Vec<_>>())).collect()
    }

    /// Slope of the mean cumulative residual over the last
    /// [`SLOPE_WINDOW`] steps, relative to its slope over the first window.
    pub fn slope_ratio(&self, case: ScenarioCase, uavs: usize) -> f64 {
        let s = self.mean_series(case, uavs);
        let w = SLOPE_WINDOW;
        if s.len() < 2 * w {
            return f64::NAN;
        }
        let n = s.len();
        let last = (s[n - 1] - s[n - 1 - w]) / w as f64;
        let first = s[w - 1] / w as f64;
        last / first
    }

    pub fn report(&self) -> ExperimentReport {
        let per_case: serde_json::Map<String, serde_json::Value> = ScenarioCase::ALL
            .iter()
            .map(|&c| {
                let stats: Vec<_> = (1..=COVERAGE_MAX_UAVS)
                    .map(|u| {
                        let xs: Vec<f64> =
                            self.trials.iter().filter(|t| t.case == c && t.uavs == u).map(|t| t.cumulative_residual).collect();
                        json!({"uavs": u, "mean": mean(&xs), "std_err": std_err(&xs), "slope_ratio": self.slope_ratio(c, u)})
                    })
                    .collect();
                (case_label(c), json!(stats))
            })
            .collect();
        let series = ScenarioCase::ALL
            .iter()
            .map(|&c| Series {
                label: case_label(c),
                points: self.means(c).into_iter().enumerate().map(|(i, m)| ((i + 1) as f64, m)).collect(),
            })
            .collect::<Vec<_>>();
        ExperimentReport {
            name: Experiment::CoverageVsN.name(),
            trials_csv: to_csv(&self.trials),
            summary: json!({"schema_version": SUMMARY_SCHEMA_VERSION, "experiment": "coverage_vs_n", "cumulative_residual": per_case}),
            svg: line_chart("Cumulative coverage residual", "UAVs", "residual", &series),
            insufficient: false,
        }
    }
}

pub fn coverage_config(case: ScenarioCase, uavs: usize, seed: u64) -> ScenarioConfig {
    let areas = random_areas(2, 200.0, 25.0, [15, 20], false, stream_seed(seed, 0, "areas"));
    scenario(case, 200.0, areas, uavs, COVERAGE_V_MAX, COVERAGE_STEPS, seed)
}

pub fn coverage_vs_n(opts: &ExperimentOptions) -> CoverageResult {
    let seeds = opts.seeds_for(Experiment::CoverageVsN);
    let grid: Vec<(ScenarioCase, usize, usize)> = ScenarioCase::ALL
        .iter()
        .flat_map(|&c| (1..=COVERAGE_MAX_UAVS).flat_map(move |u| (0..seeds).map(move |s| (c, u, s))))
        .collect();
    let trials = run_trials(grid.len(), opts.workers, |i| {
        let (case, uavs, s) = grid[i];
        let seed = stream_seed(opts.base_seed, s as u64, "coverage_vs_n");
        let rec = run(&coverage_config(case, uavs, seed));
        CoverageTrial {
            case,
            uavs,
            seed_index: s,
            cumulative_residual: rec.summary.cumulative_residual,
            series: rec.rows.iter().map(|r| r.cumulative_residual).collect(),
        }
    });
    CoverageResult { trials }
}

// ----------------------------------------------------------------- convergence

pub const CONVERGENCE_STEPS: u64 = 80;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub case: ScenarioCase,
    pub seed_index: usize,
    pub time: u64,
    pub mean_t_ub: Option<f64>,
    pub subgraphs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceResult {
    /// Per-step seed mean of the subgraph-mean bound, skipping steps where
    /// no seed had an evaluated subgraph.
    pub fn series(&self, case: ScenarioCase) -> Vec<(u64, f64)> {
        let mut out = Vec::new();
        for t in 1..=CONVERGENCE_STEPS {
            let xs: Vec<f64> =
                self.points.iter().filter(|p| p.case == case && p.time == t).filter_map(|p| p.mean_t_ub).collect();
            if !xs.is_empty() {
                out.push((t, mean(&xs)));
            }
        }
        out
    }

    pub fn report(&self) -> ExperimentReport {
        let series: Vec<Series> = ScenarioCase::ALL
            .iter()
            .map(|&c| Series { label: case_label(c), points: self.series(c).into_iter().map(|(t, v)| (t as f64, v)).collect() })
            .collect();
        let summary: serde_json::Map<String, serde_json::Value> = series
            .iter()
            .map(|s| (s.label.clone(), json!(s.points.iter().map(|p| json!({"time": p.0, "mean_t_ub": p.1})).collect::<Vec<_>>())))
            .collect();
        ExperimentReport {
            name: Experiment::TubConvergence.name(),
            trials_csv: to_csv(&self.points),
            summary: json!({"schema_version": SUMMARY_SCHEMA_VERSION, "experiment": "tub_convergence", "mean_t_ub": summary}),
            svg: line_chart("Mean service-time bound", "step", "T_UB (steps)", &series),
            insufficient: false,
        }
    }
}

pub fn convergence_config(case: ScenarioCase, seed: u64) -> ScenarioConfig {
    let areas = random_areas(REQUIREMENT_AREAS, 500.0, 20.0, [20, 30], true, stream_seed(seed, 0, "areas"));
    let mut cfg = scenario(case, 500.0, areas, 30, TRACKING_V_MAX, CONVERGENCE_STEPS, seed);
    cfg.planner.max_splits_per_round = Some(1);
    cfg
}

pub fn tub_convergence(opts: &ExperimentOptions) -> ConvergenceResult {
    let seeds = opts.seeds_for(Experiment::TubConvergence);
    let grid: Vec<(ScenarioCase, usize)> = ScenarioCase::ALL.iter().flat_map(|&c| (0..seeds).map(move |s| (c, s))).collect();
    let runs = run_trials(grid.len(), opts.workers, |i| {
        let (case, s) = grid[i];
        let rec = run(&convergence_config(case, stream_seed(opts.base_seed, s as u64, "tub_convergence")));
        rec.rows
            .iter()
            .map(|r| ConvergencePoint { case, seed_index: s, time: r.time, mean_t_ub: r.mean_t_ub, subgraphs: r.subgraphs })
            .collect::<Vec<_>>()
    });
    ConvergenceResult { points: runs.into_iter().flatten().collect() }
}

// ------------------------------------------------------------------- tightness

pub const TIGHTNESS_SIDE: f64 = 100.0;
pub const TIGHTNESS_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessTrial {
    pub case: ScenarioCase,
    pub trial: usize,
    pub n_q: usize,
    pub zeta: f64,
    pub t_ub: f64,
    pub t_star: f64,
    pub ratio: f64,
    /// The bound fell short of the reference time.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessResult {
    pub trials: Vec<TightnessTrial>,
}

impl TightnessResult {
    pub fn of(&self, case: ScenarioCase) -> Vec<&TightnessTrial> {
        self.trials.iter().filter(|t| t.case == case).collect()
    }

    pub fn mean_ratio(&self, case: ScenarioCase) -> f64 {
        mean(&self.of(case).iter().map(|t| t.ratio).collect::<Vec<_>>())
    }

    /// Observed failure fraction and the largest fraction consistent with
    /// the per-trial failure probabilities (mean plus three binomial σ).
    pub fn failure_check(&self, case: ScenarioCase) -> (f64, f64) {
        let trials = self.of(case);
        let n = trials.len() as f64;
        let observed = trials.iter().filter(|t| t.failed).count() as f64 / n;
        let probs: Vec<f64> = trials.iter().map(|t| bound_confidence(TIGHTNESS_ALPHA, t.n_q)).collect();
        let p = mean(&probs);
        let var: f64 = probs.iter().map(|q| q * (1.0 - q)).sum::<f64>() / (n * n);
        (observed, p + 3.0 * var.sqrt())
    }

    pub fn report(&self) -> ExperimentReport {
        let per_case: serde_json::Map<String, serde_json::Value> = ScenarioCase::ALL
            .iter()
            .map(|&c| {
                let ratios: Vec<f64> = self.of(c).iter().map(|t| t.ratio).collect();
                let (observed, allowed) = self.failure_check(c);
                (
                    case_label(c),
                    json!({"trials": ratios.len(), "mean_ratio": mean(&ratios), "std_err": std_err(&ratios),
                           "failure_fraction": observed, "allowed_failure_fraction": allowed}),
                )
            })
            .collect();
        let series: Vec<Series> = ScenarioCase::ALL
            .iter()
            .map(|&c| {
                let points = (2..=8)
                    .filter_map(|n| {
                        let xs: Vec<f64> = self.of(c).iter().filter(|t| t.n_q == n).map(|t| t.ratio).collect();
                        (!xs.is_empty()).then(|| (n as f64, mean(&xs)))
                    })
                    .collect();
                Series { label: case_label(c), points }
            })
            .collect();
        ExperimentReport {
            name: Experiment::TubTightness.name(),
            trials_csv: to_csv(&self.trials),
            summary: json!({"schema_version": SUMMARY_SCHEMA_VERSION, "experiment": "tub_tightness", "ratio": per_case}),
            svg: line_chart("Bound over reference time", "targets", "T_UB / T*", &series),
            insufficient: false,
        }
    }
}

/// One tightness trial: random targets in a square, true velocities from
/// the regime, and a confident speed from noisy per-target estimates.
pub fn tightness_trial(case: ScenarioCase, trial: usize, seed: u64) -> TightnessTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_q = rng.gen_range(2..=8);
    let targets: Vec<Point<f64>> =
        (0..n_q).map(|_| [rng.gen_range(0.0..TIGHTNESS_SIDE), rng.gen_range(0.0..TIGHTNESS_SIDE)]).collect();
    let rate = case_rate(case);
    let rate_err = Normal::new(0.0, 0.05).expect("positive std");
    let wind_err = Normal::new(0.0, 0.1).expect("positive std");
    let mut velocities = Vec::with_capacity(n_q);
    let mut filters = Vec::with_capacity(n_q);
    for q in &targets {
        let azimuth = NOMINAL_AZIMUTH + rng.gen_range(-0.3..0.3);
        let speed = rate * spread_factor(NOMINAL_WIND);
        velocities.push([speed * azimuth.sin(), speed * azimuth.cos()]);
        let est_rate = if rate > 0.0 { rate + rate_err.sample(&mut rng) } else { 0.0 };
        let est_wind = NOMINAL_WIND + wind_err.sample(&mut rng);
        let x = state_vector(*q, [q[0] + ALTITUDE, q[1], ALTITUDE], est_rate, est_wind, azimuth);
        let mut fs = FilterState::new(x, &FilterConfig::default()).expect("default gamma");
        fs.cov = fs.cov * 0.0;
        if rate > 0.0 {
            fs.cov[(state::RATE, state::RATE)] = 0.05 * 0.05;
            fs.cov[(state::WIND, state::WIND)] = 0.1 * 0.1;
        }
        filters.push(fs);
    }
    let refs: Vec<&FilterState<f64>> = filters.iter().collect();
    let conf = ConfidenceConfig { alpha: TIGHTNESS_ALPHA, mc_samples: 1024 };
    let zeta = zeta_alpha(&refs, &conf, &mut rng);
    let inputs = BoundInputs {
        path_len: mst_weight(&build_mst(&targets)),
        v_max: TRACKING_V_MAX,
        zeta,
        n_q,
        fov: 2.0 * ALTITUDE * HALF_ANGLE.tan(),
    };
    let t_ub = service_time(case, &inputs, BoundConvention::Combined).or_infinity();
    let t_star = t_star_oracle(targets[0], &targets, &velocities, TRACKING_V_MAX).expect("at most eight targets").or_infinity();
    TightnessTrial { case, trial, n_q, zeta, t_ub, t_star, ratio: t_ub / t_star, failed: t_ub < t_star }
}

pub fn tub_tightness(opts: &ExperimentOptions) -> TightnessResult {
    let trials = opts.seeds_for(Experiment::TubTightness);
    let grid: Vec<(ScenarioCase, usize)> = ScenarioCase::ALL.iter().flat_map(|&c| (0..trials).map(move |t| (c, t))).collect();
    let trials = run_trials(grid.len(), opts.workers, |i| {
        let (case, t) = grid[i];
        tightness_trial(case, t, stream_seed(opts.base_seed, t as u64, &format!("tub_tightness/{}", case.index())))
    });
    TightnessResult { trials }
}

// -------------------------------------------------------------- evolving fire

pub const EVOLVING_STEPS: u64 = 350;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolvingPoint {
    pub seed_index: usize,
    pub time: u64,
    pub alive_spots: usize,
    pub allocated_uavs: usize,
    pub coverage_residual: f64,
    pub measurement_uncertainty: f64,
    pub mean_t_ub: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolvingResult {
    pub points: Vec<EvolvingPoint>,
    pub insufficient: bool,
}

impl EvolvingResult {
    pub fn report(&self) -> ExperimentReport {
        let mut residual = Vec::new();
        let mut uncertainty = Vec::new();
        for t in 1..=EVOLVING_STEPS {
            let at: Vec<&EvolvingPoint> = self.points.iter().filter(|p| p.time == t).collect();
            if at.is_empty() {
                continue;
            }
            residual.push((t as f64, mean(&at.iter().map(|p| p.coverage_residual).collect::<Vec<_>>())));
            uncertainty.push((t as f64, mean(&at.iter().map(|p| p.measurement_uncertainty).collect::<Vec<_>>())));
        }
        let total: Vec<f64> = residual.iter().map(|p| p.1).collect();
        let series = [
            Series { label: "coverage residual".into(), points: residual },
            Series { label: "measurement uncertainty".into(), points: uncertainty },
        ];
        ExperimentReport {
            name: Experiment::EvolvingFire.name(),
            trials_csv: to_csv(&self.points),
            summary: json!({"schema_version": SUMMARY_SCHEMA_VERSION, "experiment": "evolving_fire",
                            "cumulative_residual": total.iter().sum::<f64>(), "mean_residual_per_step": mean(&total),
                            "insufficient": self.insufficient}),
            svg: line_chart("Evolving fire", "step", "per-step value", &series),
            insufficient: self.insufficient,
        }
    }
}

pub fn evolving_config(seed: u64) -> ScenarioConfig {
    let areas = random_areas(2, 500.0, 20.0, [25, 35], true, stream_seed(seed, 0, "areas"));
    let mut cfg = scenario(ScenarioCase::Stationary, 500.0, areas, 5, TRACKING_V_MAX, EVOLVING_STEPS, seed);
    cfg.fire.schedule = vec![
        RegimeChange { at: 50, case: ScenarioCase::Moving, rate: Some(case_rate(ScenarioCase::Moving)) },
        RegimeChange { at: 150, case: ScenarioCase::MovingSpreading, rate: Some(case_rate(ScenarioCase::MovingSpreading)) },
    ];
    cfg
}

pub fn evolving_fire(opts: &ExperimentOptions) -> EvolvingResult {
    let seeds = opts.seeds_for(Experiment::EvolvingFire);
    let runs = run_trials(seeds, opts.workers, |s| {
        let rec = run(&evolving_config(stream_seed(opts.base_seed, s as u64, "evolving_fire")));
        let points: Vec<EvolvingPoint> = rec
            .rows
            .iter()
            .map(|r| EvolvingPoint {
                seed_index: s,
                time: r.time,
                alive_spots: r.alive_spots,
                allocated_uavs: r.allocated_uavs,
                coverage_residual: r.coverage_residual,
                measurement_uncertainty: r.measurement_uncertainty,
                mean_t_ub: r.mean_t_ub,
            })
            .collect();
        (points, rec.insufficient())
    });
    let insufficient = runs.iter().any(|r| r.1);
    EvolvingResult { points: runs.into_iter().flat_map(|r| r.0).collect(), insufficient }
}

// ------------------------------------------------------------------- mismatch

pub const MISMATCH_STEPS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchTrial {
    pub case: ScenarioCase,
    pub seed_index: usize,
    pub lb_scale: f64,
    pub lb_offset: f64,
    pub matched: f64,
    pub mismatched: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchResult {
    pub trials: Vec<MismatchTrial>,
}

impl MismatchResult {
    /// Ratio of seed-mean cumulative uncertainty, mismatched over matched.
    pub fn case_ratio(&self, case: ScenarioCase) -> f64 {
        let of: Vec<&MismatchTrial> = self.trials.iter().filter(|t| t.case == case).collect();
        mean(&of.iter().map(|t| t.mismatched).collect::<Vec<_>>()) / mean(&of.iter().map(|t| t.matched).collect::<Vec<_>>())
    }

    /// Case ratios averaged over the three regimes.
    pub fn ratio(&self) -> f64 {
        mean(&ScenarioCase::ALL.map(|c| self.case_ratio(c)))
    }

    pub fn report(&self) -> ExperimentReport {
        let per_case: serde_json::Map<String, serde_json::Value> =
            ScenarioCase::ALL.iter().map(|&c| (case_label(c), json!(self.case_ratio(c)))).collect();
        let series = vec![Series {
            label: "mismatched / matched".into(),
            points: ScenarioCase::ALL.iter().map(|&c| (c.index() as f64, self.case_ratio(c))).collect(),
        }];
        ExperimentReport {
            name: Experiment::ModelMismatch.name(),
            trials_csv: to_csv(&self.trials),
            summary: json!({"schema_version": SUMMARY_SCHEMA_VERSION, "experiment": "model_mismatch",
                            "ratio": self.ratio(), "case_ratio": per_case}),
            svg: line_chart("Cumulative uncertainty under model mismatch", "case", "ratio", &series),
            insufficient: false,
        }
    }
}

pub fn mismatch_config(case: ScenarioCase, seed: u64, adjust: Option<LbAdjustConfig>) -> ScenarioConfig {
    let areas = random_areas(2, 500.0, 20.0, [25, 35], true, stream_seed(seed, 0, "areas"));
    let mut cfg = scenario(case, 500.0, areas, 30, TRACKING_V_MAX, MISMATCH_STEPS, seed);
    cfg.fire.lb_adjust = adjust;
    cfg
}

/// Draws the affine distortion of the length-to-breadth ratio for a seed.
pub fn mismatch_adjust(seed: u64) -> LbAdjustConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, "mismatch"));
    let scale = Normal::new(10.0, 3.0).expect("positive std").sample(&mut rng);
    let offset = Normal::new(0.0, 3.0).expect("positive std").sample(&mut rng);
    LbAdjustConfig { scale, offset }
}

pub fn model_mismatch(opts: &ExperimentOptions) -> MismatchResult {
    let seeds = opts.seeds_for(Experiment::ModelMismatch);
    let grid: Vec<(ScenarioCase, usize)> = ScenarioCase::ALL.iter().flat_map(|&c| (0..seeds).map(move |s| (c, s))).collect();
    let trials = run_trials(grid.len(), opts.workers, |i| {
        let (case, s) = grid[i];
        let seed = stream_seed(opts.base_seed, s as u64, "model_mismatch");
        let adjust = mismatch_adjust(seed);
        let matched = run(&mismatch_config(case, seed, None)).summary.measurement_uncertainty_after_burn_in;
        let mismatched = run(&mismatch_config(case, seed, Some(adjust))).summary.measurement_uncertainty_after_burn_in;
        MismatchTrial { case, seed_index: s, lb_scale: adjust.scale, lb_offset: adjust.offset, matched, mismatched }
    });
    MismatchResult { trials }
}

/// Runs a named experiment and renders its files.
pub fn run_experiment(e: Experiment, opts: &ExperimentOptions) -> ExperimentReport {
    match e {
        Experiment::UavRequirements => uav_requirements(opts).report(),
        Experiment::CoverageVsN => coverage_vs_n(opts).report(),
        Experiment::TubConvergence => tub_convergence(opts).report(),
        Experiment::TubTightness => tub_tightness(opts).report(),
        Experiment::EvolvingFire => evolving_fire(opts).report(),
        Experiment::ModelMismatch => model_mismatch(opts).report(),
    }
}
