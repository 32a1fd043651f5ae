//! Deterministic scenario driver: ground truth, UAV flight, sensing,
//! filtering, and the two planners, advanced one step at a time.

use std::collections::BTreeMap;

use firetrack_core::coordinator::{Coordinator, PlanRecord, SpotEstimate, UavAgent, UavId, UavStatus};
use firetrack_core::coverage::{coverage_residual, coverage_step, CoverageBoundInputs, CoveragePlan};
use firetrack_core::filter::{measure, state_vector, FilterConfig, FilterState, MappingVector};
use firetrack_core::fire::{EnvNoise, EnvParams, FireScenario, FireWorld, LbAdjust, ScenarioCase, SpotId, Terrain};
use firetrack_core::qos::{classify_case, zeta_alpha, ConfidenceConfig};
use firetrack_core::seed::{derive_seed, stream_seed};
use firetrack_core::tour::{distance, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{ConfigError, ScenarioConfig};

/// Distance at which a UAV counts as having reached a waypoint.
pub const ARRIVAL_RADIUS: f64 = 0.5;

/// Column order of the per-step CSV.
pub const CSV_COLUMNS: [&str; 15] = [
    "time",
    "alive_spots",
    "prioritized_spots",
    "allocated_uavs",
    "unallocated_uavs",
    "subgraphs",
    "t_ub",
    "urr",
    "mean_t_ub",
    "max_urr",
    "needed_uavs",
    "coverage_residual",
    "cumulative_residual",
    "total_uncertainty",
    "measurement_uncertainty",
];

/// One CSV row. List-valued fields hold one entry per subgraph joined by
/// `;`, with `inf` for a pending or infeasible subgraph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub time: u64,
    pub alive_spots: usize,
    pub prioritized_spots: usize,
    pub allocated_uavs: usize,
    pub unallocated_uavs: usize,
    pub subgraphs: usize,
    pub t_ub: String,
    pub urr: String,
    pub mean_t_ub: Option<f64>,
    pub max_urr: Option<f64>,
    pub needed_uavs: usize,
    pub coverage_residual: f64,
    pub cumulative_residual: f64,
    pub total_uncertainty: f64,
    /// Sum of residual-covariance traces over this step's measurements.
    pub measurement_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub steps: u64,
    pub burn_in: u64,
    pub final_alive: usize,
    pub peak_allocated: usize,
    /// Largest `allocated + still needed` over the run.
    pub required_uavs: usize,
    pub insufficient_rounds: usize,
    pub first_insufficient: Option<u64>,
    pub cumulative_residual: f64,
    /// Sum of per-step residuals after the burn-in.
    pub residual_after_burn_in: f64,
    /// Sum of all spots' residual traces after the burn-in.
    pub uncertainty_after_burn_in: f64,
    /// Sum of measurement uncertainty after the burn-in.
    pub measurement_uncertainty_after_burn_in: f64,
    pub final_mean_t_ub: Option<f64>,
}

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub rows: Vec<StepRow>,
    pub plans: Vec<PlanRecord>,
    pub summary: RunSummary,
}

impl MetricsRecord {
    pub fn to_csv(&self) -> Vec<u8> {
        rows_to_csv(&self.rows)
    }

    pub fn insufficient(&self) -> bool {
        self.summary.insufficient_rounds > 0
    }
}

pub fn rows_to_csv(rows: &[StepRow]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RouteOwner {
    Idle,
    Subgraph(u64),
    Coverage(u64),
}

#[derive(Debug, Clone)]
struct Route {
    owner: RouteOwner,
    /// Member spot ids of each waypoint, used to tell a reshaped tour from
    /// one whose nodes merely drifted.
    signature: Vec<Vec<SpotId>>,
    waypoints: Vec<Point<f64>>,
    next: usize,
}

impl Route {
    fn idle() -> Self {
        Self { owner: RouteOwner::Idle, signature: Vec::new(), waypoints: Vec::new(), next: 0 }
    }

    fn retarget(&mut self, owner: RouteOwner, signature: Vec<Vec<SpotId>>, waypoints: Vec<Point<f64>>, here: Point<f64>) {
        if self.owner == owner && self.signature == signature {
            self.waypoints = waypoints;
            return;
        }
        self.next = nearest(&waypoints, here).unwrap_or(0);
        self.owner = owner;
        self.signature = signature;
        self.waypoints = waypoints;
    }
}

fn nearest(points: &[Point<f64>], p: Point<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &q) in points.iter().enumerate() {
        let d = distance(p, q);
        if best.is_none_or(|b| d < b.1) {
            best = Some((i, d));
        }
    }
    best.map(|b| b.0)
}

/// Flies `uav` along `route` for one step with at most `v_max` of travel.
/// Returns every pose at which it reached a waypoint plus its final pose,
/// and whether any waypoint was reached.
fn fly(uav: &mut UavAgent, route: &mut Route) -> (Vec<[f64; 3]>, bool) {
    let mut poses = Vec::new();
    let mut reached = false;
    let mut budget = uav.v_max;
    let n = route.waypoints.len();
    let mut hops = 0;
    while n > 0 && hops <= n {
        let target = route.waypoints[route.next % n];
        let here = uav.planar();
        let d = distance(here, target);
        if d > ARRIVAL_RADIUS && d > budget {
            let s = budget / d;
            uav.pose[0] += (target[0] - here[0]) * s;
            uav.pose[1] += (target[1] - here[1]) * s;
            break;
        }
        if d > ARRIVAL_RADIUS {
            uav.pose[0] = target[0];
            uav.pose[1] = target[1];
            budget -= d;
        }
        reached = true;
        if poses.last() != Some(&uav.pose) {
            poses.push(uav.pose);
        }
        route.next = (route.next + 1) % n;
        hops += 1;
        if budget <= 0.0 {
            break;
        }
    }
    if poses.last() != Some(&uav.pose) {
        poses.push(uav.pose);
    }
    (poses, reached)
}

/// A running scenario.
pub struct Simulation {
    cfg: ScenarioConfig,
    world: FireWorld,
    estimates: BTreeMap<SpotId, SpotEstimate>,
    uavs: Vec<UavAgent>,
    routes: Vec<Route>,
    coordinator: Coordinator,
    coverage: Option<CoveragePlan>,
    filter_cfg: FilterConfig<f64>,
    noise_std: MappingVector<f64>,
    world_rng: ChaCha8Rng,
    sensor_rng: ChaCha8Rng,
    init_rng: ChaCha8Rng,
    cumulative: f64,
    rows: Vec<StepRow>,
    plans: Vec<PlanRecord>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let seed = cfg.sim.seed;
        let terrain = Terrain::new(cfg.terrain.width, cfg.terrain.height).expect("validated terrain");
        let f = &cfg.fire;
        let mut world = FireWorld::new(terrain, fire_scenario(f.case, f.spawn_prob, f.spawn_max));
        if let Some(adj) = f.lb_adjust {
            world = world.with_lb_adjust(LbAdjust { scale: adj.scale, offset: adj.offset });
        }

        let mut layout = ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, "layout"));
        let noise = EnvNoise { spread_rate: f.noise.rate, wind_speed: f.noise.wind, wind_azimuth: f.noise.azimuth };
        for (i, area) in cfg.areas.iter().enumerate() {
            let count = layout.gen_range(area.n_spots[0]..=area.n_spots[1]);
            for _ in 0..count {
                let r = area.radius * layout.gen::<f64>().sqrt();
                let a = layout.gen_range(0.0..std::f64::consts::TAU);
                let (pos, _) = terrain.clamp([area.center[0] + r * a.cos(), area.center[1] + r * a.sin()]);
                let jitter = if f.azimuth_spread > 0.0 { layout.gen_range(-f.azimuth_spread..=f.azimuth_spread) } else { 0.0 };
                let env = EnvParams::new(f.rate, f.wind, f.azimuth + jitter).with_noise(noise);
                world.add_spot(pos, i, env).expect("clamped onto terrain");
            }
        }

        let u = &cfg.uavs;
        let uavs: Vec<UavAgent> = (0..u.count)
            .map(|i| {
                let (p, _) = terrain.clamp([u.base[0] + i as f64, u.base[1]]);
                UavAgent::new(i, [p[0], p[1], u.altitude], u.v_max, u.half_angle).expect("validated UAV settings")
            })
            .collect();

        let planner = cfg.planner.planner_config(derive_seed(seed, &[0x91]));
        let mut coordinator = Coordinator::new(planner);
        if !cfg.planner.arrival_gate {
            coordinator = coordinator.without_arrival_gate();
        }
        let m = u.measurement_noise;
        let noise_std = MappingVector::from_column_slice(&[m.angle, m.angle, m.rate, m.wind, m.azimuth]);
        let filter_cfg = FilterConfig { gamma_step: cfg.planner.gamma_step, ..FilterConfig::default() };

        let mut sim = Self {
            routes: vec![Route::idle(); uavs.len()],
            uavs,
            world,
            estimates: BTreeMap::new(),
            coordinator,
            coverage: None,
            filter_cfg,
            noise_std,
            world_rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, "world")),
            sensor_rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, "sensor")),
            init_rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, "filter-init")),
            cumulative: 0.0,
            rows: Vec::new(),
            plans: Vec::new(),
            cfg,
        };
        let ids: Vec<SpotId> = sim.world.alive().map(|s| s.id).collect();
        for id in ids {
            sim.spawn_filter(id);
        }
        Ok(sim)
    }

    pub fn world(&self) -> &FireWorld {
        &self.world
    }

    pub fn uavs(&self) -> &[UavAgent] {
        &self.uavs
    }

    pub fn estimates(&self) -> &BTreeMap<SpotId, SpotEstimate> {
        &self.estimates
    }

    pub fn rows(&self) -> &[StepRow] {
        &self.rows
    }

    /// New filter seeded near the truth: position off by unit-variance
    /// noise, parameters off by one reading's worth of sensor noise.
    fn spawn_filter(&mut self, id: SpotId) {
        let spot = self.world.spot(id).pos;
        let env = *self.world.env(id);
        let rng = &mut self.init_rng;
        let mut n = |std: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        };
        let q = [spot[0] + n(1.0), spot[1] + n(1.0)];
        let rate = (env.spread_rate + n(self.noise_std[2])).max(0.0);
        let wind = (env.wind_speed + n(self.noise_std[3])).max(0.0);
        let azimuth = env.wind_azimuth + n(self.noise_std[4]);
        let alt = self.cfg.uavs.altitude;
        let x = state_vector(q, [q[0] + alt, q[1], alt], rate, wind, azimuth);
        let filter = FilterState::new(x, &self.filter_cfg).expect("validated gamma step");
        self.estimates.insert(id, SpotEstimate { id, filter });
    }

    fn apply_schedule(&mut self, t: u64) {
        let changes: Vec<_> = self.cfg.fire.schedule.iter().filter(|r| r.at == t).copied().collect();
        for change in changes {
            let f = &self.cfg.fire;
            self.world.set_scenario(fire_scenario(change.case, f.spawn_prob, f.spawn_max));
            if let Some(rate) = change.rate {
                let ids: Vec<SpotId> = self.world.spots().iter().map(|s| s.id).collect();
                for id in ids {
                    self.world.env_mut(id).spread_rate = rate;
                }
            }
        }
    }

    fn is_prioritized(&self, id: SpotId) -> bool {
        self.cfg.areas[self.world.spot(id).area].prioritized
    }

    /// Advances the scenario by one step and records its row.
    pub fn step(&mut self) -> &StepRow {
        let t0 = self.world.time();
        self.apply_schedule(t0);
        let events = self.world.step(&mut self.world_rng);
        let t = self.world.time();
        for id in &events.pruned {
            self.estimates.remove(id);
        }
        for &id in &events.spawned {
            self.spawn_filter(id);
        }
        for e in self.estimates.values_mut() {
            e.filter.predict(1.0);
        }

        let mut poses = Vec::new();
        for (uav, route) in self.uavs.iter_mut().zip(&mut self.routes) {
            let (visited, reached) = fly(uav, route);
            if let (UavStatus::InTransit(s), RouteOwner::Subgraph(r)) = (uav.status, route.owner) {
                if reached && s == r {
                    uav.status = UavStatus::Allocated(s);
                }
            }
            poses.extend(visited);
        }
        let measurement_uncertainty = self.sense(&poses);

        let radius = self.cfg.fov() / 2.0;
        let footprints: Vec<Point<f64>> = poses.iter().map(|p| [p[0], p[1]]).collect();
        let truth: Vec<(SpotId, Point<f64>)> = self.world.alive().map(|s| (s.id, s.pos)).collect();
        let residual = coverage_residual(&truth, &footprints, radius, &self.estimates);
        self.cumulative += residual;
        let total_uncertainty: f64 = self.estimates.values().map(|e| e.filter.residual_covariance().trace()).sum();

        let prioritized: Vec<SpotId> = self.estimates.keys().copied().filter(|&id| self.is_prioritized(id)).collect();
        let record = self.coordinator.plan_round(t, &self.estimates, &prioritized, &mut self.uavs);
        self.route_allocated();
        self.plan_coverage(t);

        let t_ubs: Vec<f64> = record.t_ub.iter().flatten().copied().collect();
        let row = StepRow {
            time: t,
            alive_spots: self.estimates.len(),
            prioritized_spots: prioritized.len(),
            allocated_uavs: self.uavs.iter().filter(|u| !u.is_free()).count(),
            unallocated_uavs: self.uavs.iter().filter(|u| u.is_free()).count(),
            subgraphs: record.subgraphs,
            t_ub: join(&record.t_ub),
            urr: join(&record.urr),
            mean_t_ub: (!t_ubs.is_empty()).then(|| t_ubs.iter().sum::<f64>() / t_ubs.len() as f64),
            max_urr: record.urr.iter().flatten().copied().reduce(f64::max),
            needed_uavs: record.insufficient.unwrap_or(0),
            coverage_residual: residual,
            cumulative_residual: self.cumulative,
            total_uncertainty,
            measurement_uncertainty,
        };
        if let Some(n) = record.insufficient {
            log::info!("t={t}: UAV pool exhausted, {n} more needed");
        }
        self.plans.push(record);
        self.rows.push(row);
        self.rows.last().expect("just pushed")
    }

    /// Updates every spot within some footprint, observed from the nearest pose.
    fn sense(&mut self, poses: &[[f64; 3]]) -> f64 {
        let mut total = 0.0;
        let radius = self.cfg.fov() / 2.0;
        for (&id, e) in self.estimates.iter_mut() {
            let spot = self.world.spot(id).pos;
            let mut best: Option<([f64; 3], f64)> = None;
            for p in poses {
                let d = distance([p[0], p[1]], spot);
                if d <= radius && best.is_none_or(|b| d < b.1) {
                    best = Some((*p, d));
                }
            }
            let Some((pose, _)) = best else { continue };
            let env = self.world.env(id);
            let z = measure(pose, spot, [env.spread_rate, env.wind_speed, env.wind_azimuth], &self.noise_std, &mut self.sensor_rng);
            e.filter.set_observer(pose);
            match e.filter.update(&z) {
                Ok(_) => total += e.filter.residual.trace(),
                Err(err) => log::warn!("filter for spot {id} rejected a measurement: {err}"),
            }
        }
        total
    }

    fn route_allocated(&mut self) {
        for a in self.coordinator.assignments() {
            let signature = a.graph.cycle.iter().map(|&i| a.graph.nodes[i].members.iter().map(|&k| a.members[k]).collect()).collect();
            let here = self.uavs[a.uav].planar();
            self.routes[a.uav].retarget(RouteOwner::Subgraph(a.subgraph), signature, a.waypoints(), here);
        }
    }

    fn plan_coverage(&mut self, t: u64) {
        let free: Vec<&UavAgent> = self.uavs.iter().filter(|u| u.is_free()).collect();
        let ids: Vec<UavId> = free.iter().map(|u| u.id).collect();
        let spots: Vec<(SpotId, Point<f64>)> =
            self.estimates.iter().filter(|(&id, _)| !self.is_prioritized(id)).map(|(&id, e)| (id, e.position())).collect();
        let stale = self.coverage.as_ref().is_none_or(|p| p.is_stale(t, &ids));
        let bound = if stale && !spots.is_empty() {
            let filters: Vec<&FilterState<f64>> = spots.iter().map(|(id, _)| &self.estimates[id].filter).collect();
            let counts: Vec<usize> = self.rows.iter().map(|r| r.alive_spots - r.prioritized_spots).chain([spots.len()]).collect();
            let case = classify_case(&filters, &counts, &self.cfg.planner.classify_config());
            let conf = ConfidenceConfig { alpha: self.cfg.planner.alpha, mc_samples: self.cfg.planner.mc_samples };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.sim.seed, &[0xC5, t]));
            CoverageBoundInputs { case, zeta: zeta_alpha(&filters, &conf, &mut rng) }
        } else {
            CoverageBoundInputs { case: ScenarioCase::Stationary, zeta: 0.0 }
        };
        let cfg = self.cfg.planner.coverage_config(derive_seed(self.cfg.sim.seed, &[0xC6]));
        let step = coverage_step(self.coverage.take(), t, &spots, &free, bound, &cfg);
        for part in &step.plan.parts {
            let g = &part.graph;
            let signature = g.cycle.iter().map(|&i| g.nodes[i].members.iter().map(|&k| part.members[k]).collect()).collect();
            let here = self.uavs[part.uav].planar();
            self.routes[part.uav].retarget(RouteOwner::Coverage(step.plan.epoch), signature, g.waypoints(), here);
        }
        for u in &self.uavs {
            let owned = match self.routes[u.id].owner {
                RouteOwner::Subgraph(s) => u.subgraph() == Some(s),
                RouteOwner::Coverage(_) => u.is_free() && step.plan.part_for(u.id).is_some(),
                RouteOwner::Idle => true,
            };
            if !owned {
                self.routes[u.id] = Route::idle();
            }
        }
        self.coverage = Some(step.plan);
    }

    /// Runs the configured number of steps and summarizes.
    pub fn run(mut self) -> MetricsRecord {
        for _ in 0..self.cfg.sim.steps {
            self.step();
        }
        self.finish()
    }

    pub fn finish(self) -> MetricsRecord {
        let burn = self.cfg.sim.burn_in;
        let after: Vec<&StepRow> = self.rows.iter().filter(|r| r.time > burn).collect();
        let summary = RunSummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            seed: self.cfg.sim.seed,
            steps: self.cfg.sim.steps,
            burn_in: burn,
            final_alive: self.rows.last().map_or(self.estimates.len(), |r| r.alive_spots),
            peak_allocated: self.rows.iter().map(|r| r.allocated_uavs).max().unwrap_or(0),
            required_uavs: self.rows.iter().map(|r| r.allocated_uavs + r.needed_uavs).max().unwrap_or(0),
            insufficient_rounds: self.rows.iter().filter(|r| r.needed_uavs > 0).count(),
            first_insufficient: self.rows.iter().find(|r| r.needed_uavs > 0).map(|r| r.time),
            cumulative_residual: self.cumulative,
            residual_after_burn_in: after.iter().map(|r| r.coverage_residual).sum(),
            uncertainty_after_burn_in: after.iter().map(|r| r.total_uncertainty).sum(),
            measurement_uncertainty_after_burn_in: after.iter().map(|r| r.measurement_uncertainty).sum(),
            final_mean_t_ub: self.rows.last().and_then(|r| r.mean_t_ub),
        };
        MetricsRecord { rows: self.rows, plans: self.plans, summary }
    }
}

fn fire_scenario(case: ScenarioCase, spawn_prob: f64, spawn_max: u32) -> FireScenario {
    let prob = if case == ScenarioCase::MovingSpreading { spawn_prob } else { 0.0 };
    FireScenario::new(case, prob, spawn_max).expect("validated spawn rule")
}

fn join(values: &[Option<f64>]) -> String {
    values.iter().map(|v| v.map_or_else(|| "inf".to_string(), |x| x.to_string())).collect::<Vec<_>>().join(";")
}

/// Builds and runs a scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsRecord, ConfigError> {
    Ok(Simulation::new(cfg.clone())?.run())
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation").field("time", &self.world.time()).field("uavs", &self.uavs.len()).finish()
    }
}
