//! Ground-truth fire propagation: the simplified FARSITE spread model, spot
//! kinematics, spawning and burnt-area pruning.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, wrap_angle, Scalar};

/// Length-to-breadth ratio of the fire ellipse for wind speed `wind`.
pub fn lb_coefficient<T: Scalar>(wind: T) -> T {
    lit::<T>(0.936) * (lit::<T>(0.256) * wind).exp() + lit::<T>(0.461) * (lit::<T>(-0.154) * wind).exp()
        - lit::<T>(0.397)
}

/// Derivative of [`lb_coefficient`] with respect to wind speed.
pub fn lb_slope<T: Scalar>(wind: T) -> T {
    lit::<T>(0.936 * 0.256) * (lit::<T>(0.256) * wind).exp()
        - lit::<T>(0.461 * 0.154) * (lit::<T>(-0.154) * wind).exp()
}

/// Head-to-back ratio term `LB² − 1`, clamped at zero.
pub fn gb_coefficient<T: Scalar>(lb: T) -> T {
    (lb * lb - T::one()).max(T::zero())
}

/// Affine distortion `scale·LB + offset` applied to the ground-truth model only.
///
/// The identity adjustment reproduces the nominal model used by the filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbAdjust<T> {
    pub scale: T,
    pub offset: T,
}

impl<T: Scalar> LbAdjust<T> {
    pub fn identity() -> Self {
        Self { scale: T::one(), offset: T::zero() }
    }

    pub fn apply(&self, lb: T) -> T {
        self.scale * lb + self.offset
    }
}

impl<T: Scalar> Default for LbAdjust<T> {
    fn default() -> Self {
        Self::identity()
    }
}

fn factor_from_lb<T: Scalar>(lb: T) -> T {
    let denom = lb + gb_coefficient(lb).sqrt();
    if denom <= T::zero() {
        return T::zero();
    }
    T::one() - lb / denom
}

/// Dimensionless factor `1 − LB/(LB + √GB)` so that speed = rate × factor.
pub fn spread_factor<T: Scalar>(wind: T) -> T {
    factor_from_lb(lb_coefficient(wind))
}

/// Spread factor under a distorted length-to-breadth ratio.
pub fn spread_factor_adjusted<T: Scalar>(wind: T, adjust: &LbAdjust<T>) -> T {
    factor_from_lb(adjust.apply(lb_coefficient(wind)))
}

/// Scalar firefront speed `C(R, U)` in grid units per step.
pub fn spread_speed<T: Scalar>(rate: T, wind: T) -> T {
    rate * spread_factor(wind)
}

/// Floor on `√GB` used when differentiating the spread factor near calm wind.
pub const GB_ROOT_FLOOR: f64 = 1e-3;

/// Derivative of [`spread_factor`] with respect to wind speed.
///
/// Uses `d/dU [1 − LB/(LB+√GB)] = LB'/(√GB·(LB+√GB)²)`. Where `GB` is
/// clamped to zero the factor is identically zero and the slope is zero.
pub fn spread_factor_slope<T: Scalar>(wind: T) -> T {
    let lb = lb_coefficient(wind);
    if lb * lb - T::one() <= T::zero() {
        return T::zero();
    }
    let root = gb_coefficient(lb).sqrt().max(lit(GB_ROOT_FLOOR));
    let sum = lb + root;
    lb_slope(wind) / (root * sum * sum)
}

/// Standard deviations of the per-step Gaussian random walk on the
/// environment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvNoise<T> {
    pub spread_rate: T,
    pub wind_speed: T,
    pub wind_azimuth: T,
}

/// Fuel spread rate, mid-flame wind speed and wind azimuth driving one spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams<T> {
    pub spread_rate: T,
    pub wind_speed: T,
    pub wind_azimuth: T,
    pub noise: EnvNoise<T>,
}

impl<T: Scalar> EnvParams<T> {
    pub fn new(spread_rate: T, wind_speed: T, wind_azimuth: T) -> Self {
        Self {
            spread_rate: spread_rate.max(T::zero()),
            wind_speed: wind_speed.max(T::zero()),
            wind_azimuth: wrap_angle(wind_azimuth),
            noise: EnvNoise { spread_rate: T::zero(), wind_speed: T::zero(), wind_azimuth: T::zero() },
        }
    }

    pub fn with_noise(mut self, noise: EnvNoise<T>) -> Self {
        self.noise = noise;
        self
    }

    pub fn speed(&self) -> T {
        spread_speed(self.spread_rate, self.wind_speed)
    }

    /// Planar velocity `C·[sin θ, cos θ]`; azimuth is measured from the +y axis.
    pub fn velocity(&self) -> [T; 2] {
        velocity_from(self.speed(), self.wind_azimuth)
    }
}

fn velocity_from<T: Scalar>(speed: T, azimuth: T) -> [T; 2] {
    [speed * azimuth.sin(), speed * azimuth.cos()]
}

/// Advances one spot position by `dt` under the given environment.
pub fn step_spot<T: Scalar>(q: [T; 2], env: &EnvParams<T>, dt: T) -> [T; 2] {
    let v = env.velocity();
    [q[0] + v[0] * dt, q[1] + v[1] * dt]
}

/// The three fire regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioCase {
    Stationary,
    Moving,
    MovingSpreading,
}

impl ScenarioCase {
    pub const ALL: [ScenarioCase; 3] = [ScenarioCase::Stationary, ScenarioCase::Moving, ScenarioCase::MovingSpreading];

    /// 1-based severity index.
    pub fn index(self) -> usize {
        match self {
            ScenarioCase::Stationary => 1,
            ScenarioCase::Moving => 2,
            ScenarioCase::MovingSpreading => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            1 => Some(ScenarioCase::Stationary),
            2 => Some(ScenarioCase::Moving),
            3 => Some(ScenarioCase::MovingSpreading),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FireError {
    #[error("spawn probability {0} outside [0, 1]")]
    SpawnProbability(f64),
    #[error("{0:?} fires cannot spawn children")]
    SpawnInStaticCase(ScenarioCase),
    #[error("terrain dimensions must be positive, got {0}x{1}")]
    Terrain(f64, f64),
    #[error("position ({0}, {1}) outside terrain")]
    OutsideTerrain(f64, f64),
}

/// Fire regime together with its spawning rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireScenario {
    case: ScenarioCase,
    spawn_prob: f64,
    spawn_max: u32,
}

impl FireScenario {
    pub fn new(case: ScenarioCase, spawn_prob: f64, spawn_max: u32) -> Result<Self, FireError> {
        if !(0.0..=1.0).contains(&spawn_prob) {
            return Err(FireError::SpawnProbability(spawn_prob));
        }
        if case != ScenarioCase::MovingSpreading && spawn_prob > 0.0 && spawn_max > 0 {
            return Err(FireError::SpawnInStaticCase(case));
        }
        Ok(Self { case, spawn_prob, spawn_max })
    }

    pub fn stationary() -> Self {
        Self { case: ScenarioCase::Stationary, spawn_prob: 0.0, spawn_max: 0 }
    }

    pub fn moving() -> Self {
        Self { case: ScenarioCase::Moving, spawn_prob: 0.0, spawn_max: 0 }
    }

    pub fn case(&self) -> ScenarioCase {
        self.case
    }

    pub fn spawn_prob(&self) -> f64 {
        self.spawn_prob
    }

    pub fn spawn_max(&self) -> u32 {
        self.spawn_max
    }
}

pub type SpotId = usize;

/// Ground-truth firespot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FireSpot {
    pub id: SpotId,
    pub pos: [f64; 2],
    pub alive: bool,
    pub born_at: u64,
    /// Index of the fire area the spot (or its ancestor) started in.
    pub area: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub width: f64,
    pub height: f64,
}

impl Terrain {
    pub fn new(width: f64, height: f64) -> Result<Self, FireError> {
        if !(width > 0.0 && height > 0.0) {
            return Err(FireError::Terrain(width, height));
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0.0..=self.width).contains(&p[0]) && (0.0..=self.height).contains(&p[1])
    }

    /// Clamps a point onto the terrain; the flag reports whether it moved.
    pub fn clamp(&self, p: [f64; 2]) -> ([f64; 2], bool) {
        let c = [p[0].clamp(0.0, self.width), p[1].clamp(0.0, self.height)];
        (c, c != p)
    }
}

/// Unit-resolution grid of burnt cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BurntRaster {
    cols: usize,
    rows: usize,
    cells: Vec<bool>,
}

impl BurntRaster {
    pub fn new(terrain: &Terrain) -> Self {
        let cols = terrain.width.ceil().max(1.0) as usize;
        let rows = terrain.height.ceil().max(1.0) as usize;
        Self { cols, rows, cells: vec![false; cols * rows] }
    }

    pub fn cell(&self, p: [f64; 2]) -> usize {
        let cx = (p[0].floor().max(0.0) as usize).min(self.cols - 1);
        let cy = (p[1].floor().max(0.0) as usize).min(self.rows - 1);
        cy * self.cols + cx
    }

    pub fn is_burnt(&self, cell: usize) -> bool {
        self.cells[cell]
    }

    pub fn mark(&mut self, cell: usize) {
        self.cells[cell] = true;
    }

    pub fn burnt_count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

/// What happened during one world step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    pub spawned: Vec<SpotId>,
    pub pruned: Vec<SpotId>,
    pub clamped: usize,
}

/// Ground-truth fire state advanced one step at a time.
#[derive(Debug, Clone)]
pub struct FireWorld {
    terrain: Terrain,
    scenario: FireScenario,
    adjust: LbAdjust<f64>,
    spots: Vec<FireSpot>,
    env: Vec<EnvParams<f64>>,
    raster: BurntRaster,
    time: u64,
}

impl FireWorld {
    pub fn new(terrain: Terrain, scenario: FireScenario) -> Self {
        Self {
            raster: BurntRaster::new(&terrain),
            terrain,
            scenario,
            adjust: LbAdjust::identity(),
            spots: Vec::new(),
            env: Vec::new(),
            time: 0,
        }
    }

    /// Distorts the ground-truth spread model; filters keep the nominal one.
    pub fn with_lb_adjust(mut self, adjust: LbAdjust<f64>) -> Self {
        self.adjust = adjust;
        self
    }

    pub fn add_spot(&mut self, pos: [f64; 2], area: usize, env: EnvParams<f64>) -> Result<SpotId, FireError> {
        if !self.terrain.contains(pos) {
            return Err(FireError::OutsideTerrain(pos[0], pos[1]));
        }
        let id = self.spots.len();
        self.spots.push(FireSpot { id, pos, alive: true, born_at: self.time, area });
        self.env.push(env);
        let cell = self.raster.cell(pos);
        self.raster.mark(cell);
        Ok(id)
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    pub fn scenario(&self) -> &FireScenario {
        &self.scenario
    }

    pub fn set_scenario(&mut self, scenario: FireScenario) {
        self.scenario = scenario;
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn spots(&self) -> &[FireSpot] {
        &self.spots
    }

    pub fn spot(&self, id: SpotId) -> &FireSpot {
        &self.spots[id]
    }

    pub fn env(&self, id: SpotId) -> &EnvParams<f64> {
        &self.env[id]
    }

    pub fn env_mut(&mut self, id: SpotId) -> &mut EnvParams<f64> {
        &mut self.env[id]
    }

    pub fn raster(&self) -> &BurntRaster {
        &self.raster
    }

    pub fn alive(&self) -> impl Iterator<Item = &FireSpot> {
        self.spots.iter().filter(|s| s.alive)
    }

    pub fn alive_count(&self) -> usize {
        self.alive().count()
    }

    /// True speed of a spot, including any ground-truth model distortion.
    pub fn true_speed(&self, id: SpotId) -> f64 {
        let e = &self.env[id];
        e.spread_rate * spread_factor_adjusted(e.wind_speed, &self.adjust)
    }

    /// True planar velocity of a spot (zero in the stationary regime).
    pub fn true_velocity(&self, id: SpotId) -> [f64; 2] {
        if self.scenario.case == ScenarioCase::Stationary {
            return [0.0, 0.0];
        }
        velocity_from(self.true_speed(id), self.env[id].wind_azimuth)
    }

    /// Advances the world by one unit step.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepEvents {
        let mut events = StepEvents::default();
        let case = self.scenario.case;
        let spawning = case == ScenarioCase::MovingSpreading && self.scenario.spawn_prob > 0.0 && self.scenario.spawn_max > 0;
        let spawn = if spawning {
            Some(Binomial::new(self.scenario.spawn_max as u64, self.scenario.spawn_prob).expect("validated spawn rule"))
        } else {
            None
        };
        let existing = self.spots.len();
        for id in 0..existing {
            if !self.spots[id].alive {
                continue;
            }
            drift_env(&mut self.env[id], rng);
            if case == ScenarioCase::Stationary {
                continue;
            }
            let before = self.raster.cell(self.spots[id].pos);
            let v = self.true_velocity(id);
            let p = self.spots[id].pos;
            let (moved, clamped) = self.terrain.clamp([p[0] + v[0], p[1] + v[1]]);
            if clamped {
                events.clamped += 1;
                let on_edge = p[0] <= 0.0 || p[1] <= 0.0 || p[0] >= self.terrain.width || p[1] >= self.terrain.height;
                if on_edge {
                    log::debug!("spot {id} held on the terrain boundary at ({:.3}, {:.3})", moved[0], moved[1]);
                } else {
                    log::warn!("spot {id} left the terrain and was clamped to ({:.3}, {:.3})", moved[0], moved[1]);
                }
            }
            self.spots[id].pos = moved;
            let after = self.raster.cell(moved);
            if case == ScenarioCase::MovingSpreading && after != before && self.raster.is_burnt(after) {
                self.spots[id].alive = false;
                events.pruned.push(id);
                continue;
            }
            self.raster.mark(after);
            if let Some(dist) = &spawn {
                let children = dist.sample(rng);
                for _ in 0..children {
                    let r = rng.gen_range(0.5..1.5);
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    let (pos, clamped) = self.terrain.clamp([moved[0] + r * a.cos(), moved[1] + r * a.sin()]);
                    if clamped {
                        events.clamped += 1;
                        log::warn!("spawned child of spot {id} clamped onto terrain boundary");
                    }
                    let child = self.spots.len();
                    self.spots.push(FireSpot { id: child, pos, alive: true, born_at: self.time + 1, area: self.spots[id].area });
                    self.env.push(self.env[id]);
                    let cell = self.raster.cell(pos);
                    self.raster.mark(cell);
                    events.spawned.push(child);
                }
            }
        }
        self.time += 1;
        events
    }
}

fn drift_env<R: Rng + ?Sized>(env: &mut EnvParams<f64>, rng: &mut R) {
    let n = env.noise;
    if n.spread_rate > 0.0 {
        env.spread_rate = (env.spread_rate + Normal::new(0.0, n.spread_rate).unwrap().sample(rng)).max(0.0);
    }
    if n.wind_speed > 0.0 {
        env.wind_speed = (env.wind_speed + Normal::new(0.0, n.wind_speed).unwrap().sample(rng)).max(0.0);
    }
    if n.wind_azimuth > 0.0 {
        env.wind_azimuth = wrap_angle(env.wind_azimuth + Normal::new(0.0, n.wind_azimuth).unwrap().sample(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn calm_wind_has_zero_speed() {
        assert_eq!(lb_coefficient(0.0f64), 1.0);
        assert_eq!(spread_speed(1.0f64, 0.0), 0.0);
        assert_eq!(spread_speed(0.0f64, 5.0), 0.0);
    }

    #[test]
    fn speed_matches_high_precision_reference() {
        // 40-digit evaluations of the spread formula.
        let cases = [
            (1.0, 5.0, 0.4870121540712230742927176909193954379343),
            (1.0, 1.0, 0.3590875985002023437955731229029770750787),
            (2.5, 0.3, 0.5998950841649406235117380581972073196392),
        ];
        for (r, u, want) in cases {
            let got: f64 = spread_speed(r, u);
            assert!(((got - want) / want).abs() < 1e-12, "C({r},{u}) = {got}, want {want}");
        }
        let single = spread_speed(1.0f32, 5.0f32);
        assert!((single as f64 - 0.48701215).abs() < 1e-5);
    }

    #[test]
    fn slope_matches_finite_difference() {
        for &u in &[0.2f64, 1.0, 3.0, 8.0] {
            let h = 1e-6;
            let fd = (spread_factor(u + h) - spread_factor(u - h)) / (2.0 * h);
            let an = spread_factor_slope(u);
            assert!(((fd - an) / an).abs() < 1e-6, "u={u}: {fd} vs {an}");
        }
        assert_eq!(spread_factor_slope(0.0f64), 0.0);
    }

    #[test]
    fn spot_step_examples() {
        let calm = EnvParams::new(3.0, 0.0, 1.0);
        assert_eq!(step_spot([4.0, 5.0], &calm, 1.0), [4.0, 5.0]);
        let north = EnvParams::new(1.0, 5.0, 0.0);
        let q = step_spot([0.0, 0.0], &north, 1.0);
        assert_eq!(q[0], 0.0);
        assert!((q[1] - spread_speed(1.0f64, 5.0)).abs() < 1e-15);
        let r = 2.0 / spread_factor(5.0);
        let east = EnvParams::new(r, 5.0, std::f64::consts::FRAC_PI_2);
        let q = step_spot([0.0, 0.0], &east, 1.0);
        assert!((q[0] - 2.0).abs() < 1e-12 && q[1].abs() < 1e-12);
    }

    #[test]
    fn adjusted_identity_is_nominal() {
        let id = LbAdjust::identity();
        for &u in &[0.0, 0.5, 4.0] {
            assert_eq!(spread_factor_adjusted(u, &id), spread_factor(u));
        }
        let bent = LbAdjust { scale: 10.0, offset: 0.0 };
        assert!(spread_factor_adjusted(1.0, &bent) > spread_factor(1.0));
    }

    #[test]
    fn scenario_validation() {
        assert!(FireScenario::new(ScenarioCase::Moving, 0.5, 3).is_err());
        assert!(FireScenario::new(ScenarioCase::MovingSpreading, 1.5, 3).is_err());
        assert!(FireScenario::new(ScenarioCase::MovingSpreading, 0.2, 3).is_ok());
        assert!(FireScenario::new(ScenarioCase::Stationary, 0.0, 3).is_ok());
    }

    fn world(case: FireScenario) -> FireWorld {
        let mut w = FireWorld::new(Terrain::new(100.0, 100.0).unwrap(), case);
        w.add_spot([50.5, 50.5], 0, EnvParams::new(1.0, 5.0, 0.7)).unwrap();
        w.add_spot([20.5, 70.5], 0, EnvParams::new(2.0, 1.0, 3.7)).unwrap();
        w
    }

    #[test]
    fn stationary_world_does_not_move() {
        let mut w = world(FireScenario::stationary());
        let before: Vec<_> = w.spots().iter().map(|s| s.pos).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            w.step(&mut rng);
        }
        let after: Vec<_> = w.spots().iter().map(|s| s.pos).collect();
        assert_eq!(before, after);
        assert_eq!(w.alive_count(), 2);
    }

    #[test]
    fn moving_world_keeps_count() {
        let mut w = world(FireScenario::moving());
        let before: Vec<_> = w.spots().iter().map(|s| s.pos).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        w.step(&mut rng);
        assert_eq!(w.alive_count(), 2);
        for (b, s) in before.iter().zip(w.spots()) {
            assert_ne!(*b, s.pos);
        }
    }

    #[test]
    fn certain_spawn_yields_four_spots() {
        let scenario = FireScenario::new(ScenarioCase::MovingSpreading, 1.0, 3).unwrap();
        let mut w = FireWorld::new(Terrain::new(100.0, 100.0).unwrap(), scenario);
        w.add_spot([50.5, 50.5], 0, EnvParams::new(1.0, 5.0, 0.7)).unwrap();
        let ev = w.step(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(ev.spawned.len(), 3);
        assert_eq!(w.alive_count(), 4);
    }

    #[test]
    fn entering_burnt_cell_prunes() {
        let scenario = FireScenario::new(ScenarioCase::MovingSpreading, 0.0, 0).unwrap();
        let mut w = FireWorld::new(Terrain::new(10.0, 10.0).unwrap(), scenario);
        let r = 1.0 / spread_factor(5.0);
        // The trailing spot walks into the leader's starting cell.
        w.add_spot([5.5, 5.5], 0, EnvParams::new(r, 5.0, 0.0)).unwrap();
        w.add_spot([5.5, 4.5], 0, EnvParams::new(r, 5.0, 0.0)).unwrap();
        let ev = w.step(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(ev.pruned, vec![1]);
        assert_eq!(w.alive_count(), 1);
    }

    #[test]
    fn leaving_terrain_clamps() {
        let mut w = FireWorld::new(Terrain::new(10.0, 10.0).unwrap(), FireScenario::moving());
        let r = 3.0 / spread_factor(5.0);
        w.add_spot([9.0, 5.0], 0, EnvParams::new(r, 5.0, std::f64::consts::FRAC_PI_2)).unwrap();
        let ev = w.step(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(ev.clamped, 1);
        assert!((w.spot(0).pos[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn outside_spot_rejected() {
        let mut w = FireWorld::new(Terrain::new(10.0, 10.0).unwrap(), FireScenario::moving());
        assert!(w.add_spot([11.0, 5.0], 0, EnvParams::new(1.0, 1.0, 0.0)).is_err());
    }
}
