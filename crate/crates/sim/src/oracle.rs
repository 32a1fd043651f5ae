//! Exhaustive reference service time for a handful of moving targets.

use firetrack_core::qos::Bound;
use firetrack_core::tour::{distance, Point};

/// Largest target count the exhaustive search accepts.
pub const MAX_TARGETS: usize = 8;
pub const INTERCEPT_TOL: f64 = 1e-9;
pub const INTERCEPT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{0} targets exceed the exhaustive-search limit of {MAX_TARGETS}")]
    TooManyTargets(usize),
    #[error("{0} positions but {1} velocities")]
    LengthMismatch(usize, usize),
}

fn at(start: Point<f64>, vel: [f64; 2], t: f64) -> Point<f64> {
    [start[0] + vel[0] * t, start[1] + vel[1] * t]
}

/// Earliest time at which a UAV leaving `from` at time `t0` with speed `v`
/// meets a target that was at `start` at time 0 and moves with `vel`.
/// Iterates on the target's future position until it moves less than
/// [`INTERCEPT_TOL`]; `None` if that takes more than [`INTERCEPT_MAX_ITERS`].
pub fn intercept_time(from: Point<f64>, t0: f64, start: Point<f64>, vel: [f64; 2], v: f64) -> Option<f64> {
    let mut tau = distance(from, at(start, vel, t0)) / v;
    let mut aim = at(start, vel, t0 + tau);
    for _ in 0..INTERCEPT_MAX_ITERS {
        let next_tau = distance(from, aim) / v;
        let next_aim = at(start, vel, t0 + next_tau);
        let moved = distance(aim, next_aim);
        tau = next_tau;
        aim = next_aim;
        if moved < INTERCEPT_TOL {
            return Some(t0 + tau);
        }
    }
    None
}

struct Search<'a> {
    targets: &'a [Point<f64>],
    velocities: &'a [[f64; 2]],
    v: f64,
    best: f64,
    visited: Vec<bool>,
}

impl Search<'_> {
    fn descend(&mut self, first: usize, here: Point<f64>, t: f64, remaining: usize) {
        if t >= self.best {
            return;
        }
        if remaining == 0 {
            if let Some(done) = intercept_time(here, t, self.targets[first], self.velocities[first], self.v) {
                self.best = self.best.min(done);
            }
            return;
        }
        for j in 0..self.targets.len() {
            if self.visited[j] {
                continue;
            }
            let Some(tj) = intercept_time(here, t, self.targets[j], self.velocities[j], self.v) else { continue };
            self.visited[j] = true;
            self.descend(first, at(self.targets[j], self.velocities[j], tj), tj, remaining - 1);
            self.visited[j] = false;
        }
    }
}

/// Shortest time for one UAV starting at `start` to meet every target and
/// then meet the first of them again, minimized over visiting orders.
/// Targets move at constant `velocities` from `targets` at time 0.
pub fn t_star_oracle(
    start: Point<f64>,
    targets: &[Point<f64>],
    velocities: &[[f64; 2]],
    v_max: f64,
) -> Result<Bound<f64>, OracleError> {
    if targets.len() > MAX_TARGETS {
        return Err(OracleError::TooManyTargets(targets.len()));
    }
    if targets.len() != velocities.len() {
        return Err(OracleError::LengthMismatch(targets.len(), velocities.len()));
    }
    if targets.is_empty() {
        return Ok(Bound::Finite(0.0));
    }
    let mut s = Search { targets, velocities, v: v_max, best: f64::INFINITY, visited: vec![false; targets.len()] };
    for first in 0..targets.len() {
        let Some(t) = intercept_time(start, 0.0, targets[first], velocities[first], v_max) else { continue };
        s.visited[first] = true;
        s.descend(first, at(targets[first], velocities[first], t), t, targets.len() - 1);
        s.visited[first] = false;
    }
    Ok(if s.best.is_finite() { Bound::Finite(s.best) } else { Bound::Infeasible })
}
