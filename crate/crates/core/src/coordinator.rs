//! Guaranteed-service planning over prioritized fire areas: build tours,
//! bound their service time, run the URR feasibility test, split infeasible
//! subgraphs and recruit UAVs, and dismiss surplus UAVs.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::filter::FilterState;
use crate::fire::SpotId;
use crate::qos::{
    classify_case, fov_width, service_time, urr, zeta_alpha, Bound, BoundConvention, BoundInputs, ClassifyConfig,
    ConfidenceConfig, QosAssessment,
};
use crate::seed::derive_seed;
use crate::tour::{centroid, distance, kmeans_partition, Point, TourGraph, TWO_OPT_PASSES};

pub type UavId = usize;
pub type SubgraphId = u64;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("UAV {0}: {1}")]
    InvalidUav(UavId, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UavStatus {
    Unallocated,
    Allocated(SubgraphId),
    InTransit(SubgraphId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UavAgent {
    pub id: UavId,
    pub pose: [f64; 3],
    pub v_max: f64,
    pub half_angle: f64,
    pub status: UavStatus,
}

impl UavAgent {
    pub fn new(id: UavId, pose: [f64; 3], v_max: f64, half_angle: f64) -> Result<Self, PlanError> {
        if !(v_max > 0.0) {
            return Err(PlanError::InvalidUav(id, format!("v_max {v_max} must be positive")));
        }
        if !(pose[2] > 0.0) {
            return Err(PlanError::InvalidUav(id, format!("altitude {} must be positive", pose[2])));
        }
        if fov_width(pose[2], half_angle).is_err() {
            return Err(PlanError::InvalidUav(id, format!("half angle {half_angle} outside [0, π/2)")));
        }
        Ok(Self { id, pose, v_max, half_angle, status: UavStatus::Unallocated })
    }

    pub fn planar(&self) -> [f64; 2] {
        [self.pose[0], self.pose[1]]
    }

    /// Footprint width on the ground.
    pub fn fov(&self) -> f64 {
        fov_width(self.pose[2], self.half_angle).expect("validated half angle")
    }

    pub fn is_free(&self) -> bool {
        self.status == UavStatus::Unallocated
    }

    pub fn subgraph(&self) -> Option<SubgraphId> {
        match self.status {
            UavStatus::Unallocated => None,
            UavStatus::Allocated(s) | UavStatus::InTransit(s) => Some(s),
        }
    }
}

/// Filter-backed estimate of one firespot.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotEstimate {
    pub id: SpotId,
    pub filter: FilterState<f64>,
}

impl SpotEstimate {
    pub fn position(&self) -> Point<f64> {
        self.filter.spot()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerConfig {
    pub confidence: ConfidenceConfig,
    pub classify: ClassifyConfig,
    pub convention: BoundConvention,
    pub two_opt_passes: usize,
    /// Merge-disk radius; `None` uses half the footprint width.
    pub merge_radius: Option<f64>,
    pub k_max: usize,
    /// Dismissal checks run on multiples of this many steps (0 disables).
    pub dismissal_interval: u64,
    /// Cap on splits per planning round; `None` splits until feasible.
    pub max_splits_per_round: Option<usize>,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            confidence: ConfidenceConfig::default(),
            classify: ClassifyConfig::default(),
            convention: BoundConvention::Combined,
            two_opt_passes: TWO_OPT_PASSES,
            merge_radius: None,
            k_max: 5,
            dismissal_interval: 20,
            max_splits_per_round: None,
            seed: 0,
        }
    }
}

/// One UAV paired with the subgraph it serves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub subgraph: SubgraphId,
    pub uav: UavId,
    /// Member spot ids, ascending; graph node members index into this list.
    pub members: Vec<SpotId>,
    pub graph: TourGraph<f64>,
    pub qos: Option<QosAssessment<f64>>,
    pub node_urr: Vec<f64>,
}

impl Assignment {
    pub fn centroid(&self) -> Point<f64> {
        self.graph.centroid()
    }

    pub fn waypoints(&self) -> Vec<Point<f64>> {
        self.graph.waypoints()
    }

    pub fn feasible(&self) -> bool {
        self.qos.is_some_and(|q| q.feasible)
    }

    pub fn t_ub(&self) -> Option<f64> {
        self.qos.and_then(|q| q.t_ub.value())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanEvent {
    Created { subgraph: SubgraphId, uav: UavId },
    Split { from: SubgraphId, into: [SubgraphId; 2], recruited: UavId },
    Dismissed { uav: UavId, kept: UavId, merged: [SubgraphId; 2], into: SubgraphId },
    Released { uav: UavId, subgraph: SubgraphId },
    Insufficient { needed: usize },
}

/// Planning log entry for one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRecord {
    pub round: u64,
    pub time: u64,
    pub subgraphs: usize,
    /// Per-assignment service bound (`None` when pending or infeasible).
    pub t_ub: Vec<Option<f64>>,
    /// Per-assignment largest node URR (`None` when pending or infeasible).
    pub urr: Vec<Option<f64>>,
    pub events: Vec<PlanEvent>,
    /// Additional UAVs still needed when the pool ran dry.
    pub insufficient: Option<usize>,
}

/// True iff every assessment has a finite bound and URR ≤ 1.
pub fn feasibility_test(assessments: &[QosAssessment<f64>]) -> bool {
    assessments.iter().all(|a| a.t_ub.is_finite() && a.urr.is_some_and(|u| u <= 1.0))
}

const ZETA_STREAM: u64 = 0x7A;
const SPLIT_STREAM: u64 = 0x5B;

struct RoundContext<'a> {
    estimates: &'a BTreeMap<SpotId, SpotEstimate>,
    zeta: BTreeMap<SpotId, f64>,
    history: &'a [usize],
}

/// Stateful planner advanced once per simulation step.
#[derive(Debug, Clone)]
pub struct Coordinator {
    cfg: PlannerConfig,
    assignments: Vec<Assignment>,
    next_subgraph: SubgraphId,
    count_history: Vec<usize>,
    round: u64,
    gate_on_arrival: bool,
}

impl Coordinator {
    pub fn new(cfg: PlannerConfig) -> Self {
        Self { cfg, assignments: Vec::new(), next_subgraph: 0, count_history: Vec::new(), round: 0, gate_on_arrival: true }
    }

    /// Evaluate subgraphs immediately instead of waiting for their UAV to arrive.
    pub fn without_arrival_gate(mut self) -> Self {
        self.gate_on_arrival = false;
        self
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    /// One planning round at time `t` over the currently prioritized spots.
    pub fn plan_round(
        &mut self,
        t: u64,
        estimates: &BTreeMap<SpotId, SpotEstimate>,
        prioritized: &[SpotId],
        uavs: &mut [UavAgent],
    ) -> PlanRecord {
        for (i, u) in uavs.iter().enumerate() {
            assert_eq!(u.id, i, "UAV ids must equal their pool index");
        }
        let live: BTreeSet<SpotId> = prioritized.iter().copied().filter(|id| estimates.contains_key(id)).collect();
        self.count_history.push(live.len());
        let history = std::mem::take(&mut self.count_history);
        let zeta = live
            .iter()
            .map(|&id| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, &[ZETA_STREAM, t, id as u64]));
                (id, zeta_alpha(&[&estimates[&id].filter], &self.cfg.confidence, &mut rng))
            })
            .collect();
        let ctx = RoundContext { estimates, zeta, history: &history };
        let mut events = Vec::new();
        let mut insufficient = None;

        self.sync_membership(&live, &ctx, uavs, &mut events);
        if self.assignments.is_empty() && !live.is_empty() {
            let members: Vec<SpotId> = live.iter().copied().collect();
            let c = centroid(members.iter().map(|m| estimates[m].position()));
            match nearest_free(uavs, c) {
                Some(uav) => {
                    let a = self.build(members, uav, &ctx, uavs);
                    uavs[uav].status = self.fresh_status(a.subgraph);
                    events.push(PlanEvent::Created { subgraph: a.subgraph, uav });
                    self.assignments.push(a);
                }
                None => {
                    let needed = 1 + self.hypothetical_need(members, None, &ctx, uavs);
                    events.push(PlanEvent::Insufficient { needed });
                    insufficient = Some(needed);
                }
            }
        }

        for i in 0..self.assignments.len() {
            let mut a = self.assignments[i].clone();
            if self.ready(&a, uavs) {
                self.evaluate(&mut a, &ctx, uavs);
            } else {
                a.qos = None;
                a.node_urr.clear();
            }
            self.assignments[i] = a;
        }

        let mut splits = 0usize;
        while insufficient.is_none() {
            if self.cfg.max_splits_per_round.is_some_and(|cap| splits >= cap) {
                break;
            }
            let Some(idx) =
                self.assignments.iter().position(|a| a.qos.is_some_and(|q| !q.feasible) && a.members.len() >= 2)
            else {
                break;
            };
            match self.split(idx, &ctx, uavs, &mut events) {
                Ok(()) => splits += 1,
                Err(needed) => {
                    events.push(PlanEvent::Insufficient { needed });
                    insufficient = Some(needed);
                }
            }
        }

        let d = self.cfg.dismissal_interval;
        if d > 0 && t > 0 && t % d == 0 && insufficient.is_none() {
            self.try_dismiss(&ctx, uavs, &mut events);
        }

        let record = PlanRecord {
            round: self.round,
            time: t,
            subgraphs: self.assignments.len(),
            t_ub: self.assignments.iter().map(|a| a.t_ub()).collect(),
            urr: self.assignments.iter().map(|a| a.qos.and_then(|q| q.urr)).collect(),
            events,
            insufficient,
        };
        self.count_history = history;
        self.round += 1;
        record
    }

    fn fresh_status(&self, subgraph: SubgraphId) -> UavStatus {
        if self.gate_on_arrival {
            UavStatus::InTransit(subgraph)
        } else {
            UavStatus::Allocated(subgraph)
        }
    }

    fn ready(&self, a: &Assignment, uavs: &[UavAgent]) -> bool {
        !self.gate_on_arrival || uavs[a.uav].status == UavStatus::Allocated(a.subgraph)
    }

    fn next_id(&mut self) -> SubgraphId {
        let id = self.next_subgraph;
        self.next_subgraph += 1;
        id
    }

    fn sync_membership(
        &mut self,
        live: &BTreeSet<SpotId>,
        ctx: &RoundContext,
        uavs: &mut [UavAgent],
        events: &mut Vec<PlanEvent>,
    ) {
        let mut changed = vec![false; self.assignments.len()];
        let mut covered = BTreeSet::new();
        for (i, a) in self.assignments.iter_mut().enumerate() {
            let before = a.members.len();
            a.members.retain(|m| live.contains(m));
            changed[i] = a.members.len() != before;
            covered.extend(a.members.iter().copied());
        }
        if !self.assignments.is_empty() {
            let centroids: Vec<Point<f64>> = self.assignments.iter().map(|a| a.centroid()).collect();
            for &id in live.iter().filter(|id| !covered.contains(id)) {
                let p = ctx.estimates[&id].position();
                let best = nearest_index(&centroids, p);
                self.assignments[best].members.push(id);
                self.assignments[best].members.sort_unstable();
                changed[best] = true;
            }
        }
        let mut kept = Vec::with_capacity(self.assignments.len());
        for (a, ch) in std::mem::take(&mut self.assignments).into_iter().zip(changed) {
            if a.members.is_empty() {
                uavs[a.uav].status = UavStatus::Unallocated;
                events.push(PlanEvent::Released { uav: a.uav, subgraph: a.subgraph });
                continue;
            }
            if ch {
                let mut rebuilt = self.rebuild(a.members.clone(), a.uav, ctx, uavs);
                rebuilt.subgraph = a.subgraph;
                kept.push(rebuilt);
            } else {
                let mut a = a;
                let pts: Vec<Point<f64>> = a.members.iter().map(|m| ctx.estimates[m].position()).collect();
                a.graph.refresh_positions(&pts);
                kept.push(a);
            }
        }
        self.assignments = kept;
    }

    fn rebuild(&self, members: Vec<SpotId>, uav: UavId, ctx: &RoundContext, uavs: &[UavAgent]) -> Assignment {
        let pts: Vec<Point<f64>> = members.iter().map(|m| ctx.estimates[m].position()).collect();
        let fov = uavs[uav].fov();
        let radius = self.cfg.merge_radius.unwrap_or(fov / 2.0);
        let graph = TourGraph::build(&pts, Some((radius, self.cfg.k_max)), self.cfg.two_opt_passes);
        Assignment { subgraph: SubgraphId::MAX, uav, members, graph, qos: None, node_urr: Vec::new() }
    }

    fn build(&mut self, members: Vec<SpotId>, uav: UavId, ctx: &RoundContext, uavs: &[UavAgent]) -> Assignment {
        let mut a = self.rebuild(members, uav, ctx, uavs);
        a.subgraph = self.next_id();
        a
    }

    fn evaluate(&self, a: &mut Assignment, ctx: &RoundContext, uavs: &[UavAgent]) {
        let uav = &uavs[a.uav];
        let filters: Vec<&FilterState<f64>> = a.members.iter().map(|m| &ctx.estimates[m].filter).collect();
        let case = classify_case(&filters, ctx.history, &self.cfg.classify);
        let zeta = a.members.iter().map(|m| ctx.zeta[m]).fold(0.0, f64::max);
        let inputs = BoundInputs {
            path_len: a.graph.mst_weight,
            v_max: uav.v_max,
            zeta,
            n_q: a.graph.nodes.len(),
            fov: uav.fov(),
        };
        let t_ub = service_time(case, &inputs, self.cfg.convention);
        a.node_urr.clear();
        let mut worst = None;
        if let Bound::Finite(t) = t_ub {
            for node in &a.graph.nodes {
                let mut node_worst = 0.0f64;
                for &k in &node.members {
                    let mut fs = ctx.estimates[&a.members[k]].filter.clone();
                    fs.set_observer([node.pos[0], node.pos[1], uav.pose[2]]);
                    node_worst = node_worst.max(urr(&fs, t).unwrap_or(f64::INFINITY));
                }
                a.node_urr.push(node_worst);
            }
            worst = Some(a.node_urr.iter().copied().fold(0.0, f64::max));
        }
        a.qos = Some(QosAssessment::new(case, zeta, t_ub, worst));
    }

    fn partition(&self, members: &[SpotId], ctx: &RoundContext) -> (Vec<SpotId>, Vec<SpotId>) {
        let pts: Vec<Point<f64>> = members.iter().map(|m| ctx.estimates[m].position()).collect();
        let key: Vec<u64> = std::iter::once(SPLIT_STREAM).chain(members.iter().map(|&m| m as u64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, &key));
        let part = kmeans_partition(&pts, 2, &mut rng).expect("at least two members");
        let mut halves = (Vec::new(), Vec::new());
        for (i, &c) in part.assignment.iter().enumerate() {
            if c == 0 {
                halves.0.push(members[i]);
            } else {
                halves.1.push(members[i]);
            }
        }
        halves
    }

    /// Splits assignment `idx` in two and recruits the nearest free UAV for
    /// the half farther from the current one. On an empty pool returns the
    /// number of additional UAVs still required.
    fn split(
        &mut self,
        idx: usize,
        ctx: &RoundContext,
        uavs: &mut [UavAgent],
        events: &mut Vec<PlanEvent>,
    ) -> Result<(), usize> {
        let old = self.assignments[idx].clone();
        let (a, b) = self.partition(&old.members, ctx);
        let ca = centroid(a.iter().map(|m| ctx.estimates[m].position()));
        let cb = centroid(b.iter().map(|m| ctx.estimates[m].position()));
        let here = uavs[old.uav].planar();
        let (keep, give, give_c) = if distance(here, cb) < distance(here, ca) { (b, a, ca) } else { (a, b, cb) };
        let Some(recruit) = nearest_free(uavs, give_c) else {
            let needed = self
                .assignments
                .iter()
                .filter(|x| x.qos.is_some_and(|q| !q.feasible))
                .map(|x| self.hypothetical_need(x.members.clone(), Some(x.uav), ctx, uavs))
                .sum::<usize>()
                .max(1);
            return Err(needed);
        };
        let mut kept = self.build(keep, old.uav, ctx, uavs);
        let mut given = self.build(give, recruit, ctx, uavs);
        uavs[old.uav].status = match uavs[old.uav].status {
            UavStatus::InTransit(_) => UavStatus::InTransit(kept.subgraph),
            _ => UavStatus::Allocated(kept.subgraph),
        };
        uavs[recruit].status = self.fresh_status(given.subgraph);
        for x in [&mut kept, &mut given] {
            if self.ready(x, uavs) {
                self.evaluate(x, ctx, uavs);
            }
        }
        events.push(PlanEvent::Split { from: old.subgraph, into: [kept.subgraph, given.subgraph], recruited: recruit });
        self.assignments[idx] = kept;
        self.assignments.push(given);
        Ok(())
    }

    /// Extra subgraphs needed to make `members` feasible by repeated bisection.
    fn hypothetical_need(&self, members: Vec<SpotId>, uav: Option<UavId>, ctx: &RoundContext, uavs: &[UavAgent]) -> usize {
        let uav = uav.unwrap_or(0);
        if uavs.is_empty() {
            return 0;
        }
        let mut pending = vec![members];
        let mut extra = 0usize;
        while let Some(m) = pending.pop() {
            let mut a = self.rebuild(m, uav, ctx, uavs);
            self.evaluate(&mut a, ctx, uavs);
            if a.feasible() || a.members.len() < 2 {
                continue;
            }
            let (x, y) = self.partition(&a.members, ctx);
            extra += 1;
            pending.push(x);
            pending.push(y);
        }
        extra
    }

    /// Merges the two subgraphs with the closest centroids when the merged
    /// subgraph still passes the feasibility test; releases one UAV.
    fn try_dismiss(&mut self, ctx: &RoundContext, uavs: &mut [UavAgent], events: &mut Vec<PlanEvent>) -> bool {
        if self.assignments.len() < 2 || !self.assignments.iter().all(|a| a.feasible()) {
            return false;
        }
        let centroids: Vec<Point<f64>> = self.assignments.iter().map(|a| a.centroid()).collect();
        let mut pair = (0, 1, f64::INFINITY);
        for i in 0..centroids.len() {
            for j in i + 1..centroids.len() {
                let d = distance(centroids[i], centroids[j]);
                if d < pair.2 {
                    pair = (i, j, d);
                }
            }
        }
        let (i, j, _) = pair;
        let (ai, aj) = (&self.assignments[i], &self.assignments[j]);
        let mut members: Vec<SpotId> = ai.members.iter().chain(&aj.members).copied().collect();
        members.sort_unstable();
        let c = centroid(members.iter().map(|m| ctx.estimates[m].position()));
        let (kept, dismissed) = {
            let (ui, uj) = (ai.uav, aj.uav);
            let (di, dj) = (distance(uavs[ui].planar(), c), distance(uavs[uj].planar(), c));
            if dj < di || (dj == di && uj < ui) {
                (uj, ui)
            } else {
                (ui, uj)
            }
        };
        let mut merged = self.rebuild(members, kept, ctx, uavs);
        self.evaluate(&mut merged, ctx, uavs);
        if !merged.feasible() {
            return false;
        }
        merged.subgraph = self.next_id();
        let from = [self.assignments[i].subgraph, self.assignments[j].subgraph];
        uavs[kept].status = UavStatus::Allocated(merged.subgraph);
        uavs[dismissed].status = UavStatus::Unallocated;
        events.push(PlanEvent::Dismissed { uav: dismissed, kept, merged: from, into: merged.subgraph });
        self.assignments.remove(j);
        self.assignments[i] = merged;
        true
    }
}

fn nearest_index(points: &[Point<f64>], p: Point<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, &q) in points.iter().enumerate() {
        let d = distance(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Nearest unallocated UAV to `target`, lowest id on ties.
pub fn nearest_free(uavs: &[UavAgent], target: Point<f64>) -> Option<UavId> {
    let mut best: Option<(UavId, f64)> = None;
    for u in uavs.iter().filter(|u| u.is_free()) {
        let d = distance(u.planar(), target);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((u.id, d));
        }
    }
    best.map(|b| b.0)
}

/// Result of a one-shot plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanOutcome {
    pub assignments: Vec<Assignment>,
    pub record: PlanRecord,
}

impl PlanOutcome {
    /// UAVs still needed when the pool was exhausted.
    pub fn insufficient(&self) -> Option<usize> {
        self.record.insufficient
    }
}

/// Plans from scratch: every subgraph is evaluated immediately and split
/// until all pass the feasibility test or the UAV pool runs dry.
pub fn plan_step(
    estimates: &BTreeMap<SpotId, SpotEstimate>,
    prioritized: &[SpotId],
    uavs: &mut [UavAgent],
    cfg: &PlannerConfig,
) -> PlanOutcome {
    let mut c = Coordinator::new(PlannerConfig { max_splits_per_round: None, ..cfg.clone() }).without_arrival_gate();
    let record = c.plan_round(0, estimates, prioritized, uavs);
    PlanOutcome { assignments: c.assignments, record }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{state_vector, FilterConfig};
    use crate::fire::ScenarioCase;

    fn estimate(id: SpotId, pos: [f64; 2], rate: f64) -> SpotEstimate {
        let x = state_vector(pos, [pos[0], pos[1], 10.0], rate, 1.0, 0.0);
        let mut filter = FilterState::new(x, &FilterConfig::default()).unwrap();
        filter.predict(1.0);
        SpotEstimate { id, filter }
    }

    fn pool(n: usize, v_max: f64) -> Vec<UavAgent> {
        (0..n).map(|i| UavAgent::new(i, [i as f64, 0.0, 10.0], v_max, std::f64::consts::FRAC_PI_4).unwrap()).collect()
    }

    fn estimates(pts: &[[f64; 2]]) -> BTreeMap<SpotId, SpotEstimate> {
        pts.iter().enumerate().map(|(i, &p)| (i, estimate(i, p, 0.0))).collect()
    }

    #[test]
    fn single_spot_single_uav() {
        let est = estimates(&[[5.0, 5.0]]);
        let mut uavs = pool(1, 500.0);
        let out = plan_step(&est, &[0], &mut uavs, &PlannerConfig::default());
        assert_eq!(out.assignments.len(), 1);
        assert!(out.assignments[0].feasible());
        assert!(out.assignments[0].qos.unwrap().urr.unwrap() <= 1.0);
        assert!(out.insufficient().is_none());
    }

    #[test]
    fn far_pair_splits_into_singletons() {
        let est = estimates(&[[0.0, 0.0], [400.0, 400.0]]);
        let mut uavs = pool(3, 100.0);
        let out = plan_step(&est, &[0, 1], &mut uavs, &PlannerConfig::default());
        assert_eq!(out.assignments.len(), 2);
        assert!(out.assignments.iter().all(|a| a.members.len() == 1 && a.feasible()));
        assert_eq!(uavs.iter().filter(|u| !u.is_free()).count(), 2);
    }

    #[test]
    fn exhausted_pool_reports_need() {
        let est = estimates(&[[0.0, 0.0], [400.0, 0.0], [0.0, 400.0], [400.0, 400.0]]);
        let mut uavs = pool(2, 100.0);
        let out = plan_step(&est, &[0, 1, 2, 3], &mut uavs, &PlannerConfig::default());
        assert_eq!(out.insufficient(), Some(2));
        let mut members: Vec<SpotId> = out.assignments.iter().flat_map(|a| a.members.clone()).collect();
        members.sort_unstable();
        assert_eq!(members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn feasibility_boundary() {
        let ok = QosAssessment::new(ScenarioCase::Stationary, 0.0, Bound::Finite(1.0), Some(1.0));
        let bad = QosAssessment::new(ScenarioCase::Stationary, 0.0, Bound::<f64>::Infeasible, None);
        assert!(feasibility_test(&[ok, ok]));
        assert!(!feasibility_test(&[ok, bad]));
    }

    #[test]
    fn nearest_free_ties_low_id() {
        let mut uavs = pool(3, 1.0);
        uavs[0].pose = [1.0, 0.0, 10.0];
        uavs[2].pose = [-1.0, 0.0, 10.0];
        uavs[1].status = UavStatus::Allocated(0);
        assert_eq!(nearest_free(&uavs, [0.0, 0.0]), Some(0));
    }
}
