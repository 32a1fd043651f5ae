//! Coverage of non-prioritized fire by the unallocated UAVs: cluster the
//! spots, pair clusters with UAVs, tour each cluster, and re-plan when the
//! plan goes stale or the UAV set changes.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coordinator::{SpotEstimate, UavAgent, UavId};
use crate::fire::{ScenarioCase, SpotId};
use crate::qos::{service_time, BoundConvention, BoundInputs};
use crate::seed::derive_seed;
use crate::tour::{distance, kmeans_partition, Point, TourGraph, TWO_OPT_PASSES};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageConfig {
    pub two_opt_passes: usize,
    /// Merge-disk radius; `None` uses half the footprint width.
    pub merge_radius: Option<f64>,
    pub k_max: usize,
    pub convention: BoundConvention,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { two_opt_passes: TWO_OPT_PASSES, merge_radius: None, k_max: 5, convention: BoundConvention::Combined, seed: 0 }
    }
}

/// One UAV's share of the coverage plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveragePart {
    pub uav: UavId,
    /// Spot ids in the cluster; graph node members index into this list.
    pub members: Vec<SpotId>,
    pub graph: TourGraph<f64>,
    /// Service bound of the cluster tour (`+∞` when infeasible).
    pub t_ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveragePlan {
    /// Time the plan was made.
    pub epoch: u64,
    pub parts: Vec<CoveragePart>,
    /// UAVs the plan was made for, ascending.
    pub uavs: Vec<UavId>,
}

impl CoveragePlan {
    pub fn empty(epoch: u64, uavs: Vec<UavId>) -> Self {
        Self { epoch, parts: Vec::new(), uavs }
    }

    /// Smallest cluster service bound; `+∞` for an empty plan.
    pub fn min_t_ub(&self) -> f64 {
        self.parts.iter().map(|p| p.t_ub).fold(f64::INFINITY, f64::min)
    }

    pub fn part_for(&self, uav: UavId) -> Option<&CoveragePart> {
        self.parts.iter().find(|p| p.uav == uav)
    }

    /// Whether a plan made at `epoch` must be replaced at time `t`.
    pub fn is_stale(&self, t: u64, uavs: &[UavId]) -> bool {
        self.uavs != uavs || (t - self.epoch) as f64 >= self.min_t_ub()
    }
}

/// Regime-level inputs for the cluster bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageBoundInputs {
    pub case: ScenarioCase,
    pub zeta: f64,
}

/// Outcome of one coverage step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageStep {
    pub plan: CoveragePlan,
    pub replanned: bool,
}

/// Re-clusters when the plan is stale or the UAV set changed; otherwise
/// keeps the tours and only refreshes node positions from `spots`.
pub fn coverage_step(
    previous: Option<CoveragePlan>,
    t: u64,
    spots: &[(SpotId, Point<f64>)],
    uavs: &[&UavAgent],
    bound: CoverageBoundInputs,
    cfg: &CoverageConfig,
) -> CoverageStep {
    let mut ids: Vec<UavId> = uavs.iter().map(|u| u.id).collect();
    ids.sort_unstable();
    let stale = previous.as_ref().is_none_or(|p| p.is_stale(t, &ids));
    if !stale {
        let mut plan = previous.expect("fresh plan exists");
        let pos: BTreeMap<SpotId, Point<f64>> = spots.iter().copied().collect();
        for part in &mut plan.parts {
            for node in &mut part.graph.nodes {
                let live: Vec<Point<f64>> = node.members.iter().filter_map(|&k| pos.get(&part.members[k]).copied()).collect();
                if !live.is_empty() {
                    node.pos = crate::tour::centroid(live);
                }
            }
            part.graph.length = crate::tour::path_length(&part.graph.cycle, &part.graph.node_positions());
        }
        return CoverageStep { plan, replanned: false };
    }
    if spots.is_empty() || uavs.is_empty() {
        return CoverageStep { plan: CoveragePlan::empty(t, ids), replanned: true };
    }

    let k = uavs.len().min(spots.len());
    let pts: Vec<Point<f64>> = spots.iter().map(|s| s.1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0xC0, t]));
    let partition = kmeans_partition(&pts, k, &mut rng).expect("1 <= k <= n");
    let clusters = partition.clusters();

    // Greedy matching: repeatedly take the closest (UAV, cluster) pair.
    let mut pairs = Vec::with_capacity(uavs.len() * k);
    for u in uavs {
        for (c, cen) in partition.centroids.iter().enumerate() {
            pairs.push((distance(u.planar(), *cen), u.id, c));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uav_taken = Vec::new();
    let mut cluster_owner: Vec<Option<UavId>> = vec![None; k];
    for (_, u, c) in pairs {
        if cluster_owner[c].is_some() || uav_taken.contains(&u) {
            continue;
        }
        cluster_owner[c] = Some(u);
        uav_taken.push(u);
    }

    let mut parts = Vec::with_capacity(k);
    for (c, owner) in cluster_owner.into_iter().enumerate() {
        let uav = *uavs.iter().find(|u| Some(u.id) == owner).expect("every cluster gets a UAV");
        let members: Vec<SpotId> = clusters[c].iter().map(|&i| spots[i].0).collect();
        let member_pts: Vec<Point<f64>> = clusters[c].iter().map(|&i| pts[i]).collect();
        let fov = uav.fov();
        let radius = cfg.merge_radius.unwrap_or(fov / 2.0);
        let graph = TourGraph::build(&member_pts, Some((radius, cfg.k_max)), cfg.two_opt_passes);
        let inputs =
            BoundInputs { path_len: graph.mst_weight, v_max: uav.v_max, zeta: bound.zeta, n_q: graph.nodes.len(), fov };
        let t_ub = service_time(bound.case, &inputs, cfg.convention).or_infinity();
        parts.push(CoveragePart { uav: uav.id, members, graph, t_ub });
    }
    parts.sort_by_key(|p| p.uav);
    CoverageStep { plan: CoveragePlan { epoch: t, parts, uavs: ids }, replanned: true }
}

/// Sum of residual-covariance traces over spots outside every footprint
/// disk of radius `radius` centred on the given ground points.
pub fn coverage_residual(
    spots: &[(SpotId, Point<f64>)],
    footprints: &[Point<f64>],
    radius: f64,
    estimates: &BTreeMap<SpotId, SpotEstimate>,
) -> f64 {
    spots
        .iter()
        .filter(|(_, p)| !footprints.iter().any(|f| distance(*f, *p) <= radius))
        .filter_map(|(id, _)| estimates.get(id))
        .map(|e| e.filter.residual_covariance().trace())
        .sum()
}
