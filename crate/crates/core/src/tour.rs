//! Tour construction over estimated firespots: minimum spanning tree,
//! double-tree Hamiltonian cycle, 2-opt refinement, disk merging of nearby
//! targets and k-means partitioning.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{lit, to_f64, Scalar};

pub type Point<T> = [T; 2];

#[inline]
pub fn distance<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TourError {
    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("cluster count must be at least one")]
    NoClusters,
}

/// Undirected tree edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge<T> {
    pub a: usize,
    pub b: usize,
    pub weight: T,
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Prim's algorithm on the complete Euclidean graph.
///
/// Equal weights are resolved by the lexicographically smallest node pair,
/// so the tree is a pure function of the input order.
pub fn build_mst<T: Scalar>(points: &[Point<T>]) -> Vec<Edge<T>> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<(T, usize)> = vec![(T::infinity(), usize::MAX); n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = (distance(points[0], points[v]), 0);
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(p) => {
                    let (wp, pp) = best[p];
                    let (wv, pv) = best[v];
                    if wv < wp || (wv == wp && ordered(pv, v) < ordered(pp, p)) {
                        Some(v)
                    } else {
                        Some(p)
                    }
                }
            };
        }
        let v = pick.expect("a vertex remains outside the tree");
        let (w, parent) = best[v];
        let (a, b) = ordered(parent, v);
        edges.push(Edge { a, b, weight: w });
        in_tree[v] = true;
        for u in 0..n {
            if in_tree[u] {
                continue;
            }
            let d = distance(points[v], points[u]);
            let (wu, pu) = best[u];
            if d < wu || (d == wu && ordered(v, u) < ordered(pu, u)) {
                best[u] = (d, v);
            }
        }
    }
    edges
}

pub fn mst_weight<T: Scalar>(edges: &[Edge<T>]) -> T {
    edges.iter().fold(T::zero(), |acc, e| acc + e.weight)
}

/// Preorder walk of the tree rooted at node 0 (children in ascending id),
/// i.e. the shortcut doubled tree.
pub fn hamiltonian_from_mst<T: Scalar>(n: usize, edges: &[Edge<T>]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0usize];
    while let Some(u) = stack.pop() {
        if seen[u] {
            continue;
        }
        seen[u] = true;
        order.push(u);
        for &w in adj[u].iter().rev() {
            if !seen[w] {
                stack.push(w);
            }
        }
    }
    order
}

/// Closed-cycle length including the edge back to the start.
pub fn path_length<T: Scalar>(cycle: &[usize], points: &[Point<T>]) -> T {
    if cycle.len() < 2 {
        return T::zero();
    }
    let mut total = T::zero();
    for i in 0..cycle.len() {
        let j = (i + 1) % cycle.len();
        total = total + distance(points[cycle[i]], points[cycle[j]]);
    }
    total
}

/// Default pass budget for [`two_opt`].
pub const TWO_OPT_PASSES: usize = 50;

/// First-improvement 2-opt over edge pairs in lexicographic order.
///
/// Each pass scans every non-adjacent edge pair once, applying improving
/// exchanges as they are found; stops after a pass without improvement or
/// when `max_passes` is spent.
pub fn two_opt<T: Scalar>(cycle: &[usize], points: &[Point<T>], max_passes: usize) -> Vec<usize> {
    let mut tour = cycle.to_vec();
    let n = tour.len();
    if n < 4 {
        return tour;
    }
    let start = path_length(&tour, points);
    let tol = T::epsilon() * lit(64.0);
    for _ in 0..max_passes {
        let mut improved = false;
        for i in 0..n - 2 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let a = points[tour[i]];
                let b = points[tour[i + 1]];
                let c = points[tour[j]];
                let d = points[tour[(j + 1) % n]];
                let old = distance(a, b) + distance(c, d);
                let new = distance(a, c) + distance(b, d);
                if new < old - tol * old {
                    tour[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let end = path_length(&tour, points);
    assert!(end <= start + tol * start.max(T::one()), "2-opt lengthened the tour");
    tour
}

/// Tour node standing in for one or more merged targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedNode<T> {
    pub pos: Point<T>,
    /// Indices into the original point list, ascending.
    pub members: Vec<usize>,
}

/// Groups targets whose `radius`-disks pairwise overlap (all member
/// distances ≤ 2·radius), at most `k_max` members per group, each group
/// replaced by its centroid. Greedy in input order.
pub fn steiner_merge<T: Scalar>(points: &[Point<T>], radius: T, k_max: usize) -> Vec<MergedNode<T>> {
    let singletons: Vec<MergedNode<T>> =
        points.iter().enumerate().map(|(i, &p)| MergedNode { pos: p, members: vec![i] }).collect();
    merge_nodes(&singletons, points, radius, k_max)
}

/// Re-merges already merged nodes under the same member-level predicate;
/// applying it to the output of [`steiner_merge`] returns that output.
pub fn merge_nodes<T: Scalar>(
    nodes: &[MergedNode<T>],
    points: &[Point<T>],
    radius: T,
    k_max: usize,
) -> Vec<MergedNode<T>> {
    let reach = radius + radius;
    let k_max = k_max.max(1);
    let mut used = vec![false; nodes.len()];
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = nodes[i].members.clone();
        for j in i + 1..nodes.len() {
            if used[j] || members.len() + nodes[j].members.len() > k_max {
                continue;
            }
            let close = nodes[j]
                .members
                .iter()
                .all(|&b| members.iter().all(|&a| distance(points[a], points[b]) <= reach));
            if close {
                used[j] = true;
                members.extend_from_slice(&nodes[j].members);
            }
        }
        members.sort_unstable();
        let pos = if members.len() == 1 { points[members[0]] } else { centroid(members.iter().map(|&m| points[m])) };
        out.push(MergedNode { pos, members });
    }
    out
}

pub fn centroid<T: Scalar, I: IntoIterator<Item = Point<T>>>(pts: I) -> Point<T> {
    let mut sx = T::zero();
    let mut sy = T::zero();
    let mut n = T::zero();
    for p in pts {
        sx = sx + p[0];
        sy = sy + p[1];
        n = n + T::one();
    }
    if n == T::zero() {
        return [T::zero(), T::zero()];
    }
    [sx / n, sy / n]
}

/// Result of k-means clustering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition<T> {
    /// Cluster index for every input point.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Point<T>>,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: T,
}

impl<T: Scalar> Partition<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Point indices of each cluster, in ascending order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

pub const KMEANS_MAX_ITERS: usize = 100;

fn nearest<T: Scalar>(p: Point<T>, centroids: &[Point<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, &q) in centroids.iter().enumerate() {
        let d = sq_dist(p, q);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn sq_dist<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_partition<T: Scalar, R: Rng + ?Sized>(
    points: &[Point<T>],
    k: usize,
    rng: &mut R,
) -> Result<Partition<T>, TourError> {
    let n = points.len();
    if k == 0 {
        return Err(TourError::NoClusters);
    }
    if k > n {
        return Err(TourError::TooManyClusters { k, n });
    }
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|&p| to_f64(sq_dist(p, points[first]))).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().zip(&chosen).filter(|(_, &c)| !c).map(|(d, _)| *d).sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for i in 0..n {
                if chosen[i] || d2[i] <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < d2[i] {
                    break;
                }
                target -= d2[i];
            }
            pick.expect("positive mass implies a candidate")
        } else {
            (0..n).find(|&i| !chosen[i]).expect("k <= n leaves a candidate")
        };
        chosen[pick] = true;
        centroids.push(points[pick]);
        for i in 0..n {
            d2[i] = d2[i].min(to_f64(sq_dist(points[i], points[pick])));
        }
    }

    let mut assignment: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids).0).collect();
    for _ in 0..KMEANS_MAX_ITERS {
        let mut sums = vec![(T::zero(), T::zero(), 0usize); k];
        for (i, &c) in assignment.iter().enumerate() {
            sums[c].0 = sums[c].0 + points[i][0];
            sums[c].1 = sums[c].1 + points[i][1];
            sums[c].2 += 1;
        }
        for c in 0..k {
            if sums[c].2 > 0 {
                let m: T = lit(sums[c].2 as f64);
                centroids[c] = [sums[c].0 / m, sums[c].1 / m];
            }
        }
        // Empty clusters take the point farthest from its own centroid.
        for c in 0..k {
            if sums[c].2 == 0 {
                let mut far = (usize::MAX, -T::one());
                for (i, &a) in assignment.iter().enumerate() {
                    if sums[a].2 <= 1 {
                        continue;
                    }
                    let d = sq_dist(points[i], centroids[a]);
                    if d > far.1 {
                        far = (i, d);
                    }
                }
                if far.0 != usize::MAX {
                    let old = assignment[far.0];
                    sums[old].2 -= 1;
                    sums[c].2 = 1;
                    assignment[far.0] = c;
                    centroids[c] = points[far.0];
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids).0).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .fold(T::zero(), |acc, (&p, &c)| acc + sq_dist(p, centroids[c]));
    Ok(Partition { assignment, centroids, inertia })
}

/// Merged nodes with their spanning tree and service cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TourGraph<T> {
    pub nodes: Vec<MergedNode<T>>,
    pub mst_edges: Vec<Edge<T>>,
    pub mst_weight: T,
    pub cycle: Vec<usize>,
    pub length: T,
}

impl<T: Scalar> TourGraph<T> {
    /// Merge (when `merge` is given as `(radius, k_max)`), span, shortcut and refine.
    pub fn build(points: &[Point<T>], merge: Option<(T, usize)>, two_opt_passes: usize) -> Self {
        let nodes = match merge {
            Some((radius, k_max)) if radius > T::zero() => steiner_merge(points, radius, k_max),
            _ => points.iter().enumerate().map(|(i, &p)| MergedNode { pos: p, members: vec![i] }).collect(),
        };
        Self::from_nodes(nodes, two_opt_passes)
    }

    pub fn from_nodes(nodes: Vec<MergedNode<T>>, two_opt_passes: usize) -> Self {
        let pts: Vec<Point<T>> = nodes.iter().map(|n| n.pos).collect();
        let mst_edges = build_mst(&pts);
        let mst_weight = mst_weight(&mst_edges);
        let cycle = two_opt(&hamiltonian_from_mst(pts.len(), &mst_edges), &pts, two_opt_passes);
        let length = path_length(&cycle, &pts);
        Self { nodes, mst_edges, mst_weight, cycle, length }
    }

    pub fn node_positions(&self) -> Vec<Point<T>> {
        self.nodes.iter().map(|n| n.pos).collect()
    }

    /// Node positions in service order.
    pub fn waypoints(&self) -> Vec<Point<T>> {
        self.cycle.iter().map(|&i| self.nodes[i].pos).collect()
    }

    /// Moves node positions to the centroids of refreshed member positions,
    /// keeping the cycle order; tree weight and length are recomputed.
    pub fn refresh_positions(&mut self, points: &[Point<T>]) {
        for node in &mut self.nodes {
            node.pos = centroid(node.members.iter().map(|&m| points[m]));
        }
        let pts = self.node_positions();
        self.mst_edges = build_mst(&pts);
        self.mst_weight = mst_weight(&self.mst_edges);
        self.length = path_length(&self.cycle, &pts);
    }

    pub fn centroid(&self) -> Point<T> {
        centroid(self.nodes.iter().map(|n| n.pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mst_small_cases() {
        assert!(build_mst::<f64>(&[[1.0, 1.0]]).is_empty());
        let e = build_mst(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        assert_eq!(e.iter().map(|e| (e.a, e.b)).collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(mst_weight(&e), 3.0);
    }

    #[test]
    fn mst_ties_prefer_low_pairs() {
        // Unit square: every side ties; the chosen tree is fixed.
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let e = build_mst(&sq);
        assert_eq!(e.iter().map(|e| (e.a, e.b)).collect::<Vec<_>>(), vec![(0, 1), (0, 3), (1, 2)]);
    }

    #[test]
    fn two_node_cycle() {
        let pts = [[0.0, 0.0], [3.0, 4.0]];
        let g = TourGraph::build(&pts, None, TWO_OPT_PASSES);
        assert_eq!(g.length, 10.0);
        assert_eq!(g.mst_weight, 5.0);
    }

    #[test]
    fn path_length_examples() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(path_length(&[0, 1, 2, 3], &sq), 4.0);
        assert_eq!(path_length(&[2], &sq), 0.0);
    }

    #[test]
    fn two_opt_keeps_optimal_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(two_opt(&[0, 1, 2, 3], &sq, TWO_OPT_PASSES), vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_opt_removes_crossing() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let crossed = [0, 2, 1, 3];
        let before = path_length(&crossed, &sq);
        let fixed = two_opt(&crossed, &sq, TWO_OPT_PASSES);
        let after = path_length(&fixed, &sq);
        assert!((before - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((after - 4.0).abs() < 1e-12);
    }

    #[test]
    fn merge_examples() {
        let far = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let out = steiner_merge(&far, 1.0, 5);
        assert_eq!(out.len(), 3);
        assert!(out.iter().zip(&far).all(|(n, p)| n.pos == *p));

        let same = [[2.0, 3.0], [2.0, 3.0]];
        let out = steiner_merge(&same, 1.0, 5);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].pos, [2.0, 3.0]);

        let tri = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]];
        let out = steiner_merge(&tri, 1.0, 3);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].members, vec![0, 1, 2]);
        for a in 0..3 {
            for b in 0..3 {
                assert!(distance(tri[a], tri[b]) <= 2.0);
            }
        }
        assert_eq!(steiner_merge(&tri, 1.0, 2).len(), 2);
    }

    #[test]
    fn kmeans_edge_cases() {
        let pts = [[0.0, 0.0], [4.0, 0.0], [0.0, 3.0], [5.0, 5.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(kmeans_partition(&pts, 5, &mut rng), Err(TourError::TooManyClusters { k: 5, n: 4 }));
        let all = kmeans_partition(&pts, 4, &mut rng).unwrap();
        assert_eq!(all.inertia, 0.0);
        let one = kmeans_partition(&pts, 1, &mut rng).unwrap();
        assert_eq!(one.centroids[0], [9.0 / 4.0, 8.0 / 4.0]);
    }

    #[test]
    fn kmeans_coincident_points() {
        let pts = [[1.0, 1.0]; 5];
        let p = kmeans_partition(&pts, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.inertia, 0.0);
        assert_eq!(p.k(), 3);
    }

    #[test]
    fn single_precision_tour() {
        let pts: [[f32; 2]; 4] = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let g = TourGraph::build(&pts, None, TWO_OPT_PASSES);
        assert!((g.length - 8.0).abs() < 1e-5);
    }
}
