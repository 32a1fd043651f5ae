use firetrack_core::tour::{
    build_mst, distance, hamiltonian_from_mst, kmeans_partition, merge_nodes, mst_weight, path_length, steiner_merge,
    two_opt, Point, TourGraph, TWO_OPT_PASSES,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn points(max: usize) -> impl Strategy<Value = Vec<Point<f64>>> {
    prop::collection::vec((0.0..100.0f64, 0.0..100.0f64).prop_map(|(x, y)| [x, y]), 1..=max)
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn optimal_cycle(pts: &[Point<f64>]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let mut rest: Vec<usize> = (1..pts.len()).collect();
    let mut best = f64::INFINITY;
    permutations(&mut rest, 0, &mut |perm| {
        let mut cycle = vec![0];
        cycle.extend_from_slice(perm);
        best = best.min(path_length(&cycle, pts));
    });
    best
}

/// Minimum spanning tree weight by trying every Prüfer sequence.
fn spanning_tree_oracle(pts: &[Point<f64>]) -> f64 {
    let n = pts.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return distance(pts[0], pts[1]);
    }
    let mut best = f64::INFINITY;
    let total = n.pow((n - 2) as u32);
    for code in 0..total {
        let mut seq = Vec::with_capacity(n - 2);
        let mut c = code;
        for _ in 0..n - 2 {
            seq.push(c % n);
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut w = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            w += distance(pts[leaf], pts[s]);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let ends: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        w += distance(pts[ends[0]], pts[ends[1]]);
        best = best.min(w);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_opt_never_lengthens(pts in points(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut cycle: Vec<usize> = (0..pts.len()).collect();
        cycle.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let before = path_length(&cycle, &pts);
        let after = two_opt(&cycle, &pts, TWO_OPT_PASSES);
        prop_assert!(path_length(&after, &pts) <= before * (1.0 + 1e-12));
        let mut sorted = after.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..pts.len()).collect::<Vec<_>>());
    }

    #[test]
    fn double_tree_within_twice_tree_and_optimum(pts in points(8)) {
        let edges = build_mst(&pts);
        let w = mst_weight(&edges);
        let shortcut = hamiltonian_from_mst(pts.len(), &edges);
        let len = path_length(&shortcut, &pts);
        prop_assert!(len <= 2.0 * w * (1.0 + 1e-12) + 1e-12);
        let refined = TourGraph::build(&pts, None, TWO_OPT_PASSES);
        let opt = optimal_cycle(&pts);
        prop_assert!(refined.length <= len * (1.0 + 1e-12) + 1e-12);
        prop_assert!(refined.length <= 2.0 * opt * (1.0 + 1e-12) + 1e-12);
        prop_assert!(w <= opt * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn prim_matches_exhaustive_spanning_trees(pts in points(7)) {
        let w = mst_weight(&build_mst(&pts));
        let oracle = spanning_tree_oracle(&pts);
        prop_assert!((w - oracle).abs() <= 1e-9 * oracle.max(1.0));
    }

    #[test]
    fn merge_is_idempotent_and_bounded(pts in points(40), radius in 1.0..20.0f64, k_max in 1usize..6) {
        let once = steiner_merge(&pts, radius, k_max);
        let twice = merge_nodes(&once, &pts, radius, k_max);
        prop_assert_eq!(&once, &twice);
        let mut all: Vec<usize> = once.iter().flat_map(|n| n.members.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..pts.len()).collect::<Vec<_>>());
        for node in &once {
            prop_assert!(node.members.len() <= k_max);
            for &a in &node.members {
                for &b in &node.members {
                    prop_assert!(distance(pts[a], pts[b]) <= 2.0 * radius + 1e-12);
                }
            }
        }
    }
}

#[test]
fn two_opt_non_increasing_on_many_instances() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let n = rng.gen_range(3..=12);
        let pts: Vec<Point<f64>> = (0..n).map(|_| [rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)]).collect();
        let cycle: Vec<usize> = (0..n).collect();
        let after = two_opt(&cycle, &pts, TWO_OPT_PASSES);
        assert!(path_length(&after, &pts) <= path_length(&cycle, &pts) * (1.0 + 1e-12));
    }
}

#[test]
fn kmeans_finds_the_obvious_bipartition() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..50 {
        let mut pts = Vec::new();
        for i in 0..20 {
            let base = if i < 10 { [0.0, 0.0] } else { [100.0, 100.0] };
            pts.push([base[0] + rng.gen_range(-5.0..5.0), base[1] + rng.gen_range(-5.0..5.0)]);
        }
        let part = kmeans_partition(&pts, 2, &mut ChaCha8Rng::seed_from_u64(trial)).unwrap();
        let label = part.assignment[0];
        for (i, &a) in part.assignment.iter().enumerate() {
            assert_eq!(a == label, i < 10, "trial {trial}");
        }
    }
}
