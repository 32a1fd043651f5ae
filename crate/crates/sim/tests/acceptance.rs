//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs the full experiment grids, so it takes a minute or
//! two in an optimized build.

use std::time::{Duration, Instant};

use firetrack_core::filter::{
    channel, observation_jacobian, observation_model, process_jacobian, process_map, state, state_vector, FilterConfig,
    FilterState, StateVector,
};
use firetrack_core::fire::{spread_factor, ScenarioCase};
use firetrack_core::qos::{case3_coefficients, case3_root, tub_case2, Bound};
use firetrack_core::tour::{build_mst, hamiltonian_from_mst, mst_weight, path_length, two_opt, Point, TourGraph, TWO_OPT_PASSES};
use firetrack_sim::experiments::{
    coverage_vs_n, evolving_config, model_mismatch, run_experiment, tub_convergence, tub_tightness, uav_requirements,
    Experiment, ExperimentOptions, COVERAGE_MAX_UAVS,
};
use firetrack_sim::scenario::run_scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIGHTNESS_TRIALS: usize = 500;
const TIGHTNESS_BUDGET: Duration = Duration::from_secs(600);
const RATIO_BANDS: [(f64, f64); 3] = [(1.0, 1.4), (1.0, 1.6), (1.1, 2.2)];
const SPEARMAN_MIN: f64 = 0.8;
const SLOPE_LIMIT: f64 = 0.05;
const PLATEAU_TOL: f64 = 0.10;
const MISMATCH_BAND: (f64, f64) = (1.05, 2.5);
const JACOBIAN_STATES: usize = 1000;
const JACOBIAN_REL_TOL: f64 = 1e-4;
const JACOBIAN_BUDGET: Duration = Duration::from_secs(30);
const SCALAR_TOL: f64 = 1e-10;
const QUADRATIC_TOL: f64 = 1e-9;

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, n: usize, ok: bool, detail: String) {
        println!("[{}] criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.failed += usize::from(!ok);
    }
}

fn seeds10() -> ExperimentOptions {
    ExperimentOptions { seeds: Some(10), ..ExperimentOptions::default() }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Rank correlation with tied ranks averaged.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn tightness(gate: &mut Gate) {
    let start = Instant::now();
    let res = tub_tightness(&ExperimentOptions { seeds: Some(TIGHTNESS_TRIALS), ..ExperimentOptions::default() });
    let elapsed = start.elapsed();
    let mut ok = elapsed < TIGHTNESS_BUDGET;
    let mut floor_ok = true;
    let mut parts = Vec::new();
    let mut floors = Vec::new();
    for (case, (lo, hi)) in ScenarioCase::ALL.into_iter().zip(RATIO_BANDS) {
        let n = res.of(case).len();
        let m = res.mean_ratio(case);
        let (observed, allowed) = res.failure_check(case);
        ok &= n >= TIGHTNESS_TRIALS && (lo..=hi).contains(&m) && observed <= allowed;
        floor_ok &= m >= 1.0;
        parts.push(format!("case {} mean {m:.3} in [{lo}, {hi}], failures {observed:.3} <= {allowed:.3}", case.index()));
        floors.push(format!("case {} {m:.3}", case.index()));
    }
    gate.report(1, ok, format!("{} ({TIGHTNESS_TRIALS} trials/case, {:.1}s)", parts.join("; "), elapsed.as_secs_f64()));
    gate.report(2, floor_ok, format!("mean ratios >= 1: {}", floors.join(", ")));
}

fn requirements(gate: &mut Gate) {
    let res = uav_requirements(&seeds10());
    let mut ok = true;
    let mut parts = Vec::new();
    for case in ScenarioCase::ALL {
        let of: Vec<_> = res.trials.iter().filter(|t| t.case == case).collect();
        let x: Vec<f64> = of.iter().map(|t| t.areas as f64).collect();
        let y: Vec<f64> = of.iter().map(|t| t.required_uavs as f64).collect();
        let rho = spearman(&x, &y);
        ok &= rho > SPEARMAN_MIN;
        parts.push(format!("case {} rho {rho:.3}", case.index()));
    }
    let means: Vec<Vec<(usize, f64)>> = ScenarioCase::ALL.iter().map(|&c| res.means(c)).collect();
    let mut misordered = Vec::new();
    for k in 0..means[0].len() {
        let (a, b, c) = (means[0][k].1, means[1][k].1, means[2][k].1);
        if !(a <= b && b <= c) {
            misordered.push(format!("N_h={} ({a:.1}, {b:.1}, {c:.1})", means[0][k].0));
        }
    }
    ok &= misordered.is_empty();
    let order = if misordered.is_empty() { "case means ordered at every N_h".to_string() } else { format!("misordered at {}", misordered.join(", ")) };
    gate.report(3, ok, format!("{}; {order}", parts.join(", ")));
}

fn coverage(gate: &mut Gate) {
    let res = coverage_vs_n(&seeds10());
    let mut ok = true;
    let mut parts = Vec::new();
    for case in ScenarioCase::ALL {
        let m = res.means(case);
        let decreasing = m.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing;
        let shown: Vec<String> = m.iter().map(|v| format!("{v:.0}")).collect();
        parts.push(format!("case {} [{}]{}", case.index(), shown.join(" > "), if decreasing { "" } else { " NOT decreasing" }));
    }
    let slope = res.slope_ratio(ScenarioCase::Stationary, COVERAGE_MAX_UAVS);
    ok &= slope < SLOPE_LIMIT;
    gate.report(4, ok, format!("{}; case 1 slope ratio at step 100 with {COVERAGE_MAX_UAVS} UAVs {slope:.4} < {SLOPE_LIMIT}", parts.join("; ")));
}

fn convergence(gate: &mut Gate) {
    let res = tub_convergence(&seeds10());
    let mut ok = true;
    let mut parts = Vec::new();
    for case in ScenarioCase::ALL {
        let s: Vec<f64> = res.series(case).into_iter().map(|p| p.1).collect();
        let q = s.len() / 4;
        if q == 0 {
            ok = false;
            parts.push(format!("case {} has too few evaluated steps", case.index()));
            continue;
        }
        let quartile = |k: usize| {
            let chunk = if k == 3 { &s[3 * q..] } else { &s[k * q..(k + 1) * q] };
            chunk.iter().sum::<f64>() / chunk.len() as f64
        };
        let qs: Vec<f64> = (0..4).map(quartile).collect();
        let final_q = qs[3];
        let min_q = qs.iter().copied().fold(f64::INFINITY, f64::min);
        let c = s[0] > final_q && final_q <= (1.0 + PLATEAU_TOL) * min_q;
        ok &= c;
        parts.push(format!("case {} start {:.3} > plateau {final_q:.3}, min quartile {min_q:.3}", case.index(), s[0]));
    }
    gate.report(5, ok, parts.join("; "));
}

fn mismatch(gate: &mut Gate) {
    let res = model_mismatch(&seeds10());
    let r = res.ratio();
    let per: Vec<String> = ScenarioCase::ALL.iter().map(|&c| format!("{:.3}", res.case_ratio(c))).collect();
    gate.report(
        6,
        (MISMATCH_BAND.0..=MISMATCH_BAND.1).contains(&r),
        format!("uncertainty ratio {r:.3} in [{}, {}] (per case {})", MISMATCH_BAND.0, MISMATCH_BAND.1, per.join(", ")),
    );
}

fn random_state(rng: &mut impl Rng) -> StateVector<f64> {
    let q = [rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)];
    let r = rng.gen_range(1.0..40.0);
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    let p = [q[0] + r * a.cos(), q[1] + r * a.sin(), rng.gen_range(5.0..50.0)];
    state_vector(q, p, rng.gen_range(0.0..2.0), rng.gen_range(0.5..10.0), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn jacobians(gate: &mut Gate) {
    const STEP: f64 = 1e-6;
    // Entries that vanish analytically are compared against this magnitude.
    const FLOOR: f64 = 1e-2;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut degenerate = 0;
    for _ in 0..JACOBIAN_STATES {
        let x = random_state(&mut rng);
        let observer = [x[state::PX], x[state::PY], x[state::PZ]];
        let f = process_jacobian(&x, 1.0);
        let (h, deg) = observation_jacobian(&x);
        degenerate += usize::from(deg);
        for j in 0..8 {
            let (mut hi, mut lo) = (x, x);
            hi[j] += STEP;
            lo[j] -= STEP;
            let df = (process_map(&hi, 1.0, observer) - process_map(&lo, 1.0, observer)) / (2.0 * STEP);
            let dh = (observation_model(&hi).0 - observation_model(&lo).0) / (2.0 * STEP);
            for i in 0..8 {
                worst = worst.max((f[(i, j)] - df[i]).abs() / f[(i, j)].abs().max(FLOOR));
            }
            for i in 0..5 {
                worst = worst.max((h[(i, j)] - dh[i]).abs() / h[(i, j)].abs().max(FLOOR));
            }
        }
    }
    let elapsed = start.elapsed();
    gate.report(
        7,
        worst <= JACOBIAN_REL_TOL && degenerate == 0 && elapsed < JACOBIAN_BUDGET,
        format!("{JACOBIAN_STATES} states, worst relative error {worst:.2e} <= {JACOBIAN_REL_TOL:.0e}, {:.2}s", elapsed.as_secs_f64()),
    );
}

fn brute_force_cycle(pts: &[Point<f64>]) -> f64 {
    fn go(pts: &[Point<f64>], order: &mut Vec<usize>, used: &mut [bool], best: &mut f64) {
        if order.len() == pts.len() {
            *best = best.min(path_length(order, pts));
            return;
        }
        for i in 1..pts.len() {
            if !used[i] {
                used[i] = true;
                order.push(i);
                go(pts, order, used, best);
                order.pop();
                used[i] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; pts.len()];
    used[0] = true;
    go(pts, &mut vec![0], &mut used, &mut best);
    best
}

fn tours(gate: &mut Gate) {
    let tol = |x: f64| x * (1.0 + 1e-12) + 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cloud = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Point<f64>> {
        (0..n).map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)]).collect()
    };
    let mut lengthened = 0;
    let mut over_tree = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(3..=15);
        let pts = cloud(&mut rng, n);
        let cycle: Vec<usize> = (0..n).collect();
        let after = two_opt(&cycle, &pts, TWO_OPT_PASSES);
        lengthened += usize::from(path_length(&after, &pts) > tol(path_length(&cycle, &pts)));
        let edges = build_mst(&pts);
        over_tree += usize::from(path_length(&hamiltonian_from_mst(n, &edges), &pts) > tol(2.0 * mst_weight(&edges)));
    }
    let mut over_opt = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let pts = cloud(&mut rng, n);
        let tour = TourGraph::build(&pts, None, TWO_OPT_PASSES);
        over_opt += usize::from(tour.length > tol(2.0 * brute_force_cycle(&pts)));
    }
    gate.report(
        8,
        lengthened == 0 && over_tree == 0 && over_opt == 0,
        format!("2-opt lengthened {lengthened}/10000, double tree over 2xMST {over_tree}/10000, over 2xoptimum {over_opt}/200"),
    );
}

/// One-dimensional Kalman filter with the same adaptive noise rules.
struct ScalarKf {
    x: f64,
    p: f64,
    q: f64,
    r: f64,
    gamma: f64,
}

impl ScalarKf {
    fn step(&mut self, z: f64) {
        self.p += self.q;
        let prior = self.p;
        let k = prior / (prior + self.r);
        let d = z - self.x;
        self.x += k * d;
        self.p = (1.0 - k) * (1.0 - k) * prior + k * k * self.r;
        let y = z - self.x;
        self.q = self.gamma * self.q + (1.0 - self.gamma) * (k * d) * (k * d);
        self.r = self.gamma * self.r + (1.0 - self.gamma) * (y * y + prior);
    }
}

fn oracles(gate: &mut Gate) {
    // Zero wind decouples the rate channel from everything else.
    let cfg = FilterConfig::default();
    let truth = state_vector([100.0, 100.0], [104.0, 97.0, 10.0], 0.0, 0.0, 1.0);
    let mut fs = FilterState::new(truth, &cfg).expect("default config");
    let mut kf = ScalarKf { x: 0.0, p: cfg.initial_cov, q: cfg.process_noise, r: cfg.observation_noise, gamma: cfg.gamma_step };
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut scalar_err = 0.0f64;
    for _ in 0..100 {
        let reading: f64 = 0.4 + rng.gen_range(-0.2..0.2);
        fs.predict(1.0);
        let mut z = observation_model(&fs.mean).0;
        z[channel::RATE] = reading;
        fs.update(&z).expect("well-posed update");
        kf.step(reading);
        scalar_err = scalar_err
            .max((fs.mean[state::RATE] - kf.x).abs())
            .max((fs.cov[(state::RATE, state::RATE)] - kf.p).abs())
            .max((fs.process_noise[(state::RATE, state::RATE)] - kf.q).abs())
            .max((fs.observation_noise[(channel::RATE, channel::RATE)] - kf.r).abs());
    }
    let decoupled = spread_factor(0.0f64) == 0.0;

    let mut worst = 0.0f64;
    let mut solved = 0;
    for _ in 0..10_000 {
        let path: f64 = rng.gen_range(0.0..1000.0);
        let v: f64 = rng.gen_range(1.0..600.0);
        let zeta = rng.gen_range(0.0..0.3);
        let n = rng.gen_range(1..=10);
        let fov = rng.gen_range(1.0..50.0);
        let delta = tub_case2(path, v, zeta, n);
        if let Bound::Finite(t) = case3_root(delta, v, zeta, n, fov) {
            let d = delta.value().expect("finite root implies finite offset");
            let (g, b) = case3_coefficients(v, zeta, n, fov);
            worst = worst.max((g * t * t - b * t + d).abs() / d.max(1.0));
            solved += 1;
        }
    }
    gate.report(
        9,
        decoupled && scalar_err <= SCALAR_TOL && worst <= QUADRATIC_TOL,
        format!("scalar filter max deviation {scalar_err:.1e} over 100 steps; quadratic residual {worst:.1e} over {solved} finite roots of 10000 calls"),
    );
}

fn determinism(gate: &mut Gate) {
    let cfg = evolving_config(7);
    let a = run_scenario(&cfg).expect("valid config").to_csv();
    let b = run_scenario(&cfg).expect("valid config").to_csv();
    let mut ok = a == b;
    let mut parts = vec![format!("scenario CSV identical across runs: {}", a == b)];
    for (e, seeds) in [(Experiment::TubTightness, 40), (Experiment::CoverageVsN, 1), (Experiment::TubConvergence, 2)] {
        let one = run_experiment(e, &ExperimentOptions { seeds: Some(seeds), workers: 1, ..ExperimentOptions::default() });
        let four = run_experiment(e, &ExperimentOptions { seeds: Some(seeds), workers: 4, ..ExperimentOptions::default() });
        let same = one.trials_csv == four.trials_csv && one.summary == four.summary;
        ok &= same;
        parts.push(format!("{e} 1 vs 4 workers identical: {same}"));
    }
    gate.report(10, ok, parts.join("; "));
}

fn main() {
    // Accept libtest flags such as `--nocapture` without interpreting them.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut gate = Gate { failed: 0 };
    tightness(&mut gate);
    requirements(&mut gate);
    coverage(&mut gate);
    convergence(&mut gate);
    mismatch(&mut gate);
    jacobians(&mut gate);
    tours(&mut gate);
    oracles(&mut gate);
    determinism(&mut gate);
    println!("acceptance: {} of 10 criteria failed", gate.failed);
    if gate.failed > 0 {
        std::process::exit(1);
    }
}
