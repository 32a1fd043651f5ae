use firetrack_core::filter::{
    channel, min_eigenvalue, observation_jacobian, observation_model, process_jacobian, process_map, state,
    state_vector, FilterConfig, FilterState, MappingVector, StateVector,
};
use firetrack_core::fire::spread_factor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-4;
// Entries that vanish analytically are compared against this magnitude.
const FLOOR: f64 = 1e-2;

fn random_state(rng: &mut impl Rng) -> StateVector<f64> {
    let q = [rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)];
    let r = rng.gen_range(1.0..40.0);
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    let p = [q[0] + r * a.cos(), q[1] + r * a.sin(), rng.gen_range(5.0..50.0)];
    state_vector(q, p, rng.gen_range(0.0..2.0), rng.gen_range(0.5..10.0), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= REL_TOL * analytic.abs().max(FLOOR)
}

#[test]
fn jacobians_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x = random_state(&mut rng);
        let observer = [x[state::PX], x[state::PY], x[state::PZ]];
        let f = process_jacobian(&x, 1.0);
        let (h, degenerate) = observation_jacobian(&x);
        assert!(!degenerate);
        for j in 0..8 {
            let mut hi = x;
            let mut lo = x;
            hi[j] += STEP;
            lo[j] -= STEP;
            let df = (process_map(&hi, 1.0, observer) - process_map(&lo, 1.0, observer)) / (2.0 * STEP);
            let dh = (observation_model(&hi).0 - observation_model(&lo).0) / (2.0 * STEP);
            for i in 0..8 {
                assert!(close(f[(i, j)], df[i]), "F[{i},{j}] {} vs {} at {x:?}", f[(i, j)], df[i]);
            }
            for i in 0..5 {
                assert!(close(h[(i, j)], dh[i]), "H[{i},{j}] {} vs {} at {x:?}", h[(i, j)], dh[i]);
            }
        }
    }
}

fn true_reading(x: &StateVector<f64>) -> MappingVector<f64> {
    observation_model(x).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_stays_symmetric_psd(seed in any::<u64>(), steps in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_state(&mut rng);
        let mut fs = FilterState::new(truth, &FilterConfig::default()).unwrap();
        for _ in 0..steps {
            fs.predict(1.0);
            prop_assert!(min_eigenvalue(&fs.cov) >= -1e-9);
            let mut z = true_reading(&truth);
            for i in 0..5 {
                z[i] += rng.gen_range(-0.05..0.05);
            }
            fs.update(&z).unwrap();
            prop_assert!((fs.cov - fs.cov.transpose()).amax() <= 1e-12);
            prop_assert!(min_eigenvalue(&fs.cov) >= -1e-9);
            prop_assert!(min_eigenvalue(&fs.observation_noise) >= -1e-9);
        }
    }

    #[test]
    fn residual_is_translation_invariant(seed in any::<u64>(), dx in -300.0..300.0f64, dy in -300.0..300.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_state(&mut rng);
        let mut moved = base;
        for (i, d) in [(state::QX, dx), (state::QY, dy), (state::PX, dx), (state::PY, dy)] {
            moved[i] += d;
        }
        let cfg = FilterConfig { gamma_step: 1.0, ..FilterConfig::default() };
        let mut a = FilterState::new(base, &cfg).unwrap();
        let mut b = FilterState::new(moved, &cfg).unwrap();
        for _ in 0..5 {
            a.predict(1.0);
            b.predict(1.0);
            let noise: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.02..0.02)).collect();
            let mut za = true_reading(&a.mean);
            let mut zb = true_reading(&b.mean);
            for i in 0..5 {
                za[i] += noise[i];
                zb[i] += noise[i];
            }
            a.update(&za).unwrap();
            b.update(&zb).unwrap();
        }
        let diff = (a.project_residual(0) - b.project_residual(0)).amax();
        prop_assert!(diff <= 1e-9, "residual differs by {diff}");
    }
}

#[test]
fn hover_observe_converges_without_noise() {
    let (mut early, mut late) = (0.0, 0.0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = [250.0, 250.0];
        let pose = [250.0 + rng.gen_range(3.0..8.0), 250.0 - rng.gen_range(3.0..8.0), 10.0];
        let truth = state_vector(q, pose, 0.0, 1.0, 0.3);
        let mut guess = truth;
        guess[state::QX] += rng.gen_range(-2.0..2.0);
        guess[state::QY] += rng.gen_range(-2.0..2.0);
        let mut fs = FilterState::new(guess, &FilterConfig::default()).unwrap();
        let err = |fs: &FilterState<f64>| ((fs.mean[state::QX] - q[0]).powi(2) + (fs.mean[state::QY] - q[1]).powi(2)).sqrt();
        early += err(&fs);
        for _ in 0..50 {
            fs.predict(1.0);
            fs.update(&true_reading(&truth)).unwrap();
        }
        late += err(&fs);
    }
    assert!(late < early, "mean error {early} → {late}");
}

/// Plain scalar Kalman filter with the same adaptive noise rules.
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
        let s = prior + self.r;
        let k = prior / s;
        let d = z - self.x;
        self.x += k * d;
        self.p = (1.0 - k) * (1.0 - k) * prior + k * k * self.r;
        let y = z - self.x;
        self.q = self.gamma * self.q + (1.0 - self.gamma) * (k * d) * (k * d);
        self.r = self.gamma * self.r + (1.0 - self.gamma) * (y * y + prior);
    }
}

#[test]
fn spread_rate_channel_reduces_to_scalar_filter() {
    // At zero wind the spread factor vanishes, so the rate channel decouples.
    assert_eq!(spread_factor(0.0f64), 0.0);
    let cfg = FilterConfig::default();
    let truth = state_vector([100.0, 100.0], [104.0, 97.0, 10.0], 0.0, 0.0, 1.0);
    let mut fs = FilterState::new(truth, &cfg).unwrap();
    let mut kf = ScalarKf { x: 0.0, p: cfg.initial_cov, q: cfg.process_noise, r: cfg.observation_noise, gamma: cfg.gamma_step };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let reading: f64 = 0.4 + rng.gen_range(-0.2..0.2);
        fs.predict(1.0);
        let mut z = true_reading(&fs.mean);
        z[channel::RATE] = reading;
        fs.update(&z).unwrap();
        kf.step(reading);
        assert!((fs.mean[state::RATE] - kf.x).abs() <= 1e-10);
        assert!((fs.cov[(state::RATE, state::RATE)] - kf.p).abs() <= 1e-10);
        assert!((fs.process_noise[(state::RATE, state::RATE)] - kf.q).abs() <= 1e-10);
        assert!((fs.observation_noise[(channel::RATE, channel::RATE)] - kf.r).abs() <= 1e-10);
    }
}
