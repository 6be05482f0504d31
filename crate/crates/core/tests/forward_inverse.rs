use std::collections::BTreeMap;

use flock_ioc_core::ioc::{assemble_gram_single, sum_grams};
use flock_ioc_core::lqt::tracking_cost;
use flock_ioc_core::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

const C_TRUE: [f64; 9] = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 5.0, 5.0, 1.0];

fn leader(len: usize, dt: f64, f: impl Fn(f64) -> ([f64; 3], [f64; 3])) -> SampledTrajectory {
    let states = (0..len)
        .map(|k| {
            let (p, v) = f(k as f64 * dt);
            StateVec::new(p, v)
        })
        .collect();
    SampledTrajectory::new(0.0, dt, states, vec![ControlVec::zeros(); len]).unwrap()
}

fn spiral(len: usize, dt: f64) -> SampledTrajectory {
    leader(len, dt, |t| ([t.sin(), t.cos(), 0.1 * t], [t.cos(), -t.sin(), 0.1]))
}

fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    if want == 0.0 {
        got.abs() <= tol
    } else {
        ((got - want) / want).abs() <= tol
    }
}

fn max_rel_deviation(a: &SampledTrajectory, b: &SampledTrajectory) -> f64 {
    let mut dev: f64 = 0.0;
    let mut mag: f64 = 0.0;
    for k in 0..a.len() {
        dev = dev.max((a.state(k).0 - b.state(k).0).amax());
        mag = mag.max(b.state(k).0.amax());
    }
    dev / mag.max(1e-300)
}

#[test]
fn riccati_solution_matches_collocation_qp() {
    let c = WeightVector::new(C_TRUE).unwrap();
    let desired = spiral(501, 0.02);
    let x0 = *desired.state(0);
    let fwd = solve_tracking(&c, &desired, &x0).unwrap();
    let qp = direct_qp_oracle(&c, &desired, &x0).unwrap();
    assert!(max_rel_deviation(&fwd, &qp.trajectory) <= 1e-3);
    let fwd_cost = tracking_cost(&c, &fwd, &desired).unwrap();
    assert!((fwd_cost - qp.objective).abs() <= 1e-3 * qp.objective.max(1e-12));
}

#[test]
fn riccati_matches_qp_on_random_instances() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..5 {
        let horizon: f64 = rng.random_range(1.0..=4.0);
        let len = (horizon / 0.02).round() as usize + 1;
        let mut c = [0.0; 9];
        for (i, v) in c.iter_mut().enumerate() {
            *v = if i < 6 { rng.random_range(0.0..5.0) } else { rng.random_range(0.5..5.0) };
        }
        let c = WeightVector::new(c).unwrap();
        let amp: [f64; 3] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let w: [f64; 3] = [rng.random_range(0.3..2.0), rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)];
        let desired = leader(len, 0.02, |t| {
            (
                [amp[0] * (w[0] * t).sin(), amp[1] * (w[1] * t).cos(), amp[2] * (w[2] * t).sin()],
                [amp[0] * w[0] * (w[0] * t).cos(), -amp[1] * w[1] * (w[1] * t).sin(), amp[2] * w[2] * (w[2] * t).cos()],
            )
        });
        let x0 = StateVec::new(
            [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        );
        let fwd = solve_tracking(&c, &desired, &x0).unwrap();
        let qp = direct_qp_oracle(&c, &desired, &x0).unwrap();
        let dev = max_rel_deviation(&fwd, &qp.trajectory);
        assert!(dev <= 1e-3, "deviation {dev}");
    }
}

#[test]
fn optimal_data_satisfies_stationarity() {
    let c = WeightVector::new(C_TRUE).unwrap();
    let desired = spiral(501, 0.02);
    let x0 = StateVec::new([0.3, 0.8, -0.2], [0.0; 3]);
    let traj = solve_tracking(&c, &desired, &x0).unwrap();
    let w = gram_for_flight(&traj, &desired).unwrap();
    let ev = w.eigenvalues();
    let cv = c.values();
    let ratio = (cv.transpose() * w.w * cv)[0] / (ev[8] * cv.norm_squared() * traj.duration());
    assert!(ratio <= 1e-6, "{ratio:e}");
    assert!(w.asymmetry() <= 1e-10 * w.w.amax());
    assert!(ev[0] >= -1e-8 * ev[8]);
}

#[test]
fn costate_sweep_matches_refined_reference() {
    // Constant error e = [1, 0, 0, 0, 0, 0] over [0, 4].
    let dt = 0.05;
    let len = 81;
    let target = SampledTrajectory::constant(0.0, dt, len, StateVec::new([1.0, 0.0, 0.0], [0.0; 3])).unwrap();
    let here = SampledTrajectory::constant(0.0, dt, len, StateVec::zeros()).unwrap();
    let l = integrate_costate_basis(&here, &target).unwrap();

    // Reference: explicit midpoint rule on the first column with step dt/100, from t_f backward.
    // Column 1 evolves as l1' = 2, l4' = -l1.
    let h = dt / 100.0;
    let (mut l1, mut l4) = (0.0f64, 0.0f64);
    for _ in 0..(len - 1) * 100 {
        let m1 = l1 - 0.5 * h * 2.0;
        l1 -= h * 2.0;
        l4 += h * m1;
    }
    let got = l.get(0);
    assert!(((got[(0, 0)] - l1) / l1).abs() <= 1e-6);
    assert!(((got[(3, 0)] - l4) / l4).abs() <= 1e-6);
    for (i, j) in [(1, 0), (2, 0), (4, 0), (5, 0), (0, 6)] {
        assert_eq!(got[(i, j)], 0.0);
    }
}

fn recover(known: &KnownWeights, c_true: [f64; 9]) -> IocSolution {
    let c = WeightVector::new(c_true).unwrap();
    let desired = spiral(501, 0.02);
    let x0 = StateVec::new([0.3, 0.8, -0.2], [0.0; 3]);
    let traj = solve_tracking(&c, &desired, &x0).unwrap();
    let w = gram_for_flight(&traj, &desired).unwrap();
    solve_weights(&w, known, SolveOptions::default()).unwrap()
}

#[test]
fn weights_recovered_with_control_weights_pinned() {
    let known = KnownWeights::new([(6, 5.0), (7, 5.0), (8, 1.0)]).unwrap();
    let sol = recover(&known, C_TRUE);
    assert!(sol.unique);
    for (got, want) in sol.c_hat.values().iter().zip(C_TRUE) {
        assert!(rel_close(*got, want, 1e-2), "{} vs {:?}", sol.c_hat, C_TRUE);
    }
}

#[test]
fn single_pin_only_identifies_its_own_axis() {
    // The axes decouple; pinning r_z leaves the x and y weight triples free,
    // and the minimizer sends them to zero.
    let sol = recover(&KnownWeights::default_normalization(), C_TRUE);
    let c = sol.c_hat.values();
    assert!(rel_close(c[2], 1.0, 1e-2) && rel_close(c[5], 2.0, 1e-2));
    for i in [0, 1, 3, 4, 6, 7] {
        assert!(c[i].abs() < 1e-3, "{}", sol.c_hat);
    }
}

#[test]
fn normalization_invariance() {
    let beta = 3.0;
    let scaled: [f64; 9] = C_TRUE.map(|v| v * beta);
    let pins = |vals: [f64; 3]| KnownWeights::new([(6, vals[0]), (7, vals[1]), (8, vals[2])]).unwrap();
    let sol = recover(&pins([15.0, 15.0, 3.0]), scaled);
    for (got, want) in sol.c_hat.values().iter().zip(scaled) {
        assert!(rel_close(*got, want, 1e-2));
    }
    // Pinning r_z to one on the scaled problem divides the z-axis weights by c_9.
    let sol = recover(&pins([5.0, 5.0, 1.0]), scaled);
    for (got, want) in sol.c_hat.values().iter().zip(C_TRUE) {
        assert!(rel_close(*got, want, 1e-2));
    }
}

fn axis_flight(axis: usize) -> (SampledTrajectory, SampledTrajectory) {
    let c = WeightVector::new(C_TRUE).unwrap();
    let desired = leader(301, 0.02, |t| {
        let mut p = [0.0; 3];
        let mut v = [0.0; 3];
        p[axis] = t.sin();
        v[axis] = t.cos();
        (p, v)
    });
    let traj = solve_tracking(&c, &desired, &StateVec::zeros()).unwrap();
    (traj, desired)
}

#[test]
fn stacking_orthogonal_flights_adds_rank() {
    let (tx, dx) = axis_flight(0);
    let (ty, dy) = axis_flight(1);
    let wx = gram_for_flight(&tx, &dx).unwrap();
    let wy = gram_for_flight(&ty, &dy).unwrap();
    let both = assemble_gram_multi([(&tx, &dx), (&ty, &dy)]).unwrap();
    assert!(both.rank() > wx.rank() && both.rank() > wy.rank());
    let sum = sum_grams(&wx, &wy);
    let rel = (both.w - sum.w).amax() / sum.w.amax();
    assert!(rel <= 1e-12);
    let dup = assemble_gram_multi([(&tx, &dx), (&tx, &dx)]).unwrap();
    assert_eq!(dup.rank(), wx.rank());
}

#[test]
fn flock_rollout_feeds_inverse_problem() {
    let h = FlockHierarchy::default_pigeons();
    let weights: BTreeMap<String, WeightVector> =
        h.followers().into_iter().map(|f| (f.to_string(), WeightVector::new(C_TRUE).unwrap())).collect();
    let init: BTreeMap<String, StateVec> =
        h.followers().into_iter().map(|f| (f.to_string(), StateVec::new([0.5, -0.5, 0.3], [0.0; 3]))).collect();
    let out = rollout_hierarchy(&h, &spiral(401, 0.02), &weights, &init).unwrap();
    assert_eq!(out.len(), 10);
    let known = KnownWeights::new([(6, 5.0), (7, 5.0), (8, 1.0)]).unwrap();
    for pair in h.pairs() {
        let desired = make_desired(&out[&pair.leader], pair.delay).unwrap();
        let traj = &out[&pair.follower];
        let basis = integrate_costate_basis(traj, &desired).unwrap();
        let w = assemble_gram_single(traj, &desired, &basis).unwrap();
        let sol = solve_weights(&w, &known, SolveOptions::default()).unwrap();
        for (got, want) in sol.c_hat.values().iter().zip(C_TRUE) {
            assert!(rel_close(*got, want, 1e-2), "{}: {}", pair.follower, sol.c_hat);
        }
    }
}

#[test]
fn perfect_tracking_without_control_is_rank_deficient() {
    let still = SampledTrajectory::constant(0.0, 0.02, 201, StateVec::new([1.0, 2.0, 3.0], [0.0; 3])).unwrap();
    let w = gram_for_flight(&still, &still).unwrap();
    let sol = solve_weights(&w, &KnownWeights::default_normalization(), SolveOptions::default()).unwrap();
    assert!(!sol.unique);
    let d = diagnose(&w, &KnownWeights::default_normalization());
    assert_eq!(d.null_space.len(), 8);
}
