//! Trend and sanity checks on the experiment runners and estimators, at
//! reduced scale where the full one is covered by the acceptance suite.

use principal_subspace::geometry::{perp_metric, SubspaceBasis};
use principal_subspace::harness::{
    build_student, build_teacher, median, run_compression, run_gap_probe, run_no_decay_control, run_rate_sweep,
    ExperimentKind, ExperimentSpec, ScheduleSpec, SecondLayerBall, SweepAxis,
};
use principal_subspace::linalg::{Matrix, RngStream};
use principal_subspace::model::{init_student, Activation, Link, Loss, Noise, Sample, StudentNet, TeacherModel};
use principal_subspace::optimize::{grad_first_layer, regularized_empirical_risk, train_second_layer};
use principal_subspace::population::mc_truncated_risk_gap;

#[test]
fn initial_perp_metric_of_random_init_in_two_dimensions() {
    let spec = ExperimentSpec::preset("fig1").unwrap();
    for seed in 1..=100 {
        let t = build_teacher(&spec, 2, seed).unwrap();
        let net = build_student(&spec, 2, seed).unwrap();
        let p = perp_metric(net.w(), &SubspaceBasis::from_u(t.u()).unwrap()).unwrap();
        assert!((0.5..=0.9).contains(&p), "seed {seed}: {p}");
    }
}

#[test]
fn zero_step_size_without_decay_keeps_ratio_exactly_one() {
    let mut spec = ExperimentSpec::preset("nodecay").unwrap();
    spec.student.m = 50;
    spec.optimizer.steps = 500;
    spec.optimizer.schedule = ScheduleSpec::Constant { eta: Some(0.0) };
    let r = run_no_decay_control(&spec).unwrap();
    assert_eq!(r.details["ratio_without_decay"][0].as_f64(), Some(1.0));
}

#[test]
fn perp_metric_grows_like_root_d() {
    let mut spec = ExperimentSpec::preset("sweep").unwrap();
    spec.kind = ExperimentKind::RateSweep {
        axis: SweepAxis::Dim,
        values: vec![8, 16, 32],
        slope_min: 0.25,
        slope_max: 0.75,
        bootstrap: 200,
    };
    spec.seeds = (1..=5).collect();
    let r = run_rate_sweep(&spec).unwrap();
    println!("d-sweep slope {} CI [{}, {}]", r.metrics["slope"], r.metrics["slope_ci_low"], r.metrics["slope_ci_high"]);
    assert!(r.passed, "{:?}", r.assertions);
}

#[test]
fn compression_gap_shrinks_with_steps() {
    let mut spec = ExperimentSpec::preset("compress").unwrap();
    spec.student.m = 100;
    spec.seeds = (1..=5).collect();
    let mut medians = Vec::new();
    for steps in [1 << 12, 1 << 16] {
        spec.optimizer.steps = steps;
        let r = run_compression(&spec).unwrap();
        assert!(r.passed, "{:?}", r.assertions);
        medians.push(r.metrics["median_abs_gap"]);
    }
    println!("median |gap| at T=2^12, 2^16: {medians:?}");
    assert!(medians[1] <= medians[0]);
}

#[test]
fn rank_deficient_first_layer_has_zero_gap() {
    let mut rng = RngStream::new(3, 0);
    let t = TeacherModel::random_orthonormal(1, 4, Link::TanhOfSum, Noise::None, &mut rng).unwrap();
    let c: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let v: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let w = Matrix::from_fn(6, 4, |i, j| c[i] * v[j]);
    let net = StudentNet::new(w.clone(), vec![0.3; 6], vec![0.5; 6], Activation::Relu).unwrap();
    let compressed = net.with_w(principal_subspace::geometry::rank_truncate(&w, 1).unwrap()).unwrap();
    let g = mc_truncated_risk_gap(&net, &compressed, &t, &Loss::huber(), 50_000, &mut rng).unwrap();
    assert!(g.value.abs() <= 2.0 * g.stderr + 1e-12, "{} ± {}", g.value, g.stderr);
}

#[test]
fn probe_maximum_shrinks_with_steps() {
    let spec0 = ExperimentSpec::preset("gap").unwrap();
    let mut maxima = Vec::new();
    for steps in [1 << 12, 1 << 14] {
        let mut spec = spec0.clone();
        spec.optimizer.steps = steps;
        let ExperimentKind::GapProbe { ball, n_probes, .. } = spec.kind else { unreachable!() };
        let r = run_gap_probe(&spec, ball, n_probes).unwrap();
        assert!(r.passed);
        maxima.push(r.metrics["median_max_gap"]);
    }
    println!("median probe max at T=2^12, 2^14: {maxima:?}");
    assert!(maxima[1] < maxima[0]);
}

#[test]
fn single_probe_at_zero_second_layer_is_small() {
    // a = 0 predicts 0 everywhere; the gap is then the train/test difference of ℓ(0, y) ∧ τ
    let mut spec = ExperimentSpec::preset("gap").unwrap();
    spec.seeds = vec![1];
    spec.optimizer.steps = 1 << 14;
    let tiny = SecondLayerBall::new(1e-300, 1.0).unwrap();
    let r = run_gap_probe(&spec, tiny, 1).unwrap();
    let gap = r.metrics["median_max_gap"];
    // ℓ ∧ τ ≤ 1, so the train-mean stderr is at most 1/√T
    assert!(gap < 3.0 / (spec.optimizer.steps as f64).sqrt(), "{gap}");
}

#[test]
fn truncated_risk_is_lipschitz_in_first_layer() {
    let loss = Loss::huber();
    for seed in 0..10 {
        let mut rng = RngStream::new(seed, 0);
        let t = TeacherModel::random_orthonormal(2, 5, Link::TanhOfSum, Noise::Gaussian { sigma: 0.3 }, &mut rng).unwrap();
        let act = [Activation::Tanh, Activation::Relu][seed as usize % 2];
        let mut a = init_student(8, 5, act, &mut rng).unwrap();
        a.set_a((0..8).map(|_| rng.normal() / 8f64.sqrt()).collect()).unwrap();
        let w2 = Matrix::from_fn(8, 5, |i, j| a.w()[(i, j)] + 0.3 * rng.normal());
        let b = a.with_w(w2.clone()).unwrap();
        let g = mc_truncated_risk_gap(&a, &b, &t, &loss, 50_000, &mut rng).unwrap();
        let beta1 = act.bounds().beta1;
        let an = a.a().iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = std::f64::consts::SQRT_2 * loss.tau * beta1 * an * w2.sub(a.w()).unwrap().frobenius_norm();
        assert!(g.value.abs() <= bound + 5.0 * g.stderr, "seed {seed}: {} vs {bound}", g.value);
    }
}

#[test]
fn gradient_noise_moments_are_sub_gaussian() {
    let loss = Loss::huber();
    let n = 100_000;
    for seed in 0..3 {
        let mut rng = RngStream::new(seed, 0);
        let t = TeacherModel::random_orthonormal(1, 6, Link::TanhOfSum, Noise::Gaussian { sigma: 0.5 }, &mut rng).unwrap();
        let mut net = init_student(5, 6, Activation::Tanh, &mut rng).unwrap();
        net.set_a((0..5).map(|_| rng.normal()).collect()).unwrap();
        let mut v = Matrix::from_fn(5, 6, |_, _| rng.normal());
        v.scale_in_place(1.0 / v.frobenius_norm());
        let proj: Vec<f64> = (0..n)
            .map(|_| {
                let s: Sample = t.sample(&mut rng);
                grad_first_layer(&net, &loss, &s).unwrap().frobenius_inner(&v).unwrap()
            })
            .collect();
        let mean = proj.iter().sum::<f64>() / n as f64;
        let an = net.a().iter().map(|x| x * x).sum::<f64>().sqrt();
        let bound = 3.0 * Activation::Tanh.bounds().beta1 * an * 1.0;
        for p in [2.0f64, 4.0, 6.0] {
            let moment = proj.iter().map(|x| (x - mean).abs().powf(p)).sum::<f64>() / n as f64;
            let ratio = moment.powf(1.0 / p) / p.sqrt();
            assert!(ratio <= bound, "seed {seed}, p={p}: {ratio} > {bound}");
        }
    }
}

#[test]
fn second_layer_objective_decreases_in_expectation() {
    let (mut late, mut early) = (0.0, 0.0);
    let lp = 0.05;
    let steps = 8_000;
    for seed in 0..20 {
        let mut rng = RngStream::new(seed, 0);
        let t = TeacherModel::random_orthonormal(1, 4, Link::MonotonePoly { c: 0.1 }, Noise::Gaussian { sigma: 0.1 }, &mut rng)
            .unwrap();
        let net = init_student(30, 4, Activation::Relu, &mut rng).unwrap();
        let data: Vec<Sample> = (0..500).map(|_| t.sample(&mut rng)).collect();
        for (horizon, acc) in [(steps, &mut late), (steps / 4, &mut early)] {
            let a = train_second_layer(&net, &data, &Loss::huber(), lp, horizon, &mut RngStream::new(seed, 9)).unwrap();
            let mut trained = net.clone();
            trained.set_a(a).unwrap();
            *acc += regularized_empirical_risk(&trained, &data, &Loss::huber(), lp).unwrap() / 20.0;
        }
    }
    assert!(late < early, "{late} vs {early}");
}

#[test]
fn median_of_seed_values_is_order_free() {
    let mut a = vec![0.3, 0.1, 0.2, 0.5];
    let mut b = vec![0.5, 0.2, 0.3, 0.1];
    assert_eq!(median(&mut a), median(&mut b));
}
