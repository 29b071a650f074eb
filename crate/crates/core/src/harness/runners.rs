use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::result::{AssertionOutcome, ExperimentResult, NeuronRow};
use super::spec::{DecaySpec, ExperimentKind, ExperimentSpec, InitSpec, Orientation, ScheduleSpec, SecondLayerBall, SweepAxis};
use super::{bootstrap_slope, log_log_slope, median, verify};
use crate::error::{Error, Result};
use crate::geometry::{perp_metric, rank_truncate, SubspaceBasis};
use crate::linalg::{norm, svd, Matrix, RngStream};
use crate::model::{init_student, init_symmetric, Sample, StudentNet, TeacherModel};
use crate::optimize::{
    algorithm1, bias_range, default_t_star, pgd_run, select_weight_decay, sgd_train_first_layer,
    sgd_train_first_layer_recording, Algorithm1Config, Algorithm1Diagnostics, FeatureCache, SgdConfig, StepSchedule,
    TrainTrajectory, WeightDecayRule,
};
use crate::population::{mc_population_risk, mc_truncated_risk_gap};

const TEACHER_STREAM: u64 = 100;
const STUDENT_STREAM: u64 = 101;
const RISK_STREAM: u64 = 102;
const PGD_STREAM: u64 = 103;
const COMPRESS_STREAM: u64 = 104;
const GAP_TEST_STREAM: u64 = 105;
const GAP_PROBE_STREAM: u64 = 106;
const BOOTSTRAP_STREAM: u64 = 107;

/// Dispatches on `spec.kind`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let start = Instant::now();
    let mut result = match &spec.kind {
        ExperimentKind::Train => run_train(spec),
        ExperimentKind::Pgd { .. } => run_pgd(spec),
        ExperimentKind::FigureOne { .. } => run_figure_one(spec),
        ExperimentKind::NoDecayControl { .. } => run_no_decay_control(spec),
        ExperimentKind::RateSweep { .. } => run_rate_sweep(spec),
        ExperimentKind::Learnability { .. } => run_learnability(spec),
        ExperimentKind::Compression { .. } => run_compression(spec),
        ExperimentKind::GapProbe { ball, n_probes, .. } => run_gap_probe(spec, *ball, *n_probes),
        ExperimentKind::Verify { .. } => run_verify(spec),
    }?;
    result.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

fn wrong_kind(spec: &ExperimentSpec, want: &str) -> Error {
    Error::Config(format!("expected a {want} spec, got kind {}", spec.kind.label()))
}

/// Teacher for `seed` in dimension `d`.
pub fn build_teacher(spec: &ExperimentSpec, d: usize, seed: u64) -> Result<TeacherModel> {
    let t = &spec.teacher;
    match t.orientation {
        Orientation::Random => {
            let mut rng = RngStream::new(seed, TEACHER_STREAM);
            TeacherModel::random_orthonormal(t.k, d, t.link.clone(), t.noise, &mut rng)
        }
        Orientation::Axis => {
            let u = Matrix::from_fn(t.k, d, |i, j| if i == j { 1.0 } else { 0.0 });
            TeacherModel::new(u, t.link.clone(), t.noise)
        }
    }
}

pub fn build_student(spec: &ExperimentSpec, d: usize, seed: u64) -> Result<StudentNet> {
    let s = &spec.student;
    let mut rng = RngStream::new(seed, STUDENT_STREAM);
    match s.init {
        InitSpec::Random => init_student(s.m, d, s.activation, &mut rng),
        InitSpec::Symmetric { a0, b0 } => init_symmetric(s.m, d, a0, b0, s.activation, &mut rng),
    }
}

/// `λ̃` from the configured rule at the initial network.
pub fn tilde_lambda(spec: &ExperimentSpec, net: &StudentNet, teacher: &TeacherModel, seed: u64) -> Result<f64> {
    let o = &spec.optimizer;
    let gamma = o.gamma;
    let rule = match o.weight_decay {
        DecaySpec::Fixed { tilde_lambda } => return Ok(tilde_lambda),
        DecaySpec::Relu => WeightDecayRule::Relu { gamma },
        DecaySpec::Smooth => {
            let mut rng = RngStream::new(seed, RISK_STREAM);
            let r0 = mc_population_risk(net, teacher, &o.loss, spec.mc_n, &mut rng)?.value;
            WeightDecayRule::Smooth {
                gamma,
                initial_risk: r0,
            }
        }
        DecaySpec::SingleIndex => match spec.student.init {
            InitSpec::Symmetric { a0, b0 } => WeightDecayRule::SingleIndex { gamma, a: a0, b: b0 },
            InitSpec::Random => return Err(Error::Config("single-index weight decay needs a symmetric init".into())),
        },
    };
    Ok(select_weight_decay(rule, net.m())?.1)
}

fn t_star(spec: &ExperimentSpec, tilde: f64) -> usize {
    match spec.optimizer.schedule {
        ScheduleSpec::Decreasing { t_star: Some(t) } => t,
        _ => default_t_star(tilde, spec.optimizer.gamma),
    }
}

fn sgd_config(spec: &ExperimentSpec, m: usize, steps: usize, tilde: f64, seed: u64, decay: bool) -> Result<SgdConfig> {
    let o = &spec.optimizer;
    let schedule = match o.schedule {
        ScheduleSpec::Decreasing { .. } => StepSchedule::decreasing(m, o.gamma, t_star(spec, tilde), steps)?,
        ScheduleSpec::Constant { eta: Some(eta) } => StepSchedule::constant(eta, m, o.gamma, steps)?,
        ScheduleSpec::Constant { eta: None } => StepSchedule::constant_auto(m, o.gamma, steps)?,
    };
    let mut cfg = SgdConfig::new(schedule, if decay { tilde } else { 0.0 }, seed)?;
    if let Some(c) = o.checkpoint_every {
        cfg.checkpoint_every = c;
    }
    Ok(cfg)
}

/// One first-layer SGD run and everything needed to report on it.
pub struct SgdRun {
    pub teacher: TeacherModel,
    pub basis: SubspaceBasis,
    pub initial: StudentNet,
    pub trained: StudentNet,
    pub trajectory: TrainTrajectory,
    pub tilde_lambda: f64,
    pub samples: Vec<Sample>,
}

impl SgdRun {
    pub fn initial_perp(&self) -> f64 {
        self.trajectory.first().map_or(f64::NAN, |r| r.perp_metric)
    }

    pub fn final_perp(&self) -> f64 {
        self.trajectory.last().map_or(f64::NAN, |r| r.perp_metric)
    }
}

/// Builds teacher and student for `seed` and runs SGD for `steps` updates in
/// dimension `d`. With `decay = false` the schedule is unchanged but `λ = 0`.
pub fn sgd_run(spec: &ExperimentSpec, seed: u64, d: usize, steps: usize, decay: bool, record: bool) -> Result<SgdRun> {
    let teacher = build_teacher(spec, d, seed)?;
    let initial = build_student(spec, d, seed)?;
    let basis = SubspaceBasis::from_u(teacher.u())?;
    let tilde = tilde_lambda(spec, &initial, &teacher, seed)?;
    let cfg = sgd_config(spec, initial.m(), steps, tilde, seed, decay)?;
    let loss = &spec.optimizer.loss;
    let (trained, trajectory, samples) = if record {
        sgd_train_first_layer_recording(&initial, &teacher, loss, &cfg, &basis)?
    } else {
        let (n, t) = sgd_train_first_layer(&initial, &teacher, loss, &cfg, &basis)?;
        (n, t, Vec::new())
    };
    Ok(SgdRun {
        teacher,
        basis,
        initial,
        trained,
        trajectory,
        tilde_lambda: tilde,
        samples,
    })
}

fn per_seed<T: Send>(spec: &ExperimentSpec, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    spec.seeds.par_iter().map(|&s| f(s)).collect()
}

fn unit_direction(row: &[f64]) -> [f64; 2] {
    let n = norm(row);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [row[0] / n, row[1] / n]
    }
}

fn neuron_rows(initial: &StudentNet, trained: &StudentNet) -> Vec<NeuronRow> {
    (0..initial.m())
        .map(|j| NeuronRow {
            j,
            init: unit_direction(initial.w().row(j)),
            last: unit_direction(trained.w().row(j)),
        })
        .collect()
}

pub fn run_train(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.kind != ExperimentKind::Train {
        return Err(wrong_kind(spec, "train"));
    }
    let (d, steps) = (spec.teacher.d, spec.optimizer.steps);
    let runs = per_seed(spec, |s| sgd_run(spec, s, d, steps, true, false))?;
    let mut res = ExperimentResult::new(spec);
    let finals: Vec<f64> = runs.iter().map(SgdRun::final_perp).collect();
    res.metric("median_final_perp_metric", median(&mut finals.clone()));
    res.metric("tilde_lambda", runs[0].tilde_lambda);
    res.details = json!({
        "initial_perp_metric": runs.iter().map(SgdRun::initial_perp).collect::<Vec<_>>(),
        "final_perp_metric": finals,
    });
    for (s, r) in spec.seeds.iter().zip(runs) {
        res.trajectories.push((format!("seed{s}"), r.trajectory));
    }
    Ok(res)
}

/// Monte-Carlo gradient descent with `η̃ = eta_factor/λ̃`, `η = mη̃`, checked
/// against `envelope · (1 − η̃γ)^t · perp_metric(0)` at every iterate.
pub fn run_pgd(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::Pgd { eta_factor, envelope } = spec.kind else {
        return Err(wrong_kind(spec, "pgd"));
    };
    let gamma = spec.optimizer.gamma;
    let runs = per_seed(spec, |seed| {
        let d = spec.teacher.d;
        let teacher = build_teacher(spec, d, seed)?;
        let net = build_student(spec, d, seed)?;
        let basis = SubspaceBasis::from_u(teacher.u())?;
        let tilde = tilde_lambda(spec, &net, &teacher, seed)?;
        let m = net.m() as f64;
        let eta_tilde = eta_factor / tilde;
        let mut rng = RngStream::new(seed, PGD_STREAM);
        let (_, traj) = pgd_run(
            &net,
            &teacher,
            &spec.optimizer.loss,
            m * eta_tilde,
            tilde / m,
            spec.optimizer.steps,
            spec.mc_n,
            &basis,
            &mut rng,
        )?;
        let p0 = traj.first().map_or(0.0, |r| r.perp_metric);
        let rate = 1.0 - eta_tilde * gamma;
        let worst = traj
            .rows
            .iter()
            .map(|r| {
                let bound = rate.powi(r.t as i32) * p0;
                if bound > 0.0 {
                    r.perp_metric / bound
                } else if r.perp_metric == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        Ok((traj, worst, eta_tilde, tilde))
    })?;
    let mut res = ExperimentResult::new(spec);
    res.metric("eta_tilde", runs[0].2);
    res.metric("tilde_lambda", runs[0].3);
    res.metric("contraction_rate", 1.0 - runs[0].2 * gamma);
    let mut worst_all = 0.0f64;
    for (s, (traj, worst, _, _)) in spec.seeds.iter().zip(runs) {
        worst_all = worst_all.max(worst);
        res.check(AssertionOutcome::at_most(
            format!("seed {s}: max perp_metric(t) / ((1-eta*gamma)^t perp_metric(0))"),
            worst,
            envelope,
        ));
        res.trajectories.push((format!("seed{s}"), traj));
    }
    res.metric("worst_envelope_ratio", worst_all);
    Ok(res)
}

pub fn run_figure_one(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::FigureOne { max_final_perp } = spec.kind else {
        return Err(wrong_kind(spec, "figure-one"));
    };
    let runs = per_seed(spec, |s| sgd_run(spec, s, 2, spec.optimizer.steps, true, false))?;
    let mut res = ExperimentResult::new(spec);
    res.neurons = neuron_rows(&runs[0].initial, &runs[0].trained);
    let initial: Vec<f64> = runs.iter().map(SgdRun::initial_perp).collect();
    let finals: Vec<f64> = runs.iter().map(SgdRun::final_perp).collect();
    res.metric("tilde_lambda", runs[0].tilde_lambda);
    res.metric("median_initial_perp_metric", median(&mut initial.clone()));
    res.metric("median_final_perp_metric", median(&mut finals.clone()));
    res.details = json!({ "initial_perp_metric": initial, "final_perp_metric": finals });
    for (s, r) in spec.seeds.iter().zip(runs) {
        res.check(AssertionOutcome::below(
            format!("seed {s}: final perp_metric"),
            r.final_perp(),
            max_final_perp,
        ));
        res.trajectories.push((format!("seed{s}"), r.trajectory));
    }
    Ok(res)
}

/// Paired runs from the same start and data stream, with and without weight decay.
pub fn run_no_decay_control(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::NoDecayControl { min_retained } = spec.kind else {
        return Err(wrong_kind(spec, "no-decay control"));
    };
    let steps = spec.optimizer.steps;
    let runs = per_seed(spec, |s| {
        let (off, on) = rayon::join(
            || sgd_run(spec, s, 2, steps, false, false),
            || sgd_run(spec, s, 2, steps, true, false),
        );
        Ok((off?, on?))
    })?;
    let mut res = ExperimentResult::new(spec);
    res.neurons = neuron_rows(&runs[0].0.initial, &runs[0].0.trained);
    let mut ratios_off = Vec::new();
    let mut ratios_on = Vec::new();
    let mut decay_trajs = Vec::new();
    for (s, (off, on)) in spec.seeds.iter().zip(runs) {
        let r_off = off.final_perp() / off.initial_perp();
        let r_on = on.final_perp() / on.initial_perp();
        res.check(AssertionOutcome::above(
            format!("seed {s}: retained perp ratio without decay"),
            r_off,
            min_retained,
        ));
        res.check(AssertionOutcome::below(
            format!("seed {s}: perp ratio with decay minus without"),
            r_on - r_off,
            0.0,
        ));
        ratios_off.push(r_off);
        ratios_on.push(r_on);
        res.trajectories.push((format!("nodecay_seed{s}"), off.trajectory));
        decay_trajs.push((format!("decay_seed{s}"), on.trajectory));
    }
    res.trajectories.extend(decay_trajs);
    res.metric("median_ratio_without_decay", median(&mut ratios_off.clone()));
    res.metric("median_ratio_with_decay", median(&mut ratios_on.clone()));
    res.details = json!({ "ratio_without_decay": ratios_off, "ratio_with_decay": ratios_on });
    Ok(res)
}

/// Median final perp_metric per grid value over seeds, its log-log slope
/// against the grid, and a seed-bootstrap 95% interval for the slope.
pub fn run_rate_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::RateSweep {
        axis,
        ref values,
        slope_min,
        slope_max,
        bootstrap,
    } = spec.kind
    else {
        return Err(wrong_kind(spec, "rate sweep"));
    };
    let mut grid = values.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 3 {
        return Err(Error::InvalidArgument(format!("degenerate sweep grid {values:?}")));
    }
    let jobs: Vec<(usize, u64)> = grid.iter().flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s))).collect();
    let runs: Vec<SgdRun> = jobs
        .par_iter()
        .map(|&(v, s)| match axis {
            SweepAxis::Steps => sgd_run(spec, s, spec.teacher.d, v, true, false),
            SweepAxis::Dim => sgd_run(spec, s, v, spec.optimizer.steps, true, false),
        })
        .collect::<Result<_>>()?;

    let n_seeds = spec.seeds.len();
    let finals: Vec<Vec<f64>> = runs.chunks(n_seeds).map(|c| c.iter().map(SgdRun::final_perp).collect()).collect();
    let xs: Vec<f64> = grid.iter().map(|&v| v as f64).collect();
    let medians: Vec<f64> = finals.iter().map(|f| median(&mut f.clone())).collect();
    let slope = log_log_slope(&xs, &medians)?;
    let mut rng = RngStream::new(spec.seeds[0], BOOTSTRAP_STREAM);
    let (lo, hi) = bootstrap_slope(&xs, &finals, bootstrap, &mut rng)?;

    let mut res = ExperimentResult::new(spec);
    res.metric("slope", slope);
    res.metric("slope_ci_low", lo);
    res.metric("slope_ci_high", hi);
    res.check(AssertionOutcome::above("slope lower limit", slope, slope_min));
    res.check(AssertionOutcome::below("slope upper limit", slope, slope_max));
    let axis_name = match axis {
        SweepAxis::Steps => "steps",
        SweepAxis::Dim => "d",
    };
    res.details = json!({
        "axis": axis_name,
        "grid": grid,
        "median_final_perp_metric": medians,
        "final_perp_metric": finals,
    });
    let mut table = String::from("value,seed,final_perp_metric\n");
    for ((v, s), r) in jobs.iter().zip(&runs) {
        let _ = writeln!(table, "{v},{s},{}", r.final_perp());
    }
    res.tables.push(("points.csv".into(), table));
    for ((v, s), r) in jobs.into_iter().zip(runs) {
        res.trajectories.push((format!("{axis_name}{v}_seed{s}"), r.trajectory));
    }
    Ok(res)
}

/// Two-phase training per seed at `T` and (optionally) `compare_factor · T`.
pub fn run_learnability(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::Learnability {
        steps_prime_factor,
        ref lambda_prime,
        delta_conf,
        test_samples,
        max_excess,
        min_alignment,
        compare_factor,
    } = spec.kind
    else {
        return Err(wrong_kind(spec, "learnability"));
    };
    let InitSpec::Symmetric { a0, b0 } = spec.student.init else {
        return Err(Error::Config("learnability runs need a symmetric init".into()));
    };
    let base_steps = spec.optimizer.steps;
    let mut horizons = vec![base_steps];
    if compare_factor > 1 {
        horizons.push(compare_factor * base_steps);
    }
    let jobs: Vec<(usize, u64)> = horizons.iter().flat_map(|&t| spec.seeds.iter().map(move |&s| (t, s))).collect();
    let runs: Vec<Algorithm1Diagnostics> = jobs
        .par_iter()
        .map(|&(steps, seed)| {
            let teacher = build_teacher(spec, spec.teacher.d, seed)?;
            let mut cfg = Algorithm1Config {
                m: spec.student.m,
                a0,
                b0,
                gamma: spec.optimizer.gamma,
                t_star: 0,
                steps,
                steps_prime: steps_prime_factor * steps,
                lambda_prime: lambda_prime.clone(),
                bias_range: bias_range(steps, delta_conf),
                seed,
                test_samples,
            };
            cfg.t_star = t_star(spec, cfg.weight_decay()?.1);
            Ok(algorithm1(&teacher, &cfg, &spec.optimizer.loss)?.1)
        })
        .collect::<Result<_>>()?;

    let n = spec.seeds.len();
    let mut res = ExperimentResult::new(spec);
    let mut per_horizon = Vec::new();
    let mut medians = Vec::new();
    for (h, chunk) in horizons.iter().zip(runs.chunks(n)) {
        let excess: Vec<f64> = chunk.iter().map(|d| d.excess_truncated_risk).collect();
        let align: Vec<f64> = chunk.iter().map(|d| d.alignment.abs()).collect();
        let med_excess = median(&mut excess.clone());
        let med_align = median(&mut align.clone());
        res.metric(format!("median_excess_risk_T{h}"), med_excess);
        res.metric(format!("median_abs_alignment_T{h}"), med_align);
        medians.push(med_excess);
        per_horizon.push(json!({
            "steps": h,
            "excess_truncated_risk": excess,
            "excess_stderr": chunk.iter().map(|d| d.excess_stderr).collect::<Vec<_>>(),
            "abs_alignment": align,
            "perp_norm": chunk.iter().map(|d| d.perp_norm).collect::<Vec<_>>(),
            "lambda_prime": chunk.iter().map(|d| d.lambda_prime).collect::<Vec<_>>(),
            "lambda_prime_scores": chunk.iter().map(|d| d.lambda_prime_scores.clone()).collect::<Vec<_>>(),
            "rows_identical": chunk.iter().all(|d| d.rows_identical),
        }));
        if *h == base_steps {
            res.check(AssertionOutcome::below("median excess truncated risk", med_excess, max_excess));
            res.check(AssertionOutcome::above("median |alignment|", med_align, min_alignment));
        }
    }
    if medians.len() == 2 {
        res.check(AssertionOutcome::at_most(
            format!("median excess risk at {}T minus at T", compare_factor),
            medians[1] - medians[0],
            0.0,
        ));
    }
    let first = &runs[0];
    res.metric("lambda", first.lambda);
    res.metric("tilde_lambda", first.tilde_lambda);
    res.metric("bias_range", first.bias_range);
    res.details = json!({ "horizons": per_horizon });
    for ((t, s), d) in jobs.into_iter().zip(runs) {
        res.trajectories.push((format!("T{t}_seed{s}"), d.trajectory));
    }
    Ok(res)
}

/// Risk change from replacing the trained `W` by its best rank-`k`
/// approximation, against `√2·τ·‖a‖₂·‖W − π_k(W)‖_F`.
pub fn run_compression(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::Compression {
        rank,
        stderr_factor,
        test_samples,
    } = spec.kind
    else {
        return Err(wrong_kind(spec, "compression"));
    };
    let k = rank.unwrap_or(spec.teacher.k);
    let tau = spec.optimizer.loss.tau;
    let runs = per_seed(spec, |seed| {
        let run = sgd_run(spec, seed, spec.teacher.d, spec.optimizer.steps, true, false)?;
        let w = run.trained.w();
        let wk = rank_truncate(w, k)?;
        let dist = w.sub(&wk)?.frobenius_norm();
        let tail: f64 = svd(w)?.singular_values.iter().skip(k).map(|s| s * s).sum();
        let ey = (dist * dist - tail).abs() / w.frobenius_norm().powi(2).max(1.0);
        let compressed = run.trained.with_w(wk)?;
        let mut rng = RngStream::new(seed, COMPRESS_STREAM);
        let est = mc_truncated_risk_gap(&run.trained, &compressed, &run.teacher, &spec.optimizer.loss, test_samples, &mut rng)?;
        let (gap, se) = (est.value, est.stderr);
        let bound = std::f64::consts::SQRT_2 * tau * norm(run.trained.a()) * dist;
        let perp = perp_metric(w, &run.basis)?;
        Ok((run.trajectory, gap, se, bound, ey, dist, perp))
    })?;
    let mut res = ExperimentResult::new(spec);
    let mut rows = Vec::new();
    for (s, (traj, gap, se, bound, ey, dist, perp)) in spec.seeds.iter().zip(runs) {
        let mut a = AssertionOutcome::at_most(
            format!("seed {s}: |gap| - {stderr_factor}*stderr vs Lipschitz bound"),
            gap.abs() - stderr_factor * se,
            bound,
        );
        a.detail = format!("{}; gap {gap} ± {se}", a.detail);
        res.check(a);
        res.check(AssertionOutcome::at_most(
            format!("seed {s}: Eckart-Young residual identity"),
            ey,
            1e-10,
        ));
        rows.push(json!({
            "seed": s, "gap": gap, "stderr": se, "lipschitz_bound": bound,
            "truncation_distance": dist, "perp_metric": perp, "eckart_young_error": ey,
        }));
        res.trajectories.push((format!("seed{s}"), traj));
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r["gap"].as_f64().unwrap_or(f64::NAN).abs()).collect();
    res.metric("median_abs_gap", median(&mut gaps.clone()));
    res.metric("rank", k as f64);
    res.details = json!({ "runs": rows });
    Ok(res)
}

/// Uniform draw from `S`: `a` uniform in the Euclidean ball of radius
/// `r_a/√m`, `b` uniform in `[−r_b, r_b]^m`.
fn draw_from_ball(ball: SecondLayerBall, m: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
    let mut a: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
    let n = norm(&a);
    let radius = ball.r_a / (m as f64).sqrt() * rng.uniform(0.0, 1.0).powf(1.0 / m as f64);
    if n > 0.0 {
        a.iter_mut().for_each(|v| *v *= radius / n);
    }
    let b = (0..m).map(|_| rng.uniform(-ball.r_b, ball.r_b)).collect();
    (a, b)
}

/// Lower bound on `sup_S |R̂_τ − R_τ|` at the trained first layer: `R̂_τ` on the
/// stored training samples, `R_τ` on fresh test samples, maximized over
/// `n_probes` uniform draws from `S`.
pub fn run_gap_probe(spec: &ExperimentSpec, ball: SecondLayerBall, n_probes: usize) -> Result<ExperimentResult> {
    let ExperimentKind::GapProbe { test_samples, .. } = spec.kind else {
        return Err(wrong_kind(spec, "gap probe"));
    };
    ball.validate()?;
    if n_probes == 0 {
        return Err(Error::InvalidArgument("n_probes must be >= 1".into()));
    }
    let loss = spec.optimizer.loss;
    let runs = per_seed(spec, |seed| {
        let run = sgd_run(spec, seed, spec.teacher.d, spec.optimizer.steps, true, true)?;
        let net = &run.trained;
        let train = FeatureCache::new(net, run.samples.iter().map(|s| &s.x))?;
        let train_y: Vec<f64> = run.samples.iter().map(|s| s.y).collect();
        let mut rng = RngStream::new(seed, GAP_TEST_STREAM);
        let test: Vec<Sample> = (0..test_samples).map(|_| run.teacher.sample(&mut rng)).collect();
        let test_cache = FeatureCache::new(net, test.iter().map(|s| &s.x))?;
        let risk = |cache: &FeatureCache, ys: &[f64], a: &[f64], b: &[f64]| {
            (0..cache.len()).map(|i| loss.truncated(cache.predict(i, a, b), ys[i])).sum::<f64>() / cache.len() as f64
        };
        let test_y: Vec<f64> = test.iter().map(|s| s.y).collect();
        let mut probe_rng = RngStream::new(seed, GAP_PROBE_STREAM);
        let mut probes = Vec::with_capacity(n_probes);
        for _ in 0..n_probes {
            let (a, b) = draw_from_ball(ball, net.m(), &mut probe_rng);
            let emp = risk(&train, &train_y, &a, &b);
            let pop = risk(&test_cache, &test_y, &a, &b);
            probes.push((emp, pop));
        }
        Ok((run.trajectory, probes))
    })?;

    let mut res = ExperimentResult::new(spec);
    let mut table = String::from("seed,probe,emp_risk,test_risk,abs_gap,running_max\n");
    let mut maxima = Vec::new();
    let mut rows = Vec::new();
    for (s, (traj, probes)) in spec.seeds.iter().zip(runs) {
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut monotone = true;
        let mut prev = f64::NEG_INFINITY;
        for (i, (emp, pop)) in probes.iter().enumerate() {
            let g = (emp - pop).abs();
            if g > best.0 {
                best = (g, i);
            }
            monotone &= best.0 >= prev;
            prev = best.0;
            let _ = writeln!(table, "{s},{i},{emp},{pop},{g},{}", best.0);
        }
        res.check(AssertionOutcome::above(
            format!("seed {s}: running maximum is non-decreasing"),
            if monotone { 1.0 } else { 0.0 },
            0.5,
        ));
        maxima.push(best.0);
        let (emp, pop) = probes[best.1];
        rows.push(json!({ "seed": s, "max_gap": best.0, "argmax_probe": best.1, "emp_risk": emp, "test_risk": pop }));
        res.trajectories.push((format!("seed{s}"), traj));
    }
    res.metric("median_max_gap", median(&mut maxima.clone()));
    res.details = json!({ "ball": { "r_a": ball.r_a, "r_b": ball.r_b }, "n_probes": n_probes, "runs": rows });
    res.tables.push(("probes.csv".into(), table));
    Ok(res)
}

pub fn run_verify(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let ExperimentKind::Verify { corrupt_gradient, n } = spec.kind else {
        return Err(wrong_kind(spec, "verify"));
    };
    let outcomes = spec
        .seeds
        .par_iter()
        .map(|&s| verify::verify_suite(s, n, corrupt_gradient))
        .collect::<Result<Vec<_>>>()?;
    let mut res = ExperimentResult::new(spec);
    let mut table = String::from("seed,check,passed,value,threshold\n");
    for (s, checks) in spec.seeds.iter().zip(outcomes) {
        for c in checks {
            let _ = writeln!(table, "{s},\"{}\",{},{},{}", c.name, c.passed, c.value, c.threshold);
            res.check(c);
        }
    }
    res.metric("checks", res.assertions.len() as f64);
    res.metric("failed", res.failures().count() as f64);
    res.tables.push(("checks.csv".into(), table));
    Ok(res)
}
