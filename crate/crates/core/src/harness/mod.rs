//! Config-driven experiments: a serializable [`ExperimentSpec`], one runner per
//! experiment kind, and artifact writers (`trajectory.csv`, `summary.json`,
//! `neurons.csv`). Independent runs execute in parallel and are reduced in
//! seed order, so results do not depend on the thread count.

mod result;
mod runners;
mod spec;
pub mod verify;

pub use result::{AssertionOutcome, ExperimentResult, NeuronRow, NEURONS_HEADER};
pub use runners::{
    build_student, build_teacher, run_compression, run_experiment, run_figure_one, run_gap_probe, run_learnability,
    run_no_decay_control, run_pgd, run_rate_sweep, run_train, run_verify, sgd_run, tilde_lambda, SgdRun,
};
pub use spec::{
    DecaySpec, ExperimentKind, ExperimentSpec, InitSpec, OptimizerSpec, Orientation, ScheduleSpec, SecondLayerBall,
    StudentSpec, SweepAxis, TeacherSpec,
};

use crate::error::{Error, Result};
use crate::linalg::RngStream;

/// Median; sorts `v` in place. NaN for an empty slice.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope needs >= 2 paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log slope needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate grid: all x equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Percentile 95% interval of the log-log slope of per-point medians, resampling
/// the seeds at each grid point with replacement `reps` times.
pub fn bootstrap_slope(x: &[f64], samples: &[Vec<f64>], reps: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if reps == 0 {
        let s = log_log_slope(x, &samples.iter().map(|v| median(&mut v.clone())).collect::<Vec<_>>())?;
        return Ok((s, s));
    }
    let mut slopes = Vec::with_capacity(reps);
    let mut medians = vec![0.0; samples.len()];
    let mut buf = Vec::new();
    for _ in 0..reps {
        for (m, v) in medians.iter_mut().zip(samples) {
            buf.clear();
            buf.extend((0..v.len()).map(|_| v[rng.index(v.len())]));
            *m = median(&mut buf);
        }
        slopes.push(log_log_slope(x, &medians)?);
    }
    slopes.sort_by(f64::total_cmp);
    let at = |q: f64| slopes[((q * (reps - 1) as f64).round() as usize).min(reps - 1)];
    Ok((at(0.025), at(0.975)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn slope_of_power_law_is_exact() {
        let x = [4096.0, 16384.0, 65536.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
        assert!(log_log_slope(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn bootstrap_interval_brackets_noiseless_slope() {
        let x = [1.0, 2.0, 4.0];
        let samples: Vec<Vec<f64>> = x.iter().map(|v: &f64| vec![1.0 / v; 5]).collect();
        let (lo, hi) = bootstrap_slope(&x, &samples, 200, &mut RngStream::new(1, 0)).unwrap();
        assert!((lo + 1.0).abs() < 1e-12 && (hi + 1.0).abs() < 1e-12);
    }
}
