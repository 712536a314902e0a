//! Dormand–Prince 5(4) with PI step-size control.

use serde::Serialize;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const PI_EXPONENT: f64 = 0.2 - 0.75 * PI_BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `None` for unbounded.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl IntegratorOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorOptions {
            rel_tol,
            abs_tol,
            h_max: None,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest accepted scaled error estimate (≤ 1 by construction).
    pub max_error: f64,
}

/// Accepted samples with derivatives, for cubic Hermite dense output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    #[serde(skip)]
    pub derivs: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has its start sample")
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has its start sample")
    }

    /// Cubic Hermite interpolation; `t` is clamped to the covered span.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.times[0], self.t_end());
        let k = match self.times.partition_point(|s| *s <= t) {
            0 => 0,
            p if p >= self.len() => self.len() - 2,
            p => p - 1,
        };
        if self.len() == 1 {
            return self.states[0].clone();
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (0..self.states[k].len())
            .map(|i| {
                h00 * self.states[k][i]
                    + h10 * h * self.derivs[k][i]
                    + h01 * self.states[k + 1][i]
                    + h11 * h * self.derivs[k + 1][i]
            })
            .collect()
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &IntegratorOptions) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], dy: &[f64], opts: &IntegratorOptions) -> Result<f64>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let scaled = |v: &[f64]| {
        let zero = vec![0.0; v.len()];
        error_norm(v, y, &zero, opts)
    };
    let d0 = scaled(y);
    let d1 = scaled(dy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(dy).map(|(a, b)| a + h0 * b).collect();
    let dy1 = f(t + h0, &y1)?;
    let diff: Vec<f64> = dy1.iter().zip(dy).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end`, stopping early once
/// `stop` returns true after an accepted step.
pub fn dopri5<F, S>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
    mut stop: S,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    S: FnMut(&Trajectory) -> bool,
{
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::Precondition("integration tolerances must be positive".into()));
    }
    if !(t_end >= t0) {
        return Err(Error::Precondition(format!("t_end {t_end} precedes t0 {t0}")));
    }
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut dy = f(t0, y0)?;
    stats.evaluations += 1;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        derivs: vec![dy.clone()],
        stats,
    };
    if t_end == t0 {
        return Ok(traj);
    }
    let h_max = opts.h_max.unwrap_or(t_end - t0).min(t_end - t0);
    let mut h = initial_step(&mut f, t0, y0, &dy, opts)?.min(h_max);
    stats.evaluations += 1;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut err_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];

    while t < t_end {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                message: "maximum number of steps exceeded".into(),
            });
        }
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                message: format!("step size underflow (h = {h:e})"),
            });
        }
        k[0].clone_from(&dy);
        for s in 1..7 {
            for i in 0..n {
                stage[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(t + C[s] * h, &stage).map_err(|e| Error::Integration {
                t,
                message: e.to_string(),
            })?;
        }
        stats.evaluations += 6;
        // stage 7 is evaluated at the fifth-order solution
        let y_new = stage.clone();
        let err: Vec<f64> = (0..n)
            .map(|i| h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>())
            .collect();
        let e = error_norm(&err, &y, &y_new, opts);
        if !e.is_finite() {
            return Err(Error::Integration {
                t,
                message: "non-finite state".into(),
            });
        }
        if e <= 1.0 {
            let factor = if e == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * e.powf(-PI_EXPONENT) * err_old.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            let factor = if rejected_last { factor.min(1.0) } else { factor };
            err_old = e.max(1e-4);
            t = if last { t_end } else { t + h };
            y = y_new;
            dy.clone_from(&k[6]);
            stats.steps += 1;
            stats.max_error = stats.max_error.max(e);
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.derivs.push(dy.clone());
            traj.stats = stats;
            rejected_last = false;
            h = (h * factor).min(h_max);
            if stop(&traj) {
                break;
            }
        } else {
            stats.rejected += 1;
            rejected_last = true;
            h *= (SAFETY * e.powf(-0.2)).max(MIN_FACTOR);
        }
    }
    traj.stats = stats;
    Ok(traj)
}
