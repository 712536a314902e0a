use rayon::prelude::*;
use serde::Serialize;

use super::{integrate_with, leaf_project, IntegratorOptions, Trajectory};
use crate::equilibria::EquilibriumRecord;
use crate::error::{Error, Result};
use crate::linalg::orthonormal_complement;
use crate::model::{local_scale, SystemModel};
use crate::multilinear::norm;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOptions {
    /// Decreasing positive amplitudes; `None` for the defaults.
    pub epsilons: Option<Vec<f64>>,
    /// Give up after this many predicted periods.
    pub t_max_factor: f64,
    /// Accepted steps per predicted period, at least.
    pub steps_per_period: f64,
    pub time_tol: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            epsilons: None,
            t_max_factor: 20.0,
            steps_per_period: 256.0,
            time_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitEntry {
    pub epsilon: f64,
    pub x0: Vec<f64>,
    pub period: Option<f64>,
    pub period_refinement_error: Option<f64>,
    /// `maxₜ |Cᵢ(x(t)) − Cᵢ(x₀)|` for every integral.
    pub conservation_drift: Vec<f64>,
    /// `‖x(T) − x₀‖ / diameter`.
    pub closure: Option<f64>,
    pub diameter: Option<f64>,
    pub failure: Option<String>,
    /// One period of samples, or everything integrated on failure.
    #[serde(skip)]
    pub samples: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitFamily {
    pub equilibrium: Vec<f64>,
    pub invariant: f64,
    pub direction: Vec<f64>,
    pub predicted_limit: f64,
    pub entries: Vec<OrbitEntry>,
}

/// `{0.1, 0.05, 0.025} · max(1, ‖x̄ₑ‖)`.
pub fn default_epsilons(point: &[f64]) -> Vec<f64> {
    let s = norm(point).max(1.0);
    vec![0.1 * s, 0.05 * s, 0.025 * s]
}

/// Orbits through `leaf_project(x̄ₑ + ε d)` for each ε, with `d` the leading
/// leafwise direction, and their periods.
pub fn periodic_family(
    model: &SystemModel,
    record: &EquilibriumRecord,
    invariant: f64,
    tol: &Tolerances,
    opts: &FamilyOptions,
) -> Result<OrbitFamily> {
    if !record.is_non_degenerate() {
        return Err(Error::Precondition(format!(
            "equilibrium at {:?} is {:?}",
            record.point, record.classification
        )));
    }
    if !(invariant > 0.0) {
        return Err(Error::Precondition(format!(
            "invariant negative or zero ({invariant}); no periodic family"
        )));
    }
    let eps = opts
        .epsilons
        .clone()
        .unwrap_or_else(|| default_epsilons(&record.point));
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "amplitudes must be positive and strictly decreasing".into(),
        ));
    }
    let xe = &record.point;
    let grads = model.integral_gradients(xe)?;
    let k = model.casimirs().len();
    let w = orthonormal_complement(&grads[..k], model.dim(), tol.frame)?;
    let d = w[0].clone();
    let target = model.integral_values(xe)?[..k].to_vec();
    let predicted = std::f64::consts::TAU / invariant.sqrt();

    let entries = eps
        .par_iter()
        .map(|&e| orbit_entry(model, xe, &d, &target, e, predicted, tol, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitFamily {
        equilibrium: xe.clone(),
        invariant,
        direction: d,
        predicted_limit: predicted,
        entries,
    })
}

#[allow(clippy::too_many_arguments)]
fn orbit_entry(
    model: &SystemModel,
    xe: &[f64],
    d: &[f64],
    target: &[f64],
    epsilon: f64,
    predicted: f64,
    tol: &Tolerances,
    opts: &FamilyOptions,
) -> Result<OrbitEntry> {
    let start: Vec<f64> = xe.iter().zip(d).map(|(a, b)| a + epsilon * b).collect();
    let x0 = leaf_project(model, &start, target)?;
    let normal = {
        let v = model.eval_field(&x0)?;
        let nv = norm(&v);
        if nv == 0.0 {
            return Err(Error::Precondition(format!("field vanishes at x0 = {x0:?}")));
        }
        v.into_iter().map(|c| c / nv).collect::<Vec<_>>()
    };
    let section = |x: &[f64]| -> f64 {
        x.iter().zip(xe).zip(&normal).map(|((a, b), n)| (a - b) * n).sum()
    };
    let mut iopts = IntegratorOptions::new(tol.ode_rel, tol.ode_abs);
    iopts.h_max = Some(predicted / opts.steps_per_period);
    let t_max = opts.t_max_factor * predicted;

    // upward crossings of the section, bracketed by accepted steps
    let mut brackets: Vec<usize> = Vec::new();
    let traj = integrate_with(model, &x0, t_max, &iopts, |tr| {
        let m = tr.len();
        let (a, b) = (section(&tr.states[m - 2]), section(&tr.states[m - 1]));
        if a < 0.0 && b >= 0.0 {
            brackets.push(m - 2);
        }
        brackets.len() >= 2
    })?;
    let c0 = model.integral_values(&x0)?;
    let mut entry = OrbitEntry {
        epsilon,
        x0: x0.clone(),
        period: None,
        period_refinement_error: None,
        conservation_drift: drift(model, &traj, &c0)?,
        closure: None,
        diameter: None,
        failure: None,
        samples: traj.clone(),
    };
    if brackets.len() < 2 {
        entry.failure = Some(format!(
            "no return to the section within t = {t_max:.6}"
        ));
        return Ok(entry);
    }
    let crossing = |i: usize| -> (f64, f64) {
        let (mut lo, mut hi) = (traj.times[i], traj.times[i + 1]);
        while hi - lo > opts.time_tol {
            let mid = 0.5 * (lo + hi);
            if section(&traj.interpolate(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), hi - lo)
    };
    let (t1, e1) = crossing(brackets[0]);
    let (t2, e2) = crossing(brackets[1]);
    let period = t2 - t1;

    // one clean period from x0, ending exactly at T
    let orbit = integrate_with(model, &x0, period, &iopts, |_| false)?;
    let diameter = diameter(&orbit.states);
    let gap: Vec<f64> = orbit.last().iter().zip(&x0).map(|(a, b)| a - b).collect();
    entry.period = Some(period);
    entry.period_refinement_error = Some(e1 + e2);
    entry.conservation_drift = drift(model, &orbit, &c0)?
        .into_iter()
        .zip(&entry.conservation_drift)
        .map(|(a, b)| a.max(*b))
        .collect();
    entry.closure = Some(norm(&gap) / diameter);
    entry.diameter = Some(diameter);
    entry.samples = orbit;
    Ok(entry)
}

fn drift(model: &SystemModel, traj: &Trajectory, c0: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; c0.len()];
    for x in &traj.states {
        for ((o, c), r) in out.iter_mut().zip(model.integral_values(x)?).zip(c0) {
            *o = o.max((c - r).abs());
        }
    }
    Ok(out)
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Scale used for the conservation bound of the orbits around `point`.
pub fn conservation_scale(model: &SystemModel, point: &[f64]) -> Result<f64> {
    Ok(local_scale(&model.integral_gradients(point)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{make_builtin, BuiltinId};
    use crate::equilibria::classify;
    use crate::invariant::compute_invariant;
    use std::f64::consts::TAU;

    fn family(id: BuiltinId, x: [f64; 3], eps: Option<Vec<f64>>) -> Result<OrbitFamily> {
        let m = make_builtin(&id).unwrap();
        let tol = Tolerances::default();
        let r = classify(&m, &x, &tol).unwrap();
        let i = compute_invariant(&m, &r).unwrap();
        let opts = FamilyOptions {
            epsilons: eps,
            ..FamilyOptions::default()
        };
        periodic_family(&m, &r, i, &tol, &opts)
    }

    #[test]
    fn rotation_periods_are_exact() {
        let f = family(BuiltinId::RotationOracle, [0.0, 0.0, 1.0], Some(vec![0.5, 0.1])).unwrap();
        assert!((f.predicted_limit - TAU).abs() < 1e-12);
        for e in &f.entries {
            assert!((e.period.unwrap() - TAU).abs() < 1e-6, "{:?}", e.period);
            assert!(e.closure.unwrap() < 1e-6);
        }
    }

    #[test]
    fn rikitake_small_orbit() {
        let f = family(BuiltinId::Rikitake1 { beta: 2.0 }, [0.0, 0.0, 1.0], Some(vec![0.025])).unwrap();
        let t = f.entries[0].period.unwrap();
        let limit = TAU / 3f64.sqrt();
        assert!((t - limit).abs() / limit < 0.01, "{t}");
        assert_eq!(f.direction, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn unstable_point_is_refused() {
        let m = make_builtin(&BuiltinId::Rikitake1 { beta: 1.0 }).unwrap();
        let tol = Tolerances::default();
        let r = classify(&m, &[0.0, 0.0, 2.0], &tol).unwrap();
        let i = compute_invariant(&m, &r).unwrap();
        assert!(periodic_family(&m, &r, i, &tol, &FamilyOptions::default()).is_err());
    }

    #[test]
    fn amplitudes_must_decrease() {
        assert!(family(BuiltinId::RotationOracle, [0.0, 0.0, 1.0], Some(vec![0.1, 0.2])).is_err());
        assert_eq!(default_epsilons(&[0.0, 0.0, 1.0]), vec![0.1, 0.05, 0.025]);
    }
}
