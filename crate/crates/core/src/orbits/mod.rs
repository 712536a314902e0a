//! Flow integration, projection onto symplectic leaves and the family of
//! periodic orbits around a stable equilibrium.

mod dopri;
mod family;

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::multilinear::norm;

pub use dopri::{dopri5, IntegratorOptions, IntegratorStats, Trajectory};
pub use family::{conservation_scale, default_epsilons, periodic_family, FamilyOptions, OrbitEntry, OrbitFamily};

/// Integrate the model's field from `x0` over `[0, t_end]`.
pub fn integrate(model: &SystemModel, x0: &[f64], t_end: f64, rel_tol: f64, abs_tol: f64) -> Result<Trajectory> {
    integrate_with(model, x0, t_end, &IntegratorOptions::new(rel_tol, abs_tol), |_| false)
}

pub fn integrate_with<S>(
    model: &SystemModel,
    x0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
    stop: S,
) -> Result<Trajectory>
where
    S: FnMut(&Trajectory) -> bool,
{
    if x0.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "initial point has {} coordinates, model {}",
            x0.len(),
            model.dim()
        )));
    }
    dopri5(|_, x| model.eval_field(x), 0.0, x0, t_end, opts, stop)
}

pub const LEAF_MAX_ITER: usize = 25;
pub const LEAF_RESIDUAL: f64 = 1e-12;

/// Move `x` onto `{Cᵢ = targetᵢ}` by Gauss–Newton steps of minimal norm,
/// i.e. along the span of the Casimir gradients.
pub fn leaf_project(model: &SystemModel, x: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    let n = model.dim();
    let k = model.casimirs().len();
    if target.len() != k || x.len() != n {
        return Err(Error::Dimension(format!(
            "leaf target needs {k} values and a point in R^{n}"
        )));
    }
    let mut x = x.to_vec();
    for _ in 0..=LEAF_MAX_ITER {
        let values = model.integral_values(&x)?;
        let r = DVector::from_iterator(k, values.iter().zip(target).map(|(c, t)| c - t));
        let grads = model.integral_gradients(&x)?;
        let scale = grads[..k].iter().map(|g| norm(g)).fold(1.0, f64::max);
        if r.amax() <= LEAF_RESIDUAL * target.iter().fold(1.0f64, |a, t| a.max(t.abs())) {
            return Ok(x);
        }
        let g = DMatrix::from_fn(n, k, |i, j| grads[j][i]);
        let gram = g.transpose() * &g;
        let y = gram.lu().solve(&r).ok_or_else(|| {
            Error::Projection(format!("Casimir gradients are dependent (scale {scale:e})"))
        })?;
        let dx = &g * y;
        x.iter_mut().zip(dx.iter()).for_each(|(a, d)| *a -= d);
    }
    Err(Error::Projection(format!(
        "no convergence in {LEAF_MAX_ITER} iterations"
    )))
}

/// Write samples as CSV with header `t,x1,…,xn`.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let row: Vec<String> = std::iter::once(t).chain(x).map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
