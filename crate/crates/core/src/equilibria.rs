//! Locating, classifying and continuing equilibria.
//!
//! A point `x̄ₑ` with `X(x̄ₑ) = 0` is a *regular* equilibrium of the
//! realization when `ν(x̄ₑ) ≠ 0`, the Casimir gradients are independent and
//! the full gradient frame is dependent. Then `∇H + Σ λᵢ∇Cᵢ = 0` has a unique
//! solution `λₑ` and the equilibrium is *non-degenerate* when
//! `F_λ = H + Σ λᵢ Cᵢ` has an invertible Hessian at `x̄ₑ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{gradient, hessian, jacobian};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, least_squares, to_matrix};
use crate::model::{local_scale, SystemModel};
use crate::multilinear::{frame_degenerate, frame_dependent, frame_volume, norm, Frame};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    NotEquilibrium,
    SingularPoint,
    RegularDegenerate,
    RegularNonDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuSource {
    Config,
    Extrapolated,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameDiagnostics {
    /// (n−2)-volume of the Casimir gradients.
    pub casimir_volume: f64,
    /// (n−1)-volume of all integral gradients.
    pub full_volume: f64,
    pub casimir_degenerate: bool,
    pub full_dependent: bool,
    /// `max(1, largest gradient norm)`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumRecord {
    pub point: Vec<f64>,
    pub classification: Classification,
    /// `‖X(x̄ₑ)‖`.
    pub field_residual: f64,
    pub nu_value: Option<f64>,
    pub nu_source: NuSource,
    pub lambda: Option<Vec<f64>>,
    pub multiplier_residual: Option<f64>,
    #[serde(rename = "hess_f")]
    pub hess_f: Option<Vec<Vec<f64>>>,
    pub hess_det: Option<f64>,
    pub diagnostics: FrameDiagnostics,
    pub notes: Vec<String>,
}

impl EquilibriumRecord {
    pub fn is_regular(&self) -> bool {
        matches!(
            self.classification,
            Classification::RegularDegenerate | Classification::RegularNonDegenerate
        )
    }

    pub fn is_non_degenerate(&self) -> bool {
        self.classification == Classification::RegularNonDegenerate
    }
}

/// `∇F_λ = ∇H + Σ λᵢ∇Cᵢ`.
pub fn f_lambda_gradient(model: &SystemModel, lambda: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut g = gradient(model.hamiltonian(), x)?;
    for (c, l) in model.casimirs().iter().zip(lambda) {
        let gc = gradient(c, x)?;
        g.iter_mut().zip(gc).for_each(|(a, b)| *a += l * b);
    }
    Ok(g)
}

/// `Hess F_λ = Hess H + Σ λᵢ Hess Cᵢ`.
pub fn f_lambda_hessian(model: &SystemModel, lambda: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut h = hessian(model.hamiltonian(), x)?;
    for (c, l) in model.casimirs().iter().zip(lambda) {
        let hc = hessian(c, x)?;
        for (row, rc) in h.iter_mut().zip(hc) {
            row.iter_mut().zip(rc).for_each(|(a, b)| *a += l * b);
        }
    }
    Ok(h)
}

fn hessian_is_degenerate(det: f64, h: &[Vec<f64>], tol: f64) -> bool {
    let n = h.len() as i32;
    det.abs() <= tol * frobenius(h).max(1.0).powi(n)
}

/// Classify `x` as an equilibrium of the model's realization.
pub fn classify(model: &SystemModel, x: &[f64], tol: &Tolerances) -> Result<EquilibriumRecord> {
    let n = model.dim();
    if x.len() != n {
        return Err(Error::Dimension(format!("point has {} coordinates, model {n}", x.len())));
    }
    let field = model.eval_field(x)?;
    let field_residual = norm(&field);
    let grads = model.integral_gradients(x)?;
    let scale = local_scale(&grads);
    let casimir_frame = Frame::new(grads[..n - 2].to_vec())?;
    let full_frame = Frame::new(grads.clone())?;
    let diagnostics = FrameDiagnostics {
        casimir_volume: frame_volume(&casimir_frame),
        full_volume: frame_volume(&full_frame),
        casimir_degenerate: frame_degenerate(&casimir_frame, tol.frame, scale),
        full_dependent: frame_dependent(&full_frame, tol.frame),
        scale,
    };
    let mut rec = EquilibriumRecord {
        point: x.to_vec(),
        classification: Classification::NotEquilibrium,
        field_residual,
        nu_value: None,
        nu_source: NuSource::Unavailable,
        lambda: None,
        multiplier_residual: None,
        hess_f: None,
        hess_det: None,
        diagnostics,
        notes: Vec::new(),
    };
    if field_residual > tol.equilibrium * norm(x).max(1.0) {
        return Ok(rec);
    }

    match model.nu_field() {
        Some(nu) => {
            rec.nu_value = Some(nu.value(x)?);
            rec.nu_source = NuSource::Config;
        }
        None => match model.extrapolate_nu(x, tol.frame) {
            Ok(v) => {
                rec.nu_value = Some(v);
                rec.nu_source = NuSource::Extrapolated;
            }
            Err(e) => rec.notes.push(format!("flagged: {e}")),
        },
    }

    rec.classification = Classification::SingularPoint;
    if rec.diagnostics.casimir_degenerate {
        rec.notes.push("Casimir gradients are dependent".into());
        return Ok(rec);
    }
    let Some(nu) = rec.nu_value else {
        return Ok(rec);
    };
    if nu.abs() <= tol.frame * scale {
        rec.notes.push("rescaling function vanishes".into());
        return Ok(rec);
    }
    if !rec.diagnostics.full_dependent {
        rec.notes
            .push("field vanishes but the integral gradients are independent".into());
        return Ok(rec);
    }

    // ∇H + G λ = 0 in the least-squares sense, G = [∇C₁ … ∇C_{n−2}]
    let g = DMatrix::from_fn(n, n - 2, |i, j| grads[j][i]);
    let rhs = -DVector::from_column_slice(&grads[n - 2]);
    let lambda: Vec<f64> = least_squares(&g, &rhs)?.iter().copied().collect();
    let residual = norm(&f_lambda_gradient(model, &lambda, x)?);
    let h = f_lambda_hessian(model, &lambda, x)?;
    let det = to_matrix(&h).determinant();
    rec.lambda = Some(lambda);
    rec.multiplier_residual = Some(residual);
    rec.hess_det = Some(det);

    let degenerate = hessian_is_degenerate(det, &h, tol.hessian_det);
    rec.hess_f = Some(h);
    rec.classification = if residual > tol.multiplier * scale {
        rec.notes.push(format!("multiplier residual {residual:e} above tolerance"));
        Classification::RegularDegenerate
    } else if degenerate {
        Classification::RegularDegenerate
    } else {
        Classification::RegularNonDegenerate
    };
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub max_iter: usize,
    /// Converged when `‖X(x)‖ ≤ residual_tol · max(1, ‖x‖)`.
    pub residual_tol: f64,
    /// Converged points closer than this are merged.
    pub dedup_distance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_iter: 50,
            residual_tol: 1e-12,
            dedup_distance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SeedOutcome {
    Converged {
        seed: Vec<f64>,
        point: Vec<f64>,
        iterations: usize,
        residual: f64,
    },
    Failed {
        seed: Vec<f64>,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSearch {
    /// Distinct converged equilibria in seed order.
    pub points: Vec<Vec<f64>>,
    pub outcomes: Vec<SeedOutcome>,
}

/// Levenberg–Marquardt damped Newton on `X(x) = 0`.
///
/// The Jacobian is rank deficient along the curves of equilibria typical of
/// integrable systems; damping lets the iteration settle on any point of the
/// equilibrium set.
pub fn solve_equilibrium(model: &SystemModel, seed: &[f64], opts: &SearchOptions) -> SeedOutcome {
    let fail = |reason: String| SeedOutcome::Failed {
        seed: seed.to_vec(),
        reason,
    };
    let n = model.dim();
    if seed.len() != n {
        return fail(format!("seed has {} coordinates, model {n}", seed.len()));
    }
    let mut x = seed.to_vec();
    let mut r = match model.eval_field(&x) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let mut rn = norm(&r);
    let mut mu: Option<f64> = None;
    for iter in 0..=opts.max_iter {
        if rn <= opts.residual_tol * norm(&x).max(1.0) {
            return SeedOutcome::Converged {
                seed: seed.to_vec(),
                point: x,
                iterations: iter,
                residual: rn,
            };
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = match jacobian(model.field(), &x) {
            Ok(j) => to_matrix(&j),
            Err(e) => return fail(e.to_string()),
        };
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        let damping = *mu.get_or_insert_with(|| {
            let d = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
            if d > 0.0 {
                1e-3 * d
            } else {
                1e-6
            }
        });
        let system = &jtj + DMatrix::identity(n, n) * damping;
        let Some(step) = system.lu().solve(&(-jtr)) else {
            mu = Some(damping * 10.0);
            continue;
        };
        let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        match model.eval_field(&trial) {
            Ok(rt) if norm(&rt) < rn => {
                x = trial;
                rn = norm(&rt);
                r = rt;
                mu = Some((damping / 3.0).max(1e-16));
            }
            _ => mu = Some(damping * 4.0),
        }
    }
    fail(format!("no convergence in {} steps (residual {rn:e})", opts.max_iter))
}

/// Run [`solve_equilibrium`] for every seed (concurrently) and deduplicate.
pub fn find_equilibria(model: &SystemModel, seeds: &[Vec<f64>], opts: &SearchOptions) -> EquilibriumSearch {
    let outcomes: Vec<SeedOutcome> = seeds
        .par_iter()
        .map(|s| solve_equilibrium(model, s, opts))
        .collect();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for o in &outcomes {
        if let SeedOutcome::Converged { point, .. } = o {
            let dup = points.iter().any(|p| {
                let d: Vec<f64> = p.iter().zip(point).map(|(a, b)| a - b).collect();
                norm(&d) <= opts.dedup_distance
            });
            if !dup {
                points.push(point.clone());
            }
        }
    }
    EquilibriumSearch { points, outcomes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Hessian of `F_λ` became singular.
    LostNonDegeneracy,
    NewtonDivergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchStop {
    pub index: usize,
    pub lambda: Vec<f64>,
    pub reason: StopReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub records: Vec<EquilibriumRecord>,
    pub stopped: Option<BranchStop>,
}

/// Follow the branch `λ ↦ x̄(λ)` of non-degenerate regular equilibria by
/// solving `∇F_λ(x) = 0` with Newton's method (Jacobian `Hess F_λ`), warm
/// started from the previous point.
pub fn continue_branch(
    model: &SystemModel,
    record: &EquilibriumRecord,
    lambda_path: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<Branch> {
    if !record.is_non_degenerate() {
        return Err(Error::NotNonDegenerate(format!(
            "branch start classified {:?}",
            record.classification
        )));
    }
    let n = model.dim();
    let mut x = record.point.clone();
    let mut records = Vec::with_capacity(lambda_path.len());
    for (index, lambda) in lambda_path.iter().enumerate() {
        if lambda.len() != n - 2 {
            return Err(Error::Dimension(format!(
                "lambda has {} entries, expected {}",
                lambda.len(),
                n - 2
            )));
        }
        let stop = |reason, detail: String| BranchStop {
            index,
            lambda: lambda.clone(),
            reason,
            detail,
        };
        let mut converged = false;
        for _ in 0..25 {
            let g = f_lambda_gradient(model, lambda, &x)?;
            let gscale = local_scale(&model.integral_gradients(&x)?);
            if norm(&g) <= 1e-12 * gscale {
                converged = true;
                break;
            }
            let h = f_lambda_hessian(model, lambda, &x)?;
            let hm = to_matrix(&h);
            let det = hm.determinant();
            if hessian_is_degenerate(det, &h, tol.hessian_det) {
                return Ok(Branch {
                    records,
                    stopped: Some(stop(
                        StopReason::LostNonDegeneracy,
                        format!("det Hess F = {det:e}"),
                    )),
                });
            }
            let Some(step) = hm.lu().solve(&-DVector::from_column_slice(&g)) else {
                return Ok(Branch {
                    records,
                    stopped: Some(stop(StopReason::LostNonDegeneracy, "singular Hessian".into())),
                });
            };
            x.iter_mut().zip(step.iter()).for_each(|(a, b)| *a += b);
        }
        if !converged {
            return Ok(Branch {
                records,
                stopped: Some(stop(
                    StopReason::NewtonDivergence,
                    "no convergence in 25 Newton steps".into(),
                )),
            });
        }
        let rec = classify(model, &x, tol)?;
        if !rec.is_non_degenerate() {
            let detail = format!("classified {:?}", rec.classification);
            return Ok(Branch {
                records,
                stopped: Some(stop(StopReason::LostNonDegeneracy, detail)),
            });
        }
        records.push(rec);
    }
    Ok(Branch {
        records,
        stopped: None,
    })
}
