//! The stability invariant 𝓘 and its cross-checks.
//!
//! 𝓘 = ν² · det(Hess F) · ⟨(Hess⁻¹∇C₁)∧…, ∇C₁∧…⟩ at a non-degenerate regular
//! equilibrium. It is positive at Lyapunov-stable points, negative at
//! unstable ones, and the nonzero eigenvalues of the linearization are the
//! roots of μ² + 𝓘.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::jacobian;
use crate::diffeo::DiffeoSpec;
use crate::equilibria::{classify, Classification, EquilibriumRecord};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, frobenius, multiset_mismatch, orthonormal_complement, to_matrix};
use crate::model::SystemModel;
use crate::multilinear::{gram_inner, Frame};
use crate::tolerances::Tolerances;

/// Default tolerance of the spectral and probe cross-checks.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    LyapunovStable,
    Unstable,
    Inconclusive,
}

/// How `I_value` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantRoute {
    /// Definition, via Hess⁻¹ applied to the Casimir gradients.
    Definition,
    /// `ν² det(GᵀG) det(BᵀHB)`, which extends continuously to degenerate
    /// Hessians.
    Restricted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenCheck {
    /// `[re, im]` pairs, sorted like the computed spectrum.
    pub predicted: Vec<[f64; 2]>,
    pub computed: Vec<[f64; 2]>,
    pub near_zero: usize,
    pub max_mismatch: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArnoldCheck {
    /// Orthonormal basis of `W = ∩ ker dCᵢ`, one vector per entry.
    #[serde(rename = "W_basis")]
    pub w_basis: Vec<Vec<f64>>,
    pub restricted: Vec<Vec<f64>>,
    pub restricted_det: f64,
    pub definite: bool,
    /// `sign(restricted_det) = sign(𝓘)`, vacuous inside the band.
    pub sign_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub diffeo_id: String,
    pub i_before: f64,
    pub i_after: f64,
    pub relative_change: f64,
    pub eigen_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    #[serde(rename = "I_value")]
    pub i_value: f64,
    pub route: InvariantRoute,
    pub verdict: Verdict,
    pub band: f64,
    pub eigen_check: Option<EigenCheck>,
    pub arnold: Option<ArnoldCheck>,
    pub probes: Vec<ProbeResult>,
    pub notes: Vec<String>,
}

fn regular_parts(record: &EquilibriumRecord) -> Result<(f64, &Vec<Vec<f64>>)> {
    match (record.is_regular(), record.nu_value, record.hess_f.as_ref()) {
        (true, Some(nu), Some(h)) => Ok((nu, h)),
        _ => Err(Error::NotNonDegenerate(format!(
            "record at {:?} is {:?}",
            record.point, record.classification
        ))),
    }
}

fn casimir_gradients(model: &SystemModel, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut grads = model.integral_gradients(x)?;
    grads.pop();
    Ok(grads)
}

/// 𝓘 from its definition. Hess⁻¹ is applied through one LU factorization.
pub fn compute_invariant(model: &SystemModel, record: &EquilibriumRecord) -> Result<f64> {
    if !record.is_non_degenerate() {
        return Err(Error::NotNonDegenerate(format!(
            "record at {:?} is {:?}",
            record.point, record.classification
        )));
    }
    let (nu, h) = regular_parts(record)?;
    let lu = to_matrix(h).lu();
    let det = lu.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::NotNonDegenerate("Hessian factorization failed".into()));
    }
    let grads = casimir_gradients(model, &record.point)?;
    let mapped = grads
        .iter()
        .map(|g| {
            lu.solve(&DVector::from_column_slice(g))
                .map(|y| y.iter().copied().collect())
                .ok_or_else(|| Error::NotNonDegenerate("Hessian solve failed".into()))
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let gram = gram_inner(&Frame::new(mapped)?, &Frame::new(grads)?)?;
    Ok(nu * nu * det * gram)
}

/// Basis `B` of `W` and the restricted form `BᵀHB`.
fn restricted_form(
    model: &SystemModel,
    record: &EquilibriumRecord,
    tol: &Tolerances,
) -> Result<(Vec<Vec<f64>>, DMatrix<f64>, Vec<Vec<f64>>)> {
    let (_, h) = regular_parts(record)?;
    let n = model.dim();
    let grads = casimir_gradients(model, &record.point)?;
    let w = orthonormal_complement(&grads, n, tol.frame)?;
    if w.len() != 2 {
        return Err(Error::DegenerateFrame(format!(
            "leaf tangent space has dimension {}",
            w.len()
        )));
    }
    let b = DMatrix::from_fn(n, 2, |i, j| w[j][i]);
    let r = b.transpose() * to_matrix(h) * &b;
    Ok((w, r, grads))
}

/// `ν² det(GᵀG) det(BᵀHB)`: equals 𝓘 at non-degenerate points and stays
/// defined (and continuous) when the Hessian is singular.
pub fn restricted_invariant(model: &SystemModel, record: &EquilibriumRecord, tol: &Tolerances) -> Result<f64> {
    let (nu, _) = regular_parts(record)?;
    let (_, r, grads) = restricted_form(model, record, tol)?;
    let g = Frame::new(grads)?;
    Ok(nu * nu * gram_inner(&g, &g)? * r.determinant())
}

pub fn stability_verdict(i: f64, band: f64) -> Verdict {
    if i < -band {
        Verdict::Unstable
    } else if i > band {
        Verdict::LyapunovStable
    } else {
        Verdict::Inconclusive
    }
}

/// Width of the inconclusive band around 0 for this record.
pub fn verdict_band(record: &EquilibriumRecord, tol: &Tolerances) -> f64 {
    let h = record.hess_f.as_deref().map_or(0.0, frobenius);
    tol.inconclusive_band * h.max(1.0).powi(2)
}

fn to_pairs(v: &[Complex<f64>]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

/// Compare the spectrum of the linearization with the roots of
/// `(−μ)^{n−2}(μ² + 𝓘)`.
pub fn characteristic_check(model: &SystemModel, record: &EquilibriumRecord, i: f64, tol: f64) -> Result<EigenCheck> {
    let n = model.dim();
    let jac = jacobian(model.field(), &record.point)?;
    let computed = eigenvalues(&jac);
    let root = Complex::new(-i, 0.0).sqrt();
    let mut predicted = vec![Complex::new(0.0, 0.0); n - 2];
    predicted.push(root);
    predicted.push(-root);
    crate::linalg::sort_spectrum(&mut predicted);
    let scale = frobenius(&jac).max(1.0);
    let near_zero = computed.iter().filter(|c| c.norm() <= tol * scale).count();
    let max_mismatch = multiset_mismatch(&computed, &predicted);
    // at 𝓘 = 0 all n eigenvalues are predicted to vanish
    let zeros_ok = near_zero >= n - 2;
    Ok(EigenCheck {
        predicted: to_pairs(&predicted),
        computed: to_pairs(&computed),
        near_zero,
        max_mismatch,
        tol,
        passed: zeros_ok && max_mismatch <= tol,
    })
}

/// Definiteness of `Hess F` restricted to `W = ∩ ker dCᵢ`.
pub fn arnold_check(
    model: &SystemModel,
    record: &EquilibriumRecord,
    i: f64,
    band: f64,
    tol: &Tolerances,
) -> Result<ArnoldCheck> {
    let (w, r, _) = restricted_form(model, record, tol)?;
    let det = r.determinant();
    let sign_consistent = i.abs() <= band || (det > 0.0) == (i > 0.0);
    Ok(ArnoldCheck {
        w_basis: w,
        restricted: (0..2).map(|a| (0..2).map(|b| r[(a, b)]).collect()).collect(),
        restricted_det: det,
        definite: det > 0.0,
        sign_consistent,
    })
}

/// Push the model forward by `diffeo`, re-classify the image of the
/// equilibrium and recompute 𝓘 there.
pub fn invariance_probe(
    model: &SystemModel,
    record: &EquilibriumRecord,
    diffeo: &DiffeoSpec,
    tol: &Tolerances,
) -> Result<ProbeResult> {
    let before = compute_invariant(model, record)?;
    let pushed = diffeo.push_forward(model)?;
    let y = diffeo.forward(&record.point);
    let image = classify(&pushed, &y, tol)?;
    if image.classification != Classification::RegularNonDegenerate {
        return Err(Error::Precondition(format!(
            "image of the equilibrium under {} classified as {:?}",
            diffeo.id, image.classification
        )));
    }
    let after = compute_invariant(&pushed, &image)?;
    let ev0 = eigenvalues(&jacobian(model.field(), &record.point)?);
    let ev1 = eigenvalues(&jacobian(pushed.field(), &y)?);
    let relative_change = if before == after {
        0.0
    } else {
        (after - before).abs() / before.abs().max(f64::MIN_POSITIVE)
    };
    Ok(ProbeResult {
        diffeo_id: diffeo.id.clone(),
        i_before: before,
        i_after: after,
        relative_change,
        eigen_mismatch: multiset_mismatch(&ev0, &ev1),
    })
}

/// Full report for a regular record: 𝓘, verdict and all cross-checks.
///
/// Degenerate records get the restricted form of 𝓘 and are always
/// `Inconclusive`.
pub fn analyze(
    model: &SystemModel,
    record: &EquilibriumRecord,
    tol: &Tolerances,
    probes: &[DiffeoSpec],
) -> Result<InvariantReport> {
    let band = verdict_band(record, tol);
    let mut notes = Vec::new();
    let (i_value, route) = if record.is_non_degenerate() {
        (compute_invariant(model, record)?, InvariantRoute::Definition)
    } else {
        notes.push("Hessian of F is degenerate; invariant taken from the restricted form".into());
        (restricted_invariant(model, record, tol)?, InvariantRoute::Restricted)
    };
    let verdict = if record.is_non_degenerate() {
        stability_verdict(i_value, band)
    } else {
        Verdict::Inconclusive
    };
    let eigen_check = match characteristic_check(model, record, i_value, CHECK_TOL) {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("eigenvalue check unavailable: {e}"));
            None
        }
    };
    let arnold = match arnold_check(model, record, i_value, band, tol) {
        Ok(a) => Some(a),
        Err(e) => {
            notes.push(format!("restricted Hessian unavailable: {e}"));
            None
        }
    };
    let probes = if record.is_non_degenerate() {
        probes
            .par_iter()
            .map(|d| invariance_probe(model, record, d, tol))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(InvariantReport {
        i_value,
        route,
        verdict,
        band,
        eigen_check,
        arnold,
        probes,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{make_builtin, BuiltinId};

    fn rec(id: BuiltinId, x: [f64; 3]) -> (SystemModel, EquilibriumRecord) {
        let m = make_builtin(&id).unwrap();
        let r = classify(&m, &x, &Tolerances::default()).unwrap();
        (m, r)
    }

    #[test]
    fn invariant_examples() {
        let (m, r) = rec(BuiltinId::Rikitake1 { beta: 2.0 }, [0.0, 0.0, 1.0]);
        assert!((compute_invariant(&m, &r).unwrap() - 3.0).abs() < 1e-12);
        let (m, r) = rec(BuiltinId::Rikitake2 { beta: 1.0 }, [0.0, 0.0, 2.0]);
        assert!((compute_invariant(&m, &r).unwrap() + 3.0).abs() < 1e-12);
        let (m, r) = rec(BuiltinId::RotationOracle, [0.0, 0.0, 1.0]);
        assert!((compute_invariant(&m, &r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_records_are_refused() {
        let (m, r) = rec(BuiltinId::Rikitake1 { beta: 1.0 }, [0.0, 0.0, 1.0]);
        assert_eq!(r.classification, Classification::RegularDegenerate);
        assert!(compute_invariant(&m, &r).is_err());
        let rep = analyze(&m, &r, &Tolerances::default(), &[]).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert_eq!(rep.route, InvariantRoute::Restricted);
        assert!(rep.i_value.abs() < 1e-12);
    }

    #[test]
    fn verdicts() {
        assert_eq!(stability_verdict(3.0, 1e-9), Verdict::LyapunovStable);
        assert_eq!(stability_verdict(-3.0, 1e-9), Verdict::Unstable);
        assert_eq!(stability_verdict(0.0, 1e-9), Verdict::Inconclusive);
        assert_eq!(stability_verdict(5e-10, 1e-9), Verdict::Inconclusive);
    }

    #[test]
    fn spectra() {
        let (m, r) = rec(BuiltinId::Rikitake1 { beta: 2.0 }, [0.0, 0.0, 1.0]);
        let c = characteristic_check(&m, &r, 3.0, 1e-6).unwrap();
        assert!(c.passed && c.max_mismatch < 1e-12, "{c:?}");
        assert_eq!(c.computed.len(), 3);
        let (m, r) = rec(BuiltinId::Rikitake1 { beta: 1.0 }, [0.0, 0.0, 2.0]);
        let c = characteristic_check(&m, &r, -3.0, 1e-6).unwrap();
        assert!(c.passed);
        assert!((c.computed[2][0] - 3f64.sqrt()).abs() < 1e-12);
        // wrong 𝓘 must fail
        assert!(!characteristic_check(&m, &r, 3.0, 1e-6).unwrap().passed);
        let (m, r) = rec(BuiltinId::RotationOracle, [0.0, 0.0, 1.0]);
        let c = characteristic_check(&m, &r, 1.0, 1e-6).unwrap();
        assert!(c.passed);
        assert!((c.computed[2][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arnold_examples() {
        let tol = Tolerances::default();
        let (m, r) = rec(BuiltinId::Rikitake1 { beta: 2.0 }, [0.0, 0.0, 1.0]);
        let a = arnold_check(&m, &r, 3.0, 1e-9, &tol).unwrap();
        assert_eq!(a.w_basis, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert!((a.restricted[0][0] - 0.5).abs() < 1e-14);
        assert!((a.restricted[1][1] - 1.5).abs() < 1e-14);
        assert!((a.restricted_det - 0.75).abs() < 1e-14);
        assert!(a.definite && a.sign_consistent);
        let (m, r) = rec(BuiltinId::Rikitake2 { beta: 1.0 }, [0.0, 0.0, 2.0]);
        let a = arnold_check(&m, &r, -3.0, 1e-9, &tol).unwrap();
        assert!(a.restricted_det < 0.0 && !a.definite && a.sign_consistent);
        assert!((restricted_invariant(&m, &r, &tol).unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn probes() {
        let tol = Tolerances::default();
        let (m, r) = rec(BuiltinId::Rikitake1 { beta: 2.0 }, [0.0, 0.0, 1.0]);
        let id = invariance_probe(&m, &r, &DiffeoSpec::identity(3), &tol).unwrap();
        assert_eq!(id.relative_change, 0.0);
        let shear = DiffeoSpec::simple_shear(3, 1, 0, 1.0, 2);
        let p = invariance_probe(&m, &r, &shear, &tol).unwrap();
        assert!((p.i_after - 3.0).abs() < 1e-9 && p.relative_change <= 1e-9);
        let s = invariance_probe(&m, &r, &DiffeoSpec::scaling(3, 2.0), &tol).unwrap();
        assert!((s.i_after - 3.0).abs() < 1e-9);
        assert!(s.eigen_mismatch < 1e-9);
    }
}
