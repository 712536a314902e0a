//! Integrable systems `ẋ = X(x)` with first integrals `C₁…C_{n−1}` and the
//! Hamilton–Poisson realization `X = (−ν)⋆(∇C₁∧…∧∇C_{n−1})`.
//!
//! The last integral plays the role of the Hamiltonian; the first `n−2` are
//! the Casimirs of the bracket
//! `{f, g} = ν · det(∇C₁, …, ∇C_{n−2}, ∇f, ∇g)`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{gradient, ScalarField, VectorFieldDef};
use crate::error::{Error, Result};
use crate::expr::{Expression, Params};
use crate::multilinear::{frame_degenerate, hodge_complement, norm, Frame};

/// Textual description of a model, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub variables: Vec<String>,
    pub field: Vec<String>,
    pub integrals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<String>,
    #[serde(default)]
    pub parameters: Params,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    spec: ModelSpec,
    field: VectorFieldDef,
    integrals: Vec<ScalarField>,
    nu: Option<ScalarField>,
}

/// Least-squares estimate of ν at a point together with how well
/// `X = −ν·⋆(∇C₁∧…∧∇C_{n−1})` holds there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuInference {
    pub nu: f64,
    /// `‖X + ν w‖ / ‖X‖`, zero when `X` vanishes.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralCheck {
    /// Worst scaled residual `|⟨∇Cᵢ, X⟩| / max(1, ‖∇Cᵢ‖‖X‖)` per integral.
    pub max_residual: Vec<f64>,
    /// Sample point at which each worst residual occurred.
    pub worst_point: Vec<Vec<f64>>,
    pub tol: f64,
    pub pass: bool,
}

/// `max(1, largest vector norm)`.
pub fn local_scale(vectors: &[Vec<f64>]) -> f64 {
    vectors.iter().map(|v| norm(v)).fold(1.0, f64::max)
}

pub fn build_model(spec: &ModelSpec) -> Result<SystemModel> {
    let n = spec.variables.len();
    if n < 3 {
        return Err(Error::Model(format!("dimension must be at least 3, got {n}")));
    }
    let mut seen = BTreeSet::new();
    for v in &spec.variables {
        if !seen.insert(v.as_str()) {
            return Err(Error::Model(format!("duplicate variable name `{v}`")));
        }
    }
    if let Some(p) = spec.parameters.keys().find(|p| seen.contains(p.as_str())) {
        return Err(Error::Model(format!("`{p}` is both a variable and a parameter")));
    }
    if spec.field.len() != n {
        return Err(Error::Model(format!(
            "vector field has {} components, expected {n}",
            spec.field.len()
        )));
    }
    if spec.integrals.len() != n - 1 {
        return Err(Error::Model(format!(
            "{} first integrals given, a {n}-dimensional system needs {}",
            spec.integrals.len(),
            n - 1
        )));
    }
    let vars: Vec<&str> = spec.variables.iter().map(String::as_str).collect();
    let parse = |text: &str| ScalarField::parse(text, &vars, &spec.parameters);
    let field = VectorFieldDef::new(spec.field.iter().map(|t| parse(t)).collect::<Result<_>>()?)?;
    let integrals = spec.integrals.iter().map(|t| parse(t)).collect::<Result<_>>()?;
    let nu = spec.nu.as_deref().map(parse).transpose()?;
    Ok(SystemModel {
        spec: spec.clone(),
        field,
        integrals,
        nu,
    })
}

impl SystemModel {
    /// Assemble from already-bound expressions (e.g. a pushed-forward model).
    pub fn from_expressions(
        name: Option<String>,
        field: Vec<Expression>,
        integrals: Vec<Expression>,
        nu: Option<Expression>,
    ) -> Result<SystemModel> {
        let variables = field
            .first()
            .map(|e| e.variables().to_vec())
            .unwrap_or_default();
        let spec = ModelSpec {
            name,
            variables,
            field: field.iter().map(ToString::to_string).collect(),
            integrals: integrals.iter().map(ToString::to_string).collect(),
            nu: nu.as_ref().map(ToString::to_string),
            parameters: Params::new(),
        };
        let n = spec.variables.len();
        if n < 3 || integrals.len() + 1 != n || field.len() != n {
            return Err(Error::Model("inconsistent expression counts".into()));
        }
        Ok(SystemModel {
            spec,
            field: VectorFieldDef::new(
                field
                    .into_iter()
                    .map(ScalarField::from_bound)
                    .collect::<Result<_>>()?,
            )?,
            integrals: integrals
                .into_iter()
                .map(ScalarField::from_bound)
                .collect::<Result<_>>()?,
            nu: nu.map(ScalarField::from_bound).transpose()?,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &VectorFieldDef {
        &self.field
    }

    pub fn integrals(&self) -> &[ScalarField] {
        &self.integrals
    }

    /// The Hamiltonian `H = C_{n−1}`.
    pub fn hamiltonian(&self) -> &ScalarField {
        self.integrals.last().expect("model has n-1 >= 2 integrals")
    }

    /// The Casimirs `C₁…C_{n−2}`.
    pub fn casimirs(&self) -> &[ScalarField] {
        &self.integrals[..self.integrals.len() - 1]
    }

    pub fn nu_field(&self) -> Option<&ScalarField> {
        self.nu.as_ref()
    }

    pub fn rename(&mut self, name: Option<String>) {
        self.spec.name = name;
    }

    /// Same model with a different integral designated as the Hamiltonian;
    /// the remaining integrals keep their order. Any configured ν is dropped
    /// since its sign depends on the ordering.
    pub fn with_hamiltonian(&self, index: usize) -> Result<SystemModel> {
        if index >= self.integrals.len() {
            return Err(Error::Model(format!("no integral with index {index}")));
        }
        let mut integrals = self.integrals.clone();
        let h = integrals.remove(index);
        integrals.push(h);
        let mut spec = self.spec.clone();
        let text = spec.integrals.remove(index);
        spec.integrals.push(text);
        spec.nu = None;
        Ok(SystemModel {
            spec,
            field: self.field.clone(),
            integrals,
            nu: None,
        })
    }

    pub fn eval_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.field.eval(x)
    }

    pub fn integral_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.integrals.iter().map(|c| c.value(x)).collect()
    }

    pub fn integral_gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.integrals.iter().map(|c| gradient(c, x)).collect()
    }

    /// `⟨∇Cᵢ, X⟩ = 0` at each sample point.
    pub fn check_first_integrals(&self, points: &[Vec<f64>], tol: f64) -> Result<IntegralCheck> {
        let k = self.integrals.len();
        let mut max_residual = vec![0.0; k];
        let mut worst_point = vec![points.first().cloned().unwrap_or_default(); k];
        for p in points {
            let x = self.eval_field(p)?;
            let xn = norm(&x);
            for (i, c) in self.integrals.iter().enumerate() {
                let g = gradient(c, p)?;
                let r = crate::multilinear::dot(&g, &x).abs() / (norm(&g) * xn).max(1.0);
                if r > max_residual[i] {
                    max_residual[i] = r;
                    worst_point[i] = p.clone();
                }
            }
        }
        let pass = max_residual.iter().all(|r| *r <= tol);
        Ok(IntegralCheck {
            max_residual,
            worst_point,
            tol,
            pass,
        })
    }

    /// Solve `X = −ν w`, `w = ⋆(∇C₁∧…∧∇C_{n−1})`, for ν in the least-squares
    /// sense. Fails where `w` vanishes.
    pub fn infer_nu(&self, x: &[f64], tol: f64) -> Result<NuInference> {
        let grads = self.integral_gradients(x)?;
        let scale = local_scale(&grads);
        let w = hodge_complement(&Frame::new(grads)?)?;
        let wn = norm(&w);
        if wn <= tol * scale.powi(self.dim() as i32 - 1) {
            return Err(Error::DegenerateFrame(format!(
                "gradient (n-1)-frame has volume {wn:e} at {x:?}"
            )));
        }
        let field = self.eval_field(x)?;
        let nu = -crate::multilinear::dot(&field, &w) / (wn * wn);
        let fnorm = norm(&field);
        let residual = if fnorm == 0.0 {
            0.0
        } else {
            let r: Vec<f64> = field.iter().zip(&w).map(|(a, b)| a + nu * b).collect();
            norm(&r) / fnorm
        };
        Ok(NuInference { nu, residual })
    }

    /// How far `X = −ν⋆(∇C₁∧…∧∇C_{n−1})` is from holding at `x`, relative to
    /// `max(1, ‖X‖)`. Uses the configured ν when present, otherwise the
    /// inferred one; `None` where ν cannot be inferred.
    pub fn realization_residual(&self, x: &[f64], tol: f64) -> Result<Option<f64>> {
        let field = self.eval_field(x)?;
        let fnorm = norm(&field);
        let Some(nu) = &self.nu else {
            return match self.infer_nu(x, tol) {
                Ok(r) => Ok(Some(r.residual * fnorm / fnorm.max(1.0))),
                Err(Error::DegenerateFrame(_)) => Ok(None),
                Err(e) => Err(e),
            };
        };
        let nu = nu.value(x)?;
        let w = hodge_complement(&Frame::new(self.integral_gradients(x)?)?)?;
        let r: Vec<f64> = field.iter().zip(&w).map(|(a, b)| a + nu * b).collect();
        Ok(Some(norm(&r) / fnorm.max(1.0)))
    }

    /// ν at `x` as the limit of inferred values along a line through `x`.
    ///
    /// Used where the (n−1)-frame is degenerate (equilibria). Four samples at
    /// halving distances are extrapolated to zero distance; the 3- and
    /// 4-point extrapolants must agree to `1e-6`.
    pub fn extrapolate_nu(&self, x: &[f64], tol: f64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e75);
        let h0 = 1e-2 * norm(x).max(1.0);
        let hs: Vec<f64> = (0..4).map(|k| h0 / f64::from(1 << k)).collect();
        let mut last_err = String::new();
        for _ in 0..4 {
            let mut u: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let un = norm(&u);
            u.iter_mut().for_each(|v| *v /= un);
            let samples: Result<Vec<f64>> = hs
                .iter()
                .map(|h| {
                    let p: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + h * b).collect();
                    self.infer_nu(&p, tol).map(|r| r.nu)
                })
                .collect();
            let samples = match samples {
                Ok(s) => s,
                Err(e) => {
                    last_err = e.to_string();
                    continue;
                }
            };
            let full = neville_at_zero(&hs, &samples);
            let partial = neville_at_zero(&hs[1..], &samples[1..]);
            if (full - partial).abs() <= 1e-6 * full.abs().max(1.0) {
                return Ok(full);
            }
            last_err = format!("extrapolants disagree: {full} vs {partial}");
        }
        Err(Error::NuUnavailable(format!("at {x:?}: {last_err}")))
    }

    /// ν from the configured field when present, otherwise inferred,
    /// falling back to extrapolation where the frame degenerates.
    pub fn nu_value(&self, x: &[f64], tol: f64) -> Result<f64> {
        if let Some(nu) = &self.nu {
            return nu.value(x);
        }
        match self.infer_nu(x, tol) {
            Ok(r) => Ok(r.nu),
            Err(Error::DegenerateFrame(_)) => self.extrapolate_nu(x, tol),
            Err(e) => Err(e),
        }
    }

    /// `{f, g}(x) = ν(x) · det(∇C₁, …, ∇C_{n−2}, ∇f, ∇g)`.
    pub fn poisson_bracket(&self, f: &ScalarField, g: &ScalarField, x: &[f64], tol: f64) -> Result<f64> {
        let nu = self.nu_value(x, tol)?;
        let n = self.dim();
        let mut rows: Vec<Vec<f64>> = self
            .casimirs()
            .iter()
            .map(|c| gradient(c, x))
            .collect::<Result<_>>()?;
        rows.push(gradient(f, x)?);
        rows.push(gradient(g, x)?);
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(nu * m.determinant())
    }

    /// Rank of the Poisson tensor at `x`: 2 when ν ≠ 0 and the Casimir
    /// gradients are independent, else 0.
    pub fn poisson_rank(&self, x: &[f64], tol: f64) -> Result<u8> {
        let grads: Vec<Vec<f64>> = self
            .casimirs()
            .iter()
            .map(|c| gradient(c, x))
            .collect::<Result<_>>()?;
        let scale = local_scale(&grads);
        if frame_degenerate(&Frame::new(grads)?, tol, scale) {
            return Ok(0);
        }
        let nu = self.nu_value(x, tol)?;
        Ok(if nu.abs() > tol * scale { 2 } else { 0 })
    }
}

/// Value at h = 0 of the interpolating polynomial through `(hs, ys)`.
fn neville_at_zero(hs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let m = hs.len();
    for level in 1..m {
        for i in 0..m - level {
            let (hi, hj) = (hs[i], hs[i + level]);
            p[i] = (hj * p[i] - hi * p[i + 1]) / (hj - hi);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{make_builtin, BuiltinId};

    fn rikitake_spec(beta: f64) -> ModelSpec {
        ModelSpec {
            name: None,
            variables: vec!["x".into(), "y".into(), "z".into()],
            field: vec!["y*z + beta*y".into(), "x*z - beta*x".into(), "-x*y".into()],
            integrals: vec!["(x^2+y^2)/2 + z^2".into(), "(-x^2+y^2)/4 - beta*z".into()],
            nu: None,
            parameters: Params::from([("beta".into(), beta)]),
        }
    }

    #[test]
    fn build_rejects_bad_configs() {
        let m = build_model(&rikitake_spec(1.0)).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.integrals().len(), 2);

        let mut s = rikitake_spec(1.0);
        s.integrals.pop();
        assert!(matches!(build_model(&s), Err(Error::Model(_))));

        let mut s = rikitake_spec(1.0);
        s.field[2] = "-x*y*gamma".into();
        assert!(matches!(build_model(&s), Err(Error::Parse(_))));

        let mut s = rikitake_spec(1.0);
        s.variables[2] = "x".into();
        assert!(matches!(build_model(&s), Err(Error::Model(_))));

        let mut s = rikitake_spec(1.0);
        s.variables.truncate(2);
        s.field.truncate(2);
        s.integrals.truncate(1);
        assert!(build_model(&s).is_err());
    }

    #[test]
    fn first_integral_check() {
        let m = build_model(&rikitake_spec(1.0)).unwrap();
        let r = m.check_first_integrals(&[vec![1.0, 1.0, 1.0]], 1e-12).unwrap();
        assert_eq!(r.max_residual, vec![0.0, 0.0]);
        assert!(r.pass);

        let mut s = rikitake_spec(1.0);
        s.integrals[0] = "(x^2+y^2)/2 + z^2 + x".into();
        let bad = build_model(&s).unwrap();
        let r = bad.check_first_integrals(&[vec![1.0, 1.0, 1.0]], 1e-9).unwrap();
        // extra term contributes ⟨e₁, X⟩ = X₁ = 2 against ‖(2,1,2)‖‖(2,0,-1)‖ = 3√5
        assert!((r.max_residual[0] - 2.0 / (3.0 * 5f64.sqrt())).abs() < 1e-14);
        assert!(!r.pass);

        let zero = ModelSpec {
            field: vec!["0".into(), "0".into(), "0".into()],
            ..rikitake_spec(1.0)
        };
        let z = build_model(&zero).unwrap();
        let r = z.check_first_integrals(&[vec![0.3, -1.0, 2.0]], 1e-12).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn infer_nu_for_both_realizations() {
        let r1 = build_model(&rikitake_spec(1.0)).unwrap();
        let inf = r1.infer_nu(&[1.0, 1.0, 1.0], 1e-9).unwrap();
        assert!((inf.nu - 1.0).abs() < 1e-14 && inf.residual < 1e-14);

        let r2 = r1.with_hamiltonian(0).unwrap();
        let inf = r2.infer_nu(&[1.0, 1.0, 1.0], 1e-9).unwrap();
        assert!((inf.nu + 1.0).abs() < 1e-14 && inf.residual < 1e-14);

        assert!(matches!(
            r1.infer_nu(&[0.0, 0.0, 0.7], 1e-9),
            Err(Error::DegenerateFrame(_))
        ));
        let nu = r1.extrapolate_nu(&[0.0, 0.0, 0.7], 1e-9).unwrap();
        assert!((nu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bracket_examples() {
        let m = make_builtin(&BuiltinId::Rikitake1 { beta: 1.0 }).unwrap();
        let p = Params::new();
        let v = ["x", "y", "z"];
        let x = ScalarField::parse("x", &v, &p).unwrap();
        let y = ScalarField::parse("y", &v, &p).unwrap();
        let z = ScalarField::parse("z", &v, &p).unwrap();
        let pt = [1.0, 1.0, 1.0];
        let zh = m.poisson_bracket(&z, m.hamiltonian(), &pt, 1e-9).unwrap();
        assert!((zh + 1.0).abs() < 1e-14);
        assert!((m.poisson_bracket(&x, &y, &pt, 1e-9).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(m.poisson_bracket(&y, &y, &pt, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn rank_examples() {
        let r1 = make_builtin(&BuiltinId::Rikitake1 { beta: 1.0 }).unwrap();
        let r2 = make_builtin(&BuiltinId::Rikitake2 { beta: 1.0 }).unwrap();
        assert_eq!(r1.poisson_rank(&[0.0, 0.0, 1.0], 1e-9).unwrap(), 2);
        assert_eq!(r1.poisson_rank(&[0.0, 0.0, 0.0], 1e-9).unwrap(), 0);
        assert_eq!(r2.poisson_rank(&[0.0, 0.0, 0.0], 1e-9).unwrap(), 2);
    }

    #[test]
    fn neville_recovers_polynomials() {
        let hs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = hs.iter().map(|h| 3.0 - 2.0 * h + 5.0 * h * h - h * h * h).collect();
        assert!((neville_at_zero(&hs, &ys) - 3.0).abs() < 1e-12);
    }
}
