//! Diffeomorphisms with exact inverses: compositions of invertible linear
//! maps and triangular polynomial shears `xₜ ← xₜ + p(x₀, …, x_{t−1})`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::linalg::{to_matrix, to_rows};
use crate::model::SystemModel;

/// `coef · Π xⱼ^{exponents[j]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.coef, |acc, (e, v)| acc * v.powi(*e as i32))
    }

    fn partial(&self, j: usize) -> Option<Monomial> {
        let e = self.exponents[j];
        if e == 0 {
            return None;
        }
        let mut exponents = self.exponents.clone();
        exponents[j] -= 1;
        Some(Monomial {
            coef: self.coef * f64::from(e),
            exponents,
        })
    }

    fn expression(&self, z: &[Expression]) -> Expression {
        let vars = z[0].variables().to_vec();
        self.exponents
            .iter()
            .zip(z)
            .filter(|(e, _)| **e > 0)
            .fold(Expression::constant(self.coef, &vars), |acc, (e, zj)| {
                let factor = if *e == 1 { zj.clone() } else { zj.clone().powi(*e as i32) };
                acc * factor
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffeoStep {
    /// `x ← A x`.
    Linear { matrix: Vec<Vec<f64>> },
    /// `x[target] ← x[target] + Σ terms(x)`, terms only in coordinates
    /// before `target`.
    Shear { target: usize, terms: Vec<Monomial> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoSpec {
    pub id: String,
    pub dim: usize,
    pub steps: Vec<DiffeoStep>,
}

impl DiffeoSpec {
    pub fn identity(dim: usize) -> Self {
        DiffeoSpec {
            id: "identity".into(),
            dim,
            steps: Vec::new(),
        }
    }

    pub fn scaling(dim: usize, factor: f64) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { factor } else { 0.0 }).collect())
            .collect();
        DiffeoSpec {
            id: format!("scale({factor})"),
            dim,
            steps: vec![DiffeoStep::Linear { matrix }],
        }
    }

    /// `x_target ← x_target + coef · x_source^power`.
    pub fn simple_shear(dim: usize, target: usize, source: usize, coef: f64, power: u32) -> Self {
        let mut exponents = vec![0; dim];
        exponents[source] = power;
        DiffeoSpec {
            id: format!("shear(x{target} += {coef}*x{source}^{power})"),
            dim,
            steps: vec![DiffeoStep::Shear {
                target,
                terms: vec![Monomial { coef, exponents }],
            }],
        }
    }

    /// Random well-conditioned linear map followed by quadratic shears of
    /// every coordinate after the first.
    pub fn random<R: Rng>(dim: usize, rng: &mut R, id: impl Into<String>) -> Self {
        let matrix = loop {
            let m: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| f64::from(u8::from(i == j)) + 0.3 * rng.gen_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            if to_matrix(&m).determinant().abs() > 0.3 {
                break m;
            }
        };
        let mut steps = vec![DiffeoStep::Linear { matrix }];
        for target in 1..dim {
            let mut terms = Vec::new();
            for a in 0..target {
                for b in a..target {
                    let mut exponents = vec![0; dim];
                    exponents[a] += 1;
                    exponents[b] += 1;
                    terms.push(Monomial {
                        coef: rng.gen_range(-0.5..0.5),
                        exponents,
                    });
                }
            }
            steps.push(DiffeoStep::Shear { target, terms });
        }
        DiffeoSpec {
            id: id.into(),
            dim,
            steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for step in &self.steps {
            match step {
                DiffeoStep::Linear { matrix } => {
                    if matrix.len() != self.dim || matrix.iter().any(|r| r.len() != self.dim) {
                        return Err(Error::Dimension("linear step has wrong shape".into()));
                    }
                    if to_matrix(matrix).determinant() == 0.0 {
                        return Err(Error::Precondition("linear step is singular".into()));
                    }
                }
                DiffeoStep::Shear { target, terms } => {
                    if *target >= self.dim {
                        return Err(Error::Dimension(format!("shear target {target}")));
                    }
                    let bad = terms.iter().any(|m| {
                        m.exponents.len() != self.dim
                            || m.exponents[*target..].iter().any(|e| *e != 0)
                    });
                    if bad {
                        return Err(Error::Precondition(
                            "shear terms may only involve earlier coordinates".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        for step in &self.steps {
            match step {
                DiffeoStep::Linear { matrix } => {
                    z = matrix
                        .iter()
                        .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
                        .collect();
                }
                DiffeoStep::Shear { target, terms } => {
                    let p: f64 = terms.iter().map(|m| m.eval(&z)).sum();
                    z[*target] += p;
                }
            }
        }
        z
    }

    fn linear_inverse(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        to_matrix(matrix)
            .try_inverse()
            .map(|m: DMatrix<f64>| to_rows(&m))
            .ok_or_else(|| Error::Precondition("singular linear step".into()))
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut z = y.to_vec();
        for step in self.steps.iter().rev() {
            match step {
                DiffeoStep::Linear { matrix } => {
                    let inv = Self::linear_inverse(matrix)?;
                    z = inv
                        .iter()
                        .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
                        .collect();
                }
                DiffeoStep::Shear { target, terms } => {
                    let p: f64 = terms.iter().map(|m| m.eval(&z)).sum();
                    z[*target] -= p;
                }
            }
        }
        Ok(z)
    }

    /// `det DΦ`, constant for this family (shears are unimodular).
    pub fn jacobian_det(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| match s {
                DiffeoStep::Linear { matrix } => to_matrix(matrix).determinant(),
                DiffeoStep::Shear { .. } => 1.0,
            })
            .product()
    }

    /// `Φ⁻¹` as expressions in the target coordinates.
    pub fn inverse_expressions(&self, variables: &[String]) -> Result<Vec<Expression>> {
        let mut z: Vec<Expression> = (0..self.dim).map(|i| Expression::variable(i, variables)).collect();
        for step in self.steps.iter().rev() {
            match step {
                DiffeoStep::Linear { matrix } => {
                    let inv = Self::linear_inverse(matrix)?;
                    z = linear_combination(&inv, &z, variables);
                }
                DiffeoStep::Shear { target, terms } => {
                    let p = poly_expression(terms, &z, variables);
                    z[*target] = z[*target].clone() - p;
                }
            }
        }
        Ok(z)
    }

    /// `Φ⋆X`, `Φ⋆Cᵢ` and `ν_Φ = (ν · det DΦ)∘Φ⁻¹` as a new model.
    pub fn push_forward(&self, model: &SystemModel) -> Result<SystemModel> {
        self.validate()?;
        if model.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "diffeomorphism of R^{} applied to a model on R^{}",
                self.dim,
                model.dim()
            )));
        }
        let name = Some(format!(
            "{} pushed by {}",
            model.spec().name.as_deref().unwrap_or("model"),
            self.id
        ));
        if self.steps.is_empty() {
            let mut same = model.clone();
            same.rename(name);
            return Ok(same);
        }
        let vars = model.spec().variables.clone();
        let inv = self.inverse_expressions(&vars)?;

        // v = DΦ(x)·X(x) accumulated step by step along z = partial images of x
        let mut z = inv.clone();
        let mut v: Vec<Expression> = model
            .field()
            .components()
            .iter()
            .map(|c| c.expression().substitute(&inv))
            .collect();
        for step in &self.steps {
            match step {
                DiffeoStep::Linear { matrix } => {
                    v = linear_combination(matrix, &v, &vars);
                    z = linear_combination(matrix, &z, &vars);
                }
                DiffeoStep::Shear { target, terms } => {
                    let mut dv = Expression::constant(0.0, &vars);
                    for j in 0..*target {
                        let dp: Vec<Monomial> = terms.iter().filter_map(|m| m.partial(j)).collect();
                        if !dp.is_empty() {
                            dv = dv + poly_expression(&dp, &z, &vars) * v[j].clone();
                        }
                    }
                    let p = poly_expression(terms, &z, &vars);
                    v[*target] = v[*target].clone() + dv;
                    z[*target] = z[*target].clone() + p;
                }
            }
        }
        let integrals = model
            .integrals()
            .iter()
            .map(|c| c.expression().substitute(&inv))
            .collect();
        let det = self.jacobian_det();
        let nu = model.nu_field().map(|nu| {
            let composed = nu.expression().substitute(&inv);
            if det == 1.0 {
                composed
            } else {
                composed * Expression::constant(det, &vars)
            }
        });
        SystemModel::from_expressions(name, v, integrals, nu)
    }
}

/// `count` random diffeomorphisms from a ChaCha stream seeded with `seed`.
pub fn random_family(dim: usize, count: usize, seed: u64) -> Vec<DiffeoSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| DiffeoSpec::random(dim, &mut rng, format!("random-{seed}-{k}")))
        .collect()
}

fn linear_combination(matrix: &[Vec<f64>], z: &[Expression], vars: &[String]) -> Vec<Expression> {
    matrix
        .iter()
        .map(|row| {
            row.iter()
                .zip(z)
                .filter(|(a, _)| **a != 0.0)
                .fold(Expression::constant(0.0, vars), |acc, (a, e)| {
                    acc + Expression::constant(*a, vars) * e.clone()
                })
        })
        .collect()
}

fn poly_expression(terms: &[Monomial], z: &[Expression], vars: &[String]) -> Expression {
    terms
        .iter()
        .fold(Expression::constant(0.0, vars), |acc, m| acc + m.expression(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{make_builtin, BuiltinId};
    use crate::expr::Params;
    use crate::multilinear::norm;

    #[test]
    fn inverse_undoes_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..10 {
            let d = DiffeoSpec::random(3, &mut rng, format!("r{k}"));
            d.validate().unwrap();
            let x = [0.3, -1.1, 0.8];
            let back = d.inverse(&d.forward(&x)).unwrap();
            let err: Vec<f64> = back.iter().zip(x).map(|(a, b)| a - b).collect();
            assert!(norm(&err) < 1e-12);
            let vars: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
            let inv = d.inverse_expressions(&vars).unwrap();
            let y = d.forward(&x);
            for (e, xi) in inv.iter().zip(x) {
                assert!((e.eval(&y, &Params::new()).unwrap() - xi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pushed_field_is_the_tangent_map() {
        let m = make_builtin(&BuiltinId::Rikitake1 { beta: 1.5 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = DiffeoSpec::random(3, &mut rng, "r");
        let p = d.push_forward(&m).unwrap();
        let x = [0.4, -0.2, 0.9];
        let y = d.forward(&x);
        let fx = m.eval_field(&x).unwrap();
        // DΦ·X by central differences of the forward map along X
        let h = 1e-6;
        let plus: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a - h * b).collect();
        let (fp, fm) = (d.forward(&plus), d.forward(&minus));
        let approx: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let got = p.eval_field(&y).unwrap();
        for (a, b) in got.iter().zip(&approx) {
            assert!((a - b).abs() < 1e-7, "{got:?} vs {approx:?}");
        }
        let c0 = m.integral_values(&x).unwrap();
        let c1 = p.integral_values(&y).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            assert!((a - b).abs() < 1e-12);
        }
        let inferred = p.infer_nu(&y, 1e-9).unwrap();
        let nu_cfg = p.nu_field().unwrap().value(&y).unwrap();
        assert!((inferred.nu - nu_cfg).abs() < 1e-9 * nu_cfg.abs().max(1.0));
    }

    #[test]
    fn seeded_family_is_reproducible() {
        assert_eq!(random_family(3, 4, 42), random_family(3, 4, 42));
        assert_ne!(random_family(3, 1, 42), random_family(3, 1, 43));
    }

    #[test]
    fn shear_validation() {
        let mut d = DiffeoSpec::simple_shear(3, 1, 0, 1.0, 2);
        assert!(d.validate().is_ok());
        d.steps = vec![DiffeoStep::Shear {
            target: 0,
            terms: vec![Monomial {
                coef: 1.0,
                exponents: vec![0, 1, 0],
            }],
        }];
        assert!(d.validate().is_err());
    }
}
