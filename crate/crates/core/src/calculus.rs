//! Exact first and second derivatives of expression-backed fields via
//! forward-mode dual numbers, plus central finite differences as a check.

use crate::error::{EvalError, Result};
use crate::expr::{Dual, Dual1, Dual2, Expression, Params, Scalar};

/// A real-valued function on ℝⁿ with its parameters already bound.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expression,
}

impl ScalarField {
    pub fn new(expr: &Expression, params: &Params) -> Result<Self> {
        Ok(ScalarField {
            expr: expr.bind(params)?,
        })
    }

    /// Wrap an expression that references no parameters.
    pub fn from_bound(expr: Expression) -> Result<Self> {
        if let Some(p) = expr.parameters().into_iter().next() {
            return Err(EvalError::UnboundParameter(p).into());
        }
        Ok(ScalarField { expr })
    }

    pub fn parse(text: &str, variables: &[&str], params: &Params) -> Result<Self> {
        let names: Vec<&str> = params.keys().map(String::as_str).collect();
        let e = Expression::parse(text, variables, &names)?;
        Self::new(&e, params)
    }

    pub fn dim(&self) -> usize {
        self.expr.dimension()
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S, EvalError> {
        self.expr.eval(x, &Params::new())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?)
    }
}

/// The n components of a vector field on ℝⁿ.
#[derive(Debug, Clone)]
pub struct VectorFieldDef {
    components: Vec<ScalarField>,
}

impl VectorFieldDef {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let n = components.len();
        if components.iter().any(|c| c.dim() != n) {
            return Err(crate::error::Error::Dimension(format!(
                "vector field needs {n} components over {n} variables"
            )));
        }
        Ok(VectorFieldDef { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.value(x)).collect()
    }
}

fn seeded(x: &[f64], dir: usize) -> Vec<Dual1> {
    x.iter()
        .enumerate()
        .map(|(k, v)| Dual::new(*v, if k == dir { 1.0 } else { 0.0 }))
        .collect()
}

pub fn gradient(f: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    (0..x.len())
        .map(|j| Ok(f.eval(&seeded(x, j))?.eps))
        .collect()
}

/// Symmetric Hessian from hyper-dual evaluations, one per unordered pair.
pub fn hessian(f: &ScalarField, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let point: Vec<Dual2> = x
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let di = if k == i { 1.0 } else { 0.0 };
                    let dj = if k == j { 1.0 } else { 0.0 };
                    Dual::new(Dual::new(*v, di), Dual::new(dj, 0.0))
                })
                .collect();
            let d = f.eval(&point)?.eps.eps;
            h[i][j] = d;
            h[j][i] = d;
        }
    }
    Ok(h)
}

/// `J[i][j] = ∂Xᵢ/∂xⱼ`.
pub fn jacobian(field: &VectorFieldDef, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; field.dim()];
    for j in 0..n {
        let p = seeded(x, j);
        for (i, c) in field.components.iter().enumerate() {
            jac[i][j] = c.eval(&p)?.eps;
        }
    }
    Ok(jac)
}

/// Central finite differences, used only to cross-check the dual routes.
pub mod fd {
    use super::{Result, ScalarField, VectorFieldDef};

    // ε^{1/3} balances truncation and rounding for first differences,
    // ε^{1/4} for second differences
    fn step(x: f64, power: f64) -> f64 {
        f64::EPSILON.powf(power) * x.abs().max(1.0)
    }

    pub fn gradient(f: &ScalarField, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = step(x[i], 1.0 / 3.0);
                p[i] = x[i] + h;
                let up = f.value(&p)?;
                p[i] = x[i] - h;
                let down = f.value(&p)?;
                p[i] = x[i];
                Ok((up - down) / (2.0 * h))
            })
            .collect()
    }

    pub fn hessian(f: &ScalarField, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let mut h = vec![vec![0.0; n]; n];
        let mut p = x.to_vec();
        let f0 = f.value(x)?;
        for i in 0..n {
            let hi = step(x[i], 0.25);
            p[i] = x[i] + hi;
            let up = f.value(&p)?;
            p[i] = x[i] - hi;
            let down = f.value(&p)?;
            p[i] = x[i];
            h[i][i] = (up - 2.0 * f0 + down) / (hi * hi);
            for j in 0..i {
                let hj = step(x[j], 0.25);
                let mut eval = |si: f64, sj: f64| {
                    p[i] = x[i] + si * hi;
                    p[j] = x[j] + sj * hj;
                    let v = f.value(&p);
                    p[i] = x[i];
                    p[j] = x[j];
                    v
                };
                let d = (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?)
                    / (4.0 * hi * hj);
                h[i][j] = d;
                h[j][i] = d;
            }
        }
        Ok(h)
    }

    pub fn jacobian(field: &VectorFieldDef, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let rows: Result<Vec<Vec<f64>>> = field.components().iter().map(|c| gradient(c, x)).collect();
        rows
    }
}
