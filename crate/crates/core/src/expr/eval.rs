use super::{BinOp, Expression, Func, Node, NodeKind, Params, Scalar};
use crate::error::EvalError;

fn domain(node: &Node, message: impl Into<String>) -> EvalError {
    EvalError::Domain {
        pos: node.pos,
        message: message.into(),
    }
}

impl Expression {
    /// Evaluate at `point` over any scalar algebra.
    ///
    /// Domain checks look at the real part. When `S` carries infinitesimals,
    /// points where the requested derivative does not exist (`abs` or `sqrt`
    /// at zero) are errors as well.
    pub fn eval<S: Scalar>(&self, point: &[S], params: &Params) -> Result<S, EvalError> {
        if point.len() != self.variables.len() {
            return Err(EvalError::Arity {
                expected: self.variables.len(),
                got: point.len(),
            });
        }
        eval_node(&self.root, point, params)
    }
}

fn eval_node<S: Scalar>(node: &Node, point: &[S], params: &Params) -> Result<S, EvalError> {
    match &node.kind {
        NodeKind::Const(c) => Ok(S::from_f64(*c)),
        NodeKind::Var(i) => Ok(point[*i]),
        NodeKind::Param(name) => params
            .get(name)
            .map(|v| S::from_f64(*v))
            .ok_or_else(|| EvalError::UnboundParameter(name.clone())),
        NodeKind::Neg(a) => Ok(-eval_node(a, point, params)?),
        NodeKind::Call(func, a) => {
            let v = eval_node(a, point, params)?;
            call(node, *func, v)
        }
        NodeKind::Binary(op, l, r) => {
            let a = eval_node(l, point, params)?;
            let b = eval_node(r, point, params)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b.re() == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    Ok(a / b)
                }
                BinOp::Pow => pow(node, r, a, b),
            }
        }
    }
}

fn call<S: Scalar>(node: &Node, func: Func, v: S) -> Result<S, EvalError> {
    let x = v.re();
    Ok(match func {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Log => {
            if x <= 0.0 {
                return Err(domain(node, format!("log of non-positive value {x}")));
            }
            v.ln()
        }
        Func::Sqrt => {
            if x < 0.0 {
                return Err(domain(node, format!("sqrt of negative value {x}")));
            }
            if x == 0.0 && S::ORDER > 0 {
                return Err(domain(node, "sqrt is not differentiable at 0"));
            }
            v.sqrt()
        }
        Func::Abs => {
            if x == 0.0 && S::ORDER > 0 {
                return Err(domain(node, "abs is not differentiable at 0"));
            }
            v.abs()
        }
    })
}

fn pow<S: Scalar>(node: &Node, exponent_node: &Node, base: S, exponent: S) -> Result<S, EvalError> {
    let e = exponent.re();
    let integral = e.fract() == 0.0 && e.abs() <= f64::from(i32::MAX);
    if integral && (exponent.is_real() || !exponent_node.depends_on_variables()) {
        let n = e as i32;
        if n < 0 && base.re() == 0.0 {
            return Err(domain(node, "zero raised to a negative power"));
        }
        return Ok(base.powi(n));
    }
    if base.re() <= 0.0 {
        return Err(domain(
            node,
            format!("non-positive base {} with non-integer or variable exponent", base.re()),
        ));
    }
    Ok(base.powf(exponent))
}
