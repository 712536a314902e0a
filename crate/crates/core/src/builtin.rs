//! Ready-made models: the conservative Rikitake two-disc dynamo in both of
//! its Hamilton–Poisson realizations, and a rigid rotation whose every
//! quantity has a closed form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Params;
use crate::model::{build_model, ModelSpec, SystemModel};

const RIKITAKE_FIELD: [&str; 3] = ["y*z + beta*y", "x*z - beta*x", "-x*y"];
const RIKITAKE_I1: &str = "(x^2 + y^2)/2 + z^2";
const RIKITAKE_I2: &str = "(-x^2 + y^2)/4 - beta*z";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinId {
    /// Casimir `I₁`, Hamiltonian `I₂^β`, ν ≡ 1.
    Rikitake1 { beta: f64 },
    /// Casimir `I₂^β`, Hamiltonian `I₁`, ν ≡ −1.
    Rikitake2 { beta: f64 },
    /// `X = (−y, x, 0)`, Casimir `|x|²/2`, Hamiltonian `z`, ν ≡ 1.
    RotationOracle,
}

impl BuiltinId {
    /// Look up by CLI name, taking `beta` from `params` (default 1).
    pub fn from_name(name: &str, params: &Params) -> Result<BuiltinId> {
        let beta = params.get("beta").copied().unwrap_or(1.0);
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "rikitake1" | "rikitake_1" => Ok(BuiltinId::Rikitake1 { beta }),
            "rikitake2" | "rikitake_2" => Ok(BuiltinId::Rikitake2 { beta }),
            "rotation" | "rotation_oracle" | "rotationoracle" => Ok(BuiltinId::RotationOracle),
            other => Err(Error::Model(format!(
                "unknown builtin `{other}` (expected rikitake1, rikitake2 or rotation)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinId::Rikitake1 { .. } => "rikitake1",
            BuiltinId::Rikitake2 { .. } => "rikitake2",
            BuiltinId::RotationOracle => "rotation",
        }
    }
}

impl fmt::Display for BuiltinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinId::Rikitake1 { beta } | BuiltinId::Rikitake2 { beta } => {
                write!(f, "{}(beta={beta})", self.name())
            }
            BuiltinId::RotationOracle => write!(f, "{}", self.name()),
        }
    }
}

impl FromStr for BuiltinId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BuiltinId::from_name(s, &Params::new())
    }
}

fn xyz() -> Vec<String> {
    vec!["x".into(), "y".into(), "z".into()]
}

pub fn builtin_spec(id: &BuiltinId) -> Result<ModelSpec> {
    let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match *id {
        BuiltinId::Rikitake1 { beta } | BuiltinId::Rikitake2 { beta } => {
            if beta == 0.0 || !beta.is_finite() {
                return Err(Error::Model(format!("rikitake needs a nonzero beta, got {beta}")));
            }
            let first = matches!(id, BuiltinId::Rikitake1 { .. });
            let integrals = if first {
                [RIKITAKE_I1, RIKITAKE_I2]
            } else {
                [RIKITAKE_I2, RIKITAKE_I1]
            };
            Ok(ModelSpec {
                name: Some(id.name().into()),
                variables: xyz(),
                field: strings(&RIKITAKE_FIELD),
                integrals: strings(&integrals),
                nu: Some(if first { "1" } else { "-1" }.into()),
                parameters: Params::from([("beta".into(), beta)]),
            })
        }
        BuiltinId::RotationOracle => Ok(ModelSpec {
            name: Some(id.name().into()),
            variables: xyz(),
            field: strings(&["-y", "x", "0"]),
            integrals: strings(&["(x^2 + y^2 + z^2)/2", "z"]),
            nu: Some("1".into()),
            parameters: Params::new(),
        }),
    }
}

pub fn make_builtin(id: &BuiltinId) -> Result<SystemModel> {
    build_model(&builtin_spec(id)?)
}

/// Closed-form invariant of the Rikitake equilibrium `(0, 0, M)`.
pub fn rikitake_reference_invariant(beta: f64, m: f64) -> f64 {
    beta * beta - m * m
}

/// Deterministic samples on the three Rikitake equilibrium lines
/// `(M, 0, β)`, `(0, M, −β)`, `(0, 0, M)`, cycling through the lines with
/// `M = β·s` for `s = 1, −1, 2, −2, 3, …`.
pub fn rikitake_equilibrium_seeds(beta: f64, count: usize) -> Result<Vec<[f64; 3]>> {
    if count < 3 {
        return Err(Error::Precondition(format!("need at least 3 seeds, got {count}")));
    }
    Ok((0..count)
        .map(|k| {
            let round = k / 3;
            let magnitude = (round / 2 + 1) as f64;
            let m = beta * if round % 2 == 0 { magnitude } else { -magnitude };
            match k % 3 {
                0 => [m, 0.0, beta],
                1 => [0.0, m, -beta],
                _ => [0.0, 0.0, m],
            }
        })
        .collect())
}
